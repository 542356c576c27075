"""Tools for combining multi-layer token embeddings in a BiLSTM-CRF tagger.

Subpackages and modules:

- ``embedstore``: binary multi-layer embedding files (MLEB), CoNLL corpora,
  and alignment of the two into training-ready datasets.
- ``mixer``: the layer combination schemes (single layer, concatenation,
  fixed average, learned softmax-weighted average over a layer subset).
- ``neuralnet``: linear layer, LSTM, bidirectional LSTM and variational
  dropout with manual backpropagation.
- ``crf``: linear-chain CRF scoring, log-partition, NLL gradient and
  Viterbi decoding.
- ``optim``: Adam with bias correction.
- ``metrics``: token accuracy and exact-match chunk F1.
- ``synth``: synthetic fixture generation with a controllable informative
  layer, plus a nearest-prototype oracle.
- ``harness``: multi-seed training runs, Welch significance tests and
  scheme comparison reports.
- ``cli``: the ``layermix`` command-line entry point.
"""

__version__ = "0.1.0"
