import numpy as np
import pytest

from layermix import synth
from layermix.kernels import pyref

try:
    from layermix.kernels import _native
except ImportError:
    _native = None

_BACKENDS = {"python": pyref}
if _native is not None:
    _BACKENDS["native"] = _native


@pytest.fixture(params=sorted(_BACKENDS))
def kernel_backend(request):
    """Each available kernel implementation (numpy fallback, compiled if built)."""
    return _BACKENDS[request.param]


def random_embedding_dataset(rng, num_layers=None, dim=None, max_sentences=4, max_tokens=5):
    """Random float32 dataset; values drawn finite by construction."""
    from layermix.embedstore import EmbeddingDataset, SentenceEmbedding

    num_layers = num_layers or int(rng.integers(1, 4))
    dim = dim or int(rng.integers(1, 6))
    sentences = []
    for s in range(int(rng.integers(0, max_sentences + 1))):
        n = int(rng.integers(1, max_tokens + 1))
        tokens = [f"tok{s}.{i}" for i in range(n)]
        if rng.random() < 0.3:
            tokens[0] = "naïve—" + tokens[0]  # exercise multi-byte UTF-8
        layers = rng.normal(size=(num_layers, n, dim)).astype(np.float32)
        sentences.append(SentenceEmbedding(tokens=tokens, layers=layers))
    return EmbeddingDataset(num_layers=num_layers, dim=dim, sentences=sentences)


@pytest.fixture(scope="session")
def small_fixture_dir(tmp_path_factory):
    """A small generated dataset on disk for harness/CLI tests."""
    out = tmp_path_factory.mktemp("fixture")
    spec = synth.SynthSpec(
        layers=3,
        dim=8,
        tags=3,
        n_train=24,
        n_dev=8,
        n_test=8,
        min_len=3,
        max_len=6,
        informative_layer=1,
        sigma_signal=0.1,
        sigma_noise=1.0,
        scheme="PLAIN",
        seed=7,
    )
    synth.write_fixtures(synth.generate(spec), out)
    return out


def experiment_config(fixture_dir, **overrides):
    from layermix.harness import ExperimentConfig

    base = dict(
        train_embeddings=str(fixture_dir / "train.mleb"),
        train_labels=str(fixture_dir / "train.conll"),
        dev_embeddings=str(fixture_dir / "dev.mleb"),
        dev_labels=str(fixture_dir / "dev.conll"),
        test_embeddings=str(fixture_dir / "test.mleb"),
        test_labels=str(fixture_dir / "test.conll"),
        scheme="layer:1",
        hidden_size=8,
        dropout=0.25,
        lr=0.01,
        batch_size=4,
        max_epochs=6,
        seeds=[1, 2],
        metric="accuracy",
        tag_scheme="PLAIN",
    )
    base.update(overrides)
    return ExperimentConfig(**base)
