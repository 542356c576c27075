#!/usr/bin/env python3
"""Benchmark the compiled LSTM kernels against the numpy fallback.

Times the sequence forward and full BPTT backward passes at a few sizes, then
one full training run of the tagger on a generated fixture per backend.

    python3 benchmarks/bench_kernels.py [--skip-train]
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from layermix.kernels import pyref  # noqa: E402

try:
    from layermix.kernels import _native
except ImportError:
    _native = None


def time_call(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def bench_kernels():
    rng = np.random.default_rng(0)
    sizes = [(10, 16, 25), (40, 48, 100), (80, 100, 100)]
    print(f"{'n':>4} {'d_in':>5} {'h':>4} {'op':>8} {'numpy':>10} {'native':>10} {'speedup':>8}")
    for n, d_in, hidden in sizes:
        x = rng.normal(size=(n, d_in))
        w_x = rng.normal(size=(4 * hidden, d_in))
        w_h = rng.normal(size=(4 * hidden, hidden)) * 0.3
        b = rng.normal(size=4 * hidden)
        mask = np.ones(hidden)
        grad_h = rng.normal(size=(n, hidden))

        t_fwd_py = time_call(lambda: pyref.lstm_forward(x, w_x, w_h, b, mask), repeats=20)
        cache = pyref.lstm_forward(x, w_x, w_h, b, mask)
        t_bwd_py = time_call(
            lambda: pyref.lstm_backward(grad_h, x, w_x, w_h, mask, *cache), repeats=20
        )
        if _native is not None:
            t_fwd_nat = time_call(lambda: _native.lstm_forward(x, w_x, w_h, b, mask), repeats=20)
            t_bwd_nat = time_call(
                lambda: _native.lstm_backward(grad_h, x, w_x, w_h, mask, *cache), repeats=20
            )
        else:
            t_fwd_nat = t_bwd_nat = float("nan")
        for op, t_py, t_nat in (("forward", t_fwd_py, t_fwd_nat), ("backward", t_bwd_py, t_bwd_nat)):
            speedup = t_py / t_nat if t_nat == t_nat else float("nan")
            print(
                f"{n:>4} {d_in:>5} {hidden:>4} {op:>8} "
                f"{t_py * 1e6:>8.0f}us {t_nat * 1e6:>8.0f}us {speedup:>7.1f}x"
            )


def bench_training():
    import importlib
    import os

    from layermix import synth

    out = Path(tempfile.mkdtemp())
    spec = synth.SynthSpec(n_train=100, n_dev=20, n_test=20, seed=9)
    synth.write_fixtures(synth.generate(spec), out)

    results = {}
    backends = ["python"] + (["native"] if _native is not None else [])
    for backend in backends:
        os.environ["LAYERMIX_KERNELS"] = backend
        import layermix.kernels
        import layermix.neuralnet
        import layermix.model
        import layermix.harness

        importlib.reload(layermix.kernels)
        importlib.reload(layermix.neuralnet)
        importlib.reload(layermix.model)
        harness = importlib.reload(layermix.harness)

        config = harness.ExperimentConfig(
            train_embeddings=str(out / "train.mleb"),
            train_labels=str(out / "train.conll"),
            dev_embeddings=str(out / "dev.mleb"),
            dev_labels=str(out / "dev.conll"),
            test_embeddings=str(out / "test.mleb"),
            test_labels=str(out / "test.conll"),
            scheme="wavg:0,1,2",
            hidden_size=50,
            dropout=0.25,
            batch_size=16,
            max_epochs=3,
            seeds=[1],
        )
        started = time.perf_counter()
        run = harness.train_one(config, 1)
        results[backend] = (time.perf_counter() - started, run.test_score)
    print("\nfull training run (100 sentences, h=50, 3 epochs):")
    for backend, (seconds, score) in results.items():
        print(f"  {backend:>7}: {seconds:6.2f}s  test={score:.4f}")
    if len(results) == 2:
        print(f"  speedup: {results['python'][0] / results['native'][0]:.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--skip-train", action="store_true", help="kernel micro-benchmarks only")
    args = parser.parse_args()
    if _native is None:
        print("compiled kernels not built (python setup.py build_ext --inplace); "
              "showing numpy fallback only\n")
    bench_kernels()
    if not args.skip_train:
        bench_training()


if __name__ == "__main__":
    main()
