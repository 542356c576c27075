import numpy as np
import pytest

from layermix import kernels
from layermix.kernels import pyref
from tests.helpers import finite_difference, max_rel_err

try:
    from layermix.kernels import _native
except ImportError:
    _native = None


def random_instance(rng, n=None, d_in=None, hidden=None, with_mask=True):
    n = n or int(rng.integers(1, 6))
    d_in = d_in or int(rng.integers(1, 5))
    hidden = hidden or int(rng.integers(1, 5))
    x = rng.normal(size=(n, d_in))
    w_x = rng.normal(size=(4 * hidden, d_in))
    w_h = rng.normal(size=(4 * hidden, hidden)) * 0.5
    b = rng.normal(size=4 * hidden)
    if with_mask and rng.random() < 0.5:
        mask = (rng.random(hidden) >= 0.4) / 0.6
    else:
        mask = np.ones(hidden)
    return x, w_x, w_h, b, mask


class TestBackendSelection:
    def test_backend_exposes_kernel_functions(self):
        assert kernels.BACKEND in ("python", "native")
        assert callable(kernels.lstm_forward)
        assert callable(kernels.lstm_backward)


@pytest.mark.skipif(_native is None, reason="compiled kernels not built")
class TestBackendAgreement:
    def test_forward_matches(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            x, w_x, w_h, b, mask = random_instance(rng)
            ref = pyref.lstm_forward(x, w_x, w_h, b, mask)
            nat = _native.lstm_forward(x, w_x, w_h, b, mask)
            for a, c in zip(ref, nat):
                np.testing.assert_allclose(a, c, rtol=1e-12, atol=1e-14)

    def test_backward_matches(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            x, w_x, w_h, b, mask = random_instance(rng)
            cache = pyref.lstm_forward(x, w_x, w_h, b, mask)
            grad_h = rng.normal(size=cache[0].shape)
            ref = pyref.lstm_backward(grad_h, x, w_x, w_h, mask, *cache)
            nat = _native.lstm_backward(grad_h, x, w_x, w_h, mask, *cache)
            for a, c in zip(ref, nat):
                np.testing.assert_allclose(a, c, rtol=1e-12, atol=1e-14)


class TestKernelGradients:
    def test_backward_matches_finite_differences(self, kernel_backend):
        rng = np.random.default_rng(2)
        for _ in range(10):
            x, w_x, w_h, b, mask = random_instance(rng)
            h_seq, _, _ = kernel_backend.lstm_forward(x, w_x, w_h, b, mask)
            probe = rng.normal(size=h_seq.shape)

            def loss():
                h, _, _ = kernel_backend.lstm_forward(x, w_x, w_h, b, mask)
                return float((h * probe).sum())

            cache = kernel_backend.lstm_forward(x, w_x, w_h, b, mask)
            grad_x, grad_wx, grad_wh, grad_b = kernel_backend.lstm_backward(
                probe, x, w_x, w_h, mask, *cache
            )
            numeric = finite_difference(loss, {"x": x, "w_x": w_x, "w_h": w_h, "b": b})
            for name, analytic in (
                ("x", grad_x),
                ("w_x", grad_wx),
                ("w_h", grad_wh),
                ("b", grad_b),
            ):
                assert max_rel_err(analytic, numeric[name]) < 1e-4, name

    def test_zero_recurrent_mask_makes_w_h_inert(self, kernel_backend):
        # the recurrent matrix only ever multiplies mask * h_prev, so a zero
        # mask must behave exactly like a zero recurrent matrix
        rng = np.random.default_rng(3)
        x, w_x, w_h, b, _ = random_instance(rng, n=4)
        hidden = w_h.shape[1]
        masked = kernel_backend.lstm_forward(x, w_x, 100.0 * w_h, b, np.zeros(hidden))
        no_recurrence = kernel_backend.lstm_forward(
            x, w_x, np.zeros_like(w_h), b, np.ones(hidden)
        )
        for a, c in zip(masked, no_recurrence):
            np.testing.assert_array_equal(a, c)
