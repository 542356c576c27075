import numpy as np
import pytest

from layermix.optim import AdamState, adam_step


def step(params, grads, **kwargs):
    state = kwargs.pop("state", None) or AdamState(**kwargs)
    adam_step(params, grads, state)
    return state


class TestAdam:
    def test_first_step_closed_form(self):
        # m_hat = 1, v_hat = 1 after one step, so theta1 = -lr / (1 + eps)
        params = {"w": np.zeros(1)}
        step(params, {"w": np.ones(1)}, lr=0.1)
        assert params["w"][0] == pytest.approx(-0.1 / (1 + 1e-8), abs=1e-12)

    def test_zero_gradient_keeps_parameters(self):
        params = {"w": np.array([1.5, -2.0])}
        step(params, {"w": np.zeros(2)})
        np.testing.assert_array_equal(params["w"], [1.5, -2.0])

    def test_elementwise_independence_under_permutation(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=4)
        grads = rng.normal(size=4)
        params_a = {"w": values.copy()}
        step(params_a, {"w": grads.copy()})
        perm = np.array([2, 0, 3, 1])
        params_b = {"w": values[perm].copy()}
        step(params_b, {"w": grads[perm].copy()})
        np.testing.assert_array_equal(params_a["w"][perm], params_b["w"])

    def test_first_step_bounded_by_lr(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            params = {"w": rng.normal(size=5)}
            before = params["w"].copy()
            scale = 10.0 ** float(rng.integers(-3, 4))
            step(params, {"w": rng.normal(size=5) * scale}, lr=0.01)
            assert np.all(np.abs(params["w"] - before) <= 0.01 * (1 + 1e-6))

    def test_first_step_sign_opposes_gradient(self):
        rng = np.random.default_rng(2)
        params = {"w": rng.normal(size=6)}
        grads = {"w": rng.normal(size=6)}
        before = params["w"].copy()
        step(params, grads)
        moved = params["w"] - before
        nonzero = grads["w"] != 0
        assert np.all(np.sign(moved[nonzero]) == -np.sign(grads["w"][nonzero]))

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=3)
        grads = rng.normal(size=3)
        runs = []
        for _ in range(2):
            params = {"w": values.copy()}
            state = AdamState()
            for _ in range(5):
                adam_step(params, {"w": grads.copy()}, state)
            runs.append(params["w"])
        np.testing.assert_array_equal(runs[0], runs[1])

    def test_multiple_parameters_updated_independently(self):
        rng = np.random.default_rng(4)
        a, b = rng.normal(size=2), rng.normal(size=3)
        ga, gb = rng.normal(size=2), rng.normal(size=3)
        joint = {"a": a.copy(), "b": b.copy()}
        step(joint, {"a": ga, "b": gb})
        alone = {"a": a.copy()}
        step(alone, {"a": ga})
        np.testing.assert_array_equal(joint["a"], alone["a"])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            step({"w": np.zeros(2)}, {"w": np.zeros(3)})
        with pytest.raises(ValueError):
            step({"w": np.zeros(2)}, {"nope": np.zeros(2)})

    def test_global_norm_clipping(self):
        params = {"w": np.zeros(2)}
        grads = {"w": np.array([30.0, 40.0])}  # norm 50
        state = AdamState(clip_norm=5.0)
        adam_step(params, grads, state)
        # clipped gradient is (3, 4); first moments reflect the scaled values
        np.testing.assert_allclose(state.m["w"], [0.3, 0.4], rtol=1e-12)

    def test_moment_counter_advances(self):
        state = AdamState()
        params = {"w": np.zeros(1)}
        for expected in (1, 2, 3):
            adam_step(params, {"w": np.ones(1)}, state)
            assert state.t == expected
