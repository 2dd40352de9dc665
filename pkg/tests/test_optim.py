"""Adam optimizer: update arithmetic, decay placement, divergence guards."""

import numpy as np
import pytest

from melmask.autodiff import Tensor, mul, sum_
from melmask.errors import DivergenceError
from melmask.optim import Adam, AdamState, adam_step
from melmask.params import Parameter


def hand_adam(p0, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8, wd=0.0):
    """Scalar transcription of the update rule, one gradient at a time."""
    p = float(p0)
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        p -= lr * wd * p
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)
    return p


class TestAdamStep:
    def test_first_step_matches_hand_calculation(self):
        p = {"w": np.array([1.0])}
        state = AdamState()
        adam_step(p, {"w": np.array([0.5])}, state, lr=0.01)
        assert p["w"][0] == pytest.approx(hand_adam(1.0, [0.5], 0.01), abs=1e-15)

    def test_multi_step_sequence(self):
        grads = [0.5, -0.2, 1.3, 0.0, -0.7]
        p = {"w": np.array([2.0])}
        state = AdamState()
        for g in grads:
            adam_step(p, {"w": np.array([g])}, state, lr=0.05)
        assert p["w"][0] == pytest.approx(hand_adam(2.0, grads, 0.05), abs=1e-12)
        assert state.t == 5

    def test_first_step_size_is_about_lr(self):
        # Bias correction makes the first step lr * g/(|g| + eps).
        p = {"w": np.array([0.0])}
        adam_step(p, {"w": np.array([1e-3])}, AdamState(), lr=0.1)
        assert p["w"][0] == pytest.approx(-0.1, rel=1e-4)

    def test_decay_applied_before_moment_update(self):
        # With zero gradient the moments stay zero, so the entire change
        # is the multiplicative shrink.
        p = {"w": np.array([4.0])}
        state = AdamState()
        adam_step(p, {"w": np.array([0.0])}, state, lr=0.1, weight_decay=0.01)
        assert p["w"][0] == pytest.approx(4.0 * (1 - 0.1 * 0.01), abs=1e-15)
        assert state.m["w"][0] == 0.0

    def test_decay_decoupled_from_gradient(self):
        grads = [0.3, -0.1]
        p = {"w": np.array([1.5])}
        state = AdamState()
        for g in grads:
            adam_step(p, {"w": np.array([g])}, state, lr=0.02, weight_decay=0.1)
        assert p["w"][0] == pytest.approx(
            hand_adam(1.5, grads, 0.02, wd=0.1), abs=1e-12
        )

    def test_frozen_parameters_skipped(self):
        p = {"w": np.array([1.0]), "frozen": np.array([7.0])}
        state = AdamState()
        adam_step(p, {"w": np.array([1.0])}, state, lr=0.1)
        assert p["frozen"][0] == 7.0
        assert "frozen" not in state.m

    def test_shared_step_counter(self):
        p = {"a": np.array([1.0]), "b": np.array([1.0])}
        state = AdamState()
        adam_step(p, {"a": np.array([1.0])}, state, lr=0.1)
        adam_step(p, {"b": np.array([1.0])}, state, lr=0.1)
        # b's first gradient arrives at t=2 and is bias-corrected as such.
        assert state.t == 2

    def test_nan_gradient_named(self):
        p = {"ok": np.array([1.0]), "bad.weight": np.array([1.0])}
        grads = {"ok": np.array([0.1]), "bad.weight": np.array([np.nan])}
        with pytest.raises(DivergenceError, match="bad.weight"):
            adam_step(p, grads, AdamState(), lr=0.1)

    def test_shape_mismatch_named(self):
        p = {"w": np.array([1.0, 2.0])}
        with pytest.raises(DivergenceError, match="'w'"):
            adam_step(p, {"w": np.array([1.0])}, AdamState(), lr=0.1)


class TestAdamWrapper:
    def test_step_consumes_grads_in_place(self):
        param = Parameter("w", np.array([1.0, -2.0]))
        opt = Adam([param], lr=0.5)
        loss = sum_(mul(param.node, param.node))
        loss.backward()
        before = param.node.data.copy()
        opt.step()
        assert not np.array_equal(param.node.data, before)
        assert param.node.grad is None

    def test_matches_bare_adam_step(self):
        rng = np.random.default_rng(0)
        w0 = rng.standard_normal(4)
        param = Parameter("w", w0)
        opt = Adam([param], lr=0.01, weight_decay=0.001)

        raw = {"w": w0.copy()}
        state = AdamState()
        for _ in range(3):
            sum_(mul(param.node, param.node)).backward()
            g = param.node.grad.copy()
            opt.step()
            adam_step(raw, {"w": g}, state, lr=0.01, weight_decay=0.001)
        np.testing.assert_array_equal(param.node.data, raw["w"])

    def test_duplicate_names_rejected(self):
        a = Parameter("w", np.array([1.0]))
        b = Parameter("w", np.array([2.0]))
        with pytest.raises(ValueError, match="duplicate"):
            Adam([a, b], lr=0.1)

    def test_state_round_trip(self):
        param = Parameter("w", np.array([1.0]))
        opt = Adam([param], lr=0.1)
        for _ in range(2):
            sum_(mul(param.node, param.node)).backward()
            opt.step()
        blob = opt.state_dict()

        clone = Adam([Parameter("w", np.array([1.0]))], lr=0.1)
        clone.load_state_dict(blob)
        assert clone.state.t == opt.state.t
        np.testing.assert_array_equal(clone.state.m["w"], opt.state.m["w"])
        np.testing.assert_array_equal(clone.state.v["w"], opt.state.v["w"])

    def test_missing_grad_leaves_parameter(self):
        a = Parameter("a", np.array([1.0]))
        b = Parameter("b", np.array([5.0]))
        opt = Adam([a, b], lr=0.1)
        sum_(mul(a.node, a.node)).backward()
        opt.step()
        assert b.node.data[0] == 5.0
