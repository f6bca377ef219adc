import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seqlab import numeric as nm
from seqlab.numeric import (
    NumericError,
    Parameter,
    RngState,
    Tensor,
    grad_check,
    log_sum_exp,
    sgd_step,
)

finite_floats = st.floats(min_value=-50, max_value=50, allow_nan=False)


class TestLogSumExp:
    def test_single_element_identity(self):
        assert log_sum_exp([0.0]) == 0.0

    def test_two_equal(self):
        assert log_sum_exp([5.0, 5.0]) == pytest.approx(5.0 + math.log(2.0), abs=1e-12)

    def test_three_values(self):
        # frozen from a high-precision summation oracle (mpmath, 50 digits)
        assert log_sum_exp([1.0, 2.0, 3.0]) == pytest.approx(3.40760596444438, abs=1e-11)

    def test_empty_raises(self):
        with pytest.raises(NumericError):
            log_sum_exp([])

    def test_nan_raises(self):
        with pytest.raises(NumericError):
            log_sum_exp([1.0, float("nan")])

    @given(st.lists(finite_floats, min_size=1, max_size=20))
    def test_bounds(self, vs):
        out = log_sum_exp(vs)
        assert out >= max(vs) - 1e-12
        assert out <= max(vs) + math.log(len(vs)) + 1e-12

    @given(st.lists(finite_floats, min_size=1, max_size=20), finite_floats)
    def test_shift_invariance(self, vs, c):
        shifted = log_sum_exp([v + c for v in vs])
        assert shifted == pytest.approx(log_sum_exp(vs) + c, abs=1e-12 * max(1.0, abs(c)))


class TestGradCheck:
    def test_quadratic(self):
        x = Parameter(np.array([3.0]), "x")

        def loss():
            return nm.tsum(nm.mul(x, x))

        assert grad_check(loss, [x]) < 1e-8

    def test_constant_loss(self):
        x = Parameter(np.array([1.0, -2.0]), "x")

        def loss():
            return nm.tsum(nm.mul(x, 0.0))

        assert grad_check(loss, [x]) == 0.0

    def test_nondeterministic_rejected(self):
        x = Parameter(np.array([1.0]), "x")
        state = {"calls": 0}

        def loss():
            state["calls"] += 1
            return nm.tsum(nm.mul(x, float(state["calls"])))

        with pytest.raises(NumericError):
            grad_check(loss, [x])

    def test_composite_ops(self):
        rng = RngState(0)
        w = Parameter(rng.uniform(-1, 1, (3, 4)), "w")
        b = Parameter(rng.uniform(-1, 1, (4,)), "b")
        x = Tensor(rng.uniform(-1, 1, (2, 3)))

        def loss():
            h = nm.tanh(nm.add(nm.matmul(x, w), b))
            s = nm.sigmoid(h)
            z = nm.logsumexp(s, axis=1)
            m = nm.tmax(h, axis=1)
            return nm.tsum(z) + nm.tsum(nm.mul(m, m))

        assert grad_check(loss, [w, b]) < 1e-6

    def test_gather_ops(self):
        rng = RngState(1)
        e = Parameter(rng.uniform(-1, 1, (5, 3)), "emb")
        idx = np.array([[0, 2], [4, 2]])

        def loss():
            rows = nm.gather(e, idx)
            picked = nm.gather_nd(e, np.array([1, 1]), np.array([0, 2]))
            return nm.tsum(nm.mul(rows, rows)) + nm.tsum(picked)

        assert grad_check(loss, [e]) < 1e-6


class TestSgdStep:
    def test_initial_lr(self):
        p = Parameter(np.array([1.0]), "p")
        p.grad[:] = 1.0
        lr = sgd_step([p], 0.01, 0.05, 0)
        assert lr == 0.01
        assert p.data[0] == pytest.approx(0.99)

    def test_decayed_lr_epoch_1(self):
        p = Parameter(np.array([0.0]), "p")
        lr = sgd_step([p], 0.01, 0.05, 1)
        assert lr == pytest.approx(0.01 / 1.05, abs=1e-12)
        assert lr == pytest.approx(0.0095238, abs=1e-7)

    def test_zero_gradient_no_change(self):
        p = Parameter(np.array([1.5, -2.5]), "p")
        before = p.data.copy()
        sgd_step([p], 0.01, 0.05, 0)
        assert np.array_equal(p.data, before)

    def test_zero_lr_bit_identical(self):
        p = Parameter(np.array([1.0, 2.0]), "p")
        p.grad[:] = [3.0, -4.0]
        before = p.data.tobytes()
        sgd_step([p], 0.0, 0.05, 0)
        assert p.data.tobytes() == before

    def test_clipping(self):
        p = Parameter(np.zeros(1), "p")
        p.grad[:] = 10.0
        sgd_step([p], 1.0, 0.0, 0, clip_norm=5.0)
        assert p.data[0] == pytest.approx(-5.0)

    def test_nonfinite_gradient_names_parameter(self):
        p = Parameter(np.zeros(1), "culprit")
        p.grad[:] = np.nan
        with pytest.raises(NumericError, match="culprit"):
            sgd_step([p], 0.01, 0.05, 0)

    def test_gradients_zeroed_after_step(self):
        p = Parameter(np.zeros(2), "p")
        p.grad[:] = 1.0
        sgd_step([p], 0.01, 0.05, 0)
        assert np.array_equal(p.grad, np.zeros(2))


class TestRngState:
    def test_reproducible(self):
        a = RngState(42)
        b = RngState(42)
        assert np.array_equal(a.random(10), b.random(10))

    def test_children_independent_of_sibling_use(self):
        a = RngState(7)
        b = RngState(7)
        a.child("x").random(100)
        assert np.array_equal(a.child("y").random(5), b.child("y").random(5))

    def test_algorithm_identifier(self):
        assert RngState(0).algorithm == "pcg64"
