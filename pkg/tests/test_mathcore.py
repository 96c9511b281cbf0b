import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from readagain import mathcore as mc
from readagain.mathcore import ParamTensor, Tape, grad_check


def test_affine_examples():
    assert np.array_equal(mc.affine(np.zeros((2, 2)), [3.0, 4.0], np.zeros(2)), [0.0, 0.0])
    assert np.array_equal(mc.affine(np.eye(2), [3.0, 4.0]), [3.0, 4.0])
    # hand multiply: [1*1+2*1+1, 3*1+4*1+0]
    assert np.array_equal(mc.affine(np.array([[1.0, 2], [3, 4]]), [1.0, 1.0], [1.0, 0.0]),
                          [4.0, 7.0])


def test_affine_shape_errors_name_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2,\)"):
        mc.affine(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ValueError, match="b"):
        mc.affine(np.zeros((2, 2)), np.zeros(2), np.zeros(3))


def test_elementwise_examples():
    assert mc.sigmoid(np.array([0.0]))[0] == 0.5
    assert mc.tanh(np.array([0.0]))[0] == 0.0
    assert np.array_equal(mc.hadamard([2.0, 3.0], [4.0, 5.0]), [8.0, 15.0])
    with pytest.raises(ValueError):
        mc.hadamard([1.0], [1.0, 2.0])


def test_sigmoid_range_and_extremes():
    v = mc.sigmoid(np.array([-800.0, -30.0, 30.0, 800.0]))
    assert np.all((v >= 0) & (v <= 1)) and np.all(np.isfinite(v))
    mid = mc.sigmoid(np.linspace(-20, 20, 41))
    assert np.all((mid > 0) & (mid < 1))


def test_softmax_examples():
    assert np.array_equal(mc.softmax(np.zeros(2)), [0.5, 0.5])
    p = mc.softmax(np.log([1.0, 2.0, 3.0]))
    assert np.allclose(p, [1 / 6, 2 / 6, 3 / 6], atol=1e-15, rtol=0)
    assert np.array_equal(mc.softmax(np.array([5.0, -np.inf])), [1.0, 0.0])


def test_softmax_empty_support():
    with pytest.raises(ValueError, match="empty support"):
        mc.softmax(np.array([-np.inf, -np.inf]))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-30, 30)),
       st.floats(-50, 50))
def test_softmax_shift_invariance(v, c):
    p = mc.softmax(v)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p >= 0)
    assert np.max(np.abs(mc.softmax(v + c) - p)) <= 1e-12


def test_masked_softmax_slots_get_no_gradient():
    tape = Tape()
    pt = ParamTensor("v", np.array([1.0, 2.0, 0.5]))
    v = tape.param(pt)
    mask = tape.var(np.array([0.0, -np.inf, 0.0]))
    p = mc.softmax(mc.add(v, mask))
    assert p.value[1] == 0.0
    tape.backward(mc.neg_log_sum(p, [0]))
    assert pt.grad[1] == 0.0 and pt.grad[0] != 0.0


def test_param_tensor_invariants():
    p = ParamTensor("w", np.ones((2, 3)))
    assert p.grad.shape == p.values.shape
    p.grad += 5.0
    mc.zero_grads([p])
    assert np.all(p.grad == 0.0)


def _tape_loss(fn, params):
    def run():
        tape = Tape()
        out = fn(tape, *[tape.param(p) for p in params])
        tape.backward(out)
        return float(out.value)
    return run


def test_grad_check_square():
    theta = ParamTensor("theta", np.array([3.0]))
    f = _tape_loss(lambda t, th: mc.total(mc.hadamard(th, th)), [theta])
    assert grad_check(f, [theta], eps=1e-4) <= 1e-8
    assert theta.grad[0] == pytest.approx(6.0)


def test_grad_check_constant_softmax_sum():
    theta = ParamTensor("theta", np.array([0.3, -1.2, 2.0]))
    f = _tape_loss(lambda t, th: mc.total(mc.softmax(th)), [theta])
    f()
    assert np.all(np.abs(theta.grad) < 1e-12)
    # numeric side is roundoff only
    for i in range(3):
        th = theta.values.copy()
        th[i] += 1e-4
        assert abs(mc.softmax(th).sum() - 1.0) < 1e-12


def test_grad_check_rejects_bad_eps_and_nonfinite():
    theta = ParamTensor("theta", np.array([1.0]))
    with pytest.raises(ValueError):
        grad_check(lambda: 0.0, [theta], eps=1e-2)
    with pytest.raises(ValueError, match="non-finite"):
        grad_check(lambda: math.inf, [theta], eps=1e-4)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 16), st.integers(1, 5), st.integers(0, 10_000))
def test_gradient_contract_random_compositions(d, n, seed):
    """An affine/sigmoid/tanh/hadamard/softmax stack passes grad_check <= 1e-5."""
    rng = np.random.default_rng(seed)
    W = ParamTensor("W", rng.uniform(-1, 1, (d, d)))
    U = ParamTensor("U", rng.uniform(-1, 1, (d, d)))
    b = ParamTensor("b", rng.uniform(-1, 1, d))
    xs = rng.uniform(-1, 1, (n, d))

    def fn(tape, W, U, b):
        h = tape.var(np.zeros(d))
        for x in xs:
            z = mc.sigmoid(mc.affine(U, mc.add(tape.var(x), h)))
            h = mc.hadamard(z, mc.tanh(mc.affine(W, h, b)))
            h = mc.add(h, tape.var(x))
        p = mc.softmax(h)
        return mc.neg_log_sum(p, [0])

    assert grad_check(_tape_loss(fn, [W, U, b]), [W, U, b], eps=1e-5) <= 1e-5
