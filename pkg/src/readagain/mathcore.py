"""Dense primitives, parameter tensors and gradient checking.

The model itself uses hand-derived backward passes (see ``encoder``,
``decoder`` and ``kernels``).  The small tape here runs the same primitives
with recorded backward closures; tests use it as an independent route to the
same gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class ParamTensor:
    """Named float64 array with a gradient accumulator of the same shape."""

    name: str
    values: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad[...] = 0.0


def zero_grads(params):
    for p in params:
        p.zero_grad()


# -- tape -------------------------------------------------------------------

class Var:
    __slots__ = ("value", "grad", "tape", "param")

    def __init__(self, value, tape, param=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.tape = tape
        self.param = param


class Tape:
    """Ordered record of primitive applications, replayed in reverse."""

    def __init__(self):
        self._ops = []
        self._params = []

    def var(self, value):
        return Var(value, self)

    def param(self, pt: ParamTensor):
        v = Var(pt.values.copy(), self, param=pt)
        self._params.append(v)
        return v

    def _record(self, value, backward):
        out = Var(value, self)
        self._ops.append((out, backward))
        return out

    def backward(self, out: Var):
        """Replay the tape; parameter leaves add into their ``ParamTensor.grad``."""
        if out.value.size != 1:
            raise ValueError("backward needs a scalar output")
        out.grad = np.ones_like(out.value)
        for node, fn in reversed(self._ops):
            fn(node.grad)
        for leaf in self._params:
            leaf.param.grad += leaf.grad


def _tape_of(*args):
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


def _val(a):
    return a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)


def _wrap(tape, inputs, value, backward):
    return tape._record(value, backward)


def _acc(v, g):
    if isinstance(v, Var):
        v.grad = v.grad + g


# -- primitives -------------------------------------------------------------

def affine(W, x, b=None):
    """``W @ x (+ b)``."""
    Wv, xv = _val(W), _val(x)
    if Wv.ndim != 2 or xv.ndim != 1 or Wv.shape[1] != xv.shape[0]:
        raise ValueError(f"affine shape mismatch: W {Wv.shape} vs x {xv.shape}")
    out = Wv @ xv
    if b is not None:
        bv = _val(b)
        if bv.shape != (Wv.shape[0],):
            raise ValueError(f"affine shape mismatch: W {Wv.shape} vs b {bv.shape}")
        out = out + bv
    tape = _tape_of(W, x, b)
    if tape is None:
        return out

    def backward(g):
        _acc(W, np.outer(g, xv))
        _acc(x, Wv.T @ g)
        if b is not None:
            _acc(b, g)
    return _wrap(tape, (W, x, b), out, backward)


def sigmoid(v):
    vv = _val(v)
    e = np.exp(-np.abs(vv))
    out = np.where(vv >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    tape = _tape_of(v)
    if tape is None:
        return out
    return _wrap(tape, (v,), out, lambda g: _acc(v, g * out * (1.0 - out)))


def tanh(v):
    out = np.tanh(_val(v))
    tape = _tape_of(v)
    if tape is None:
        return out
    return _wrap(tape, (v,), out, lambda g: _acc(v, g * (1.0 - out * out)))


def hadamard(a, b):
    av, bv = _val(a), _val(b)
    if av.shape != bv.shape:
        raise ValueError(f"hadamard length mismatch: {av.shape} vs {bv.shape}")
    out = av * bv
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def backward(g):
        _acc(a, g * bv)
        _acc(b, g * av)
    return _wrap(tape, (a, b), out, backward)


def softmax(v):
    """Max-shifted softmax; ``-inf`` entries are masked to exactly zero."""
    vv = _val(v)
    if vv.size < 1:
        raise ValueError("softmax of empty vector")
    m = vv.max()
    if m == -np.inf:
        raise ValueError("empty support: every softmax entry is masked")
    e = np.exp(vv - m)
    out = e / e.sum()
    tape = _tape_of(v)
    if tape is None:
        return out
    return _wrap(tape, (v,), out, lambda g: _acc(v, out * (g - out @ g)))


def log_softmax(v):
    vv = _val(v)
    m = vv.max()
    if m == -np.inf:
        raise ValueError("empty support: every softmax entry is masked")
    return vv - m - math.log(np.exp(vv - m).sum())


# helpers that let tape compositions mirror the full model formulas

def add(*vs):
    out = sum(_val(v) for v in vs)
    tape = _tape_of(*vs)
    if tape is None:
        return out

    def backward(g):
        for v in vs:
            _acc(v, g)
    return _wrap(tape, vs, out, backward)


def one_minus(v):
    out = 1.0 - _val(v)
    tape = _tape_of(v)
    if tape is None:
        return out
    return _wrap(tape, (v,), out, lambda g: _acc(v, -g))


def concat(*vs):
    vals = [_val(v) for v in vs]
    out = np.concatenate(vals)
    tape = _tape_of(*vs)
    if tape is None:
        return out
    bounds = np.cumsum([0] + [x.size for x in vals])

    def backward(g):
        for v, lo, hi in zip(vs, bounds[:-1], bounds[1:]):
            _acc(v, g[lo:hi])
    return _wrap(tape, vs, out, backward)


def row(M, i):
    Mv = _val(M)
    out = Mv[i].copy()
    tape = _tape_of(M)
    if tape is None:
        return out

    def backward(g):
        full = np.zeros_like(Mv)
        full[i] = g
        _acc(M, full)
    return _wrap(tape, (M,), out, backward)


def dot(a, b):
    av, bv = _val(a), _val(b)
    out = np.asarray(av @ bv)
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def backward(g):
        _acc(a, g * bv)
        _acc(b, g * av)
    return _wrap(tape, (a, b), out, backward)


def scale(v, c):
    out = _val(v) * c
    tape = _tape_of(v)
    if tape is None:
        return out
    return _wrap(tape, (v,), out, lambda g: _acc(v, g * c))


def stack(vs):
    vals = [_val(v) for v in vs]
    out = np.stack(vals)
    tape = _tape_of(*vs)
    if tape is None:
        return out

    def backward(g):
        for v, gi in zip(vs, g):
            _acc(v, gi)
    return _wrap(tape, vs, out, backward)


def matvec_t(M, b):
    """``M.T @ b`` for a stacked matrix ``M`` (n x d) and weights ``b`` (n)."""
    Mv, bv = _val(M), _val(b)
    out = Mv.T @ bv
    tape = _tape_of(M, b)
    if tape is None:
        return out

    def backward(g):
        _acc(M, np.outer(bv, g))
        _acc(b, Mv @ g)
    return _wrap(tape, (M, b), out, backward)


def neg_log_sum(p, idx):
    """``-log(sum(p[idx]))``."""
    pv = _val(p)
    s = pv[list(idx)].sum()
    out = np.asarray(-math.log(s))
    tape = _tape_of(p)
    if tape is None:
        return out

    def backward(g):
        gp = np.zeros_like(pv)
        for i in idx:
            gp[i] -= g / s
        _acc(p, gp)
    return _wrap(tape, (p,), out, backward)


def total(v):
    out = np.asarray(_val(v).sum())
    tape = _tape_of(v)
    if tape is None:
        return out
    return _wrap(tape, (v,), out, lambda g: _acc(v, np.ones_like(_val(v)) * g))


# -- gradient checking ------------------------------------------------------

def grad_check(f, params, eps=1e-5, loss_fn=None):
    """Largest relative error between analytic and central-difference gradients.

    ``f()`` must return the scalar loss and accumulate analytic gradients into
    ``params[*].grad`` (grads are zeroed before the call).  ``loss_fn``, when
    given, evaluates the loss alone and is used for the perturbed evaluations.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-6, 1e-3], got {eps}")
    params = list(params)
    for p in params:
        if p.values.dtype != np.float64:
            raise TypeError(f"{p.name}: gradient checks run in float64 only")
    loss_fn = loss_fn or f
    zero_grads(params)
    base = float(f())
    if not math.isfinite(base):
        raise ValueError(f"non-finite loss {base}")
    analytic = [p.grad.copy() for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.values.reshape(-1)
        aflat = a.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up = float(loss_fn())
            flat[j] = orig - eps
            down = float(loss_fn())
            flat[j] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise ValueError(f"non-finite loss while perturbing {p.name}[{j}]")
            num = (up - down) / (2.0 * eps)
            err = abs(aflat[j] - num) / max(abs(aflat[j]), abs(num), 1e-8)
            worst = max(worst, err)
    for p, a in zip(params, analytic):
        p.grad[...] = a
    return worst
