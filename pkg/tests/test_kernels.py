import numpy as np
import pytest

from readagain import kernels
from readagain.kernels import _fallback

import oracles


def _rand(rng, *shape, s=0.8):
    return rng.uniform(-s, s, size=shape)


def _gru_setup(seed, n=5, k=3, d=4, alpha=True):
    rng = np.random.default_rng(seed)
    X = _rand(rng, n, k)
    h0 = _rand(rng, d)
    W = [_rand(rng, d, k + d) for _ in range(3)]
    A = rng.uniform(0, 1, (n, d)) if alpha else None
    return X, h0, W, A


def _lstm_setup(seed, n=5, k=3, d=4):
    rng = np.random.default_rng(seed)
    return _rand(rng, n, k), _rand(rng, d), _rand(rng, d), [_rand(rng, d, k + d) for _ in range(4)]


def test_backend_selection_roundtrip():
    names = kernels.available_backends()
    assert "python" in names
    prev = kernels.use_backend("python")
    assert kernels.backend_name() == "python"
    kernels.use_backend(prev)
    assert kernels.backend_name() == prev
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


@pytest.mark.parametrize("alpha", [False, True])
def test_gru_forward_matches_loop_oracle(backend, alpha):
    X, _, W, A = _gru_setup(1, alpha=alpha)
    H = kernels.gru_forward(X, np.zeros(4), *W, A)[0]
    ref = oracles.gru_seq(X.tolist(), *[w.tolist() for w in W], None if A is None else A.tolist())
    assert np.max(np.abs(H - np.array(ref))) <= 1e-12


def test_lstm_forward_matches_loop_oracle(backend):
    X, _, _, W = _lstm_setup(2)
    H = kernels.lstm_forward(X, np.zeros(4), np.zeros(4), *W)[0]
    ref = oracles.lstm_seq(X.tolist(), *[w.tolist() for w in W])
    assert np.max(np.abs(H - np.array(ref))) <= 1e-12


@pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled backend not built")
@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    X, h0, W, A = _gru_setup(seed, n=7, k=6, d=5)
    rng = np.random.default_rng(seed + 100)
    dH = rng.normal(size=(7, 5))
    outs = {}
    for name in ("python", "cython"):
        prev = kernels.use_backend(name)
        try:
            fwd = kernels.gru_forward(X, h0, *W, A)
            g = [np.zeros_like(w) for w in W]
            back = kernels.gru_backward(X, h0, *W, A, *fwd, dH, *g)
            Xl, hl, Cl, Wl = _lstm_setup(seed, n=7, k=6, d=5)
            lf = kernels.lstm_forward(Xl, hl, Cl, *Wl)
            gl = [np.zeros_like(w) for w in Wl]
            lb = kernels.lstm_backward(Xl, hl, Cl, *Wl, *lf, dH, np.ones(5), *gl)
        finally:
            kernels.use_backend(prev)
        outs[name] = list(fwd) + list(back) + g + list(lf) + list(lb) + gl
    for a, b in zip(outs["python"], outs["cython"]):
        assert np.max(np.abs(a - b)) <= 1e-12


def _fd(f, x, eps=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        lp = f()
        x[i] = old - eps
        lm = f()
        x[i] = old
        g[i] = (lp - lm) / (2 * eps)
    return g


def test_gru_backward_finite_differences(backend):
    X, h0, W, A = _gru_setup(3)
    G = np.random.default_rng(9).normal(size=(5, 4))

    def loss():
        return float(np.sum(G * kernels.gru_forward(X, h0, *W, A)[0]))

    fwd = kernels.gru_forward(X, h0, *W, A)
    grads = [np.zeros_like(w) for w in W]
    dX, dh0, dA = kernels.gru_backward(X, h0, *W, A, *fwd, G, *grads)
    for analytic, target in [(dX, X), (dh0, h0), (dA, A)] + list(zip(grads, W)):
        assert np.max(np.abs(analytic - _fd(loss, target))) <= 1e-7


def test_lstm_backward_finite_differences(backend):
    X, h0, C0, W = _lstm_setup(4)
    G = np.random.default_rng(8).normal(size=(5, 4))
    gC = np.random.default_rng(7).normal(size=4)

    def loss():
        H, C = kernels.lstm_forward(X, h0, C0, *W)[:2]
        return float(np.sum(G * H) + gC @ C[-1])

    fwd = kernels.lstm_forward(X, h0, C0, *W)
    grads = [np.zeros_like(w) for w in W]
    dX, dh0, dC0 = kernels.lstm_backward(X, h0, C0, *W, *fwd, G, gC, *grads)
    for analytic, target in [(dX, X), (dh0, h0), (dC0, C0)] + list(zip(grads, W)):
        assert np.max(np.abs(analytic - _fd(loss, target))) <= 1e-7


def test_fallback_sigmoid_is_stable():
    v = _fallback.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.array_equal(v, [0.0, 0.5, 1.0])


def test_fallback_selected_without_extension():
    import subprocess
    import sys
    code = ("import sys; sys.modules['readagain.kernels._recurrent'] = None\n"
            "from readagain import kernels\n"
            "print(kernels.backend_name(), kernels.available_backends())")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.split()[0] == "python"
