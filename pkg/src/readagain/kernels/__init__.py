"""Recurrent sequence kernels with a compiled core and a numpy fallback.

The compiled extension ``_recurrent`` is used when it imports; otherwise the
numpy implementation in ``_fallback`` is selected.  ``use_backend`` switches
explicitly (benchmarks and the cross-backend tests use it).
"""
from . import _fallback

try:
    from . import _recurrent
except ImportError:  # extension not built
    _recurrent = None

_BACKENDS = {"python": _fallback}
if _recurrent is not None:
    _BACKENDS["cython"] = _recurrent

_active = _recurrent if _recurrent is not None else _fallback


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "cython" if _active is _recurrent and _recurrent is not None else "python"


def use_backend(name):
    """Select ``"python"`` or ``"cython"``; returns the previous backend name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    prev = backend_name()
    _active = _BACKENDS[name]
    return prev


def gru_forward(X, h0, Wz, Wr, Wh, A=None):
    return _active.gru_forward(X, h0, Wz, Wr, Wh, A)


def gru_backward(X, h0, Wz, Wr, Wh, A, H, Z, R, HT, dH, dWz, dWr, dWh):
    return _active.gru_backward(X, h0, Wz, Wr, Wh, A, H, Z, R, HT, dH, dWz, dWr, dWh)


def lstm_forward(X, h0, C0, Wf, Wi, Wo, Wc):
    return _active.lstm_forward(X, h0, C0, Wf, Wi, Wo, Wc)


def lstm_backward(X, h0, C0, Wf, Wi, Wo, Wc, H, C, F, I, O, CT, dH, dCN,
                  dWf, dWi, dWo, dWc):
    return _active.lstm_backward(X, h0, C0, Wf, Wi, Wo, Wc, H, C, F, I, O, CT,
                                 dH, dCN, dWf, dWi, dWo, dWc)
