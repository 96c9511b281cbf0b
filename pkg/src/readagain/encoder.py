"""Read-Again encoder: a first read, per-token importance, a biased second read.

Parameters live in a flat ``{name: ParamTensor}`` dict.  Names:

* ``emb``                         shared word embeddings (|Y| x d)
* ``enc1.W_*`` / ``enc2.W_*``     first/second read cell (GRU: W_z W_r W_h,
                                  LSTM: W_f W_i W_o W_C), no biases
* ``imp.W_e imp.U_e imp.V_e``     importance weights (single-sentence GRU)
* ``glob.W_r glob.U_r glob.v_r``  sentence combiner (``multi-global``)

Modes: ``gru`` and ``lstm`` read the whole source as one sentence;
``multi-concat`` and ``multi-global`` take exactly two sentences and use
``cell`` (LSTM by default) for both reads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .mathcore import sigmoid

MODES = ("gru", "lstm", "multi-concat", "multi-global")
CELL_KEYS = {"gru": ("W_z", "W_r", "W_h"), "lstm": ("W_f", "W_i", "W_o", "W_C")}


def mode_cell(mode, cell=None):
    if mode not in MODES:
        raise ValueError(f"unknown encoder mode {mode!r}; expected one of {MODES}")
    if mode in ("gru", "lstm"):
        return mode
    return cell or "lstm"


def second_read_width(mode, d):
    """Input width of the second-read cell."""
    return {"gru": d, "lstm": 3 * d, "multi-concat": 4 * d, "multi-global": 4 * d}[mode]


def cell_weights(P, prefix, cell):
    return tuple(P[f"{prefix}.{k}"].values for k in CELL_KEYS[cell])


def cell_grads(P, prefix, cell):
    return tuple(P[f"{prefix}.{k}"].grad for k in CELL_KEYS[cell])


# -- single steps (reference formulas) --------------------------------------

def gru_cell(weights, x, h_prev):
    """One GRU step; ``weights = (W_z, W_r, W_h)``, each over ``[x, h]``."""
    W_z, W_r, W_h = weights
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if W_z.shape != (h_prev.size, x.size + h_prev.size):
        raise ValueError(f"GRU weight {W_z.shape} vs x {x.shape}, h {h_prev.shape}")
    u = np.concatenate([x, h_prev])
    z = sigmoid(W_z @ u)
    r = sigmoid(W_r @ u)
    h_tilde = np.tanh(W_h @ np.concatenate([x, r * h_prev]))
    return (1.0 - z) * h_prev + z * h_tilde


def lstm_cell(weights, x, h_prev, C_prev):
    """One LSTM step; ``weights = (W_f, W_i, W_o, W_C)``.  Returns ``(h, C)``."""
    W_f, W_i, W_o, W_C = weights
    x = np.asarray(x, dtype=np.float64)
    if W_f.shape != (h_prev.size, x.size + h_prev.size):
        raise ValueError(f"LSTM weight {W_f.shape} vs x {x.shape}, h {h_prev.shape}")
    u = np.concatenate([x, h_prev])
    f = sigmoid(W_f @ u)
    i = sigmoid(W_i @ u)
    o = sigmoid(W_o @ u)
    C_tilde = np.tanh(W_C @ u)
    C = f * C_prev + i * C_tilde
    return o * np.tanh(C), C


# -- sequence reads -----------------------------------------------------------

def _run(cell, weights, X, A=None):
    d = weights[0].shape[0]
    h0 = np.zeros(d)
    if cell == "gru":
        return kernels.gru_forward(X, h0, *weights, A)
    return kernels.lstm_forward(X, h0, np.zeros(d), *weights)


def _run_backward(cell, weights, grads, X, A, cache, dH):
    d = weights[0].shape[0]
    h0 = np.zeros(d)
    if cell == "gru":
        return kernels.gru_backward(X, h0, *weights, A, *cache, dH, *grads)
    dX, _, _ = kernels.lstm_backward(X, h0, np.zeros(d), *weights, *cache, dH,
                                     np.zeros(d), *grads)
    return dX, None, None


def embed(P, ids):
    ids = list(ids)
    if not ids:
        raise ValueError("empty source")
    return P["emb"].values[ids]


def first_read(P, ids, cell="gru"):
    """First pass over ``ids``; returns ``(H1, h1_last)``."""
    H = _run(cell, cell_weights(P, "enc1", cell), embed(P, ids))[0]
    return H, H[-1]


def importance_weights(P, h1, h1_last, x):
    """``tanh(W_e h1 + U_e h1_last + V_e x)``; rows of ``h1``/``x`` are tokens."""
    W_e, U_e, V_e = (P[k].values for k in ("imp.W_e", "imp.U_e", "imp.V_e"))
    return np.tanh(np.asarray(h1) @ W_e.T + U_e @ h1_last + np.asarray(x) @ V_e.T)


def second_read_gru(P, ids, H1, h1_last, force_alpha=None):
    """Second GRU read with the update gate scaled by the importance weights."""
    X = embed(P, ids)
    if len(H1) != len(X):
        raise ValueError(f"first-read length {len(H1)} != source length {len(X)}")
    if force_alpha is None:
        A = importance_weights(P, H1, h1_last, X)
    else:
        A = np.full_like(X, float(force_alpha))
    return _run("gru", cell_weights(P, "enc2", "gru"), X, A)[0]


def second_read_gru_reweighted(P, ids, H1, h1_last, force_alpha=None):
    """Same recursion written as ``(1-a)*h + a*GRU(x, h)`` with a full GRU step.

    Kept as an algebraic cross-check for the fused gate used by the kernels.
    """
    X = embed(P, ids)
    if force_alpha is None:
        A = importance_weights(P, H1, h1_last, X)
    else:
        A = np.full_like(X, float(force_alpha))
    weights = cell_weights(P, "enc2", "gru")
    h = np.zeros(X.shape[1])
    out = []
    for x, a in zip(X, A):
        h = (1.0 - a) * h + a * gru_cell(weights, x, h)
        out.append(h)
    return np.array(out)


def second_read_lstm(P, ids, H1, h1_last):
    """Second LSTM read over ``[x_i, h1_i, h1_last]``."""
    X = embed(P, ids)
    if len(H1) != len(X):
        raise ValueError(f"first-read length {len(H1)} != source length {len(X)}")
    X2 = np.hstack([X, H1, np.broadcast_to(h1_last, X.shape)])
    return _run("lstm", cell_weights(P, "enc2", "lstm"), X2)[0]


# -- full encoder ------------------------------------------------------------

@dataclass
class EncodedSource:
    """Encoder output for one source.  Rows are source positions."""

    h1: np.ndarray
    h2: np.ndarray
    alpha: np.ndarray | None
    sentence_vectors: list
    h_global: np.ndarray | None = None
    spans: list = field(default_factory=list)
    cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return self.h2.shape[0]


def _mask(rng, dropout, shape):
    if rng is None or dropout <= 0.0:
        return None
    keep = 1.0 - dropout
    return (rng.random(shape) < keep) / keep


def encode(P, sentences, mode="gru", cell=None, force_alpha=None, rng=None, dropout=0.0):
    """Encode a source given as a list of token-id lists (one per sentence).

    ``rng``/``dropout`` enable inverted dropout on the embeddings and on both
    reads' output states.  ``force_alpha`` pins every importance weight (debug
    hook for the single-sentence GRU).
    """
    cell = mode_cell(mode, cell)
    sentences = [list(s) for s in sentences]
    if any(not s for s in sentences) or not sentences:
        raise ValueError("empty source")
    ids = [t for s in sentences for t in s]
    if mode.startswith("multi"):
        if len(sentences) != 2:
            raise ValueError(f"{mode} needs exactly 2 sentences, got {len(sentences)}")
        b = len(sentences[0])
        spans = [(0, b), (b, len(ids))]
    else:
        spans = [(0, len(ids))]
    n = len(ids)
    X = embed(P, ids)
    d = X.shape[1]
    mx = _mask(rng, dropout, X.shape)
    Xd = X if mx is None else X * mx

    w1 = cell_weights(P, "enc1", cell)
    c1 = [_run(cell, w1, Xd[lo:hi]) for lo, hi in spans]
    H1 = np.vstack([c[0] for c in c1])
    m1 = _mask(rng, dropout, H1.shape)
    H1d = H1 if m1 is None else H1 * m1
    svec = [H1d[hi - 1] for _, hi in spans]

    A = None
    hg = None
    if mode == "gru":
        if force_alpha is None:
            A = importance_weights(P, H1d, svec[0], Xd)
        else:
            A = np.full((n, d), float(force_alpha))
        X2s = [Xd]
    elif mode == "lstm":
        X2s = [np.hstack([Xd, H1d, np.broadcast_to(svec[0], (n, d))])]
    else:
        if mode == "multi-concat":
            extra = [np.concatenate([svec[0], svec[1]])] * 2
        else:
            W_r, U_r, v_r = (P[k].values for k in ("glob.W_r", "glob.U_r", "glob.v_r"))
            hg = np.tanh(W_r @ svec[0] + U_r @ svec[1] + v_r)
            extra = [np.concatenate([svec[0], hg]), np.concatenate([svec[1], hg])]
        X2s = []
        for (lo, hi), e in zip(spans, extra):
            X2s.append(np.hstack([Xd[lo:hi], H1d[lo:hi],
                                  np.broadcast_to(e, (hi - lo, e.size))]))

    w2 = cell_weights(P, "enc2", cell)
    c2 = [_run(cell, w2, X2, A) for X2 in X2s]
    H2 = np.vstack([c[0] for c in c2])
    m2 = _mask(rng, dropout, H2.shape)
    H2d = H2 if m2 is None else H2 * m2

    cache = dict(mode=mode, cell=cell, ids=ids, Xd=Xd, mx=mx, m1=m1, m2=m2,
                 c1=c1, c2=c2, X2s=X2s, forced=force_alpha is not None)
    return EncodedSource(h1=H1d, h2=H2d, alpha=A, sentence_vectors=svec,
                         h_global=hg, spans=spans, cache=cache)


def encode_backward(P, enc, dH2):
    """Accumulate parameter gradients given ``dLoss/d enc.h2`` (n x d)."""
    cc = enc.cache
    mode, cell, spans = cc["mode"], cc["cell"], enc.spans
    Xd, H1d = cc["Xd"], enc.h1
    n, d = Xd.shape
    dH2 = dH2 if cc["m2"] is None else dH2 * cc["m2"]

    w2, g2 = cell_weights(P, "enc2", cell), cell_grads(P, "enc2", cell)
    second_spans = [(0, n)] if mode in ("gru", "lstm") else spans
    dXd = np.zeros((n, d))
    dH1d = np.zeros((n, d))
    dsvec = [np.zeros(d) for _ in spans]

    if mode == "gru":
        dX2, _, dA = _run_backward(cell, w2, g2, cc["X2s"][0], enc.alpha, cc["c2"][0], dH2)
        dXd += dX2
        if not cc["forced"]:
            A = enc.alpha
            dpre = dA * (1.0 - A * A)
            P["imp.W_e"].grad += dpre.T @ H1d
            P["imp.U_e"].grad += np.outer(dpre.sum(0), enc.sentence_vectors[0])
            P["imp.V_e"].grad += dpre.T @ Xd
            dH1d += dpre @ P["imp.W_e"].values
            dsvec[0] += P["imp.U_e"].values.T @ dpre.sum(0)
            dXd += dpre @ P["imp.V_e"].values
    else:
        dextra = []
        for k, (lo, hi) in enumerate(second_spans):
            X2 = cc["X2s"][k]
            dX2, _, _ = _run_backward(cell, w2, g2, X2, None, cc["c2"][k], dH2[lo:hi])
            dXd[lo:hi] += dX2[:, :d]
            dH1d[lo:hi] += dX2[:, d:2 * d]
            dextra.append(dX2[:, 2 * d:].sum(0))
        if mode == "lstm":
            dsvec[0] += dextra[0]
        elif mode == "multi-concat":
            for e in dextra:
                dsvec[0] += e[:d]
                dsvec[1] += e[d:]
        else:
            hg = enc.h_global
            dhg = dextra[0][d:] + dextra[1][d:]
            dsvec[0] += dextra[0][:d]
            dsvec[1] += dextra[1][:d]
            dpre = dhg * (1.0 - hg * hg)
            s0, s1 = enc.sentence_vectors
            P["glob.W_r"].grad += np.outer(dpre, s0)
            P["glob.U_r"].grad += np.outer(dpre, s1)
            P["glob.v_r"].grad += dpre
            dsvec[0] += P["glob.W_r"].values.T @ dpre
            dsvec[1] += P["glob.U_r"].values.T @ dpre

    for (lo, hi), ds in zip(spans, dsvec):
        dH1d[hi - 1] += ds
    dH1 = dH1d if cc["m1"] is None else dH1d * cc["m1"]

    w1, g1 = cell_weights(P, "enc1", cell), cell_grads(P, "enc1", cell)
    for (lo, hi), c in zip(spans, cc["c1"]):
        dX1, _, _ = _run_backward(cell, w1, g1, Xd[lo:hi], None, c, dH1[lo:hi])
        dXd[lo:hi] += dX1
    dX = dXd if cc["mx"] is None else dXd * cc["mx"]
    np.add.at(P["emb"].grad, cc["ids"], dX)
