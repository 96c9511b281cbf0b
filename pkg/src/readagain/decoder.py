"""Attention LSTM decoder with a joint generate/copy output distribution.

Parameter names (in the shared ``{name: ParamTensor}`` dict):

* ``dec.W_f dec.W_i dec.W_o dec.W_C``  decoder LSTM over ``[y_prev, c_t]``
* ``att.v_a att.W_a att.U_a``          additive attention on ``s_{t-1}``
* ``oov.W_c oov.b_c``                  context embedding for OOV feedback
* ``out.W out.b``                      generate logits (|Y| x d, |Y|)
* ``cp.v_p cp.W_p cp.U_p``             copy logits, scored against ``s_t``

Every step emits one softmax over ``|Y| + n`` slots: the vocabulary first,
then one slot per source position.  PAD and BOS are never generated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .text import BOS_ID, PAD_ID, UNK_ID

DEC_KEYS = ("W_f", "W_i", "W_o", "W_C")


@dataclass
class JointDistribution:
    probs: np.ndarray
    vocab_size: int

    @property
    def gen(self):
        return self.probs[: self.vocab_size]

    @property
    def copy(self):
        return self.probs[self.vocab_size:]


@dataclass
class Emitted:
    """A decoded token: ``slot`` < |Y| is a generated id, else a copy slot."""

    slot: int
    surface: str
    position: int | None = None  # source index when copied

    @property
    def copied(self):
        return self.position is not None


class SourceView:
    """Per-source quantities reused at every decoder step."""

    def __init__(self, P, h2, tokens, vocab, copy=True):
        self.h2 = h2
        self.tokens = list(tokens)
        self.vocab = vocab
        self.copy = copy
        self.UH = h2 @ P["att.U_a"].values.T
        self.UP = h2 @ P["cp.U_p"].values.T
        self._first = {}
        for i, t in enumerate(self.tokens):
            self._first.setdefault(t, i)

    def __len__(self):
        return len(self.tokens)

    def first_position(self, token):
        return self._first.get(token)


def attention(P, s_prev, h2, UH=None):
    """Returns ``(c_t, beta, tanh_pre)`` for query ``s_prev`` over rows of ``h2``."""
    if UH is None:
        UH = h2 @ P["att.U_a"].values.T
    T = np.tanh(P["att.W_a"].values @ s_prev + UH)
    o = T @ P["att.v_a"].values
    e = np.exp(o - o.max())
    beta = e / e.sum()
    return beta @ h2, beta, T


def oov_embedding(P, h2_row):
    return np.tanh(P["oov.W_c"].values @ h2_row + P["oov.b_c"].values)


def feedback_source(token, src, position=None):
    """Where the embedding of a previously emitted ``token`` comes from.

    Returns ``("emb", id)`` or ``("oov", position)``.
    """
    if token in src.vocab:
        return ("emb", src.vocab.index[token])
    if position is None:
        position = src.first_position(token)
    if position is not None:
        return ("oov", position)
    return ("emb", UNK_ID)


def input_embedding(P, token, src, position=None):
    """Vector fed back for ``token``; ``None`` means the start of decoding."""
    if token is None:
        return P["emb"].values[BOS_ID]
    kind, idx = feedback_source(token, src, position)
    if kind == "emb":
        return P["emb"].values[idx]
    return oov_embedding(P, src.h2[idx])


def _gen_logits(P, h):
    g = P["out.W"].values @ h + P["out.b"].values
    g[PAD_ID] = -np.inf
    g[BOS_ID] = -np.inf
    return g


def _copy_logits(P, h, src):
    if not src.copy:
        return np.full(len(src), -np.inf), None
    Tc = np.tanh(P["cp.W_p"].values @ h + src.UP)
    return Tc @ P["cp.v_p"].values, Tc


def decoder_step(P, state, y_vec, src, in_mask=None, out_mask=None):
    """One step.  ``state = (h, C)``.  Returns ``(state, dist, beta, cache)``."""
    h_prev, C_prev = state
    c, beta, T = attention(P, h_prev, src.h2, src.UH)
    y_in = y_vec if in_mask is None else y_vec * in_mask
    u = np.concatenate([y_in, c])[None, :]
    W = tuple(P[f"dec.{k}"].values for k in DEC_KEYS)
    fwd = kernels.lstm_forward(u, h_prev, C_prev, *W)
    h, C = fwd[0][0], fwd[1][0]
    hd = h if out_mask is None else h * out_mask
    kappa, Tc = _copy_logits(P, hd, src)
    logits = np.concatenate([_gen_logits(P, hd), kappa])
    m = logits.max()
    e = np.exp(logits - m)
    probs = e / e.sum()
    cache = dict(h_prev=h_prev, C_prev=C_prev, beta=beta, T=T, u=u, fwd=fwd,
                 hd=hd, Tc=Tc, in_mask=in_mask, out_mask=out_mask, c=c)
    return (h, C), JointDistribution(probs, len(src.vocab)), beta, cache


def target_slots(target, src):
    """Joint-distribution slots whose mass counts as emitting ``target``."""
    V = len(src.vocab)
    slots = []
    if target in src.vocab:
        slots.append(src.vocab.index[target])
    if src.copy:
        slots.extend(V + i for i, t in enumerate(src.tokens) if t == target)
    if not slots:
        slots.append(UNK_ID)
    return slots


def target_log_prob(dist, target, src):
    """``log`` of generate-plus-copy mass on ``target``."""
    if target == "<pad>":
        raise ValueError("PAD is not a valid target")
    p = float(dist.probs[target_slots(target, src)].sum())
    return math.log(p) if p > 0 else -math.inf


# -- teacher-forced loss ------------------------------------------------------

def sequence_loss(P, src, targets, rng=None, dropout=0.0, backward=True):
    """Teacher-forced NLL summed over ``targets`` (EOS already appended).

    With ``backward`` the decoder gradients are accumulated into ``P`` and
    ``dLoss/dh2`` is returned for the encoder.  Returns ``(loss, dH2)``.
    """
    d = src.h2.shape[1]
    state = (np.zeros(d), np.zeros(d))
    keep = 1.0 - dropout
    use_drop = rng is not None and dropout > 0.0
    steps = []
    loss = 0.0
    prev = None
    for tok in targets:
        y_vec = input_embedding(P, prev, src)
        y_src = ("emb", BOS_ID) if prev is None else feedback_source(prev, src)
        in_mask = (rng.random(d) < keep) / keep if use_drop else None
        out_mask = (rng.random(d) < keep) / keep if use_drop else None
        state, dist, _, cache = decoder_step(P, state, y_vec, src, in_mask, out_mask)
        slots = target_slots(tok, src)
        p = dist.probs[slots].sum()
        loss -= math.log(p)
        cache.update(slots=slots, p=p, probs=dist.probs, y_src=y_src, y_vec=y_vec)
        steps.append(cache)
        prev = tok
    if not backward:
        return loss, None
    return loss, _sequence_backward(P, src, steps)


def _sequence_backward(P, src, steps):
    n, d = src.h2.shape
    V = len(src.vocab)
    G = {k: P[k].grad for k in P}
    Wv = {k: P[k].values for k in P}
    Wdec = tuple(Wv[f"dec.{k}"] for k in DEC_KEYS)
    Gdec = tuple(G[f"dec.{k}"] for k in DEC_KEYS)
    dH2 = np.zeros((n, d))
    dUH = np.zeros((n, d))
    dUP = np.zeros((n, d))
    dh_next = np.zeros(d)
    dC_next = np.zeros(d)
    for st in reversed(steps):
        dl = st["probs"].copy()
        slots = st["slots"]
        dl[slots] -= st["probs"][slots] / st["p"]
        dgen, dkappa = dl[:V], dl[V:]
        hd = st["hd"]
        G["out.W"] += np.outer(dgen, hd)
        G["out.b"] += dgen
        dhd = Wv["out.W"].T @ dgen
        if st["Tc"] is not None:
            Tc = st["Tc"]
            G["cp.v_p"] += Tc.T @ dkappa
            dTpre = np.outer(dkappa, Wv["cp.v_p"]) * (1.0 - Tc * Tc)
            dQ = dTpre.sum(0)
            G["cp.W_p"] += np.outer(dQ, hd)
            dhd += Wv["cp.W_p"].T @ dQ
            dUP += dTpre
        dh = dh_next + (dhd if st["out_mask"] is None else dhd * st["out_mask"])
        du, dh_prev, dC_prev = kernels.lstm_backward(
            st["u"], st["h_prev"], st["C_prev"], *Wdec, *st["fwd"], dh[None, :],
            dC_next, *Gdec)
        du = du[0]
        dy = du[:d] if st["in_mask"] is None else du[:d] * st["in_mask"]
        dc = du[d:]
        # attention
        beta, T = st["beta"], st["T"]
        dbeta = src.h2 @ dc
        dH2 += np.outer(beta, dc)
        de = beta * (dbeta - beta @ dbeta)
        G["att.v_a"] += T.T @ de
        dApre = np.outer(de, Wv["att.v_a"]) * (1.0 - T * T)
        dq = dApre.sum(0)
        G["att.W_a"] += np.outer(dq, st["h_prev"])
        dh_prev = dh_prev + Wv["att.W_a"].T @ dq
        dUH += dApre
        # feedback embedding
        kind, idx = st["y_src"]
        if kind == "emb":
            G["emb"][idx] += dy
        else:
            p = st["y_vec"]
            dpre = dy * (1.0 - p * p)
            G["oov.W_c"] += np.outer(dpre, src.h2[idx])
            G["oov.b_c"] += dpre
            dH2[idx] += Wv["oov.W_c"].T @ dpre
        dh_next, dC_next = dh_prev, dC_prev
    G["att.U_a"] += dUH.T @ src.h2
    dH2 += dUH @ Wv["att.U_a"]
    G["cp.U_p"] += dUP.T @ src.h2
    dH2 += dUP @ Wv["cp.U_p"]
    return dH2
