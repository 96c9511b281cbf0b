"""Beam search and greedy decoding over the joint generate/copy slots."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decoder import Emitted, decoder_step, input_embedding
from .text import EOS, EOS_ID


@dataclass
class Hypothesis:
    emitted: list = field(default_factory=list)
    logp: float = 0.0
    state: tuple | None = None
    done: bool = False
    step_logps: list = field(default_factory=list)

    @property
    def surfaces(self):
        return [e.surface for e in self.emitted]


def _normalize_source(source):
    """Accept a flat token list or a list of sentences."""
    if source and isinstance(source[0], str):
        return [list(source)]
    return [list(s) for s in source]


def _emission(slot, model, src):
    V = len(model.vocab)
    if slot < V:
        return Emitted(slot, model.vocab.tokens[slot])
    pos = slot - V
    return Emitted(slot, src.tokens[pos], pos)


def _step(model, src, hyp):
    prev = hyp.emitted[-1] if hyp.emitted else None
    y_vec = input_embedding(model.params, prev.surface if prev else None, src,
                            prev.position if prev else None)
    state, dist, beta, _ = decoder_step(model.params, hyp.state, y_vec, src)
    return state, dist, beta


def prepare(model, source):
    sentences = _normalize_source(source)
    if not sentences or not any(sentences):
        raise ValueError("empty source")
    enc = model.encode(sentences)
    src = model.source_view(enc, [t for s in sentences for t in s])
    return enc, src


def beam_search(model, source, beam=10, max_len=30):
    """Hypotheses ranked by total log-probability (no length normalization).

    Finished hypotheses end in EOS; at ``max_len`` any still-open hypotheses
    are returned as length-capped (``done`` False).
    """
    if beam < 1 or max_len < 1:
        raise ValueError("beam and max_len must be >= 1")
    _, src = prepare(model, source)
    d = model.cfg.d
    live = [Hypothesis(state=(np.zeros(d), np.zeros(d)))]
    finished = []
    for _ in range(max_len):
        cands = []
        for hi, hyp in enumerate(live):
            state, dist, _ = _step(model, src, hyp)
            probs = dist.probs
            k = min(beam, probs.size)
            if k < probs.size:
                # keep ties at the cut so ordering stays by slot index
                kth = np.partition(probs, probs.size - k)[probs.size - k]
                top = np.flatnonzero(probs >= kth)
            else:
                top = range(probs.size)
            for slot in top:
                p = probs[slot]
                if p > 0.0:
                    lp = math.log(p)
                    cands.append((-(hyp.logp + lp), hi, int(slot), lp, state))
        cands.sort(key=lambda c: c[:3])
        live_next = []
        for neg, hi, slot, lp, state in cands[:beam]:
            parent = live[hi]
            hyp = Hypothesis(parent.emitted + [_emission(slot, model, src)], -neg, state,
                             slot == EOS_ID, parent.step_logps + [lp])
            (finished if hyp.done else live_next).append(hyp)
        live = live_next
        if not live:
            break
        if len(finished) >= beam:
            kth = sorted(h.logp for h in finished)[-beam]
            if max(h.logp for h in live) < kth:
                break
    ranked = sorted(finished + live, key=lambda h: -h.logp)
    return ranked[:beam]


def greedy_decode(model, source, max_len=30, ignore_eos=False):
    """Step-wise argmax.  ``ignore_eos`` forces exactly ``max_len`` steps."""
    _, src = prepare(model, source)
    d = model.cfg.d
    hyp = Hypothesis(state=(np.zeros(d), np.zeros(d)))
    for _ in range(max_len):
        state, dist, _ = _step(model, src, hyp)
        slot = int(np.argmax(dist.probs))
        lp = math.log(dist.probs[slot])
        hyp = Hypothesis(hyp.emitted + [_emission(slot, model, src)], hyp.logp + lp, state,
                         slot == EOS_ID, hyp.step_logps + [lp])
        if hyp.done and not ignore_eos:
            break
    return hyp


def realize(hypothesis, source_tokens=None):
    """Space-joined surface forms; copied slots contribute the source token."""
    words = []
    for e in hypothesis.emitted:
        if e.surface == EOS and not e.copied:
            continue
        if e.copied and source_tokens is not None:
            words.append(source_tokens[e.position])
        else:
            words.append(e.surface)
    return " ".join(words)


def summarize(model, source, beam=10, max_len=30):
    sentences = _normalize_source(source)
    best = beam_search(model, sentences, beam, max_len)[0]
    return realize(best, [t for s in sentences for t in s])


def alpha_rows(model, source):
    """``(position, token, mean importance weight)`` per source token."""
    enc, src = prepare(model, source)
    if enc.alpha is None:
        raise ValueError(f"mode {model.cfg.mode!r} has no importance weights")
    means = enc.alpha.mean(axis=1)
    return [(i, t, float(m)) for i, (t, m) in enumerate(zip(src.tokens, means))]
