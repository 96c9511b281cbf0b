"""ROUGE-1/2/L (full-length F1 and byte-capped recall) and a decode-time bench."""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

CAP_BYTES = 75


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap, n_cand, n_ref):
        p = overlap / n_cand if n_cand else 0.0
        r = overlap / n_ref if n_ref else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)


ZERO = RougeScore(0.0, 0.0, 0.0)


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _best(scores):
    # max F1 over references; first reference wins ties
    best = ZERO
    for s in scores:
        if s.f1 > best.f1:
            best = s
    return best


def _refs(references):
    if references and isinstance(references[0], str):
        return [list(references)]
    return [list(r) for r in references]


def rouge_n(candidate, references, n=1):
    """Clipped n-gram overlap against each reference; the max-F1 one is kept."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    candidate = list(candidate)
    if not candidate:
        return ZERO
    cand = _ngrams(candidate, n)
    n_cand = sum(cand.values())
    scores = []
    for ref in _refs(references):
        r = _ngrams(ref, n)
        overlap = sum(min(c, r[g]) for g, c in cand.items())
        scores.append(RougeScore.from_counts(overlap, n_cand, sum(r.values())))
    return _best(scores)


def lcs_length(a, b):
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, references):
    candidate = list(candidate)
    if not candidate:
        return ZERO
    scores = [RougeScore.from_counts(lcs_length(candidate, ref), len(candidate), len(ref))
              for ref in _refs(references)]
    return _best(scores)


METRICS = {
    "rouge-1": lambda c, r: rouge_n(c, r, 1),
    "rouge-2": lambda c, r: rouge_n(c, r, 2),
    "rouge-l": rouge_l,
}


def cap_tokens(candidate, cap=CAP_BYTES):
    """Longest token prefix whose space-joined UTF-8 form fits in ``cap`` bytes."""
    tokens = candidate.split() if isinstance(candidate, str) else list(candidate)
    out, used = [], 0
    for t in tokens:
        size = len(t.encode("utf-8")) + (1 if out else 0)
        if used + size > cap:
            break
        out.append(t)
        used += size
    return out


def capped_recall(candidate, references, metric="rouge-1", cap=CAP_BYTES):
    """Recall of the candidate truncated to ``cap`` bytes at a token boundary."""
    refs = [r.split() if isinstance(r, str) else list(r) for r in references]
    return METRICS[metric](cap_tokens(candidate, cap), refs).recall


def score_corpus(candidates, references, capped=False, cap=CAP_BYTES):
    """Mean P/R/F1 per metric over aligned candidate strings and reference lists."""
    totals = {m: np.zeros(3) for m in METRICS}
    for cand, refs in zip(candidates, references):
        toks = cap_tokens(cand, cap) if capped else cand.split()
        ref_toks = [r.split() for r in refs]
        for m, fn in METRICS.items():
            s = fn(toks, ref_toks)
            totals[m] += (s.precision, s.recall, s.f1)
    n = max(len(candidates), 1)
    return {m: RougeScore(*(v / n)) for m, v in totals.items()}


# -- decode-time bench -----------------------------------------------------------

REFERENCE_TIME_RATIO = 0.356 / 0.076  # published 69k vs 2k decoder timing, non-copy model


def bench_decode(vocab_sizes, d=128, n_sources=20, src_len=30, steps=15, reps=3,
                 seed=0, mode="lstm"):
    """Mean seconds per sentence of greedy decoding at each vocabulary size.

    Every model shares ``d`` and the source set; each decode runs exactly
    ``steps`` steps so timings do not depend on when EOS happens to win.
    Runs with BLAS limited to one thread.
    """
    from threadpoolctl import threadpool_limits

    from .inference import greedy_decode
    from .model import Model
    from .text import Vocabulary
    from .trainer import TrainingConfig, init_params

    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(max(max(vocab_sizes), 1000))]
    sources = [[words[j] for j in rng.integers(0, 1000, size=src_len)]
               for _ in range(n_sources)]
    results = {}
    with threadpool_limits(limits=1):
        for V in vocab_sizes:
            cfg = TrainingConfig(d=d, vocab_size=V, mode=mode, seed=seed)
            vocab = Vocabulary(["<pad>", "<unk>", "<bos>", "<eos>"] + words[: V - 4])
            model = Model(cfg.model_config(), vocab, init_params(cfg))
            greedy_decode(model, sources[0], steps, ignore_eos=True)  # warm-up
            times = []
            for _ in range(reps):
                t0 = time.perf_counter()
                for s in sources:
                    greedy_decode(model, s, steps, ignore_eos=True)
                times.append((time.perf_counter() - t0) / len(sources))
            results[V] = float(np.mean(times))
    return results
