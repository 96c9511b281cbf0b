import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readagain.decoder import Emitted, decoder_step, input_embedding
from readagain.inference import (Hypothesis, alpha_rows, beam_search, greedy_decode, prepare,
                                 realize, summarize)
from readagain.text import EOS, EOS_ID

from conftest import random_model

TOY_SOURCE = ["w0", "zeta"]


def toy_model(seed=0):
    # |Y| = 4 specials + 2 words
    return random_model("gru", d=6, n_words=2, seed=seed, scale=1.5)


def brute_force(model, source, max_len):
    """Every emission sequence up to ``max_len`` (ending in EOS or capped)."""
    _, src = prepare(model, source)
    V = len(model.vocab)
    d = model.cfg.d
    best = []

    def walk(state, prev, seq, logp):
        if seq and (seq[-1] == EOS_ID or len(seq) == max_len):
            best.append((logp, tuple(seq)))
            return
        y = input_embedding(model.params, prev[0] if prev else None, src, prev[1] if prev else None)
        state2, dist, _, _ = decoder_step(model.params, state, y, src)
        for slot, p in enumerate(dist.probs):
            if p == 0.0:
                continue
            surface = model.vocab.tokens[slot] if slot < V else src.tokens[slot - V]
            pos = None if slot < V else slot - V
            walk(state2, (surface, pos), seq + [slot], logp + math.log(p))

    walk((np.zeros(d), np.zeros(d)), None, [], 0.0)
    best.sort(key=lambda t: -t[0])
    return best


@pytest.mark.parametrize("seed", range(6))
def test_exhaustive_beam_equals_brute_force(seed):
    model = toy_model(seed)
    full = brute_force(model, TOY_SOURCE, 2)
    top = beam_search(model, TOY_SOURCE, beam=64, max_len=2)[0]
    assert top.logp == pytest.approx(full[0][0], abs=1e-12)
    assert tuple(e.slot for e in top.emitted) == full[0][1]


@pytest.mark.parametrize("seed", range(6))
def test_top_score_monotone_in_beam(seed):
    model = toy_model(seed)
    scores = [beam_search(model, TOY_SOURCE, beam=k, max_len=2)[0].logp for k in (1, 2, 4, 8)]
    assert all(b >= a for a, b in zip(scores, scores[1:]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_beam_one_is_greedy(seed, max_len):
    model = random_model("lstm", d=6, n_words=5, seed=seed, scale=1.2)
    src = [f"w{i}" for i in np.random.default_rng(seed).integers(0, 7, 4)]
    b = beam_search(model, src, beam=1, max_len=max_len)[0]
    g = greedy_decode(model, src, max_len=max_len)
    assert [e.slot for e in b.emitted] == [e.slot for e in g.emitted]
    assert b.logp == g.logp


def test_hypothesis_invariants():
    model = toy_model(1)
    for h in beam_search(model, TOY_SOURCE, beam=5, max_len=4):
        assert h.logp == pytest.approx(sum(h.step_logps), abs=1e-12)
        assert h.done == (h.emitted[-1].slot == EOS_ID)
        for e in h.emitted:
            if e.surface not in model.vocab:
                assert e.copied and TOY_SOURCE[e.position] == e.surface


def test_certain_eos_gives_single_empty_summary():
    model = toy_model(2)
    P = model.params
    P["out.b"].values[EOS_ID] = 1e4
    P["cp.v_p"].values[...] = 0.0
    hyps = beam_search(model, TOY_SOURCE, beam=4, max_len=5)
    assert len(hyps) == 1
    assert hyps[0].logp == 0.0 and realize(hyps[0]) == ""
    assert summarize(model, TOY_SOURCE, beam=4) == ""


def test_realize_examples():
    src = ["qantas", "and", "air", "ansett", "merge"]
    hyp = Hypothesis([Emitted(10, "air"), Emitted(12, "ansett", 3), Emitted(EOS_ID, EOS)])
    assert realize(hyp, src) == "air ansett"
    assert realize(Hypothesis()) == ""
    assert realize(Hypothesis([Emitted(5, "a"), Emitted(6, "b")])) == "a b"


def test_empty_source_and_bad_args():
    model = toy_model()
    with pytest.raises(ValueError):
        beam_search(model, [], beam=2)
    with pytest.raises(ValueError):
        beam_search(model, TOY_SOURCE, beam=0)


def test_ignore_eos_runs_fixed_steps():
    model = toy_model(2)
    model.params["out.b"].values[EOS_ID] = 1e4
    assert len(greedy_decode(model, TOY_SOURCE, 7, ignore_eos=True).emitted) == 7
    assert len(greedy_decode(model, TOY_SOURCE, 7).emitted) == 1


def test_alpha_rows():
    model = random_model("gru", d=4, n_words=4)
    rows = alpha_rows(model, ["w1", "zz", "w2"])
    assert [r[:2] for r in rows] == [(0, "w1"), (1, "zz"), (2, "w2")]
    assert all(-1.0 <= r[2] <= 1.0 for r in rows)
    with pytest.raises(ValueError):
        alpha_rows(random_model("lstm", d=4, n_words=4), ["w1"])


def test_multi_sentence_source_is_flattened_for_copy():
    model = random_model("multi-concat", d=4, n_words=4, seed=3, scale=1.0)
    hyps = beam_search(model, [["w1", "qq"], ["w2"]], beam=3, max_len=3)
    for h in hyps:
        for e in h.emitted:
            if e.copied:
                assert ["w1", "qq", "w2"][e.position] == e.surface
