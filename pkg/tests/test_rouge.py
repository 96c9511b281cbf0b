import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readagain import rouge
from readagain.rouge import (RougeScore, cap_tokens, capped_recall, lcs_length, rouge_l, rouge_n,
                             score_corpus)

import oracles


def _close(s, p, r, f):
    assert abs(s.precision - p) <= 1e-12 and abs(s.recall - r) <= 1e-12 and abs(s.f1 - f) <= 1e-12


def test_hand_examples():
    _close(rouge_n("the cat sat".split(), ["the cat".split()], 1), 2 / 3, 1.0, 0.8)
    _close(rouge_n("a b c".split(), ["a b d".split()], 2), 0.5, 0.5, 0.5)
    _close(rouge_l("a c b".split(), ["a b c".split()]), 2 / 3, 2 / 3, 2 / 3)


def test_trivial_cases():
    toks = "x y z y".split()
    for n in (1, 2):
        _close(rouge_n(toks, [toks], n), 1, 1, 1)
    _close(rouge_l(toks, [toks]), 1, 1, 1)
    _close(rouge_l("a b".split(), ["c d".split()]), 0, 0, 0)
    assert rouge_n([], ["a".split()], 1) == rouge.ZERO
    assert rouge_l([], ["a"]) == rouge.ZERO
    with pytest.raises(ValueError):
        rouge_n(["a"], [["a"]], 3)


def test_clipped_counts_and_max_over_references():
    s = rouge_n("the the the".split(), ["the cat".split()], 1)
    _close(s, 1 / 3, 1 / 2, 0.4)
    best = rouge_n("a b".split(), ["x y".split(), "a b c".split()], 1)
    _close(best, 1.0, 2 / 3, 0.8)
    # a single flat reference works too
    assert rouge_l("a b".split(), "a b".split()).f1 == 1.0


def test_f1_from_counts():
    assert RougeScore.from_counts(0, 3, 3) == rouge.ZERO
    s = RougeScore.from_counts(1, 2, 4)
    assert s.f1 == pytest.approx(2 * 0.5 * 0.25 / 0.75)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from("abcd"), max_size=8), st.lists(st.sampled_from("abcd"), max_size=8))
def test_lcs_matches_enumeration(a, b):
    assert lcs_length(a, b) == oracles.lcs(a, b)


def test_cap_tokens_boundaries():
    assert cap_tokens("aaaa bbbb cccc", 9) == ["aaaa", "bbbb"]
    assert cap_tokens("aaaa bbbb cccc", 8) == ["aaaa"]
    assert cap_tokens("toolongtoken", 5) == []
    # multibyte: "é" is 2 bytes
    assert cap_tokens("éé é", 4) == ["éé"]
    assert cap_tokens("éé é", 7) == ["éé", "é"]


def test_capped_recall_examples():
    ref = ["cat sat on mat"]
    short = "the cat sat"
    assert capped_recall(short, ref) == rouge_n(short.split(), [ref[0].split()], 1).recall
    long_cand = "cat sat on mat " + " ".join(["filler"] * 20)
    assert len(long_cand.encode()) > 75
    assert capped_recall(long_cand, ref) == 1.0
    cand = " ".join(f"w{i:02d}" for i in range(25))  # 99 bytes
    manual = cand[:75].rsplit(" ", 1)[0] if cand[75] != " " else cand[:75]
    refs = [" ".join(f"w{i:02d}" for i in range(0, 25, 2))]
    for m in ("rouge-1", "rouge-2", "rouge-l"):
        assert capped_recall(cand, refs, m) == rouge.METRICS[m](manual.split(), [refs[0].split()]).recall


def test_score_corpus_means():
    res = score_corpus(["a b", "c"], [["a b"], ["d", "c"]])
    assert res["rouge-1"].f1 == 1.0
    res = score_corpus(["a b", "x"], [["a b"], ["c"]])
    assert res["rouge-1"].f1 == 0.5
    assert set(res) == {"rouge-1", "rouge-2", "rouge-l"}


def test_bench_decode_smoke():
    res = rouge.bench_decode([200], d=8, n_sources=2, src_len=4, steps=3, reps=1)
    assert list(res) == [200] and res[200] > 0


def test_random_pairs_rouge_l_exact():
    rng = random.Random(5)
    for _ in range(200):
        a = [rng.choice("abcde") for _ in range(rng.randint(0, 8))]
        b = [rng.choice("abcde") for _ in range(rng.randint(1, 8))]
        s = rouge_l(a, [b])
        k = oracles.lcs(a, b)
        if a:
            assert s.precision == k / len(a) and s.recall == k / len(b)
