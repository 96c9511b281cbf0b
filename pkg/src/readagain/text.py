"""Corpus preprocessing, vocabularies and the synthetic copy corpus."""
from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
SPECIALS = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3
SENT_SEP = "<s>"

_DIGIT = re.compile(r"\d")
_TERMINATOR = re.compile(r"[.!?]")


class Vocabulary:
    """Token <-> id map; ids 0-3 are PAD, UNK, BOS, EOS."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tuple(tokens[:4]) != SPECIALS:
            tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self):
        return f"Vocabulary(size={len(self)})"

    def id(self, token):
        return self.index.get(token, UNK_ID)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for t in self.tokens:
                f.write(t + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f]
        if tuple(tokens[:4]) != SPECIALS:
            raise ValueError(f"{path}: first four lines must be {SPECIALS}")
        return cls(tokens)


@dataclass
class Example:
    """One source/target pair; ``sentences`` keeps the source sentence split."""

    sentences: list
    target_tokens: list
    raw_source: str = ""

    def __post_init__(self):
        self.sentences = [list(s) for s in self.sentences]
        self.target_tokens = list(self.target_tokens)
        if not self.sentences or any(not s for s in self.sentences):
            raise ValueError("empty source sentence")
        if not self.target_tokens:
            raise ValueError("empty target")

    @property
    def source_tokens(self):
        return [t for s in self.sentences for t in s]


def preprocess(line):
    """Whitespace-split, lower-case, and rewrite every digit to ``#``."""
    return _DIGIT.sub("#", line.lower()).split()


def first_sentence(article):
    """Text up to and including the first ``.``, ``!`` or ``?``.

    Naive on purpose: no abbreviation handling, so "dr. smith" ends at "dr.".
    """
    m = _TERMINATOR.search(article)
    if m is None:
        return article.strip()
    return article[: m.end()].strip()


def leading_sentences(article, k):
    """Up to ``k`` sentences split by the same rule as ``first_sentence``."""
    out = []
    rest = article
    for _ in range(k):
        rest = rest.strip()
        if not rest:
            break
        m = _TERMINATOR.search(rest)
        end = m.end() if m else len(rest)
        out.append(rest[:end].strip())
        rest = rest[end:]
    return out


def build_vocab(corpus, size):
    """Specials plus the ``size - 4`` most frequent source/target tokens."""
    if size < 5:
        raise ValueError(f"vocabulary size must be >= 5, got {size}")
    counts = Counter()
    for ex in corpus:
        counts.update(ex.source_tokens)
        counts.update(ex.target_tokens)
    for s in SPECIALS:
        counts.pop(s, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(list(SPECIALS) + [t for t, _ in ranked[: size - 4]])


def lookup(vocab, tokens):
    return [vocab.id(t) for t in tokens]


# -- synthetic copy task ----------------------------------------------------

FUNCTION_WORDS = (
    "the", "a", "of", "to", "in", "and", "for", "on", "at", "by",
    "with", "from", "said", "was", "is", "as", "that", "it", "has", "will",
)


def entity_pool(size=5000):
    return [f"ent{i:04d}" for i in range(size)]


def synth_copy_corpus(seed, n_examples, pool_size=5000):
    """Sources of 6-12 tokens mixing function words with 1-4 entities.

    The target is the entities in source order, so solving the task requires
    copying: the entity pool never enters a function-word vocabulary.
    """
    if n_examples < 1:
        raise ValueError("n_examples must be >= 1")
    rng = random.Random(seed)
    pool = entity_pool(pool_size)
    out = []
    for _ in range(n_examples):
        length = rng.randint(6, 12)
        n_ent = rng.randint(1, 4)
        slots = sorted(rng.sample(range(length), n_ent))
        ents = rng.sample(pool, n_ent)
        src = [rng.choice(FUNCTION_WORDS) for _ in range(length)]
        for pos, ent in zip(slots, ents):
            src[pos] = ent
        out.append(Example([src], list(ents), " ".join(src)))
    return out


# -- corpus files -----------------------------------------------------------

def parse_line(line):
    """``source<TAB>target`` with source sentences joined by `` <s> ``."""
    line = line.rstrip("\n")
    if "\t" not in line:
        raise ValueError("missing TAB separator")
    src, tgt = line.split("\t", 1)
    sentences = [s.split() for s in src.split(f" {SENT_SEP} ")]
    sentences = [s for s in sentences if s]
    return Example(sentences, tgt.split(), src)


def format_example(ex):
    src = f" {SENT_SEP} ".join(" ".join(s) for s in ex.sentences)
    return f"{src}\t{' '.join(ex.target_tokens)}"


def read_corpus(path):
    with open(path, encoding="utf-8") as f:
        return [parse_line(line) for line in f if line.strip()]


def write_corpus(path, examples):
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(format_example(ex) + "\n")


def parse_source(line):
    """Source sentences from a summarize input line (target part ignored)."""
    src = line.rstrip("\n").split("\t", 1)[0]
    return [s.split() for s in src.split(f" {SENT_SEP} ") if s.split()]
