"""Full encoder-decoder: parameter layout and per-example loss/gradient."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import decoder, encoder
from .mathcore import ParamTensor
from .text import EOS, Vocabulary, lookup


@dataclass
class ModelConfig:
    d: int
    vocab_size: int
    mode: str = "gru"
    cell: str | None = None  # multi-sentence modes only; default LSTM
    copy: bool = True
    force_alpha: float | None = None  # debug: pin the importance weights

    def __post_init__(self):
        self.cell = encoder.mode_cell(self.mode, self.cell)
        if self.d < 1 or self.vocab_size < 5:
            raise ValueError(f"bad model sizes d={self.d} vocab_size={self.vocab_size}")

    def to_dict(self):
        return asdict(self)


BIASES = {"oov.b_c", "out.b", "glob.v_r"}


def param_shapes(cfg: ModelConfig):
    """Ordered ``{name: shape}`` for every learnable tensor of ``cfg``."""
    d, V = cfg.d, cfg.vocab_size
    shapes = {"emb": (V, d)}
    k2 = encoder.second_read_width(cfg.mode, d)
    for key in encoder.CELL_KEYS[cfg.cell]:
        shapes[f"enc1.{key}"] = (d, 2 * d)
    for key in encoder.CELL_KEYS[cfg.cell]:
        shapes[f"enc2.{key}"] = (d, k2 + d)
    if cfg.mode == "gru":
        for key in ("W_e", "U_e", "V_e"):
            shapes[f"imp.{key}"] = (d, d)
    if cfg.mode == "multi-global":
        shapes.update({"glob.W_r": (d, d), "glob.U_r": (d, d), "glob.v_r": (d,)})
    for key in decoder.DEC_KEYS:
        shapes[f"dec.{key}"] = (d, 3 * d)
    shapes.update({
        "att.v_a": (d,), "att.W_a": (d, d), "att.U_a": (d, d),
        "oov.W_c": (d, d), "oov.b_c": (d,),
        "out.W": (V, d), "out.b": (V,),
        "cp.v_p": (d,), "cp.W_p": (d, d), "cp.U_p": (d, d),
    })
    return shapes


class Model:
    def __init__(self, cfg: ModelConfig, vocab: Vocabulary, params=None):
        if len(vocab) != cfg.vocab_size:
            raise ValueError(f"vocabulary has {len(vocab)} tokens, config says {cfg.vocab_size}")
        self.cfg = cfg
        self.vocab = vocab
        shapes = param_shapes(cfg)
        if params is None:
            params = {k: ParamTensor(k, np.zeros(s)) for k, s in shapes.items()}
        for k, s in shapes.items():
            if k not in params:
                raise ValueError(f"missing parameter {k}")
            if params[k].shape != s:
                raise ValueError(f"parameter {k} has shape {params[k].shape}, expected {s}")
        extra = set(params) - set(shapes)
        if extra:
            raise ValueError(f"unexpected parameters {sorted(extra)}")
        self.params = {k: params[k] for k in shapes}

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def source_ids(self, sentences):
        return [lookup(self.vocab, s) for s in sentences]

    def encode(self, sentences, rng=None, dropout=0.0):
        return encoder.encode(self.params, self.source_ids(sentences), self.cfg.mode,
                              self.cfg.cell, self.cfg.force_alpha, rng, dropout)

    def source_view(self, enc, tokens):
        return decoder.SourceView(self.params, enc.h2, tokens, self.vocab, self.cfg.copy)

    def example_loss(self, example, rng=None, dropout=0.0, backward=True):
        """Teacher-forced NLL summed over target tokens plus EOS.

        Returns ``(loss, n_tokens)``; with ``backward`` gradients are added
        into the parameter ``grad`` arrays.
        """
        enc = self.encode(example.sentences, rng, dropout)
        src = self.source_view(enc, example.source_tokens)
        targets = list(example.target_tokens) + [EOS]
        loss, dH2 = decoder.sequence_loss(self.params, src, targets, rng, dropout, backward)
        if backward:
            encoder.encode_backward(self.params, enc, dH2)
        return loss, len(targets)
