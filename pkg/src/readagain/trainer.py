"""Likelihood training with plain SGD, global-norm clipping and halving LR."""
from __future__ import annotations

import json
import logging
import math
import struct
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .mathcore import ParamTensor
from .model import BIASES, Model, ModelConfig, param_shapes
from .text import Vocabulary

log = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    d: int = 512
    vocab_size: int = 15000
    mode: str = "gru"
    cell: str | None = None
    copy: bool = True
    epochs: int = 10
    batch_size: int = 64
    lr0: float = 2.0
    decay_after: int | None = 5  # None disables halving
    clip: float = 10.0
    dropout: float = 0.2
    bias_init: float = 0.1
    seed: int = 0
    force_alpha: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.clip <= 0:
            raise ValueError("clip must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def init_range(self):
        return math.sqrt(3.0 / self.d)

    def model_config(self):
        return ModelConfig(d=self.d, vocab_size=self.vocab_size, mode=self.mode,
                           cell=self.cell, copy=self.copy, force_alpha=self.force_alpha)


@dataclass
class TrainHistory:
    mean_nll: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def __len__(self):
        return len(self.mean_nll)

    def to_csv(self, path):
        with open(path, "w", encoding="ascii") as f:
            f.write("epoch,lr,mean_nll,seconds\n")
            for e, (lr, nll, s) in enumerate(zip(self.lr, self.mean_nll, self.seconds), 1):
                f.write(f"{e},{lr!r},{nll!r},{s:.6f}\n")


def init_params(config, rng=None):
    """Uniform(+-sqrt(3/d)) weights, constant biases; deterministic per seed."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    r = config.init_range
    params = {}
    for name, shape in param_shapes(config.model_config()).items():
        if name in BIASES:
            values = np.full(shape, config.bias_init)
        else:
            values = rng.uniform(-r, r, size=shape)
        params[name] = ParamTensor(name, values)
    return params


def lr_schedule(epoch, lr0=2.0, decay_after=5):
    """``lr0`` for the first ``decay_after`` epochs, then halved every epoch."""
    if epoch < 1:
        raise ValueError("epochs are 1-based")
    if decay_after is None or epoch <= decay_after:
        return lr0
    return lr0 * 2.0 ** -(epoch - decay_after)


def clip_gradients(params, threshold=10.0):
    """Global-norm clipping in place; returns the scale factor applied."""
    sq = 0.0
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient in {p.name}")
        sq += float(np.sum(p.grad * p.grad))
    norm = math.sqrt(sq)
    if norm <= threshold:
        return 1.0
    scale = threshold / norm
    for p in params:
        p.grad *= scale
    return scale


class Diverged(RuntimeError):
    def __init__(self, msg, model, history):
        super().__init__(msg)
        self.model = model
        self.history = history


def train(config, corpus, vocab, callback=None):
    """Train a fresh model on ``corpus``; returns ``(model, history)``.

    ``callback(epoch, model, history)`` runs after each epoch.  A non-finite
    loss raises ``Diverged`` carrying the last good parameters.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    rng = np.random.default_rng(config.seed)
    model = Model(config.model_config(), vocab, init_params(config, rng))
    params = model.parameters()
    history = TrainHistory()
    last_good = None
    for epoch in range(1, config.epochs + 1):
        lr = lr_schedule(epoch, config.lr0, config.decay_after)
        t0 = time.perf_counter()
        order = rng.permutation(len(corpus))
        total_loss = 0.0
        total_tokens = 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            model.zero_grad()
            b_loss, b_tokens = 0.0, 0
            # overflow surfaces below as a non-finite loss or gradient
            with np.errstate(over="ignore", invalid="ignore"):
                for idx in batch:
                    loss, ntok = model.example_loss(corpus[idx], rng, config.dropout)
                    b_loss += loss
                    b_tokens += ntok
            try:
                if not math.isfinite(b_loss):
                    raise FloatingPointError(f"non-finite loss {b_loss}")
                for p in params:
                    p.grad /= b_tokens
                clip_gradients(params, config.clip)
            except FloatingPointError as e:
                if last_good is not None:
                    for p in params:
                        p.values[...] = last_good[p.name]
                raise Diverged(f"epoch {epoch}: {e}", model, history) from e
            if lr != 0.0:
                last_good = {p.name: p.values.copy() for p in params}
                for p in params:
                    p.values -= lr * p.grad
            total_loss += b_loss
            total_tokens += b_tokens
        history.mean_nll.append(total_loss / total_tokens)
        history.lr.append(lr)
        history.seconds.append(time.perf_counter() - t0)
        log.info("epoch %d lr %g mean nll %.5f (%.1fs)", epoch, lr,
                 history.mean_nll[-1], history.seconds[-1])
        if callback is not None:
            callback(epoch, model, history)
    return model, history


def evaluate_nll(model, corpus):
    """Teacher-forced mean NLL per target token, dropout off."""
    total, ntok = 0.0, 0
    for ex in corpus:
        loss, n = model.example_loss(ex, backward=False)
        total += loss
        ntok += n
    return total / ntok


# -- checkpoints ---------------------------------------------------------------

MAGIC = b"RAS2"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _pack_str(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def save_checkpoint(model, path, train_config=None):
    """Little-endian: magic, version, config JSON, vocabulary, tensor table."""
    cfg = {"model": model.cfg.to_dict()}
    if train_config is not None:
        cfg["train"] = asdict(train_config)
    out = [MAGIC, struct.pack("<I", VERSION), _pack_str(json.dumps(cfg, sort_keys=True))]
    out.append(struct.pack("<I", len(model.vocab)))
    out.extend(_pack_str(t) for t in model.vocab.tokens)
    out.append(struct.pack("<I", len(model.params)))
    for name, p in model.params.items():
        out.append(_pack_str(name))
        out.append(struct.pack("<B", p.values.ndim))
        out.append(struct.pack(f"<{p.values.ndim}I", *p.values.shape))
        out.append(np.ascontiguousarray(p.values, dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(out))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self):
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")


def load_checkpoint(path, expect=None):
    """Returns ``(model, train_config_or_None)``.

    ``expect`` (a ``ModelConfig``) makes any size or mode difference an error.
    Nothing is returned unless the whole file parses.
    """
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    cfg = json.loads(r.string())
    (nvocab,) = r.unpack("<I")
    vocab = Vocabulary([r.string() for _ in range(nvocab)])
    (ntensor,) = r.unpack("<I")
    params = {}
    for _ in range(ntensor):
        name = r.string()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        count = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(shape)
        params[name] = ParamTensor(name, values.astype(np.float64))
    if r.pos != len(data):
        raise CheckpointError(f"{path}: trailing bytes after tensor table")
    mcfg = ModelConfig(**cfg["model"])
    if expect is not None:
        for name in ("d", "vocab_size", "mode"):
            if getattr(expect, name) != getattr(mcfg, name):
                raise CheckpointError(
                    f"checkpoint {name}={getattr(mcfg, name)} but {getattr(expect, name)} requested")
    try:
        model = Model(mcfg, vocab, params)
    except ValueError as e:
        raise CheckpointError(f"{path}: {e}") from e
    tcfg = TrainingConfig(**cfg["train"]) if "train" in cfg else None
    return model, tcfg
