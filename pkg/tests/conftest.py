import numpy as np
import pytest

from readagain import kernels
from readagain.model import Model, ModelConfig
from readagain.text import SPECIALS, Vocabulary


def toy_vocab(n_words):
    return Vocabulary(list(SPECIALS) + [f"w{i}" for i in range(n_words)])


def random_model(mode="gru", d=8, n_words=8, seed=0, scale=0.6, copy=True, force_alpha=None):
    vocab = toy_vocab(n_words)
    cfg = ModelConfig(d=d, vocab_size=len(vocab), mode=mode, copy=copy, force_alpha=force_alpha)
    model = Model(cfg, vocab)
    rng = np.random.default_rng(seed)
    for p in model.parameters():
        p.values[...] = rng.uniform(-scale, scale, size=p.shape)
    return model


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
