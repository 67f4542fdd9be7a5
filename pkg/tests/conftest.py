import hashlib

import pytest
import torch

from latextgan import data, toy
from latextgan.config import TrainingConfig, desk_config


def tiny_config(kind, **kw):
    """Float64 networks small enough for finite differences (well under 1e4 parameters)."""
    base = dict(
        kind=kind, vocab_size=20, max_len=4, batch_size=3, k=2, hidden=6, emb_dim=4,
        critic_dim=4, critic_blocks=1, kernel=3, code_critic_hidden=8, gen_hidden=8, gen_blocks=1,
        noise_dim=5, eval_every=0, log_every=0, dtype="float64", seed=3,
    )
    base.update(kw)
    return TrainingConfig(**base)


def module_hashes(state):
    out = {}
    for name, m in state.modules.items():
        h = hashlib.sha256()
        for p in m.parameters():
            h.update(p.detach().cpu().numpy().tobytes())
        out[name] = h.hexdigest()
    return out


@pytest.fixture(scope="session")
def toy_sentences():
    return toy.sample_corpus(200, seed=0)


@pytest.fixture(scope="session")
def toy_vocab(toy_sentences):
    return data.build_vocab(toy_sentences, 20)


@pytest.fixture(scope="session")
def toy_corpus(toy_sentences, toy_vocab):
    return data.tokenize_corpus(toy_vocab, toy_sentences, 8)


@pytest.fixture()
def tiny_corpus(toy_sentences, toy_vocab):
    return data.tokenize_corpus(toy_vocab, toy_sentences[:20], 4)


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 10):
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
