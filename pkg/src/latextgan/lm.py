"""LSTM language models for forward and reverse perplexity."""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .data import PAD_ID, SOS_ID, TokenizedCorpus, Vocabulary, build_vocab, tokenize_corpus
from .errors import CorpusError, VocabularyMismatch

log = logging.getLogger(__name__)

Corpus = Union[TokenizedCorpus, Sequence[Sequence[str]], Sequence[str]]


@dataclass
class LMConfig:
    hidden: int = 512
    emb_dim: int = 512
    lr: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 20
    patience: int = 2
    holdout: float = 0.1
    vocab_size: int = 10000
    max_len: int = 20
    seed: int = 0


class LanguageModel(nn.Module):
    def __init__(self, vocab: Vocabulary, max_len: int, hidden: int = 512, emb_dim: int = 512):
        super().__init__()
        self.vocab = vocab
        self.max_len = max_len
        self.embed = nn.Embedding(vocab.size, emb_dim)
        self.lstm = nn.LSTM(emb_dim, hidden, batch_first=True)
        self.out = nn.Linear(hidden, vocab.size)

    def log_probs(self, inputs: torch.Tensor) -> torch.Tensor:
        h, _ = self.lstm(self.embed(inputs))
        return F.log_softmax(self.out(h), dim=-1)


class UniformLM:
    """Assigns probability 1/V to every token; perplexity is V."""

    def __init__(self, vocab: Vocabulary, max_len: int):
        self.vocab = vocab
        self.max_len = max_len

    def log_probs(self, inputs: torch.Tensor) -> torch.Tensor:
        v = self.vocab.size
        return torch.full((*inputs.shape, v), -math.log(v), dtype=torch.float64)


def teacher_forcing_pairs(padded: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
    """Inputs are ``<sos>`` plus the sequence shifted right; targets are the sequence itself."""
    targets = torch.from_numpy(padded)
    inputs = torch.full_like(targets, PAD_ID)
    inputs[:, 0] = SOS_ID
    inputs[:, 1:] = targets[:, :-1]
    return inputs, targets


def _as_corpus(corpus: Corpus, vocab: Vocabulary, max_len: int) -> TokenizedCorpus:
    if isinstance(corpus, TokenizedCorpus):
        if corpus.vocab != vocab:
            raise VocabularyMismatch("corpus was encoded with a different vocabulary than the model's")
        return corpus
    sents = [s.split() if isinstance(s, str) else list(s) for s in corpus]
    return tokenize_corpus(vocab, sents, max_len)


def nll_sum(lm, corpus: TokenizedCorpus, batch_size: int = 256) -> tuple[float, int]:
    """Summed negative log-likelihood over non-pad targets (``<eos>`` included) and their count."""
    inputs, targets = teacher_forcing_pairs(corpus.padded())
    total, count = 0.0, 0
    if isinstance(lm, nn.Module):
        lm.eval()
    with torch.no_grad():
        for i in range(0, len(targets), batch_size):
            lp = lm.log_probs(inputs[i:i + batch_size]).double()
            tgt = targets[i:i + batch_size]
            picked = lp.gather(-1, tgt.unsqueeze(-1)).squeeze(-1)
            mask = tgt != PAD_ID
            total -= picked[mask].sum().item()
            count += int(mask.sum())
    return total, count


def perplexity(lm, corpus: Corpus) -> float:
    """``exp`` of the mean per-token negative log-likelihood."""
    enc = _as_corpus(corpus, lm.vocab, lm.max_len)
    if len(enc) == 0:
        raise CorpusError("cannot compute perplexity of an empty corpus")
    total, count = nll_sum(lm, enc)
    return math.exp(total / count)


def train_lm(corpus: Corpus, config: LMConfig = LMConfig()) -> LanguageModel:
    """Teacher-forced LSTM LM with held-out early stopping.

    Token-list corpora get a vocabulary built from their own tokens.
    """
    if isinstance(corpus, TokenizedCorpus):
        enc = corpus
    else:
        sents = [s.split() if isinstance(s, str) else list(s) for s in corpus]
        if not sents:
            raise CorpusError("cannot train a language model on an empty corpus")
        enc = tokenize_corpus(build_vocab(sents, config.vocab_size), sents, config.max_len)
    if len(enc) == 0:
        raise CorpusError("cannot train a language model on an empty corpus")

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(enc))
    n_hold = int(round(config.holdout * len(enc))) if len(enc) >= 2 else 0
    n_hold = min(max(n_hold, 1 if config.holdout > 0 and len(enc) >= 2 else 0), len(enc) - 1)
    hold_idx, train_idx = order[:n_hold], order[n_hold:]
    padded = enc.padded()
    inputs, targets = teacher_forcing_pairs(padded[train_idx])
    held = TokenizedCorpus([enc.sentences[i] for i in hold_idx], enc.max_len, enc.vocab)

    lm = LanguageModel(enc.vocab, enc.max_len, config.hidden, config.emb_dim)
    opt = torch.optim.Adam(lm.parameters(), lr=config.lr)
    best, best_state, bad = math.inf, copy.deepcopy(lm.state_dict()), 0
    for epoch in range(config.max_epochs):
        lm.train()
        perm = torch.from_numpy(rng.permutation(len(inputs)))
        for i in range(0, len(perm), config.batch_size):
            idx = perm[i:i + config.batch_size]
            lp = lm.log_probs(inputs[idx])
            loss = F.nll_loss(lp.reshape(-1, lp.shape[-1]), targets[idx].reshape(-1), ignore_index=PAD_ID)
            opt.zero_grad()
            loss.backward()
            opt.step()
        if len(held) == 0:
            best_state = copy.deepcopy(lm.state_dict())
            continue
        ppl = perplexity(lm, held)
        log.debug("lm epoch %d held-out ppl %.3f", epoch, ppl)
        if ppl < best - 1e-9:
            best, best_state, bad = ppl, copy.deepcopy(lm.state_dict()), 0
        else:
            bad += 1
            if bad >= config.patience:
                break
    lm.load_state_dict(best_state)
    lm.eval()
    return lm


def forward_reverse_ppl(real_train: Corpus, real_test: Corpus, synthetic: Corpus,
                        config: LMConfig = LMConfig()) -> tuple[float, float]:
    """Forward: real-trained LM scored on samples. Reverse: sample-trained LM scored on real test data."""
    forward_lm = train_lm(real_train, config)
    reverse_lm = train_lm(synthetic, config)
    return perplexity(forward_lm, synthetic), perplexity(reverse_lm, real_test)
