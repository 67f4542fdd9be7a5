"""Corpus loading, vocabulary, and fixed-length one-hot batching."""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import torch

from .errors import ConfigError, CorpusError

PAD, SOS, EOS, UNK = "<pad>", "<sos>", "<eos>", "<unk>"
SPECIALS = (PAD, SOS, EOS, UNK)
PAD_ID, SOS_ID, EOS_ID, UNK_ID = range(4)


@dataclass
class Vocabulary:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:4]) != SPECIALS:
            raise ConfigError(f"vocabulary must start with {SPECIALS}")
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ConfigError("duplicate tokens in vocabulary")

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.id_to_token).encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text("".join(tok + "\n" for tok in self.id_to_token), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())


@dataclass
class TokenizedCorpus:
    """Id sequences, each ending in ``<eos>`` and no longer than ``max_len``."""

    sentences: list[list[int]]
    max_len: int
    vocab: Vocabulary

    def __len__(self):
        return len(self.sentences)

    def padded(self) -> np.ndarray:
        out = np.full((len(self.sentences), self.max_len), PAD_ID, dtype=np.int64)
        for i, ids in enumerate(self.sentences):
            out[i, : len(ids)] = ids
        return out


def load_corpus(path, lowercase: bool = True) -> list[list[str]]:
    path = Path(path)
    sentences = []
    with path.open("rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno} is not valid UTF-8 ({exc.reason})") from None
            if lowercase:
                line = line.lower()
            tokens = line.split()
            if tokens:
                sentences.append(tokens)
    return sentences


def build_vocab(sentences: Sequence[Sequence[str]], max_size: int) -> Vocabulary:
    if max_size < 5:
        raise ConfigError(f"max vocabulary size must be >= 5, got {max_size}")
    counts = Counter(tok for sent in sentences for tok in sent if tok not in SPECIALS)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(list(SPECIALS) + [tok for tok, _ in ranked[: max_size - len(SPECIALS)]])


def encode_ids(vocab: Vocabulary, tokens: Sequence[str], max_len: int) -> list[int]:
    """Map tokens to ids, append ``<eos>`` and truncate so ``<eos>`` survives."""
    ids = [vocab.lookup(tok) for tok in tokens][: max_len - 1]
    ids.append(EOS_ID)
    return ids


def tokenize_corpus(vocab: Vocabulary, sentences: Sequence[Sequence[str]], max_len: int) -> TokenizedCorpus:
    if max_len < 1:
        raise ConfigError("max_len must be positive")
    return TokenizedCorpus([encode_ids(vocab, s, max_len) for s in sentences], max_len, vocab)


def one_hot(ids: torch.Tensor, vocab_size: int, dtype=torch.float32) -> torch.Tensor:
    return torch.nn.functional.one_hot(ids.long(), vocab_size).to(dtype)


def encode_batch(vocab: Vocabulary, sentences: Sequence[Sequence[str]], max_len: int,
                 dtype=torch.float32) -> torch.Tensor:
    if not sentences:
        raise CorpusError("cannot encode an empty batch")
    ids = tokenize_corpus(vocab, sentences, max_len).padded()
    return one_hot(torch.from_numpy(ids), vocab.size, dtype)


def decode_ids(vocab: Vocabulary, ids: Sequence[int]) -> str:
    words = []
    for i in ids:
        i = int(i)
        if i < 0 or i >= vocab.size:
            raise IndexError(f"id {i} outside vocabulary of size {vocab.size}")
        if i == EOS_ID:
            break
        if i in (PAD_ID, SOS_ID):
            continue
        words.append(vocab.id_to_token[i])
    return " ".join(words)


class BatchSampler:
    """Uniform with-replacement batch sampler whose RNG state can be checkpointed."""

    def __init__(self, corpus: TokenizedCorpus, batch_size: int, seed: int = 0):
        if len(corpus) == 0:
            raise CorpusError("cannot sample from an empty corpus")
        if batch_size > len(corpus):
            raise ConfigError(f"batch_size {batch_size} exceeds corpus size {len(corpus)}")
        self.corpus = corpus
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self._ids = torch.from_numpy(corpus.padded())

    def sample_indices(self) -> np.ndarray:
        return self.rng.integers(0, len(self.corpus), size=self.batch_size)

    def sample(self, dtype=torch.float32) -> torch.Tensor:
        idx = torch.from_numpy(self.sample_indices())
        return one_hot(self._ids[idx], self.corpus.vocab.size, dtype)

    def state_dict(self):
        return self.rng.bit_generator.state

    def load_state_dict(self, state):
        self.rng.bit_generator.state = state


def batch_iterator(corpus: TokenizedCorpus, batch_size: int, seed: int,
                   dtype=torch.float32) -> Iterator[torch.Tensor]:
    sampler = BatchSampler(corpus, batch_size, seed)
    while True:
        yield sampler.sample(dtype)
