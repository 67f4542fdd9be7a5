"""A tiny context-free grammar for desk-scale runs.

Sixteen words plus the four special tokens give a vocabulary of exactly 20.
The longest sentence has 7 words, so it fits ``max_len=8`` with ``<eos>``.
"""
from __future__ import annotations

import numpy as np

DETERMINERS = ("the", "a")
ADJECTIVES = ("big", "small", "red")
NOUNS = ("dog", "cat", "bird", "man", "woman")
TRANSITIVE = ("sees", "chases", "likes")
INTRANSITIVE = ("runs", "sleeps", "barks")

WORDS = DETERMINERS + ADJECTIVES + NOUNS + TRANSITIVE + INTRANSITIVE
MAX_WORDS = 7


def _noun_phrase(rng):
    words = [DETERMINERS[rng.integers(len(DETERMINERS))]]
    if rng.random() < 0.5:
        words.append(ADJECTIVES[rng.integers(len(ADJECTIVES))])
    words.append(NOUNS[rng.integers(len(NOUNS))])
    return words


def sample_sentence(rng: np.random.Generator) -> list[str]:
    words = _noun_phrase(rng)
    if rng.random() < 0.5:
        words.append(INTRANSITIVE[rng.integers(len(INTRANSITIVE))])
    else:
        words.append(TRANSITIVE[rng.integers(len(TRANSITIVE))])
        words += _noun_phrase(rng)
    return words


def sample_corpus(n: int, seed: int = 0) -> list[list[str]]:
    rng = np.random.default_rng(seed)
    return [sample_sentence(rng) for _ in range(n)]


def _parse_noun_phrase(words, i):
    if i >= len(words) or words[i] not in DETERMINERS:
        return None
    i += 1
    if i < len(words) and words[i] in ADJECTIVES:
        i += 1
    if i >= len(words) or words[i] not in NOUNS:
        return None
    return i + 1


def is_valid(sentence) -> bool:
    """True iff the sentence (string or token list) is generated by the grammar."""
    words = sentence.split() if isinstance(sentence, str) else list(sentence)
    i = _parse_noun_phrase(words, 0)
    if i is None or i >= len(words):
        return False
    if words[i] in INTRANSITIVE:
        return i + 1 == len(words)
    if words[i] in TRANSITIVE:
        return _parse_noun_phrase(words, i + 1) == len(words)
    return False


def write_corpus(path, sentences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(" ".join(s) + "\n")
