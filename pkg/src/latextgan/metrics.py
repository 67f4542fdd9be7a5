"""BLEU-n without brevity penalty, self-BLEU, and the evaluation report."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

MAX_ORDER = 5


def _tokens(sentence):
    return sentence.split() if isinstance(sentence, str) else list(sentence)


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def ngram_profile(tokens: Sequence[str], max_order: int = MAX_ORDER) -> dict[int, Counter]:
    return {n: ngram_counts(tokens, n) for n in range(1, max_order + 1)}


def _check_order(n):
    if not 1 <= n <= MAX_ORDER:
        raise ValueError(f"BLEU order must be in 1..{MAX_ORDER}, got {n}")


def _geometric_mean(clipped, totals) -> float:
    if any(t == 0 or c == 0 for c, t in zip(clipped, totals)):
        return 0.0
    return math.exp(sum(math.log(c / t) for c, t in zip(clipped, totals)) / len(totals))


def max_reference_counts(references, n: int) -> dict[int, Counter]:
    """Per order, the largest count of each n-gram in any single reference."""
    out = {k: Counter() for k in range(1, n + 1)}
    for ref in references:
        toks = _tokens(ref)
        for k in range(1, n + 1):
            best = out[k]
            for g, c in ngram_counts(toks, k).items():
                if c > best[g]:
                    best[g] = c
    return out


def bleu_n(candidates, references, n: int, ref_counts: Optional[dict] = None) -> float:
    """Corpus BLEU-n: geometric mean of clipped 1..n-gram precisions, no brevity penalty, no smoothing."""
    _check_order(n)
    if not candidates:
        raise ValueError("candidates must be non-empty")
    if ref_counts is None:
        if not references:
            raise ValueError("references must be non-empty")
        ref_counts = max_reference_counts(references, n)
    clipped, totals = [0] * n, [0] * n
    for cand in candidates:
        toks = _tokens(cand)
        for k in range(1, n + 1):
            best = ref_counts[k]
            for g, c in ngram_counts(toks, k).items():
                clipped[k - 1] += min(c, best.get(g, 0))
                totals[k - 1] += c
    return _geometric_mean(clipped, totals)


def self_bleu(sentences, n: int, max_refs: Optional[int] = None, seed: int = 0) -> float:
    """Mean BLEU-n of each sentence against all the others.

    Exact by default, in O(total n-grams): for every n-gram we keep its two largest
    per-sentence counts, so "max over all other sentences" is a lookup. ``max_refs``
    subsamples the references per hypothesis instead, which changes the statistic.
    """
    _check_order(n)
    sents = [_tokens(s) for s in sentences]
    if len(sents) < 2:
        raise ValueError("self-BLEU needs at least two sentences")
    if max_refs is not None:
        rng = np.random.default_rng(seed)
        scores = []
        for i, hyp in enumerate(sents):
            others = np.delete(np.arange(len(sents)), i)
            pick = rng.choice(others, size=min(max_refs, len(others)), replace=False)
            scores.append(bleu_n([hyp], [sents[j] for j in pick], n))
        return float(np.mean(scores))

    profiles = [ngram_profile(s, n) for s in sents]
    top = {k: {} for k in range(1, n + 1)}  # ngram -> [best, holder, second]
    for i, prof in enumerate(profiles):
        for k, counts in prof.items():
            table = top[k]
            for g, c in counts.items():
                entry = table.get(g)
                if entry is None:
                    table[g] = [c, i, 0]
                elif c > entry[0]:
                    entry[2] = entry[0]
                    entry[0], entry[1] = c, i
                elif c > entry[2]:
                    entry[2] = c
    total = 0.0
    for i, prof in enumerate(profiles):
        clipped, totals = [0] * n, [0] * n
        for k, counts in prof.items():
            table = top[k]
            for g, c in counts.items():
                best, holder, second = table[g]
                clipped[k - 1] += min(c, second if holder == i else best)
                totals[k - 1] += c
        total += _geometric_mean(clipped, totals)
    return total / len(profiles)


@dataclass
class MetricsReport:
    bleu: dict[int, float] = field(default_factory=dict)
    self_bleu: dict[int, float] = field(default_factory=dict)
    forward_ppl: Optional[float] = None
    reverse_ppl: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d["bleu"] = {str(k): v for k, v in self.bleu.items()}
        d["self_bleu"] = {str(k): v for k, v in self.self_bleu.items()}
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        d = json.loads(text)
        d["bleu"] = {int(k): v for k, v in d["bleu"].items()}
        d["self_bleu"] = {int(k): v for k, v in d["self_bleu"].items()}
        return cls(**d)
