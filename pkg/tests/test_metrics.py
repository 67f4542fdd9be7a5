import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from latextgan import toy
from latextgan.metrics import MetricsReport, bleu_n, ngram_counts, ngram_profile, self_bleu


def oracle_bleu(candidates, references, n):
    """From-scratch corpus BLEU: plain lists and dicts, clipping by the largest count in one reference."""
    def grams(toks, k):
        out = {}
        for i in range(len(toks) - k + 1):
            key = " ".join(toks[i:i + k])
            out[key] = out.get(key, 0) + 1
        return out

    log_sum = 0.0
    for k in range(1, n + 1):
        ceiling = {}
        for ref in references:
            for g, c in grams(ref, k).items():
                ceiling[g] = max(ceiling.get(g, 0), c)
        hit = tot = 0
        for cand in candidates:
            for g, c in grams(cand, k).items():
                hit += min(c, ceiling.get(g, 0))
                tot += c
        if hit == 0 or tot == 0:
            return 0.0
        log_sum += math.log(hit / tot)
    return math.exp(log_sum / n)


def test_hand_counted_example():
    assert bleu_n([["a", "b", "c"]], [["a", "b", "d"]], 2) == pytest.approx(math.sqrt(1 / 3), abs=1e-12)
    assert bleu_n(["a b c"], ["a b d"], 1) == pytest.approx(2 / 3)


def test_identical_corpus_and_disjoint_vocabulary():
    corpus = [s for s in toy.sample_corpus(30, seed=1)]
    for n in range(1, 4):  # every toy sentence has at least 3 tokens
        assert bleu_n(corpus, corpus, n) == pytest.approx(1.0)
    assert bleu_n([["x", "y"]], [["a", "b"]], 1) == 0.0


def test_no_brevity_penalty_and_hard_zero():
    # a one-word candidate fully contained in the reference scores 1 at n=1
    assert bleu_n([["a"]], [["a", "b", "c", "d"]], 1) == 1.0
    # no bigram available at all: zero, not smoothed
    assert bleu_n([["a"]], [["a", "b"]], 2) == 0.0


def test_clipping():
    assert bleu_n([["the"] * 4], [["the", "cat", "the", "dog"]], 1) == pytest.approx(0.5)
    # clipped by the count in a single reference, not the sum over references
    assert bleu_n([["the"] * 4], [["the", "cat"], ["the", "dog"]], 1) == pytest.approx(0.25)


def test_matches_independent_oracle_on_random_toy_sentences():
    sents = toy.sample_corpus(50, seed=11)
    cands, refs = sents[:25], sents[25:]
    for n in range(1, 6):
        assert abs(bleu_n(cands, refs, n) - oracle_bleu(cands, refs, n)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_oracle_equivalence_property(seed, n):
    rng = random.Random(seed)
    cands = toy.sample_corpus(rng.randint(1, 12), seed=seed)
    refs = toy.sample_corpus(rng.randint(1, 12), seed=seed + 1)
    assert abs(bleu_n(cands, refs, n) - oracle_bleu(cands, refs, n)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_order_invariance_and_range(seed):
    rng = random.Random(seed)
    cands = toy.sample_corpus(10, seed=seed)
    refs = toy.sample_corpus(10, seed=seed + 7)
    base = bleu_n(cands, refs, 3)
    assert 0.0 <= base <= 1.0
    rng.shuffle(cands)
    rng.shuffle(refs)
    assert bleu_n(cands, refs, 3) == pytest.approx(base, abs=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        bleu_n([["a"]], [], 1)
    with pytest.raises(ValueError):
        bleu_n([], [["a"]], 1)
    with pytest.raises(ValueError):
        bleu_n([["a"]], [["a"]], 6)
    with pytest.raises(ValueError):
        self_bleu([["a"]], 1)


def test_ngram_profile_totals():
    toks = "a b a b c".split()
    prof = ngram_profile(toks)
    for n, counts in prof.items():
        assert sum(counts.values()) == max(0, len(toks) - n + 1)
    assert ngram_counts(toks, 2)[("a", "b")] == 2


HANDCRAFTED = [
    "the cat sat on the mat",
    "the dog sat on the log",
    "a cat and a dog",
    "the mat was red",
    "on the mat the cat sat",
]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_self_bleu_unrolls_to_mean_of_direct_calls(n):
    sents = [s.split() for s in HANDCRAFTED]
    direct = [bleu_n([h], sents[:i] + sents[i + 1:], n) for i, h in enumerate(sents)]
    assert abs(self_bleu(sents, n) - sum(direct) / len(direct)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 20), st.integers(1, 5))
def test_self_bleu_matches_direct_definition_on_toy_samples(seed, size, n):
    sents = toy.sample_corpus(size, seed=seed)
    direct = [bleu_n([h], sents[:i] + sents[i + 1:], n) for i, h in enumerate(sents)]
    assert abs(self_bleu(sents, n) - sum(direct) / len(direct)) < 1e-9


def test_self_bleu_extremes():
    same = [["a", "b", "c"]] * 4
    assert self_bleu(same, 3) == pytest.approx(1.0)
    assert self_bleu(same + [["x", "y", "z"]], 3) < 1.0
    assert self_bleu([["a", "b"], ["c", "d"], ["e", "f"]], 1) == 0.0


def test_self_bleu_reference_cap_is_deterministic():
    sents = toy.sample_corpus(40, seed=2)
    capped = self_bleu(sents, 2, max_refs=5, seed=1)
    assert capped == self_bleu(sents, 2, max_refs=5, seed=1)
    assert 0 <= capped <= 1
    assert self_bleu(sents, 2, max_refs=100) == pytest.approx(self_bleu(sents, 2), abs=1e-12)


def test_report_round_trip():
    r = MetricsReport(bleu={2: 0.5, 3: 0.25}, self_bleu={2: 0.9}, forward_ppl=3.2, reverse_ppl=4.5,
                      metadata={"kind": "soft_gan", "n_candidates": 640})
    back = MetricsReport.from_json(r.to_json())
    assert back == r
