import collections

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from latextgan import data
from latextgan.data import EOS_ID, PAD_ID, SOS_ID, UNK_ID
from latextgan.errors import ConfigError, CorpusError


def test_load_corpus_single_line(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("a dog runs\n", encoding="utf-8")
    assert data.load_corpus(p) == [["a", "dog", "runs"]]


def test_load_corpus_empty(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("", encoding="utf-8")
    assert data.load_corpus(p) == []


def test_load_corpus_skips_blank_lines_like_a_line_counter(tmp_path):
    text = "the cat\n\n  \na dog sleeps\n"
    p = tmp_path / "c.txt"
    p.write_text(text, encoding="utf-8")
    nonblank = sum(1 for line in text.split("\n") if line.strip())
    assert len(data.load_corpus(p)) == nonblank == 2


def test_load_corpus_lowercases_by_default(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("The Dog\n", encoding="utf-8")
    assert data.load_corpus(p) == [["the", "dog"]]
    assert data.load_corpus(p, lowercase=False) == [["The", "Dog"]]


def test_load_corpus_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        data.load_corpus(tmp_path / "missing.txt")
    p = tmp_path / "bad.txt"
    p.write_bytes(b"fine line\n\xff\xfe broken\n")
    with pytest.raises(CorpusError, match="line 2"):
        data.load_corpus(p)


def test_build_vocab_basic():
    v = data.build_vocab([["a", "a", "b"]], 6)
    assert v.id_to_token == ["<pad>", "<sos>", "<eos>", "<unk>", "a", "b"]
    assert v.size == 6


def test_build_vocab_tie_breaks_lexicographically():
    v = data.build_vocab([["y", "x"]], 5)
    assert "x" in v and "y" not in v


def test_build_vocab_too_small():
    with pytest.raises(ConfigError):
        data.build_vocab([["a"]], 4)


def test_build_vocab_exact_size_on_large_corpus():
    rng = np.random.default_rng(0)
    sents = [[f"w{int(i)}" for i in rng.zipf(1.3, size=12) if i < 50000] for _ in range(10000)]
    distinct = len({t for s in sents for t in s})
    assert distinct > 4996
    v = data.build_vocab(sents, 5000)
    assert v.size == 5000
    # most frequent tokens win: compare against an independent frequency count
    freq = collections.defaultdict(int)
    for s in sents:
        for t in s:
            freq[t] += 1
    kept = set(v.id_to_token[4:])
    threshold = min(freq[t] for t in kept)
    assert all(freq[t] <= threshold for t in freq if t not in kept)


def test_vocab_roundtrip_and_specials(toy_vocab, tmp_path):
    assert toy_vocab.id_to_token[:4] == ["<pad>", "<sos>", "<eos>", "<unk>"]
    for i in range(toy_vocab.size):
        assert toy_vocab.token_to_id[toy_vocab.id_to_token[i]] == i
    toy_vocab.save(tmp_path / "v.txt")
    lines = (tmp_path / "v.txt").read_text(encoding="utf-8").splitlines()
    assert lines == toy_vocab.id_to_token
    assert data.Vocabulary.load(tmp_path / "v.txt") == toy_vocab


def test_encode_batch_pads_after_eos(toy_vocab):
    x = data.encode_batch(toy_vocab, [["a"]], 3)
    ids = x.argmax(-1).tolist()
    assert ids == [[toy_vocab.token_to_id["a"], EOS_ID, PAD_ID]]


def test_encode_batch_truncation_keeps_eos(toy_vocab):
    sent = ["the", "big", "dog", "sees"]
    ids = data.encode_batch(toy_vocab, [sent], 4).argmax(-1)[0].tolist()
    assert ids[:3] == [toy_vocab.token_to_id[t] for t in sent[:3]]
    assert ids[3] == EOS_ID


def test_encode_batch_unknowns(toy_vocab):
    ids = data.encode_batch(toy_vocab, [["zebra"]], 3).argmax(-1)[0].tolist()
    assert ids[0] == UNK_ID


def test_encode_batch_empty():
    v = data.build_vocab([["a"]], 5)
    with pytest.raises(CorpusError):
        data.encode_batch(v, [], 3)


def test_random_batch_rows_are_exact_one_hots(toy_vocab, toy_sentences):
    x = data.encode_batch(toy_vocab, toy_sentences[:64], 8)
    for row in x.reshape(-1, x.shape[-1]).tolist():
        assert sorted(row)[-1] == 1.0 and sum(row) == 1.0 and row.count(0.0) == len(row) - 1


def test_decode_ids(toy_vocab):
    a = toy_vocab.token_to_id["a"]
    assert data.decode_ids(toy_vocab, [a, EOS_ID, PAD_ID]) == "a"
    assert data.decode_ids(toy_vocab, [PAD_ID] * 4) == ""
    assert data.decode_ids(toy_vocab, [SOS_ID, a, PAD_ID, a]) == "a a"
    with pytest.raises(IndexError):
        data.decode_ids(toy_vocab, [toy_vocab.size])


def test_encode_argmax_decode_roundtrip(toy_vocab):
    rng = np.random.default_rng(1)
    words = toy_vocab.id_to_token[4:]
    sents = [[words[i] for i in rng.integers(0, len(words), rng.integers(1, 8))] for _ in range(100)]
    x = data.encode_batch(toy_vocab, sents, 8)
    for s, row in zip(sents, x.argmax(-1)):
        assert data.decode_ids(toy_vocab, row.tolist()) == " ".join(s)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from(["a", "b", "c", "zz"]), min_size=0, max_size=12), min_size=1, max_size=8),
       st.integers(1, 10))
def test_one_hot_invariants(sents, max_len):
    v = data.build_vocab([["a", "b", "c"]], 10)
    x = data.encode_batch(v, sents, max_len)
    assert x.shape == (len(sents), max_len, v.size)
    assert torch.all(x.sum(-1) == 1) and torch.all(x.max(-1).values == 1)
    ids = x.argmax(-1)
    for row in ids.tolist():
        e = row.index(EOS_ID)
        assert all(t == PAD_ID for t in row[e + 1:])
    corpus = data.tokenize_corpus(v, sents, max_len)
    assert all(len(s) <= max_len and s[-1] == EOS_ID for s in corpus.sentences)


def test_batch_iterator_determinism_and_shape(toy_corpus):
    a = data.batch_iterator(toy_corpus, 64, seed=5)
    b = data.batch_iterator(toy_corpus, 64, seed=5)
    for _ in range(3):
        xa, xb = next(a), next(b)
        assert xa.shape == (64, 8, 20)
        assert torch.equal(xa, xb)


def test_batch_iterator_errors(toy_vocab):
    empty = data.TokenizedCorpus([], 8, toy_vocab)
    with pytest.raises(CorpusError):
        next(data.batch_iterator(empty, 1, 0))
    small = data.tokenize_corpus(toy_vocab, [["a"]], 8)
    with pytest.raises(ConfigError):
        next(data.batch_iterator(small, 2, 0))


def test_batch_sampling_is_uniform(toy_vocab):
    sents = [[w] for w in toy_vocab.id_to_token[4:14]]
    corpus = data.tokenize_corpus(toy_vocab, sents, 2)
    sampler = data.BatchSampler(corpus, 10, seed=0)
    counts = np.zeros(10)
    for _ in range(1000):
        counts += np.bincount(sampler.sample_indices(), minlength=10)
    n = counts.sum()
    assert n == 10000
    sigma = np.sqrt(n * 0.1 * 0.9)
    assert np.all(np.abs(counts - n / 10) < 3 * sigma)
    chi2 = ((counts - n / 10) ** 2 / (n / 10)).sum()
    assert chi2 < 27.88  # chi-square, 9 dof, p = 0.001


def test_sampler_state_roundtrip(toy_corpus):
    s1 = data.BatchSampler(toy_corpus, 8, seed=1)
    s1.sample()
    state = s1.state_dict()
    expected = s1.sample()
    s2 = data.BatchSampler(toy_corpus, 8, seed=99)
    s2.load_state_dict(state)
    assert torch.equal(s2.sample(), expected)
