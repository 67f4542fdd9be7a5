"""Command line: prepare, train, generate, evaluate, demo-two-word."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from .errors import CheckpointError, ConfigError, CorpusError, NumericError

OUTPUT_ROOT_ENV = "LATEXTGAN_OUTPUT_ROOT"

log = logging.getLogger("latextgan")


def _out_path(p) -> Path:
    p = Path(p)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return p if p.is_absolute() or not root else Path(root) / p


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_lines(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _read_lines(path) -> list[str]:
    """Sample files keep empty lines (a sentence that was just ``<eos>``)."""
    return Path(path).read_text(encoding="utf-8").splitlines()


def cmd_prepare(args) -> int:
    from .data import build_vocab, load_corpus, tokenize_corpus

    if args.vocab_size < 5:
        raise ConfigError(f"vocab size must be >= 5, got {args.vocab_size}")
    sents = load_corpus(args.corpus, lowercase=not args.no_lowercase)
    vocab = build_vocab(sents, args.vocab_size)
    corpus = tokenize_corpus(vocab, sents, args.max_len)
    out = _out_path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "vocab.txt")
    _write_lines(out / "data.ids", (" ".join(map(str, s)) for s in corpus.sentences))
    n_unk = sum(s.count(3) for s in corpus.sentences)
    n_tok = sum(len(s) for s in corpus.sentences)
    stats = {
        "corpus": str(args.corpus),
        "corpus_sha256": file_sha256(args.corpus),
        "sentences": len(corpus),
        "vocab_size": vocab.size,
        "max_len": args.max_len,
        "tokens": n_tok,
        "unk_rate": n_unk / max(n_tok, 1),
        "truncated": sum(len(s) >= args.max_len for s in sents),
    }
    (out / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"prepared {len(corpus)} sentences, vocabulary {vocab.size} -> {out}")
    return 0


def _load_training_inputs(config):
    from .data import Vocabulary, build_vocab, load_corpus, tokenize_corpus

    if not config.train_path:
        raise ConfigError("config must set train_path")
    sents = load_corpus(config.train_path, config.lowercase)
    if config.vocab_path:
        vocab = Vocabulary.load(config.vocab_path)
    else:
        vocab = build_vocab(sents, config.vocab_size)
    corpus = tokenize_corpus(vocab, sents, config.max_len)
    refs = load_corpus(config.test_path, config.lowercase) if config.test_path else None
    return corpus, refs


def cmd_train(args) -> int:
    from .checkpoint import load_checkpoint
    from .config import TrainingConfig, parse_overrides, read_config_file
    from .training import train

    values = read_config_file(args.config) if args.config else {}
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in ("kind", "iterations", "seed", "train_path", "test_path"):
        if getattr(args, key, None) is not None:
            overrides[key] = str(getattr(args, key))
    values.update(parse_overrides(overrides))
    config = TrainingConfig(**values)
    out = _out_path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus, refs = _load_training_inputs(config)
    state = None
    if args.resume:
        state = load_checkpoint(args.resume, corpus)
    state = train(config, corpus, refs, out_dir=out, state=state)

    from .config import write_config_file

    corpus.vocab.save(out / "vocab.txt")
    write_config_file(state.config, out / "config.txt")
    checkpoints = sorted(str(p) for p in out.glob("*.pt"))
    manifest = {
        "config": state.config.to_dict(),
        "seed": state.config.seed,
        "corpus_sha256": {k: file_sha256(p) for k, p in
                          (("train", config.train_path), ("test", config.test_path)) if p},
        "vocab_sha256": state.vocab.fingerprint(),
        "checkpoints": checkpoints,
        "metric_log": str(out / "metrics.jsonl"),
        "samples": sorted(str(p) for p in (out / "samples").glob("*.txt")),
        "config_file": str(out / "config.txt"),
        "vocab_file": str(out / "vocab.txt"),
        "iterations_completed": state.iteration,
        "best_bleu4": state.best_bleu,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    missing = [p for p in checkpoints + [manifest["metric_log"]] if not Path(p).is_file()]
    if missing:
        print(f"missing outputs: {missing}", file=sys.stderr)
        return 1
    print(f"trained {state.config.kind.value} for {state.iteration} iterations -> {out}")
    return 0


def cmd_generate(args) -> int:
    from .checkpoint import load_checkpoint
    from .training import generate_sentences

    state = load_checkpoint(args.checkpoint)
    sents = generate_sentences(state, args.n, seed=args.seed)
    out = _out_path(args.out)
    _write_lines(out, sents)
    print(f"wrote {len(sents)} sentences -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    from .data import load_corpus
    from .lm import LMConfig, forward_reverse_ppl
    from .metrics import MetricsReport, bleu_n, max_reference_counts, self_bleu

    samples = [s.split() for s in _read_lines(args.samples)]
    train_sents = load_corpus(args.real_train)
    test_sents = load_corpus(args.real_test)
    if not samples or not test_sents or not train_sents:
        raise CorpusError("samples, real-train and real-test must all be non-empty")
    orders = sorted(set(args.orders))
    ref_counts = max_reference_counts(test_sents, max(orders))
    report = MetricsReport()
    for n in orders:
        report.bleu[n] = bleu_n(samples, test_sents, n, ref_counts=ref_counts)
        report.self_bleu[n] = self_bleu(samples, n, max_refs=args.self_bleu_max_refs)
    lm_cfg = LMConfig(hidden=args.lm_hidden, emb_dim=args.lm_hidden, max_epochs=args.lm_epochs,
                      vocab_size=args.lm_vocab_size, max_len=args.max_len, seed=args.seed)
    nonempty = [s for s in samples if s]
    if nonempty:
        report.forward_ppl, report.reverse_ppl = forward_reverse_ppl(train_sents, test_sents, nonempty, lm_cfg)
    report.metadata = {
        "samples": str(args.samples),
        "n_candidates": len(samples),
        "n_references": len(test_sents),
        "n_lm_train": len(train_sents),
        "orders": orders,
        "lm": vars(lm_cfg),
    }
    if args.kind:
        report.metadata["kind"] = args.kind
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    for n in orders:
        print(f"BLEU-{n} {report.bleu[n]:.4f}  self-BLEU-{n} {report.self_bleu[n]:.4f}")
    print(f"F-PPL {report.forward_ppl}  R-PPL {report.reverse_ppl}")
    return 0


def cmd_demo_two_word(args) -> int:
    from .demo import DemoConfig, two_word_demo

    cfg = DemoConfig(critic_steps=args.steps, seeds=tuple(args.seeds))
    report = two_word_demo(cfg)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    s = report.summary
    print(f"median gap after {s['critic_steps']} critic steps: one-hot {s['median_final_gap_iwgan']:.4f} "
          f"soft-text {s['median_final_gap_soft_gan']:.4f} one-hot>soft-text={s['iwgan_gap_exceeds_soft_gan']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latextgan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prepare", help="build vocabulary and encoded dataset")
    sp.add_argument("corpus")
    sp.add_argument("--vocab-size", type=int, default=10000)
    sp.add_argument("--max-len", type=int, default=15)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--no-lowercase", action="store_true")
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("train", help="train a model from a key=value config")
    sp.add_argument("--config")
    sp.add_argument("--kind")
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--train-path", dest="train_path")
    sp.add_argument("--test-path", dest="test_path")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    sp.add_argument("--resume", metavar="CHECKPOINT")
    sp.add_argument("--out-dir", default="run")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("generate", help="sample sentences from a checkpoint")
    sp.add_argument("checkpoint")
    sp.add_argument("-n", type=int, default=640)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("evaluate", help="BLEU, self-BLEU and forward/reverse perplexity")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--real-train", required=True)
    sp.add_argument("--real-test", required=True)
    sp.add_argument("--orders", type=int, nargs="+", default=[2, 3, 4, 5])
    sp.add_argument("--self-bleu-max-refs", type=int)
    sp.add_argument("--lm-hidden", type=int, default=512)
    sp.add_argument("--lm-epochs", type=int, default=20)
    sp.add_argument("--lm-vocab-size", type=int, default=10000)
    sp.add_argument("--max-len", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--kind")
    sp.add_argument("--out", default="report.json")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("demo-two-word", help="critic separability on a two-word language")
    sp.add_argument("--out", default="two_word_demo.json")
    sp.add_argument("--steps", type=int, default=500)
    sp.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    sp.set_defaults(func=cmd_demo_two_word)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, CorpusError, CheckpointError, NumericError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
