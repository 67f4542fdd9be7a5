"""Versioned, bit-exact checkpoints of a full training state."""
from __future__ import annotations

import os
from pathlib import Path

import torch

from .config import TrainingConfig
from .data import BatchSampler, Vocabulary
from .errors import CheckpointError

FORMAT = "latextgan-checkpoint"
VERSION = 1


def state_to_dict(state) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": state.config.to_dict(),
        "vocab": list(state.vocab.id_to_token),
        "vocab_hash": state.vocab.fingerprint(),
        "iteration": state.iteration,
        "best_bleu": state.best_bleu,
        "modules": {n: m.state_dict() for n, m in state.modules.items()},
        "optimizers": {n: o.state_dict() for n, o in state.optimizers.items()},
        "rng": state.rng.get_state(),
        "sampler": state.sampler.state_dict() if state.sampler is not None else None,
    }


def save_checkpoint(state, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    torch.save(state_to_dict(state), tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path, corpus=None):
    """Rebuild a ``ModelState``; pass the training corpus to restore the batch sampler too."""
    from .training import init_state

    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a checkpoint of this package")
    if blob.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {blob.get('version')}")
    vocab = Vocabulary(blob["vocab"])
    if vocab.fingerprint() != blob["vocab_hash"]:
        raise CheckpointError("vocabulary hash mismatch")
    if corpus is not None and corpus.vocab != vocab:
        raise CheckpointError("corpus vocabulary differs from the checkpoint vocabulary")
    config = TrainingConfig.from_dict(blob["config"])
    state = init_state(config, vocab)
    try:
        for name, sd in blob["modules"].items():
            state.modules[name].load_state_dict(sd)
        for name, sd in blob["optimizers"].items():
            state.optimizers[name].load_state_dict(sd)
    except (KeyError, RuntimeError) as exc:
        raise CheckpointError(f"checkpoint does not match its config: {exc}") from exc
    state.rng.set_state(blob["rng"])
    state.iteration = blob["iteration"]
    state.best_bleu = blob["best_bleu"]
    if corpus is not None:
        state.sampler = BatchSampler(corpus, config.batch_size, config.seed + 2)
        if blob["sampler"] is not None:
            state.sampler.load_state_dict(blob["sampler"])
    return state
