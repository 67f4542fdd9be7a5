"""Alternating autoencoder / critic / generator schedules for the seven model kinds."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from . import losses
from .autoencoder import Decoder, Encoder, noise_std, reconstruction_loss
from .config import ModelKind, TrainingConfig
from .data import BatchSampler, TokenizedCorpus, Vocabulary, decode_ids
from .errors import ConfigError, NumericError
from .gan import (CodeCritic, CodeGenerator, ConvTextGenerator, JointCritic, TextCritic,
                  sample_alpha)

log = logging.getLogger(__name__)

K = ModelKind

# module name -> model kinds that own it
OWNERSHIP = {
    "encoder": {K.AAE, K.ARAE, K.SOFT_GAN, K.LATEXT_I, K.LATEXT_II, K.LATEXT_III},
    "decoder": {K.AAE, K.ARAE, K.SOFT_GAN, K.LATEXT_I, K.LATEXT_II, K.LATEXT_III},
    "generator": {K.ARAE, K.LATEXT_II, K.LATEXT_III},
    "text_generator": {K.IWGAN},
    "critic_t": {K.IWGAN, K.SOFT_GAN, K.LATEXT_I, K.LATEXT_II},
    "critic_c": {K.AAE, K.ARAE, K.LATEXT_I, K.LATEXT_II},
    "critic_tc": {K.LATEXT_III},
}

# modules updated by generator_step, per kind
GENERATOR_GROUP = {
    K.IWGAN: ("text_generator",),
    K.AAE: ("encoder",),
    K.ARAE: ("generator",),
    K.SOFT_GAN: ("decoder",),
    K.LATEXT_I: ("encoder", "decoder"),
    K.LATEXT_II: ("generator", "decoder"),
    K.LATEXT_III: ("generator", "decoder"),
}

# kinds whose decoder takes the (possibly normalized) prior sample directly as a code
Z_AS_CODE = {K.AAE, K.SOFT_GAN, K.LATEXT_I}
CODE_GENERATOR_KINDS = {K.ARAE, K.LATEXT_II, K.LATEXT_III}


def owned_modules(kind: ModelKind) -> list[str]:
    return [name for name, kinds in OWNERSHIP.items() if kind in kinds]


def _dtype(config):
    return torch.float64 if config.dtype == "float64" else torch.float32


def build_modules(config: TrainingConfig, vocab_size: int) -> dict[str, nn.Module]:
    kind, c = config.kind, config
    builders = {
        "encoder": lambda: Encoder(vocab_size, c.emb_dim, c.hidden),
        "decoder": lambda: Decoder(vocab_size, c.emb_dim, c.hidden, c.hidden, c.max_len),
        "generator": lambda: CodeGenerator(c.noise_dim, c.hidden, c.gen_hidden, c.gen_blocks),
        "text_generator": lambda: ConvTextGenerator(c.noise_dim, vocab_size, c.max_len, c.critic_dim,
                                                    c.gen_blocks, c.kernel),
        "critic_t": lambda: TextCritic(vocab_size, c.max_len, c.critic_dim, c.critic_blocks, c.kernel),
        "critic_c": lambda: CodeCritic(c.hidden, c.code_critic_hidden),
        "critic_tc": lambda: JointCritic(vocab_size, c.max_len, c.hidden, c.critic_dim, c.critic_blocks,
                                         c.kernel, c.code_critic_hidden),
    }
    return {name: builders[name]().to(_dtype(config)) for name in owned_modules(kind)}


@dataclass
class ModelState:
    config: TrainingConfig
    vocab: Vocabulary
    modules: dict[str, nn.Module]
    optimizers: dict[str, torch.optim.Optimizer]
    rng: torch.Generator
    iteration: int = 0
    sampler: Optional[BatchSampler] = None
    best_bleu: float = -1.0
    history: list = field(default_factory=list)

    @property
    def kind(self) -> ModelKind:
        return self.config.kind

    @property
    def dtype(self):
        return _dtype(self.config)

    def __getitem__(self, name) -> nn.Module:
        return self.modules[name]

    def params(self, *names):
        return [p for n in names for p in self.modules[n].parameters()]


def _optimizer_groups(kind: ModelKind) -> dict[str, tuple[str, ...]]:
    groups = {}
    if kind is not K.IWGAN:
        groups["ae"] = ("encoder", "decoder")
    for critic in ("critic_t", "critic_c", "critic_tc"):
        if kind in OWNERSHIP[critic]:
            groups[critic] = (critic,)
    if kind in (K.SOFT_GAN, K.LATEXT_I, K.LATEXT_II):
        groups["decoder_adv"] = ("decoder",)
    if kind in (K.ARAE, K.LATEXT_II):
        groups["encoder_adv"] = ("encoder",)
    if kind is K.LATEXT_III:
        groups["ae_adv"] = ("encoder", "decoder")
    groups["gen"] = GENERATOR_GROUP[kind]
    return groups


def init_state(config: TrainingConfig, vocab: Vocabulary, corpus: Optional[TokenizedCorpus] = None) -> ModelState:
    if config.kind in Z_AS_CODE and config.noise_dim != config.hidden:
        # the prior sample is compared with or decoded as a code, so it needs the code width
        config = config.replace(noise_dim=config.hidden)
    if vocab.size > config.vocab_size:
        raise ConfigError(f"vocabulary has {vocab.size} entries, config allows {config.vocab_size}")
    torch.manual_seed(config.seed)
    modules = build_modules(config, vocab.size)
    optimizers = {}
    for name, members in _optimizer_groups(config.kind).items():
        params = [p for m in members for p in modules[m].parameters()]
        if name == "ae":
            lr, betas = config.ae_lr, (config.ae_beta1, config.ae_beta2)
        else:
            lr, betas = config.gan_lr, (config.gan_beta1, config.gan_beta2)
        optimizers[name] = torch.optim.Adam(params, lr=lr, betas=betas)
    rng = torch.Generator().manual_seed(config.seed + 1)
    sampler = BatchSampler(corpus, config.batch_size, config.seed + 2) if corpus is not None else None
    return ModelState(config, vocab, modules, optimizers, rng, 0, sampler)


def _apply(state: ModelState, opt_name: str, params, grads):
    for p, g in zip(params, grads):
        p.grad = None if g is None else g.detach()
    state.optimizers[opt_name].step()
    for p in params:
        p.grad = None


def _step(state, loss, updates: dict[str, list], what: str) -> float:
    """Backpropagate ``loss`` into each named optimizer's parameter list and step them."""
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite {what} loss", state.iteration)
    flat = [p for ps in updates.values() for p in ps]
    grads = torch.autograd.grad(loss, flat, allow_unused=True)
    i = 0
    for opt_name, ps in updates.items():
        _apply(state, opt_name, ps, grads[i:i + len(ps)])
        i += len(ps)
    return loss.item()


def prior_sample(state: ModelState, n: int, generator=None) -> torch.Tensor:
    cfg = state.config
    z = torch.randn(n, cfg.noise_dim, generator=generator or state.rng, dtype=state.dtype)
    if cfg.normalize_prior:
        z = z / z.norm(dim=1, keepdim=True)
    return z


def synth_code(state: ModelState, z: torch.Tensor) -> torch.Tensor:
    if state.kind in CODE_GENERATOR_KINDS:
        return state["generator"](z)
    if state.kind in Z_AS_CODE:
        return z
    raise ConfigError(f"{state.kind.value} has no code path")


def synth_text(state: ModelState, z: torch.Tensor) -> torch.Tensor:
    """Generated soft text for a noise batch, through the kind's generation path."""
    if state.kind is K.IWGAN:
        return state["text_generator"](z)
    return state["decoder"](synth_code(state, z))


def _alpha(state, n):
    return sample_alpha(n, state.rng, state.dtype)


def ae_step(state: ModelState, x: torch.Tensor) -> float:
    cfg = state.config
    sigma = noise_std(state.iteration, cfg.noise_initial, cfg.noise_decay, cfg.noise_every)
    c = state["encoder"](x, sigma, state.rng, state.iteration)
    loss = reconstruction_loss(x, state["decoder"](c))
    return _step(state, loss, {"ae": state.params("encoder", "decoder")}, "reconstruction")


def soft_text(state: ModelState, x: torch.Tensor) -> torch.Tensor:
    """Noise-free soft-text reconstruction used as the text critic's real sample."""
    return state["decoder"](state["encoder"](x))


def critic_text_step(state: ModelState, x: torch.Tensor, final: bool = False,
                     real: Optional[torch.Tensor] = None) -> float:
    """One text-critic update; on the final repetition the decoder also takes the same loss.

    IWGAN uses the one-hot batch as the real sample; every other kind uses the soft-text
    reconstruction, which callers may pass precomputed as ``real`` for non-final repetitions
    (the autoencoder does not change between them).
    """
    cfg, b = state.config, x.shape[0]
    with_decoder = final and cfg.decoder_in_text_critic and state.kind is not K.IWGAN
    z = prior_sample(state, b)
    alpha = _alpha(state, b)
    with torch.set_grad_enabled(with_decoder):
        if state.kind is K.IWGAN:
            real = x
        elif real is None or with_decoder:
            real = soft_text(state, x)
        fake = synth_text(state, z)
    loss = losses.critic_loss(state["critic_t"], real, fake, cfg.gp_lambda, alpha)
    updates = {"critic_t": state.params("critic_t")}
    if with_decoder:
        updates["decoder_adv"] = state.params("decoder")
    return _step(state, loss, updates, "text critic")


def critic_code_step_aae(state: ModelState, x: torch.Tensor) -> float:
    cfg, b = state.config, x.shape[0]
    z = prior_sample(state, b)
    alpha = _alpha(state, b)
    with torch.no_grad():
        c = state["encoder"](x)
    loss = losses.prior_critic_loss(state["critic_c"], c, z, cfg.gp_lambda, alpha)
    return _step(state, loss, {"critic_c": state.params("critic_c")}, "code critic")


def critic_code_step_arae(state: ModelState, x: torch.Tensor, final: bool = False) -> float:
    """Code critic against generated codes; the encoder takes the same loss on the final repetition."""
    cfg, b = state.config, x.shape[0]
    z = prior_sample(state, b)
    alpha = _alpha(state, b)
    with torch.no_grad():
        c_hat = state["generator"](z)
    with torch.set_grad_enabled(final):
        c = state["encoder"](x)
    loss = losses.critic_loss(state["critic_c"], c, c_hat, cfg.gp_lambda, alpha)
    updates = {"critic_c": state.params("critic_c")}
    if final:
        updates["encoder_adv"] = state.params("encoder")
    return _step(state, loss, updates, "code critic")


def critic_joint_step(state: ModelState, x: torch.Tensor, final: bool = False) -> float:
    cfg, b = state.config, x.shape[0]
    z = prior_sample(state, b)
    alpha = _alpha(state, b)
    with torch.no_grad():
        c_hat = state["generator"](z)
    with torch.set_grad_enabled(final):
        c = state["encoder"](x)
        x_soft = state["decoder"](c)
        x_hat = state["decoder"](c_hat)
    loss = losses.critic_loss(state["critic_tc"], (x_soft, c), (x_hat, c_hat), cfg.gp_lambda, alpha)
    updates = {"critic_tc": state.params("critic_tc")}
    if final:
        updates["ae_adv"] = state.params("encoder", "decoder")
    return _step(state, loss, updates, "joint critic")


def generator_loss(state: ModelState, x: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    """The kind's generator objective for a real batch and a noise batch (no penalty terms)."""
    kind = state.kind
    if kind is K.IWGAN:
        return losses.generator_loss(state["critic_t"], x, synth_text(state, z))
    if kind is K.AAE:
        return losses.prior_matching_loss(state["critic_c"], state["encoder"](x), z)
    if kind is K.ARAE:
        return losses.generator_loss(state["critic_c"], state["encoder"](x), state["generator"](z))
    c = state["encoder"](x)
    x_soft = state["decoder"](c)
    if kind is K.SOFT_GAN:
        return losses.generator_loss(state["critic_t"], x_soft, state["decoder"](z))
    if kind is K.LATEXT_I:
        return (losses.generator_loss(state["critic_t"], x_soft, state["decoder"](z))
                + losses.prior_matching_loss(state["critic_c"], c, z))
    c_hat = state["generator"](z)
    x_hat = state["decoder"](c_hat)
    if kind is K.LATEXT_II:
        return (losses.generator_loss(state["critic_t"], x_soft, x_hat)
                + losses.generator_loss(state["critic_c"], c, c_hat))
    return losses.generator_loss(state["critic_tc"], (x_soft, c), (x_hat, c_hat))


def generator_step(state: ModelState, x: torch.Tensor) -> float:
    z = prior_sample(state, x.shape[0])
    loss = generator_loss(state, x, z)
    return _step(state, loss, {"gen": state.params(*GENERATOR_GROUP[state.kind])}, "generator")


def train_iteration(state: ModelState, x: torch.Tensor) -> dict[str, float]:
    """AE step, then the kind's critic steps (k each), then one generator step."""
    kind, k = state.kind, state.config.k
    out = {}
    if kind is not K.IWGAN:
        out["ae"] = ae_step(state, x)
    if kind in OWNERSHIP["critic_t"]:
        cached = None
        if kind is not K.IWGAN and k > 1:
            with torch.no_grad():
                cached = soft_text(state, x)
        for r in range(k):
            out["critic_t"] = critic_text_step(state, x, final=r == k - 1, real=cached)
    if kind in (K.AAE, K.LATEXT_I):
        for _ in range(k):
            out["critic_c"] = critic_code_step_aae(state, x)
    elif kind in (K.ARAE, K.LATEXT_II):
        for r in range(k):
            out["critic_c"] = critic_code_step_arae(state, x, final=r == k - 1)
    elif kind is K.LATEXT_III:
        for r in range(k):
            out["critic_tc"] = critic_joint_step(state, x, final=r == k - 1)
    out["gen"] = generator_step(state, x)
    state.iteration += 1
    return out


@torch.no_grad()
def generate_ids(state: ModelState, n: int, seed: int = 0, batch_size: int = 64) -> torch.Tensor:
    g = torch.Generator().manual_seed(seed)
    chunks = []
    for start in range(0, n, batch_size):
        z = prior_sample(state, min(batch_size, n - start), generator=g)
        if state.kind is K.IWGAN:
            chunks.append(state["text_generator"](z).argmax(dim=2))
        else:
            chunks.append(state["decoder"].greedy(synth_code(state, z)))
    return torch.cat(chunks)


def generate_sentences(state: ModelState, n: int, seed: int = 0) -> list[str]:
    return [decode_ids(state.vocab, row.tolist()) for row in generate_ids(state, n, seed)]


def train(config: TrainingConfig, corpus: TokenizedCorpus, references: Optional[list[list[str]]] = None,
          out_dir=None, state: Optional[ModelState] = None, iterations: Optional[int] = None) -> ModelState:
    """Run (or resume) training up to ``config.iterations`` total iterations.

    With ``out_dir`` set, writes ``metrics.jsonl``, sample dumps, periodic and best-BLEU
    checkpoints, and ``last.pt``. A non-finite loss writes ``abort.pt`` and re-raises.
    """
    from .checkpoint import save_checkpoint
    from .metrics import bleu_n

    resuming = state is not None
    if state is None:
        state = init_state(config, corpus.vocab, corpus)
    elif state.sampler is None:
        state.sampler = BatchSampler(corpus, state.config.batch_size, state.config.seed + 2)
    total = config.iterations if iterations is None else iterations
    if state.config.iterations != total:
        state.config = state.config.replace(iterations=total)
    cfg = state.config
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "samples").mkdir(exist_ok=True)
    if references is None:
        references = [[state.vocab.id_to_token[i] for i in s[:-1]] for s in corpus.sentences]
    # a fresh run starts a fresh log, so reruns into the same directory are reproducible
    logf = open(out / "metrics.jsonl", "a" if resuming else "w", encoding="utf-8") if out is not None else None
    try:
        while state.iteration < total:
            x = state.sampler.sample(state.dtype)
            try:
                step_losses = train_iteration(state, x)
            except NumericError:
                if out is not None:
                    save_checkpoint(state, out / "abort.pt")
                raise
            it = state.iteration
            record = {"iteration": it, "losses": step_losses}
            if cfg.eval_every and it % cfg.eval_every == 0:
                samples = generate_sentences(state, cfg.eval_samples, seed=cfg.seed)
                bleu4 = bleu_n([s.split() for s in samples], references, 4)
                record["bleu4"] = bleu4
                if out is not None:
                    (out / "samples" / f"iter{it:07d}.txt").write_text(
                        "".join(s + "\n" for s in samples), encoding="utf-8")
                if bleu4 > state.best_bleu:
                    state.best_bleu = bleu4
                    if out is not None:
                        save_checkpoint(state, out / "best.pt")
            if out is not None and cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
                save_checkpoint(state, out / f"ckpt_{it:07d}.pt")
            if (cfg.log_every and it % cfg.log_every == 0) or "bleu4" in record or it == total:
                state.history.append(record)
                if logf is not None:
                    logf.write(json.dumps(record) + "\n")
                    logf.flush()
                log.info("iter %d %s", it, " ".join(f"{k}={v:.4f}" for k, v in step_losses.items()))
        if out is not None:
            save_checkpoint(state, out / "last.pt")
    finally:
        if logf is not None:
            logf.close()
    return state


def all_finite(values) -> bool:
    return all(math.isfinite(v) for v in values)
