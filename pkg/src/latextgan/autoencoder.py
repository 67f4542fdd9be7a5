"""Recurrent sequence autoencoder whose decoder doubles as the text generator."""
from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .data import EOS_ID, SOS_ID
from .errors import NumericError


def _check_finite(t: torch.Tensor, what: str, iteration=None):
    if not torch.isfinite(t).all():
        raise NumericError(f"non-finite values in {what}", iteration)


def _init_forget_bias(module: nn.Module, value: float = 1.0):
    # gate order is input, forget, cell, output
    for name, p in module.named_parameters():
        if name.startswith("bias"):
            n = p.shape[0] // 4
            with torch.no_grad():
                p[n:2 * n] = value


class Encoder(nn.Module):
    """LSTM over one-hot (or soft) rows; the code is the last hidden state, unit-normalized."""

    def __init__(self, vocab_size: int, emb_dim: int, hidden: int):
        super().__init__()
        self.embed = nn.Linear(vocab_size, emb_dim, bias=False)
        self.lstm = nn.LSTM(emb_dim, hidden, batch_first=True)
        _init_forget_bias(self.lstm)

    def forward(self, x, noise_std: float = 0.0, generator=None, iteration=None):
        out, _ = self.lstm(self.embed(x))
        h = out[:, -1]
        _check_finite(h, "encoder state", iteration)
        c = h / h.norm(dim=1, keepdim=True).clamp_min(1e-12)
        if noise_std > 0:
            c = c + noise_std * torch.randn(c.shape, generator=generator, dtype=c.dtype, device=c.device)
        return c


class Decoder(nn.Module):
    """LSTM cell fed its own previous output distribution, with the code appended at every step."""

    def __init__(self, vocab_size: int, emb_dim: int, hidden: int, code_dim: int, max_len: int):
        super().__init__()
        self.vocab_size = vocab_size
        self.code_dim = code_dim
        self.max_len = max_len
        self.embed = nn.Linear(vocab_size, emb_dim, bias=False)
        self.cell = nn.LSTMCell(emb_dim + code_dim, hidden)
        self.out = nn.Linear(hidden, vocab_size)
        _init_forget_bias(self.cell)

    def _run(self, c, hard: bool):
        if c.dim() != 2 or c.shape[1] != self.code_dim:
            raise ValueError(f"code must be [batch, {self.code_dim}], got {tuple(c.shape)}")
        b = c.shape[0]
        h = c.new_zeros(b, self.cell.hidden_size)
        s = c.new_zeros(b, self.cell.hidden_size)
        inp = c.new_zeros(b, self.vocab_size)
        inp[:, SOS_ID] = 1.0
        probs, ids = [], []
        for _ in range(self.max_len):
            h, s = self.cell(torch.cat([self.embed(inp), c], dim=1), (h, s))
            p = F.softmax(self.out(h), dim=1)
            probs.append(p)
            if hard:
                # torch.argmax returns the first maximal index, so ties go to the lowest id
                step_ids = p.argmax(dim=1)
                ids.append(step_ids)
                inp = F.one_hot(step_ids, self.vocab_size).to(c.dtype)
            else:
                inp = p
        return torch.stack(probs, dim=1), (torch.stack(ids, dim=1) if hard else None)

    def forward(self, c):
        return self._run(c, hard=False)[0]

    @torch.no_grad()
    def greedy(self, c):
        return self._run(c, hard=True)[1]


class Autoencoder(nn.Module):
    def __init__(self, vocab_size: int, max_len: int, hidden: int = 512, emb_dim: int = 512):
        super().__init__()
        self.encoder = Encoder(vocab_size, emb_dim, hidden)
        self.decoder = Decoder(vocab_size, emb_dim, hidden, hidden, max_len)
        self.code_dim = hidden

    def forward(self, x, noise_std=0.0, generator=None):
        return self.decoder(self.encoder(x, noise_std, generator))


def encode(encoder: Encoder, x, noise_std=0.0, generator=None):
    return encoder(x, noise_std, generator)


def decode_soft(decoder: Decoder, c):
    return decoder(c)


def decode_greedy(decoder: Decoder, c):
    return decoder.greedy(c)


def reconstruction_loss(x: torch.Tensor, x_soft: torch.Tensor) -> torch.Tensor:
    """Mean squared error over every element, ``<pad>`` positions included."""
    if x.shape != x_soft.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(x_soft.shape)}")
    return ((x - x_soft) ** 2).mean()


def noise_std(iteration: int, initial: float = 0.2, decay: float = 0.995, every: int = 100) -> float:
    if iteration < 0:
        raise ValueError("iteration must be non-negative")
    return initial * decay ** (iteration // every)


def make_ae_optimizer(ae: nn.Module, lr=1e-3, betas=(0.9, 0.999)):
    return torch.optim.Adam(ae.parameters(), lr=lr, betas=betas)


def ae_train_step(ae: Autoencoder, x, opt, iteration: int, generator=None, **noise_kw) -> float:
    """One Adam step on encoder and decoder minimizing the reconstruction loss."""
    opt.zero_grad(set_to_none=True)
    c = ae.encoder(x, noise_std(iteration, **noise_kw), generator, iteration)
    loss = reconstruction_loss(x, ae.decoder(c))
    _check_finite(loss, "reconstruction loss", iteration)
    loss.backward()
    opt.step()
    opt.zero_grad(set_to_none=True)
    return loss.item()


def token_accuracy(x_ids: torch.Tensor, pred_ids: torch.Tensor) -> float:
    """Fraction of reference positions up to and including ``<eos>`` that the prediction matches."""
    seen_eos = (x_ids == EOS_ID).long().cumsum(dim=1)
    mask = (seen_eos == 0) | ((seen_eos == 1) & (x_ids == EOS_ID))
    return ((pred_ids == x_ids) & mask).sum().item() / mask.sum().item()
