"""Critics, generators, noise, interpolation, and the WGAN-GP gradient penalty."""
from __future__ import annotations

from typing import Callable, Sequence, Union

import torch
from torch import nn
from torch.nn import functional as F

from .errors import NumericError

Batch = Union[torch.Tensor, Sequence[torch.Tensor]]


def sample_noise(n: int, dim: int, normalize: bool = False, seed=None, generator=None,
                 dtype=torch.float32) -> torch.Tensor:
    if n <= 0 or dim <= 0:
        raise ValueError("n and dim must be positive")
    if generator is None:
        generator = torch.Generator().manual_seed(0 if seed is None else seed)
    z = torch.randn(n, dim, generator=generator, dtype=dtype)
    if normalize:
        z = z / z.norm(dim=1, keepdim=True)
    return z


class ResBlock1d(nn.Module):
    def __init__(self, dim: int, kernel: int = 5, scale: float = 0.3):
        super().__init__()
        self.conv1 = nn.Conv1d(dim, dim, kernel, padding=kernel // 2)
        self.conv2 = nn.Conv1d(dim, dim, kernel, padding=kernel // 2)
        self.scale = scale

    def forward(self, x):
        h = self.conv1(F.relu(x))
        h = self.conv2(F.relu(h))
        return x + self.scale * h


class ResBlockFC(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, dim)
        self.fc2 = nn.Linear(dim, dim)

    def forward(self, x):
        return x + self.fc2(F.relu(self.fc1(F.relu(x))))


class TextTrunk(nn.Module):
    """Conv1d residual stack over [batch, time, vocab] rows; returns flattened features."""

    def __init__(self, vocab_size: int, max_len: int, dim: int = 512, n_blocks: int = 5, kernel: int = 5):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.inp = nn.Conv1d(vocab_size, dim, 1)
        self.blocks = nn.Sequential(*[ResBlock1d(dim, kernel) for _ in range(n_blocks)])
        self.out_features = dim * max_len

    def forward(self, s):
        if s.dim() != 3 or s.shape[1:] != (self.max_len, self.vocab_size):
            raise ValueError(f"text batch must be [batch, {self.max_len}, {self.vocab_size}], got {tuple(s.shape)}")
        h = self.blocks(self.inp(s.transpose(1, 2)))
        return h.flatten(1)


class TextCritic(nn.Module):
    def __init__(self, vocab_size: int, max_len: int, dim: int = 512, n_blocks: int = 5, kernel: int = 5):
        super().__init__()
        self.trunk = TextTrunk(vocab_size, max_len, dim, n_blocks, kernel)
        self.head = nn.Linear(self.trunk.out_features, 1)

    def forward(self, s):
        return self.head(self.trunk(s)).squeeze(1)


class CodeCritic(nn.Module):
    def __init__(self, code_dim: int, hidden: int = 512):
        super().__init__()
        self.code_dim = code_dim
        self.net = nn.Sequential(
            nn.Linear(code_dim, hidden), nn.LeakyReLU(0.2),
            nn.Linear(hidden, hidden), nn.LeakyReLU(0.2),
            nn.Linear(hidden, 1),
        )

    def forward(self, v):
        if v.dim() != 2 or v.shape[1] != self.code_dim:
            raise ValueError(f"code batch must be [batch, {self.code_dim}], got {tuple(v.shape)}")
        return self.net(v).squeeze(1)


class JointCritic(nn.Module):
    """Scores (text, code) pairs: text-trunk features concatenated with the code, then an MLP head."""

    def __init__(self, vocab_size: int, max_len: int, code_dim: int, dim: int = 512, n_blocks: int = 5,
                 kernel: int = 5, hidden: int = 512):
        super().__init__()
        self.trunk = TextTrunk(vocab_size, max_len, dim, n_blocks, kernel)
        self.code_dim = code_dim
        self.head = nn.Sequential(
            nn.Linear(self.trunk.out_features + code_dim, hidden), nn.LeakyReLU(0.2),
            nn.Linear(hidden, 1),
        )

    def forward(self, s, v):
        if s.shape[0] != v.shape[0]:
            raise ValueError(f"batch mismatch: text {s.shape[0]} vs code {v.shape[0]}")
        if v.dim() != 2 or v.shape[1] != self.code_dim:
            raise ValueError(f"code batch must be [batch, {self.code_dim}], got {tuple(v.shape)}")
        return self.head(torch.cat([self.trunk(s), v], dim=1)).squeeze(1)


class CodeGenerator(nn.Module):
    """Noise to synthetic code through residual FC blocks; tanh keeps entries in (-1, 1)."""

    def __init__(self, noise_dim: int, code_dim: int, hidden: int = 512, n_blocks: int = 2):
        super().__init__()
        self.noise_dim = noise_dim
        self.inp = nn.Linear(noise_dim, hidden)
        self.blocks = nn.Sequential(*[ResBlockFC(hidden) for _ in range(n_blocks)])
        self.out = nn.Linear(hidden, code_dim)

    def forward(self, z):
        if z.shape[-1] != self.noise_dim:
            raise ValueError(f"noise must have {self.noise_dim} columns, got {z.shape[-1]}")
        return torch.tanh(self.out(F.relu(self.blocks(self.inp(z)))))


class ConvTextGenerator(nn.Module):
    """Convolutional generator emitting softmax rows directly from noise (the IWGAN baseline)."""

    def __init__(self, noise_dim: int, vocab_size: int, max_len: int, dim: int = 512, n_blocks: int = 5,
                 kernel: int = 5):
        super().__init__()
        self.noise_dim = noise_dim
        self.dim = dim
        self.max_len = max_len
        self.inp = nn.Linear(noise_dim, dim * max_len)
        self.blocks = nn.Sequential(*[ResBlock1d(dim, kernel) for _ in range(n_blocks)])
        self.out = nn.Conv1d(dim, vocab_size, 1)

    def forward(self, z):
        if z.shape[-1] != self.noise_dim:
            raise ValueError(f"noise must have {self.noise_dim} columns, got {z.shape[-1]}")
        h = self.inp(z).view(-1, self.dim, self.max_len)
        logits = self.out(self.blocks(h)).transpose(1, 2)
        return F.softmax(logits, dim=2)


def _as_tuple(batch: Batch):
    return (batch,) if isinstance(batch, torch.Tensor) else tuple(batch)


def sample_alpha(n: int, generator=None, dtype=torch.float32):
    return torch.rand(n, generator=generator, dtype=dtype)


def interpolate(real: Batch, fake: Batch, alpha=None, generator=None):
    """Per-example ``alpha * real + (1 - alpha) * fake``; tuples share one alpha per example."""
    real, fake = _as_tuple(real), _as_tuple(fake)
    if len(real) != len(fake) or any(r.shape != f.shape for r, f in zip(real, fake)):
        raise ValueError("real and fake batches must have identical shapes")
    n = real[0].shape[0]
    if alpha is None:
        alpha = sample_alpha(n, generator, real[0].dtype)
    alpha = torch.as_tensor(alpha, dtype=real[0].dtype)
    if alpha.dim() == 0:
        alpha = alpha.expand(n)
    out = []
    for r, f in zip(real, fake):
        a = alpha.view(-1, *([1] * (r.dim() - 1)))
        out.append(a * r + (1 - a) * f)
    return out[0] if len(out) == 1 else tuple(out)


def gradient_penalty(critic: Callable, real: Batch, fake: Batch, lam: float, alpha=None,
                     generator=None) -> torch.Tensor:
    """``lam * mean((||grad critic(mix)||_2 - 1)^2)`` over interpolates; differentiable in the critic."""
    if lam < 0:
        raise ValueError("gradient penalty coefficient must be non-negative")
    mixed = _as_tuple(interpolate(real, fake, alpha, generator))
    # stays attached to whatever produced real/fake, so the penalty also trains those producers
    mixed = tuple(m if m.requires_grad else m.requires_grad_(True) for m in mixed)
    scores = critic(*mixed)
    if scores.requires_grad:
        grads = torch.autograd.grad(scores.sum(), mixed, create_graph=True, allow_unused=True)
    else:  # a critic that ignores its input has zero gradient
        grads = (None,) * len(mixed)
    sq = 0
    for m, g in zip(mixed, grads):
        if g is not None:
            sq = sq + g.flatten(1).pow(2).sum(dim=1)
    if isinstance(sq, int):
        sq = mixed[0].new_zeros(mixed[0].shape[0])
    if not torch.isfinite(sq).all():
        raise NumericError("non-finite critic gradient in gradient penalty")
    # gradient of sqrt at 0 is infinite; the clamp only matters for exactly-flat critics
    norm = sq.clamp_min(1e-30).sqrt()
    return lam * ((norm - 1) ** 2).mean()
