"""Critic and generator objectives as pure functions of explicit samples.

Every function takes already-computed real/fake samples and, for critic losses, the
interpolation weights, so the values can be recomputed independently in tests.
Inputs may be single tensors or tuples (the joint critic takes ``(text, code)``).
"""
from __future__ import annotations

import torch

from .gan import _as_tuple, gradient_penalty


def mean_score(critic, batch) -> torch.Tensor:
    return critic(*_as_tuple(batch)).mean()


def critic_loss(critic, real, fake, lam: float, alpha=None, generator=None) -> torch.Tensor:
    """Standard WGAN-GP critic loss, ``-E[f(real)] + E[f(fake)] + GP``.

    Used for the text critic (soft-text vs. synthetic text), the ARAE code critic
    (code vs. synthetic code) and the joint critic (paired text and code).
    """
    gp = gradient_penalty(critic, real, fake, lam, alpha, generator)
    return -mean_score(critic, real) + mean_score(critic, fake) + gp


def generator_loss(critic, real, fake) -> torch.Tensor:
    return -mean_score(critic, fake) + mean_score(critic, real)


def prior_critic_loss(critic, code, prior, lam: float, alpha=None, generator=None) -> torch.Tensor:
    """Adversarial-autoencoder code critic: the prior sample plays the real role.

    Interpolates are ``alpha * code + (1 - alpha) * prior``.
    """
    gp = gradient_penalty(critic, code, prior, lam, alpha, generator)
    return mean_score(critic, code) - mean_score(critic, prior) + gp


def prior_matching_loss(critic, code, prior) -> torch.Tensor:
    """Encoder-side objective pushing codes toward the prior: ``E[f(prior)] - E[f(code)]``."""
    return mean_score(critic, prior) - mean_score(critic, code)
