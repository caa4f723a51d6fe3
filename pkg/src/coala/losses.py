"""The three training objectives and their weighted combination.

All reductions are sums (over batch and elements), so gradient scale
grows with batch size; learning rates are tuned accordingly.
"""

from dataclasses import dataclass

import numpy as np

from .engine import Tensor
from .networks import flatten_latent

EPS = 1e-7


@dataclass
class LossWeights:
    lambda_audio: float = 5.0
    lambda_tags: float = 5.0
    lambda_contrast: float = 10.0
    temperature: float = 0.1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if min(self.lambda_audio, self.lambda_tags, self.lambda_contrast) < 0:
            raise ValueError("loss weights must be nonnegative")


def kl_reconstruction(x, x_hat):
    """Generalized KL divergence sum(x*log((x+eps)/(xh+eps)) - x + xh)."""
    if np.any(x.data < 0) or np.any(x_hat.data < 0):
        raise ValueError("generalized KL divergence needs nonnegative inputs")
    ratio = (x + EPS) / (x_hat + EPS)
    return (x * ratio.log() - x + x_hat).sum()


def tag_ce(y, y_hat):
    """Per-class binary cross-entropy, summed; logs clamped at 1e-7."""
    p = y_hat.clip(EPS, 1.0 - EPS)
    return -(y * p.log() + (1.0 - y) * (1.0 - p).log()).sum()


def cosine_similarity_matrix(phi_a, phi_t):
    """Row-wise cosine similarities, [N,N]; norms clamped at 1e-7."""
    na = (phi_a * phi_a).sum(axis=1, keepdims=True).sqrt() + EPS
    nt = (phi_t * phi_t).sum(axis=1, keepdims=True).sqrt() + EPS
    return (phi_a / na) @ (phi_t / nt).T


def contrastive(phi_a, phi_t, temperature, include_positive=False):
    """sum_b -log( exp(sim(a_b,t_b)/tau) / sum_{i != b} exp(sim(a_b,t_i)/tau) ).

    The positive pair is excluded from the denominator as written; pass
    include_positive=True for the common variant that keeps it.
    """
    n = phi_a.shape[0]
    if n < 2:
        raise ValueError(f"contrastive loss needs a batch of >= 2, got {n}")
    if phi_a.shape != phi_t.shape:
        raise ValueError(f"projection shapes differ: {phi_a.shape} vs {phi_t.shape}")
    logits = cosine_similarity_matrix(phi_a, phi_t) * (1.0 / temperature)
    eye = np.eye(n, dtype=logits.dtype)
    mask = np.ones((n, n), dtype=logits.dtype) if include_positive else 1.0 - eye
    positives = (logits * Tensor(eye)).sum(axis=1)
    # log-sum-exp over the masked denominator, stabilized by a constant shift
    shift = np.where(mask > 0, logits.data, -np.inf).max(axis=1, keepdims=True)
    expd = (logits - Tensor(shift)).exp() * Tensor(mask)
    lse = expd.sum(axis=1).log() + Tensor(shift[:, 0])
    return (lse - positives).sum()


def total_loss(model, x, y, weights, mode, include_positive=False):
    """Joint objective for a batch; returns (scalar Tensor, breakdown dict).

    mode "ae-c": weighted reconstruction + tag CE + contrastive;
    mode "e-c": contrastive term only (encoders and heads);
    mode "cnn": tag BCE of the supervised baseline head.
    """
    if mode == "cnn":
        z = model.encode_audio(x)
        y_hat = model.cnn_head(flatten_latent(z))
        loss = tag_ce(y, y_hat)
        return loss, {"L_a": 0.0, "L_t": 0.0, "L_xi": 0.0, "total": loss.item()}

    z_a = model.encode_audio(x)
    z_t = model.encode_tags(y)
    phi_a, phi_t = model.project(z_a, z_t)
    l_xi = contrastive(phi_a, phi_t, weights.temperature, include_positive)

    if mode == "e-c":
        loss = weights.lambda_contrast * l_xi
        return loss, {"L_a": 0.0, "L_t": 0.0, "L_xi": l_xi.item(), "total": loss.item()}

    if mode != "ae-c":
        raise ValueError(f"unknown training mode {mode!r}")
    x_hat = model.decode_audio(z_a)
    y_hat = model.decode_tags(z_t)
    l_a = kl_reconstruction(x, x_hat)
    l_t = tag_ce(y, y_hat)
    loss = (weights.lambda_audio * l_a + weights.lambda_tags * l_t
            + weights.lambda_contrast * l_xi)
    return loss, {"L_a": l_a.item(), "L_t": l_t.item(), "L_xi": l_xi.item(),
                  "total": loss.item()}
