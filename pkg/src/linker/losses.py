"""Training objectives.

Interaction stage: focal loss over the R x F x 7 probability map, alpha on
positives and (1 - alpha) on negatives, probabilities clamped to
[1e-7, 1 - 1e-7], mean reduction over every entry.

Affinity stage: MSE plus beta * (InfoNCE + lambda * uniformity) on the
pre-MLP feature vectors. The InfoNCE positive for sample i is the batch
mate with the closest affinity (ties to the lowest index) and the
denominator keeps the j = i self term, read literally off the formula;
uniformity likewise keeps i = j pairs (a constant offset only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BatchTooSmall, LengthMismatch, NotNormalized, ShapeMismatch
from .tensorcore import (
    Tensor,
    as_tensor,
    clip,
    exp,
    l2_normalize,
    log,
    matmul,
    mean,
    mul,
    pow_,
    sub,
    sum_,
)

EPS = 1e-7


@dataclass(frozen=True)
class FocalConfig:
    alpha: float = 0.85
    gamma: float = 1.0


@dataclass(frozen=True)
class LatentConfig:
    beta: float = 2.0
    lam: float = 0.1
    tau: float = 0.1


def focal_loss(p, y: np.ndarray, cfg: FocalConfig = FocalConfig()) -> Tensor:
    p = as_tensor(p)
    if p.shape != y.shape:
        raise ShapeMismatch(f"probs {p.shape} vs labels {y.shape}")
    pc = clip(p, EPS, 1.0 - EPS)
    p_t = pc * y + (1.0 - pc) * (1.0 - y)
    weight = cfg.alpha * y + (1.0 - cfg.alpha) * (1.0 - y)   # constant
    loss = mul(Tensor(-weight), mul(pow_(sub(1.0, p_t), cfg.gamma), log(p_t)))
    return mean(loss)


def mse(y_pred, y_true) -> Tensor:
    y_pred = as_tensor(y_pred)
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_pred.shape != y_true.shape:
        raise LengthMismatch(f"pred {y_pred.shape} vs true {y_true.shape}")
    diff = sub(y_pred, y_true)
    return mean(diff * diff)


def nce_positives(affinities: np.ndarray) -> np.ndarray:
    """p(i) = argmin_{j != i} |y_i - y_j|, ties to the lowest index."""
    b = affinities.shape[0]
    dist = np.abs(affinities[:, None] - affinities[None, :])
    np.fill_diagonal(dist, np.inf)
    return dist.argmin(axis=1)   # argmin returns the first minimum


def info_nce(h: Tensor, affinities: np.ndarray,
             cfg: LatentConfig = LatentConfig()) -> Tensor:
    b = h.shape[0]
    if b < 2:
        raise BatchTooSmall(f"InfoNCE needs a batch of >= 2, got {b}")
    if affinities.shape[0] != b:
        raise LengthMismatch(f"batch {b} vs affinities {affinities.shape[0]}")
    z = l2_normalize(h, axis=1)
    sims = matmul(z, z.T) * (1.0 / cfg.tau)           # B x B, includes diagonal
    shift = Tensor(sims.data.max(axis=1, keepdims=True))   # detached, stability
    lse = log(sum_(exp(sub(sims, shift)), axis=1)) + shift.reshape((b,))
    pos = sims[np.arange(b), nce_positives(affinities)]
    return mean(sub(lse, pos))


def uniformity(z: Tensor) -> Tensor:
    norms = np.sqrt((z.data ** 2).sum(axis=1))
    if np.abs(norms - 1.0).max() > 1e-6:
        raise NotNormalized("uniformity expects unit-norm rows")
    gram = matmul(z, z.T)
    d2 = sub(2.0, 2.0 * gram)                 # squared distances, incl. i=j
    return log(mean(exp(-2.0 * d2)))


def total_affinity_loss(mse_term, nce_term, unif_term,
                        cfg: LatentConfig = LatentConfig()) -> Tensor:
    latent = nce_term + cfg.lam * unif_term
    return mse_term + cfg.beta * latent
