"""Binding-affinity regression head over a frozen interaction backbone.

ContactBlock: the R x F x 7 probability map is collapsed to edge strengths
S via learnable per-type weights, converted to row/column attention, and
used to enrich each side's embeddings with projected context from the
other side (residual add). FusionBlock: edge-strength sums give pooling
weights beta over each side; a global 7-vector s_k records each type's
total weighted mass. The final feature [pool_p ; s ; pool_l] (width 2D+7)
feeds an MLP producing the scalar affinity.

The raw beta normalization s_r / sum(s) is undefined for mixed-sign
strengths, so: raw ratio when all strengths are non-negative with a
positive total, softmax when any strength is negative, uniform when all
are exactly zero.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch
from .pairwise_unet import N_TYPES
from .tensorcore import (
    Tensor,
    add,
    concat,
    matmul,
    mul,
    relu,
    softmax,
    sum_,
    transpose,
)


def edge_strength(p: Tensor, w: Tensor) -> Tensor:
    """S[r, f] = sum_k P[r, f, k] * w[k]."""
    r, f, k = p.shape
    if k != w.shape[0]:
        raise ShapeMismatch(f"type axis {k} vs weights {w.shape[0]}")
    flat = matmul(p.reshape((r * f, k)), w.reshape((k, 1)))
    return flat.reshape((r, f))


def pool_weights(s: Tensor) -> Tensor:
    """Normalize strengths into pooling weights (non-negative, sum 1)."""
    data = s.data
    if np.all(data == 0.0):
        n = data.shape[0]
        return Tensor(np.full(n, 1.0 / n))
    if (data < 0).any():
        return softmax(s, axis=0)
    return s / sum_(s)


class AffinityHead:
    def __init__(self, d_model: int, hidden=(256, 64), seed: int = 0):
        rng = np.random.default_rng(seed)
        self.d_model = d_model
        self.w_types = Tensor(np.ones(N_TYPES), requires_grad=True)
        self.proj_p = self._init(rng, (d_model, d_model))
        self.proj_l = self._init(rng, (d_model, d_model))
        widths = [2 * d_model + N_TYPES] + list(hidden) + [1]
        self.mlp = [(self._init(rng, (widths[i], widths[i + 1])),
                     Tensor(np.zeros(widths[i + 1]), requires_grad=True))
                    for i in range(len(widths) - 1)]

    @staticmethod
    def _init(rng, shape):
        return Tensor(rng.normal(0.0, 1.0 / np.sqrt(shape[0]), shape),
                      requires_grad=True)

    def parameters(self):
        out = [("affinity/w_types", self.w_types),
               ("affinity/proj_p", self.proj_p),
               ("affinity/proj_l", self.proj_l)]
        for i, (w, b) in enumerate(self.mlp):
            out += [(f"affinity/mlp{i}/w", w), (f"affinity/mlp{i}/b", b)]
        return out

    # --- ContactBlock ---------------------------------------------------

    def enrich(self, p: Tensor, hp: Tensor, hl: Tensor):
        s = edge_strength(p, self.w_types)
        a_pl = softmax(s, axis=1)              # rows: residue attends groups
        a_lp = softmax(s, axis=0)              # cols: group attends residues
        c_l = matmul(a_pl, hl)                 # R x D context for residues
        c_p = matmul(transpose(a_lp), hp)      # F x D context for groups
        hp_e = add(hp, matmul(c_l, self.proj_p))
        hl_e = add(hl, matmul(c_p, self.proj_l))
        return s, hp_e, hl_e

    # --- FusionBlock ----------------------------------------------------

    def fuse(self, s: Tensor, p: Tensor, hp_e: Tensor, hl_e: Tensor) -> Tensor:
        r, _ = s.shape
        beta_p = pool_weights(sum_(s, axis=1))
        beta_l = pool_weights(sum_(s, axis=0))
        pool_p = matmul(beta_p.reshape((1, r)), hp_e).reshape((self.d_model,))
        pool_l = matmul(beta_l.reshape((1, s.shape[1])), hl_e).reshape(
            (self.d_model,))
        s_types = mul(sum_(p, axis=(0, 1)), self.w_types)
        return concat([pool_p, s_types, pool_l], axis=0)

    def predict_affinity(self, h: Tensor) -> Tensor:
        if h.shape[0] != 2 * self.d_model + N_TYPES:
            raise ShapeMismatch(
                f"feature width {h.shape[0]} != {2 * self.d_model + N_TYPES}")
        x = h.reshape((1, h.shape[0]))
        for i, (w, b) in enumerate(self.mlp):
            x = add(matmul(x, w), b)
            if i < len(self.mlp) - 1:
                x = relu(x)
        return x.reshape(())

    def forward_with_features(self, p: Tensor, hp: Tensor, hl: Tensor):
        """(yhat, h): the prediction and the pre-MLP feature vector h that
        the latent alignment losses consume."""
        s, hp_e, hl_e = self.enrich(p, hp, hl)
        h = self.fuse(s, p, hp_e, hl_e)
        return self.predict_affinity(h), h

    def forward(self, p: Tensor, hp: Tensor, hl: Tensor) -> Tensor:
        return self.forward_with_features(p, hp, hl)[0]
