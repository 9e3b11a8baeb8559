"""Self- and cross-attention over residue and group embeddings.

Each modality first runs one pre-norm transformer encoder layer on itself;
then residues attend to the self-attended groups and groups attend to the
self-attended residues (both directions read the self-attended outputs, not
each other's cross outputs). Shapes are preserved: (R x D, F x D) in and out.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch
from .tensorcore import (
    Tensor,
    add,
    concat,
    layer_norm,
    matmul,
    relu,
    softmax,
)


def _init(rng, shape, fan_in):
    return Tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), shape),
                  requires_grad=True)


class MultiHeadAttention:
    def __init__(self, d: int, heads: int, rng, prefix: str):
        if d % heads != 0:
            raise ShapeMismatch(f"width {d} not divisible by {heads} heads")
        self.d, self.heads, self.dh = d, heads, d // heads
        self.prefix = prefix
        self.wq, self.wk, self.wv, self.wo = (_init(rng, (d, d), d)
                                              for _ in range(4))
        self.bq, self.bk, self.bv, self.bo = (Tensor(np.zeros(d), requires_grad=True)
                                              for _ in range(4))
        self.last_weights = None   # per-head numpy attention maps, for tests

    def parameters(self):
        names = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")
        vals = (self.wq, self.bq, self.wk, self.bk,
                self.wv, self.bv, self.wo, self.bo)
        return [(f"{self.prefix}/{n}", v) for n, v in zip(names, vals)]

    def __call__(self, q_in: Tensor, kv_in: Tensor) -> Tensor:
        q = add(matmul(q_in, self.wq), self.bq)
        k = add(matmul(kv_in, self.wk), self.bk)
        v = add(matmul(kv_in, self.wv), self.bv)
        scale = 1.0 / np.sqrt(self.dh)
        heads, maps = [], []
        for h in range(self.heads):
            cols = slice(h * self.dh, (h + 1) * self.dh)
            qh, kh, vh = q[:, cols], k[:, cols], v[:, cols]
            attn = softmax(matmul(qh, kh.T) * scale, axis=-1)
            maps.append(attn.data.copy())
            heads.append(matmul(attn, vh))
        self.last_weights = maps
        return add(matmul(concat(heads, axis=1), self.wo), self.bo)


class AttentionBlock:
    """Pre-norm encoder layer: x + MHA(LN(x), LN(kv)); then x + FF(LN(x))."""

    def __init__(self, d: int, heads: int, rng, prefix: str):
        self.d = d
        self.mha = MultiHeadAttention(d, heads, rng, f"{prefix}/mha")
        self.ln1_g = Tensor(np.ones(d), requires_grad=True)
        self.ln1_b = Tensor(np.zeros(d), requires_grad=True)
        self.lnkv_g = Tensor(np.ones(d), requires_grad=True)
        self.lnkv_b = Tensor(np.zeros(d), requires_grad=True)
        self.ln2_g = Tensor(np.ones(d), requires_grad=True)
        self.ln2_b = Tensor(np.zeros(d), requires_grad=True)
        self.ff1_w = _init(rng, (d, 4 * d), d)
        self.ff1_b = Tensor(np.zeros(4 * d), requires_grad=True)
        self.ff2_w = _init(rng, (4 * d, d), 4 * d)
        self.ff2_b = Tensor(np.zeros(d), requires_grad=True)
        self.prefix = prefix

    def parameters(self):
        own = [("ln1_g", self.ln1_g), ("ln1_b", self.ln1_b),
               ("lnkv_g", self.lnkv_g), ("lnkv_b", self.lnkv_b),
               ("ln2_g", self.ln2_g), ("ln2_b", self.ln2_b),
               ("ff1_w", self.ff1_w), ("ff1_b", self.ff1_b),
               ("ff2_w", self.ff2_w), ("ff2_b", self.ff2_b)]
        return self.mha.parameters() + [(f"{self.prefix}/{n}", v) for n, v in own]

    def __call__(self, x: Tensor, kv: Tensor | None = None) -> Tensor:
        if kv is not None and kv.shape[1] != x.shape[1]:
            raise ShapeMismatch(
                f"query width {x.shape[1]} != key/value width {kv.shape[1]}")
        qn = layer_norm(x, self.ln1_g, self.ln1_b)
        kvn = qn if kv is None else layer_norm(kv, self.lnkv_g, self.lnkv_b)
        x = add(x, self.mha(qn, kvn))
        h = layer_norm(x, self.ln2_g, self.ln2_b)
        h = add(matmul(relu(add(matmul(h, self.ff1_w), self.ff1_b)), self.ff2_w),
                self.ff2_b)
        return add(x, h)


class Scat:
    def __init__(self, d: int, heads: int = 4, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.d = d
        self.self_p = AttentionBlock(d, heads, rng, "scat/self_p")
        self.self_l = AttentionBlock(d, heads, rng, "scat/self_l")
        self.cross_p = AttentionBlock(d, heads, rng, "scat/cross_p")
        self.cross_l = AttentionBlock(d, heads, rng, "scat/cross_l")

    def parameters(self):
        return (self.self_p.parameters() + self.self_l.parameters()
                + self.cross_p.parameters() + self.cross_l.parameters())

    def forward(self, hp: Tensor, hl: Tensor):
        hp1 = self.self_p(hp)
        hl1 = self.self_l(hl)
        hp2 = self.cross_p(hp1, kv=hl1)
        hl2 = self.cross_l(hl1, kv=hp1)
        return hp2, hl2
