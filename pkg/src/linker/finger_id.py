"""Position-aware functional-group embeddings H_l (F x D).

Four scales are fused per group: the group's mean atom embedding from a
small graph-convolution stack (meso), a learnable embedding of the group's
pattern type (atomic identity), a fixed sinusoidal encoding of the group's
canonical index (so two rings in one molecule stay distinguishable), and a
whole-molecule mean readout (global). The concatenation is linearly
projected to the model width D shared with the residue embeddings.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyGroup
from .fgparser import FALLBACK, default_catalogue
from .molgraph import MolecularGraph, atom_features
from .tensorcore import (
    Tensor,
    add,
    broadcast_to,
    concat,
    matmul,
    mean,
    relu,
    take_rows,
)


def normalized_adjacency(g: MolecularGraph) -> np.ndarray:
    """Symmetric-normalized adjacency with self-loops:
    D^{-1/2} (A + I) D^{-1/2}."""
    n = g.n_atoms
    a = np.eye(n)
    for i, j, _ in g.bonds:
        a[i, j] = 1.0
        a[j, i] = 1.0
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * dinv[:, None] * dinv[None, :]


def positional_encoding(length: int, d: int) -> np.ndarray:
    """Fixed sinusoidal encoding of the canonical group index."""
    pos = np.arange(length)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    enc = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return enc


def group_pool(z: Tensor, m: np.ndarray) -> Tensor:
    """Per-group mean of atom embeddings: row g = mean of Z rows with
    M[:, g] = 1."""
    counts = m.sum(axis=0)
    if (counts == 0).any():
        empty = np.where(counts == 0)[0].tolist()
        raise EmptyGroup(f"groups {empty} have no atoms")
    pool = (m / counts[None, :]).T   # F x N, rows sum to 1
    return matmul(Tensor(pool), z)


class FingerId:
    """Trainable stack: GCN layers -> pool/readout -> type+position fusion
    -> projection to D."""

    def __init__(self, d_out: int, d_graph: int = 64, d_fg: int = 16,
                 d_pos: int = 16, n_layers: int = 2, n_patterns: int | None = None,
                 seed: int = 0):
        rng = np.random.default_rng(seed)
        if n_patterns is None:
            n_patterns = len(default_catalogue())
        self.d_out, self.d_graph = d_out, d_graph
        self.d_fg, self.d_pos = d_fg, d_pos
        self.n_patterns = n_patterns

        def init(shape, fan_in):
            return Tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), shape),
                          requires_grad=True)

        widths = [5] + [d_graph] * n_layers
        self.gcn = [(init((widths[k], widths[k + 1]), widths[k]),
                     Tensor(np.zeros(widths[k + 1]), requires_grad=True))
                    for k in range(n_layers)]
        # one extra row for interpolation-fallback groups
        self.fg_table = Tensor(rng.normal(0.0, 0.1, (n_patterns + 1, d_fg)),
                               requires_grad=True)
        d_concat = 2 * d_graph + d_fg + d_pos
        self.proj_w = init((d_concat, d_out), d_concat)
        self.proj_b = Tensor(np.zeros(d_out), requires_grad=True)

    def parameters(self):
        params = []
        for k, (w, b) in enumerate(self.gcn):
            params += [(f"finger/gcn{k}/w", w), (f"finger/gcn{k}/b", b)]
        params += [("finger/fg_table", self.fg_table),
                   ("finger/proj_w", self.proj_w),
                   ("finger/proj_b", self.proj_b)]
        return params

    def gcn_forward(self, g: MolecularGraph) -> Tensor:
        a_hat = Tensor(normalized_adjacency(g))
        z = Tensor(atom_features(g))
        for w, b in self.gcn:
            z = relu(add(matmul(matmul(a_hat, z), w), b))
        return z

    def table_rows(self, groups) -> np.ndarray:
        return np.array([self.n_patterns if grp.pattern_id == FALLBACK
                         else grp.pattern_id for grp in groups])

    def assemble(self, z_inter: Tensor, groups, z_global: Tensor) -> Tensor:
        f = z_inter.shape[0]
        e_fg = take_rows(self.fg_table, self.table_rows(groups))
        e_pos = Tensor(positional_encoding(f, self.d_pos))
        glob = broadcast_to(z_global.reshape((1, self.d_graph)),
                            (f, self.d_graph))
        h = concat([z_inter, e_fg, e_pos, glob], axis=1)
        return add(matmul(h, self.proj_w), self.proj_b)

    def forward(self, g: MolecularGraph, groups, m: np.ndarray) -> Tensor:
        z = self.gcn_forward(g)
        z_inter = group_pool(z, m)
        z_global = mean(z, axis=0)
        return self.assemble(z_inter, groups, z_global)
