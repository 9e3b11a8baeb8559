"""Ground-truth interaction labels and residue-level derivations.

Labels arrive as JSON-lines records of sparse (r, f, k) triples per
complex and densify to a binary R x F x 7 tensor. Because the f axis is
only meaningful for one specific pattern catalogue, every record carries
the catalogue fingerprint and loading fails on mismatch. Residue-level
hard labels collapse the tensor with an any() over (f, k); smoothed labels
take, per residue, the max Gaussian bump over all hard anchors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import CatalogueMismatch, FormatError, IndexOutOfRange, InvalidSigma
from .fgparser import catalogue_hash
from .pairwise_unet import N_TYPES


@dataclass
class LabelSet:
    protein_id: str
    ligand_id: str
    y: np.ndarray          # R x F x 7 binary
    catalogue: str

    @property
    def r(self):
        return self.y.shape[0]

    @property
    def f(self):
        return self.y.shape[1]


def label_record(protein_id, ligand_id, r, f, triples, catalogue=None) -> dict:
    return {"protein_id": protein_id, "ligand_id": ligand_id, "R": r, "F": f,
            "catalogue_hash": catalogue or catalogue_hash(),
            "triples": [list(t) for t in triples]}


def write_labels(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_labels(path, expected_catalogue: str | None = None) -> list[LabelSet]:
    expected = expected_catalogue or catalogue_hash()
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            for key in ("protein_id", "ligand_id", "R", "F",
                        "catalogue_hash", "triples"):
                if key not in rec:
                    raise FormatError(f"{path}:{lineno}: missing {key!r}")
            if rec["catalogue_hash"] != expected:
                raise CatalogueMismatch(
                    f"{path}:{lineno}: labels built against a different "
                    f"pattern catalogue")
            r, f = rec["R"], rec["F"]
            y = np.zeros((r, f, N_TYPES))
            for triple in rec["triples"]:
                ri, fi, ki = triple
                if not (0 <= ri < r and 0 <= fi < f and 0 <= ki < N_TYPES):
                    raise IndexOutOfRange(
                        f"{path}:{lineno}: triple {triple} outside "
                        f"({r}, {f}, {N_TYPES})")
                y[ri, fi, ki] = 1.0   # duplicates collapse
            out.append(LabelSet(rec["protein_id"], rec["ligand_id"], y,
                                rec["catalogue_hash"]))
    return out


def residue_hard(y: np.ndarray) -> np.ndarray:
    """y_hard[r] = 1 iff any (f, k) entry in row r is set."""
    return (y.sum(axis=(1, 2)) > 0).astype(np.float64)


def smooth(y_hard: np.ndarray, sigma: float) -> np.ndarray:
    """y_smooth[i] = max_c exp(-(i-c)^2 / (2 sigma^2)) over anchors c;
    all zeros when there are no anchors."""
    if sigma <= 0:
        raise InvalidSigma(f"sigma must be positive, got {sigma}")
    anchors = np.where(y_hard > 0)[0]
    if anchors.size == 0:
        return np.zeros_like(y_hard, dtype=np.float64)
    idx = np.arange(y_hard.shape[0])[:, None]
    bumps = np.exp(-((idx - anchors[None, :]) ** 2) / (2.0 * sigma * sigma))
    return bumps.max(axis=1)


def residue_scores(p: np.ndarray) -> np.ndarray:
    """Predicted per-residue score: max over groups, then over types —
    equal to the joint max over (f, k)."""
    return p.max(axis=1).max(axis=1)
