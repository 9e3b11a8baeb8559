"""Manifests and dataset assembly.

A manifest is JSON lines, one complex per line:

    {"protein_id": "1abc", "fasta": "seqs/1abc.fasta", "smiles": "CCO",
     "labels": "labels/1abc.jsonl", "affinity": 6.2, "split": "train"}

Exactly one of `fasta` / `embedding` names the protein input (embedding is
a binary per-residue matrix file); `labels` and `affinity` (pK units) are
optional depending on the stage; `split` defaults to "train". Relative
paths resolve against the manifest's own directory so manifests can move
with their data. Ids must be unique and every referenced file must exist
at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, ManifestError
from .fgparser import decompose
from .labels import LabelSet, load_labels
from .molgraph import parse_smiles
from .protein_embed import load_embeddings, load_protein

_KNOWN_KEYS = {"protein_id", "ligand_id", "fasta", "embedding", "smiles",
               "labels", "affinity", "split"}


@dataclass
class ComplexSpec:
    protein_id: str
    ligand_id: str
    smiles: str
    fasta: Path | None
    embedding: Path | None
    labels: Path | None
    affinity: float | None
    split: str


@dataclass
class Sample:
    """One fully featurized complex, ready for a forward pass."""
    spec: ComplexSpec
    protein: object          # ProteinSequence or ResidueEmbeddings
    graph: object
    groups: list
    matrix: object           # N x F membership
    labels: LabelSet | None
    affinity: float | None


def load_manifest(path) -> list[ComplexSpec]:
    path = Path(path)
    base = path.parent
    if not path.exists():
        raise ManifestError(f"manifest {path} does not exist")
    specs, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{where}: invalid JSON ({exc})") from exc
            unknown = set(rec) - _KNOWN_KEYS
            if unknown:
                raise ManifestError(f"{where}: unknown keys {sorted(unknown)}")
            for key in ("protein_id", "smiles"):
                if key not in rec:
                    raise ManifestError(f"{where}: missing {key!r}")
            pid = rec["protein_id"]
            if pid in seen:
                raise ManifestError(f"{where}: duplicate protein_id {pid!r}")
            seen.add(pid)
            if ("fasta" in rec) == ("embedding" in rec):
                raise ManifestError(
                    f"{where}: need exactly one of 'fasta' or 'embedding'")
            paths = {}
            for key in ("fasta", "embedding", "labels"):
                if key in rec:
                    p = base / rec[key]
                    if not p.exists():
                        raise ManifestError(f"{where}: {key} file {p} not found")
                    paths[key] = p
            affinity = rec.get("affinity")
            if affinity is not None and not isinstance(affinity, (int, float)):
                raise ManifestError(f"{where}: affinity must be numeric")
            split = rec.get("split", "train")
            if split not in ("train", "val"):
                raise ManifestError(f"{where}: split must be 'train' or 'val'")
            specs.append(ComplexSpec(
                protein_id=pid,
                ligand_id=rec.get("ligand_id", f"{pid}/ligand"),
                smiles=rec["smiles"],
                fasta=paths.get("fasta"),
                embedding=paths.get("embedding"),
                labels=paths.get("labels"),
                affinity=None if affinity is None else float(affinity),
                split=split,
            ))
    if not specs:
        raise ManifestError(f"{path}: empty manifest")
    return specs


def load_sample(spec: ComplexSpec, require_labels: bool = False,
                require_affinity: bool = False) -> Sample:
    try:
        if spec.fasta is not None:
            protein = load_protein(spec.fasta)
        else:
            protein = load_embeddings(spec.embedding)
        graph = parse_smiles(spec.smiles)
        groups, matrix = decompose(graph)
        labels = None
        if spec.labels is not None:
            sets = load_labels(spec.labels)
            by_id = {s.protein_id: s for s in sets}
            labels = by_id.get(spec.protein_id)
            if labels is None:
                raise ManifestError(
                    f"label file {spec.labels} has no record for "
                    f"{spec.protein_id!r}")
            if labels.f != matrix.shape[1]:
                raise ManifestError(
                    f"label grid F={labels.f} but decomposition found "
                    f"{matrix.shape[1]} groups")
    except DataError as exc:
        raise type(exc)(f"[{spec.protein_id}] {exc}") from exc
    if require_labels and labels is None:
        raise ManifestError(f"[{spec.protein_id}] no labels in manifest")
    if require_affinity and spec.affinity is None:
        raise ManifestError(f"[{spec.protein_id}] no affinity in manifest")
    return Sample(spec=spec, protein=protein, graph=graph, groups=groups,
                  matrix=matrix, labels=labels, affinity=spec.affinity)


def load_dataset(manifest_path, require_labels: bool = False,
                 require_affinity: bool = False) -> list[Sample]:
    return [load_sample(s, require_labels, require_affinity)
            for s in load_manifest(manifest_path)]


def train_val_split(samples: list[Sample]):
    """Manifest-driven split; with no 'val' rows validation monitors the
    training set itself."""
    train = [s for s in samples if s.spec.split == "train"]
    val = [s for s in samples if s.spec.split == "val"]
    if not train:
        raise ManifestError("no training samples in manifest")
    return train, val or list(train)
