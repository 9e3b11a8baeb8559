"""Residue embedding matrices H_p: loaded from precomputed files, or built
by a small trainable fallback when no file is available.

The file boundary is a binary format ("LNKE") carrying a SHA-256 of the
exact residue string, so a stale or mispaired embedding file fails loudly
instead of silently feeding the wrong protein. The fallback is a per-residue
table lookup followed by a width-5 local mixer with edge-clamped context,
giving context-dependent rows without any external model.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import AlphabetError, FormatError, SequenceMismatch
from .tensorcore import Tensor, add, mul, take_rows

ALPHABET = "ACDEFGHIKLMNPQRSTVWYX"   # 20 amino acids + 'X' separator/unknown
_AA_INDEX = {c: i for i, c in enumerate(ALPHABET)}

MAGIC = b"LNKE"
VERSION = 1


@dataclass(frozen=True)
class ProteinSequence:
    id: str
    residues: str

    def __post_init__(self):
        if not self.residues:
            raise AlphabetError(f"{self.id}: empty sequence")
        bad = sorted({c for c in self.residues if c not in _AA_INDEX})
        if bad:
            raise AlphabetError(f"{self.id}: residues {bad} outside alphabet")

    def __len__(self):
        return len(self.residues)


@dataclass
class ResidueEmbeddings:
    matrix: np.ndarray     # R x D, float64, finite
    source: str            # "file" | "fallback"

    @property
    def d(self):
        return self.matrix.shape[1]


def sequence_hash(residues: str) -> bytes:
    return hashlib.sha256(residues.encode("ascii")).digest()


# --- FASTA ----------------------------------------------------------------------

def read_fasta(path) -> list[ProteinSequence]:
    records = []
    header, chunks = None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if header is not None:
                    records.append(ProteinSequence(header, "".join(chunks)))
                header = line[1:].split()[0] or "unnamed"
                chunks = []
            else:
                if header is None:
                    raise FormatError(f"{path}: sequence data before any '>' header")
                chunks.append(line.upper())
    if header is not None:
        records.append(ProteinSequence(header, "".join(chunks)))
    if not records:
        raise FormatError(f"{path}: no FASTA records")
    return records


def load_protein(path) -> ProteinSequence:
    """One sequence per file; multi-chain FASTA records are concatenated
    with a single 'X' separator residue between chains."""
    records = read_fasta(path)
    if len(records) == 1:
        return records[0]
    joined = "X".join(r.residues for r in records)
    return ProteinSequence(records[0].id, joined)


# --- LNKE binary format ---------------------------------------------------------

def write_embeddings(path, sequence: ProteinSequence, matrix: np.ndarray):
    m = np.ascontiguousarray(matrix, dtype="<f4")
    r, d = m.shape
    if r != len(sequence):
        raise SequenceMismatch(
            f"matrix rows {r} != sequence length {len(sequence)}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(sequence_hash(sequence.residues))
        fh.write(struct.pack("<II", r, d))
        fh.write(m.tobytes())


def load_embeddings(path, expected_sequence: ProteinSequence | None = None) -> ResidueEmbeddings:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    stored_hash = blob[8:40]
    if len(stored_hash) != 32:
        raise FormatError(f"{path}: truncated header")
    r, d = struct.unpack_from("<II", blob, 40)
    payload = blob[48:]
    if len(payload) != 4 * r * d:
        raise FormatError(
            f"{path}: payload {len(payload)} bytes, expected {4 * r * d}")
    if expected_sequence is not None:
        if stored_hash != sequence_hash(expected_sequence.residues):
            raise SequenceMismatch(
                f"{path}: stored sequence hash does not match "
                f"{expected_sequence.id}")
        if r != len(expected_sequence):
            raise SequenceMismatch(
                f"{path}: R={r} but sequence length {len(expected_sequence)}")
    matrix = np.frombuffer(payload, dtype="<f4").reshape(r, d).astype(np.float64)
    if not np.isfinite(matrix).all():
        raise FormatError(f"{path}: non-finite values in embedding matrix")
    return ResidueEmbeddings(matrix, source="file")


# --- trainable fallback ---------------------------------------------------------

class FallbackEmbedder:
    """Residue table (len(ALPHABET) x d) + width-5 context mixer.

    y_i = b + sum_{k=-2..2} w_k * x_{clamp(i+k)}; the clamp replicates edge
    rows, so interior rows of a homopolymer come out identical to edge rows.
    """

    OFFSETS = (-2, -1, 0, 1, 2)

    def __init__(self, d: int = 64, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.d = d
        self.table = Tensor(rng.normal(0.0, 0.1, (len(ALPHABET), d)),
                            requires_grad=True)
        mix = np.full((len(self.OFFSETS), d), 0.1)
        mix[2] = 1.0   # centre tap starts dominant
        self.mix = Tensor(mix, requires_grad=True)
        self.bias = Tensor(np.zeros(d), requires_grad=True)

    def parameters(self):
        return [("fallback/table", self.table), ("fallback/mix", self.mix),
                ("fallback/bias", self.bias)]

    def embed(self, seq: ProteinSequence) -> Tensor:
        idx = np.array([_AA_INDEX[c] for c in seq.residues])
        rows = take_rows(self.table, idx)
        r = len(idx)
        out = None
        for k, off in enumerate(self.OFFSETS):
            shifted = np.clip(np.arange(r) + off, 0, r - 1)
            tap = mul(take_rows(rows, shifted),
                      self.mix[k].reshape((1, self.d)))
            out = tap if out is None else add(out, tap)
        return add(out, self.bias.reshape((1, self.d)))

    def embeddings(self, seq: ProteinSequence) -> ResidueEmbeddings:
        return ResidueEmbeddings(self.embed(seq).data.copy(), source="fallback")
