"""Pairwise residue-group tensor and the interaction-map U-Net.

The enriched residue rows are broadcast along the group axis and the group
rows along the residue axis; their feature-wise concatenation gives the
R x F x 2D pairwise tensor. A small two-level U-Net (3x3 convs, max-pool
down, nearest-neighbor up, skip concatenation) runs over the (R, F) grid
with features as channels, and a 1x1 conv head emits seven independent
sigmoid probabilities per pair. Ragged sizes are zero-padded up to
multiples of four and cropped back after the decoder.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .errors import FormatError, ShapeMismatch
from .tensorcore import (
    Tensor,
    broadcast_to,
    concat,
    conv2d,
    max_pool2d,
    pad2d,
    relu,
    sigmoid,
    transpose,
    up_sample2d,
)

TYPE_ORDER = ("hydrogen_bond", "hydrophobic", "pi_stacking", "pi_cation",
              "salt_bridge", "water_bridge", "halogen_bond")
N_TYPES = len(TYPE_ORDER)


def build_pairwise(hp: Tensor, hl: Tensor) -> Tensor:
    """Z[r, f] = [hp[r] ; hl[f]], shape R x F x 2D."""
    if hp.shape[1] != hl.shape[1]:
        raise ShapeMismatch(
            f"residue width {hp.shape[1]} != group width {hl.shape[1]}")
    r, d = hp.shape
    f = hl.shape[0]
    a = broadcast_to(hp.reshape((r, 1, d)), (r, f, d))
    b = broadcast_to(hl.reshape((1, f, d)), (r, f, d))
    return concat([a, b], axis=2)


def _pad_to_multiple(x: Tensor, multiple: int = 4):
    """Bottom/right zero padding of a (C, H, W) tensor."""
    _, h, w = x.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        x = pad2d(x, (0, ph, 0, pw))
    return x


class PairwiseUNet:
    """Two-level encoder/decoder + 1x1 head; channels 2D -> 16/32/64 -> 16 -> 7."""

    def __init__(self, d_model: int, base: int = 16, d_unet: int = 16,
                 seed: int = 0):
        rng = np.random.default_rng(seed)
        self.d_model, self.base, self.d_unet = d_model, base, d_unet
        c_in = 2 * d_model

        def conv_init(c_out, c_in_, k):
            fan = c_in_ * k * k
            w = Tensor(rng.normal(0.0, 1.0 / np.sqrt(fan), (c_out, c_in_, k, k)),
                       requires_grad=True)
            b = Tensor(np.zeros(c_out), requires_grad=True)
            return w, b

        self.enc1 = conv_init(base, c_in, 3)
        self.enc2 = conv_init(2 * base, base, 3)
        self.mid = conv_init(4 * base, 2 * base, 3)
        self.dec2 = conv_init(2 * base, 4 * base + 2 * base, 3)
        self.dec1 = conv_init(d_unet, 2 * base + base, 3)
        self.head1 = conv_init(d_unet, d_unet, 1)
        self.head2 = conv_init(N_TYPES, d_unet, 1)

    def parameters(self):
        named = [("enc1", self.enc1), ("enc2", self.enc2), ("mid", self.mid),
                 ("dec2", self.dec2), ("dec1", self.dec1),
                 ("head1", self.head1), ("head2", self.head2)]
        out = []
        for name, (w, b) in named:
            out += [(f"unet/{name}/w", w), (f"unet/{name}/b", b)]
        return out

    def unet_forward(self, z: Tensor) -> Tensor:
        """z: R x F x 2D -> U: R x F x d_unet."""
        r, f, _ = z.shape
        x = _pad_to_multiple(transpose(z, (2, 0, 1)))
        e1 = relu(conv2d(x, *self.enc1))
        e2 = relu(conv2d(max_pool2d(e1), *self.enc2))
        m = relu(conv2d(max_pool2d(e2), *self.mid))
        d2 = relu(conv2d(concat([up_sample2d(m), e2], axis=0), *self.dec2))
        d1 = relu(conv2d(concat([up_sample2d(d2), e1], axis=0), *self.dec1))
        return transpose(d1, (1, 2, 0))[:r, :f, :]

    def predict_types(self, u: Tensor) -> Tensor:
        """U: R x F x d_unet -> P: R x F x 7, entries in (0, 1)."""
        x = transpose(u, (2, 0, 1))
        x = relu(conv2d(x, *self.head1))
        logits = conv2d(x, *self.head2)
        return sigmoid(transpose(logits, (1, 2, 0)))

    def forward(self, hp: Tensor, hl: Tensor) -> Tensor:
        return self.predict_types(self.unet_forward(build_pairwise(hp, hl)))


# --- prediction export ------------------------------------------------------


def prediction_record(protein_id: str, ligand_id: str, probs: np.ndarray) -> dict:
    r, f, k = probs.shape
    if k != N_TYPES:
        raise ShapeMismatch(f"expected {N_TYPES} type channels, got {k}")
    payload = np.ascontiguousarray(probs, dtype="<f4").tobytes()
    return {
        "protein_id": protein_id,
        "ligand_id": ligand_id,
        "R": r,
        "F": f,
        "type_order": list(TYPE_ORDER),
        "probs": base64.b64encode(payload).decode("ascii"),
    }


def write_prediction(path, record: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh)
        fh.write("\n")


def load_prediction(path) -> tuple[dict, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    for key in ("protein_id", "ligand_id", "R", "F", "type_order", "probs"):
        if key not in rec:
            raise FormatError(f"{path}: prediction record missing {key!r}")
    if list(rec["type_order"]) != list(TYPE_ORDER):
        raise FormatError(f"{path}: unexpected type_order {rec['type_order']}")
    raw = base64.b64decode(rec["probs"])
    r, f = rec["R"], rec["F"]
    if len(raw) != 4 * r * f * N_TYPES:
        raise FormatError(f"{path}: probs payload has wrong size")
    probs = np.frombuffer(raw, dtype="<f4").reshape(r, f, N_TYPES).astype(np.float64)
    return rec, probs
