"""End-to-end model composition.

InteractionModel chains the pieces: residue embeddings (file-backed or the
trainable fallback), functional-group ligand embeddings, the self/cross
attention stage, and the pairwise U-Net that emits the R x F x 7
interaction-probability map. AffinityModel bolts the scalar-affinity head
onto a (typically frozen) InteractionModel backbone.

Checkpoints are LNKR files holding every parameter plus `meta/*` scalar
records describing the architecture, so a file alone reconstructs the
network; mismatched shapes or dims raise CheckpointMismatch.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .affinity_head import AffinityHead
from .config import ModelConfig
from .errors import CheckpointMismatch, ShapeMismatch
from .fgparser import decompose, default_catalogue
from .finger_id import FingerId
from .molgraph import parse_smiles
from .pairwise_unet import PairwiseUNet
from .protein_embed import FallbackEmbedder, ProteinSequence, ResidueEmbeddings
from .scat import Scat
from .tensorcore import Tensor
from .tensorcore.checkpoint import load_checkpoint, save_checkpoint

_META_FIELDS = ("d_model", "d_graph", "d_fg", "d_pos", "gcn_layers", "heads",
                "unet_base", "d_unet")


class InteractionModel:
    def __init__(self, cfg: ModelConfig | None = None, seed: int = 0,
                 n_patterns: int | None = None):
        cfg = cfg or ModelConfig()
        self.cfg = cfg
        self.n_patterns = (len(default_catalogue()) if n_patterns is None
                           else n_patterns)
        self.embedder = FallbackEmbedder(d=cfg.d_model, seed=seed)
        self.finger = FingerId(d_out=cfg.d_model, d_graph=cfg.d_graph,
                               d_fg=cfg.d_fg, d_pos=cfg.d_pos,
                               n_layers=cfg.gcn_layers,
                               n_patterns=self.n_patterns, seed=seed + 1)
        self.scat = Scat(cfg.d_model, heads=cfg.heads, seed=seed + 2)
        self.unet = PairwiseUNet(cfg.d_model, base=cfg.unet_base,
                                 d_unet=cfg.d_unet, seed=seed + 3)

    def parameters(self):
        return (self.embedder.parameters() + self.finger.parameters()
                + self.scat.parameters() + self.unet.parameters())

    def param_dict(self):
        return dict(self.parameters())

    # --- featurization ------------------------------------------------------

    def embed_protein(self, protein) -> Tensor:
        """Accepts a ProteinSequence (trainable fallback path) or
        precomputed per-residue matrices (constant input)."""
        if isinstance(protein, ProteinSequence):
            return self.embedder.embed(protein)
        matrix = protein.matrix if isinstance(protein, ResidueEmbeddings) else np.asarray(protein)
        if matrix.ndim != 2 or matrix.shape[1] != self.cfg.d_model:
            raise ShapeMismatch(
                f"protein embeddings {matrix.shape} incompatible with model "
                f"width {self.cfg.d_model}")
        return Tensor(np.asarray(matrix, dtype=np.float64))

    def embed_ligand(self, mol) -> Tensor:
        graph = parse_smiles(mol) if isinstance(mol, str) else mol
        groups, matrix = decompose(graph)
        return self.finger.forward(graph, groups, matrix)

    # --- forward ------------------------------------------------------------

    def forward_full(self, protein, mol):
        """Returns (P, contextual protein rows, contextual ligand rows)."""
        hp0 = self.embed_protein(protein)
        hl0 = self.embed_ligand(mol)
        hp, hl = self.scat.forward(hp0, hl0)
        return self.unet.forward(hp, hl), hp, hl

    def forward(self, protein, mol) -> Tensor:
        return self.forward_full(protein, mol)[0]

    # --- persistence ----------------------------------------------------------

    def _meta(self):
        cfg = self.cfg
        values = {name: getattr(cfg, name) for name in _META_FIELDS}
        values["n_patterns"] = self.n_patterns
        meta = [(f"meta/{k}", np.float64(v)) for k, v in sorted(values.items())]
        meta.append(("meta/affinity_hidden",
                     np.asarray(cfg.affinity_hidden, dtype=np.float64)))
        return meta

    def state_records(self):
        return self._meta() + [(n, t.data) for n, t in self.parameters()]

    def save(self, path):
        save_checkpoint(path, self.state_records())

    def load_state(self, records: dict):
        for name, tensor in self.parameters():
            if name not in records:
                raise CheckpointMismatch(f"checkpoint missing {name!r}")
            arr = records[name]
            if tuple(arr.shape) != tuple(tensor.data.shape):
                raise CheckpointMismatch(
                    f"{name}: checkpoint shape {arr.shape} != model "
                    f"{tensor.data.shape}")
            tensor.data = np.asarray(arr, dtype=np.float64).copy()

    @classmethod
    def load(cls, path, cfg: ModelConfig | None = None) -> "InteractionModel":
        records = load_checkpoint(path)
        meta = {}
        for name in _META_FIELDS + ("n_patterns",):
            key = f"meta/{name}"
            if key not in records:
                raise CheckpointMismatch(f"{path}: missing {key!r}")
            meta[name] = int(records[key])
        if cfg is not None:
            for name in _META_FIELDS:
                if getattr(cfg, name) != meta[name]:
                    raise CheckpointMismatch(
                        f"{path}: checkpoint {name}={meta[name]} but config "
                        f"requests {getattr(cfg, name)}")
        n_patterns = meta.pop("n_patterns")
        if "meta/affinity_hidden" not in records:
            raise CheckpointMismatch(f"{path}: missing 'meta/affinity_hidden'")
        hidden = tuple(int(v) for v in np.atleast_1d(records["meta/affinity_hidden"]))
        model = cls(ModelConfig(**meta, affinity_hidden=hidden),
                    n_patterns=n_patterns)
        model.load_state(records)
        return model


def parameter_hash(params) -> str:
    """Order-sensitive digest of named parameters; detects any drift."""
    digest = hashlib.sha256()
    for name, tensor in params:
        digest.update(name.encode("utf-8"))
        digest.update(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    return digest.hexdigest()


class AffinityModel:
    """Frozen interaction backbone + trainable scalar-affinity head."""

    def __init__(self, backbone: InteractionModel, seed: int = 0):
        self.backbone = backbone
        self.head = AffinityHead(backbone.cfg.d_model,
                                 hidden=tuple(backbone.cfg.affinity_hidden),
                                 seed=seed)

    def parameters(self):
        return self.backbone.parameters() + self.head.parameters()

    def head_parameters(self):
        return self.head.parameters()

    def freeze_backbone(self):
        for _, tensor in self.backbone.parameters():
            tensor.requires_grad = False

    def backbone_hash(self) -> str:
        return parameter_hash(self.backbone.parameters())

    def forward_with_features(self, protein, mol):
        p, hp, hl = self.backbone.forward_full(protein, mol)
        return self.head.forward_with_features(p, hp, hl)

    def forward(self, protein, mol) -> Tensor:
        return self.forward_with_features(protein, mol)[0]

    # --- persistence ----------------------------------------------------------

    def state_records(self):
        return (self.backbone.state_records()
                + [(n, t.data) for n, t in self.head.parameters()])

    def save(self, path):
        save_checkpoint(path, self.state_records())

    @classmethod
    def load(cls, path, cfg: ModelConfig | None = None) -> "AffinityModel":
        backbone = InteractionModel.load(path, cfg=cfg)
        model = cls(backbone)
        records = load_checkpoint(path)
        for name, tensor in model.head.parameters():
            if name not in records:
                raise CheckpointMismatch(f"checkpoint missing {name!r}")
            arr = records[name]
            if tuple(arr.shape) != tuple(tensor.data.shape):
                raise CheckpointMismatch(
                    f"{name}: checkpoint shape {arr.shape} != model "
                    f"{tensor.data.shape}")
            tensor.data = np.asarray(arr, dtype=np.float64).copy()
        return model


def checkpoint_has_affinity_head(path) -> bool:
    return any(name.startswith("affinity/") for name in load_checkpoint(path))
