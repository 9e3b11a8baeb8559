"""Two-stage training.

Stage one fits the interaction network under focal loss. Stage two loads
that checkpoint, freezes every backbone weight, and fits only the scalar
affinity head under MSE plus the latent InfoNCE/uniformity terms.

Mechanics shared by both stages: one sample is one complex; ragged (R, F)
grids are handled by running samples individually and averaging gradients
up to the configured batch size. The epoch-e visit order is a pure
function of (seed, e), so a run can stop and resume bit-exactly from the
`last.lnkr` checkpoint (parameters, Adam moments, epoch counter and
best-validation score all live in the file). `best.lnkr` tracks the
lowest validation loss seen (focal for stage one, RMSE for stage two) and
is what downstream prediction should load.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import CheckpointMismatch, InternalError
from .losses import focal_loss, info_nce, mse, total_affinity_loss, uniformity
from .model import AffinityModel, InteractionModel
from .tensorcore import Adam, Tensor, concat, l2_normalize, no_grad
from .tensorcore.checkpoint import load_checkpoint, save_checkpoint


@dataclass
class TrainResult:
    model: object
    best_val: float
    epochs_run: int
    log_path: Path
    best_path: Path
    last_path: Path


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Deterministic shuffle; depends on nothing but (seed, epoch, n)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


class _RunLog:
    def __init__(self, path: Path, columns):
        self.path = Path(path)
        self.columns = ["epoch", "split"] + list(columns)
        if not self.path.exists():
            with open(self.path, "w", newline="", encoding="utf-8") as fh:
                csv.writer(fh).writerow(self.columns)

    def row(self, epoch: int, split: str, **values):
        with open(self.path, "a", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerow(
                [epoch, split] + [values[c] for c in self.columns[2:]])


def _save_resume(path, model, opt, epoch, best_val):
    records = model.state_records() + opt.state_arrays()
    records += [("train/epoch", np.array([float(epoch)])),
                ("train/best_val", np.array([best_val]))]
    save_checkpoint(path, records)


def _load_resume(path, model, opt):
    records = load_checkpoint(str(path))
    if isinstance(model, InteractionModel):
        model.load_state(records)
    else:
        _load_affinity_state(model, records)
    try:
        opt.load_state_arrays(records)
        epoch = int(records["train/epoch"][0])
        best_val = float(records["train/best_val"][0])
    except KeyError as exc:
        raise CheckpointMismatch(f"{path}: not a resumable checkpoint "
                                 f"(missing {exc})") from exc
    return epoch, best_val


def _load_affinity_state(model: AffinityModel, records):
    model.backbone.load_state(records)
    for name, tensor in model.head.parameters():
        if name not in records:
            raise CheckpointMismatch(f"resume checkpoint missing {name!r}")
        tensor.data = np.asarray(records[name], dtype=np.float64).copy()


# --- stage one: interaction map under focal loss -----------------------------


def train_interaction(train_samples, val_samples, cfg: TrainConfig,
                      out_dir, resume: bool = False) -> TrainResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    best_path, last_path = out / "best.lnkr", out / "last.lnkr"

    model = InteractionModel(cfg.model, seed=cfg.seed)
    opt = Adam(model.parameters(), lr=cfg.learning_rate, beta1=cfg.beta1,
               beta2=cfg.beta2, eps=cfg.eps)
    start_epoch, best_val = 0, float("inf")
    if resume:
        start_epoch, best_val = _load_resume(last_path, model, opt)
    log = _RunLog(out / "log.csv", ["focal"])

    for epoch in range(start_epoch, cfg.epochs):
        order = epoch_order(cfg.seed, epoch, len(train_samples))
        per_sample = {}
        for batch in _batches(order, cfg.batch_size):
            opt.zero_grad()
            inv = 1.0 / len(batch)
            for i in batch:
                s = train_samples[i]
                p = model.forward(s.protein, s.graph)
                loss = focal_loss(p, s.labels.y, cfg.focal)
                (loss * inv).backward()
                per_sample[int(i)] = float(loss.data)
            opt.step()
        # reduce in index order so the logged mean ignores shuffle order
        train_loss = float(np.mean([per_sample[i] for i in sorted(per_sample)]))
        with no_grad():
            val_losses = [float(focal_loss(model.forward(s.protein, s.graph),
                                           s.labels.y, cfg.focal).data)
                          for s in val_samples]
        val_loss = float(np.mean(val_losses))
        log.row(epoch, "train", focal=train_loss)
        log.row(epoch, "val", focal=val_loss)
        if val_loss < best_val:
            best_val = val_loss
            model.save(best_path)
        _save_resume(last_path, model, opt, epoch + 1, best_val)

    if not best_path.exists():   # zero-epoch run: still leave a loadable file
        model.save(best_path)
    return TrainResult(model, best_val, cfg.epochs - start_epoch,
                       log.path, best_path, last_path)


# --- stage two: affinity head on a frozen backbone ----------------------------


def _assert_backbone_untouched(model: AffinityModel):
    for name, tensor in model.backbone.parameters():
        if tensor.grad is not None and np.any(tensor.grad):
            raise InternalError(f"frozen backbone received gradient: {name}")


def _affinity_batch_terms(model: AffinityModel, samples, batch, cfg):
    preds, feats = [], []
    for i in batch:
        s = samples[i]
        y_hat, h = model.forward_with_features(s.protein, s.graph)
        preds.append(y_hat.reshape((1,)))
        feats.append(h.reshape((1, h.shape[0])))
    y_true = np.array([samples[i].affinity for i in batch])
    affinities = y_true
    y_vec = concat(preds, axis=0) if len(preds) > 1 else preds[0]
    mse_term = mse(y_vec, y_true)
    if len(batch) >= 2:
        h_mat = concat(feats, axis=0)
        nce_term = info_nce(h_mat, affinities, cfg.latent)
        unif_term = uniformity(l2_normalize(h_mat))
    else:
        nce_term = Tensor(0.0)
        unif_term = Tensor(0.0)
    return mse_term, nce_term, unif_term


def train_affinity(train_samples, val_samples, backbone_ckpt,
                   cfg: TrainConfig, out_dir, resume: bool = False) -> TrainResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    best_path, last_path = out / "best.lnkr", out / "last.lnkr"

    backbone = InteractionModel.load(backbone_ckpt, cfg=cfg.model)
    model = AffinityModel(backbone, seed=cfg.seed)
    model.freeze_backbone()
    frozen_hash = model.backbone_hash()
    opt = Adam(model.head_parameters(), lr=cfg.learning_rate, beta1=cfg.beta1,
               beta2=cfg.beta2, eps=cfg.eps)
    start_epoch, best_val = 0, float("inf")
    if resume:
        start_epoch, best_val = _load_resume(last_path, model, opt)
    log = _RunLog(out / "log.csv", ["total", "mse", "info_nce", "uniformity",
                                    "rmse"])

    for epoch in range(start_epoch, cfg.epochs):
        order = epoch_order(cfg.seed, epoch, len(train_samples))
        sums = np.zeros(4)
        weights = 0
        for batch in _batches(order, cfg.batch_size):
            opt.zero_grad()
            mse_t, nce_t, unif_t = _affinity_batch_terms(
                model, train_samples, batch, cfg)
            total = total_affinity_loss(mse_t, nce_t, unif_t, cfg.latent)
            total.backward()
            _assert_backbone_untouched(model)
            opt.step()
            sums += len(batch) * np.array([float(total.data), float(mse_t.data),
                                           float(nce_t.data), float(unif_t.data)])
            weights += len(batch)
        train_total, train_mse, train_nce, train_unif = sums / weights
        log.row(epoch, "train", total=train_total, mse=train_mse,
                info_nce=train_nce, uniformity=train_unif,
                rmse=float(np.sqrt(train_mse)))

        with no_grad():
            v_mse, v_nce, v_unif = _affinity_batch_terms(
                model, val_samples, np.arange(len(val_samples)), cfg)
            v_total = total_affinity_loss(v_mse, v_nce, v_unif, cfg.latent)
        val_rmse = float(np.sqrt(v_mse.data))
        log.row(epoch, "val", total=float(v_total.data),
                mse=float(v_mse.data), info_nce=float(v_nce.data),
                uniformity=float(v_unif.data), rmse=val_rmse)
        if val_rmse < best_val:
            best_val = val_rmse
            model.save(best_path)
        _save_resume(last_path, model, opt, epoch + 1, best_val)

    if model.backbone_hash() != frozen_hash:
        raise InternalError("frozen backbone parameters drifted during training")
    if not best_path.exists():
        model.save(best_path)
    return TrainResult(model, best_val, cfg.epochs - start_epoch,
                       log.path, best_path, last_path)
