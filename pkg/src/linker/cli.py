"""Command-line interface.

One executable, eight subcommands covering the full pipeline:

    parse-fg            SMILES -> functional-group records (groups.jsonl)
    featurize           manifest -> cached ligand decompositions
    train-interaction   stage one: fit the interaction network
    train-affinity      stage two: fit the affinity head on a frozen backbone
    predict             checkpoint + manifest -> one prediction JSON per complex
    evaluate            predictions + labels -> EvalReport JSON
    smooth-labels       hard residue labels -> Gaussian-smoothed CSV
    export-curves       predictions + labels -> PR/ROC CSVs + summary JSON

Exit codes: 0 success, 2 usage, 3 bad input data, 4 internal invariant
violation. Failures print exactly one JSON line on stderr:
{"error": "<ExceptionType>", "message": "..."}.

`--jobs` parallelizes per-molecule work; outputs are ordered by input
position, so contents never depend on the worker count. The environment
variable LINKER_CACHE names a directory for memoized ligand
decompositions.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .data import load_dataset, train_val_split
from .errors import DataError, InternalError, LinkerError, UnsupportedFeature
from .fgparser import catalogue_hash, decompose, group_record
from .labels import load_labels, residue_hard, residue_scores, smooth
from .metrics import build_report, export_curves
from .model import AffinityModel, InteractionModel, checkpoint_has_affinity_head
from .molgraph import parse_smiles, read_smi_file
from .pairwise_unet import load_prediction, prediction_record, write_prediction
from .tensorcore import no_grad
from .training import train_affinity, train_interaction

_FMT = argparse.ArgumentDefaultsHelpFormatter


def _warn(**fields):
    print(json.dumps({"warning": True, **fields}), file=sys.stderr)


def _cache_dir():
    root = os.environ.get("LINKER_CACHE")
    if not root:
        return None
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _decompose_record(mol_id: str, smiles: str, cache: Path | None) -> dict:
    if cache is not None:
        key = hashlib.sha256(
            f"{smiles}\n{catalogue_hash()}".encode()).hexdigest()
        hit = cache / f"{key}.json"
        if hit.exists():
            rec = json.loads(hit.read_text())
            rec["id"] = mol_id
            return rec
    graph = parse_smiles(smiles)
    groups, matrix = decompose(graph)
    rec = group_record(mol_id, graph, groups, matrix)
    if cache is not None:
        cached = dict(rec, id="")
        (cache / f"{key}.json").write_text(json.dumps(cached))
    return rec


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --- subcommand implementations ----------------------------------------------


def cmd_parse_fg(args) -> int:
    molecules = read_smi_file(args.input)
    cache = _cache_dir()

    def one(item):
        mol_id, smiles = item
        try:
            return _decompose_record(mol_id, smiles, cache)
        except UnsupportedFeature as exc:
            if args.strict:
                raise
            _warn(id=mol_id, skipped=True, message=str(exc))
            return None

    records = [r for r in _map_jobs(one, molecules, args.jobs) if r is not None]
    with open(args.output, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    print(json.dumps({"written": len(records), "skipped":
                      len(molecules) - len(records), "output": args.output}))
    return 0


def cmd_featurize(args) -> int:
    samples = load_dataset(args.manifest)
    cache = _cache_dir()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(sample):
        return _decompose_record(sample.spec.protein_id, sample.spec.smiles,
                                 cache)

    records = _map_jobs(one, samples, args.jobs)
    path = out / "groups.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    print(json.dumps({"complexes": len(records), "output": str(path)}))
    return 0


def cmd_train_interaction(args) -> int:
    cfg = load_config(args.config)
    if cfg.stage != "interaction":
        raise DataError(f"{args.config}: stage is {cfg.stage!r}, "
                        f"expected 'interaction'")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    samples = load_dataset(args.manifest, require_labels=True)
    train, val = train_val_split(samples)
    result = train_interaction(train, val, cfg, args.out, resume=args.resume)
    print(json.dumps({"best_val_focal": result.best_val,
                      "epochs_run": result.epochs_run,
                      "best": str(result.best_path),
                      "log": str(result.log_path)}))
    return 0


def cmd_train_affinity(args) -> int:
    cfg = load_config(args.config)
    if cfg.stage != "affinity":
        raise DataError(f"{args.config}: stage is {cfg.stage!r}, "
                        f"expected 'affinity'")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    samples = load_dataset(args.manifest, require_affinity=True)
    train, val = train_val_split(samples)
    result = train_affinity(train, val, args.backbone, cfg, args.out,
                            resume=args.resume)
    print(json.dumps({"best_val_rmse": result.best_val,
                      "epochs_run": result.epochs_run,
                      "best": str(result.best_path),
                      "log": str(result.log_path)}))
    return 0


def cmd_predict(args) -> int:
    has_head = checkpoint_has_affinity_head(args.backbone)
    if has_head:
        model = AffinityModel.load(args.backbone)
        interaction = model.backbone
    else:
        model = None
        interaction = InteractionModel.load(args.backbone)
    samples = load_dataset(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(sample):
        p, hp, hl = interaction.forward_full(sample.protein, sample.graph)
        rec = prediction_record(sample.spec.protein_id, sample.spec.ligand_id,
                                p.data)
        if model is not None:
            y_hat, _ = model.head.forward_with_features(p, hp, hl)
            rec["affinity"] = float(y_hat.data)
        return rec

    with no_grad():
        records = _map_jobs(one, samples, args.jobs)
    written = []
    for rec in records:
        path = out / f"{rec['protein_id']}.json"
        write_prediction(path, rec)
        written.append(str(path))
    print(json.dumps({"predictions": len(written), "out": str(out)}))
    return 0


def _load_pred_dir(preds_dir):
    paths = sorted(Path(preds_dir).glob("*.json"))
    if not paths:
        raise DataError(f"no prediction files in {preds_dir}")
    return [load_prediction(p) for p in paths]


def _paired_arrays(preds_dir, labels_path, level: str):
    predictions = _load_pred_dir(preds_dir)
    label_sets = {ls.protein_id: ls for ls in load_labels(labels_path)}
    scores, hard, affinities = [], [], []
    for rec, probs in predictions:
        ls = label_sets.get(rec["protein_id"])
        if ls is None:
            raise DataError(f"no labels for {rec['protein_id']!r}")
        if ls.y.shape != probs.shape:
            raise DataError(
                f"{rec['protein_id']}: prediction grid {probs.shape} vs "
                f"label grid {ls.y.shape}")
        if level == "residue":
            scores.append(residue_scores(probs))
            hard.append(residue_hard(ls.y))
        else:
            scores.append(probs.reshape(-1))
            hard.append(ls.y.reshape(-1))
        if "affinity" in rec:
            affinities.append((rec["protein_id"], rec["affinity"]))
    return (np.concatenate(scores), np.concatenate(hard),
            dict(affinities), predictions)


def _affinity_pairs(manifest_path, predicted: dict):
    from .data import load_manifest

    pairs = [(predicted[s.protein_id], s.affinity)
             for s in load_manifest(manifest_path)
             if s.affinity is not None and s.protein_id in predicted]
    if not pairs:
        return None
    y_hat, y = zip(*pairs)
    return list(y_hat), list(y)


def cmd_evaluate(args) -> int:
    scores, hard, predicted, predictions = _paired_arrays(
        args.preds, args.labels, args.level)
    smooth_scores = None
    thresholds = tuple(args.thresholds or ())
    if thresholds and args.level == "residue":
        label_sets = {ls.protein_id: ls for ls in load_labels(args.labels)}
        smooth_scores = np.concatenate(
            [smooth(residue_hard(label_sets[rec["protein_id"]].y), args.sigma)
             for rec, _ in predictions])
    affinity_pairs = None
    if args.manifest and predicted:
        affinity_pairs = _affinity_pairs(args.manifest, predicted)
    report = build_report(scores, hard, smooth_labels=smooth_scores,
                          thresholds=thresholds, affinity_pairs=affinity_pairs)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_smooth_labels(args) -> int:
    if args.sigma <= 0:
        raise DataError(f"--sigma must be positive, got {args.sigma}")
    label_sets = load_labels(args.labels)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("protein_id,residue,y_smooth\n")
        for ls in label_sets:
            y = smooth(residue_hard(ls.y), args.sigma)
            for i, value in enumerate(y):
                fh.write(f"{ls.protein_id},{i},{value:.5f}\n")
    print(json.dumps({"complexes": len(label_sets), "out": args.out}))
    return 0


def cmd_export_curves(args) -> int:
    scores, hard, _, predictions = _paired_arrays(
        args.preds, args.labels, args.level)
    smooth_scores = None
    thresholds = tuple(args.thresholds or ())
    if thresholds and args.level == "residue":
        label_sets = {ls.protein_id: ls for ls in load_labels(args.labels)}
        smooth_scores = np.concatenate(
            [smooth(residue_hard(label_sets[rec["protein_id"]].y), args.sigma)
             for rec, _ in predictions])
    paths = export_curves(scores, hard, args.out,
                          smooth_labels=smooth_scores, thresholds=thresholds)
    print(json.dumps({"written": [str(p) for p in paths]}))
    return 0


# --- parser ------------------------------------------------------------------


def _thresholds_list(text: str):
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad threshold list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="linker",
        description="Residue x functional-group interaction maps and binding "
                    "affinity from sequences and SMILES.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse-fg", formatter_class=_FMT,
                       help="decompose SMILES into functional-group records")
    p.add_argument("--input", required=True, help=".smi file (SMILES[\\tid])")
    p.add_argument("--output", required=True, help="groups JSONL path")
    p.add_argument("--strict", action="store_true",
                   help="fail on unsupported SMILES instead of skip-and-warn")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker threads; output independent of the count")
    p.set_defaults(fn=cmd_parse_fg)

    p = sub.add_parser("featurize", formatter_class=_FMT,
                       help="decompose every ligand in a manifest "
                            "(honors LINKER_CACHE)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_featurize)

    p = sub.add_parser("train-interaction", formatter_class=_FMT,
                       help="stage one: fit the interaction network "
                            "(defaults: 30 epochs, batch 2, lr 2e-5)")
    p.add_argument("--config", required=True, help="TOML config, stage=interaction")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--resume", action="store_true",
                   help="continue from <out>/last.lnkr")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.set_defaults(fn=cmd_train_interaction)

    p = sub.add_parser("train-affinity", formatter_class=_FMT,
                       help="stage two: fit the affinity head on a frozen "
                            "backbone (defaults: 80 epochs, batch 16, lr 2e-5)")
    p.add_argument("--config", required=True, help="TOML config, stage=affinity")
    p.add_argument("--backbone", required=True, help="stage-one checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train_affinity)

    p = sub.add_parser("predict", formatter_class=_FMT,
                       help="write one interaction-map JSON per complex")
    p.add_argument("--backbone", required=True, help="checkpoint to load")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="predictions directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", formatter_class=_FMT,
                       help="score predictions against labels")
    p.add_argument("--preds", required=True, help="predictions directory")
    p.add_argument("--labels", required=True, help="labels JSONL")
    p.add_argument("--level", choices=("residue", "entry"), default="residue")
    p.add_argument("--thresholds", type=_thresholds_list, default=None,
                   help="comma list for weighted precision, e.g. 0.5,0.7")
    p.add_argument("--sigma", type=float, default=2.0,
                   help="label smoothing width for weighted precision")
    p.add_argument("--manifest", default=None,
                   help="manifest with affinities, enables RMSE")
    p.add_argument("--out", default=None, help="write report here, not stdout")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("smooth-labels", formatter_class=_FMT,
                       help="Gaussian-smooth hard residue labels to CSV")
    p.add_argument("--labels", required=True)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(fn=cmd_smooth_labels)

    p = sub.add_parser("export-curves", formatter_class=_FMT,
                       help="write PR/ROC CSVs plus a summary report")
    p.add_argument("--preds", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--level", choices=("residue", "entry"), default="residue")
    p.add_argument("--thresholds", type=_thresholds_list, default=None)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_export_curves)

    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DataError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    except (InternalError, LinkerError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
