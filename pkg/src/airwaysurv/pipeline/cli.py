"""Command-line entry point.

Exit status is 0 on success, 1 when some cases (or the command's data)
failed, and 2 when the configuration or arguments are invalid.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import AirwaySurvError, AlignmentError, ConfigError, MissingLabelsError
from ..learning import (FeatureTable, classification_report, combine_tables, cross_validate,
                        fit_bundle, grid_search, load_model, read_labels,
                        read_table, save_model, write_table)
from ..morphology import bounding_box_mask, extract_trachea, postprocess_airway_detailed
from ..phantoms import PhantomSpec, generate_cohort, generate_phantom
from ..radiomics import extract_all
from ..segmetrics import SegMetricsReport, overall_score
from ..volume_io import read_mask, read_volume, write_mask, write_volume
from .batch import Failure, list_cases, run_cases, write_failures
from .config import PipelineConfig, load_config, with_overrides

logger = logging.getLogger("airwaysurv")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
ROI_KINDS = ("trachea", "airway")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _require_dir(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} directory is not set")
    p = Path(path)
    if not p.is_dir():
        raise ConfigError(f"{what} directory {p} does not exist")
    return p


def _require_file(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} file is not set")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} file {p} does not exist")
    return p


def _out_dir(cfg: PipelineConfig) -> Path:
    p = Path(cfg.paths.output)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _finish(failures, out: Path) -> int:
    write_failures(failures, out)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------- per-case work

def _postprocess_case(case_id, path, out_dir, params):
    res = postprocess_airway_detailed(read_mask(path), params)
    write_mask(res.mask, Path(out_dir) / f"{case_id}.nii.gz")
    return len(res.removed_sizes), int(sum(res.removed_sizes))


def _extract_case(case_id, image_path, mask_path, s_trachea, s_airway, region):
    vol = read_volume(image_path)
    mask = read_mask(mask_path)
    trachea = extract_trachea(mask, region)
    return extract_all(vol, trachea, s_trachea), extract_all(vol, bounding_box_mask(mask), s_airway)


def _seg_case(case_id, pred_path, gt_path, detect_fraction):
    return overall_score(read_mask(pred_path), read_mask(gt_path), detect_fraction)


# ---------------------------------------------------------------- commands

def cmd_phantom(cfg: PipelineConfig, args) -> int:
    out = _out_dir(cfg)
    seed = cfg.cv.seed if args.seed is None else args.seed
    spec = PhantomSpec(kind=args.kind, dims=tuple(args.dims), spacing=tuple(args.spacing),
                       trunk_radius=args.trunk_radius, depth=args.depth, noise=args.noise,
                       signal=args.signal, seed=seed, n_cases=args.n_cases,
                       satellites_mm=tuple(args.satellites_mm))
    if spec.kind == "cohort":
        cases = generate_cohort(spec)
    else:
        cases = [("case000", generate_phantom(spec), None)]
    (out / "images").mkdir(exist_ok=True)
    (out / "masks").mkdir(exist_ok=True)
    meta = {}
    for cid, ph, label in cases:
        write_volume(ph.volume, out / "images" / f"{cid}.nii.gz", dtype=np.int16)
        write_mask(ph.mask, out / "masks" / f"{cid}.nii.gz")
        meta[cid] = {"branch_count": ph.branch_count, "label": label,
                     "trunk_radius": ph.segments[0].radius,
                     "trunk_voxels": int(ph.trunk_voxels.sum()),
                     "artifact_voxels": int(ph.artifact_voxels.sum()),
                     "satellite_distances_mm": list(ph.satellite_distances_mm)}
    if spec.kind == "cohort":
        with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case_id", "label"])
            for cid, _, label in cases:
                w.writerow([cid, label])
    doc = {"kind": spec.kind, "seed": seed, "dims": list(spec.dims), "cases": meta}
    (out / "phantom.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    logger.info("wrote %d phantom case(s) to %s", len(cases), out)
    return EXIT_OK


def cmd_postprocess(cfg: PipelineConfig, args) -> int:
    masks = list_cases(_require_dir(cfg.paths.masks, "masks"))
    out = _out_dir(cfg)
    mask_out = out / "masks"
    mask_out.mkdir(exist_ok=True)
    params = cfg.postprocess.params()
    items = [(cid, (str(p), str(mask_out), params)) for cid, p in masks.items()]
    results, failures = run_cases(_postprocess_case, items, "postprocess", cfg.jobs)
    with open(out / "postprocess_log.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "removed_components", "removed_voxels"])
        for cid, (n, vox) in results.items():
            w.writerow([cid, n, vox])
    return _finish(failures, out)


def cmd_extract(cfg: PipelineConfig, args) -> int:
    images = list_cases(_require_dir(cfg.paths.images, "images"))
    masks = list_cases(_require_dir(cfg.paths.masks, "masks"))
    labels = read_labels(_require_file(cfg.paths.labels, "labels")) if cfg.paths.labels else None
    out = _out_dir(cfg)
    failures = []
    items = []
    for cid in sorted(set(images) | set(masks)):
        if cid not in images or cid not in masks:
            what = "image" if cid not in images else "mask"
            failures.append(Failure(cid, "extract", "MissingInput", f"{what} not found"))
            continue
        items.append((cid, (str(images[cid]), str(masks[cid]), cfg.extraction_settings("trachea"),
                            cfg.extraction_settings("airway"), cfg.trachea_region)))
    results, fails = run_cases(_extract_case, items, "extract", cfg.jobs)
    failures += fails
    ids = [cid for cid, _ in items if cid in results]
    if labels is not None:
        for cid in [c for c in ids if c not in labels]:
            failures.append(Failure(cid, "extract", "MissingLabel", "case not in labels file"))
        ids = [c for c in ids if c in labels]
    if not ids:
        logger.error("no case was extracted")
        write_failures(failures, out)
        return EXIT_PARTIAL
    lab = np.array([labels[c] for c in ids]) if labels is not None else None
    for k, kind in enumerate(ROI_KINDS):
        names = list(results[ids[0]][k])
        vals = [[results[c][k][n] for n in names] for c in ids]
        write_table(FeatureTable(ids, names, vals, lab), out / f"features_{kind}.csv")
    failures.sort(key=lambda f: f.case_id)
    return _finish(failures, out)


def _prefixed(t: FeatureTable, prefix: str) -> FeatureTable:
    return FeatureTable(t.case_ids, [f"{prefix}__{n}" for n in t.feature_names], t.values, t.labels)


def _align(tables):
    common = set(tables[0].case_ids).intersection(*(t.case_ids for t in tables[1:]))
    out = []
    for t in tables:
        dropped = [c for c in t.case_ids if c not in common]
        if dropped:
            logger.warning("dropping %d case(s) not present in every table: %s",
                           len(dropped), ", ".join(dropped))
        rows = [i for i, c in enumerate(t.case_ids) if c in common]
        sub = t.subset(rows)
        order = np.argsort(sub.case_ids, kind="stable")
        out.append(sub.subset(order))
    return out


def _load_features(cfg: PipelineConfig, args, need_labels: bool) -> FeatureTable:
    """Read the requested ROI tables and merge them into one prefixed table."""
    kinds = [k.strip() for k in args.rois.split(",") if k.strip()]
    if not kinds or any(k not in ROI_KINDS for k in kinds):
        raise ConfigError(f"--rois must list ROI kinds from {ROI_KINDS}")
    explicit = {"trachea": args.trachea, "airway": args.airway}
    tables = []
    for k in kinds:
        path = explicit[k]
        if path is None:
            if cfg.paths.features is None:
                raise ConfigError(f"no {k} feature table: pass --{k} or set paths.features")
            path = Path(cfg.paths.features) / f"features_{k}.csv"
        tables.append(read_table(_require_file(path, f"{k} features")))
    tables = _align(tables)
    if len(tables) == 2:
        t = combine_tables(tables[0], tables[1], prefixes=tuple(kinds))
    else:
        t = _prefixed(tables[0], kinds[0])
    if cfg.paths.labels:
        lab = read_labels(_require_file(cfg.paths.labels, "labels"))
        missing = [c for c in t.case_ids if c not in lab]
        if missing:
            raise AlignmentError(f"labels file has no entry for case {missing[0]!r}")
        t = t.with_labels([lab[c] for c in t.case_ids])
    if need_labels and t.labels is None:
        raise MissingLabelsError("feature tables carry no labels; pass --labels")
    return t


def _write_cv(result, out: Path, name: str = "cv_report.csv") -> None:
    rates = ("accuracy", "f1", "sensitivity", "specificity", "auc")
    counts = ("tp", "fp", "tn", "fn")
    with open(out / name, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "n", *rates, *counts])
        for f, r in enumerate(result.reports):
            d = r.as_dict()
            w.writerow([f, r.n, *(_fmt(d[k]) for k in rates), *(d[k] for k in counts)])
        m = result.mean
        w.writerow(["mean", sum(r.n for r in result.reports),
                    *(_fmt(m[k]) for k in rates), *(m[k] for k in counts)])


def _write_grid(results, out: Path) -> None:
    with open(out / "grid_search.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["C", "gamma", "mean_accuracy"])
        for r in results:
            w.writerow([_fmt(r.C), _fmt(r.gamma), _fmt(r.mean_accuracy)])


def _run_cv(cfg: PipelineConfig, t: FeatureTable, out: Path):
    s = cfg.svm
    thresholds = dict(cfg.selection)
    if s.grid_search:
        C, gamma, results = grid_search(t, s.C_grid, s.gamma_grid, cfg.cv.k, cfg.cv.seed,
                                        thresholds, cfg.scaling_mode, s.tol, cfg.jobs)
        _write_grid(results, out)
        result = next(r for r in results if r.C == C and r.gamma == gamma)
    else:
        C, gamma = s.C, s.gamma
        result = cross_validate(t, cfg.cv.k, C, gamma, cfg.cv.seed, thresholds,
                                cfg.scaling_mode, s.tol, cfg.jobs)
    _write_cv(result, out)
    logger.info("C=%g gamma=%g mean CV accuracy %.4f", C, gamma, result.mean_accuracy)
    return C, gamma, result


def cmd_crossval(cfg: PipelineConfig, args) -> int:
    t = _load_features(cfg, args, need_labels=True)
    _run_cv(cfg, t, _out_dir(cfg))
    return EXIT_OK


def cmd_train(cfg: PipelineConfig, args) -> int:
    t = _load_features(cfg, args, need_labels=True)
    out = _out_dir(cfg)
    C, gamma, result = _run_cv(cfg, t, out)
    bundle = fit_bundle(t, C, gamma, dict(cfg.selection), cfg.svm.tol)
    meta = {"scaling_mode": cfg.scaling_mode, "cv_k": cfg.cv.k, "cv_seed": cfg.cv.seed,
            "cv_mean_accuracy": result.mean_accuracy, "n_train": len(t.case_ids),
            "rois": args.rois}
    save_model(bundle, out / "model.json", meta)
    logger.info("model with %d feature(s) and %d support vector(s) written",
                len(bundle.feature_names), len(bundle.svm.dual_coefs))
    return EXIT_OK


def cmd_predict(cfg: PipelineConfig, args) -> int:
    model_path = args.model or cfg.paths.model
    bundle = load_model(_require_file(model_path, "model"))
    t = _load_features(cfg, args, need_labels=False)
    labels, dv = bundle.predict(t)
    out = _out_dir(cfg)
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "label", "decision_value"])
        for cid, lab, f in zip(t.case_ids, labels, dv):
            w.writerow([cid, int(lab), _fmt(f)])
    return EXIT_OK


def cmd_evaluate_cls(cfg: PipelineConfig, args) -> int:
    pred_path = _require_file(args.predictions or cfg.paths.predictions, "predictions")
    labels = read_labels(_require_file(cfg.paths.labels, "labels"))
    with open(pred_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    missing = [r["case_id"] for r in rows if r["case_id"] not in labels]
    if missing:
        raise AlignmentError(f"labels file has no entry for case {missing[0]!r}")
    yt = [labels[r["case_id"]] for r in rows]
    yp = [int(r["label"]) for r in rows]
    dv = [float(r["decision_value"]) for r in rows]
    rep = classification_report(yt, yp, dv, positive=args.positive)
    out = _out_dir(cfg)
    d = rep.as_dict()
    with open(out / "cls_metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", *d])
        w.writerow([rep.n, *(v if isinstance(v, int) else _fmt(v) for v in d.values())])
    return EXIT_OK


def cmd_evaluate_seg(cfg: PipelineConfig, args) -> int:
    preds = list_cases(_require_dir(cfg.paths.pred, "prediction masks"))
    gts = list_cases(_require_dir(cfg.paths.gt, "ground-truth masks"))
    out = _out_dir(cfg)
    failures = [Failure(c, "evaluate-seg", "MissingInput", "no ground truth for case")
                for c in preds if c not in gts]
    items = [(c, (str(preds[c]), str(gts[c]), cfg.detect_fraction)) for c in preds if c in gts]
    results, fails = run_cases(_seg_case, items, "evaluate-seg", cfg.jobs)
    failures = sorted(failures + fails, key=lambda f: f.case_id)
    fields = SegMetricsReport.CSV_FIELDS
    with open(out / "seg_metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", *fields])
        for cid, rep in results.items():
            w.writerow([cid, *(_fmt(getattr(rep, k)) for k in fields)])
        if results:
            w.writerow(["mean", *(_fmt(np.mean([getattr(r, k) for r in results.values()]))
                                  for k in fields)])
    return _finish(failures, out)


# ---------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--jobs", type=int, help="parallel worker processes for per-case work")
    p.add_argument("--seed", type=int, help="seed for folds and phantoms")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _feature_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trachea", help="trachea feature CSV")
    p.add_argument("--airway", help="airway bounding-box feature CSV")
    p.add_argument("--features", help="directory holding features_<roi>.csv")
    p.add_argument("--labels", help="case_id,label CSV")
    p.add_argument("--rois", default="trachea,airway", help="comma-separated ROI kinds to combine")


def _svm_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--C", type=float, dest="C")
    p.add_argument("--gamma", type=float)
    p.add_argument("--grid", action="store_true", help="grid-search C and gamma")
    p.add_argument("--scaling-mode", choices=("leak-free", "full-table"))
    p.add_argument("--k", type=int, help="number of CV folds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="airwaysurv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate synthetic airway phantoms")
    _common(p)
    p.add_argument("--kind", default="cohort", choices=("tube", "y-split", "binary-tree", "cohort"))
    p.add_argument("--n-cases", type=int, default=20)
    p.add_argument("--dims", type=int, nargs=3, default=(48, 48, 64))
    p.add_argument("--spacing", type=float, nargs=3, default=(1.0, 1.0, 1.0))
    p.add_argument("--trunk-radius", type=float, default=3.0)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--noise", type=float, default=20.0)
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--satellites-mm", type=float, nargs="*", default=())
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("postprocess", help="close masks and drop distant components")
    _common(p)
    p.add_argument("--masks", help="directory of predicted airway masks")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("extract", help="radiomic features of trachea and airway bounding box")
    _common(p)
    p.add_argument("--images", help="directory of CT volumes")
    p.add_argument("--masks", help="directory of airway masks")
    p.add_argument("--labels", help="case_id,label CSV to join")
    p.set_defaults(func=cmd_extract)

    for name, fn, text in (("train", cmd_train, "cross-validate and fit the final model"),
                           ("crossval", cmd_crossval, "cross-validation report only")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _feature_args(p)
        _svm_args(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("predict", help="apply a saved model to feature tables")
    _common(p)
    _feature_args(p)
    p.add_argument("--model", help="model JSON file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate-seg", help="segmentation scores against ground truth")
    _common(p)
    p.add_argument("--pred", help="directory of predicted masks")
    p.add_argument("--gt", help="directory of ground-truth masks")
    p.set_defaults(func=cmd_evaluate_seg)

    p = sub.add_parser("evaluate-cls", help="classification metrics of a predictions CSV")
    _common(p)
    p.add_argument("--predictions", help="predictions CSV from 'predict'")
    p.add_argument("--labels", help="case_id,label CSV")
    p.add_argument("--positive", type=int, choices=(0, 1), default=1, help="positive class label")
    p.set_defaults(func=cmd_evaluate_cls)
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    paths = {k: getattr(args, k, None) for k in
             ("images", "masks", "labels", "gt", "pred", "features", "model", "predictions")}
    cfg = with_overrides(cfg, jobs=args.jobs, seed=args.seed, out=args.out, **paths)
    svm = {k: getattr(args, k) for k in ("C", "gamma") if getattr(args, k, None) is not None}
    if getattr(args, "grid", False):
        svm["grid_search"] = True
    if svm:
        cfg = replace(cfg, svm=replace(cfg.svm, **svm))
    if getattr(args, "scaling_mode", None):
        cfg = replace(cfg, scaling_mode=args.scaling_mode)
    if getattr(args, "k", None) is not None:
        cfg = replace(cfg, cv=replace(cfg.cv, k=args.k))
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"airwaysurv: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AirwaySurvError, OSError, ValueError) as exc:
        print(f"airwaysurv {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
