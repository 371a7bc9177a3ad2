"""Single executable exposing every pipeline stage as a subcommand.

Every subcommand accepts --seed (default 42) and writes one JSON report,
to stdout or to the --out path. The one exception is `pseudomask`, where
--out names the directory that receives the generated masks and the JSON
report goes to stdout or --report.

Exit codes: 0 success; 1 command line usage error; 2 malformed or empty
input data (including files with zero data rows, reported as EmptyInput,
and unreadable paths); 3 numeric or semantic failure on well-formed input.

Report serialization: floats carry six decimal places, except values under
a key named "p", which carry three significant figures and switch to
scientific notation below 1e-3. Repeat runs with the same flags, seed, and
inputs produce byte-identical output.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .cls_eval import confusion, cross_entropy, prf_report
from .data_model import (
    LogitRecord,
    Split,
    grayscale_as_rgb,
    read_feature_csv,
    read_logit_csv,
    read_pgm,
    read_pgm_values,
    read_ppm,
    write_logit_csv,
    write_pgm,
)
from .demo import run_demo
from .errors import (
    BadLabelIndex,
    ComputeError,
    EmptyInput,
    InconsistentWidth,
    InputFormatError,
    MissingClass,
)
from .hygiene import (
    HyperGrid,
    cluster_near_duplicates,
    audit_fold_plan,
    nested_cv_run,
    nested_fold_plan,
    phash64,
    stratified_split,
)
from .ood_eval import DEFAULT_TAUS, ScoredSample, ood_metrics, threshold_sweep
from .pseudomask import apply_mask, grabcut, morph_close, morph_open
from .scoring import OdinConfig, energy_score, msp_score, odin_score, softmax
from .seg_eval import mask_metrics, dataset_summary
from .stats import (
    PairedOutcome,
    mcnemar,
    paired_acc_diff_ci,
    paired_outcomes,
    percentile_bootstrap,
)
from .tiny_model import load_model

SCHEMA_VERSION = 1

ODIN_GRID_TEMPERATURES = (1.0, 10.0, 100.0, 1000.0)
ODIN_GRID_EPSILONS = (0.0, 0.001, 0.002, 0.004)


# --- JSON rendering --------------------------------------------------------

def _render_scalar(value, key):
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise ComputeError(f"non-finite number under key {key!r}")
        if key == "p":
            return f"{value:.2e}" if 0.0 < value < 1e-3 else f"{value:.3g}"
        return f"{value:.6f}"
    if isinstance(value, str):
        return json.dumps(value)
    if value is None:
        return "null"
    raise TypeError(f"cannot serialize {type(value).__name__} under key {key!r}")


def render_json(obj, indent: int = 0, key=None) -> str:
    """Deterministic pretty printer applying the float conventions above."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [
            f"{inner}{json.dumps(str(k))}: {render_json(v, indent + 1, k)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        rows = [f"{inner}{render_json(v, indent + 1, key)}" for v in obj]
        return "[\n" + ",\n".join(rows) + f"\n{pad}]"
    return _render_scalar(obj, key)


# --- shared input handling ---------------------------------------------------

def _load_records(path: str, prefix: str) -> list[LogitRecord]:
    records = read_logit_csv(path, column_prefix=prefix)
    if not records:
        raise EmptyInput(f"{path}: no data rows")
    return records


def _load_features(path: str, prefix: str) -> list[LogitRecord]:
    records = read_feature_csv(path, column_prefix=prefix)
    if not records:
        raise EmptyInput(f"{path}: no data rows")
    return records


def _require_labels(records: list[LogitRecord], path: str) -> np.ndarray:
    for rec in records:
        if rec.label < 0:
            raise BadLabelIndex(f"{path}: record {rec.id!r} has no label")
    return np.asarray([rec.label for rec in records])


def _single_column(records: list[LogitRecord], path: str) -> np.ndarray:
    for rec in records:
        if len(rec.logits) != 1:
            raise InconsistentWidth(
                f"{path}: score files carry exactly one value column, "
                f"record {rec.id!r} has {len(rec.logits)}"
            )
    return np.asarray([rec.logits[0] for rec in records])


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _seed_value(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _score_records(records, scores) -> list[dict]:
    return [
        {"id": rec.id, "split": rec.split.value, "label": rec.label,
         "score": float(score)}
        for rec, score in zip(records, scores)
    ]


def _write_scores_csv(path: str, records, scores) -> None:
    # labels are dropped: a score file has one value column, and the reader
    # bounds labels by the column count; split tags carry the ID/OOD side
    rows = [
        replace(rec, label=-1, logits=(float(score),))
        for rec, score in zip(records, scores)
    ]
    write_logit_csv(path, rows, column_prefix="score")


# --- subcommands --------------------------------------------------------------

def _cmd_score(args) -> dict:
    if args.method != "odin":
        if args.model is not None:
            raise UsageError("--model only applies to --method odin")
        if args.epsilon is not None:
            raise UsageError("--epsilon only applies to --method odin")
    if args.method == "msp" and args.temperature is not None:
        raise UsageError("--temperature does not apply to --method msp")

    loader = _load_features if args.method == "odin" else _load_records
    records = loader(args.logits, args.prefix)
    values = [np.asarray(rec.logits) for rec in records]

    if args.method == "msp":
        scores = [msp_score(v) for v in values]
        report = {"method": "msp", "n": len(records),
                  "scores": _score_records(records, scores)}
    elif args.method == "energy":
        temperature = 1.0 if args.temperature is None else args.temperature
        scores = [energy_score(v, temperature) for v in values]
        report = {"method": "energy", "temperature": temperature,
                  "n": len(records),
                  "scores": _score_records(records, scores)}
    else:
        if args.model is None:
            raise UsageError("--method odin requires --model")
        if (args.temperature is None) != (args.epsilon is None):
            raise UsageError("give both --temperature and --epsilon, "
                             "or neither to tune over the built-in grid")
        model = load_model(args.model)
        xs = np.stack(values)
        if args.temperature is not None:
            config = OdinConfig(args.temperature, args.epsilon)
            scores = [odin_score(model, x, config) for x in xs]
            report = {"method": "odin", "mode": "fixed",
                      "temperature": config.temperature,
                      "epsilon": config.epsilon, "n": len(records),
                      "scores": _score_records(records, scores)}
        else:
            # no explicit setting: tune over the built-in grid against the
            # rows tagged split=ood, maximizing AUROC
            is_id = [rec.split is not Split.OOD for rec in records]
            if all(is_id) or not any(is_id):
                raise MissingClass(
                    "grid tuning needs both ood-tagged and in-distribution rows"
                )
            table = []
            best = None
            for temperature in ODIN_GRID_TEMPERATURES:
                for epsilon in ODIN_GRID_EPSILONS:
                    config = OdinConfig(temperature, epsilon)
                    scores = [odin_score(model, x, config) for x in xs]
                    samples = [
                        ScoredSample(rec.id, s, keep)
                        for rec, s, keep in zip(records, scores, is_id)
                    ]
                    auroc = ood_metrics(samples).auroc
                    table.append({"temperature": temperature,
                                  "epsilon": epsilon, "auroc": auroc})
                    if best is None or auroc > best[0]:
                        best = (auroc, config, scores)
            _, config, scores = best
            report = {"method": "odin", "mode": "grid",
                      "temperature": config.temperature,
                      "epsilon": config.epsilon, "grid": table,
                      "n": len(records),
                      "scores": _score_records(records, scores)}

    if args.scores_out:
        _write_scores_csv(args.scores_out, records, [r["score"] for r in report["scores"]])
    return report


def _cmd_ood_eval(args) -> dict:
    records = _load_records(args.scores, args.prefix)
    raw = _single_column(records, args.scores)
    if args.flip:
        raw = -raw
    samples = [
        ScoredSample(rec.id, float(s), rec.split is not Split.OOD)
        for rec, s in zip(records, raw)
    ]
    report = ood_metrics(samples).to_dict()
    report["flipped"] = bool(args.flip)
    return report


def _cmd_sweep(args) -> dict:
    records = _load_records(args.scores, args.prefix)
    conf = _single_column(records, args.scores)
    taus = DEFAULT_TAUS if args.taus is None else args.taus
    points = threshold_sweep(conf, taus)
    return {"n": len(records), "taus": list(taus),
            "points": [p.to_dict() for p in points]}


def _cmd_cls_eval(args) -> dict:
    records = _load_records(args.logits, args.prefix)
    labels = _require_labels(records, args.logits)
    logits = np.asarray([rec.logits for rec in records])
    preds = logits.argmax(axis=1)
    n_classes = logits.shape[1]
    cm = confusion(labels, preds, n_classes)
    rep = prf_report(cm)
    probs = np.stack([softmax(row) for row in logits])
    ce = cross_entropy(probs, labels, args.label_smoothing)
    return {
        "n": len(records),
        "n_classes": n_classes,
        "cross_entropy": ce,
        "label_smoothing": args.label_smoothing,
        "confusion": cm.tolist(),
        **rep.to_dict(),
    }


def _read_class_map(path: str) -> dict[str, str]:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "id,class":
        raise InputFormatError(f"{path}: expected header 'id,class'")
    mapping = {}
    for row_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise InputFormatError(f"{path}:{row_no}: expected two fields")
        mapping[parts[0].strip()] = parts[1].strip()
    return mapping


def _cmd_seg_eval(args) -> dict:
    pred_dir = Path(args.pred)
    gt_dir = Path(args.gt)
    pred_names = sorted(p.name for p in pred_dir.glob("*.pgm"))
    gt_names = sorted(p.name for p in gt_dir.glob("*.pgm"))
    if not pred_names:
        raise EmptyInput(f"{pred_dir}: no .pgm masks")
    if pred_names != gt_names:
        missing = set(pred_names) ^ set(gt_names)
        raise InputFormatError(
            f"mask directories disagree on file names: {sorted(missing)}"
        )

    class_of = _read_class_map(args.classes) if args.classes else None
    per_image = []
    for name in pred_names:
        stem = Path(name).stem
        if class_of is not None and stem not in class_of:
            raise InputFormatError(f"{args.classes}: no class for {stem!r}")
        metrics = mask_metrics(read_pgm(pred_dir / name), read_pgm(gt_dir / name))
        per_image.append((stem, metrics))

    summary = dataset_summary([m for _, m in per_image],
                              n_boot=args.boot, seed=args.seed)
    report = {
        "n_images": len(per_image),
        "global": summary.to_dict(),
        "per_image": [
            {"id": stem, **{k: v for k, v in zip(
                ("iou", "dice", "precision", "recall", "pixel_acc"),
                m.as_array().tolist())}}
            for stem, m in per_image
        ],
    }
    if class_of is not None:
        by_class: dict[str, list] = {}
        for stem, m in per_image:
            by_class.setdefault(class_of[stem], []).append(m)
        report["per_class"] = {
            cls: dataset_summary(rows, n_boot=args.boot, seed=args.seed).to_dict()
            for cls, rows in sorted(by_class.items())
        }
    return report


def _correctness(records, path: str) -> dict[str, bool]:
    labels = _require_labels(records, path)
    out: dict[str, bool] = {}
    for rec, label in zip(records, labels):
        if rec.id in out:
            raise InputFormatError(f"{path}: duplicate id {rec.id!r}")
        out[rec.id] = int(np.argmax(rec.logits)) == int(label)
    return out


def _cmd_mcnemar(args) -> dict:
    counts = (args.n11, args.n10, args.n01, args.n00)
    have_counts = any(c is not None for c in counts)
    have_files = args.pred_a is not None or args.pred_b is not None
    if have_counts == have_files:
        raise UsageError("give the four --nXY counts or two prediction files")
    if have_counts:
        if any(c is None for c in counts):
            raise UsageError("all four of --n11 --n10 --n01 --n00 are required")
        outcome = PairedOutcome(*counts)
    else:
        if args.pred_a is None or args.pred_b is None:
            raise UsageError("both --pred-a and --pred-b are required")
        correct_a = _correctness(_load_records(args.pred_a, args.prefix), args.pred_a)
        correct_b = _correctness(_load_records(args.pred_b, args.prefix), args.pred_b)
        if set(correct_a) != set(correct_b):
            raise InputFormatError("prediction files disagree on record ids")
        ordered = list(correct_a)  # file A's row order
        outcome = paired_outcomes(
            [correct_a[i] for i in ordered], [correct_b[i] for i in ordered]
        )
    result = mcnemar(outcome)
    ci = paired_acc_diff_ci(outcome)
    return {
        "n11": outcome.n11, "n10": outcome.n10,
        "n01": outcome.n01, "n00": outcome.n00,
        "n": outcome.n,
        "chi2": result.chi2, "p": result.p, "degenerate": result.degenerate,
        "delta": ci.delta, "se": ci.se, "ci": [ci.lo, ci.hi],
    }


def _cmd_bootstrap(args) -> dict:
    path = Path(args.values)
    values = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        token = line.strip()
        if not token:
            continue
        try:
            value = float(token)
        except ValueError:
            raise InputFormatError(f"{path}:{line_no}: not a number: {token!r}")
        if not math.isfinite(value):
            raise InputFormatError(f"{path}:{line_no}: non-finite value")
        values.append(value)
    if not values:
        raise EmptyInput(f"{path}: no values")
    statistic = {"mean": np.mean, "median": np.median}[args.stat]
    result = percentile_bootstrap(values, lambda a: float(statistic(a)),
                                  n_boot=args.b, seed=args.seed)
    return {"statistic": args.stat, "n": len(values), **result.to_dict()}


def _cmd_dedup(args) -> dict:
    root = Path(args.images)
    files = sorted(p for p in root.iterdir()
                   if p.suffix in (".ppm", ".pgm") and p.is_file())
    if not files:
        raise EmptyInput(f"{root}: no .ppm or .pgm files")
    hashes = {}
    for p in files:
        image = read_ppm(p) if p.suffix == ".ppm" else grayscale_as_rgb(read_pgm_values(p))
        hashes[p.name] = phash64(image)
    return cluster_near_duplicates(hashes, max_dist=args.max_dist).to_dict()


SPLIT_TAGS = ("train", "val", "test")


def _cmd_split(args) -> dict:
    if len(args.ratios) != len(SPLIT_TAGS):
        raise UsageError("--ratios takes exactly three comma-separated values")
    records = _load_features(args.labels, args.prefix)
    labels = _require_labels(records, args.labels)
    assignment = stratified_split(labels, args.ratios, seed=args.seed)
    counts = {tag: int((assignment == i).sum()) for i, tag in enumerate(SPLIT_TAGS)}
    per_class = []
    for cls in np.unique(labels):
        row = {"label": int(cls)}
        for i, tag in enumerate(SPLIT_TAGS):
            row[tag] = int(((labels == cls) & (assignment == i)).sum())
        per_class.append(row)
    return {
        "ratios": list(args.ratios),
        "n": len(records),
        "counts": counts,
        "per_class": per_class,
        "assignment": [
            {"id": rec.id, "split": SPLIT_TAGS[part]}
            for rec, part in zip(records, assignment)
        ],
    }


def _cmd_folds(args) -> dict:
    records = _load_features(args.labels, args.prefix)
    labels = _require_labels(records, args.labels)
    plan = nested_fold_plan(labels, args.outer, args.inner, seed=args.seed)
    audit = audit_fold_plan(plan, labels)
    ids = [rec.id for rec in records]
    return {
        "n_samples": plan.n_samples,
        "n_outer": plan.n_outer,
        "n_inner": plan.n_inner,
        "audit": audit,
        "audit_passed": all(audit.values()),
        "outer_test": [[ids[i] for i in fold] for fold in plan.outer_test],
        "inner_val": [
            [[ids[i] for i in val] for val in folds] for folds in plan.inner_val
        ],
    }


def _cmd_nested_cv(args) -> dict:
    records = _load_features(args.data, args.prefix)
    labels = _require_labels(records, args.data)
    xs = np.asarray([rec.logits for rec in records])
    grid = HyperGrid(
        head_lrs=args.head_lrs,
        weight_decays=args.weight_decays,
        label_smoothings=args.smoothings,
        backbone_lrs=args.backbone_lrs,
        mixup_alphas=args.mixups,
        top_k=args.top_k,
    )
    result = nested_cv_run(grid, xs, labels, n_outer=args.outer,
                           n_inner=args.inner, epochs=args.epochs,
                           batch_size=args.batch_size,
                           hidden_dim=args.hidden, seed=args.seed)
    return result.to_dict()


def _cmd_pseudomask(args) -> dict:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out)
    files = sorted(p for p in in_dir.glob("*.ppm") if p.is_file())
    if not files:
        raise EmptyInput(f"{in_dir}: no .ppm images")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for p in files:
        image = read_ppm(p)
        result = grabcut(image, seed=args.seed, n_iter=args.iters,
                         n_components=args.k, smoothness=args.smoothness)
        mask = result.mask
        ops = [("close", morph_close, args.close), ("open", morph_open, args.open)]
        if not args.close_first:
            ops.reverse()
        for _, op, radius in ops:
            if radius > 0:
                mask = op(mask, radius)
        write_pgm(out_dir / (p.stem + ".pgm"), mask)
        height, width = mask.pixels.shape
        rows.append({
            "id": p.stem,
            "mask": p.stem + ".pgm",
            "degenerate": result.degenerate,
            "energies": list(result.energies),
            "foreground_fraction": float(mask.foreground_count() / (height * width)),
            "box": result.box.to_dict(),
        })
    return {
        "n_images": len(rows),
        "iters": args.iters,
        "k": args.k,
        "smoothness": args.smoothness,
        "open_radius": args.open,
        "close_radius": args.close,
        "close_first": bool(args.close_first),
        "images": rows,
    }


def _cmd_demo(args) -> dict:
    return run_demo(args.seed)


# --- parser -------------------------------------------------------------------

class UsageError(Exception):
    """Flag combination errors detected after parsing; exits with code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1
        self.exit(1, f"{self.prog}: error: {message}\n")


LOGIT_CSV_HELP = (
    "CSV layout: header id,split,label,%s_0..%s_{C-1}; split is one of "
    "train/val/test/ood; an empty label field means unlabeled."
)


def build_parser() -> argparse.ArgumentParser:
    seed_parent = _Parser(add_help=False)
    seed_parent.add_argument("--seed", type=_seed_value, default=42,
                             help="RNG seed, unsigned 64-bit (default 42)")
    out_parent = _Parser(add_help=False)
    out_parent.add_argument("--out", default=None, metavar="PATH",
                            help="write the JSON report here (default stdout)")

    parser = _Parser(
        prog="freshkit",
        description="Deterministic desk-scale pipeline tools: confidence "
                    "scoring, detector and classifier metrics, paired "
                    "significance tests, dataset hygiene, and pseudo-mask "
                    "generation.",
        epilog="Exit codes: 0 ok, 1 usage, 2 malformed input, 3 numeric failure.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, description, parents=(seed_parent, out_parent)):
        p = sub.add_parser(name, parents=list(parents), help=help_text,
                           description=description)
        p.set_defaults(func=func)
        return p

    p = add("score", _cmd_score, "confidence scores from a logit or feature CSV",
            "Compute per-record confidence scores. For msp and energy the "
            "numeric columns are logits; for odin they are model input "
            "features and --model supplies the classifier. "
            + LOGIT_CSV_HELP % ("logit", "logit"))
    p.add_argument("--method", required=True, choices=("msp", "energy", "odin"))
    p.add_argument("--logits", required=True, metavar="CSV",
                   help="input records (see description for the layout)")
    p.add_argument("--prefix", default="logit",
                   help="numeric column prefix (default logit)")
    p.add_argument("--temperature", type=float, default=None,
                   help="softmax temperature; energy default 1.0; for odin, "
                        "give neither --temperature nor --epsilon to tune "
                        "over the built-in grid (T in 1/10/100/1000, eps in "
                        "0/0.001/0.002/0.004) against the split=ood rows")
    p.add_argument("--epsilon", type=float, default=None,
                   help="odin input perturbation size; set together with "
                        "--temperature")
    p.add_argument("--model", metavar="JSON",
                   help="classifier parameters for odin (flat JSON layout)")
    p.add_argument("--scores-out", metavar="CSV",
                   help="also write id,split,label,score_0 rows here")

    p = add("ood-eval", _cmd_ood_eval, "AUROC / AUPR / FPR@95TPR from a score CSV",
            "Detector metrics for one score per record; rows tagged "
            "split=ood are the out-of-distribution side, all others count "
            "as in-distribution. " + LOGIT_CSV_HELP % ("score", "score"))
    p.add_argument("--scores", required=True, metavar="CSV")
    p.add_argument("--prefix", default="score")
    p.add_argument("--flip", action="store_true",
                   help="scores are oriented smaller = more in-distribution "
                        "(native energy); negate them first")

    p = add("sweep", _cmd_sweep, "abstention coverage/rejection threshold sweep",
            "Coverage (fraction of records with confidence >= tau) and "
            "rejection at each threshold; tau 0.5 is marked as the "
            "reference operating point. " + LOGIT_CSV_HELP % ("score", "score"))
    p.add_argument("--scores", required=True, metavar="CSV")
    p.add_argument("--prefix", default="score")
    p.add_argument("--taus", type=_float_list, default=None,
                   help="comma-separated thresholds (default "
                        + ",".join(str(t) for t in DEFAULT_TAUS) + ")")

    p = add("cls-eval", _cmd_cls_eval, "confusion matrix and per-class P/R/F1",
            "Classifier metrics from a labeled logit CSV; predictions are "
            "per-row argmax. Every row must carry a label. "
            + LOGIT_CSV_HELP % ("logit", "logit"))
    p.add_argument("--logits", required=True, metavar="CSV")
    p.add_argument("--prefix", default="logit")
    p.add_argument("--label-smoothing", type=float, default=0.0,
                   help="smoothing for the reported cross entropy (default 0)")

    p = add("seg-eval", _cmd_seg_eval, "mask overlap metrics over two directories",
            "Per-image IoU/Dice/precision/recall/pixel accuracy between "
            "equally named binary PGM (P5, maxval 255, >=128 = foreground) "
            "masks, with bootstrap confidence intervals; --classes adds "
            "per-class summaries from a CSV with header id,class keyed by "
            "file stem.")
    p.add_argument("--pred", required=True, metavar="DIR")
    p.add_argument("--gt", required=True, metavar="DIR")
    p.add_argument("--classes", metavar="CSV", default=None)
    p.add_argument("--boot", type=int, default=5000,
                   help="bootstrap replicates (default 5000)")

    p = add("mcnemar", _cmd_mcnemar, "paired test between two classifiers",
            "Continuity-corrected McNemar test plus the paired accuracy "
            "difference with a 95% Wald interval. Give the four pair "
            "counts directly, or two labeled logit CSVs whose rows are "
            "matched by id (correctness = argmax equals label). "
            + LOGIT_CSV_HELP % ("logit", "logit"))
    p.add_argument("--n11", type=int, default=None, help="both correct")
    p.add_argument("--n10", type=int, default=None, help="only A correct")
    p.add_argument("--n01", type=int, default=None, help="only B correct")
    p.add_argument("--n00", type=int, default=None, help="both wrong")
    p.add_argument("--pred-a", metavar="CSV", default=None)
    p.add_argument("--pred-b", metavar="CSV", default=None)
    p.add_argument("--prefix", default="logit")

    p = add("bootstrap", _cmd_bootstrap, "percentile bootstrap CI of a statistic",
            "Reads one finite number per line (blank lines skipped) and "
            "reports the statistic with a 95% percentile bootstrap "
            "interval, linear interpolation between order statistics.")
    p.add_argument("--values", required=True, metavar="TXT")
    p.add_argument("--stat", choices=("mean", "median"), default="mean")
    p.add_argument("--b", type=int, default=4000,
                   help="bootstrap replicates (default 4000)")

    p = add("dedup", _cmd_dedup, "perceptual-hash near-duplicate clusters",
            "Hashes every .ppm (P6) and .pgm (P5) file in a directory with "
            "a 64-bit DCT perceptual hash and clusters ids whose Hamming "
            "distance is within --max-dist by transitive closure; the "
            "lexicographically smallest id of each cluster is kept.")
    p.add_argument("--images", required=True, metavar="DIR")
    p.add_argument("--max-dist", type=int, default=10,
                   help="Hamming radius in bits, of 64 (default 10)")

    p = add("split", _cmd_split, "stratified train/val/test assignment",
            "Per-class largest-remainder allocation into train/val/test. "
            "Every row must carry a label; numeric columns are features "
            "and do not bound the label range. "
            + LOGIT_CSV_HELP % ("x", "x"))
    p.add_argument("--labels", required=True, metavar="CSV")
    p.add_argument("--prefix", default="x")
    p.add_argument("--ratios", type=_float_list, default=(0.70, 0.15, 0.15),
                   help="three comma-separated fractions summing to 1 "
                        "(default 0.70,0.15,0.15)")

    p = add("folds", _cmd_folds, "stratified nested fold plan with leakage audit",
            "Builds the outer/inner fold layout used for nested "
            "cross-validation and reports the audit that proves no "
            "held-out id leaks into model selection. Numeric columns "
            "are features and do not bound the label range. "
            + LOGIT_CSV_HELP % ("x", "x"))
    p.add_argument("--labels", required=True, metavar="CSV")
    p.add_argument("--prefix", default="x")
    p.add_argument("--outer", type=int, default=5)
    p.add_argument("--inner", type=int, default=3)

    p = add("nested-cv", _cmd_nested_cv, "nested cross-validated model selection",
            "Two-stage hyperparameter search on the inner folds of each "
            "outer fold, then retrain and evaluate on the outer test ids; "
            "numeric columns are model input features and do not bound "
            "the label range. " + LOGIT_CSV_HELP % ("x", "x"))
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--prefix", default="x")
    p.add_argument("--outer", type=int, default=5)
    p.add_argument("--inner", type=int, default=3)
    p.add_argument("--hidden", type=int, default=8,
                   help="hidden width of the small classifier (default 8)")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--head-lrs", type=_float_list, default=(1e-3, 3e-3))
    p.add_argument("--weight-decays", type=_float_list, default=(1e-4, 1e-1))
    p.add_argument("--smoothings", type=_float_list, default=(0.0, 0.1))
    p.add_argument("--backbone-lrs", type=_float_list, default=(1e-5, 3e-4))
    p.add_argument("--mixups", type=_float_list, default=(0.0, 0.2))
    p.add_argument("--top-k", type=int, default=2,
                   help="stage-1 survivors carried into stage 2 (default 2)")

    p = add("pseudomask", _cmd_pseudomask, "box-seeded min-cut masks for a directory",
            "Runs iterative box-initialized color-model min-cut "
            "segmentation on every .ppm (P6) image and writes one binary "
            "PGM mask per image into --out; the JSON report goes to "
            "stdout or --report.", parents=(seed_parent,))
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR")
    p.add_argument("--out", required=True, metavar="DIR",
                   help="directory that receives the generated masks")
    p.add_argument("--iters", type=int, default=5,
                   help="refinement iterations (default 5)")
    p.add_argument("--k", type=int, default=5,
                   help="mixture components per side (default 5)")
    p.add_argument("--lambda", dest="smoothness", type=float, default=50.0,
                   help="smoothness weight on neighbor disagreement (default 50)")
    p.add_argument("--open", type=int, default=1,
                   help="opening radius, 0 disables (default 1)")
    p.add_argument("--close", type=int, default=1,
                   help="closing radius, 0 disables (default 1)")
    p.add_argument("--close-first", action="store_true",
                   help="apply closing before opening")
    p.add_argument("--report", metavar="PATH", default=None,
                   help="write the JSON report here (default stdout)")

    add("demo", _cmd_demo, "end-to-end pipeline walk on synthetic blobs",
        "Generates four well-separated Gaussian classes plus a disjoint "
        "out-of-distribution blob, then runs split, nested "
        "cross-validation, a final fit, all three detectors, detector "
        "metrics, an abstention sweep, and a paired significance test, "
        "emitting one consolidated report.")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = args.func(args)
    except UsageError as exc:
        print(f"freshkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (InputFormatError, EmptyInput, OSError) as exc:
        print(f"freshkit {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2
    except ComputeError as exc:
        print(f"freshkit {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3

    envelope = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "seed": args.seed,
        "report": report,
    }
    text = render_json(envelope) + "\n"
    dest = args.report if args.command == "pseudomask" else args.out
    try:
        if dest:
            Path(dest).write_text(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"freshkit {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
