"""End-to-end pipeline walk on synthetic data.

Four well-separated Gaussian blobs in the plane stand in for the
in-distribution classes. A fifth blob, centered in the gap between them and
excluded from training, plays the out-of-distribution stream. The run
mirrors the full pipeline: stratified split, nested cross-validated model
selection, a final fit, confidence scoring with all three detectors,
detector metrics, an abstention sweep, and a paired significance test
between the selected configuration and a deliberately crippled one.

Everything is deterministic in the single seed; the returned report contains
only plain Python scalars and containers so it serializes as-is.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict, replace

import numpy as np

from .cls_eval import accuracy
from .hygiene import (
    HyperGrid,
    inner_select,
    nested_cv_run,
    nested_fold_plan,
    stratified_split,
)
from .ood_eval import DEFAULT_TAUS, ScoredSample, ood_metrics, threshold_sweep
from .scoring import OdinConfig, energy_score, msp_score, odin_score
from .stats import mcnemar, paired_acc_diff_ci, paired_outcomes
from .tiny_model import TrainConfig, derive_seed, forward, init_model, train

N_CLASSES = 4
N_PER_CLASS = 150
N_OOD = 150
HIDDEN_DIM = 8
ODIN_TEMPERATURE = 1000.0
ODIN_EPSILON = 0.001

DEMO_GRID = HyperGrid(
    head_lrs=(0.0, 0.1),
    weight_decays=(0.0, 1e-4),
    label_smoothings=(0.0,),
    backbone_lrs=(0.0, 0.05),
    mixup_alphas=(0.0,),
    top_k=2,
)


def make_blobs(seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (id_features, id_labels, ood_features).

    Class blobs sit at the four corners (+-3, +-3) with spread 0.5; the
    out-of-distribution blob sits at the origin with spread 0.3, far inside
    the region every decision boundary must cross.
    """
    rng = np.random.default_rng(derive_seed(seed, 0))
    centers = np.array([(-3.0, -3.0), (-3.0, 3.0), (3.0, -3.0), (3.0, 3.0)])
    xs = np.concatenate([
        rng.normal(center, 0.5, size=(N_PER_CLASS, 2)) for center in centers
    ])
    labels = np.repeat(np.arange(N_CLASSES), N_PER_CLASS)
    ood = rng.normal(0.0, 0.3, size=(N_OOD, 2))
    return xs, labels, ood


def _majority_config(configs) -> TrainConfig:
    counts = Counter(configs)
    best_count = max(counts.values())
    for config in configs:  # earliest fold wins ties
        if counts[config] == best_count:
            return config
    raise AssertionError("unreachable: configs is nonempty")


def run_demo(seed: int = 42) -> dict:
    xs, labels, ood = make_blobs(seed)

    assignment = stratified_split(labels, (0.70, 0.15, 0.15), seed=seed)
    train_ids = np.flatnonzero(assignment == 0)
    val_ids = np.flatnonzero(assignment == 1)
    test_ids = np.flatnonzero(assignment == 2)

    cv = nested_cv_run(DEMO_GRID, xs[train_ids], labels[train_ids],
                       n_outer=5, n_inner=3, epochs=15, batch_size=32,
                       hidden_dim=HIDDEN_DIM, seed=seed)

    # stage tables for fold 0, to pick the weakest stage-1 candidate
    plan = nested_fold_plan(labels[train_ids], 5, 3, seed=seed)
    fold0 = inner_select(DEMO_GRID, xs[train_ids], labels[train_ids], plan, 0,
                         epochs=15, batch_size=32, hidden_dim=HIDDEN_DIM,
                         seed=seed)
    weakest = min(fold0.stage1, key=lambda c: c.mean_accuracy).config

    best = _majority_config(cv.selected)
    fit_ids = np.concatenate([train_ids, val_ids])

    def fit(config: TrainConfig, tag: int):
        model = init_model(2, HIDDEN_DIM, N_CLASSES, seed=derive_seed(seed, tag, 0))
        fitted, _ = train(model, xs[fit_ids], labels[fit_ids],
                          replace(config, seed=derive_seed(seed, tag, 1)))
        return fitted

    model = fit(best, 1)
    rival = fit(weakest, 2)

    test_x = xs[test_ids]
    test_y = labels[test_ids]
    test_pred = forward(model, test_x).argmax(axis=1)
    test_accuracy = accuracy(test_y, test_pred)

    odin_config = OdinConfig(temperature=ODIN_TEMPERATURE, epsilon=ODIN_EPSILON)

    def detector_scores(points: np.ndarray, is_id: bool, prefix: str):
        logits = forward(model, points)
        rows = {
            "msp": [msp_score(row) for row in logits],
            # detectors share the larger-is-ID orientation, so energy enters negated
            "energy": [-energy_score(row) for row in logits],
            "odin": [odin_score(model, p, odin_config) for p in points],
        }
        return {
            method: [
                ScoredSample(f"{prefix}{i}", float(s), is_id)
                for i, s in enumerate(values)
            ]
            for method, values in rows.items()
        }

    id_scores = detector_scores(test_x, True, "id")
    ood_scores = detector_scores(ood, False, "ood")
    ood_reports = {
        method: ood_metrics(id_scores[method] + ood_scores[method]).to_dict()
        for method in ("msp", "energy", "odin")
    }

    stream_conf = [s.score for s in id_scores["msp"] + ood_scores["msp"]]
    sweep = threshold_sweep(stream_conf, DEFAULT_TAUS)

    rival_pred = forward(rival, test_x).argmax(axis=1)
    outcome = paired_outcomes(test_pred == test_y, rival_pred == test_y)
    test_result = mcnemar(outcome)
    ci = paired_acc_diff_ci(outcome)

    return {
        "data": {
            "n_classes": N_CLASSES,
            "n_id": int(xs.shape[0]),
            "n_ood": int(ood.shape[0]),
            "input_dim": 2,
        },
        "split_counts": {
            "train": int(train_ids.size),
            "val": int(val_ids.size),
            "test": int(test_ids.size),
        },
        "nested_cv": cv.to_dict(),
        "final_config": asdict(best),
        "test_accuracy": test_accuracy,
        "odin_config": {"temperature": ODIN_TEMPERATURE, "epsilon": ODIN_EPSILON},
        "ood": ood_reports,
        "sweep": [p.to_dict() for p in sweep],
        "mcnemar": {
            "config_a": asdict(best),
            "config_b": asdict(weakest),
            "n11": outcome.n11,
            "n10": outcome.n10,
            "n01": outcome.n01,
            "n00": outcome.n00,
            "chi2": test_result.chi2,
            "p": test_result.p,
            "degenerate": test_result.degenerate,
            "delta": ci.delta,
            "ci": [ci.lo, ci.hi],
        },
    }
