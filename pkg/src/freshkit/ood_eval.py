"""Detector metrics over scored ID/OOD samples, plus the abstention sweep.

AUROC uses the rank statistic with average ranks, which equals brute-force
pair counting with half credit for ties. AUPR treats ID as the positive
class and integrates precision over recall step-wise at distinct score
thresholds, with no interpolation. FPR@95TPR is the smallest false positive
rate among thresholds (accept when score >= t) whose ID true positive rate
is at least 0.95.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, MissingClass

__all__ = [
    "DEFAULT_TAUS",
    "ScoredSample",
    "OodReport",
    "SweepPoint",
    "ood_metrics",
    "threshold_sweep",
]

# reference operating point 0.5 sits in the middle of this grid
DEFAULT_TAUS = (0.2, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7, 0.8)
REFERENCE_TAU = 0.5


@dataclass(frozen=True)
class ScoredSample:
    """One detector output; is_id marks ground-truth in-distribution."""

    id: str
    score: float
    is_id: bool


@dataclass(frozen=True)
class OodReport:
    auroc: float
    aupr_id: float
    fpr_at_95_tpr: float
    n_id: int
    n_ood: int

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "aupr_id": self.aupr_id,
            "fpr_at_95_tpr": self.fpr_at_95_tpr,
            "n_id": self.n_id,
            "n_ood": self.n_ood,
        }


@dataclass(frozen=True)
class SweepPoint:
    """Coverage and rejection at one confidence threshold."""

    tau: float
    coverage: float
    rejection: float
    reference: bool

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "coverage": self.coverage,
            "rejection": self.rejection,
            "reference": self.reference,
        }


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the group average (multiples of 0.5)."""
    order = np.argsort(scores, kind="mergesort")
    sorted_vals = scores[order]
    n = scores.shape[0]
    starts = np.ones(n, dtype=bool)
    starts[1:] = sorted_vals[1:] != sorted_vals[:-1]
    group = np.cumsum(starts) - 1
    firsts = np.flatnonzero(starts)
    counts = np.diff(np.append(firsts, n))
    group_avg = firsts + (counts + 1) / 2.0
    ranks = np.empty(n)
    ranks[order] = group_avg[group]
    return ranks


def ood_metrics(samples) -> OodReport:
    """AUROC, AUPR with ID positive, and FPR@95TPR for a scored sample set."""
    samples = list(samples)
    if not samples:
        raise EmptyInput("no scored samples")
    scores = np.asarray([s.score for s in samples], dtype=np.float64)
    is_id = np.asarray([s.is_id for s in samples], dtype=bool)
    n_id = int(is_id.sum())
    n_ood = int((~is_id).sum())
    if n_id == 0 or n_ood == 0:
        raise MissingClass(f"need both sides, got {n_id} ID and {n_ood} OOD")

    ranks = _average_ranks(scores)
    auroc = float((ranks[is_id].sum() - n_id * (n_id + 1) / 2.0) / (n_id * n_ood))

    # walk distinct thresholds from high to low; a threshold cannot split ties
    desc = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[desc]
    sorted_id = is_id[desc]
    boundary = np.ones(len(samples), dtype=bool)
    boundary[:-1] = sorted_scores[:-1] != sorted_scores[1:]
    tp = np.cumsum(sorted_id)[boundary].astype(np.float64)
    accepted = (np.arange(len(samples)) + 1)[boundary].astype(np.float64)
    fp = accepted - tp

    precision = tp / accepted
    recall = tp / n_id
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    aupr = float(((recall - prev_recall) * precision).sum())

    tpr = recall
    fpr = fp / n_ood
    eligible = tpr >= 0.95
    fpr95 = float(fpr[eligible].min())

    return OodReport(auroc, aupr, fpr95, n_id, n_ood)


def threshold_sweep(confidences, taus=DEFAULT_TAUS) -> list[SweepPoint]:
    """Coverage (fraction with confidence >= tau) and rejection per threshold.

    rejection is computed as 1.0 - coverage, which makes
    coverage + rejection == 1.0 hold exactly in float64.
    """
    conf = np.asarray(confidences, dtype=np.float64)
    if conf.ndim != 1 or conf.size == 0:
        raise EmptyInput("need at least one confidence value")
    taus = tuple(taus)
    if not taus:
        raise EmptyInput("need at least one threshold")
    n = conf.size
    points = []
    for tau in taus:
        coverage = float((conf >= tau).sum() / n)
        points.append(SweepPoint(
            tau=float(tau),
            coverage=coverage,
            rejection=1.0 - coverage,
            reference=(tau == REFERENCE_TAU),
        ))
    return points
