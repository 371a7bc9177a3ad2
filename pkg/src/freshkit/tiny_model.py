"""A tiny differentiable classifier with exact analytic gradients.

The network is either a bare linear map (hidden_dim == 0) or one tanh hidden
layer. It exists so gradient-based procedures (ODIN perturbation, SGD
training, the nested CV search) run in seconds on synthetic data while the
gradients stay simple enough to check against finite differences.

Parameter groups: the backbone is the input->hidden block (w_in, b_in), the
head is the output block (w_out, b_out). A linear model has an empty
backbone. Group learning rates scale both the gradient step and the
decoupled weight decay, so a zero learning rate freezes its group exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import BadLabelIndex, DimensionMismatch, EmptyDataset

__all__ = [
    "TinyClassifier",
    "TrainConfig",
    "ParamGrads",
    "GradResult",
    "EpochStats",
    "init_model",
    "forward",
    "smooth_targets",
    "mixup",
    "grads",
    "grads_from_targets",
    "nll_input_gradient",
    "train",
    "model_to_json",
    "model_from_json",
    "load_model",
    "save_model",
    "derive_seed",
]


@dataclass(frozen=True, eq=False)
class TinyClassifier:
    """Parameters of a linear or one-hidden-layer tanh network."""

    w_in: np.ndarray   # (H, D); (0, D) when there is no hidden layer
    b_in: np.ndarray   # (H,)
    w_out: np.ndarray  # (C, H) or (C, D) when H == 0
    b_out: np.ndarray  # (C,)

    def __post_init__(self) -> None:
        w_in = np.asarray(self.w_in, dtype=np.float64)
        b_in = np.asarray(self.b_in, dtype=np.float64)
        w_out = np.asarray(self.w_out, dtype=np.float64)
        b_out = np.asarray(self.b_out, dtype=np.float64)
        if w_in.ndim != 2 or b_in.ndim != 1 or w_out.ndim != 2 or b_out.ndim != 1:
            raise DimensionMismatch("parameter arrays have wrong rank")
        hidden = w_in.shape[0]
        if b_in.shape[0] != hidden or w_out.shape[1] != (hidden if hidden else w_in.shape[1]):
            raise DimensionMismatch("parameter shapes are inconsistent")
        if w_out.shape[0] != b_out.shape[0] or w_out.shape[0] < 1:
            raise DimensionMismatch("head shapes are inconsistent")
        for name, arr in (("w_in", w_in), ("b_in", b_in), ("w_out", w_out), ("b_out", b_out)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_in.shape[0]

    @property
    def n_classes(self) -> int:
        return self.w_out.shape[0]


class ParamGrads(NamedTuple):
    w_in: np.ndarray
    b_in: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray


class GradResult(NamedTuple):
    loss: float
    params: ParamGrads
    inputs: np.ndarray


@dataclass(frozen=True)
class EpochStats:
    loss: float
    accuracy: float


@dataclass(frozen=True)
class TrainConfig:
    """Plain SGD settings; decoupled weight decay skips biases."""

    epochs: int = 30
    batch_size: int = 32
    head_lr: float = 1e-3
    backbone_lr: float = 0.0
    weight_decay: float = 0.0
    label_smoothing: float = 0.0
    mixup_alpha: float = 0.0
    seed: int = 42


def derive_seed(*parts: int) -> int:
    """Fold integer parts into one 64-bit seed, stable across runs.

    The part count is mixed in first: SeedSequence pads entropy with zeros,
    so without it (1,) and (1, 0) would collide.
    """
    state = np.random.SeedSequence([len(parts), *parts]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def init_model(input_dim: int, hidden_dim: int, n_classes: int, seed: int) -> TinyClassifier:
    """Random init: weights N(0, 1/fan_in), biases zero."""
    if input_dim < 1 or n_classes < 1 or hidden_dim < 0:
        raise DimensionMismatch(
            f"bad architecture ({input_dim}, {hidden_dim}, {n_classes})"
        )
    rng = np.random.default_rng(seed)
    w_in = rng.normal(0.0, 1.0 / np.sqrt(input_dim), size=(hidden_dim, input_dim))
    b_in = np.zeros(hidden_dim)
    fan = hidden_dim if hidden_dim else input_dim
    w_out = rng.normal(0.0, 1.0 / np.sqrt(fan), size=(n_classes, fan))
    b_out = np.zeros(n_classes)
    return TinyClassifier(w_in, b_in, w_out, b_out)


def _as_batch(x: np.ndarray, input_dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != input_dim:
        raise DimensionMismatch(f"inputs have shape {np.shape(x)}, expected (*, {input_dim})")
    return arr, single


def forward(model: TinyClassifier, x: np.ndarray) -> np.ndarray:
    """Logits for one sample (D,) -> (C,) or a batch (N, D) -> (N, C)."""
    xs, single = _as_batch(x, model.input_dim)
    if model.hidden_dim:
        hidden = np.tanh(xs @ model.w_in.T + model.b_in)
        logits = hidden @ model.w_out.T + model.b_out
    else:
        logits = xs @ model.w_out.T + model.b_out
    return logits[0] if single else logits


def smooth_targets(label: int, n_classes: int, alpha: float) -> np.ndarray:
    """(1 - alpha) * onehot + alpha / C."""
    if not 0 <= label < n_classes:
        raise BadLabelIndex(f"label {label} outside [0, {n_classes})")
    target = np.full(n_classes, alpha / n_classes)
    target[label] += 1.0 - alpha
    return target


def mixup(x1: np.ndarray, t1: np.ndarray, x2: np.ndarray, t2: np.ndarray,
          lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Convex combination of two (input, target) pairs with weight lam on the first."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    if x1.shape != x2.shape or t1.shape != t2.shape:
        raise DimensionMismatch("mixup operands must share shapes")
    return lam * x1 + (1.0 - lam) * x2, lam * t1 + (1.0 - lam) * t2


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def grads_from_targets(model: TinyClassifier, xs: np.ndarray,
                       targets: np.ndarray) -> GradResult:
    """Exact gradients of the mean cross-entropy against target distributions.

    Returns the loss, parameter gradients shaped like the model, and the
    gradient with respect to every input row.
    """
    xs = np.asarray(xs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise EmptyDataset("need at least one sample")
    if targets.shape != (xs.shape[0], model.n_classes):
        raise DimensionMismatch(
            f"targets shape {targets.shape}, expected ({xs.shape[0]}, {model.n_classes})"
        )
    n = xs.shape[0]
    if model.hidden_dim:
        hidden = np.tanh(xs @ model.w_in.T + model.b_in)
        logits = hidden @ model.w_out.T + model.b_out
    else:
        hidden = None
        logits = xs @ model.w_out.T + model.b_out
    logp = _log_softmax(logits)
    loss = float(-(targets * logp).sum() / n)
    dlogits = (np.exp(logp) - targets) / n
    if hidden is not None:
        gw_out = dlogits.T @ hidden
        gb_out = dlogits.sum(axis=0)
        dpre = (dlogits @ model.w_out) * (1.0 - hidden * hidden)
        gw_in = dpre.T @ xs
        gb_in = dpre.sum(axis=0)
        dx = dpre @ model.w_in
    else:
        gw_out = dlogits.T @ xs
        gb_out = dlogits.sum(axis=0)
        gw_in = np.zeros_like(model.w_in)
        gb_in = np.zeros_like(model.b_in)
        dx = dlogits @ model.w_out
    return GradResult(loss, ParamGrads(gw_in, gb_in, gw_out, gb_out), dx)


def grads(model: TinyClassifier, xs: np.ndarray, labels: np.ndarray,
          label_smoothing: float = 0.0) -> GradResult:
    """grads_from_targets with smoothed one-hot targets built from labels."""
    labels = np.asarray(labels)
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise EmptyDataset("need at least one sample")
    if labels.shape != (xs.shape[0],):
        raise DimensionMismatch("labels must be one per sample")
    targets = np.stack([
        smooth_targets(int(lbl), model.n_classes, label_smoothing) for lbl in labels
    ])
    return grads_from_targets(model, xs, targets)


def nll_input_gradient(model: TinyClassifier, x: np.ndarray, label: int,
                       temperature: float = 1.0) -> np.ndarray:
    """Gradient wrt x of -log softmax(f(x)/T)[label], one sample."""
    xs, _ = _as_batch(x, model.input_dim)
    if not 0 <= label < model.n_classes:
        raise BadLabelIndex(f"label {label} outside [0, {model.n_classes})")
    if model.hidden_dim:
        hidden = np.tanh(xs @ model.w_in.T + model.b_in)
        logits = hidden @ model.w_out.T + model.b_out
    else:
        hidden = None
        logits = xs @ model.w_out.T + model.b_out
    p = np.exp(_log_softmax(logits / temperature))
    dlogits = p.copy()
    dlogits[0, label] -= 1.0
    dlogits /= temperature
    if hidden is not None:
        dpre = (dlogits @ model.w_out) * (1.0 - hidden * hidden)
        dx = dpre @ model.w_in
    else:
        dx = dlogits @ model.w_out
    return dx[0]


def _dataset_stats(model: TinyClassifier, xs: np.ndarray, targets: np.ndarray,
                   labels: np.ndarray) -> EpochStats:
    logits = forward(model, xs)
    logp = _log_softmax(logits)
    loss = float(-(targets * logp).sum() / xs.shape[0])
    accuracy = float((logits.argmax(axis=1) == labels).mean())
    return EpochStats(loss, accuracy)


def train(model: TinyClassifier, xs: np.ndarray, labels: np.ndarray,
          config: TrainConfig) -> tuple[TinyClassifier, list[EpochStats]]:
    """Plain SGD over shuffled mini-batches; returns the model and a per-epoch trace.

    The trace entry for an epoch is the full-dataset smoothed loss and
    accuracy after that epoch's updates. Both learning rates at zero leave
    the parameters bit-identical. Identical seed, config, and data give a
    bit-identical model.
    """
    xs = np.asarray(xs, dtype=np.float64)
    labels = np.asarray(labels)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise EmptyDataset("training needs at least one sample")
    if labels.shape != (xs.shape[0],):
        raise DimensionMismatch("labels must be one per sample")
    n = xs.shape[0]
    base_targets = np.stack([
        smooth_targets(int(lbl), model.n_classes, config.label_smoothing) for lbl in labels
    ])
    rng = np.random.default_rng(config.seed)
    w_in = model.w_in.copy()
    b_in = model.b_in.copy()
    w_out = model.w_out.copy()
    b_out = model.b_out.copy()
    trace: list[EpochStats] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = xs[idx]
            tb = base_targets[idx]
            if config.mixup_alpha > 0.0:
                lam = float(rng.beta(config.mixup_alpha, config.mixup_alpha))
                pair = rng.permutation(len(idx))
                xb, tb = mixup(xb, tb, xb[pair], tb[pair], lam)
            current = TinyClassifier(w_in, b_in, w_out, b_out)
            g = grads_from_targets(current, xb, tb).params
            # group lr scales the decay too, so lr 0 freezes the group exactly
            if config.backbone_lr != 0.0 and model.hidden_dim:
                w_in -= config.backbone_lr * (g.w_in + config.weight_decay * w_in)
                b_in -= config.backbone_lr * g.b_in
            if config.head_lr != 0.0:
                w_out -= config.head_lr * (g.w_out + config.weight_decay * w_out)
                b_out -= config.head_lr * g.b_out
        snapshot = TinyClassifier(w_in, b_in, w_out, b_out)
        trace.append(_dataset_stats(snapshot, xs, base_targets, labels))
    return TinyClassifier(w_in, b_in, w_out, b_out), trace


# --- serialization ----------------------------------------------------------

def model_to_json(model: TinyClassifier) -> str:
    """Flat JSON: dims plus one parameter list (w_in, b_in, w_out, b_out order)."""
    flat = np.concatenate([
        model.w_in.ravel(), model.b_in, model.w_out.ravel(), model.b_out,
    ])
    payload = {
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "n_classes": model.n_classes,
        "params": flat.tolist(),
    }
    return json.dumps(payload)


def model_from_json(text: str) -> TinyClassifier:
    payload = json.loads(text)
    d = int(payload["input_dim"])
    h = int(payload["hidden_dim"])
    c = int(payload["n_classes"])
    flat = np.asarray(payload["params"], dtype=np.float64)
    expected = h * d + h + c * (h if h else d) + c
    if flat.shape != (expected,):
        raise DimensionMismatch(f"got {flat.size} params, expected {expected}")
    pos = 0
    w_in = flat[pos:pos + h * d].reshape(h, d); pos += h * d
    b_in = flat[pos:pos + h]; pos += h
    width = h if h else d
    w_out = flat[pos:pos + c * width].reshape(c, width); pos += c * width
    b_out = flat[pos:pos + c]
    return TinyClassifier(w_in, b_in, w_out, b_out)


def load_model(path: str | Path) -> TinyClassifier:
    return model_from_json(Path(path).read_text())


def save_model(path: str | Path, model: TinyClassifier) -> None:
    Path(path).write_text(model_to_json(model))
