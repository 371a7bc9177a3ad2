"""GrabCut-style pseudo-mask generation from a single automatic box prompt.

The pipeline: draw a centered initialization rectangle, model foreground and
background colors in CIELAB with small Gaussian mixtures, and alternate
between refitting the mixtures and solving an exact min-cut whose t-links
are mixture negative log-likelihoods and whose n-links are contrast-weighted
4-neighbor edges. Pixels outside the rectangle stay locked to background.

The min-cut energy for a labeling x is

    sum_i D_i(x_i) + smoothness * sum_{(i,j)} exp(-beta * ||z_i - z_j||^2) * [x_i != x_j]

with D the mixture NLLs and beta = 1 / (2 * mean squared neighbor
difference). cut_energy evaluates exactly this, and solve_cut returns a
labeling attaining its minimum, so the two can be cross-checked by
enumeration on tiny images.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_model import BinaryMask, RgbImage
from .errors import (
    DegenerateGraph,
    DimensionMismatch,
    ImageTooSmall,
    TooFewPixels,
)
from .maxflow import FlowGraph
from .tiny_model import derive_seed

__all__ = [
    "Box",
    "init_box",
    "rgb_to_lab",
    "GmmModel",
    "fit_gmm",
    "gmm_nll",
    "CutProblem",
    "build_cut_problem",
    "cut_energy",
    "solve_cut",
    "min_cut_segment",
    "GrabCutResult",
    "grabcut",
    "morph_open",
    "morph_close",
    "apply_mask",
]

_LOCK_CAP = 1e30
_COV_FLOOR = 1e-6


# --- initialization box -----------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle; x is the column of the left edge."""

    x0: int
    y0: int
    width: int
    height: int

    def interior_mask(self, image_height: int, image_width: int) -> np.ndarray:
        mask = np.zeros((image_height, image_width), dtype=bool)
        mask[self.y0:self.y0 + self.height, self.x0:self.x0 + self.width] = True
        return mask

    def to_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "width": self.width, "height": self.height}


def init_box(width: int, height: int, seed: int = 42) -> Box:
    """Centered box with side fractions drawn uniformly from [0.81, 0.99].

    Side lengths are floored, which keeps the box strictly inside the image
    so a background ring always exists. Images must be at least 8x8.
    """
    if width < 8 or height < 8:
        raise ImageTooSmall(f"image {width}x{height} is below the 8x8 minimum")
    rng = np.random.default_rng(seed)
    frac_w = rng.uniform(0.81, 0.99)
    frac_h = rng.uniform(0.81, 0.99)
    box_w = max(2, int(math.floor(width * frac_w)))
    box_h = max(2, int(math.floor(height * frac_h)))
    return Box((width - box_w) // 2, (height - box_h) // 2, box_w, box_h)


# --- color space ------------------------------------------------------------

_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])


def rgb_to_lab(rgb) -> np.ndarray:
    """sRGB (uint8 scale, any leading shape) to CIELAB under D65."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    if c.shape[-1] != 3:
        raise DimensionMismatch(f"last axis must be 3 channels, got shape {c.shape}")
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(xyz > delta ** 3, np.cbrt(xyz), xyz / (3.0 * delta ** 2) + 4.0 / 29.0)
    out = np.empty_like(f)
    out[..., 0] = 116.0 * f[..., 1] - 16.0
    out[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    out[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return out


# --- Gaussian mixtures --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GmmModel:
    """Full-covariance mixture; covariance eigenvalues are floored at 1e-6."""

    weights: np.ndarray      # (K,)
    means: np.ndarray        # (K, 3)
    covariances: np.ndarray  # (K, 3, 3)
    ll_trace: tuple[float, ...]

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]


def _floor_covariance(cov: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(cov)
    values = np.maximum(values, _COV_FLOOR)
    return (vectors * values) @ vectors.T


def _log_gauss(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = points - mean
    _, logdet = np.linalg.slogdet(cov)
    precision = np.linalg.inv(cov)
    quad = np.einsum("ni,ij,nj->n", d, precision, d)
    dim = points.shape[1]
    return -0.5 * (dim * math.log(2.0 * math.pi) + logdet + quad)


def _mixture_log_matrix(points, weights, means, covs) -> np.ndarray:
    """log(w_k) + log N(x | mu_k, S_k) as an (n, K) matrix."""
    n, k = points.shape[0], weights.shape[0]
    log_terms = np.empty((n, k))
    for comp in range(k):
        log_terms[:, comp] = math.log(weights[comp]) + _log_gauss(points, means[comp], covs[comp])
    return log_terms


def _logsumexp_rows(matrix: np.ndarray) -> np.ndarray:
    top = matrix.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(matrix - top).sum(axis=1, keepdims=True)))[:, 0]


def _kmeanspp_centers(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [points[rng.integers(points.shape[0])]]
    for _ in range(k - 1):
        d2 = np.min(
            [((points - c) ** 2).sum(axis=1) for c in centers], axis=0,
        )
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(points.shape[0]))
        else:
            idx = int(rng.choice(points.shape[0], p=d2 / total))
        centers.append(points[idx])
    return np.stack(centers)


def fit_gmm(pixels, n_components: int = 5, n_iter: int = 10, seed: int = 42) -> GmmModel:
    """Seeded k-means++ init followed by a fixed number of EM updates.

    The trace holds the total data log-likelihood at the start of each EM
    iteration; with the eigenvalue floor acting as a constrained M-step the
    trace is non-decreasing. Needs at least n_components pixels.
    """
    points = np.asarray(pixels, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise DimensionMismatch(f"expected (n, 3) pixels, got shape {points.shape}")
    n = points.shape[0]
    if n < n_components:
        raise TooFewPixels(f"{n} pixels cannot support {n_components} components")
    rng = np.random.default_rng(seed)

    centers = _kmeanspp_centers(points, n_components, rng)
    assign = np.argmin(
        ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1,
    )
    counts = np.bincount(assign, minlength=n_components).astype(np.float64)
    weights = np.maximum(counts, 1e-12)
    weights = weights / weights.sum()
    means = centers.copy()
    global_cov = _floor_covariance(np.cov(points.T) if n > 1 else np.eye(3))
    covs = np.stack([global_cov] * n_components)

    trace: list[float] = []
    for _ in range(n_iter):
        log_terms = _mixture_log_matrix(points, weights, means, covs)
        log_norm = _logsumexp_rows(log_terms)
        trace.append(float(log_norm.sum()))
        resp = np.exp(log_terms - log_norm[:, None])
        bulk = resp.sum(axis=0)
        weights = bulk / n
        means = (resp.T @ points) / bulk[:, None]
        for comp in range(n_components):
            d = points - means[comp]
            cov = (resp[:, comp][:, None] * d).T @ d / bulk[comp]
            covs[comp] = _floor_covariance(cov)
    return GmmModel(weights, means, covs, tuple(trace))


def gmm_nll(model: GmmModel, pixels) -> np.ndarray:
    """Per-pixel negative log-likelihood under the full mixture."""
    points = np.asarray(pixels, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise DimensionMismatch(f"expected (n, 3) pixels, got shape {points.shape}")
    log_terms = _mixture_log_matrix(points, model.weights, model.means, model.covariances)
    return -_logsumexp_rows(log_terms)


# --- the cut ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CutProblem:
    """Energy terms over h*w pixels in row-major order."""

    shape: tuple[int, int]
    d_fg: np.ndarray      # (n,) cost of labeling each pixel foreground
    d_bg: np.ndarray      # (n,)
    pairs: np.ndarray     # (m, 2) 4-neighbor index pairs
    pair_w: np.ndarray    # (m,) nonnegative cut penalties
    locked_bg: np.ndarray  # (n,) pixels forced to background


def _grid_pairs(height: int, width: int) -> np.ndarray:
    idx = np.arange(height * width).reshape(height, width)
    horizontal = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vertical = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return np.concatenate([horizontal, vertical])


def build_cut_problem(image: RgbImage, fg_gmm: GmmModel, bg_gmm: GmmModel,
                      smoothness: float = 50.0, locked_bg=None) -> CutProblem:
    """Assemble data and smoothness terms from an image and two mixtures."""
    lab = rgb_to_lab(image.pixels)
    height, width = lab.shape[:2]
    z = lab.reshape(-1, 3)
    pairs = _grid_pairs(height, width)
    diff2 = ((z[pairs[:, 0]] - z[pairs[:, 1]]) ** 2).sum(axis=1)
    mean_diff2 = float(diff2.mean()) if diff2.size else 0.0
    beta = 0.0 if mean_diff2 <= 0.0 else 1.0 / (2.0 * mean_diff2)
    pair_w = smoothness * np.exp(-beta * diff2)
    if locked_bg is None:
        locked = np.zeros(height * width, dtype=bool)
    else:
        locked = np.asarray(locked_bg, dtype=bool)
        if locked.shape != (height, width):
            raise DimensionMismatch(
                f"locked_bg shape {locked.shape} does not match image {(height, width)}"
            )
        locked = locked.ravel()
    return CutProblem(
        shape=(height, width),
        d_fg=gmm_nll(fg_gmm, z),
        d_bg=gmm_nll(bg_gmm, z),
        pairs=pairs,
        pair_w=pair_w,
        locked_bg=locked,
    )


def cut_energy(problem: CutProblem, labels) -> float:
    """Energy of a labeling; infinite when a locked pixel is foreground."""
    flat = np.asarray(labels, dtype=bool).ravel()
    if flat.size != problem.d_fg.size:
        raise DimensionMismatch(f"labeling has {flat.size} entries, expected {problem.d_fg.size}")
    if (flat & problem.locked_bg).any():
        return math.inf
    data = np.where(flat, problem.d_fg, problem.d_bg).sum()
    cut = flat[problem.pairs[:, 0]] != flat[problem.pairs[:, 1]]
    return float(data + problem.pair_w[cut].sum())


def solve_cut(problem: CutProblem) -> np.ndarray:
    """Exact minimizer of cut_energy as a flat boolean labeling.

    Both t-links of a pixel are shifted down by their minimum, which changes
    every labeling's cut capacity by the same constant and keeps all
    capacities nonnegative even when a mixture density exceeds 1. Locked
    pixels get one huge (finite) sink link.
    """
    n = problem.d_fg.size
    source, sink = n, n + 1
    graph = FlowGraph(n + 2)
    shift = np.minimum(problem.d_fg, problem.d_bg)
    cap_src = problem.d_bg - shift   # paid when the pixel ends up background
    cap_snk = problem.d_fg - shift   # paid when the pixel ends up foreground
    any_capacity = False
    for i in range(n):
        if problem.locked_bg[i]:
            graph.add_edge(i, sink, _LOCK_CAP)
            any_capacity = True
            continue
        if cap_src[i] > 0.0:
            graph.add_edge(source, i, float(cap_src[i]))
            any_capacity = True
        if cap_snk[i] > 0.0:
            graph.add_edge(i, sink, float(cap_snk[i]))
            any_capacity = True
    pair_w = problem.pair_w
    pairs = problem.pairs
    for k in range(pairs.shape[0]):
        w = float(pair_w[k])
        if w > 0.0:
            graph.add_edge(int(pairs[k, 0]), int(pairs[k, 1]), w, w)
            any_capacity = True
    if not any_capacity:
        raise DegenerateGraph("every capacity is zero; the labeling is unconstrained")
    graph.max_flow(source, sink)
    return graph.source_side()[:n]


def min_cut_segment(image: RgbImage, fg_gmm: GmmModel, bg_gmm: GmmModel,
                    smoothness: float = 50.0, locked_bg=None) -> BinaryMask:
    """Segment one image given fitted foreground/background mixtures."""
    problem = build_cut_problem(image, fg_gmm, bg_gmm, smoothness, locked_bg)
    labels = solve_cut(problem)
    return BinaryMask(labels.reshape(problem.shape))


# --- the full loop --------------------------------------------------------------

@dataclass(frozen=True)
class GrabCutResult:
    mask: BinaryMask
    box: Box
    degenerate: bool
    energies: tuple[float, ...]


def grabcut(image: RgbImage, seed: int = 42, n_iter: int = 5,
            n_components: int = 5, smoothness: float = 50.0) -> GrabCutResult:
    """Box init, then alternate mixture refits with exact min-cuts.

    If the foreground empties at any point (a uniform image does this on the
    first cut) the box interior is returned with the degenerate flag set.
    A refit is only accepted when it does not worsen the data term of the
    current assignment, so the energy trace never increases.
    """
    box = init_box(image.width, image.height, seed)
    locked = ~box.interior_mask(image.height, image.width)
    lab = rgb_to_lab(image.pixels).reshape(-1, 3)
    fg_mask = ~locked
    fg_gmm = bg_gmm = None
    energies: list[float] = []
    for iteration in range(n_iter):
        fg_px = lab[fg_mask.ravel()]
        bg_px = lab[~fg_mask.ravel()]
        if fg_px.shape[0] < n_components or bg_px.shape[0] < n_components:
            return GrabCutResult(BinaryMask(~locked), box, True, tuple(energies))
        new_fg = fit_gmm(fg_px, n_components, seed=derive_seed(seed, iteration, 0))
        new_bg = fit_gmm(bg_px, n_components, seed=derive_seed(seed, iteration, 1))
        if fg_gmm is None or gmm_nll(new_fg, fg_px).sum() <= gmm_nll(fg_gmm, fg_px).sum():
            fg_gmm = new_fg
        if bg_gmm is None or gmm_nll(new_bg, bg_px).sum() <= gmm_nll(bg_gmm, bg_px).sum():
            bg_gmm = new_bg
        problem = build_cut_problem(image, fg_gmm, bg_gmm, smoothness, locked)
        labels = solve_cut(problem)
        energies.append(cut_energy(problem, labels))
        if not labels.any():
            return GrabCutResult(BinaryMask(~locked), box, True, tuple(energies))
        fg_mask = labels.reshape(image.height, image.width)
    return GrabCutResult(BinaryMask(fg_mask), box, False, tuple(energies))


# --- cleanup -----------------------------------------------------------------

def _window_reduce(pixels: np.ndarray, radius: int, combine_any: bool) -> np.ndarray:
    """OR (dilate) or AND (erode) over a (2r+1)^2 window; outside is background."""
    h, w = pixels.shape
    padded = np.zeros((h + 2 * radius, w + 2 * radius), dtype=bool)
    padded[radius:radius + h, radius:radius + w] = pixels
    out = None
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            view = padded[dy:dy + h, dx:dx + w]
            if out is None:
                out = view.copy()
            elif combine_any:
                out |= view
            else:
                out &= view
    return out


def morph_open(mask: BinaryMask, radius: int = 1) -> BinaryMask:
    """Erosion then dilation with a square element; trims thin spurs."""
    eroded = _window_reduce(mask.pixels, radius, combine_any=False)
    return BinaryMask(_window_reduce(eroded, radius, combine_any=True))


def morph_close(mask: BinaryMask, radius: int = 1) -> BinaryMask:
    """Dilation then erosion with a square element; fills small holes."""
    dilated = _window_reduce(mask.pixels, radius, combine_any=True)
    return BinaryMask(_window_reduce(dilated, radius, combine_any=False))


def apply_mask(image: RgbImage, mask: BinaryMask) -> RgbImage:
    """Zero out pixels outside the mask."""
    if (mask.height, mask.width) != (image.height, image.width):
        raise DimensionMismatch(
            f"mask {mask.height}x{mask.width} does not match image {image.height}x{image.width}"
        )
    return RgbImage(np.where(mask.pixels[:, :, None], image.pixels, 0))
