"""kNN density-ratio estimation over labeled planar points.

For a query ``x`` with ``R(x)`` the distance to its k-th nearest data point,
``N_m(x)`` counts label-m points within distance ``<= R(x)`` and

    g_m(x) = (N_m(x) / k) / rho_m,    rho_m = n_m / n

estimates the ratio of the label-m density to the overall density. ``g = 1``
means label m is at parity with its citywide share.

Neighborhoods are exact. The kd-tree only proposes candidates; radii and
memberships come from distances recomputed with :func:`distances`, the same
expression the brute-force oracle uses, and a candidate set is accepted only
when no point outside it can be within the radius.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import rng as rngmod

# extra candidates fetched beyond k so that ties at the radius are usually covered
CANDIDATE_PAD = 8
CHUNK = 20_000
# relative slack between kd-tree and recomputed distances
_DIST_RTOL = 1e-12


class DensityRatioError(ValueError):
    """A label with no points in the data set has no defined density ratio."""


def distances(points, q):
    """Euclidean distances from every row of ``points`` to the point ``q``."""
    dx = points[:, 0] - q[0]
    dy = points[:, 1] - q[1]
    return np.sqrt(dx * dx + dy * dy)


class SpatialIndex:
    """Immutable kd-tree over (n, 2) points with integer labels ``0..n_labels-1``."""

    def __init__(self, points, labels=None, n_labels=None):
        self.points = np.ascontiguousarray(points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("points must have shape (n, 2)")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points must be finite")
        self.n = len(self.points)
        if self.n == 0:
            raise ValueError("no points")
        self.labels = (np.zeros(self.n, dtype=np.int64) if labels is None
                       else np.asarray(labels, dtype=np.int64))
        if self.labels.shape != (self.n,) or self.labels.min() < 0:
            raise ValueError("labels must be n nonnegative integers")
        self.n_labels = int(n_labels if n_labels is not None else self.labels.max() + 1)
        if self.labels.max() >= self.n_labels:
            raise ValueError("label outside the declared label set")
        self.tree = cKDTree(self.points)
        self.points.setflags(write=False)
        self.labels.setflags(write=False)


@dataclass(frozen=True)
class MixtureWeights:
    counts: tuple
    n: int

    @classmethod
    def from_labels(cls, labels, n_labels=None):
        labels = np.asarray(labels, dtype=np.int64)
        counts = np.bincount(labels, minlength=n_labels or 0)
        return cls(tuple(int(c) for c in counts), int(len(labels)))

    @classmethod
    def from_index(cls, index):
        return cls.from_labels(index.labels, index.n_labels)

    @property
    def rho_hat(self):
        # int / int division is correctly rounded
        return np.array([c / self.n for c in self.counts])

    def absent(self):
        return [m for m, c in enumerate(self.counts) if c == 0]


def _tree_query(index, Q, kk):
    d, idx = index.tree.query(Q, k=kk)
    if kk == 1:
        d, idx = d[:, None], idx[:, None]
    return d, idx


def _neighborhood_chunk(index, Q, k, kk):
    P, labels, M = index.points, index.labels, index.n_labels
    tree_d, idx = _tree_query(index, Q, kk)
    dx = P[idx, 0] - Q[:, 0, None]
    dy = P[idx, 1] - Q[:, 1, None]
    d = np.sqrt(dx * dx + dy * dy)
    R = np.partition(d, k - 1, axis=1)[:, k - 1]
    if kk < index.n:
        complete = tree_d[:, -1] * (1.0 - _DIST_RTOL) > R
    else:
        complete = np.ones(len(Q), dtype=bool)
    inside = d <= R[:, None]
    rows = np.broadcast_to(np.arange(len(Q))[:, None], idx.shape)
    N = np.bincount((rows[inside] * M + labels[idx[inside]]), minlength=len(Q) * M).reshape(len(Q), M)
    return R, N, complete


def neighborhoods(index, queries, k):
    """``(R, N)`` for each query row: k-th neighbor distance and (q, M) label counts."""
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    if not 1 <= k <= index.n:
        raise ValueError(f"k must be in [1, {index.n}]")
    R = np.empty(len(Q))
    N = np.empty((len(Q), index.n_labels), dtype=np.int64)
    for start in range(0, len(Q), CHUNK):
        pending = np.arange(start, min(start + CHUNK, len(Q)))
        kk = min(index.n, k + CANDIDATE_PAD)
        while len(pending):
            r, n_, ok = _neighborhood_chunk(index, Q[pending], k, kk)
            R[pending[ok]] = r[ok]
            N[pending[ok]] = n_[ok]
            pending = pending[~ok]
            kk = min(index.n, 2 * kk)
    return R, N


def knn_radius(index, x, k):
    """Distance from ``x`` to its k-th nearest data point (the k-th order statistic)."""
    if k > index.n or k < 1:
        raise ValueError(f"k must be in [1, {index.n}]")
    R, _ = neighborhoods(index, np.asarray(x, dtype=float)[None, :], k)
    return float(R[0])


def count_by_label(index, x, R):
    """Per-label counts of points at distance ``<= R`` from ``x``."""
    if R < 0:
        raise ValueError("radius must be nonnegative")
    x = np.asarray(x, dtype=float)
    cand = np.asarray(index.tree.query_ball_point(x, R * (1.0 + 1e-9) + 1e-300), dtype=np.int64)
    if len(cand) == 0:
        return np.zeros(index.n_labels, dtype=np.int64)
    d = distances(index.points[cand], x)
    return np.bincount(index.labels[cand[d <= R]], minlength=index.n_labels).astype(np.int64)


def _check_weights(weights):
    missing = weights.absent()
    if missing:
        raise DensityRatioError(f"labels {missing} have no points; density ratio undefined")


def density_ratio(index, weights, x, k=50):
    """``g_m(x)`` for every label; ``x`` may be one point (2,) or a batch (q, 2)."""
    _check_weights(weights)
    if len(weights.counts) != index.n_labels or weights.n != index.n:
        raise ValueError("mixture weights do not describe this index")
    x = np.asarray(x, dtype=float)
    _, N = neighborhoods(index, x, k)
    g = (N / k) / weights.rho_hat
    return g[0] if x.ndim == 1 else g


def default_bbox(points, pad=0.02):
    """Data extent padded by ``pad`` of its width/height on every side."""
    points = np.asarray(points, dtype=float)
    lo, hi = points.min(axis=0), points.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    lo, hi = lo - pad * span, hi + pad * span
    return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def cell_centers(bbox, resolution):
    x0, y0, x1, y1 = bbox
    xs = x0 + (np.arange(resolution) + 0.5) * ((x1 - x0) / resolution)
    ys = y0 + (np.arange(resolution) + 0.5) * ((y1 - y0) / resolution)
    return xs, ys


@dataclass
class RatioGrid:
    """Per-label raster; ``values[m, iy, ix]`` with iy increasing northward."""

    bbox: tuple
    resolution: int
    values: np.ndarray
    k: int
    rho_hat: np.ndarray
    radius: Optional[np.ndarray] = None
    neighbor_total: Optional[np.ndarray] = None
    smoothed: bool = False
    bandwidth: Optional[float] = None
    labels: list = field(default_factory=list)

    @property
    def cell_size(self):
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) / self.resolution, (y1 - y0) / self.resolution

    def centers(self):
        return cell_centers(self.bbox, self.resolution)

    def summary(self, radius_cutoff=None):
        """Per-label max/min over all cells, and over cells with ``R <= radius_cutoff`` if given."""
        out = []
        for m in range(self.values.shape[0]):
            v = self.values[m]
            row = {"label": self.labels[m] if self.labels else m, "max": float(v.max()),
                   "min": float(v.min()), "mean": float(v.mean())}
            if radius_cutoff is not None and self.radius is not None:
                dense = self.radius <= radius_cutoff
                row["dense_cells"] = int(dense.sum())
                row["max_dense"] = float(v[dense].max()) if dense.any() else None
                row["min_dense"] = float(v[dense].min()) if dense.any() else None
            out.append(row)
        return out

    def to_csv(self, path):
        xs, ys = self.centers()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x,y,label,g\n")
            for m in range(self.values.shape[0]):
                name = self.labels[m] if self.labels else m
                for iy, y in enumerate(ys):
                    row = self.values[m, iy]
                    for ix, x in enumerate(xs):
                        fh.write(f"{x!r},{y!r},{name},{float(row[ix])!r}\n")

    def save_raster(self, path):
        """Row-major little-endian float64 values plus a ``.json`` sidecar."""
        path = Path(path)
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        meta = {"bbox": list(self.bbox), "resolution": self.resolution, "k": self.k,
                "bandwidth": self.bandwidth, "smoothed": self.smoothed,
                "labels": [str(x) for x in self.labels] if self.labels else list(range(self.values.shape[0])),
                "shape": list(self.values.shape), "rho_hat": [float(r) for r in self.rho_hat],
                "dtype": "<f8", "order": "label,row(y ascending),col(x ascending)"}
        path.with_name(path.name + ".json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load_raster(cls, path):
        path = Path(path)
        meta = json.loads(path.with_name(path.name + ".json").read_text())
        values = np.fromfile(path, dtype="<f8").reshape(meta["shape"])
        return cls(tuple(meta["bbox"]), meta["resolution"], values, meta["k"], np.array(meta["rho_hat"]),
                   smoothed=meta["smoothed"], bandwidth=meta["bandwidth"], labels=meta["labels"])


def evaluate_grid(index, weights, bbox=None, resolution=1000, k=50, labels=None):
    """Evaluate ``g_m`` at the centers of a ``resolution × resolution`` grid."""
    _check_weights(weights)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    bbox = default_bbox(index.points) if bbox is None else tuple(float(b) for b in bbox)
    if not (bbox[2] > bbox[0] and bbox[3] > bbox[1]):
        raise ValueError("bbox must have positive area")
    xs, ys = cell_centers(bbox, resolution)
    gx, gy = np.meshgrid(xs, ys)
    Q = np.column_stack([gx.ravel(), gy.ravel()])
    R, N = neighborhoods(index, Q, k)
    g = (N / k) / weights.rho_hat
    values = np.ascontiguousarray(g.T.reshape(index.n_labels, resolution, resolution))
    return RatioGrid(bbox, resolution, values, k, weights.rho_hat,
                     radius=R.reshape(resolution, resolution),
                     neighbor_total=N.sum(axis=1).reshape(resolution, resolution),
                     labels=list(labels) if labels is not None else [])


def gaussian_kernel_1d(sigma):
    """Sampled Gaussian on integer offsets ``|o| <= 4 sigma``, normalized to sum 1."""
    radius = int(math.floor(4.0 * sigma))
    o = np.arange(-radius, radius + 1, dtype=float)
    w = np.exp(-0.5 * (o / sigma) ** 2)
    return w / w.sum()


def smooth_array(values, sigma_x, sigma_y):
    """Separable Gaussian smoothing (sigmas in cells), renormalized at the edges.

    Each output cell is the kernel-weighted mean of the in-bounds cells in its
    truncated window, so constants are preserved exactly up to rounding.
    """
    values = np.asarray(values, dtype=float)
    kx, ky = gaussian_kernel_1d(sigma_x), gaussian_kernel_1d(sigma_y)
    num = ndimage.convolve1d(values, kx, axis=1, mode="constant", cval=0.0)
    num = ndimage.convolve1d(num, ky, axis=0, mode="constant", cval=0.0)
    ones = np.ones(values.shape)
    den = ndimage.convolve1d(ones, kx, axis=1, mode="constant", cval=0.0)
    den = ndimage.convolve1d(den, ky, axis=0, mode="constant", cval=0.0)
    return num / den


def smooth_grid(grid, bandwidth):
    """Gaussian-smoothed copy of ``grid``; ``bandwidth`` is the kernel sigma in meters."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    cw, ch = grid.cell_size
    values = np.stack([smooth_array(v, bandwidth / cw, bandwidth / ch) for v in grid.values])
    return replace(grid, values=values, smoothed=True, bandwidth=float(bandwidth))


@dataclass
class DensityGrid:
    bbox: tuple
    resolution: int
    values: np.ndarray  # (ny, nx), iy increasing northward
    bandwidth: tuple

    @property
    def cell_area(self):
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0) / self.resolution ** 2

    def argmax_point(self):
        iy, ix = np.unravel_index(np.argmax(self.values), self.values.shape)
        xs, ys = cell_centers(self.bbox, self.resolution)
        return float(xs[ix]), float(ys[iy])


# bandwidth for an axis with no spread (e.g. one point), as a fraction of the bbox extent
DEGENERATE_BW_FRACTION = 0.01


def scott_bandwidth(points, weights, fallback=(1.0, 1.0)):
    """Per-axis Scott's rule ``std * n_eff ** (-1/6)`` with weighted moments.

    An axis with zero weighted spread gets the matching ``fallback`` value.
    """
    points = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    n_eff = w.sum() ** 2 / np.sum(w ** 2)
    mean = np.average(points, axis=0, weights=w)
    std = np.sqrt(np.average((points - mean) ** 2, axis=0, weights=w))
    bw = std * n_eff ** (-1.0 / 6.0)
    return tuple(float(b) if b > 0 else float(f) for b, f in zip(bw, fallback))


def _axis_kernel(centers, coords, bw):
    z = (centers[:, None] - coords[None, :]) / bw
    return np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * bw)


def weighted_kde(points, weights, bbox, resolution, bandwidth=None):
    """Weighted Gaussian KDE ``sum_i w_i K(x - p_i) / sum_i w_i`` at cell centers.

    ``bandwidth`` is a scalar sigma (isotropic) or an ``(sx, sy)`` pair in meters;
    by default Scott's rule per axis, or 1% of the bbox extent on an axis
    where the points have no spread. The product kernel is separable, so the
    grid is an exact matrix product, not a binned approximation.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(points),):
        raise ValueError("one weight per point")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if w.sum() <= 0:
        raise ValueError("weights are all zero")
    if bandwidth is None:
        x0, y0, x1, y1 = bbox
        fallback = (DEGENERATE_BW_FRACTION * (x1 - x0), DEGENERATE_BW_FRACTION * (y1 - y0))
        bw = scott_bandwidth(points[w > 0], w[w > 0], fallback)
    elif np.ndim(bandwidth) == 0:
        bw = (float(bandwidth), float(bandwidth))
    else:
        bw = tuple(float(b) for b in bandwidth)
    if min(bw) <= 0:
        raise ValueError("bandwidth must be positive")
    xs, ys = cell_centers(bbox, resolution)
    dens = np.zeros((resolution, resolution))
    for start in range(0, len(points), 5000):
        p, ww = points[start:start + 5000], w[start:start + 5000]
        Ky = _axis_kernel(ys, p[:, 1], bw[1]) * ww
        Kx = _axis_kernel(xs, p[:, 0], bw[0])
        dens += Ky @ Kx.T
    return DensityGrid(tuple(bbox), resolution, dens / w.sum(), bw)


class TopicSample(NamedTuple):
    indices: np.ndarray
    weights: np.ndarray
    shortfall: bool


def sample_topic_incidents(doc_topics, topic, threshold=0.5, n_samples=4000, seed=0):
    """Uniform sample (without replacement) of documents with ``weight[topic] >= threshold``.

    Indices come back sorted. When fewer than ``n_samples`` qualify, all of
    them are returned and ``shortfall`` is set.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    doc_topics = np.asarray(doc_topics, dtype=float)
    if not 0 <= topic < doc_topics.shape[1]:
        raise IndexError(f"topic {topic} out of range")
    qualifying = np.flatnonzero(doc_topics[:, topic] >= threshold)
    if len(qualifying) == 0:
        raise ValueError(f"no document has topic {topic} weight >= {threshold}")
    if len(qualifying) <= n_samples:
        chosen = qualifying
        shortfall = len(qualifying) < n_samples
    else:
        gen = rngmod.make_rng(seed, stream=5)
        chosen = np.sort(rngmod.sample_without_replacement(gen, qualifying, n_samples))
        shortfall = False
    return TopicSample(chosen, doc_topics[chosen, topic], shortfall)
