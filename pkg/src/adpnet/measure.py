"""Discrete probability measures: construction, file ingestion, sampling
fixtures, and convex-hull geometry.

The measure is a weighted point cloud in R^d (d >= 2) with weights summing
to one.  The hull summary provides the cloud diameter and a supporting
half-space representation used by downstream confinement checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial._qhull import QhullError

from .errors import ParseError, ValidationError

WEIGHT_SUM_TOL = 1e-12
_WEIGHT_NAMES = {"w", "weight", "weights", "mass"}


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud standing in for a compactly supported probability
    measure on R^d."""

    points: np.ndarray   # (n, d) float64
    weights: np.ndarray  # (n,) float64, nonnegative, sums to 1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2:
            raise ValidationError("points must be a 2-d array of shape (n, d)")
        n, d = pts.shape
        if n < 1:
            raise ValidationError("measure needs at least one point")
        if d < 2:
            raise ValidationError(f"ambient dimension must be >= 2, got {d}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("measure points must be finite")
        if w.shape != (n,):
            raise ValidationError(f"weights shape {w.shape} does not match {n} points")
        if np.any(w < 0):
            raise ValidationError("weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {w.sum()!r}")
        pts = np.ascontiguousarray(pts)
        w = np.ascontiguousarray(w)
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def mean(self) -> np.ndarray:
        """Weighted mean of the cloud."""
        return self.weights @ self.points

    def diameter(self) -> float:
        """Exact max pairwise distance of the support (cached)."""
        cached = getattr(self, "_diameter", None)
        if cached is None:
            cached = _max_pairwise_distance(self.points)
            object.__setattr__(self, "_diameter", cached)
        return cached

    @classmethod
    def from_arrays(cls, points, weights=None, normalize: bool = True) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        if weights is None:
            w = np.full(len(pts), 1.0 / len(pts)) if len(pts) else np.empty(0)
        else:
            w = np.asarray(weights, dtype=float)
            if normalize:
                if np.any(w < 0):
                    raise ValidationError("weights must be nonnegative")
                total = float(w.sum())
                if total <= 0:
                    raise ValidationError("weights sum to zero; cannot normalize")
                w = w / total
        return cls(pts, w)

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }


def _max_pairwise_distance(points: np.ndarray, chunk: int = 512) -> float:
    n = len(points)
    if n == 1:
        return 0.0
    best = 0.0
    for i in range(0, n, chunk):
        block = points[i:i + chunk]
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def _looks_numeric(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_measure(path, format: str | None = None) -> DiscreteMeasure:
    """Load a measure from CSV or JSON.

    CSV: one row per point, comma-separated coordinates with an optional
    trailing weight column.  A non-numeric first row is treated as a header.
    With a header, the last column is a weight column iff it is named one of
    w/weight/weights/mass.  Without a header, files with >= 3 columns are
    read as 2 coordinates plus weights only when the column count is 3; wider
    headerless files take the last column as weights as well.  Use a header
    (for example "x,y,z") to load unweighted data in d >= 3.

    JSON: {"dim": d, "points": [[...], ...], "weights": [...] (optional)}.
    Missing weights default to uniform; weights are renormalized to sum 1.
    """
    path = str(path)
    if format is None:
        format = "json" if path.endswith(".json") else "csv"
    if format not in ("csv", "json"):
        raise ValidationError(f"unknown measure format {format!r}")
    if format == "json":
        with open(path) as fh:
            data = json.load(fh)
        if "points" not in data:
            raise ParseError(f"{path}: JSON measure must contain a 'points' key")
        pts = np.asarray(data["points"], dtype=float)
        if pts.ndim != 2:
            raise ParseError(f"{path}: 'points' must be a list of coordinate lists")
        if "dim" in data and int(data["dim"]) != pts.shape[1]:
            raise ParseError(f"{path}: declared dim {data['dim']} does not match points of dim {pts.shape[1]}")
        return DiscreteMeasure.from_arrays(pts, data.get("weights"))

    rows: list[list[float]] = []
    header: list[str] | None = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = [tok.strip() for tok in line.split(",")]
            if header is None and not rows and not any(_looks_numeric(t) for t in tokens):
                header = tokens
                continue
            try:
                rows.append([float(t) for t in tokens])
            except ValueError as exc:
                raise ParseError(f"{path}: parse error at line {lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise ParseError(f"{path}: parse error at line {lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise ParseError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    ncols = table.shape[1]
    if header is not None:
        has_weight = header[-1].strip().lower() in _WEIGHT_NAMES
    else:
        has_weight = ncols >= 3
    if has_weight and ncols >= 3:
        pts, w = table[:, :-1], table[:, -1]
    else:
        pts, w = table, None
    if w is not None and np.any(w < 0):
        raise ValidationError(f"{path}: negative weight encountered")
    return DiscreteMeasure.from_arrays(pts, w)


@dataclass(frozen=True)
class DensitySpec:
    """Parameter bundle for the sampling fixtures."""

    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def uniform_box(cls, lo, hi) -> "DensitySpec":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValidationError("uniform_box needs lo/hi vectors of equal length")
        if np.any(hi < lo):
            raise ValidationError("uniform_box needs hi >= lo componentwise")
        return cls("uniform_box", {"lo": lo, "hi": hi})

    @classmethod
    def uniform_disk(cls, center, radius: float) -> "DensitySpec":
        center = np.asarray(center, dtype=float)
        if radius <= 0:
            raise ValidationError("uniform_disk needs a positive radius")
        return cls("uniform_disk", {"center": center, "radius": float(radius)})

    @classmethod
    def gaussian_mixture(cls, means, covs, mix=None) -> "DensitySpec":
        means = np.asarray(means, dtype=float)
        if means.ndim != 2:
            raise ValidationError("gaussian_mixture means must be (k, d)")
        k, d = means.shape
        covs = np.asarray(covs, dtype=float)
        if covs.ndim == 1:            # per-component isotropic variances
            if covs.shape != (k,) or np.any(covs <= 0):
                raise ValidationError("gaussian_mixture scalar covariances must be k positive values")
            covs = np.stack([v * np.eye(d) for v in covs])
        if covs.shape != (k, d, d):
            raise ValidationError("gaussian_mixture covs must be (k, d, d) or (k,)")
        for c in covs:
            if np.any(np.linalg.eigvalsh(c) <= 0):
                raise ValidationError("gaussian_mixture covariances must be positive definite")
        if mix is None:
            mix = np.full(k, 1.0 / k)
        mix = np.asarray(mix, dtype=float)
        if mix.shape != (k,) or np.any(mix < 0) or mix.sum() <= 0:
            raise ValidationError("gaussian_mixture mixing weights must be k nonnegative values")
        return cls("gaussian_mixture", {"means": means, "covs": covs, "mix": mix / mix.sum()})

    @classmethod
    def segment(cls, a, b) -> "DensitySpec":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValidationError("segment needs endpoint vectors of equal length")
        if not np.any(a != b):
            raise ValidationError("segment endpoints must differ")
        return cls("segment", {"a": a, "b": b})


def sample_density(spec: DensitySpec, n: int, seed: int) -> DiscreteMeasure:
    """Draw n points from the fixture density; uniform weights 1/n.

    Deterministic for a fixed seed.  The segment fixture places all mass on
    a line segment, deliberately producing a measure that charges a set of
    finite length.
    """
    if n < 1:
        raise ValidationError("sample_density needs n >= 1")
    rng = np.random.default_rng(seed)
    if spec.kind == "uniform_box":
        lo, hi = spec.params["lo"], spec.params["hi"]
        pts = rng.uniform(lo, hi, size=(n, len(lo)))
    elif spec.kind == "uniform_disk":
        center, radius = spec.params["center"], spec.params["radius"]
        d = len(center)
        dirs = rng.normal(size=(n, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = radius * rng.uniform(size=n) ** (1.0 / d)
        pts = center + dirs * radii[:, None]
    elif spec.kind == "gaussian_mixture":
        means, covs, mix = spec.params["means"], spec.params["covs"], spec.params["mix"]
        comp = rng.choice(len(mix), size=n, p=mix)
        pts = np.empty((n, means.shape[1]))
        for j in range(len(mix)):
            mask = comp == j
            if mask.any():
                pts[mask] = rng.multivariate_normal(means[j], covs[j], size=int(mask.sum()))
    elif spec.kind == "segment":
        a, b = spec.params["a"], spec.params["b"]
        t = rng.uniform(size=n)
        pts = a + t[:, None] * (b - a)
    else:
        raise ValidationError(f"unknown density kind {spec.kind!r}")
    return DiscreteMeasure.from_arrays(pts)


@dataclass(frozen=True, eq=False)
class HullSummary:
    """Convex-hull geometry of the support: diameter plus supporting
    half-spaces A x <= b (every support point satisfies them)."""

    diameter: float
    hull_vertices: np.ndarray   # (m, d) coordinates of hull vertices
    normals: np.ndarray         # (f, d)
    offsets: np.ndarray         # (f,)

    def membership_violation(self, points) -> np.ndarray:
        """Max half-space violation per query point (<= 0 means inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts @ self.normals.T - self.offsets).max(axis=1)


def _hull_low_rank(points: np.ndarray):
    """Hull facets for a possibly rank-deficient cloud via an orthonormal
    basis of the affine span.  Returns (vertex_ids, normals, offsets)."""
    n, d = points.shape
    center = points.mean(axis=0)
    X = points - center
    _, svals, Vt = np.linalg.svd(X, full_matrices=True)
    svals = np.concatenate([svals, np.zeros(d - len(svals))])
    scale = float(svals[0]) if len(svals) else 0.0
    rank = int(np.sum(svals > max(1e-12 * scale, 1e-300)))

    normals: list[np.ndarray] = []
    offsets: list[float] = []
    if rank == 0:
        vertex_ids = np.array([0])
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            normals += [e, -e]
            offsets += [float(e @ points[0]), float(-e @ points[0])]
        return vertex_ids, np.asarray(normals), np.asarray(offsets)

    basis = Vt[:rank]
    Y = X @ basis.T
    if rank == 1:
        lo_id = int(np.argmin(Y[:, 0]))
        hi_id = int(np.argmax(Y[:, 0]))
        vertex_ids = np.unique([lo_id, hi_id])
        for sign in (1.0, -1.0):
            nrm = sign * basis[0]
            normals.append(nrm)
            offsets.append(float((points @ nrm).max()))
    elif rank <= 3:
        hull = ConvexHull(Y)
        vertex_ids = np.sort(hull.vertices)
        A_r = hull.equations[:, :-1]
        b_r = -hull.equations[:, -1]
        A_amb = A_r @ basis
        normals.extend(A_amb)
        offsets.extend(b_r + A_amb @ center)
    else:
        # General d: supporting directions from pairwise differences of an
        # extreme subset, plus the coordinate axes.  Offsets use all points,
        # so membership holds by construction; only the representation is
        # approximate, not the diameter.
        radii = np.linalg.norm(X, axis=1)
        order = np.argsort(-radii)
        sub = points[order[: min(n, 32)]]
        dirs = [np.eye(d)[j] * s for j in range(d) for s in (1.0, -1.0)]
        for i in range(len(sub)):
            for j in range(i + 1, len(sub)):
                diff = sub[j] - sub[i]
                nrm = np.linalg.norm(diff)
                if nrm > 1e-12 * max(scale, 1.0):
                    dirs.append(diff / nrm)
        proj = points @ np.asarray(dirs).T
        vertex_ids = np.unique(np.argmax(proj, axis=0))
        normals.extend(dirs)
        offsets.extend(proj.max(axis=0))

    # complement directions pin the affine span (as +/- half-space pairs)
    for j in range(rank, d):
        v = Vt[j]
        normals += [v, -v]
        offsets += [float((points @ v).max()), float((points @ -v).max())]
    return np.asarray(vertex_ids), np.asarray(normals), np.asarray(offsets)


def hull_summary(measure: DiscreteMeasure) -> HullSummary:
    """Convex hull of the support: exact facets for d <= 3 (with a
    rank-deficient fallback), supporting half-spaces for general d."""
    points = measure.points
    n, d = points.shape
    if n == 1 or d > 3:
        vertex_ids, normals, offsets = _hull_low_rank(points)
    else:
        try:
            hull = ConvexHull(points)
            vertex_ids = np.sort(hull.vertices)
            normals = hull.equations[:, :-1]
            offsets = -hull.equations[:, -1]
        except QhullError:
            vertex_ids, normals, offsets = _hull_low_rank(points)

    verts = points[vertex_ids]
    if d > 3:
        # diameter over all points; splice its extreme pair into the vertex list
        diam = _max_pairwise_distance(points)
        i, j = _diameter_pair(points)
        ids = np.unique(np.concatenate([vertex_ids, [i, j]]))
        verts = points[ids]
    else:
        diam = _max_pairwise_distance(verts)
    return HullSummary(diameter=float(diam), hull_vertices=verts,
                       normals=np.asarray(normals, dtype=float),
                       offsets=np.asarray(offsets, dtype=float))


def _diameter_pair(points: np.ndarray, chunk: int = 512):
    best = -1.0
    pair = (0, 0)
    for i in range(0, len(points), chunk):
        block = points[i:i + chunk]
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(-1)
        k = int(np.argmax(d2))
        r, c = divmod(k, d2.shape[1])
        if d2[r, c] > best:
            best = float(d2[r, c])
            pair = (i + r, c)
    return pair
