"""Closest-point projection of measure points onto a network, the induced
node measure on a sampled network, fibers, and the ambiguous locus.

Two implementations are provided: an all-edges scan (the oracle) and a
spatially pruned variant.  Both evaluate the identical point-to-segment
kernel, and the pruning is conservative, so they agree exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .measure import DiscreteMeasure
from .network import Network, SampledNetwork

DEFAULT_REL_TOL = 1e-9
_SCAN_BLOCK = 4_000_000  # max elements per broadcast block


def worker_count() -> int:
    """Worker cap from ADPNET_THREADS (defaults to 1 = serial)."""
    raw = os.environ.get("ADPNET_THREADS", "1")
    try:
        return max(1, min(int(raw), os.cpu_count() or 1))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class ProjectionTable:
    """Per measure point: distance to the network, owning edge, edge
    parameter, foot point, and ambiguity flag."""

    distance: np.ndarray   # (n,)
    edge: np.ndarray       # (n,) int, -1 when the network has no edges
    t: np.ndarray          # (n,)
    foot: np.ndarray       # (n, d)
    ambiguous: np.ndarray  # (n,) bool

    @property
    def size(self) -> int:
        return self.distance.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("index,distance,edge,t,ambiguous\n")
            for i in range(self.size):
                fh.write(f"{i},{self.distance[i]!r},{int(self.edge[i])},{self.t[i]!r},{int(self.ambiguous[i])}\n")


def _segment_geometry(net: Network):
    a = net.vertices[net.edges[:, 0]]
    b = net.vertices[net.edges[:, 1]]
    ab = b - a
    denom = np.einsum("ed,ed->e", ab, ab)
    return a, ab, denom


def _project_block(points: np.ndarray, a: np.ndarray, ab: np.ndarray, denom: np.ndarray):
    """Distances and parameters from each point to each segment.

    Shared by both projection paths; element-wise arithmetic only, so a
    subset of segments produces bitwise-identical values.
    """
    t = (np.einsum("nd,ed->ne", points, ab) - np.einsum("ed,ed->e", a, ab)) / denom
    np.clip(t, 0.0, 1.0, out=t)
    diff = points[:, None, :] - (a[None, :, :] + t[..., None] * ab[None, :, :])
    dist = np.sqrt(np.einsum("ned,ned->ne", diff, diff))
    return dist, t


def _finalize_rows(a, ab, dist, t, row_offset, edge_ids, tie_tol, sep_tol, out):
    """Pick the winner per row with first-index tie-breaking and flag
    ambiguity among near-minimal feet."""
    distance, edge, tpar, foot, ambiguous = out
    j = np.argmin(dist, axis=1)
    rows = np.arange(dist.shape[0])
    dmin = dist[rows, j]
    tmin = t[rows, j]
    foot_best = a[j] + tmin[:, None] * ab[j]
    distance[row_offset + rows] = dmin
    edge[row_offset + rows] = edge_ids[j]
    tpar[row_offset + rows] = tmin
    foot[row_offset + rows] = foot_best
    near = dist <= (dmin + tie_tol)[:, None]
    near[rows, j] = False
    if near.any():
        r, c = np.nonzero(near)
        feet = a[c] + t[r, c][:, None] * ab[c]
        sep = np.linalg.norm(feet - foot_best[r], axis=1) > sep_tol
        if sep.any():
            ambiguous[row_offset + np.unique(r[sep])] = True


def _project_vertex_only(measure: DiscreteMeasure, net: Network) -> ProjectionTable:
    diff = measure.points - net.vertices[0]
    dist = np.linalg.norm(diff, axis=1)
    n = measure.size
    return ProjectionTable(
        distance=dist,
        edge=np.full(n, -1, dtype=int),
        t=np.zeros(n),
        foot=np.broadcast_to(net.vertices[0], (n, net.dim)).copy(),
        ambiguous=np.zeros(n, dtype=bool),
    )


def project(measure: DiscreteMeasure, net: Network, rel_tol: float = DEFAULT_REL_TOL,
            sep_tol: float | None = None, method: str = "auto") -> ProjectionTable:
    """Exact closest-point projection of every measure point onto the network.

    Ties are broken by lowest edge index (the argmin within an edge is
    unique, so the parameter tie-break is implied).  A point is flagged
    ambiguous when a second foot exists within rel_tol * diameter of the
    minimal distance at ambient separation > sep_tol.

    method: "scan" for the all-edges oracle, "tree" for the spatially
    pruned variant, "auto" to pick by problem size.  Both agree exactly.
    """
    if measure.dim != net.dim:
        raise ValidationError(f"dimension mismatch: measure is {measure.dim}-d, network is {net.dim}-d")
    if method not in ("auto", "scan", "tree"):
        raise ValidationError(f"unknown projection method {method!r}")
    if net.num_edges == 0:
        return _project_vertex_only(measure, net)
    M = measure.diameter()
    tie_tol = rel_tol * M
    if sep_tol is None:
        sep_tol = 1e-6 * M

    points = measure.points
    n, E = measure.size, net.num_edges
    if method == "auto":
        method = "tree" if n * E > 2_000_000 and E >= 64 else "scan"
    a, ab, denom = _segment_geometry(net)
    out = (
        np.empty(n),
        np.empty(n, dtype=int),
        np.empty(n),
        np.empty((n, net.dim), dtype=float),
        np.zeros(n, dtype=bool),
    )

    if method == "scan":
        chunk = max(1, _SCAN_BLOCK // max(1, E * net.dim))
        starts = list(range(0, n, chunk))

        def scan_chunk(i: int) -> None:
            block = points[i:i + chunk]
            dist, t = _project_block(block, a, ab, denom)
            _finalize_rows(a, ab, dist, t, i, np.arange(E), tie_tol, sep_tol, out)

        workers = worker_count()
        if workers > 1 and len(starts) > 1:
            # chunks write disjoint row ranges, so results merge by index
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(scan_chunk, starts))
        else:
            for i in starts:
                scan_chunk(i)
    else:
        tree = cKDTree(net.vertices)
        ub, _ = tree.query(points)
        mid = 0.5 * (a + (a + ab))
        half = 0.5 * np.linalg.norm(ab, axis=1)
        mid_tree = cKDTree(mid)
        radius = ub * (1.0 + 1e-9) + tie_tol + float(half.max())
        groups = mid_tree.query_ball_point(points, radius)
        for i in range(n):
            cand = np.sort(np.asarray(groups[i], dtype=int))
            if cand.size == 0:
                cand = np.arange(E)
            dist, t = _project_block(points[i:i + 1], a[cand], ab[cand], denom[cand])
            _finalize_rows(a[cand], ab[cand], dist, t, i, cand, tie_tol, sep_tol, out)

    distance, edge, tpar, foot, ambiguous = out
    distance.setflags(write=False)
    foot.setflags(write=False)
    return ProjectionTable(distance=distance, edge=edge, t=tpar, foot=foot, ambiguous=ambiguous)


def project_bruteforce(measure: DiscreteMeasure, net: Network, rel_tol: float = DEFAULT_REL_TOL,
                       sep_tol: float | None = None) -> ProjectionTable:
    """All-edges scan; the correctness oracle for the pruned variant."""
    return project(measure, net, rel_tol=rel_tol, sep_tol=sep_tol, method="scan")


@dataclass(frozen=True, eq=False)
class PushforwardMeasure:
    """Node measure induced by snapping each point's foot to the nearest
    node along the owning edge, plus the fiber of points at each node."""

    node_mass: np.ndarray      # (K,)
    assignment: np.ndarray     # (n,) node id per measure point
    fiber: tuple               # per node: sorted np.ndarray of point indices

    @property
    def num_nodes(self) -> int:
        return self.node_mass.shape[0]


def pushforward(table: ProjectionTable, sampled: SampledNetwork, measure: DiscreteMeasure) -> PushforwardMeasure:
    """Transport the measure onto the sampled nodes along the projection.

    Each point goes to the node nearest its foot along the owning edge;
    exact midpoints resolve to the lower-t node.
    """
    n = table.size
    if n != measure.size:
        raise ValidationError("projection table and measure sizes differ")
    assign = np.empty(n, dtype=int)
    no_edge = table.edge < 0
    if no_edge.any():
        assign[no_edge] = sampled.vertex_node[0]
    order = np.argsort(table.edge, kind="stable")
    edges_sorted = table.edge[order]
    start = np.searchsorted(edges_sorted, 0, side="left")
    e_ids, group_starts = np.unique(edges_sorted[start:], return_index=True)
    group_starts = np.concatenate([group_starts, [len(edges_sorted) - start]])
    for k, e in enumerate(e_ids):
        rows = order[start + group_starts[k]: start + group_starts[k + 1]]
        ids = sampled.edge_nodes[e]
        ts = sampled.edge_node_t[e]
        mids = 0.5 * (ts[1:] + ts[:-1])
        slots = np.searchsorted(mids, table.t[rows], side="left")
        assign[rows] = ids[slots]
    mass = np.bincount(assign, weights=measure.weights, minlength=sampled.num_nodes)
    rows = np.argsort(assign, kind="stable")
    bounds = np.searchsorted(assign[rows], np.arange(sampled.num_nodes + 1))
    fiber = tuple(rows[bounds[k]:bounds[k + 1]] for k in range(sampled.num_nodes))
    mass.setflags(write=False)
    return PushforwardMeasure(node_mass=mass, assignment=assign, fiber=fiber)


def ambiguous_mass(table: ProjectionTable, measure: DiscreteMeasure) -> float:
    """Measure mass of points whose nearest network point is not unique."""
    return float(measure.weights[table.ambiguous].sum())
