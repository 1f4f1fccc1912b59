"""Figure rendering for solver artifacts.

All figures are written to files (SVG by default) with deterministic
metadata so identical runs produce identical output.  Network edges carry
stable element ids ("net-edge-k") in the SVG, and barycentre vectors render
as arrows at the nodes that carry mass.
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ValidationError
from .measure import DiscreteMeasure
from .network import Network

matplotlib.rcParams["svg.hashsalt"] = "adpnet"

_AXES = {"x": 0, "y": 1, "z": 2}


def _deterministic_save(fig, path) -> None:
    path = str(path)
    kwargs = {}
    if path.endswith(".svg"):
        kwargs["metadata"] = {"Date": None}
    fig.savefig(path, **kwargs)
    plt.close(fig)


def _plane_coords(points: np.ndarray, dim: int, project_axis: str | None) -> np.ndarray:
    if dim == 2:
        return points
    if dim == 3:
        if project_axis is None:
            raise ValidationError("3-d data needs --project-axis to pick the dropped coordinate")
        axis = _AXES.get(project_axis)
        if axis is None:
            raise ValidationError(f"unknown projection axis {project_axis!r}")
        keep = [k for k in range(3) if k != axis]
        return points[:, keep]
    raise ValidationError(f"plotting supports d = 2 or 3, got d = {dim}")


def plot_solution(measure: DiscreteMeasure | None, net: Network, out_path,
                  field_pos: np.ndarray | None = None, field_nu: np.ndarray | None = None,
                  field_B: np.ndarray | None = None, arrow_scale: float = 1.0,
                  subsample: int = 2000, width: float = 6.0, height: float = 6.0,
                  project_axis: str | None = None, seed: int = 0) -> None:
    """Render the measure, the network (one line element per edge with a
    stable id), highlighted endpoints, and the barycentre arrows."""
    fig, ax = plt.subplots(figsize=(width, height))
    if measure is not None:
        pts = _plane_coords(measure.points, measure.dim, project_axis)
        if len(pts) > subsample:
            rng = np.random.default_rng(seed)
            pts = pts[rng.choice(len(pts), size=subsample, replace=False)]
        ax.scatter(pts[:, 0], pts[:, 1], s=4, c="#9ecae1", linewidths=0, zorder=1)
    verts = _plane_coords(net.vertices, net.dim, project_axis)
    for k, (u, v) in enumerate(net.edges):
        line, = ax.plot([verts[u, 0], verts[v, 0]], [verts[u, 1], verts[v, 1]],
                        color="#08306b", lw=1.8, zorder=3)
        line.set_gid(f"net-edge-{k}")
    deg = net.degrees()
    tips = np.flatnonzero(deg == 1)
    if net.num_edges == 0:
        tips = np.array([0])
    if tips.size:
        ax.scatter(verts[tips, 0], verts[tips, 1], s=36, c="#d62728", zorder=4,
                   marker="o", edgecolors="none")
    if field_B is not None and field_pos is not None and field_nu is not None:
        mask = (field_nu > 0) & (np.linalg.norm(field_B, axis=1) > 0)
        if mask.any():
            pos = _plane_coords(field_pos[mask], field_pos.shape[1], project_axis)
            vec = _plane_coords(field_B[mask] * arrow_scale, field_B.shape[1], project_axis)
            q = ax.quiver(pos[:, 0], pos[:, 1], vec[:, 0], vec[:, 1],
                          angles="xy", scale_units="xy", scale=1.0,
                          color="#2ca02c", width=0.003, zorder=5)
            q.set_gid("barycentre-arrows")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    _deterministic_save(fig, out_path)


def plot_trace(trace: dict, out_path, width: float = 7.0, height: float = 4.0) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(width, height))
    it = trace["iter"]
    ax1.plot(it, trace["J_p"], color="#08306b")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("objective")
    if all(v > 0 for v in trace["J_p"]):
        ax1.set_yscale("log")
    ax2.plot(it, trace["H1"], color="#2ca02c", label="length")
    ax2.plot(it, trace["net_norm"], color="#d62728", label="|net field|")
    ax2.set_xlabel("iteration")
    ax2.legend(frameon=False)
    fig.tight_layout()
    _deterministic_save(fig, out_path)


def plot_sweep(lengths, j_values, out_path, width: float = 6.0, height: float = 4.0) -> None:
    fig, ax = plt.subplots(figsize=(width, height))
    ax.plot(lengths, j_values, marker="o", color="#08306b")
    ax.set_xlabel("length budget")
    ax.set_ylabel("objective estimate")
    fig.tight_layout()
    _deterministic_save(fig, out_path)


def plot_bounds(psi, lhs, out_path, width: float = 5.0, height: float = 5.0) -> None:
    fig, ax = plt.subplots(figsize=(width, height))
    ax.scatter(psi, lhs, s=6, c="#08306b", linewidths=0)
    lo = float(min(np.min(psi), np.min(lhs)))
    hi = float(max(np.max(psi), np.max(lhs)))
    ax.plot([lo, hi], [lo, hi], color="#d62728", lw=1.0)
    ax.set_xlabel("pointwise lower bound")
    ax.set_ylabel("squared distance gap")
    fig.tight_layout()
    _deterministic_save(fig, out_path)
