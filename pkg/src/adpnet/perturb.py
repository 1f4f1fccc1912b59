"""Network perturbations and the budget-reallocation competitor.

The competitor shrinks the network about a chosen vertex by a factor 1-eps
and grafts an axis-aligned cross there whose total length equals the freed
budget.  The pointwise bound psi and the aggregate lower bound relate the
objective gap between the network and its competitor to the geometry near
the chosen center; both are verified numerically here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedRegimeError, ValidationError
from .functional import LipschitzField, j_p
from .measure import DiscreteMeasure, hull_summary
from .network import Network, SampledNetwork, move_vertices
from .projection import ProjectionTable, PushforwardMeasure, project


@dataclass(frozen=True)
class CompetitorSpec:
    """Parameters of the shrink-and-graft competitor.

    The cross arm length is tau = (budget / 2d) * eps exactly, so the cross
    carries total length budget * eps, the amount freed by the shrink.
    """

    center: np.ndarray  # sigma*, must coincide with a network vertex
    eps: float
    budget: float       # length budget l

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        if center.ndim != 1:
            raise ValidationError("competitor center must be a coordinate vector")
        if not (0.0 < self.eps < 1.0):
            raise ValidationError(f"eps must lie in (0, 1), got {self.eps}")
        if self.budget <= 0:
            raise ValidationError(f"budget must be positive, got {self.budget}")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def alpha(self) -> float:
        return self.budget / (2.0 * self.dim)

    @property
    def tau(self) -> float:
        return self.alpha * self.eps


def deform(net: Network, xi, eps: float) -> Network:
    """Move each vertex by eps times its displacement vector.

    xi is a LipschitzField whose leading nodes are the network vertices
    (the sampled-node layout), or a plain (V, d) array.
    """
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    if isinstance(xi, LipschitzField):
        if xi.num_nodes < net.num_vertices:
            raise ValidationError("displacement field does not cover all vertices")
        vals = xi.xi[: net.num_vertices]
    else:
        vals = np.asarray(xi, dtype=float)
        if vals.shape != net.vertices.shape:
            raise ValidationError(f"displacement shape {vals.shape} does not match vertices")
    if eps == 0:
        return net
    return move_vertices(net, eps * vals)


def shrink(net: Network, eps: float, center) -> Network:
    """Homothety of ratio (1 - eps) about the center."""
    if not (0.0 <= eps < 1.0):
        raise ValidationError(f"shrink factor eps must lie in [0, 1), got {eps}")
    if eps == 0:
        return net
    center = np.asarray(center, dtype=float)
    return net.with_vertices(center + (1.0 - eps) * (net.vertices - center))


def cross(tau: float, dim: int) -> Network:
    """Axis-aligned star at the origin: 2 * dim arms of length tau."""
    if tau <= 0:
        raise ValidationError("arm length tau must be positive")
    if dim < 2:
        raise ValidationError("cross needs dimension >= 2")
    verts = [np.zeros(dim)]
    edges = []
    for i in range(dim):
        for s in (1.0, -1.0):
            tip = np.zeros(dim)
            tip[i] = s * tau
            edges.append((0, len(verts)))
            verts.append(tip)
    return Network(np.asarray(verts), np.asarray(edges, dtype=int))


def cross_dist_sq(x, tau: float) -> np.ndarray | float:
    """Closed-form squared distance to the axis cross of arm length tau:
    |x|^2 + ((|x|_inf - tau)_+)^2 - |x|_inf^2."""
    if tau <= 0:
        raise ValidationError("arm length tau must be positive")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 1
    pts = np.atleast_2d(arr)
    norm_sq = np.einsum("nd,nd->n", pts, pts)
    linf = np.abs(pts).max(axis=1)
    val = norm_sq + np.maximum(linf - tau, 0.0) ** 2 - linf ** 2
    val = np.maximum(val, 0.0)
    return float(val[0]) if scalar else val


def _center_vertex_id(net: Network, center: np.ndarray) -> int:
    gaps = np.linalg.norm(net.vertices - center, axis=1)
    vid = int(np.argmin(gaps))
    scale = max(1.0, float(np.abs(net.vertices).max()))
    if gaps[vid] > 1e-9 * scale:
        raise ValidationError(
            f"competitor center is {gaps[vid]:.3e} from the nearest vertex; snap it to a vertex first")
    return vid


def competitor(net: Network, spec: CompetitorSpec) -> Network:
    """Shrink about the center, then graft the cross there as a graph star."""
    if net.dim != spec.dim:
        raise ValidationError("competitor center dimension does not match the network")
    vid = _center_vertex_id(net, spec.center)
    shrunk = shrink(net, spec.eps, spec.center)
    verts = [shrunk.vertices]
    edges = list(map(tuple, shrunk.edges))
    next_id = shrunk.num_vertices
    for i in range(spec.dim):
        for s in (1.0, -1.0):
            tip = spec.center.copy()
            tip[i] += s * spec.tau
            verts.append(tip[None, :])
            edges.append((vid, next_id))
            next_id += 1
    return Network(np.vstack(verts), np.asarray(edges, dtype=int))


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Pointwise and aggregate verification of the competitor lower bounds."""

    psi: np.ndarray
    zeta: np.ndarray
    lhs: np.ndarray            # dist(x, net)^2 - dist(x, competitor)^2
    kappa_p: float
    M: float
    c: float
    A_mass: float
    beta_A: float
    violations: int
    tolerance: float
    j_gap: float               # J_p(net) - J_p(competitor)
    rhs_aggregate: float       # (p/2) int psi dist^(p-2) + (p/2) int psi zeta
    aggregate_ok: bool
    zeta_kappa_ok: bool        # zeta <= kappa_p pointwise

    def to_json_dict(self, per_point: bool = False) -> dict:
        data = {
            "kappa_p": self.kappa_p,
            "M": self.M,
            "c": self.c,
            "A_mass": self.A_mass,
            "beta_A": self.beta_A,
            "violations": self.violations,
            "tolerance": self.tolerance,
            "j_gap": self.j_gap,
            "rhs_aggregate": self.rhs_aggregate,
            "aggregate_ok": bool(self.aggregate_ok),
            "zeta_kappa_ok": bool(self.zeta_kappa_ok),
        }
        if per_point:
            data["psi"] = self.psi.tolist()
            data["zeta"] = self.zeta.tolist()
            data["lhs"] = self.lhs.tolist()
        return data

    def to_json(self, path, per_point: bool = False) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(per_point=per_point), fh, indent=2)


def psi_lower_bound(measure: DiscreteMeasure, table: ProjectionTable, spec: CompetitorSpec):
    """Pointwise competitor bound psi = min(psi1, 0) in coordinates centered
    at sigma*.  Returns (psi, psi1)."""
    x = measure.points - spec.center
    pi = table.foot - spec.center
    pi_dot = np.einsum("nd,nd->n", pi, x - pi)
    pi_sq = np.einsum("nd,nd->n", pi, pi)
    linf = np.abs(x).max(axis=1)
    tau = spec.tau
    arg1 = -2.0 * spec.eps * pi_dot - spec.eps ** 2 * pi_sq
    arg2 = -2.0 * pi_dot - pi_sq + 2.0 * tau * linf - tau ** 2
    psi1 = np.maximum(arg1, arg2)
    return np.minimum(psi1, 0.0), psi1


def kappa_p(p: float, c: float, eps: float, M: float) -> float:
    """Decay-rate coefficient of the correction term by exponent regime."""
    if p == 2.0:
        return 0.0
    if p < 3.0:
        return float((c * eps) ** (p - 2.0))
    return float((p - 2.0) * c * eps * M ** (p - 3.0))


def _zeta(p: float, dist: np.ndarray, dist_star: np.ndarray) -> np.ndarray:
    """Correction factor bounding dist*^(p-2) - dist^(p-2) from above.

    p = 2: zero.  2 < p < 3: |dist - dist*|^(p-2) by subadditivity of
    t^(p-2).  p >= 3: (p-2)(dist* - dist) dist*^(p-3) from the power
    squeeze, with the 0^0 = 1 convention at p = 3.
    """
    if p == 2.0:
        return np.zeros_like(dist)
    if p < 3.0:
        return np.abs(dist - dist_star) ** (p - 2.0)
    return (p - 2.0) * (dist_star - dist) * dist_star ** (p - 3.0)


def bound_check(measure: DiscreteMeasure, net: Network, table: ProjectionTable,
                spec: CompetitorSpec, p: float, r_A: float | None = None,
                tol: float | None = None) -> BoundReport:
    """Verify the pointwise bound dist^2 - dist*^2 >= psi and the aggregate
    objective bound against the competitor, for p >= 2."""
    if p < 2:
        raise UnsupportedRegimeError(f"bound_check requires p >= 2, got {p}")
    M = hull_summary(measure).diameter
    if tol is None:
        tol = 1e-9 * M ** 2
    psi, _ = psi_lower_bound(measure, table, spec)
    star = competitor(net, spec)
    table_star = project(measure, star)
    dist = table.distance
    dist_star = table_star.distance
    lhs = dist ** 2 - dist_star ** 2
    violations = int(np.sum(lhs < psi - tol))

    c = max(M, spec.alpha)
    kp = kappa_p(p, c, spec.eps, M)
    zeta = _zeta(p, dist, dist_star)
    zeta_kappa_ok = bool(np.all(zeta <= kp + tol)) if p > 2 else True

    w = measure.weights
    rhs = 0.5 * p * float(w @ (psi * dist ** (p - 2.0))) + 0.5 * p * float(w @ (psi * zeta))
    j_gap = j_p(measure, table, p) - j_p(measure, table_star, p)
    aggregate_ok = bool(j_gap >= rhs - 1e-9 * M ** p)

    if r_A is None:
        r_A = spec.eps * M
    foot_gap = np.linalg.norm(table.foot - spec.center, axis=1)
    in_A = foot_gap <= r_A
    A_mass = float(w[in_A].sum())
    beta_A = float(foot_gap[in_A].max()) if in_A.any() else 0.0
    return BoundReport(psi=psi, zeta=zeta, lhs=lhs, kappa_p=kp, M=M, c=c,
                       A_mass=A_mass, beta_A=beta_A, violations=violations,
                       tolerance=float(tol), j_gap=float(j_gap), rhs_aggregate=float(rhs),
                       aggregate_ok=aggregate_ok, zeta_kappa_ok=zeta_kappa_ok)


@dataclass(frozen=True, eq=False)
class ProbeResult:
    in_BKs: bool
    ratios: np.ndarray

    def to_json_dict(self) -> dict:
        return {"in_BKs": bool(self.in_BKs), "ratios": self.ratios.tolist()}


def local_dimension_probe(pf: PushforwardMeasure, sampled: SampledNetwork, node: int,
                          radii, s: float, K: float) -> ProbeResult:
    """Ball-mass ratios nu(B_r(node)) / r^s over the given radii; the limsup
    exceedance test is replaced by a max over the supplied finite radii."""
    radii = np.asarray(list(radii), dtype=float)
    if np.any(radii <= 0) or (len(radii) > 1 and np.any(np.diff(radii) >= 0)):
        raise ValidationError("radii must be positive and strictly decreasing")
    if not (0.0 <= s < 1.0):
        raise ValidationError(f"local dimension exponent s must lie in [0, 1), got {s}")
    center = sampled.node_pos[int(node)]
    gaps = np.linalg.norm(sampled.node_pos - center, axis=1)
    ratios = np.array([float(pf.node_mass[gaps <= r].sum()) / r ** s for r in radii])
    return ProbeResult(in_BKs=bool(ratios.max() > K), ratios=ratios)
