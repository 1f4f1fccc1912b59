"""Structural checks on solver outputs.

Every checkable inequality about minimizers is evaluated and reported, never
asserted: a local method can converge to a non-minimizer, and the reports
are the way to tell a falsified claim from a bad local optimum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import MollificationError, ValidationError
from .functional import fd_check, j_p, mollify
from .measure import DiscreteMeasure, hull_summary
from .network import TopologyReport, topology_report, total_length
from .projection import ambiguous_mass, project
from .solver import SolveResult, SolverConfig, _Eval


def power_bounds(a, b, p, q):
    """Two-sided power squeeze: (p/q)(a^q - b^q) b^(p-q) <= a^p - b^p
    <= (p/q)(a^q - b^q) a^(p-q), for a, b >= 0 and 0 < q <= p, with the
    convention 0^0 = 1.  Accepts scalars or arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0) or np.any(p < q):
        raise ValidationError("power_bounds needs 0 < q <= p")
    if np.any(a < 0) or np.any(b < 0):
        raise ValidationError("power_bounds needs a, b >= 0")
    gap = a ** q - b ** q
    lower = (p / q) * gap * b ** (p - q)
    upper = (p / q) * gap * a ** (p - q)
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


@dataclass(frozen=True)
class RegimeInfo:
    covered: bool
    threshold: float

    def to_json_dict(self) -> dict:
        return {"covered": bool(self.covered), "threshold": self.threshold}


def regime_table(p: float) -> RegimeInfo:
    """Whether the exponent falls in the range where the tree and triple
    junction structure of minimizers is established: p = 2 or beyond the
    root of t^2 - 3t + 1."""
    if p < 1:
        raise ValidationError(f"p must be >= 1, got {p}")
    threshold = (3.0 + math.sqrt(5.0)) / 2.0
    return RegimeInfo(covered=(p == 2.0 or p > threshold), threshold=threshold)


@dataclass(frozen=True, eq=False)
class AtomCheck:
    vertex: int
    nu_ball: float       # node mass within a 2h ball of the endpoint
    b_norm: float
    lhs: float           # nu_ball * |B|
    rhs: float           # (lambda / 4l) * int |B|^2 dnu
    passed: bool

    def to_json_dict(self) -> dict:
        return {"vertex": self.vertex, "nu_ball": self.nu_ball, "b_norm": self.b_norm,
                "lhs": self.lhs, "rhs": self.rhs, "passed": bool(self.passed)}


@dataclass(frozen=True, eq=False)
class DiagnosticsReport:
    net_field_norm: float
    stationary: bool
    hull_violations: int
    ambiguous_mass: float
    topology: TopologyReport
    atom_checks: tuple
    atom_lambda: float | None
    power_bound_failures: int
    fd_gap: float | None
    j_value: float
    total_length: float

    @property
    def all_atoms_pass(self) -> bool:
        return all(c.passed for c in self.atom_checks)

    @property
    def is_tree(self) -> bool:
        return self.topology.cycle_rank == 0

    def failures(self) -> list[str]:
        out = []
        if self.hull_violations:
            out.append(f"{self.hull_violations} vertices outside the support hull")
        if not self.is_tree:
            out.append(f"cycle rank {self.topology.cycle_rank} > 0")
        if self.topology.max_degree > 3:
            out.append(f"max degree {self.topology.max_degree} > 3")
        if not self.stationary:
            out.append(f"net field norm {self.net_field_norm:.3e} not stationary")
        for c in self.atom_checks:
            if not c.passed:
                out.append(f"endpoint {c.vertex} fails the atom bound ({c.lhs:.3e} < {c.rhs:.3e})")
        if self.power_bound_failures:
            out.append(f"{self.power_bound_failures} power squeeze failures")
        return out

    def to_json_dict(self) -> dict:
        return {
            "net_field_norm": self.net_field_norm,
            "stationary": bool(self.stationary),
            "hull_violations": self.hull_violations,
            "ambiguous_mass": self.ambiguous_mass,
            "topology": self.topology.to_json_dict(),
            "atom_checks": [c.to_json_dict() for c in self.atom_checks],
            "atom_lambda": self.atom_lambda,
            "power_bound_failures": self.power_bound_failures,
            "fd_gap": self.fd_gap,
            "j_value": self.j_value,
            "total_length": self.total_length,
            "failures": self.failures(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def summary_text(self) -> str:
        topo = self.topology
        lines = [
            f"objective            {self.j_value:.6e}",
            f"total length         {self.total_length:.6f}",
            f"net field norm       {self.net_field_norm:.3e} ({'stationary' if self.stationary else 'NOT stationary'})",
            f"hull violations      {self.hull_violations}",
            f"ambiguous mass       {self.ambiguous_mass:.4f}",
            f"cycle rank           {topo.cycle_rank} ({'tree' if self.is_tree else 'has cycles'})",
            f"endpoints / branches {topo.endpoint_count} / {topo.branch_point_count} (max degree {topo.max_degree})",
        ]
        for c in self.atom_checks:
            flag = "pass" if c.passed else "FAIL"
            lines.append(f"atom check v{c.vertex:<4d} nu={c.nu_ball:.4f} |B|={c.b_norm:.4f} lhs={c.lhs:.4e} rhs={c.rhs:.4e} {flag}")
        if self.fd_gap is not None:
            lines.append(f"fd gap (eps 1e-3)    {self.fd_gap:.3e}")
        fails = self.failures()
        lines.append("result               " + ("all checks pass" if not fails else "; ".join(fails)))
        return "\n".join(lines)


def _power_bound_failures(distances: np.ndarray, p: float, seed: int, draws: int = 4096) -> int:
    rng = np.random.default_rng(seed)
    pos = distances[distances > 0]
    if len(pos) < 2:
        return 0
    a = rng.choice(pos, size=draws)
    b = rng.choice(pos, size=draws)
    q = rng.uniform(0.1, p, size=draws)
    lower, upper = power_bounds(a, b, p, q)
    value = a ** p - b ** p
    tol = 1e-9 * np.maximum(1.0, np.maximum(a, b) ** p)
    return int(np.sum((value < lower - tol) | (value > upper + tol)))


def check_minimizer(measure: DiscreteMeasure, result: SolveResult, config: SolverConfig) -> DiagnosticsReport:
    """Aggregate the structural claims about minimizers on a solver output.

    The atom bound at each endpoint uses the constant
    lambda = min(1 / L, 1 / sup|xi|) of the solver's final smoothed field,
    endpoint mass measured on a 2h ball, and the budget (hard mode) or the
    realized length (soft mode) in the denominator.
    """
    net = result.network
    field = result.field
    sampled = result.sampled
    pf = result.pushforward
    hull = hull_summary(measure)
    M = hull.diameter if hull.diameter > 0 else 1.0
    p = config.p

    net_norm = float(np.linalg.norm(field.net))
    stationary = net_norm <= 1e-3 * p * M ** (p - 1.0)
    viol = hull.membership_violation(net.vertices)
    hull_violations = int(np.sum(viol > 1e-9 * max(1.0, M)))
    amb = ambiguous_mass(result.table, measure)
    topo = topology_report(net)

    lip = result.lipschitz
    if lip is None and field.l2sq > 0:
        try:
            lip = mollify(field, sampled, 3.0 * sampled.spacing)
        except MollificationError:
            lip = None
    atom_checks = []
    atom_lambda = None
    if lip is not None and field.l2sq > 0:
        atom_lambda = min(
            1.0 / lip.lip_estimate if lip.lip_estimate > 0 else np.inf,
            1.0 / lip.sup_norm if lip.sup_norm > 0 else np.inf,
        )
        l_eff = config.length if config.mode == "hard" and config.length else total_length(net)
        if l_eff > 0:
            rhs = atom_lambda / (4.0 * l_eff) * field.l2sq
            two_h = 2.0 * sampled.spacing
            for vid in topo.endpoint_vertex_ids:
                node = int(sampled.vertex_node[vid])
                ball = np.linalg.norm(sampled.node_pos - sampled.node_pos[node], axis=1) <= two_h
                nu_ball = float(pf.node_mass[ball].sum())
                b_norm = float(np.linalg.norm(field.B[node]))
                lhs = nu_ball * b_norm
                atom_checks.append(AtomCheck(vertex=int(vid), nu_ball=nu_ball, b_norm=b_norm,
                                             lhs=lhs, rhs=float(rhs), passed=bool(lhs >= rhs)))

    pow_fail = _power_bound_failures(result.table.distance, p, config.seed)

    fd_gap = None
    if lip is not None and net.num_edges > 0:
        try:
            report = fd_check(measure, net, (lip, sampled), p, [1e-2, 1e-3])
            fd_gap = float(abs(report.gaps[-1]))
        except (ValidationError, MollificationError):
            fd_gap = None

    return DiagnosticsReport(
        net_field_norm=net_norm, stationary=stationary, hull_violations=hull_violations,
        ambiguous_mass=amb, topology=topo, atom_checks=tuple(atom_checks),
        atom_lambda=atom_lambda, power_bound_failures=pow_fail, fd_gap=fd_gap,
        j_value=result.j_value, total_length=total_length(net))


@dataclass(frozen=True)
class SoftReport:
    applicable: bool
    nontrivial_field: bool
    scaling_quotient: float | None
    nontrivial_pass: bool
    scaling_pass: bool

    def to_json_dict(self) -> dict:
        return {
            "applicable": bool(self.applicable),
            "nontrivial_field": bool(self.nontrivial_field),
            "scaling_quotient": self.scaling_quotient,
            "nontrivial_pass": bool(self.nontrivial_pass),
            "scaling_pass": bool(self.scaling_pass),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def check_soft(measure: DiscreteMeasure, result: SolveResult, lam: float,
               probe_eps: float = 1e-4, tol: float = 1e-6) -> SoftReport:
    """Stationarity checks for penalized solves: the field should be
    nontrivial, and shrinking the network about its mass centroid should
    not lower the penalized objective to first order."""
    if lam <= 0:
        raise ValidationError("penalty weight must be positive")
    net = result.network
    H1 = total_length(net)
    if H1 <= 1e-12:
        return SoftReport(applicable=False, nontrivial_field=False, scaling_quotient=None,
                          nontrivial_pass=False, scaling_pass=False)
    p = result.config.p
    nontrivial = result.field.l2sq > result.config.grad_tol
    center = result.sampled.nu_centroid(result.pushforward.node_mass)
    F0 = result.j_value + lam * H1
    shrunk = net.with_vertices(center + (1.0 - probe_eps) * (net.vertices - center))
    F1 = j_p(measure, project(measure, shrunk), p) + lam * (1.0 - probe_eps) * H1
    quotient = (F1 - F0) / probe_eps
    return SoftReport(applicable=True, nontrivial_field=bool(nontrivial),
                      scaling_quotient=float(quotient),
                      nontrivial_pass=bool(nontrivial), scaling_pass=bool(quotient >= -tol))


def diagnostics_for_network(measure: DiscreteMeasure, net, config: SolverConfig) -> DiagnosticsReport:
    """Run the minimizer checks on a bare (measure, network) pair by
    assembling the projection, node measure, and field in place."""
    hull = hull_summary(measure)
    M = hull.diameter if hull.diameter > 0 else 1.0
    h = config.h if config.h is not None else M / 50.0
    ev = _Eval(measure, net, h, config.p)
    lip = None
    if ev.field.l2sq > 0:
        try:
            lip = mollify(ev.field, ev.sampled, 3.0 * h)
        except MollificationError:
            lip = None
    pseudo = SolveResult(network=net, j_value=ev.J, field=ev.field, iterations=0,
                         trace={}, converged=False, config=config, sampled=ev.sampled,
                         table=ev.table, pushforward=ev.pf, lipschitz=lip, events={})
    return check_minimizer(measure, pseudo, config)
