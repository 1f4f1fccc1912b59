"""Descent solver for the length-constrained average-distance problem.

Each iteration projects the measure, assembles the barycentre field on the
sampled nodes, smooths it into a Lipschitz displacement, and moves the
vertices along it with a backtracking line search.  Hard mode restores the
length budget by a homothety about the mass centroid; soft mode instead
trades length against the objective through scaling steps.  Periodic
maintenance keeps the network a clean tree: long edges are resampled,
near-coincident vertices merged, low-mass twigs pruned with their budget
regrafted at the strongest mass atom, and vertices of degree four or more
split into triple junctions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree

from .errors import AdpnetError, MollificationError, ValidationError
from .functional import BarycentreField, LipschitzField, barycentre_field, j_p, mollify
from .measure import DiscreteMeasure, HullSummary, hull_summary
from .network import Network, SampledNetwork, simplify, subdivide, total_length
from .projection import ProjectionTable, PushforwardMeasure, project, pushforward


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    mode: str = "hard"                 # "hard" (length budget) or "soft" (length penalty)
    length: float | None = None        # budget l, hard mode
    lam: float | None = None           # penalty weight, soft mode
    h: float | None = None             # node spacing; default diameter / 50
    step: float = 0.25
    max_iters: int = 400
    grad_tol: float = 1e-7
    seed: int = 0
    init_strategy: str = "mst_of_centers"
    topology_every: int = 10
    prune_mass_tol: float = 0.01
    atom_insert_threshold: float | None = None  # slack triggering a graft; default 0.05 * budget
    min_edge: float | None = None               # default 1e-6 * diameter
    mollify_bandwidth: float | None = None      # default 3 * h

    def validate(self) -> None:
        if self.p < 1:
            raise ValidationError(f"p must be >= 1, got {self.p}")
        if self.mode not in ("hard", "soft"):
            raise ValidationError(f"mode must be 'hard' or 'soft', got {self.mode!r}")
        if self.mode == "hard":
            if self.length is None or self.length < 0:
                raise ValidationError("hard mode needs a nonnegative length budget")
            if self.lam is not None:
                raise ValidationError("hard mode does not take a penalty weight")
        else:
            if self.lam is None or self.lam <= 0:
                raise ValidationError("soft mode needs a positive penalty weight")
            if self.length is not None:
                raise ValidationError("soft mode does not take a length budget")
        for name in ("step", "max_iters", "grad_tol", "topology_every", "prune_mass_tol"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("h", "min_edge", "mollify_bandwidth", "atom_insert_threshold"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValidationError(f"{name} must be positive when given")

    def to_dict(self) -> dict:
        return {
            "p": self.p, "mode": self.mode, "length": self.length, "lam": self.lam,
            "h": self.h, "step": self.step, "max_iters": self.max_iters,
            "grad_tol": self.grad_tol, "seed": self.seed,
            "init_strategy": self.init_strategy, "topology_every": self.topology_every,
            "prune_mass_tol": self.prune_mass_tol,
            "atom_insert_threshold": self.atom_insert_threshold,
            "min_edge": self.min_edge, "mollify_bandwidth": self.mollify_bandwidth,
        }


@dataclass(frozen=True, eq=False)
class SolveResult:
    network: Network
    j_value: float
    field: BarycentreField
    iterations: int
    trace: dict
    converged: bool
    config: SolverConfig
    sampled: SampledNetwork
    table: ProjectionTable
    pushforward: PushforwardMeasure
    lipschitz: LipschitzField | None
    events: dict

    def to_json_dict(self) -> dict:
        return {
            "network": self.network.to_json_dict(),
            "j_value": self.j_value,
            "iterations": self.iterations,
            "converged": bool(self.converged),
            "trace": {k: list(v) for k, v in self.trace.items()},
            "config": self.config.to_dict(),
            "events": self.events,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def trace_csv(self, path) -> None:
        keys = ("iter", "J_p", "H1", "B_l2sq", "net_norm")
        with open(path, "w") as fh:
            fh.write(",".join(keys) + "\n")
            for row in zip(*(self.trace[k] for k in keys)):
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


@dataclass(frozen=True, eq=False)
class SweepResult:
    lengths: np.ndarray
    j_values: np.ndarray
    quotients: np.ndarray     # right-difference quotients, one per consecutive pair
    results: tuple

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("l,J,right_quotient\n")
            for k in range(len(self.lengths)):
                q = repr(float(self.quotients[k - 1])) if k > 0 else ""
                fh.write(f"{float(self.lengths[k])!r},{float(self.j_values[k])!r},{q}\n")


# ---------------------------------------------------------------------------
# initialization

def _weighted_kmeans(points: np.ndarray, weights: np.ndarray, k: int, seed: int,
                     iters: int = 25) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = len(points)
    k = min(k, n)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.choice(n, p=weights)]
    d2 = ((points - centers[0]) ** 2).sum(1)
    for j in range(1, k):
        probs = weights * d2
        total = probs.sum()
        idx = int(rng.choice(n, p=probs / total)) if total > 0 else int(rng.integers(n))
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(1))
    for _ in range(iters):
        dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        labels = np.argmin(dists, axis=1)
        moved = False
        for j in range(k):
            mask = labels == j
            wsum = weights[mask].sum()
            if wsum > 0:
                new = weights[mask] @ points[mask] / wsum
            else:
                new = points[int(np.argmax(dists.min(axis=1)))]
            if not np.allclose(new, centers[j]):
                moved = True
            centers[j] = new
        if not moved:
            break
    return centers


def _mst_edges(points: np.ndarray) -> np.ndarray:
    n = len(points)
    dists = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    tree = minimum_spanning_tree(coo_matrix(dists)).tocoo()
    return np.column_stack([tree.row, tree.col]).astype(int)


def _as_dof_network(net: Network, h: float) -> Network:
    """Split every edge into pieces of length <= h so the vertices are the
    solver's degrees of freedom; geometry is unchanged."""
    if net.num_edges == 0:
        return net
    s = subdivide(net, h)
    edges = np.vstack([np.column_stack([ids[:-1], ids[1:]]) for ids in s.edge_nodes])
    return Network(s.node_pos.copy(), edges)


def init_network(measure: DiscreteMeasure, length: float, strategy: str = "mst_of_centers",
                 h: float | None = None, seed: int = 0) -> Network:
    """Feasible connected starting network of total length <= the budget."""
    if length < 0:
        raise ValidationError("budget must be nonnegative")
    mean = measure.mean()
    if length == 0 or strategy == "point":
        return Network(mean[None, :], np.empty((0, 2), dtype=int))
    M = measure.diameter()
    scale = M if M > 0 else 1.0
    if h is None:
        h = scale / 50.0

    if strategy == "principal_segment":
        X = measure.points - mean
        cov = (measure.weights[:, None] * X).T @ X
        _, vecs = np.linalg.eigh(cov)
        axis = vecs[:, -1]
        proj = X @ axis
        spread = float(proj.max() - proj.min())
        seg_len = min(length, spread)
        if seg_len <= 1e-12 * scale:
            return Network(mean[None, :], np.empty((0, 2), dtype=int))
        a = mean - 0.5 * seg_len * axis
        b = mean + 0.5 * seg_len * axis
        net = Network(np.vstack([a, b]), np.array([[0, 1]]))
        return _as_dof_network(net, h)

    if strategy != "mst_of_centers":
        raise ValidationError(f"unknown init strategy {strategy!r}")
    k = int(max(2, min(16, round(2 + 6.0 * length / scale))))
    centers = _weighted_kmeans(measure.points, measure.weights, k, seed)
    keep = [0]
    for j in range(1, len(centers)):
        if all(np.linalg.norm(centers[j] - centers[i]) > 1e-9 * scale for i in keep):
            keep.append(j)
    centers = centers[keep]
    if len(centers) == 1:
        return init_network(measure, length, "principal_segment", h=h, seed=seed)
    edges = _mst_edges(centers)
    net = Network(centers, edges)
    tot = total_length(net)
    if tot > length:
        net = net.with_vertices(mean + (length / tot) * (net.vertices - mean))
    return _as_dof_network(net, h)


# ---------------------------------------------------------------------------
# feasibility and geometry helpers

def enforce_length(net: Network, length: float, center) -> Network:
    """Homothety about the center restoring the length budget; identity on
    feasible input, a single vertex at the center when the budget is zero."""
    if length < 0:
        raise ValidationError("budget must be nonnegative")
    tot = total_length(net)
    if tot <= length:
        return net
    center = np.asarray(center, dtype=float)
    if length == 0:
        return Network(center[None, :], np.empty((0, 2), dtype=int))
    ratio = length / tot
    return net.with_vertices(center + ratio * (net.vertices - center))


def snap_to_vertex(net: Network, point) -> tuple[Network, int]:
    """Insert a vertex at the network point nearest the query (splitting the
    owning edge); returns the existing vertex when the query already sits at
    one.  Geometry is unchanged."""
    point = np.asarray(point, dtype=float)
    scale = max(1.0, float(np.abs(net.vertices).max()))
    tol = 1e-6 * scale
    gaps = np.linalg.norm(net.vertices - point, axis=1)
    vid = int(np.argmin(gaps))
    if net.num_edges == 0:
        if gaps[vid] > tol:
            raise ValidationError(f"point is {gaps[vid]:.3e} from the network")
        return net, vid

    a = net.vertices[net.edges[:, 0]]
    b = net.vertices[net.edges[:, 1]]
    ab = b - a
    t = np.einsum("ed,ed->e", point - a, ab) / np.einsum("ed,ed->e", ab, ab)
    np.clip(t, 0.0, 1.0, out=t)
    feet = a + t[:, None] * ab
    dist = np.linalg.norm(point - feet, axis=1)
    e = int(np.argmin(dist))
    if dist[e] > tol:
        raise ValidationError(f"point is {dist[e]:.3e} from the network (tolerance {tol:.3e})")
    foot = feet[e]
    u, v = net.edges[e]
    if np.linalg.norm(foot - net.vertices[u]) <= 1e-9 * scale:
        return net, int(u)
    if np.linalg.norm(foot - net.vertices[v]) <= 1e-9 * scale:
        return net, int(v)
    verts = np.vstack([net.vertices, foot])
    w = len(verts) - 1
    edges = np.vstack([np.delete(net.edges, e, axis=0), [[u, w], [w, v]]])
    return Network(verts, edges), w


def _remove_vertices(net: Network, drop: set[int]) -> Network:
    keep = np.array([i for i in range(net.num_vertices) if i not in drop])
    remap = -np.ones(net.num_vertices, dtype=int)
    remap[keep] = np.arange(len(keep))
    mask = ~(np.isin(net.edges[:, 0], list(drop)) | np.isin(net.edges[:, 1], list(drop)))
    return Network(net.vertices[keep], remap[net.edges[mask]])


def _clip_to_hull(points: np.ndarray, hull: HullSummary, dim: int) -> np.ndarray:
    """Project points onto the support hull: exact polygon projection in the
    plane, cyclic half-space projection otherwise."""
    viol = hull.membership_violation(points)
    out = points.copy()
    outside = viol > 0
    if not outside.any():
        return out
    if dim == 2 and len(hull.hull_vertices) >= 3:
        poly = hull.hull_vertices
        ring = np.vstack([poly, poly[:1]])
        a, b = ring[:-1], ring[1:]
        ab = b - a
        denom = np.einsum("ed,ed->e", ab, ab)
        pts = out[outside]
        t = (np.einsum("nd,ed->ne", pts, ab) - np.einsum("ed,ed->e", a, ab)) / denom
        np.clip(t, 0.0, 1.0, out=t)
        feet = a[None] + t[..., None] * ab[None]
        dist = np.linalg.norm(pts[:, None, :] - feet, axis=2)
        best = np.argmin(dist, axis=1)
        out[outside] = feet[np.arange(len(pts)), best]
        return out
    norms_sq = np.einsum("fd,fd->f", hull.normals, hull.normals)
    for _ in range(16):
        viol_all = out @ hull.normals.T - hull.offsets
        worst = viol_all.max(axis=1)
        if np.all(worst <= 1e-12):
            break
        rows = np.flatnonzero(worst > 1e-12)
        picks = np.argmax(viol_all[rows], axis=1)
        out[rows] -= (viol_all[rows, picks] / norms_sq[picks])[:, None] * hull.normals[picks]
    return out


def _leaf_chains(net: Network):
    """Maximal chains from each leaf through degree-2 vertices; returns
    (vertex ids excluding the junction, edge ids) per chain."""
    deg = net.degrees()
    adj: dict[int, list[tuple[int, int]]] = {}
    for e, (u, v) in enumerate(net.edges):
        adj.setdefault(int(u), []).append((int(v), e))
        adj.setdefault(int(v), []).append((int(u), e))
    chains = []
    for leaf in np.flatnonzero(deg == 1):
        verts = [int(leaf)]
        edges = []
        prev, cur = -1, int(leaf)
        while True:
            nxt = [(w, e) for (w, e) in adj[cur] if w != prev]
            if len(nxt) != 1:
                break
            w, e = nxt[0]
            edges.append(e)
            if deg[w] != 2:
                break
            verts.append(w)
            prev, cur = cur, w
        chains.append((verts, edges))
    return chains


# ---------------------------------------------------------------------------
# solve

class _Eval:
    __slots__ = ("net", "sampled", "table", "pf", "field", "J", "H1")

    def __init__(self, measure, net, h, p):
        self.net = net
        self.sampled = subdivide(net, h)
        self.table = project(measure, net)
        self.pf = pushforward(self.table, self.sampled, measure)
        self.field = barycentre_field(measure, self.table, self.pf, self.sampled, p)
        self.J = j_p(measure, self.table, p)
        self.H1 = total_length(net)


def _quick_j(measure, net, p) -> float:
    return j_p(measure, project(measure, net), p)


class _Run:
    """Mutable state of one solve."""

    def __init__(self, measure: DiscreteMeasure, config: SolverConfig, init: Network | None):
        config.validate()
        self.measure = measure
        self.config = config
        self.p = config.p
        self.hard = config.mode == "hard"
        self.lam = config.lam or 0.0
        hull = hull_summary(measure)
        self.hull = hull
        self.M = hull.diameter if hull.diameter > 0 else 1.0
        self.h = config.h if config.h is not None else self.M / 50.0
        self.min_edge = config.min_edge if config.min_edge is not None else 1e-6 * self.M
        self.bandwidth = config.mollify_bandwidth if config.mollify_bandwidth is not None else 3.0 * self.h
        self.budget = config.length if self.hard else None
        self.graft_slack = (config.atom_insert_threshold
                            if config.atom_insert_threshold is not None
                            else (0.05 * self.budget if self.hard and self.budget else None))
        self.events = {"mollify_failures": 0, "prunes": 0, "grafts": 0, "splits": 0,
                       "clips": 0, "merges": 0, "maintenance_rollbacks": 0, "stalled": False}
        if init is None:
            init_len = self.budget if self.hard else self.M
            net = init_network(measure, init_len, config.init_strategy, h=self.h, seed=config.seed)
        else:
            if init.dim != measure.dim:
                raise ValidationError("initial network dimension does not match the measure")
            net = _as_dof_network(init, self.h)
        if self.hard:
            net = enforce_length(net, self.budget, measure.mean())
        self.net = net
        self._step = config.step
        self._center = measure.mean()

    # objective ------------------------------------------------------------
    def F_of(self, J: float, net: Network) -> float:
        return J if self.hard else J + self.lam * total_length(net)

    def quick_F(self, net: Network) -> float:
        return self.F_of(_quick_j(self.measure, net, self.p), net)

    def centroid(self, ev: _Eval) -> np.ndarray:
        c = ev.sampled.nu_centroid(ev.pf.node_mass)
        return c if np.all(np.isfinite(c)) else self.measure.mean()

    def feasible(self, net: Network) -> Network:
        if not self.hard:
            return net
        return enforce_length(net, self.budget, self._center)

    # moves ----------------------------------------------------------------
    def _length_tangent(self, net: Network, xi_v: np.ndarray) -> np.ndarray:
        """Remove the scaling component of the displacement so the move
        preserves total length to first order (active-budget case); the
        homothety afterwards only cleans up second-order drift."""
        L = total_length(net)
        if L <= 0:
            return xi_v
        u, v = net.edges[:, 0], net.edges[:, 1]
        ab = net.vertices[v] - net.vertices[u]
        unit = ab / np.linalg.norm(ab, axis=1, keepdims=True)
        dL = float(np.einsum("ed,ed->", unit, xi_v[v] - xi_v[u]))
        beta = dL / L
        return xi_v - beta * (net.vertices - self._center)

    def descent_move(self, ev: _Eval, lip: LipschitzField, F_curr: float):
        xi_v = lip.xi[: ev.net.num_vertices]
        if self.hard and ev.net.num_edges and ev.H1 >= 0.999 * self.budget:
            xi_v = self._length_tangent(ev.net, xi_v)
        s = self._step
        for _ in range(21):
            try:
                cand = self.feasible(ev.net.with_vertices(ev.net.vertices + s * xi_v))
            except AdpnetError:
                s *= 0.5
                continue
            F_cand = self.quick_F(cand)
            if F_cand < F_curr:
                self._step = min(self.config.step, 2.0 * s)
                return cand, F_cand
            s *= 0.5
        self._step = max(self.config.step * 2.0 ** -12, self._step * 0.5)
        return None, F_curr

    def exact_net_pull(self, ev: _Eval) -> np.ndarray:
        """Resultant of the barycentre pull evaluated at the exact feet;
        the true translation gradient of the objective (the node sum only
        approximates it to within the snapping resolution)."""
        r = ev.table.distance
        if self.p == 2:
            w_pow = np.ones_like(r)
        else:
            # points at distance zero contribute a zero vector regardless
            w_pow = np.where(r > 0, r, 1.0) ** (self.p - 2.0)
        pull = (self.measure.weights * w_pow)[:, None] * (self.measure.points - ev.table.foot)
        return self.p * pull.sum(axis=0)

    def translation_move(self, ev: _Eval, F_curr: float):
        netv = self.exact_net_pull(ev)
        norm = float(np.linalg.norm(netv))
        if norm <= 1e-15:
            return None, F_curr
        if self.p == 2:
            w_pow = 1.0
        else:
            d = np.where(ev.table.distance > 0, ev.table.distance, 1.0)
            w_pow = float(self.measure.weights @ d ** (self.p - 2.0))
        curv = self.p * max(self.p - 1.0, 1.0) * max(w_pow, 1e-12)
        u = netv / curv
        for _ in range(10):
            try:
                cand = ev.net.with_vertices(ev.net.vertices + u)
            except AdpnetError:
                u *= 0.5
                continue
            F_cand = self.quick_F(cand)
            if F_cand < F_curr:
                return cand, F_cand
            u *= 0.5
        return None, F_curr

    def scale_move(self, ev: _Eval, F_curr: float):
        center = self.centroid(ev)
        best = None
        best_F = F_curr
        for s in (0.5, 0.8, 0.95, 0.99, 0.999, 1.001, 1.01, 1.05):
            try:
                cand = ev.net.with_vertices(center + s * (ev.net.vertices - center))
            except AdpnetError:
                continue
            F_cand = self.quick_F(cand)
            if F_cand < best_F:
                best, best_F = cand, F_cand
        return best, best_F

    # maintenance ----------------------------------------------------------
    def _guarded(self, net: Network, builder, F_curr: float, slack: float):
        try:
            cand = builder(net)
        except AdpnetError:
            return net, F_curr, False
        if cand is None or cand is net:
            return net, F_curr, False
        F_cand = self.quick_F(cand)
        if F_cand <= F_curr + slack:
            return cand, F_cand, True
        self.events["maintenance_rollbacks"] += 1
        return net, F_curr, False

    def _resample(self, net: Network) -> Network:
        if net.num_edges == 0:
            return net
        if float(net.edge_lengths().max()) <= 2.0 * self.h:
            return net
        return _as_dof_network(net, self.h)

    def _simplify(self, net: Network):
        out = simplify(net, self.min_edge)
        if out.num_vertices == net.num_vertices:
            return None
        self.events["merges"] += 1
        return self.feasible(out)

    def _graft(self, net: Network, ev: _Eval, delta: float):
        """Append a segment of length delta at the strongest atom, pointed
        along its barycentre pull."""
        V = net.num_vertices
        nu = ev.pf.node_mass[:V] if ev.net is net else None
        if nu is None:
            inner = _Eval(self.measure, net, self.h, self.p)
            nu = inner.pf.node_mass[: net.num_vertices]
            B = inner.field.B[: net.num_vertices]
        else:
            B = ev.field.B[:V]
        deg = net.degrees()
        strength = nu * np.linalg.norm(B, axis=1)
        strength[deg >= 3] = -1.0
        j = int(np.argmax(strength))
        if strength[j] <= 0:
            return None
        direction = B[j]
        nrm = np.linalg.norm(direction)
        if nrm <= 1e-15:
            return None
        tip = net.vertices[j] + (delta / nrm) * direction
        verts = np.vstack([net.vertices, tip])
        edges = np.vstack([net.edges, [[j, len(verts) - 1]]]) if net.num_edges else np.array([[j, len(verts) - 1]])
        return Network(verts, edges)

    def _prune_and_regraft(self, net: Network):
        if net.num_edges < 2:
            return None
        ev = _Eval(self.measure, net, self.h, self.p)
        freed = 0.0
        drop_vertices: set[int] = set()
        drop_edges: set[int] = set()
        lengths = net.edge_lengths()
        for verts, edges in _leaf_chains(net):
            if len(edges) >= net.num_edges:
                continue
            mask = np.isin(ev.table.edge, edges)
            mass = float(self.measure.weights[mask].sum())
            if mass < self.config.prune_mass_tol:
                drop_vertices.update(verts)
                drop_edges.update(edges)
                freed += float(lengths[list(edges)].sum())
        if not drop_vertices or len(drop_edges) >= net.num_edges:
            return None
        pruned = _remove_vertices(net, drop_vertices)
        self.events["prunes"] += 1
        if freed > 10 * self.min_edge:
            grafted = self._graft(pruned, ev, min(freed, max(2 * self.h, 0.1 * total_length(pruned))))
            if grafted is not None:
                self.events["grafts"] += 1
                return self.feasible(grafted)
        return self.feasible(pruned)

    def _split_high_degree(self, net: Network):
        changed = False
        offset = max(self.min_edge, 2e-12)
        for _ in range(20):
            deg = net.degrees()
            high = np.flatnonzero(deg >= 4)
            if not high.size:
                break
            v = int(high[0])
            nbrs = []
            for e, (a, b) in enumerate(net.edges):
                if a == v:
                    nbrs.append((int(b), e))
                elif b == v:
                    nbrs.append((int(a), e))
            dirs = np.array([net.vertices[w] - net.vertices[v] for w, _ in nbrs])
            dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
            best, pair = 2.0, (0, 1)
            for i in range(len(nbrs)):
                for jj in range(i + 1, len(nbrs)):
                    dot = float(dirs[i] @ dirs[jj])
                    if dot < best:
                        best, pair = dot, (i, jj)
            moved = [k for k in range(len(nbrs)) if k not in pair]
            g = dirs[moved].sum(axis=0)
            if np.linalg.norm(g) <= 1e-12:
                # moved pair is itself opposite: any direction off the kept axis works
                g = np.zeros(net.dim)
                g[int(np.argmin(np.abs(dirs[pair[0]])))] = 1.0
                g -= (g @ dirs[pair[0]]) * dirs[pair[0]]
            g = g / np.linalg.norm(g)
            new_pos = net.vertices[v] + offset * g
            verts = np.vstack([net.vertices, new_pos])
            w_id = len(verts) - 1
            edges = net.edges.copy()
            for k in moved:
                _, e = nbrs[k]
                u2, v2 = edges[e]
                edges[e] = [w_id, v2 if u2 == v else u2]
            edges = np.vstack([edges, [v, w_id]])
            net = Network(verts, edges)
            changed = True
        return net if changed else None

    def _clip(self, net: Network):
        viol = self.hull.membership_violation(net.vertices)
        if np.all(viol <= 1e-12 * max(1.0, self.M)):
            return None
        clipped = _clip_to_hull(net.vertices, self.hull, net.dim)
        self.events["clips"] += 1
        return self.feasible(net.with_vertices(clipped))

    def maintenance(self, net: Network, F_curr: float):
        changed = False
        slack = self.config.grad_tol
        resampled = self._resample(net)
        if resampled is not net:
            net = resampled
            F_curr = self.quick_F(net)
            changed = True
        net, F_curr, did = self._guarded(net, self._simplify, F_curr, slack)
        changed |= did
        net, F_curr, did = self._guarded(net, self._prune_and_regraft, F_curr, slack)
        changed |= did
        net, F_curr, did = self._guarded(net, lambda n: self._split_high_degree(n), F_curr, slack)
        changed |= did
        net, F_curr, did = self._guarded(net, self._clip, F_curr, slack)
        changed |= did
        if self.hard and self.graft_slack is not None and net.num_edges:
            slack_len = self.budget - total_length(net)
            if slack_len >= self.graft_slack:
                net, F_curr, did = self._guarded(
                    net, lambda n: self._graft(n, _Eval(self.measure, n, self.h, self.p),
                                               min(slack_len, max(2 * self.h, 0.1 * self.budget))),
                    F_curr, 0.0)
                if did:
                    self.events["grafts"] += 1
                changed |= did
        return net, F_curr, changed

    # polish ---------------------------------------------------------------
    def translation_polish(self, rounds: int = 60):
        target = 1e-8 * self.p * self.M ** (self.p - 1.0)
        for _ in range(rounds):
            ev = _Eval(self.measure, self.net, self.h, self.p)
            if float(np.linalg.norm(self.exact_net_pull(ev))) <= target:
                break
            cand, _ = self.translation_move(ev, self.F_of(ev.J, self.net))
            if cand is None:
                break
            self.net = cand

    def scale_polish(self, rounds: int = 3, width: float = 0.02, iters: int = 48):
        if self.hard:
            return
        invphi = (np.sqrt(5.0) - 1.0) / 2.0
        for _ in range(rounds):
            ev = _Eval(self.measure, self.net, self.h, self.p)
            center = self.centroid(ev)
            base = self.net

            def F_at(s: float) -> float:
                try:
                    cand = base.with_vertices(center + s * (base.vertices - center))
                except AdpnetError:
                    return np.inf
                return self.quick_F(cand)

            lo, hi = 1.0 - width, 1.0 + width
            a, b = lo, hi
            c1 = b - invphi * (b - a)
            c2 = a + invphi * (b - a)
            f1, f2 = F_at(c1), F_at(c2)
            for _ in range(iters):
                if f1 < f2:
                    b, c2, f2 = c2, c1, f1
                    c1 = b - invphi * (b - a)
                    f1 = F_at(c1)
                else:
                    a, c1, f1 = c1, c2, f2
                    c2 = a + invphi * (b - a)
                    f2 = F_at(c2)
            s_best = 0.5 * (a + b)
            F_curr = self.F_of(ev.J, base)
            if F_at(s_best) < F_curr - 1e-15:
                self.net = base.with_vertices(center + s_best * (base.vertices - center))
            else:
                break


def solve(measure: DiscreteMeasure, config: SolverConfig, init: Network | None = None) -> SolveResult:
    """Run the descent loop; see the module docstring for the scheme."""
    run = _Run(measure, config, init)
    trace = {"iter": [], "J_p": [], "H1": [], "B_l2sq": [], "net_norm": []}
    run._step = config.step
    run._center = measure.mean()
    prev_l2sq = None
    moved_last = True
    converged = False
    j_history: list[float] = []
    iters_done = 0

    for it in range(config.max_iters):
        ev = _Eval(measure, run.net, run.h, run.p)
        run._center = run.centroid(ev)
        trace["iter"].append(it)
        trace["J_p"].append(ev.J)
        trace["H1"].append(ev.H1)
        trace["B_l2sq"].append(ev.field.l2sq)
        trace["net_norm"].append(float(np.linalg.norm(ev.field.net)))
        iters_done = it + 1

        if prev_l2sq is not None and abs(ev.field.l2sq - prev_l2sq) < config.grad_tol and not moved_last:
            converged = True
            break
        prev_l2sq = ev.field.l2sq
        j_history.append(run.F_of(ev.J, run.net))
        if len(j_history) > 50 and j_history[-1] >= j_history[-51] - 1e-15:
            converged = False
            run.events["stalled"] = True
            break

        F_curr = run.F_of(ev.J, run.net)
        moved = False
        lip = None
        if ev.field.l2sq > 0:
            try:
                lip = mollify(ev.field, ev.sampled, run.bandwidth)
            except MollificationError:
                run.events["mollify_failures"] += 1
        if lip is not None:
            cand, F_curr_new = run.descent_move(ev, lip, F_curr)
            if cand is not None:
                run.net, F_curr, moved = cand, F_curr_new, True
                ev = _Eval(measure, run.net, run.h, run.p)
        cand, F_new = run.translation_move(ev, F_curr)
        if cand is not None:
            run.net, F_curr, moved = cand, F_new, True
            ev = _Eval(measure, run.net, run.h, run.p)
        if not run.hard:
            cand, F_new = run.scale_move(ev, F_curr)
            if cand is not None:
                run.net, F_curr, moved = cand, F_new, True
        if (it + 1) % config.topology_every == 0:
            net2, F_curr, did = run.maintenance(run.net, F_curr)
            run.net = net2
            moved |= did
        moved_last = moved
    else:
        converged = False

    # final cleanup and stationarity polish
    final_F = run.quick_F(run.net)
    run.net, final_F, _ = run.maintenance(run.net, final_F)
    run.translation_polish()
    run.scale_polish()

    ev = _Eval(measure, run.net, run.h, run.p)
    lip = None
    if ev.field.l2sq > 0:
        try:
            lip = mollify(ev.field, ev.sampled, run.bandwidth)
        except MollificationError:
            run.events["mollify_failures"] += 1
    trace["iter"].append(iters_done)
    trace["J_p"].append(ev.J)
    trace["H1"].append(ev.H1)
    trace["B_l2sq"].append(ev.field.l2sq)
    trace["net_norm"].append(float(np.linalg.norm(ev.field.net)))

    return SolveResult(network=run.net, j_value=ev.J, field=ev.field,
                       iterations=iters_done, trace=trace, converged=converged,
                       config=config, sampled=ev.sampled, table=ev.table,
                       pushforward=ev.pf, lipschitz=lip, events=run.events)


def sweep(measure: DiscreteMeasure, p: float, lengths, config: SolverConfig | None = None) -> SweepResult:
    """Solve along an increasing ladder of budgets, warm-starting each run
    from the previous solution; reports right-difference quotients of the
    objective estimates."""
    lengths = np.asarray(list(lengths), dtype=float)
    if np.any(lengths < 0) or np.any(np.diff(lengths) <= 0):
        raise ValidationError("lengths must be nonnegative and strictly increasing")
    if config is None:
        config = SolverConfig(p=p, mode="hard", length=float(lengths[0]))
    results = []
    init = None
    for l in lengths:
        cfg = replace(config, p=p, mode="hard", length=float(l), lam=None)
        res = solve(measure, cfg, init=init)
        results.append(res)
        init = res.network
    j_values = np.array([r.j_value for r in results])
    quotients = np.diff(j_values) / np.diff(lengths)
    return SweepResult(lengths=lengths, j_values=j_values, quotients=quotients, results=tuple(results))
