"""Embedded straight-edge networks: the candidate sets being optimized.

A Network is a connected graph with vertices in R^d and straight edges;
its one-dimensional volume is the total edge length.  SampledNetwork is a
node discretization along the edges used to carry measures and vector
fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateGeometryError, ValidationError

MIN_EDGE_LENGTH = 1e-12


@dataclass(frozen=True, eq=False)
class Network:
    vertices: np.ndarray  # (V, d) float64
    edges: np.ndarray     # (E, 2) int, rows sorted u < v

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        edges = np.asarray(self.edges, dtype=int)
        if verts.ndim != 2 or verts.shape[0] < 1:
            raise ValidationError("vertices must be a nonempty (V, d) array")
        if not np.all(np.isfinite(verts)):
            raise ValidationError("vertices must be finite")
        if edges.size == 0:
            edges = np.empty((0, 2), dtype=int)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise ValidationError("edges must be an (E, 2) array of vertex indices")
        V = verts.shape[0]
        if edges.size:
            if edges.min() < 0 or edges.max() >= V:
                raise ValidationError("edge endpoint index out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValidationError("self-loop edges are not allowed")
            edges = np.sort(edges, axis=1)
            keys = edges[:, 0].astype(np.int64) * V + edges[:, 1]
            if len(np.unique(keys)) != len(keys):
                raise ValidationError("duplicate edges are not allowed")
            lengths = np.linalg.norm(verts[edges[:, 1]] - verts[edges[:, 0]], axis=1)
            if np.any(lengths < MIN_EDGE_LENGTH):
                k = int(np.argmin(lengths))
                raise DegenerateGeometryError(
                    f"edge {k} has length {lengths[k]:.3e} < {MIN_EDGE_LENGTH}")
        if V > 1:
            if not edges.size:
                raise ValidationError("network with several vertices has no edges (disconnected)")
            graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(V, V))
            ncomp, _ = connected_components(graph, directed=False)
            if ncomp != 1:
                raise ValidationError(f"network is disconnected ({ncomp} components)")
        verts = np.ascontiguousarray(verts)
        edges = np.ascontiguousarray(edges)
        verts.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def edge_lengths(self) -> np.ndarray:
        if not self.edges.size:
            return np.empty(0)
        return np.linalg.norm(self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_vertices, dtype=int)
        if self.edges.size:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def with_vertices(self, vertices) -> "Network":
        """Same combinatorics with new vertex positions."""
        return Network(np.asarray(vertices, dtype=float), self.edges.copy())

    def to_json_dict(self) -> dict:
        return {"dim": self.dim, "vertices": self.vertices.tolist(), "edges": self.edges.tolist()}

    @classmethod
    def from_json_dict(cls, data: dict) -> "Network":
        verts = np.asarray(data["vertices"], dtype=float)
        if "dim" in data and verts.size and int(data["dim"]) != verts.shape[1]:
            raise ValidationError("declared dim does not match vertex coordinates")
        return cls(verts, np.asarray(data["edges"], dtype=int).reshape(-1, 2))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "Network":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def total_length(net: Network) -> float:
    """Total edge length (the network's one-dimensional volume)."""
    return float(net.edge_lengths().sum())


@dataclass(frozen=True, eq=False)
class TopologyReport:
    endpoint_count: int
    branch_point_count: int
    max_degree: int
    cycle_rank: int
    articulation_vertex_ids: np.ndarray
    endpoint_vertex_ids: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "endpoint_count": self.endpoint_count,
            "branch_point_count": self.branch_point_count,
            "max_degree": self.max_degree,
            "cycle_rank": self.cycle_rank,
            "articulation_vertex_ids": self.articulation_vertex_ids.tolist(),
            "endpoint_vertex_ids": self.endpoint_vertex_ids.tolist(),
        }


def _articulation_points(num_vertices: int, edges: np.ndarray) -> np.ndarray:
    """Iterative depth-first low-link computation."""
    adj: list[list[int]] = [[] for _ in range(num_vertices)]
    for u, v in edges:
        adj[u].append(int(v))
        adj[v].append(int(u))
    disc = np.full(num_vertices, -1, dtype=int)
    low = np.zeros(num_vertices, dtype=int)
    is_art = np.zeros(num_vertices, dtype=bool)
    timer = 0
    for root in range(num_vertices):
        if disc[root] != -1:
            continue
        root_children = 0
        stack = [(root, -1, iter(adj[root]))]
        disc[root] = low[root] = timer
        timer += 1
        while stack:
            u, parent, it = stack[-1]
            advanced = False
            for v in it:
                if v == parent:
                    continue
                if disc[v] == -1:
                    disc[v] = low[v] = timer
                    timer += 1
                    if u == root:
                        root_children += 1
                    stack.append((v, u, iter(adj[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if not advanced:
                stack.pop()
                if stack:
                    pu = stack[-1][0]
                    low[pu] = min(low[pu], low[u])
                    if pu != root and low[u] >= disc[pu]:
                        is_art[pu] = True
        if root_children > 1:
            is_art[root] = True
    return np.flatnonzero(is_art)


def topology_report(net: Network) -> TopologyReport:
    """Degrees, endpoints, branch points, cycle rank, articulation vertices."""
    deg = net.degrees()
    endpoints = np.flatnonzero(deg == 1)
    cycle_rank = net.num_edges - net.num_vertices + 1
    return TopologyReport(
        endpoint_count=int((deg == 1).sum()),
        branch_point_count=int((deg >= 3).sum()),
        max_degree=int(deg.max()) if len(deg) else 0,
        cycle_rank=int(cycle_rank),
        articulation_vertex_ids=_articulation_points(net.num_vertices, net.edges),
        endpoint_vertex_ids=endpoints,
    )


@dataclass(frozen=True, eq=False)
class SampledNetwork:
    """Nodes along the network at spacing <= h; every vertex is a node.

    Nodes 0..V-1 are the base vertices; interior nodes follow grouped by
    edge.  edge_nodes[e] lists that edge's node ids ordered by the edge
    parameter t (t = 0 at the lower vertex index of the edge).
    """

    base: Network
    node_pos: np.ndarray    # (K, d)
    node_edge: np.ndarray   # (K,) owning edge per node (-1 for a lone vertex)
    node_t: np.ndarray      # (K,)
    spacing: float
    vertex_node: np.ndarray        # (V,) node id of each base vertex
    edge_nodes: tuple               # per edge: np.ndarray of node ids sorted by t
    edge_node_t: tuple              # per edge: matching t values

    @property
    def num_nodes(self) -> int:
        return self.node_pos.shape[0]

    def polyline_length(self) -> float:
        """Length of the node polyline; equals the base network's length."""
        tot = 0.0
        for ids in self.edge_nodes:
            seg = self.node_pos[ids]
            tot += float(np.linalg.norm(np.diff(seg, axis=0), axis=1).sum())
        return tot

    def nu_centroid(self, node_mass: np.ndarray) -> np.ndarray:
        return node_mass @ self.node_pos


def subdivide(net: Network, h: float) -> SampledNetwork:
    """Sample the network at spacing <= h.  Node positions are the linear
    interpolation of the owning edge's endpoints."""
    if h <= 0:
        raise ValidationError("subdivision spacing h must be positive")
    V = net.num_vertices
    verts = net.vertices
    lengths = net.edge_lengths()

    node_pos = [verts]
    node_edge = np.full(V, -1, dtype=int)
    node_t = np.zeros(V)
    for e, (u, v) in enumerate(net.edges):
        if node_edge[u] == -1:
            node_edge[u] = e
            node_t[u] = 0.0
        if node_edge[v] == -1:
            node_edge[v] = e
            node_t[v] = 1.0
    node_edge = [node_edge]
    node_t = [node_t]

    edge_nodes = []
    edge_node_t = []
    next_id = V
    for e, (u, v) in enumerate(net.edges):
        m = max(1, int(np.ceil(lengths[e] / h)))
        ts = np.arange(1, m) / m
        ids = np.concatenate([[u], np.arange(next_id, next_id + len(ts)), [v]]).astype(int)
        tvals = np.concatenate([[0.0], ts, [1.0]])
        if len(ts):
            node_pos.append(verts[u] + ts[:, None] * (verts[v] - verts[u]))
            node_edge.append(np.full(len(ts), e, dtype=int))
            node_t.append(ts)
            next_id += len(ts)
        edge_nodes.append(ids)
        edge_node_t.append(tvals)

    pos = np.vstack(node_pos)
    pos.setflags(write=False)
    return SampledNetwork(
        base=net,
        node_pos=pos,
        node_edge=np.concatenate(node_edge),
        node_t=np.concatenate(node_t),
        spacing=float(h),
        vertex_node=np.arange(V),
        edge_nodes=tuple(edge_nodes),
        edge_node_t=tuple(edge_node_t),
    )


def simplify(net: Network, min_edge: float) -> Network:
    """Contract edges shorter than min_edge, merging their endpoints.

    Merged vertices move to the mean of their cluster, so the output stays
    within min_edge (Hausdorff) of the input.  Interior degree-2 vertices
    are retained; only short edges are contracted.
    """
    if min_edge < 0:
        raise ValidationError("min_edge must be nonnegative")
    verts = net.vertices.copy()
    edges = net.edges.copy()
    for _ in range(64):
        if not edges.size:
            break
        lengths = np.linalg.norm(verts[edges[:, 1]] - verts[edges[:, 0]], axis=1)
        short = lengths < min_edge
        if not short.any():
            break
        parent = np.arange(len(verts))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v in edges[short]:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[max(ru, rv)] = min(ru, rv)
        roots = np.array([find(i) for i in range(len(verts))])
        _, label = np.unique(roots, return_inverse=True)
        count = np.bincount(label).astype(float)
        merged = np.zeros((len(count), verts.shape[1]))
        np.add.at(merged, label, verts)
        verts = merged / count[:, None]
        edges = label[edges]
        edges = edges[edges[:, 0] != edges[:, 1]]
        if edges.size:
            edges = np.sort(edges, axis=1)
            keys = edges[:, 0].astype(np.int64) * len(verts) + edges[:, 1]
            _, first = np.unique(keys, return_index=True)
            edges = edges[np.sort(first)]
    return Network(verts, edges)


def move_vertices(net: Network, delta: np.ndarray) -> Network:
    """Translate each vertex by its row of delta; raises on a collapsed edge."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != net.vertices.shape:
        raise ValidationError(f"delta shape {delta.shape} does not match vertices {net.vertices.shape}")
    return net.with_vertices(net.vertices + delta)
