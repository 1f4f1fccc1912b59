import numpy as np
import pytest

import adpnet as A
from adpnet.errors import ValidationError
from conftest import random_tree_network


def test_endpoint_projection():
    net = A.Network(np.array([[0, 0], [1, 0]]), np.array([[0, 1]]))
    mu = A.DiscreteMeasure.from_arrays([[2.0, 0.0], [0.5, 1.0]])
    t = A.project(mu, net)
    np.testing.assert_allclose(t.foot[0], [1, 0])
    assert abs(t.distance[0] - 1.0) < 1e-15
    np.testing.assert_allclose(t.foot[1], [0.5, 0.0])


def _parallel_segments_net():
    # two long horizontal segments joined by a short spine at x = 0
    verts = np.array([[0, 0], [3, 0], [0, 2], [3, 2], [0, 1]], dtype=float)
    edges = np.array([[0, 1], [2, 3], [0, 4], [4, 2]])
    return A.Network(verts, edges)


def test_parallel_segments_ambiguous():
    net = _parallel_segments_net()
    mu = A.DiscreteMeasure.from_arrays([[2.0, 1.0], [0.2, 1.0]])
    t = A.project(mu, net)
    assert bool(t.ambiguous[0])    # equidistant from both horizontals
    assert not bool(t.ambiguous[1])  # spine is strictly nearer


def test_single_segment_unambiguous(rng):
    net = A.Network(np.array([[0, 0], [1, 0]]), np.array([[0, 1]]))
    mu = A.DiscreteMeasure.from_arrays(rng.uniform(-1, 2, size=(200, 2)))
    t = A.project(mu, net)
    assert A.ambiguous_mass(t, mu) == 0.0


def test_dense_sampling_oracle(rng):
    # exact projection vs nearest node of a very fine subdivision
    net = random_tree_network(rng, 5)
    mu = A.DiscreteMeasure.from_arrays(rng.uniform(-0.2, 1.2, size=(500, 2)))
    t = A.project(mu, net)
    s = A.subdivide(net, 1e-4)
    from scipy.spatial import cKDTree
    tree = cKDTree(s.node_pos)
    dist, idx = tree.query(mu.points)
    assert np.all(np.abs(dist - t.distance) < 1e-6)
    assert np.all(np.linalg.norm(s.node_pos[idx] - t.foot, axis=1) < 1e-3)


def test_accelerated_matches_bruteforce(rng):
    for k in range(6):
        net = random_tree_network(rng, 4 + 3 * k)
        mu = A.DiscreteMeasure.from_arrays(rng.uniform(-0.5, 1.5, size=(150, 2)))
        a = A.project(mu, net, method="tree")
        b = A.project_bruteforce(mu, net)
        np.testing.assert_array_equal(a.distance, b.distance)
        np.testing.assert_array_equal(a.foot, b.foot)
        np.testing.assert_array_equal(a.edge, b.edge)
        np.testing.assert_array_equal(a.ambiguous, b.ambiguous)


def test_distance_function_lipschitz(rng):
    net = random_tree_network(rng, 6)
    pts = rng.uniform(-0.5, 1.5, size=(100, 2))
    mu = A.DiscreteMeasure.from_arrays(pts)
    t = A.project(mu, net)
    for _ in range(200):
        i, j = rng.integers(0, 100, size=2)
        assert abs(t.distance[i] - t.distance[j]) <= np.linalg.norm(pts[i] - pts[j]) + 1e-12


def test_dimension_mismatch():
    net = A.Network(np.array([[0, 0], [1, 0]]), np.array([[0, 1]]))
    mu = A.DiscreteMeasure.from_arrays([[0.0, 0.0, 0.0]])
    with pytest.raises(ValidationError):
        A.project(mu, net)


def test_tie_break_lowest_edge_index():
    # two edges meeting at the exact foot point: lowest index wins
    net = A.Network(np.array([[0, 0], [1, 0], [2, 0]]), np.array([[0, 1], [1, 2]]))
    mu = A.DiscreteMeasure.from_arrays([[1.0, 1.0]])
    t = A.project(mu, net)
    assert t.edge[0] == 0 and abs(t.t[0] - 1.0) < 1e-15


def test_pushforward_concentration():
    net = A.Network(np.array([[0, 0], [1, 0]]), np.array([[0, 1]]))
    mu = A.DiscreteMeasure.from_arrays([[2.0, 1.0], [3.0, -1.0]])
    s = A.subdivide(net, 0.25)
    pf = A.pushforward(A.project(mu, net), s, mu)
    assert abs(pf.node_mass[1] - 1.0) < 1e-12  # all mass at the right endpoint


def test_pushforward_symmetry():
    net = A.Network(np.array([[-1, 0], [1, 0]]), np.array([[0, 1]]))
    pts = np.array([[-0.5, 0.4], [0.5, 0.4], [-0.5, -0.4], [0.5, -0.4]])
    mu = A.DiscreteMeasure.from_arrays(pts)
    s = A.subdivide(net, 0.5)
    pf = A.pushforward(A.project(mu, net), s, mu)
    masses = pf.node_mass[pf.node_mass > 0]
    assert np.allclose(masses, masses[::-1])


def test_pushforward_total_mass(rng, square_measure, small_net):
    s = A.subdivide(small_net, 0.05)
    pf = A.pushforward(A.project(square_measure, small_net), s, square_measure)
    assert abs(pf.node_mass.sum() - 1.0) <= 1e-12
    # fibers partition the measure points
    counts = np.zeros(square_measure.size, dtype=int)
    for fib in pf.fiber:
        counts[fib] += 1
    assert np.all(counts == 1)


def test_pushforward_rigid_invariance(rng, small_net):
    pts = rng.uniform(size=(80, 2))
    mu = A.DiscreteMeasure.from_arrays(pts)
    s = A.subdivide(small_net, 0.05)
    pf = A.pushforward(A.project(mu, small_net), s, mu)
    theta = 0.7
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    shift = np.array([2.0, -1.0])
    mu2 = A.DiscreteMeasure.from_arrays(pts @ R.T + shift)
    net2 = small_net.with_vertices(small_net.vertices @ R.T + shift)
    s2 = A.subdivide(net2, 0.05)
    pf2 = A.pushforward(A.project(mu2, net2), s2, mu2)
    np.testing.assert_allclose(pf.node_mass, pf2.node_mass, atol=1e-12)


def test_constructed_full_ambiguity():
    # cloud on the exact bisector of the two parallel segments, far from the spine
    net = _parallel_segments_net()
    xs = np.linspace(1.5, 2.8, 10)
    mu = A.DiscreteMeasure.from_arrays(np.column_stack([xs, np.ones(10)]))
    t = A.project(mu, net)
    assert A.ambiguous_mass(t, mu) == 1.0


def test_projection_csv_export(tmp_path, square_measure, small_net):
    t = A.project(square_measure, small_net)
    path = tmp_path / "proj.csv"
    t.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,distance,edge,t,ambiguous"
    assert len(lines) == square_measure.size + 1


def test_vertex_only_network():
    net = A.Network(np.array([[0.5, 0.5]]), np.empty((0, 2)))
    mu = A.DiscreteMeasure.from_arrays([[1.5, 0.5], [0.5, 0.0]])
    t = A.project(mu, net)
    np.testing.assert_allclose(t.distance, [1.0, 0.5])
    assert np.all(t.edge == -1)


def test_threaded_scan_matches_serial(rng, monkeypatch):
    net = random_tree_network(rng, 10)
    mu = A.DiscreteMeasure.from_arrays(rng.uniform(-0.5, 1.5, size=(3000, 2)))
    serial = A.project(mu, net, method="scan")
    monkeypatch.setenv("ADPNET_THREADS", "4")
    threaded = A.project(mu, net, method="scan")
    np.testing.assert_array_equal(serial.distance, threaded.distance)
    np.testing.assert_array_equal(serial.foot, threaded.foot)
    np.testing.assert_array_equal(serial.ambiguous, threaded.ambiguous)


def test_table_internal_consistency(rng, square_measure, small_net):
    t = A.project(square_measure, small_net)
    # distance equals the gap to the stored foot
    direct = np.linalg.norm(square_measure.points - t.foot, axis=1)
    assert np.all(np.abs(direct - t.distance) < 1e-12)
    # the stored foot matches the reported (edge, t) parameters
    a = small_net.vertices[small_net.edges[t.edge, 0]]
    b = small_net.vertices[small_net.edges[t.edge, 1]]
    recon = a + t.t[:, None] * (b - a)
    assert np.all(np.linalg.norm(recon - t.foot, axis=1) < 1e-12)
