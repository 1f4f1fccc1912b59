import numpy as np
import pytest

import adpnet as A
from adpnet.errors import ValidationError
from conftest import random_tree_network


def test_config_validation():
    with pytest.raises(ValidationError):
        A.SolverConfig(mode="hard").validate()  # no budget
    with pytest.raises(ValidationError):
        A.SolverConfig(mode="soft").validate()  # no penalty
    with pytest.raises(ValidationError):
        A.SolverConfig(mode="hard", length=1.0, lam=0.1).validate()
    with pytest.raises(ValidationError):
        A.SolverConfig(mode="bogus", length=1.0).validate()
    A.SolverConfig(mode="hard", length=1.0).validate()
    A.SolverConfig(mode="soft", lam=0.1).validate()


def test_init_zero_budget(square_measure):
    net = A.init_network(square_measure, 0.0)
    assert net.num_vertices == 1
    np.testing.assert_allclose(net.vertices[0], square_measure.mean())


def test_init_principal_segment_on_line():
    mu = A.sample_density(A.DensitySpec.segment([0, 0], [2, 2]), 200, seed=1)
    net = A.init_network(mu, 1.0, "principal_segment")
    # the segment lies on the diagonal through the mean
    resid = net.vertices[:, 0] - net.vertices[:, 1]
    np.testing.assert_allclose(resid - resid[0], 0, atol=1e-9)
    assert A.total_length(net) <= 1.0 + 1e-12


def test_init_mst_connected_within_budget(square_measure):
    for l in (0.4, 1.0, 2.5):
        net = A.init_network(square_measure, l, "mst_of_centers", seed=2)
        assert A.total_length(net) <= l + 1e-9
        assert A.topology_report(net).cycle_rank == 0  # connectivity is enforced by the type


def test_enforce_length_identity(small_net):
    out = A.enforce_length(small_net, 100.0, np.zeros(2))
    assert out is small_net


def test_enforce_length_halves():
    net = A.Network(np.array([[0, 0], [2, 0]]), np.array([[0, 1]]))
    out = A.enforce_length(net, 1.0, np.array([0.0, 0.0]))
    assert abs(A.total_length(out) - 1.0) < 1e-12
    dist_before = np.linalg.norm(net.vertices, axis=1)
    dist_after = np.linalg.norm(out.vertices, axis=1)
    np.testing.assert_allclose(dist_after, 0.5 * dist_before, atol=1e-12)


def test_enforce_length_idempotent(rng):
    net = random_tree_network(rng, 6)
    center = net.vertices.mean(axis=0)
    once = A.enforce_length(net, 0.7, center)
    twice = A.enforce_length(once, 0.7, center)
    np.testing.assert_allclose(twice.vertices, once.vertices, atol=1e-12)
    assert abs(A.total_length(twice) - A.total_length(once)) < 1e-12


def test_snap_existing_vertex(small_net):
    out, vid = A.snap_to_vertex(small_net, small_net.vertices[2])
    assert out is small_net and vid == 2


def test_snap_edge_midpoint():
    net = A.Network(np.array([[0, 0], [1, 0]]), np.array([[0, 1]]))
    mid = np.array([0.5, 0.0])
    out, vid = A.snap_to_vertex(net, mid)
    assert out.num_vertices == 3
    np.testing.assert_allclose(out.vertices[vid], mid)
    lengths = np.sort(out.edge_lengths())
    np.testing.assert_allclose(lengths, [0.5, 0.5])
    assert abs(A.total_length(out) - 1.0) < 1e-12


def test_snap_far_point_rejected(small_net):
    with pytest.raises(ValidationError):
        A.snap_to_vertex(small_net, np.array([50.0, 50.0]))


def test_solve_zero_budget_is_frechet_mean(square_measure):
    M = square_measure.diameter()
    res = A.solve(square_measure, A.SolverConfig(p=2.0, mode="hard", length=0.0, max_iters=60))
    assert res.network.num_vertices == 1
    assert np.linalg.norm(res.network.vertices[0] - square_measure.mean()) <= 1e-6 * M


def test_solve_segment_coverage():
    mu = A.sample_density(A.DensitySpec.segment([0, 0], [1, 0]), 300, seed=2)
    M = mu.diameter()
    res = A.solve(mu, A.SolverConfig(p=2.0, mode="hard", length=1.2,
                                     init_strategy="principal_segment", max_iters=120))
    assert res.j_value <= 1e-4 * M * M


def test_solve_hard_feasible_trace(square_measure):
    cfg = A.SolverConfig(p=2.0, mode="hard", length=0.8, max_iters=120, seed=1)
    res = A.solve(square_measure, cfg)
    # every recorded iterate satisfies the budget
    assert all(h <= 0.8 + 1e-9 for h in res.trace["H1"])
    # the objective trace never rises by more than the maintenance slack
    J = res.trace["J_p"]
    assert all(J[k + 1] <= J[k] + 2 * cfg.grad_tol for k in range(len(J) - 1))
    assert res.j_value == J[-1]


def test_solve_structure_small_square(square_measure):
    cfg = A.SolverConfig(p=2.0, mode="hard", length=1.0, max_iters=200, seed=0)
    res = A.solve(square_measure, cfg)
    rep = A.topology_report(res.network)
    assert rep.cycle_rank == 0
    assert rep.max_degree <= 3
    assert A.total_length(res.network) <= 1.0 + 1e-9


def test_solve_warm_start_not_worse(square_measure):
    cfg = A.SolverConfig(p=2.0, mode="hard", length=0.6, max_iters=150, seed=0)
    cold = A.solve(square_measure, cfg)
    warm_init = A.solve(square_measure, A.SolverConfig(p=2.0, mode="hard", length=0.3,
                                                       max_iters=150, seed=0)).network
    warm = A.solve(square_measure, cfg, init=warm_init)
    assert warm.j_value <= cold.j_value + 1e-6


def test_sweep_monotone(square_measure):
    cfg = A.SolverConfig(p=2.0, mode="hard", length=0.3, max_iters=150, seed=0)
    sw = A.sweep(square_measure, 2.0, [0.3, 0.6, 1.2], cfg)
    assert np.all(np.diff(sw.j_values) < 0)
    assert np.all(sw.quotients <= 1e-6)


def test_sweep_validation(square_measure):
    with pytest.raises(ValidationError):
        A.sweep(square_measure, 2.0, [0.5, 0.5])


def test_solve_p3(square_measure):
    res = A.solve(square_measure, A.SolverConfig(p=3.0, mode="hard", length=0.8,
                                                 max_iters=120, seed=0))
    assert res.j_value > 0
    assert A.total_length(res.network) <= 0.8 + 1e-9
    assert A.topology_report(res.network).cycle_rank == 0
    # translation stationarity holds away from p = 2 as well
    M = square_measure.diameter()
    assert np.linalg.norm(res.field.net) <= 1e-3 * 3.0 * M ** 2


def test_solve_soft_smoke():
    mu = A.sample_density(A.DensitySpec.uniform_disk([0, 0], 1.0), 400, seed=5)
    res = A.solve(mu, A.SolverConfig(p=2.0, mode="soft", lam=0.08, max_iters=150, seed=0))
    assert A.total_length(res.network) > 0
    assert A.topology_report(res.network).cycle_rank == 0
    # soft objective at the result beats the single-point alternative
    point = A.Network(mu.mean()[None, :], np.empty((0, 2)))
    j_point = A.j_p(mu, A.project(mu, point), 2.0)
    assert res.j_value + 0.08 * A.total_length(res.network) < j_point


def test_solve_result_io(tmp_path, square_measure):
    res = A.solve(square_measure, A.SolverConfig(p=2.0, mode="hard", length=0.5,
                                                 max_iters=40, seed=0))
    res.save(tmp_path / "solution.json")
    res.trace_csv(tmp_path / "trace.csv")
    import json
    data = json.loads((tmp_path / "solution.json").read_text())
    assert set(data) >= {"network", "j_value", "trace", "config", "converged"}
    header = (tmp_path / "trace.csv").read_text().splitlines()[0]
    assert header == "iter,J_p,H1,B_l2sq,net_norm"
