import numpy as np
import pytest

import adpnet as A


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def square_measure():
    return A.sample_density(A.DensitySpec.uniform_box([0, 0], [1, 1]), 400, seed=3)


@pytest.fixture
def small_net():
    verts = np.array([[0.2, 0.4], [0.8, 0.6], [0.5, 0.85], [0.15, 0.75]])
    edges = np.array([[0, 1], [0, 2], [2, 3]])
    return A.Network(verts, edges)


def random_tree_network(rng, n_vertices=6, dim=2, scale=1.0, inside_points=None):
    """Random embedded tree: MST over random points (optionally convex
    combinations of a cloud so the tree sits inside its hull)."""
    if inside_points is None:
        pts = rng.uniform(0.1, 0.9, size=(n_vertices, dim)) * scale
    else:
        lam = rng.dirichlet(np.ones(len(inside_points)) * 0.3, size=n_vertices)
        pts = lam @ inside_points
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import minimum_spanning_tree
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    tree = minimum_spanning_tree(coo_matrix(d)).tocoo()
    edges = np.column_stack([tree.row, tree.col]).astype(int)
    return A.Network(pts, edges)
