import numpy as np
import pytest

from oracles import brute_force_point_cost, chamfer_pairwise
from vecmap import kernels
from vecmap.geometry import Shape, enumerate_permutations


def test_selected_backend_is_known():
    assert kernels.BACKEND in kernels.available_backends()


@pytest.mark.parametrize("shape,n", [(Shape.POLYLINE_UNDIRECTED, 5), (Shape.POLYGON, 6),
                                     (Shape.POLYLINE_DIRECTED, 3)])
def test_permutation_costs_match_brute_force(backend, shape, n, rng):
    perms = enumerate_permutations(shape, n).permutations
    preds = rng.random((9, n, 2))
    gt = rng.random((n, 2))
    costs, idx = backend.best_permutation_costs(preds, gt, perms)
    for i in range(len(preds)):
        expected = brute_force_point_cost(preds[i].tolist(), gt.tolist(), perms.tolist())
        assert (costs[i], idx[i]) == expected


def test_chamfer_matches_pairwise_oracle(backend, rng):
    a, b = rng.random((13, 2)), rng.random((7, 2))
    assert backend.chamfer(a, b) == pytest.approx(chamfer_pairwise(a.tolist(), b.tolist()), abs=1e-14)
    assert backend.chamfer(a, b) == backend.chamfer(b, a)


def test_lsa_square_duals(backend, rng):
    for n in (1, 2, 5, 9):
        cost = rng.random((n, n))
        col_of_row, u, v = backend.lsa_square(cost)
        assert sorted(col_of_row) == list(range(n))
        reduced = cost - u[:, None] - v[None, :]
        assert reduced.min() >= -1e-12
        assert np.allclose(reduced[np.arange(n), col_of_row], 0.0, atol=1e-12)


def test_backends_are_bit_identical(rng):
    backends = kernels.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled extension not built")
    py, cy = backends["python"], backends["cython"]
    perms = enumerate_permutations(Shape.POLYGON, 20).permutations
    preds, gt = rng.random((50, 20, 2)), rng.random((20, 2))
    for x, y in zip(py.best_permutation_costs(preds, gt, perms), cy.best_permutation_costs(preds, gt, perms)):
        assert np.array_equal(x, y)
    a, b = rng.random((100, 2)), rng.random((100, 2))
    assert py.chamfer(a, b) == cy.chamfer(a, b)
    for n in (3, 17, 50):
        cost = rng.integers(0, 4, (n, n)).astype(float) if n == 17 else rng.random((n, n))
        for x, y in zip(py.lsa_square(cost), cy.lsa_square(cost)):
            assert np.array_equal(x, y)
