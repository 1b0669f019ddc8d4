import numpy as np
import pytest

from oracles import brute_force_assignment, brute_force_point_cost
from vecmap.assignment import (
    GroundTruthSet,
    PredictionSet,
    classification_cost,
    hungarian_assign,
    instance_matching,
    point_matching_cost,
)
from vecmap.errors import DomainError
from vecmap.geometry import (
    ElementKind,
    MapClass,
    MapElement,
    apply_permutation,
    enumerate_permutations,
)

DIVIDER = ElementKind.for_class(MapClass.DIVIDER)
CROSSING = ElementKind.for_class(MapClass.PED_CROSSING)
STOP = ElementKind.for_class(MapClass.STOP_LINE)


def _one_hot(labels, n_cols=4):
    s = np.zeros((len(labels), n_cols))
    s[np.arange(len(labels)), labels] = 1.0
    return s


def test_point_cost_identity_and_reversal(rng):
    gt = MapElement(DIVIDER, rng.random((6, 2)))
    assert point_matching_cost(gt, gt) == (0.0, 0)
    reversed_pred = MapElement(DIVIDER, gt.points[::-1])
    assert point_matching_cost(reversed_pred, gt) == (0.0, 1)


def test_point_cost_polygon_brute_force(rng):
    for _ in range(20):
        gt = MapElement(CROSSING, rng.random((5, 2)))
        pred = rng.random((5, 2))
        group = enumerate_permutations(CROSSING, 5)
        assert len(group) == 10
        expected = brute_force_point_cost(pred.tolist(), gt.points.tolist(), group.permutations.tolist())
        assert point_matching_cost(pred, gt, group) == expected


def test_point_cost_tie_breaks_on_target_geometry():
    # A symmetric polygon: every rotation/reflection of a square at the origin
    # fits the same prediction with the same cost. The winner is the target
    # sequence starting (-1, 0), (0, -1), i.e. the rotation by two.
    gt = MapElement(CROSSING, [(1, 0), (0, 1), (-1, 0), (0, -1)])
    cost, k = point_matching_cost(np.zeros((4, 2)), gt)
    assert (cost, k) == (4.0, 4)
    group = enumerate_permutations(CROSSING, 4)
    assert gt.points[group[k]].tolist() == [[-1, 0], [0, -1], [1, 0], [0, 1]]


def test_point_cost_tie_choice_ignores_gt_labelling(rng):
    # Manhattan ties are not measure-zero: swapping two targets keeps
    # |a - c| + |b - d| whenever the coordinates nest. The chosen target
    # sequence must not depend on which group member the gt is stored as.
    group = enumerate_permutations(CROSSING, 4)
    ties = 0
    for _ in range(300):
        gt = MapElement(CROSSING, rng.random((4, 2)))
        pred = rng.random((4, 2))
        costs = [sum(np.abs(pred - gt.points[g]).sum(1)) for g in group]
        ties += len(set(costs)) < len(costs)
        _, k = point_matching_cost(pred, gt)
        chosen = gt.points[group[k]]
        for g in group:
            other = apply_permutation(gt, g)
            _, k2 = point_matching_cost(pred, other)
            assert np.array_equal(other.points[group[k2]], chosen)
    assert ties > 0


def test_point_cost_size_mismatch():
    gt = MapElement(DIVIDER, [(0, 0), (1, 0), (2, 0)])
    with pytest.raises(DomainError, match="mismatch"):
        point_matching_cost(np.zeros((4, 2)), gt)


@pytest.mark.parametrize("kind,n", [(DIVIDER, 5), (CROSSING, 6)])
def test_point_cost_invariant_under_group(kind, n, rng):
    gt = MapElement(kind, rng.random((n, 2)))
    pred = rng.random((n, 2))
    base = point_matching_cost(pred, gt)[0]
    for gamma in enumerate_permutations(kind, n):
        assert point_matching_cost(pred, apply_permutation(gt, gamma))[0] == base


@pytest.mark.parametrize("scores,label,expected", [
    ([1, 0, 0, 0], 0, -1.0),
    ([0.25, 0.25, 0.25, 0.25], 2, -0.25),
    ([0.1, 0.6, 0.2, 0.1], 1, -0.6),
])
def test_classification_cost(scores, label, expected):
    assert classification_cost(scores, label) == expected


def test_classification_cost_label_range():
    with pytest.raises(DomainError):
        classification_cost([0.5, 0.5, 0, 0], 4)


def test_hungarian_small_examples():
    rows = hungarian_assign(1.0 - np.eye(3))
    assert rows.tolist() == [0, 1, 2]
    assert hungarian_assign([[1, 2], [2, 1]]).tolist() == [0, 1]


def test_hungarian_all_ties_is_lexicographic():
    assert hungarian_assign(np.zeros((4, 3))).tolist() == [0, 1, 2]
    assert hungarian_assign(np.ones((5, 2))).tolist() == [0, 1]


def test_hungarian_random_7x7(rng):
    cost = rng.integers(0, 100, (7, 7)).astype(float)
    best, best_rows = brute_force_assignment(cost.tolist())
    rows = hungarian_assign(cost)
    assert sum(cost[r, c] for c, r in enumerate(rows)) == best
    assert rows.tolist() == best_rows


def test_hungarian_rectangular_and_ties(rng):
    for _ in range(100):
        c = int(rng.integers(1, 5))
        r = int(rng.integers(c, 7))
        cost = rng.integers(0, 3, (r, c)).astype(float)
        best, best_rows = brute_force_assignment(cost.tolist())
        assert hungarian_assign(cost).tolist() == best_rows


def test_hungarian_scale_invariance(rng):
    cost = rng.random((6, 4))
    assert hungarian_assign(cost).tolist() == hungarian_assign(cost * 37.5).tolist()


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[1.0, np.nan], [0, 1]]),
                                 np.array([[np.inf]])])
def test_hungarian_rejects(bad):
    with pytest.raises(DomainError):
        hungarian_assign(bad)


def test_hungarian_empty():
    assert hungarian_assign(np.zeros((3, 0))).tolist() == []


def _gt_set(rng, labels, n=5):
    return GroundTruthSet([MapElement(ElementKind.for_class(MapClass(l)), rng.random((n, 2)))
                           for l in labels])


def test_instance_matching_identity(rng):
    gts = _gt_set(rng, [0, 1, 2, 1])
    preds = PredictionSet.from_scores(np.stack([g.points for g in gts]), _one_hot(gts.labels))
    m = instance_matching(preds, gts)
    assert m.pred_of_gt().tolist() == [0, 1, 2, 3]
    assert sum(p.point_cost for p in m.pairs) == 0.0
    assert m.unmatched == ()


def test_instance_matching_single_overlap():
    gt = MapElement(DIVIDER, [(0.1, 0.1), (0.2, 0.1), (0.3, 0.1)])
    far = np.array([[0.9, 0.9], [0.8, 0.9], [0.7, 0.9]])
    points = np.stack([far, far + 0.05, gt.points])
    scores = np.full((3, 4), 0.25)
    m = instance_matching(PredictionSet.from_scores(points, scores), GroundTruthSet([gt]))
    assert m.pred_of_gt().tolist() == [2]
    assert m.unmatched == (0, 1)
    # exhaustive: the three candidate assignments
    candidates = [10 * -0.25 + 5 * point_matching_cost(points[i], gt)[0] for i in range(3)]
    assert int(np.argmin(candidates)) == 2


def test_instance_matching_recovers_shuffle(rng):
    gts = _gt_set(rng, [0, 1, 2, 2, 1, 0])
    shuffle = rng.permutation(len(gts))
    points = np.stack([gts[i].points for i in shuffle])
    preds = PredictionSet.from_scores(points, _one_hot(gts.labels[shuffle]))
    m = instance_matching(preds, gts)
    pred_of_gt = m.pred_of_gt()
    assert np.array_equal(shuffle[pred_of_gt], np.arange(len(gts)))


def test_instance_matching_invariant_to_gt_order(rng):
    gts = _gt_set(rng, [0, 1, 2, 1], n=4)
    preds = PredictionSet(rng.random((7, 4, 2)), rng.normal(size=(7, 4)))
    order = rng.permutation(len(gts))
    m1 = instance_matching(preds, gts)
    m2 = instance_matching(preds, GroundTruthSet([gts[i] for i in order]))
    pairs1 = {(p.pred, order.tolist().index(p.gt)) for p in m1.pairs}
    pairs2 = {(p.pred, p.gt) for p in m2.pairs}
    assert pairs1 == pairs2


def test_instance_matching_reversed_prediction_gamma():
    gt = MapElement(STOP, [(0.1, 0.5), (0.2, 0.5), (0.4, 0.5)])
    preds = PredictionSet.from_scores(gt.points[::-1][None], _one_hot([2]))
    pair = instance_matching(preds, GroundTruthSet([gt])).pairs[0]
    assert pair.gamma_index == 1 and pair.gamma.tolist() == [2, 1, 0] and pair.point_cost == 0.0


def test_query_budget():
    gts = [MapElement(DIVIDER, [(0, 0), (1, 0)])] * 3
    with pytest.raises(DomainError, match="budget"):
        GroundTruthSet(gts, n_queries=2)
    preds = PredictionSet.from_scores(np.zeros((2, 2, 2)), np.full((2, 4), 0.25))
    with pytest.raises(DomainError, match="exceed"):
        instance_matching(preds, GroundTruthSet(gts))


def test_prediction_scores_validated():
    with pytest.raises(DomainError):
        PredictionSet.from_scores(np.zeros((1, 2, 2)), [[0.5, 0.5, 0.5, 0.0]])
