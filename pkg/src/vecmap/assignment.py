"""Hierarchical matching: Hungarian instance assignment plus per-pair point ordering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DomainError
from .geometry import (
    DEFAULT_N_QUERIES,
    NUM_SCORE_COLUMNS,
    MapElement,
    PermutationGroup,
    permutation_group,
)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """N predicted elements as a point tensor plus class logits.

    ``points`` has shape ``(N, n_points, 2)`` and ``logits`` shape
    ``(N, 4)``; the last logit column is the no-object class. Use
    :meth:`from_scores` when only probabilities are available.
    """

    points: np.ndarray
    logits: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        logits = np.array(self.logits, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[2] != 2:
            raise DomainError(f"prediction points must be (N, n_points, 2), got {pts.shape}")
        if logits.shape != (pts.shape[0], NUM_SCORE_COLUMNS):
            raise DomainError(
                f"logits must be ({pts.shape[0]}, {NUM_SCORE_COLUMNS}), got {logits.shape}"
            )
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(logits))):
            raise DomainError("prediction points and logits must be finite")
        pts.setflags(write=False)
        logits.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "logits", logits)

    @classmethod
    def from_scores(cls, points, scores) -> "PredictionSet":
        scores = np.asarray(scores, dtype=np.float64)
        check_probabilities(scores)
        return cls(points, np.log(np.maximum(scores, 1e-300)))

    @property
    def scores(self) -> np.ndarray:
        return _softmax(self.logits)

    @property
    def n_points(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


def check_probabilities(scores, tol: float = 1e-6) -> None:
    s = np.asarray(scores, dtype=np.float64)
    if s.shape[-1] != NUM_SCORE_COLUMNS:
        raise DomainError(f"score vectors need {NUM_SCORE_COLUMNS} entries, got {s.shape[-1]}")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise DomainError("scores must be finite and non-negative")
    if np.any(np.abs(s.sum(axis=-1) - 1.0) > tol):
        raise DomainError("score vectors must sum to 1")


@dataclass(frozen=True)
class GroundTruthSet:
    elements: tuple[MapElement, ...]

    def __init__(self, elements: Sequence[MapElement], n_queries: int | None = None):
        object.__setattr__(self, "elements", tuple(elements))
        if n_queries is not None and len(self.elements) > n_queries:
            raise DomainError(
                f"{len(self.elements)} ground-truth elements exceed the query budget {n_queries}"
            )

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(e.label) for e in self.elements], dtype=np.intp)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]


@dataclass(frozen=True)
class MatchedPair:
    pred: int
    gt: int
    gamma_index: int
    gamma: np.ndarray
    point_cost: float


@dataclass(frozen=True)
class MatchResult:
    """Matched (prediction, ground truth) pairs, ordered by gt index."""

    pairs: tuple[MatchedPair, ...]
    unmatched: tuple[int, ...]
    total_cost: float

    def pred_of_gt(self) -> np.ndarray:
        return np.array([p.pred for p in self.pairs], dtype=np.intp)


def point_matching_cost(pred: MapElement | np.ndarray, gt: MapElement, group: PermutationGroup | None = None):
    """Best-permutation Manhattan cost between two elements.

    Returns ``(cost, gamma_index)`` where ``cost`` is the minimum over the
    ground truth's permutation group of ``sum_j |pred_j - gt_gamma(j)|_1``.
    """
    pred_pts = pred.points if isinstance(pred, MapElement) else np.asarray(pred, dtype=np.float64)
    if group is None:
        group = permutation_group(gt)
    if pred_pts.shape != gt.points.shape:
        raise DomainError(
            f"point count mismatch: prediction {pred_pts.shape[0]}, ground truth {gt.n_points}"
        )
    if group.n_points != gt.n_points or group.shape is not gt.shape:
        raise DomainError("permutation group does not match the ground-truth element")
    costs, idx = kernels.best_permutation_costs(pred_pts[None], gt.points, group.permutations)
    return float(costs[0]), int(idx[0])


def classification_cost(scores, label: int) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= int(label) < len(scores):
        raise DomainError(f"label {label} out of range for {len(scores)} scores")
    return -float(scores[int(label)])


def _augment(row: int, target: int, adj, owner, blocked_rows, seen) -> bool:
    # Alternating DFS: find a tight path from ``row`` to the free column ``target``.
    for col in adj[row]:
        if col in seen:
            continue
        seen.add(col)
        if col == target:
            owner[col] = row
            return True
        other = owner[col]
        if other in blocked_rows:
            continue
        if _augment(other, target, adj, owner, blocked_rows, seen):
            owner[col] = row
            return True
    return False


def _lexicographic_optimum(cost: np.ndarray, col_of_row: np.ndarray, u: np.ndarray,
                           v: np.ndarray, n_real: int) -> np.ndarray:
    """Among all optimal assignments, pick the lexicographically smallest.

    Optimal assignments are exactly the perfect matchings of the tight
    subgraph under the optimal duals. Rows are fixed in order, each to the
    smallest column that still admits a perfect matching.
    """
    n = cost.shape[0]
    scale = max(1.0, float(np.max(np.abs(cost)))) if cost.size else 1.0
    reduced = cost - u[:, None] - v[None, :]
    tight = reduced <= 1e-9 * scale
    adj = [list(np.flatnonzero(tight[i])) for i in range(n)]
    owner = {int(c): i for i, c in enumerate(col_of_row)}
    assign = [int(c) for c in col_of_row]
    fixed: set[int] = set()
    for row in range(n_real):
        for col in adj[row]:
            col = int(col)
            if col == assign[row]:
                break
            prev_owner = owner[col]
            if prev_owner in fixed:
                continue
            trial_owner = dict(owner)
            freed = assign[row]
            trial_owner[col] = row
            del trial_owner[freed]
            blocked = fixed | {row}
            seen = {col}
            if _augment(prev_owner, freed, adj, trial_owner, blocked, seen):
                owner = trial_owner
                for c, r in owner.items():
                    assign[r] = c
                break
        fixed.add(row)
    return np.array(assign, dtype=np.intp)


def hungarian_assign(costs) -> np.ndarray:
    """Minimum-cost assignment of every column to a distinct row.

    ``costs`` is ``R x C`` with ``R >= C`` (rows are predictions, columns
    ground truth). Returns an int array ``rows`` of length C. Ties resolve
    to the lexicographically smallest ``rows`` vector.
    """
    c = np.asarray(costs, dtype=np.float64)
    if c.ndim != 2:
        raise DomainError(f"cost matrix must be 2-D, got shape {c.shape}")
    r_count, c_count = c.shape
    if r_count < c_count:
        raise DomainError(f"cost matrix has fewer rows ({r_count}) than columns ({c_count})")
    if not np.all(np.isfinite(c)):
        raise DomainError("cost matrix contains non-finite entries")
    if c_count == 0:
        return np.empty(0, dtype=np.intp)
    # Square problem: one "worker" per gt column plus zero-cost dummies.
    square = np.zeros((r_count, r_count))
    square[:c_count, :] = c.T
    col_of_row, u, v = kernels.lsa_square(square)
    first = col_of_row[:c_count].copy()
    best = _lexicographic_optimum(square, col_of_row, u, v, c_count)[:c_count]
    if _total(c, best) <= _total(c, first):
        return best
    return first


def _total(c: np.ndarray, rows: np.ndarray) -> float:
    total = 0.0
    for col, row in enumerate(rows):
        total += c[row, col]
    return total


def matching_cost_matrix(preds: PredictionSet, gts: GroundTruthSet,
                         lambda_c: float = 10.0, lambda_p: float = 5.0):
    """Return ``(cost, point_cost, gamma_index)``, each ``N x M``."""
    n, m = len(preds), len(gts)
    scores = preds.scores
    point_cost = np.zeros((n, m))
    gamma_index = np.zeros((n, m), dtype=np.intp)
    for i, gt in enumerate(gts):
        if gt.n_points != preds.n_points:
            raise DomainError(
                f"ground truth {i} has {gt.n_points} points, predictions have {preds.n_points}"
            )
        group = permutation_group(gt)
        point_cost[:, i], gamma_index[:, i] = kernels.best_permutation_costs(
            preds.points, gt.points, group.permutations
        )
    labels = gts.labels
    cls_cost = -scores[:, labels] if m else np.zeros((n, 0))
    return lambda_c * cls_cost + lambda_p * point_cost, point_cost, gamma_index


def instance_matching(preds: PredictionSet, gts: GroundTruthSet,
                      lambda_c: float = 10.0, lambda_p: float = 5.0) -> MatchResult:
    """Hungarian-match predictions to ground truth and record per-pair orderings."""
    if len(gts) > len(preds):
        raise DomainError(
            f"{len(gts)} ground-truth elements exceed {len(preds)} predictions"
        )
    cost, point_cost, gamma_index = matching_cost_matrix(preds, gts, lambda_c, lambda_p)
    rows = hungarian_assign(cost)
    pairs = []
    for i, (row, gt) in enumerate(zip(rows, gts)):
        k = int(gamma_index[row, i])
        gamma = permutation_group(gt).permutations[k]
        pairs.append(MatchedPair(int(row), i, k, gamma, float(point_cost[row, i])))
    matched = set(int(r) for r in rows)
    unmatched = tuple(j for j in range(len(preds)) if j not in matched)
    return MatchResult(tuple(pairs), unmatched, _total(cost, rows))


__all__ = [
    "DEFAULT_N_QUERIES",
    "GroundTruthSet",
    "MatchResult",
    "MatchedPair",
    "PredictionSet",
    "check_probabilities",
    "classification_cost",
    "hungarian_assign",
    "instance_matching",
    "matching_cost_matrix",
    "point_matching_cost",
]
