"""Set-prediction training loss with hand-derived gradients.

``total = lambda_c * cls + lambda_p * p2p + lambda_d * dir`` where ``cls``
is a focal loss over every prediction (unmatched ones target the no-object
class), ``p2p`` the Manhattan distance between matched point pairs and
``dir`` the negated cosine similarity of matched edge vectors. The matching
is taken as given and held fixed when differentiating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import GroundTruthSet, MatchResult, PredictionSet, _softmax
from .errors import DomainError
from .geometry import NO_OBJECT, MapElement, Shape

PROB_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    lambda_c: float = 10.0
    lambda_p: float = 5.0
    lambda_d: float = 1.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0

    def __post_init__(self):
        for name in ("lambda_c", "lambda_p", "lambda_d", "focal_alpha", "focal_gamma"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be finite and non-negative, got {value}")


@dataclass(frozen=True, eq=False)
class LossBreakdown:
    cls: float
    p2p: float
    dir: float
    total: float
    grad_points: np.ndarray
    grad_logits: np.ndarray


def focal_loss(scores, label: int, alpha: float = 0.25, gamma: float = 2.0) -> float:
    """``-alpha * (1 - p_t)**gamma * log(p_t)`` with ``p_t = scores[label]``."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= int(label) < len(scores):
        raise DomainError(f"label {label} out of range for {len(scores)} scores")
    p_t = max(float(scores[int(label)]), PROB_EPS)
    if p_t >= 1.0:
        return 0.0
    return -alpha * (1.0 - p_t) ** gamma * np.log(p_t)


def _focal_dloss_dpt(p_t: float, alpha: float, gamma: float) -> float:
    if p_t < PROB_EPS:
        return 0.0  # clamped region is flat
    q = 1.0 - p_t
    if q <= 0.0:
        return 0.0
    return alpha * (gamma * q ** (gamma - 1.0) * np.log(p_t) - q ** gamma / p_t)


def focal_loss_logit_grad(logits, label: int, alpha: float = 0.25, gamma: float = 2.0):
    """Return ``(loss, dloss/dlogits)`` for softmax probabilities of ``logits``."""
    logits = np.asarray(logits, dtype=np.float64)
    p = _softmax(logits)
    p_t = float(p[label])
    loss = focal_loss(p, label, alpha, gamma)
    dpt = _focal_dloss_dpt(p_t, alpha, gamma)
    # d p_t / d z_k = p_t * (delta_tk - p_k)
    grad = -dpt * p_t * p
    grad[label] += dpt * p_t
    return loss, grad


def _matched_points(pred, gt: MapElement, gamma) -> tuple[np.ndarray, np.ndarray]:
    pred_pts = pred.points if isinstance(pred, MapElement) else np.asarray(pred, dtype=np.float64)
    if pred_pts.shape != gt.points.shape:
        raise DomainError(
            f"point count mismatch: prediction {pred_pts.shape[0]}, ground truth {gt.n_points}"
        )
    gamma = np.asarray(gamma, dtype=np.intp)
    if gamma.shape != (gt.n_points,):
        raise DomainError("permutation length does not match n_points")
    return pred_pts, gt.points[gamma]


def p2p_loss(pred, gt: MapElement, gamma) -> float:
    pred_pts, target = _matched_points(pred, gt, gamma)
    absdiff = np.abs(pred_pts - target)
    total = 0.0
    for dx, dy in absdiff:
        total = total + (dx + dy)
    return float(total)


def _edges(points: np.ndarray, shape: Shape) -> np.ndarray:
    if shape.is_closed:
        return np.roll(points, -1, axis=0) - points
    return points[1:] - points[:-1]


def _cosine_and_grad(a: np.ndarray, b: np.ndarray):
    # Row-wise cosine(a, b) and its gradient w.r.t. a; zero vectors give 0, 0.
    na = np.hypot(a[:, 0], a[:, 1])
    nb = np.hypot(b[:, 0], b[:, 1])
    ok = (na > 0) & (nb > 0)
    cos = np.zeros(len(a))
    grad = np.zeros_like(a)
    if np.any(ok):
        dot = np.einsum("ij,ij->i", a[ok], b[ok])
        denom = na[ok] * nb[ok]
        cos[ok] = dot / denom
        grad[ok] = b[ok] / denom[:, None] - (dot / (na[ok] ** 3 * nb[ok]))[:, None] * a[ok]
    return cos, grad


def edge_direction_loss(pred, gt: MapElement, gamma) -> float:
    """Negated sum of cosine similarities between matched edges.

    Edge ``j`` of the prediction runs from point ``j`` to ``j+1`` and is
    compared with the edge between ground-truth points ``gamma[j]`` and
    ``gamma[j+1]``. Polygons wrap around.
    """
    pred_pts, target = _matched_points(pred, gt, gamma)
    cos, _ = _cosine_and_grad(_edges(pred_pts, gt.shape), _edges(target, gt.shape))
    return -float(np.sum(cos))


def _edge_grad_to_points(edge_grad: np.ndarray, closed: bool) -> np.ndarray:
    n = len(edge_grad) if closed else len(edge_grad) + 1
    grad = np.zeros((n, 2))
    if closed:
        grad += np.roll(edge_grad, 1, axis=0) - edge_grad
    else:
        grad[1:] += edge_grad
        grad[:-1] -= edge_grad
    return grad


def total_loss(preds: PredictionSet, gts: GroundTruthSet, match: MatchResult,
               weights: LossWeights = LossWeights()) -> LossBreakdown:
    """Weighted sum of focal, point-to-point and edge-direction terms.

    Gradients are returned for every predicted coordinate and logit.
    """
    n = len(preds)
    targets = np.full(n, NO_OBJECT, dtype=np.intp)
    for pair in match.pairs:
        if not (0 <= pair.pred < n and 0 <= pair.gt < len(gts)):
            raise DomainError("match result does not fit these prediction/ground-truth sets")
        targets[pair.pred] = int(gts[pair.gt].label)

    cls = 0.0
    grad_logits = np.zeros_like(preds.logits)
    for i in range(n):
        loss, g = focal_loss_logit_grad(
            preds.logits[i], targets[i], weights.focal_alpha, weights.focal_gamma
        )
        cls += loss
        grad_logits[i] = g

    p2p = 0.0
    direction = 0.0
    grad_p2p = np.zeros_like(preds.points)
    grad_dir = np.zeros_like(preds.points)
    for pair in match.pairs:
        gt = gts[pair.gt]
        pred_pts = preds.points[pair.pred]
        p2p += p2p_loss(pred_pts, gt, pair.gamma)
        grad_p2p[pair.pred] = np.sign(pred_pts - gt.points[pair.gamma])

        target = gt.points[pair.gamma]
        cos, edge_grad = _cosine_and_grad(_edges(pred_pts, gt.shape), _edges(target, gt.shape))
        direction -= float(np.sum(cos))
        grad_dir[pair.pred] = -_edge_grad_to_points(edge_grad, gt.shape.is_closed)

    total = weights.lambda_c * cls + weights.lambda_p * p2p + weights.lambda_d * direction
    return LossBreakdown(
        cls=float(cls),
        p2p=float(p2p),
        dir=float(direction),
        total=float(total),
        grad_points=weights.lambda_p * grad_p2p + weights.lambda_d * grad_dir,
        grad_logits=weights.lambda_c * grad_logits,
    )


def total_edge_count(gts: GroundTruthSet) -> int:
    return sum(e.n_points if e.shape.is_closed else e.n_points - 1 for e in gts)


def gradient_check(preds: PredictionSet, gts: GroundTruthSet, match: MatchResult,
                   weights: LossWeights = LossWeights(), h: float = 1e-6,
                   kink_tol: float = 1e-7) -> float:
    """Max relative error between analytic and central-difference gradients.

    Coordinates whose Manhattan residual is within ``kink_tol`` of zero are
    skipped; components where both estimates are exactly zero are too.
    """
    base = total_loss(preds, gts, match, weights)
    pts, logits = preds.points.copy(), preds.logits.copy()
    near_kink = np.zeros(pts.shape, dtype=bool)
    for pair in match.pairs:
        resid = pts[pair.pred] - gts[pair.gt].points[pair.gamma]
        near_kink[pair.pred] = np.abs(resid) < kink_tol

    def loss_at(p, z):
        return total_loss(PredictionSet(p, z), gts, match, weights).total

    worst = 0.0
    for array, grad, is_points in ((pts, base.grad_points, True), (logits, base.grad_logits, False)):
        for idx in np.ndindex(array.shape):
            if is_points and near_kink[idx]:
                continue
            orig = array[idx]
            array[idx] = orig + h
            up = loss_at(pts, logits)
            array[idx] = orig - h
            down = loss_at(pts, logits)
            array[idx] = orig
            fd = (up - down) / (2 * h)
            denom = max(abs(fd), abs(grad[idx]))
            if denom > 0:
                worst = max(worst, abs(fd - grad[idx]) / denom)
    return worst


def random_instance(rng: np.random.Generator, n_points: int | None = None,
                    max_gt: int = 3, max_extra: int = 2):
    """Random normalized-coordinate prediction/ground-truth pair for testing."""
    from .geometry import ElementKind, MapClass

    nv = int(n_points or rng.integers(3, 7))
    m = int(rng.integers(1, max_gt + 1))
    n = m + int(rng.integers(0, max_extra + 1))
    elements = []
    for _ in range(m):
        label = MapClass(int(rng.integers(0, len(MapClass))))
        kind = ElementKind.for_class(label, directed=bool(rng.integers(0, 2)))
        elements.append(MapElement(kind, rng.random((nv, 2))))
    preds = PredictionSet(rng.random((n, nv, 2)), rng.normal(size=(n, NO_OBJECT + 1)))
    return preds, GroundTruthSet(elements)
