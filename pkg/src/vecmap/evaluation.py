"""Chamfer-distance average precision for vectorized map predictions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import DomainError
from .geometry import MapClass, MapElement, resample_points

DEFAULT_THRESHOLDS = (0.2, 0.5, 1.0)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
REPORT_VERSION = 1


@dataclass(frozen=True)
class EvalConfig:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    classes: tuple[MapClass, ...] = tuple(MapClass)
    n_samples: int = 100

    def __post_init__(self):
        t = tuple(float(x) for x in self.thresholds)
        if not t or any(x <= 0 for x in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise DomainError(f"thresholds must be positive and strictly increasing, got {t}")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "classes", tuple(MapClass(c) for c in self.classes))
        if self.n_samples < 2:
            raise DomainError("n_samples must be >= 2")


def densify(element: MapElement, n_samples: int) -> np.ndarray:
    return resample_points(element.points, element.shape, n_samples)


def chamfer_distance(a, b, n_samples: int | None = None) -> float:
    """Symmetric chamfer distance in the units of the inputs.

    ``a`` and ``b`` are map elements or ``(n, 2)`` point arrays. With
    ``n_samples``, elements are first resampled along their geometry.
    """
    pa = _points_for_chamfer(a, n_samples)
    pb = _points_for_chamfer(b, n_samples)
    return float(kernels.chamfer(pa, pb))


def _points_for_chamfer(x, n_samples):
    if isinstance(x, MapElement):
        pts = densify(x, n_samples) if n_samples else x.points
    else:
        pts = np.asarray(x, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise DomainError("chamfer distance of an empty element is undefined")
    return pts


def _score_order(scores: Sequence[float]) -> np.ndarray:
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def match_at_threshold(scores: Sequence[float], distances: np.ndarray, tau: float):
    """Greedy score-ordered matching given a ``(n_pred, n_gt)`` distance matrix.

    Each prediction, highest score first, takes the nearest still-unmatched
    ground truth closer than ``tau``. Returns ``[(score, is_tp, gt_index or
    None, distance or None)]`` in score order.
    """
    if len(scores) == 0:
        return []
    distances = np.asarray(distances, dtype=np.float64).reshape(len(scores), -1)
    taken = np.zeros(distances.shape[1], dtype=bool)
    out = []
    for i in _score_order(scores):
        row = np.where(taken, np.inf, distances[i])
        j = int(np.argmin(row)) if row.size else -1
        if j >= 0 and row[j] < tau:
            taken[j] = True
            out.append((float(scores[i]), True, j, float(row[j])))
        else:
            out.append((float(scores[i]), False, None, None))
    return out


def match_elements(preds: Sequence[tuple[float, MapElement]], gts: Sequence[MapElement],
                   tau: float, n_samples: int | None = 100):
    """:func:`match_at_threshold` on elements; returns ``[(score, is_tp)]``."""
    dist = distance_matrix([e for _, e in preds], gts, n_samples)
    return [(s, tp) for s, tp, _, _ in match_at_threshold([s for s, _ in preds], dist, tau)]


def distance_matrix(preds: Sequence[MapElement], gts: Sequence[MapElement],
                    n_samples: int | None = 100) -> np.ndarray:
    dense_p = [_points_for_chamfer(e, n_samples) for e in preds]
    dense_g = [_points_for_chamfer(e, n_samples) for e in gts]
    out = np.empty((len(dense_p), len(dense_g)))
    for i, a in enumerate(dense_p):
        for j, b in enumerate(dense_g):
            out[i, j] = kernels.chamfer(a, b)
    return out


def average_precision(matches: Iterable[tuple[float, bool]], num_gt: int) -> float:
    """101-point interpolated AP of a scored TP/FP list.

    Precision at recall ``r`` is the best precision reached at any recall
    ``>= r``. With no ground truth, AP is 1.0 if there are also no
    predictions and 0.0 otherwise.
    """
    matches = list(matches)
    if num_gt < 0:
        raise DomainError("num_gt must be >= 0")
    if num_gt == 0:
        return 0.0 if matches else 1.0
    order = _score_order([s for s, _ in matches])
    tp = np.array([bool(matches[i][1]) for i in order], dtype=np.float64)
    if tp.sum() > num_gt:
        raise DomainError(f"{int(tp.sum())} true positives exceed {num_gt} ground-truth elements")
    if len(tp) == 0:
        return 0.0
    tp_cum = np.cumsum(tp)
    recall = tp_cum / num_gt
    precision = tp_cum / np.arange(1, len(tp) + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(np.mean(sampled))


@dataclass(frozen=True)
class ScoredElement:
    element: MapElement
    score: float
    class_scores: tuple[float, ...] | None = None


@dataclass
class ClassCell:
    label: MapClass
    threshold: float
    ap: float | None
    num_gt: int
    num_pred: int
    num_tp: int


@dataclass
class EvalReport:
    cells: list[ClassCell]
    class_ap: dict[MapClass, float | None]
    mean_ap: float | None
    config: EvalConfig
    diagnostics: list[dict] = field(default_factory=list)

    def ap(self, label: MapClass, threshold: float) -> float | None:
        for cell in self.cells:
            if cell.label == label and cell.threshold == threshold:
                return cell.ap
        raise KeyError((label, threshold))

    def to_text(self) -> str:
        lines = [
            f"# vecmap eval report v{REPORT_VERSION}",
            "class\tthreshold\tap\tnum_gt\tnum_pred\tnum_tp",
        ]
        for c in self.cells:
            lines.append(
                f"{c.label.slug}\t{c.threshold:g}\t{_fmt(c.ap)}\t{c.num_gt}\t{c.num_pred}\t{c.num_tp}"
            )
        for label, value in self.class_ap.items():
            lines.append(f"class_ap\t{label.slug}\t{_fmt(value)}")
        lines.append(f"mAP\t{_fmt(self.mean_ap)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "thresholds": list(self.config.thresholds),
            "cells": [
                {
                    "class": c.label.slug,
                    "threshold": c.threshold,
                    "ap": c.ap,
                    "num_gt": c.num_gt,
                    "num_pred": c.num_pred,
                    "num_tp": c.num_tp,
                }
                for c in self.cells
            ],
            "class_ap": {label.slug: v for label, v in self.class_ap.items()},
            "mAP": self.mean_ap,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _fmt(value: float | None) -> str:
    return "nan" if value is None else f"{value:.12f}"


def evaluate(scenes, cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Pool predictions over scenes and compute AP per class and threshold.

    Scenes need ``scene_id``, ``ground_truth`` (elements in metres) and
    ``predictions`` (:class:`ScoredElement`) attributes. A cell with neither
    ground truth nor predictions is left out of the averages.
    """
    pooled = {(label, tau): [] for label in cfg.classes for tau in cfg.thresholds}
    num_gt = {label: 0 for label in cfg.classes}
    num_pred = {label: 0 for label in cfg.classes}
    diagnostics = []
    for scene in scenes:
        preds = list(scene.predictions or [])
        for e in list(scene.ground_truth) + [p.element for p in preds]:
            if e.label not in cfg.classes:
                raise DomainError(
                    f"scene {scene.scene_id}: class {e.label.slug} is not being evaluated"
                )
        for label in cfg.classes:
            gts = [e for e in scene.ground_truth if e.label == label]
            cls_preds = [p for p in preds if p.element.label == label]
            num_gt[label] += len(gts)
            num_pred[label] += len(cls_preds)
            if not cls_preds:
                continue
            dist = distance_matrix([p.element for p in cls_preds], gts, cfg.n_samples)
            scores = [p.score for p in cls_preds]
            for tau in cfg.thresholds:
                result = match_at_threshold(scores, dist, tau)
                pooled[(label, tau)].extend((s, tp) for s, tp, _, _ in result)
                diagnostics.append(
                    {
                        "scene": scene.scene_id,
                        "class": label.slug,
                        "threshold": tau,
                        "matches": [
                            {"score": s, "tp": tp, "gt": j, "distance": d}
                            for s, tp, j, d in result
                        ],
                    }
                )

    cells = []
    class_ap: dict[MapClass, float | None] = {}
    for label in cfg.classes:
        values = []
        for tau in cfg.thresholds:
            matches = pooled[(label, tau)]
            if num_gt[label] == 0 and not matches:
                ap = None
            else:
                ap = average_precision(matches, num_gt[label])
                values.append(ap)
            cells.append(ClassCell(label, tau, ap, num_gt[label], num_pred[label],
                                   sum(1 for _, tp in matches if tp)))
        class_ap[label] = float(np.mean(values)) if values else None
    present = [v for v in class_ap.values() if v is not None]
    mean_ap = float(np.mean(present)) if present else None
    return EvalReport(cells, class_ap, mean_ap, cfg, diagnostics)
