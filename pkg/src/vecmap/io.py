"""Scene files: a versioned JSON-lines annotation schema.

Line 1 is a header object::

    {"schema_version": 1, "scene_id": "s0",
     "frame": {"front": 30, "rear": 30, "left": 15, "right": 15, "resolution": 0.15},
     "n_points": 20}

Every following non-blank line is one element::

    {"role": "gt", "class": "divider", "points": [[x, y], ...]}
    {"role": "pred", "class": "stop_line", "points": [[x, y], ...], "score": 0.9}

Optional element keys: ``directed`` (polylines only), ``resampled`` (ground
truth whose points are already the canonical ``n_points`` samples; skips
clipping and resampling) and ``class_scores`` (predictions; probabilities
over the three classes plus no-object). Coordinates are metres in the ego
frame. See ``docs/scene_schema.md`` for the full grammar.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SchemaError
from .evaluation import ScoredElement
from .geometry import (
    DEFAULT_N_POINTS,
    NO_OBJECT,
    NUM_SCORE_COLUMNS,
    BevFrame,
    ElementKind,
    MapClass,
    MapElement,
    Shape,
    clip_to_frame,
    resample_points,
)

SCHEMA_VERSION = 1

_HEADER_KEYS = {"schema_version", "scene_id", "frame", "n_points"}
_FRAME_KEYS = ("front", "rear", "left", "right", "resolution")
_ELEMENT_KEYS = {"role", "class", "points", "directed", "resampled", "score", "class_scores"}


@dataclass(eq=False)
class Scene:
    scene_id: str
    frame: BevFrame = field(default_factory=BevFrame)
    ground_truth: list[MapElement] = field(default_factory=list)
    predictions: list[ScoredElement] | None = None
    n_points: int = DEFAULT_N_POINTS

    @property
    def has_predictions(self) -> bool:
        return bool(self.predictions)


def score_vector(pred: ScoredElement) -> np.ndarray:
    """Class probabilities of a prediction.

    Without explicit ``class_scores`` the predicted class gets ``score`` and
    the remainder is spread evenly over the other three columns.
    """
    if pred.class_scores is not None:
        return np.asarray(pred.class_scores, dtype=np.float64)
    vec = np.full(NUM_SCORE_COLUMNS, (1.0 - pred.score) / (NUM_SCORE_COLUMNS - 1))
    vec[int(pred.element.label)] = pred.score
    return vec


class _Reader:
    def __init__(self, path):
        self.path = str(path)
        self.line = None

    def fail(self, message, category="schema"):
        raise SchemaError(message, category=category, path=self.path, line=self.line)

    def number(self, value, name):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{name} must be a number")
        if not math.isfinite(value):
            self.fail(f"{name} must be finite")
        return float(value)

    def header(self, obj):
        if not isinstance(obj, dict):
            self.fail("header must be a JSON object")
        missing = {"schema_version", "scene_id"} - obj.keys()
        if missing:
            self.fail(f"header is missing {', '.join(sorted(missing))}")
        unknown = obj.keys() - _HEADER_KEYS
        if unknown:
            self.fail(f"header has unknown keys {', '.join(sorted(unknown))}")
        if obj["schema_version"] != SCHEMA_VERSION:
            self.fail(f"schema_version must be {SCHEMA_VERSION}, got {obj['schema_version']!r}")
        if not isinstance(obj["scene_id"], str) or not obj["scene_id"]:
            self.fail("scene_id must be a non-empty string")
        frame = BevFrame()
        if "frame" in obj:
            f = obj["frame"]
            if not isinstance(f, dict) or set(f) - set(_FRAME_KEYS):
                self.fail(f"frame must be an object with keys from {', '.join(_FRAME_KEYS)}")
            values = {k: self.number(v, f"frame.{k}") for k, v in f.items()}
            try:
                frame = BevFrame(**values)
            except DomainError as exc:
                self.fail(str(exc))
        n_points = obj.get("n_points", DEFAULT_N_POINTS)
        if isinstance(n_points, bool) or not isinstance(n_points, int) or n_points < 3:
            self.fail("n_points must be an integer >= 3")
        return obj["scene_id"], frame, n_points

    def points(self, value, shape, index):
        if not isinstance(value, list):
            self.fail(f"element {index}: points must be a list of [x, y] pairs")
        out = []
        for p in value:
            if not (isinstance(p, list) and len(p) == 2):
                self.fail(f"element {index}: points must be a list of [x, y] pairs")
            out.append([self.number(p[0], "x"), self.number(p[1], "y")])
        if len(out) < shape.min_points:
            self.fail(
                f"element {index}: {shape.value} needs >= {shape.min_points} points, got {len(out)}",
                "geometry",
            )
        return np.array(out, dtype=np.float64)

    def element(self, obj, index):
        if not isinstance(obj, dict):
            self.fail(f"element {index} must be a JSON object")
        unknown = obj.keys() - _ELEMENT_KEYS
        if unknown:
            self.fail(f"element {index} has unknown keys {', '.join(sorted(unknown))}")
        for key in ("role", "class", "points"):
            if key not in obj:
                self.fail(f"element {index} is missing {key!r}")
        role = obj["role"]
        if role not in ("gt", "pred"):
            self.fail(f"element {index}: role must be 'gt' or 'pred', got {role!r}")
        try:
            label = MapClass.from_slug(obj["class"])
        except (KeyError, TypeError):
            self.fail(f"element {index}: unknown class {obj['class']!r}", "class")
        directed = obj.get("directed", False)
        if not isinstance(directed, bool):
            self.fail(f"element {index}: directed must be a boolean")
        if directed and label is MapClass.PED_CROSSING:
            self.fail(f"element {index}: polygons cannot be directed")
        kind = ElementKind.for_class(label, directed)
        pts = self.points(obj["points"], kind.shape, index)
        resampled = obj.get("resampled", False)
        if not isinstance(resampled, bool):
            self.fail(f"element {index}: resampled must be a boolean")
        score = class_scores = None
        if role == "pred":
            if "score" not in obj:
                self.fail(f"element {index}: predictions need a score")
            score = self.number(obj["score"], "score")
            if not 0.0 <= score <= 1.0:
                self.fail(f"element {index}: score must lie in [0, 1], got {score}")
            if "class_scores" in obj:
                cs = obj["class_scores"]
                if not isinstance(cs, list) or len(cs) != NUM_SCORE_COLUMNS:
                    self.fail(f"element {index}: class_scores needs {NUM_SCORE_COLUMNS} numbers")
                class_scores = tuple(self.number(v, "class_scores") for v in cs)
                if any(v < 0 for v in class_scores) or abs(sum(class_scores) - 1.0) > 1e-6:
                    self.fail(f"element {index}: class_scores must be a probability vector")
        elif "score" in obj or "class_scores" in obj:
            self.fail(f"element {index}: ground truth cannot carry scores")
        return role, kind, pts, resampled, score, class_scores


def _distinct(pts):
    return len(np.unique(pts, axis=0))


def parse_scene(path) -> Scene:
    """Read and validate a scene file, resampling elements to ``n_points``.

    Raises :class:`SchemaError` whose ``category`` is ``"syntax"``
    (not JSON), ``"schema"`` (structure or values), ``"class"`` (unknown
    class) or ``"geometry"`` (degenerate or out-of-frame element).
    """
    reader = _Reader(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"not UTF-8 text: {exc}", category="syntax", path=str(path)) from None
    objs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        reader.line = lineno
        try:
            objs.append((lineno, json.loads(raw)))
        except json.JSONDecodeError as exc:
            reader.fail(f"invalid JSON: {exc.msg}", "syntax")
    if not objs:
        reader.line = None
        reader.fail("empty file; expected a header line")
    reader.line = objs[0][0]
    scene_id, frame, n_points = reader.header(objs[0][1])

    gts: list[MapElement] = []
    preds: list[ScoredElement] = []
    saw_pred = False
    for index, (lineno, obj) in enumerate(objs[1:]):
        reader.line = lineno
        role, kind, pts, resampled, score, class_scores = reader.element(obj, index)
        if _distinct(pts) < kind.shape.min_points:
            reader.fail(f"element {index}: degenerate {kind.shape.value} (coincident points)",
                        "geometry")
        if role == "pred":
            saw_pred = True
            if not np.all(frame.contains(pts)):
                reader.fail(f"element {index}: prediction lies outside the BEV frame", "geometry")
            if len(pts) != n_points:
                pts = resample_points(pts, kind.shape, n_points)
            preds.append(ScoredElement(MapElement(kind, pts), score, class_scores))
            continue
        if resampled:
            if len(pts) != n_points:
                reader.fail(f"element {index}: resampled element must have {n_points} points",
                            "geometry")
            if not np.all(frame.contains(pts)):
                reader.fail(f"element {index}: resampled element lies outside the BEV frame",
                            "geometry")
            gts.append(MapElement(kind, pts))
            continue
        for piece in clip_to_frame(pts, kind.shape, frame):
            try:
                gts.append(MapElement(kind, resample_points(piece, kind.shape, n_points)))
            except DomainError as exc:
                reader.fail(f"element {index}: {exc}", "geometry")
    return Scene(scene_id, frame, gts, preds if saw_pred else None, n_points)


def _points_json(points) -> list:
    return [[float(x), float(y)] for x, y in np.asarray(points)]


def scene_lines(scene: Scene) -> list[str]:
    header = {
        "schema_version": SCHEMA_VERSION,
        "scene_id": scene.scene_id,
        "frame": {k: getattr(scene.frame, k) for k in _FRAME_KEYS},
        "n_points": scene.n_points,
    }
    lines = [json.dumps(header)]
    for e in scene.ground_truth:
        obj = {"role": "gt", "class": e.label.slug}
        if e.shape is Shape.POLYLINE_DIRECTED:
            obj["directed"] = True
        obj["resampled"] = True
        obj["points"] = _points_json(e.points)
        lines.append(json.dumps(obj))
    for p in scene.predictions or []:
        obj = {"role": "pred", "class": p.element.label.slug}
        if p.element.shape is Shape.POLYLINE_DIRECTED:
            obj["directed"] = True
        obj["score"] = float(p.score)
        if p.class_scores is not None:
            obj["class_scores"] = [float(v) for v in p.class_scores]
        obj["points"] = _points_json(p.element.points)
        lines.append(json.dumps(obj))
    return lines


def write_scene(scene: Scene, path) -> None:
    """Write ``scene`` so that :func:`parse_scene` reads it back unchanged."""
    Path(path).write_text("\n".join(scene_lines(scene)) + "\n", encoding="utf-8")


def convert_external(records, scene_id: str, frame: BevFrame = BevFrame(),
                     n_points: int = DEFAULT_N_POINTS) -> Scene:
    """Build a scene from already-vectorized external annotations.

    ``records`` yields ``(class_slug, points)`` or ``(class_slug, points,
    directed)`` tuples in ego-frame metres. This is the entry point for
    adapters from other annotation layouts.
    """
    gts = []
    for rec in records:
        slug, pts, *rest = rec
        kind = ElementKind.for_class(MapClass.from_slug(slug), bool(rest and rest[0]))
        for piece in clip_to_frame(pts, kind.shape, frame):
            gts.append(MapElement(kind, resample_points(piece, kind.shape, n_points)))
    return Scene(scene_id, frame, gts, None, n_points)


__all__ = [
    "NO_OBJECT",
    "SCHEMA_VERSION",
    "Scene",
    "convert_external",
    "parse_scene",
    "score_vector",
    "scene_lines",
    "write_scene",
]
