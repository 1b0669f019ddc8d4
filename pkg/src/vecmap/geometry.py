"""Map-element geometry: kinds, equivalence permutations, resampling, BEV frames.

Coordinates are metres in the ego frame: +x to the right, +y forward.
Normalized BEV coordinates put (0, 0) at the rear-left corner of the
perception frame and (1, 1) at the front-right corner.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

#: Default number of points per element.
DEFAULT_N_POINTS = 20
#: Default number of instance queries.
DEFAULT_N_QUERIES = 50


class Shape(enum.Enum):
    POLYLINE_UNDIRECTED = "polyline_undirected"
    POLYLINE_DIRECTED = "polyline_directed"
    POLYGON = "polygon"

    @property
    def is_closed(self) -> bool:
        return self is Shape.POLYGON

    @property
    def min_points(self) -> int:
        return 3 if self is Shape.POLYGON else 2


class MapClass(enum.IntEnum):
    """Map classes; the integer value is the class-score column."""

    PED_CROSSING = 0
    DIVIDER = 1
    STOP_LINE = 2

    @property
    def slug(self) -> str:
        return _CLASS_SLUGS[self]

    @classmethod
    def from_slug(cls, slug: str) -> "MapClass":
        for member, name in _CLASS_SLUGS.items():
            if name == slug:
                return member
        raise KeyError(slug)


_CLASS_SLUGS = {
    MapClass.PED_CROSSING: "ped_crossing",
    MapClass.DIVIDER: "divider",
    MapClass.STOP_LINE: "stop_line",
}

#: Score column of the no-object class.
NO_OBJECT = len(MapClass)
NUM_SCORE_COLUMNS = len(MapClass) + 1


@dataclass(frozen=True)
class ElementKind:
    """Geometric shape plus semantic class of a map element."""

    shape: Shape
    label: MapClass

    def __post_init__(self):
        if self.label is MapClass.PED_CROSSING and self.shape is not Shape.POLYGON:
            raise DomainError("pedestrian crossings must be polygons")
        if self.label is not MapClass.PED_CROSSING and self.shape is Shape.POLYGON:
            raise DomainError(f"{self.label.slug} must be a polyline")

    @classmethod
    def for_class(cls, label: MapClass, directed: bool = False) -> "ElementKind":
        label = MapClass(label)
        if label is MapClass.PED_CROSSING:
            return cls(Shape.POLYGON, label)
        shape = Shape.POLYLINE_DIRECTED if directed else Shape.POLYLINE_UNDIRECTED
        return cls(shape, label)


def _shape_of(kind) -> Shape:
    if isinstance(kind, ElementKind):
        return kind.shape
    if isinstance(kind, Shape):
        return kind
    raise TypeError(f"expected ElementKind or Shape, got {type(kind).__name__}")


def _as_points(points) -> np.ndarray:
    arr = np.array(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError(f"points must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("points must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class MapElement:
    """A fixed-length point sequence with its kind.

    Polygon point sequences never repeat the first point; closure is implicit.
    """

    kind: ElementKind
    points: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points)
        if len(pts) < self.kind.shape.min_points:
            raise DomainError(
                f"{self.kind.shape.value} needs at least {self.kind.shape.min_points} "
                f"points, got {len(pts)}"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> Shape:
        return self.kind.shape

    @property
    def label(self) -> MapClass:
        return self.kind.label

    def with_points(self, points) -> "MapElement":
        return MapElement(self.kind, points)

    def __eq__(self, other):
        if not isinstance(other, MapElement):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.points, other.points)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PermutationGroup:
    """Equivalent orderings of an element's points.

    ``permutations`` is an int array of shape ``(k, n_points)``; row 0 is
    always the identity.
    """

    shape: Shape
    n_points: int
    permutations: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.permutations)

    def __iter__(self):
        return iter(self.permutations)

    def __getitem__(self, k):
        return self.permutations[k]


_GROUP_CACHE: dict[tuple[Shape, int], PermutationGroup] = {}


def enumerate_permutations(kind, n_points: int) -> PermutationGroup:
    """Return every equivalent ordering of an element with ``n_points`` points.

    Undirected polylines admit the identity and the reversal, directed
    polylines only the identity, and polygons every cyclic shift in both
    orientations, interleaved as ``shift m`` then ``reversed shift m``.
    """
    shape = _shape_of(kind)
    n = int(n_points)
    if n < shape.min_points:
        raise DomainError(
            f"n_points must be >= {shape.min_points} for {shape.value}, got {n_points}"
        )
    key = (shape, n)
    cached = _GROUP_CACHE.get(key)
    if cached is not None:
        return cached

    j = np.arange(n)
    if shape is Shape.POLYLINE_DIRECTED:
        perms = j[None, :]
    elif shape is Shape.POLYLINE_UNDIRECTED:
        perms = np.stack([j, (n - 1) - j])
    else:
        rows = []
        for m in range(n):
            shifted = (j + m) % n
            rows.append(shifted)
            rows.append((n - 1) - shifted)
        perms = np.stack(rows)
    perms = np.ascontiguousarray(perms, dtype=np.intp)
    perms.setflags(write=False)
    group = PermutationGroup(shape, n, perms)
    _GROUP_CACHE[key] = group
    return group


def permutation_group(element: MapElement) -> PermutationGroup:
    return enumerate_permutations(element.kind, element.n_points)


def _check_permutation(gamma, n: int) -> np.ndarray:
    g = np.asarray(gamma)
    if g.ndim != 1 or len(g) != n:
        raise DomainError(f"permutation length {g.size} does not match n_points {n}")
    if not np.issubdtype(g.dtype, np.integer):
        raise DomainError("permutation entries must be integers")
    if not np.array_equal(np.sort(g), np.arange(n)):
        raise DomainError("permutation is not a bijection on 0..n-1")
    return g.astype(np.intp)


def apply_permutation(element: MapElement, gamma) -> MapElement:
    """Reorder points so that ``out.points[j] == element.points[gamma[j]]``."""
    g = _check_permutation(gamma, element.n_points)
    return element.with_points(element.points[g])


def invert_permutation(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=np.intp)
    inv = np.empty_like(g)
    inv[g] = np.arange(len(g))
    return inv


def _dedupe_consecutive(pts: np.ndarray) -> np.ndarray:
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    return pts[keep]


def resample_points(raw_points, shape: Shape, n_points: int) -> np.ndarray:
    """Sample ``n_points`` at equal arc-length spacing along a path.

    Open paths keep both endpoints. Closed paths start at the first raw
    point and walk the boundary back towards it without repeating it.
    """
    shape = _shape_of(shape)
    pts = _dedupe_consecutive(_as_points(raw_points))
    if shape.is_closed and len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    distinct = len(np.unique(pts, axis=0))
    if distinct < shape.min_points:
        raise DomainError(
            f"degenerate {shape.value}: needs at least {shape.min_points} distinct "
            f"points, got {distinct}"
        )
    if n_points < shape.min_points:
        raise DomainError(f"n_points must be >= {shape.min_points}, got {n_points}")
    if shape.is_closed:
        pts = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if shape.is_closed:
        targets = total * np.arange(n_points) / n_points
    else:
        targets = np.linspace(0.0, total, n_points)
    x = np.interp(targets, cum, pts[:, 0])
    y = np.interp(targets, cum, pts[:, 1])
    return np.column_stack([x, y])


def resample_element(raw_points, kind: ElementKind, n_points: int = DEFAULT_N_POINTS) -> MapElement:
    return MapElement(kind, resample_points(raw_points, kind.shape, n_points))


@dataclass(frozen=True)
class BevFrame:
    """Perception extents in metres around the ego vehicle."""

    front: float = 30.0
    rear: float = 30.0
    left: float = 15.0
    right: float = 15.0
    resolution: float = 0.15

    def __post_init__(self):
        for name in ("front", "rear", "left", "right", "resolution"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"BevFrame.{name} must be positive and finite, got {value}")

    @property
    def width(self) -> float:
        return self.left + self.right

    @property
    def height(self) -> float:
        return self.front + self.rear

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """``(xmin, ymin, xmax, ymax)`` in metres."""
        return (-self.left, -self.rear, self.right, self.front)

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        xmin, ymin, xmax, ymax = self.bounds
        return (
            (pts[..., 0] >= xmin - tol)
            & (pts[..., 0] <= xmax + tol)
            & (pts[..., 1] >= ymin - tol)
            & (pts[..., 1] <= ymax + tol)
        )


# Slack for coordinates that land a few ulps outside the frame after clipping
# and interpolation.
_BOUNDS_TOL = 1e-9


def normalize_points(points, frame: BevFrame) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    inside = frame.contains(pts, _BOUNDS_TOL)
    if not np.all(inside):
        bad = np.flatnonzero(~inside.reshape(-1))
        raise DomainError(f"points outside the BEV frame at indices {bad.tolist()}")
    out = np.empty_like(pts)
    out[..., 0] = (pts[..., 0] + frame.left) / frame.width
    out[..., 1] = (pts[..., 1] + frame.rear) / frame.height
    return np.clip(out, 0.0, 1.0)


def denormalize_points(points, frame: BevFrame) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty_like(pts)
    out[..., 0] = pts[..., 0] * frame.width - frame.left
    out[..., 1] = pts[..., 1] * frame.height - frame.rear
    return out


def normalize_to_bev(element: MapElement, frame: BevFrame) -> MapElement:
    return element.with_points(normalize_points(element.points, frame))


def denormalize(element: MapElement, frame: BevFrame) -> MapElement:
    return element.with_points(denormalize_points(element.points, frame))


def _clip_segment(p0, p1, bounds):
    # Liang-Barsky; returns parameter interval or None.
    xmin, ymin, xmax, ymax = bounds
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, p0[0] - xmin), (dx, xmax - p0[0]), (-dy, p0[1] - ymin), (dy, ymax - p0[1])):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    return t0, t1


def _lerp_clamped(p0, p1, t, bounds):
    xmin, ymin, xmax, ymax = bounds
    if t == 0.0:
        pt = np.array(p0, dtype=np.float64)
    elif t == 1.0:
        pt = np.array(p1, dtype=np.float64)
    else:
        pt = p0 + t * (p1 - p0)
    return np.array([min(max(pt[0], xmin), xmax), min(max(pt[1], ymin), ymax)])


def clip_polyline(points, bounds) -> list[np.ndarray]:
    """Clip an open path to an axis-aligned box; may split into pieces."""
    pts = _as_points(points)
    pieces: list[list[np.ndarray]] = []
    current: list[np.ndarray] = []
    for a, b in zip(pts[:-1], pts[1:]):
        span = _clip_segment(a, b, bounds)
        if span is None:
            if current:
                pieces.append(current)
                current = []
            continue
        t0, t1 = span
        start = _lerp_clamped(a, b, t0, bounds)
        end = _lerp_clamped(a, b, t1, bounds)
        if current and (t0 > 0.0 or not np.array_equal(current[-1], start)):
            pieces.append(current)
            current = []
        if not current:
            current.append(start)
        current.append(end)
        if t1 < 1.0:
            pieces.append(current)
            current = []
    if current:
        pieces.append(current)
    return [np.array(p) for p in pieces if len(p) >= 2]


def clip_polygon(points, bounds) -> np.ndarray:
    """Sutherland-Hodgman clip of a closed ring against an axis-aligned box."""
    xmin, ymin, xmax, ymax = bounds
    ring = [np.asarray(p, dtype=np.float64) for p in _as_points(points)]
    edges = (
        (lambda p: p[0] >= xmin, 0, xmin),
        (lambda p: p[0] <= xmax, 0, xmax),
        (lambda p: p[1] >= ymin, 1, ymin),
        (lambda p: p[1] <= ymax, 1, ymax),
    )
    for inside, axis, value in edges:
        if not ring:
            break
        out = []
        prev = ring[-1]
        for cur in ring:
            cur_in, prev_in = inside(cur), inside(prev)
            if cur_in != prev_in:
                t = (value - prev[axis]) / (cur[axis] - prev[axis])
                cross = prev + t * (cur - prev)
                cross[axis] = value
                out.append(cross)
            if cur_in:
                out.append(cur)
            prev = cur
        ring = out
    if not ring:
        return np.empty((0, 2))
    return _dedupe_consecutive(np.array(ring))


def clip_to_frame(raw_points, shape: Shape, frame: BevFrame) -> list[np.ndarray]:
    """Clip raw geometry to the frame; returns zero or more point arrays.

    Geometry fully inside is returned unchanged. Open paths that leave and
    re-enter the frame come back as several pieces.
    """
    shape = _shape_of(shape)
    pts = _as_points(raw_points)
    if np.all(frame.contains(pts, tol=0.0)):
        return [pts]
    if shape.is_closed:
        ring = clip_polygon(pts, frame.bounds)
        if len(np.unique(ring, axis=0)) < 3:
            return []
        return [ring]
    return [p for p in clip_polyline(pts, frame.bounds) if len(np.unique(p, axis=0)) >= 2]
