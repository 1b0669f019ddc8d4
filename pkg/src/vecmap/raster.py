"""Rasterize map elements onto a BEV grid and write PPM images.

Row 0 of the grid is the front edge of the frame (ego forward points up);
column 0 is the left edge. Each cell holds a bitmask with bit ``1 << class``
set for every class drawn through it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BevFrame, MapClass

BACKGROUND = (0, 0, 0)
# Dividers yellow, stop lines blue, pedestrian crossings purple.
CLASS_COLORS = {
    MapClass.DIVIDER: (255, 215, 0),
    MapClass.STOP_LINE: (30, 90, 255),
    MapClass.PED_CROSSING: (160, 32, 240),
}
# Later entries win where classes overlap.
_PAINT_ORDER = (MapClass.PED_CROSSING, MapClass.STOP_LINE, MapClass.DIVIDER)


@dataclass(eq=False)
class RasterCanvas:
    grid: np.ndarray
    resolution: float
    origin: tuple[float, float]

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


def canvas_shape(frame: BevFrame) -> tuple[int, int]:
    return (int(round(frame.height / frame.resolution)), int(round(frame.width / frame.resolution)))


def to_pixel(points, frame: BevFrame) -> np.ndarray:
    """Map ego-frame metres to integer ``(row, col)`` pixel indices."""
    pts = np.asarray(points, dtype=np.float64)
    h, w = canvas_shape(frame)
    col = np.floor((pts[:, 0] + frame.left) / frame.resolution).astype(np.int64)
    row = np.floor((frame.front - pts[:, 1]) / frame.resolution).astype(np.int64)
    return np.column_stack([np.clip(row, 0, h - 1), np.clip(col, 0, w - 1)])


def bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Integer line from ``(r0, c0)`` to ``(r1, c1)`` inclusive."""
    cells = []
    dr, dc = abs(r1 - r0), -abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dr + dc
    r, c = r0, c0
    while True:
        cells.append((r, c))
        if r == r1 and c == c1:
            return cells
        e2 = 2 * err
        if e2 >= dc:
            err += dc
            r += sr
        if e2 <= dr:
            err += dr
            c += sc


def rasterize(elements, frame: BevFrame = BevFrame()) -> RasterCanvas:
    h, w = canvas_shape(frame)
    grid = np.zeros((h, w), dtype=np.uint8)
    for element in elements:
        pix = to_pixel(element.points, frame)
        if element.shape.is_closed:
            pix = np.vstack([pix, pix[:1]])
        bit = np.uint8(1 << int(element.label))
        if len(pix) == 1:
            grid[pix[0][0], pix[0][1]] |= bit
        for (r0, c0), (r1, c1) in zip(pix[:-1], pix[1:]):
            for r, c in bresenham(int(r0), int(c0), int(r1), int(c1)):
                grid[r, c] |= bit
    return RasterCanvas(grid, frame.resolution, (-frame.left, frame.front))


def canvas_rgb(canvas: RasterCanvas) -> np.ndarray:
    h, w = canvas.shape
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[:] = BACKGROUND
    for label in _PAINT_ORDER:
        rgb[(canvas.grid & (1 << int(label))) != 0] = CLASS_COLORS[label]
    return rgb


def emit_plot(canvas: RasterCanvas, path) -> None:
    """Write the canvas as a binary PPM (P6) image."""
    rgb = canvas_rgb(canvas)
    h, w = canvas.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, dims, maxval, body = data.split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError(f"{path}: not an 8-bit binary PPM")
    w, h = (int(x) for x in dims.split())
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)
