import math

import numpy as np
import pytest

from vecmap.geometry import BevFrame, ElementKind, MapClass, MapElement
from vecmap.io import parse_scene
from vecmap.raster import (
    BACKGROUND,
    CLASS_COLORS,
    bresenham,
    canvas_rgb,
    canvas_shape,
    emit_plot,
    rasterize,
    read_ppm,
)

DIVIDER = ElementKind.for_class(MapClass.DIVIDER)
CROSSING = ElementKind.for_class(MapClass.PED_CROSSING)


def pixel_walk(vertices, frame, closed, step=1e-3):
    """Pixels visited by densely sampling each edge; floor of ego -> pixel."""
    pts = list(vertices) + ([vertices[0]] if closed else [])
    cells = set()
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.hypot(x1 - x0, y1 - y0) / step))
        for i in range(n + 1):
            t = i / n
            x, y = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
            cells.add((math.floor((frame.front - y) / frame.resolution),
                       math.floor((x + frame.left) / frame.resolution)))
    return cells


def test_default_canvas_shape():
    assert canvas_shape(BevFrame()) == (400, 200)
    assert rasterize([]).shape == (400, 200)


def test_empty_canvas_is_zero():
    assert not rasterize([]).grid.any()


def test_horizontal_divider_row_segment():
    e = MapElement(DIVIDER, [(-15, 0.075), (15, 0.075)])
    grid = rasterize([e]).grid
    rows, cols = np.nonzero(grid)
    assert set(rows) == {199}
    assert sorted(cols) == list(range(200))
    assert len(cols) == round(30 / 0.15)
    assert set(grid[rows, cols]) == {1 << int(MapClass.DIVIDER)}


def test_square_outline_matches_pixel_walk():
    lo, hi = 0.075, 3.075
    square = [(lo, lo), (hi, lo), (hi, hi), (lo, hi)]
    frame = BevFrame()
    grid = rasterize([MapElement(CROSSING, square)], frame).grid
    got = set(zip(*map(list, np.nonzero(grid))))
    expected = pixel_walk(square, frame, closed=True)
    assert got == expected
    assert len(got) == 4 * round(3 / 0.15)


def test_bresenham_is_contiguous(rng):
    for _ in range(50):
        r0, c0, r1, c1 = (int(v) for v in rng.integers(0, 60, 4))
        cells = bresenham(r0, c0, r1, c1)
        assert cells[0] == (r0, c0) and cells[-1] == (r1, c1)
        assert len(cells) == max(abs(r1 - r0), abs(c1 - c0)) + 1
        for (a, b), (c, d) in zip(cells, cells[1:]):
            assert max(abs(a - c), abs(b - d)) == 1


def test_classes_use_separate_bits():
    d = MapElement(DIVIDER, [(-5, 0.075), (5, 0.075)])
    s = MapElement(ElementKind.for_class(MapClass.STOP_LINE), [(0.075, -5), (0.075, 5)])
    grid = rasterize([d, s]).grid
    assert grid[199, 100] == (1 << 1) | (1 << 2)


def test_rasterize_deterministic(fixtures):
    scene = parse_scene(fixtures / "golden_scene.jsonl")
    a = rasterize(scene.ground_truth).grid
    b = rasterize(scene.ground_truth).grid
    assert np.array_equal(a, b)


def test_blank_image_is_background(tmp_path):
    emit_plot(rasterize([]), tmp_path / "a.ppm")
    emit_plot(rasterize([]), tmp_path / "b.ppm")
    data = (tmp_path / "a.ppm").read_bytes()
    assert data == (tmp_path / "b.ppm").read_bytes()
    assert data.startswith(b"P6\n200 400\n255\n")
    assert np.all(read_ppm(tmp_path / "a.ppm") == BACKGROUND)


def test_colors(fixtures):
    scene = parse_scene(fixtures / "golden_scene.jsonl")
    rgb = canvas_rgb(rasterize(scene.ground_truth))
    colors = {tuple(c) for c in rgb.reshape(-1, 3)}
    assert colors == {BACKGROUND, *CLASS_COLORS.values()}


def test_golden_image(fixtures, tmp_path):
    scene = parse_scene(fixtures / "golden_scene.jsonl")
    emit_plot(rasterize(scene.ground_truth, scene.frame), tmp_path / "g.ppm")
    assert (tmp_path / "g.ppm").read_bytes() == (fixtures / "golden_gt.ppm").read_bytes()


def test_read_ppm_rejects_other_formats(tmp_path):
    (tmp_path / "x.pgm").write_bytes(b"P5\n1 1\n255\n\x00")
    with pytest.raises(ValueError):
        read_ppm(tmp_path / "x.pgm")
