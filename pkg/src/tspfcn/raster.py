"""Rasterization of instances and tours into RGB inputs and one-hot label masks.

Input images show the fully connected city graph (or just the city dots in
scatter mode); label masks mark the optimal-tour pixels plus the city squares
in channel 1. City squares are painted last so paths never cover city
information.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .decode import sample_pixels
from .errors import ConfigError, MalformedFileError, NumericError, RasterError, ShapeError
from .instance import PixelCoords, Tour, TspInstance, normalize, validate_tour
from .errors import InvalidTourError

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class RenderConfig:
    w: int = 224
    h: int = 224
    city_halfwidth: int = 6
    city_color: RGB = (255, 0, 0)
    path_color: RGB = (0, 0, 255)
    background_color: RGB = (255, 255, 255)
    mode: str = "full-graph"  # full-graph | scatter | tour-label
    path_thickness: int = 1

    def __post_init__(self) -> None:
        colors = {self.city_color, self.path_color, self.background_color}
        if len(colors) != 3:
            raise ConfigError("city, path and background colors must be pairwise distinct")
        if 2 * self.city_halfwidth + 1 >= min(self.w, self.h):
            raise ConfigError(
                f"city square {2 * self.city_halfwidth + 1} does not fit in {self.w}x{self.h}"
            )
        if self.mode not in ("full-graph", "scatter", "tour-label"):
            raise ConfigError(f"unknown render mode {self.mode!r}")
        if self.path_thickness < 1:
            raise ConfigError("path_thickness must be >= 1")

    @classmethod
    def desk(cls, **overrides) -> "RenderConfig":
        """Small preset for CPU-scale runs: 64x64 with proportionally scaled city squares."""
        base = cls(w=64, h=64, city_halfwidth=2)
        return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class RasterImage:
    """RGB image, row-major from the top-left: pixels[y, x] = (r, g, b)."""

    pixels: np.ndarray  # (h, w, 3) uint8
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3 or self.pixels.dtype != np.uint8:
            raise ShapeError(f"expected (h, w, 3) uint8 pixels, got {self.pixels.shape}")

    @property
    def w(self) -> int:
        return self.pixels.shape[1]

    @property
    def h(self) -> int:
        return self.pixels.shape[0]

    def checksum(self) -> str:
        return hashlib.sha256(self.pixels.tobytes()).hexdigest()


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel one-hot classes: channel 0 background, channel 1 path-or-city."""

    classes: np.ndarray  # (h, w, 2) uint8, one-hot
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.classes.ndim != 3 or self.classes.shape[2] != 2:
            raise ShapeError(f"expected (h, w, 2) classes, got {self.classes.shape}")
        if not np.all(self.classes.sum(axis=2) == 1):
            raise RasterError("label mask is not one-hot")

    @property
    def w(self) -> int:
        return self.classes.shape[1]

    @property
    def h(self) -> int:
        return self.classes.shape[0]

    def path_mask(self) -> np.ndarray:
        """Boolean (h, w) array of the path-or-city class."""
        return self.classes[:, :, 1].astype(bool)


def _bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    pts = []
    x, y = x0, y0
    while True:
        pts.append((x, y))
        if x == x1 and y == y1:
            return pts
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def line_pixels(
    a: tuple[int, int], b: tuple[int, int], bounds: tuple[int, int] | None = None
) -> list[tuple[int, int]]:
    """Connected pixel segment from a to b, midpoint-style.

    The traced set depends only on the unordered endpoint pair (the segment is
    always walked from the lexicographically smaller endpoint), so swapping a
    and b yields the same pixels in reverse order.
    """
    if bounds is not None:
        w, h = bounds
        for x, y in (a, b):
            if not (0 <= x < w and 0 <= y < h):
                raise RasterError(f"endpoint ({x}, {y}) outside {w}x{h} image")
    if (a[0], a[1]) <= (b[0], b[1]):
        return _bresenham(a[0], a[1], b[0], b[1])
    return _bresenham(b[0], b[1], a[0], a[1])[::-1]


def city_pixel_positions(pc: PixelCoords) -> list[tuple[int, int]]:
    """Integer pixel of each city: truncated float position, clamped to the grid."""
    out = []
    for x, y in pc.points:
        out.append((min(max(int(x), 0), pc.w - 1), min(max(int(y), 0), pc.h - 1)))
    return out


def pixel_collisions(pc: PixelCoords) -> list[tuple[int, int]]:
    """City index pairs that fall on the same integer pixel."""
    pos = city_pixel_positions(pc)
    by_pixel: dict[tuple[int, int], list[int]] = {}
    for i, p in enumerate(pos):
        by_pixel.setdefault(p, []).append(i)
    pairs = []
    for cities in by_pixel.values():
        for a in range(len(cities)):
            for b in range(a + 1, len(cities)):
                pairs.append((cities[a], cities[b]))
    return sorted(pairs)


def _square_bounds(cx: int, cy: int, halfwidth: int, w: int, h: int) -> tuple[int, int, int, int]:
    return (
        max(cx - halfwidth, 0),
        min(cx + halfwidth, w - 1),
        max(cy - halfwidth, 0),
        min(cy + halfwidth, h - 1),
    )


def _paint_squares(buf: np.ndarray, centers: list[tuple[int, int]], halfwidth: int, value) -> None:
    h, w = buf.shape[:2]
    for cx, cy in centers:
        x0, x1, y0, y1 = _square_bounds(cx, cy, halfwidth, w, h)
        buf[y0 : y1 + 1, x0 : x1 + 1] = value


def _thicken(pts: set[tuple[int, int]], thickness: int, w: int, h: int) -> set[tuple[int, int]]:
    if thickness <= 1:
        return pts
    r = thickness // 2
    out = set()
    for x, y in pts:
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                nx, ny = x + dx, y + dy
                if 0 <= nx < w and 0 <= ny < h:
                    out.add((nx, ny))
    return out


def _paint_points(buf: np.ndarray, pts: set[tuple[int, int]], value) -> None:
    if not pts:
        return
    arr = np.array(sorted(pts), dtype=np.int64)
    buf[arr[:, 1], arr[:, 0]] = value


def _segment_pixel_set(positions: list[tuple[int, int]], pairs, w: int, h: int) -> set[tuple[int, int]]:
    pts: set[tuple[int, int]] = set()
    for i, j in pairs:
        pts.update(line_pixels(positions[i], positions[j], bounds=(w, h)))
    return pts


def render_input(instance: TspInstance, cfg: RenderConfig) -> RasterImage:
    """Fully connected graph image: every city pair joined in the path color,
    then city squares painted on top."""
    if cfg.mode != "full-graph":
        raise ConfigError(f"render_input expects full-graph mode, got {cfg.mode!r}")
    return _render_graph(instance, cfg, draw_paths=True)


def render_scatter(instance: TspInstance, cfg: RenderConfig) -> RasterImage:
    """City dots only: the full-graph image with all path pixels left background."""
    if cfg.mode != "scatter":
        raise ConfigError(f"render_scatter expects scatter mode, got {cfg.mode!r}")
    return _render_graph(instance, cfg, draw_paths=False)


def _render_graph(instance: TspInstance, cfg: RenderConfig, draw_paths: bool) -> RasterImage:
    pc = normalize(instance, cfg.w, cfg.h)
    positions = city_pixel_positions(pc)
    buf = np.empty((cfg.h, cfg.w, 3), dtype=np.uint8)
    buf[:, :] = cfg.background_color
    if draw_paths:
        pairs = [(i, j) for i in range(instance.n) for j in range(i + 1, instance.n)]
        pts = _segment_pixel_set(positions, pairs, cfg.w, cfg.h)
        pts = _thicken(pts, cfg.path_thickness, cfg.w, cfg.h)
        _paint_points(buf, pts, cfg.path_color)
    _paint_squares(buf, positions, cfg.city_halfwidth, cfg.city_color)
    return RasterImage(pixels=buf, degenerate=pc.degenerate)


def render_label(instance: TspInstance, tour: Tour, cfg: RenderConfig) -> LabelMask:
    """One-hot mask of the tour: channel 1 on the n tour segments and the city squares.

    Segments are drawn as the midpoint trace united with the decoder's sample
    pixels so that a clean label always scores density 1 on true tour edges.
    """
    verdict = validate_tour(instance, tour.order)
    if not verdict.valid:
        raise InvalidTourError(f"cannot render label: {verdict.reason}")
    pc = normalize(instance, cfg.w, cfg.h)
    positions = city_pixel_positions(pc)
    path = np.zeros((cfg.h, cfg.w), dtype=bool)

    order = tour.order
    pts: set[tuple[int, int]] = set()
    for k in range(len(order)):
        i, j = order[k], order[(k + 1) % len(order)]
        pts.update(line_pixels(positions[i], positions[j], bounds=(cfg.w, cfg.h)))
        for x, y in sample_pixels(pc, i, j):
            pts.add((int(x), int(y)))
    pts = _thicken(pts, cfg.path_thickness, cfg.w, cfg.h)
    if pts:
        arr = np.array(sorted(pts), dtype=np.int64)
        path[arr[:, 1], arr[:, 0]] = True
    _paint_squares(path, positions, cfg.city_halfwidth, True)

    classes = np.zeros((cfg.h, cfg.w, 2), dtype=np.uint8)
    classes[:, :, 1] = path
    classes[:, :, 0] = ~path
    return LabelMask(classes=classes, degenerate=pc.degenerate)


def probs_to_image(probabilities: np.ndarray) -> RasterImage:
    """Colorize a (h, w, 2) probability map: path-class pixels black, rest white.

    Ties go to the path class so that the output is deterministic.
    """
    probs = np.asarray(probabilities)
    if probs.ndim != 3 or probs.shape[2] != 2:
        raise ShapeError(f"expected (h, w, 2) probabilities, got {probs.shape}")
    if not np.all(np.isfinite(probs)):
        raise NumericError("non-finite values in probability map")
    black = probs[:, :, 1] >= probs[:, :, 0]
    buf = np.full(probs.shape[:2] + (3,), 255, dtype=np.uint8)
    buf[black] = (0, 0, 0)
    return RasterImage(pixels=buf)


def image_path_mask(image: RasterImage, path_color: RGB = (0, 0, 0)) -> np.ndarray:
    """Boolean (h, w) mask of pixels matching the path color (black by default)."""
    return np.all(image.pixels == np.array(path_color, dtype=np.uint8), axis=2)


# --- PNG I/O ---


def save_png(image: RasterImage, path: str | Path) -> None:
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")


def load_png(path: str | Path) -> RasterImage:
    try:
        with Image.open(path) as im:
            im.load()
            rgb = im.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MalformedFileError(f"cannot read PNG {path}: {exc}") from exc
    return RasterImage(pixels=pixels.copy())


def save_label_png(mask: LabelMask, path: str | Path) -> None:
    """Store channel 1 as an 8-bit grayscale PNG with values 0/255."""
    arr = (mask.classes[:, :, 1] * 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_label_png(path: str | Path, expected_size: tuple[int, int] | None = None) -> LabelMask:
    try:
        with Image.open(path) as im:
            im.load()
            gray = im.convert("L")
            arr = np.asarray(gray, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MalformedFileError(f"cannot read label PNG {path}: {exc}") from exc
    values = np.unique(arr)
    if not set(values.tolist()) <= {0, 255}:
        raise MalformedFileError(f"label PNG {path} has non-binary values {values[:8]}")
    if expected_size is not None and (arr.shape[1], arr.shape[0]) != expected_size:
        raise ShapeError(
            f"label PNG {path} is {arr.shape[1]}x{arr.shape[0]}, expected {expected_size}"
        )
    ch1 = (arr == 255).astype(np.uint8)
    classes = np.stack([1 - ch1, ch1], axis=2)
    return LabelMask(classes=classes)
