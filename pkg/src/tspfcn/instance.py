"""TSP instances, tours, and the world-to-pixel-grid normalization."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, InvalidInstanceError, InvalidTourError, MalformedFileError

# World rectangle as (xmin, ymin, xmax, ymax).
Bounds = tuple[float, float, float, float]

DEFAULT_BOUNDS: Bounds = (0.0, 0.0, 100.0, 100.0)


@dataclass(frozen=True)
class TspInstance:
    """A planar Euclidean TSP instance: city coordinates in world units."""

    id: str
    coords: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.coords) < 3:
            raise InvalidInstanceError(
                f"instance {self.id!r}: need at least 3 cities, got {len(self.coords)}"
            )
        for x, y in self.coords:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InvalidInstanceError(f"instance {self.id!r}: non-finite coordinate")

    @property
    def n(self) -> int:
        return len(self.coords)

    def distance(self, i: int, j: int) -> float:
        (x1, y1), (x2, y2) = self.coords[i], self.coords[j]
        return math.hypot(x1 - x2, y1 - y2)

    def distance_matrix(self) -> np.ndarray:
        pts = np.asarray(self.coords, dtype=np.float64)
        diff = pts[:, None, :] - pts[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


@dataclass(frozen=True)
class Tour:
    """A city visiting order (single Hamiltonian cycle) and its total distance."""

    order: tuple[int, ...]
    length: float

    @classmethod
    def from_order(cls, instance: TspInstance, order: Sequence[int]) -> "Tour":
        return cls(order=tuple(int(c) for c in order), length=tour_length(instance, order))


@dataclass(frozen=True)
class TourValidity:
    valid: bool
    reason: str | None = None


@dataclass(frozen=True)
class PixelCoords:
    """City positions mapped onto a w x h pixel grid.

    Positions are kept as floats in [0, w] x [0, h]; truncation to integer
    pixels happens at the raster layer.
    """

    points: tuple[tuple[float, float], ...]
    w: int
    h: int
    degenerate_x: bool = False
    degenerate_y: bool = False

    @property
    def degenerate(self) -> bool:
        return self.degenerate_x or self.degenerate_y


def generate_instance(n: int, seed: int, bounds: Bounds = DEFAULT_BOUNDS) -> TspInstance:
    """Draw n cities i.i.d. uniformly inside the bounds rectangle."""
    if n < 3:
        raise InvalidInstanceError(f"need at least 3 cities, got {n}")
    xmin, ymin, xmax, ymax = bounds
    if not (xmax > xmin and ymax > ymin):
        raise InvalidInstanceError(f"degenerate bounds {bounds}")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(xmin, xmax, n)
    ys = rng.uniform(ymin, ymax, n)
    coords = tuple((float(x), float(y)) for x, y in zip(xs, ys))
    return TspInstance(id=f"n{n}-s{seed}", coords=coords)


def _check_permutation(order: Sequence[int], n: int) -> None:
    if len(order) != n:
        raise InvalidTourError(f"tour has {len(order)} cities, instance has {n}")
    seen = set(order)
    if len(seen) != n or min(seen) != 0 or max(seen) != n - 1:
        raise InvalidTourError(f"tour {list(order)} is not a permutation of 0..{n - 1}")


def tour_length(instance: TspInstance, order: Sequence[int]) -> float:
    """Total cycle distance: consecutive hops plus the closing edge."""
    _check_permutation(order, instance.n)
    total = 0.0
    for k in range(len(order)):
        total += instance.distance(order[k], order[(k + 1) % len(order)])
    return total


def validate_tour(instance: TspInstance, order: Sequence[int]) -> TourValidity:
    """Verdict on whether order is a single Hamiltonian cycle over all cities."""
    n = instance.n
    if len(order) != n:
        return TourValidity(False, f"wrong length: {len(order)} != {n}")
    seen: set[int] = set()
    for c in order:
        if not isinstance(c, (int, np.integer)) or c < 0 or c >= n:
            return TourValidity(False, f"city {c!r} out of range")
        if c in seen:
            return TourValidity(False, f"duplicate city {c}")
        seen.add(c)
    if len(seen) != n:
        missing = sorted(set(range(n)) - seen)
        return TourValidity(False, f"missing city {missing[0]}")
    return TourValidity(True)


def normalize(instance: TspInstance, w: int, h: int) -> PixelCoords:
    """Scale city coordinates so the extremes touch the image edges.

    x* = (x - xmin) / lambda_x with lambda_x = (xmax - xmin) / w, and the
    analogous mapping for y. An axis where all cities coincide is placed on
    the image centerline and flagged as degenerate.
    """
    if w < 2 or h < 2:
        raise ConfigError(f"image dims must be >= 2, got {w}x{h}")
    xs = [c[0] for c in instance.coords]
    ys = [c[1] for c in instance.coords]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    degenerate_x = xmax == xmin
    degenerate_y = ymax == ymin
    points = []
    for x, y in instance.coords:
        px = w / 2.0 if degenerate_x else (x - xmin) * w / (xmax - xmin)
        py = h / 2.0 if degenerate_y else (y - ymin) * h / (ymax - ymin)
        points.append((px, py))
    return PixelCoords(
        points=tuple(points), w=w, h=h, degenerate_x=degenerate_x, degenerate_y=degenerate_y
    )


# --- JSONL serialization: one {"id", "coords", "tour"?, "length"?} object per line ---


def instance_to_json(instance: TspInstance, tour: Tour | None = None) -> dict:
    obj: dict = {"id": instance.id, "coords": [[x, y] for x, y in instance.coords]}
    if tour is not None:
        obj["tour"] = list(tour.order)
        obj["length"] = tour.length
    return obj


def instance_from_json(obj: dict) -> tuple[TspInstance, Tour | None]:
    try:
        inst = TspInstance(
            id=str(obj["id"]),
            coords=tuple((float(x), float(y)) for x, y in obj["coords"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"bad instance record: {exc}") from exc
    tour = None
    if "tour" in obj:
        order = [int(c) for c in obj["tour"]]
        _check_permutation(order, inst.n)
        length = float(obj["length"]) if "length" in obj else tour_length(inst, order)
        tour = Tour(order=tuple(order), length=length)
    return inst, tour


def save_jsonl(path: str | Path, records: Iterable[tuple[TspInstance, Tour | None]]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for inst, tour in records:
            fh.write(json.dumps(instance_to_json(inst, tour)) + "\n")
            count += 1
    return count


def load_jsonl(path: str | Path) -> list[tuple[TspInstance, Tour | None]]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedFileError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            records.append(instance_from_json(obj))
    return records
