"""Tour extraction from black/white prediction masks.

Works on the binarized class image: a boolean (h, w) array where True marks
the path class. Candidate edges between cities are scored by the density of
path pixels sampled along the straight segment, and a greedy walk picks the
densest edge at every step. Running the walk from several departure cities
and keeping the shortest result smooths over locally wrong picks.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidInstanceError
from .instance import PixelCoords, Tour, TspInstance, normalize, tour_length

TIE_BREAK_RULES = ("shorter-edge",)


@dataclass(frozen=True)
class DecodeConfig:
    """Departure-city strategy for the greedy decode.

    m is the number of departure cities; None or m >= n enumerates every
    city once, m < n samples cities with repetition from the seed.
    city_halfwidth is the radius of the rendered city marks; when set, ties
    at equal density are resolved by the density of samples outside those
    marks (segments buried entirely inside two overlapping city marks carry
    no path evidence), before falling back to the shorter edge.
    """

    m: int | None = None
    departure: int | None = None
    seed: int = 0
    tie_break: str = "shorter-edge"
    city_halfwidth: int | None = 6

    def __post_init__(self) -> None:
        if self.m is not None and self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.tie_break not in TIE_BREAK_RULES:
            raise ConfigError(f"unknown tie_break {self.tie_break!r}")


@dataclass(frozen=True)
class DensityQuery:
    """One candidate edge (i, j) scored against a path-class mask."""

    mask: np.ndarray
    pixel_coords: PixelCoords
    i: int
    j: int

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ConfigError("density query needs two distinct cities")
        n = len(self.pixel_coords.points)
        if not (0 <= self.i < n and 0 <= self.j < n):
            raise ConfigError(f"cities ({self.i}, {self.j}) out of range for n={n}")

    def samples(self) -> np.ndarray:
        return sample_pixels(self.pixel_coords, self.i, self.j)

    def density(self) -> float:
        samples = self.samples()
        if len(samples) == 0:
            return 1.0
        black = self.mask[samples[:, 1], samples[:, 0]]
        return float(np.count_nonzero(black)) / len(samples)


@dataclass
class DecodeDiagnostics:
    density_evaluations: int = 0
    ties: int = 0
    degenerate_pairs: int = 0
    departures: list[int] = field(default_factory=list)
    lengths_by_departure: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Solution:
    tour: Tour
    m: int
    diagnostics: DecodeDiagnostics

    def to_json(self) -> dict:
        return {
            "order": list(self.tour.order),
            "length": self.tour.length,
            "m": self.m,
            "diagnostics": {
                "density_evaluations": self.diagnostics.density_evaluations,
                "ties": self.diagnostics.ties,
                "degenerate_pairs": self.diagnostics.degenerate_pairs,
                "departures": self.diagnostics.departures,
                "lengths_by_departure": {
                    str(k): v for k, v in self.diagnostics.lengths_by_departure.items()
                },
            },
        }


def sample_pixels(pixel_coords: PixelCoords, i: int, j: int) -> np.ndarray:
    """Integer pixels sampled along the straight segment between cities i and j.

    The sample count p is the integer part of the larger coordinate span; the
    t-th sample sits at the integer part of min + t*span/p on each axis.
    Returns an (p, 2) array of (x, y) pairs, empty when the cities share a
    pixel (degenerate pair).
    """
    if i == j:
        raise ConfigError("cannot sample a path from a city to itself")
    xi, yi = pixel_coords.points[i]
    xj, yj = pixel_coords.points[j]
    p = int(max(abs(xi - xj), abs(yi - yj)))
    if p == 0:
        return np.zeros((0, 2), dtype=np.int64)
    t = np.arange(1, p + 1, dtype=np.float64)
    xs = (min(xi, xj) + np.abs(t * (xi - xj)) / p).astype(np.int64)
    ys = (min(yi, yj) + np.abs(t * (yi - yj)) / p).astype(np.int64)
    np.clip(xs, 0, pixel_coords.w - 1, out=xs)
    np.clip(ys, 0, pixel_coords.h - 1, out=ys)
    return np.stack([xs, ys], axis=1)


def path_density(mask: np.ndarray, pixel_coords: PixelCoords, i: int, j: int) -> float:
    """Fraction of path-class pixels among the segment samples, in [0, 1].

    Cities that share a pixel cannot be sampled; they count as maximally
    connected (density 1).
    """
    return DensityQuery(mask=np.asarray(mask).astype(bool), pixel_coords=pixel_coords,
                        i=i, j=j).density()


def _as_bool_mask(mask: np.ndarray, pixel_coords: PixelCoords) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (pixel_coords.h, pixel_coords.w):
        raise ConfigError(
            f"mask shape {mask.shape} does not match grid {pixel_coords.h}x{pixel_coords.w}"
        )
    return mask.astype(bool)


def _city_mark_area(pc: PixelCoords, halfwidth: int) -> np.ndarray:
    """Boolean (h, w) map of pixels covered by any rendered city mark."""
    area = np.zeros((pc.h, pc.w), dtype=bool)
    for x, y in pc.points:
        cx = min(max(int(x), 0), pc.w - 1)
        cy = min(max(int(y), 0), pc.h - 1)
        area[
            max(cy - halfwidth, 0) : cy + halfwidth + 1,
            max(cx - halfwidth, 0) : cx + halfwidth + 1,
        ] = True
    return area


def greedy_tour(
    mask: np.ndarray,
    instance: TspInstance,
    departure: int,
    pixel_coords: PixelCoords | None = None,
    diagnostics: DecodeDiagnostics | None = None,
    cfg: DecodeConfig = DecodeConfig(),
) -> Tour:
    """Greedy walk from the departure city, always moving to the unvisited city
    with the highest path density.

    Ties go first to the candidate with denser path evidence outside the city
    marks (when cfg.city_halfwidth is set), then to the geometrically shorter
    edge in world units, then to the lower city index. Always yields a valid
    tour: density is defined for every pair.
    """
    n = instance.n
    if not 0 <= departure < n:
        raise InvalidInstanceError(f"departure {departure} out of range for n={n}")
    pc = pixel_coords if pixel_coords is not None else normalize(instance, 224, 224)
    m01 = _as_bool_mask(mask, pc)
    diag = diagnostics if diagnostics is not None else DecodeDiagnostics()
    city_area = None
    if cfg.city_halfwidth is not None:
        city_area = _city_mark_area(pc, cfg.city_halfwidth)

    order = [departure]
    visited = [False] * n
    visited[departure] = True
    current = departure
    for _ in range(n - 1):
        best_j = -1
        best_key: tuple[float, float, float, int] | None = None
        tie = False
        for j in range(n):
            if visited[j]:
                continue
            samples = sample_pixels(pc, current, j)
            diag.density_evaluations += 1
            informative = 0.0
            if len(samples) == 0:
                rho = 1.0
                diag.degenerate_pairs += 1
            else:
                black = m01[samples[:, 1], samples[:, 0]]
                rho = float(np.count_nonzero(black)) / len(samples)
                if city_area is not None:
                    outside = ~city_area[samples[:, 1], samples[:, 0]]
                    n_out = int(np.count_nonzero(outside))
                    if n_out:
                        informative = float(np.count_nonzero(black & outside)) / n_out
            key = (-rho, -informative, instance.distance(current, j), j)
            if best_key is None or key < best_key:
                tie = best_key is not None and key[0] == best_key[0]
                best_key, best_j = key, j
            elif key[0] == best_key[0]:
                tie = True
        if tie:
            diag.ties += 1
        order.append(best_j)
        visited[best_j] = True
        current = best_j
    return Tour(order=tuple(order), length=tour_length(instance, order))


def _rotate_to(order: tuple[int, ...], start: int) -> tuple[int, ...]:
    k = order.index(start)
    return order[k:] + order[:k]


def post_process(
    mask: np.ndarray,
    instance: TspInstance,
    cfg: DecodeConfig = DecodeConfig(),
    pixel_coords: PixelCoords | None = None,
) -> Solution:
    """Run the greedy decode from m departure cities and keep the shortest tour.

    With m >= n every city departs exactly once; with m < n departures are
    sampled with repetition from cfg.seed. The winning tour is rotated to
    start at cfg.departure when one is given.
    """
    n = instance.n
    pc = pixel_coords if pixel_coords is not None else normalize(instance, 224, 224)
    m = n if cfg.m is None else cfg.m
    if m >= n:
        departures = list(range(n))
        m_effective = n
    else:
        rng = np.random.default_rng(cfg.seed)
        departures = [int(d) for d in rng.integers(0, n, m)]
        m_effective = m

    diag = DecodeDiagnostics(departures=list(departures))
    best: Tour | None = None
    best_dep = -1
    for dep in departures:
        tour = greedy_tour(mask, instance, dep, pixel_coords=pc, diagnostics=diag, cfg=cfg)
        diag.lengths_by_departure[dep] = tour.length
        if best is None or tour.length < best.length - 1e-12 or (
            abs(tour.length - best.length) <= 1e-12 and dep < best_dep
        ):
            best, best_dep = tour, dep
    assert best is not None
    if cfg.departure is not None:
        if not 0 <= cfg.departure < n:
            raise InvalidInstanceError(f"departure {cfg.departure} out of range for n={n}")
        best = Tour(order=_rotate_to(best.order, cfg.departure), length=best.length)
    return Solution(tour=best, m=m_effective, diagnostics=diag)


@dataclass(frozen=True)
class TimingRow:
    m: int
    mean_time_s: float
    density_evaluations: int
    expected_evaluations: int


def decode_timing(
    items: list[tuple[np.ndarray, TspInstance]],
    m_values: list[int],
    seed: int = 0,
) -> list[TimingRow]:
    """Mean decode wall-time and density-evaluation counts per departure count m.

    The evaluation counter must equal m*n*(n-1)/2 per decode by construction.
    """
    rows = []
    for m in m_values:
        total_evals = 0
        expected = 0
        start = time.perf_counter()
        for mask, instance in items:
            pc = normalize(instance, mask.shape[1], mask.shape[0])
            sol = post_process(mask, instance, DecodeConfig(m=m, seed=seed), pixel_coords=pc)
            total_evals += sol.diagnostics.density_evaluations
            expected += sol.m * instance.n * (instance.n - 1) // 2
        elapsed = time.perf_counter() - start
        rows.append(
            TimingRow(
                m=m,
                mean_time_s=elapsed / max(len(items), 1),
                density_evaluations=total_evals,
                expected_evaluations=expected,
            )
        )
    return rows


def linear_fit_r2(xs: list[float], ys: list[float]) -> float:
    """Coefficient of determination for a least-squares line through (xs, ys)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < 2:
        raise ConfigError("need at least two points for a linear fit")
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0
    return 1.0 - ss_res / ss_tot
