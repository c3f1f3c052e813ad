"""Quality metrics, pipeline evaluation, sweeps, and the solver benchmark."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .decode import DecodeConfig, post_process
from .errors import DataError
from .instance import Tour, TspInstance, generate_instance, normalize, validate_tour
from .raster import (
    RenderConfig,
    image_path_mask,
    pixel_collisions,
    probs_to_image,
    render_input,
    render_label,
    render_scatter,
)
from .solvers import (
    AcoConfig,
    GaConfig,
    solve_ant_colony,
    solve_branch_bound,
    solve_dp,
    solve_exhaustive,
    solve_genetic,
)

E0_REL_TOL = 1e-9
RESOLUTION_SAFE_MAX_N = 12


@dataclass(frozen=True)
class MetricsReport:
    """e_k fractions and the mean produced/optimal ratio over a sample set.

    Invalid tours fail every e_k and are excluded from r_aver.
    """

    e0: float
    e1: float
    e2: float
    e5: float
    e10: float
    r_aver: float
    samples: int
    invalid: int

    def as_percent_dict(self) -> dict:
        return {
            "e0": 100.0 * self.e0,
            "e1": 100.0 * self.e1,
            "e2": 100.0 * self.e2,
            "e5": 100.0 * self.e5,
            "e10": 100.0 * self.e10,
            "r_aver": 100.0 * self.r_aver,
            "samples": self.samples,
            "invalid": self.invalid,
        }

    def __str__(self) -> str:
        d = self.as_percent_dict()
        return (
            f"e0={d['e0']:.2f}% e1={d['e1']:.2f}% e2={d['e2']:.2f}% "
            f"e5={d['e5']:.2f}% e10={d['e10']:.2f}% R_aver={d['r_aver']:.2f}% "
            f"({self.samples} samples, {self.invalid} invalid)"
        )


def compute_metrics(solutions: Sequence[tuple[float, float, bool]]) -> MetricsReport:
    """Aggregate (produced_length, optimal_length, valid) triples.

    e0 counts equality within 1e-9 relative; e_k counts
    produced <= (1 + k/100) * optimal + 1e-9.
    """
    if not solutions:
        raise DataError("cannot compute metrics over an empty solution set")
    counts = {0: 0, 1: 0, 2: 0, 5: 0, 10: 0}
    ratios = []
    invalid = 0
    for produced, optimal, valid in solutions:
        if optimal <= 0:
            raise DataError(f"optimal length must be positive, got {optimal}")
        if not valid:
            invalid += 1
            continue
        if produced <= optimal * (1.0 + E0_REL_TOL):
            counts[0] += 1
        for k in (1, 2, 5, 10):
            if produced <= (1.0 + k / 100.0) * optimal + 1e-9:
                counts[k] += 1
        ratios.append(produced / optimal)
    total = len(solutions)
    return MetricsReport(
        e0=counts[0] / total,
        e1=counts[1] / total,
        e2=counts[2] / total,
        e5=counts[5] / total,
        e10=counts[10] / total,
        r_aver=float(np.mean(ratios)) if ratios else float("nan"),
        samples=total,
        invalid=invalid,
    )


# A predictor maps a rendered input image (RasterImage) to an (h, w, 2)
# probability map. The oracle passthrough ignores the image and emits the
# label mask, isolating the representation + decoder from training quality.
Predictor = Callable[["np.ndarray"], np.ndarray]


@dataclass(frozen=True)
class PipelineConfig:
    render: RenderConfig = RenderConfig()
    decode: DecodeConfig = DecodeConfig()
    oracle_passthrough: bool = False

    def decode_config(self) -> DecodeConfig:
        # keep the decoder's notion of city-mark size in sync with rendering;
        # an explicit None (refinement disabled) is honored
        if self.decode.city_halfwidth is None or (
            self.decode.city_halfwidth == self.render.city_halfwidth
        ):
            return self.decode
        return replace(self.decode, city_halfwidth=self.render.city_halfwidth)


@dataclass
class PipelineRun:
    report: MetricsReport
    collisions: int
    predict_time_s: float
    decode_time_s: float
    solutions: list[tuple[float, float, bool]] = field(default_factory=list)


def run_pipeline_eval(
    predictor: Predictor | None,
    test_set: Sequence[tuple[TspInstance, Tour]],
    cfg: PipelineConfig = PipelineConfig(),
    skip_collisions: bool = False,
) -> PipelineRun:
    """Render -> predict -> binarize -> decode -> metrics against stored optima.

    predictor is None only with oracle passthrough. Instances whose cities
    collide on one pixel are flagged; with skip_collisions they are left out
    of the metrics entirely.
    """
    if predictor is None and not cfg.oracle_passthrough:
        raise DataError("need a predictor unless oracle_passthrough is set")
    rcfg = cfg.render
    dcfg = cfg.decode_config()
    solutions = []
    collisions = 0
    predict_time = 0.0
    decode_time = 0.0
    for inst, opt in test_set:
        pc = normalize(inst, rcfg.w, rcfg.h)
        if pixel_collisions(pc):
            collisions += 1
            if skip_collisions:
                continue
        if cfg.oracle_passthrough:
            t0 = time.perf_counter()
            label = render_label(inst, opt, _label_config(rcfg))
            mask = label.path_mask()
            predict_time += time.perf_counter() - t0
        else:
            image = (
                render_scatter(inst, rcfg) if rcfg.mode == "scatter" else render_input(inst, rcfg)
            )
            x = image.pixels.astype(np.float32) / 255.0
            t0 = time.perf_counter()
            probs = predictor(x)
            predict_time += time.perf_counter() - t0
            mask = image_path_mask(probs_to_image(probs))
        t0 = time.perf_counter()
        sol = post_process(mask, inst, dcfg, pixel_coords=pc)
        decode_time += time.perf_counter() - t0
        ok = validate_tour(inst, sol.tour.order).valid
        solutions.append((sol.tour.length, opt.length, ok))
    report = compute_metrics(solutions)
    return PipelineRun(
        report=report,
        collisions=collisions,
        predict_time_s=predict_time,
        decode_time_s=decode_time,
        solutions=solutions,
    )


def _label_config(rcfg: RenderConfig) -> RenderConfig:
    return replace(rcfg, mode="tour-label")


def generalization_sweep(
    predictor: Predictor | None,
    n_values: Sequence[int],
    samples_per_n: int,
    cfg: PipelineConfig = PipelineConfig(),
    base_seed: int = 0,
    skip_collisions: bool = True,
) -> dict[int, PipelineRun]:
    """Full pipeline per city count; optimal tours come from the subset DP."""
    out: dict[int, PipelineRun] = {}
    for n in n_values:
        if n > RESOLUTION_SAFE_MAX_N:
            warnings.warn(
                f"n={n} exceeds the resolution-safety guard ({RESOLUTION_SAFE_MAX_N}); "
                "city squares may collide more often",
                stacklevel=2,
            )
        test_set = []
        for k in range(samples_per_n):
            inst = generate_instance(n, base_seed + 10_000 * n + k)
            test_set.append((inst, solve_dp(inst)))
        out[n] = run_pipeline_eval(predictor, test_set, cfg, skip_collisions=skip_collisions)
    return out


@dataclass
class BenchRow:
    n: int
    times_ms: dict[str, float] = field(default_factory=dict)  # solver -> median ms
    heuristic_e0: dict[str, float] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)
    pipeline_predict_ms: float | None = None
    pipeline_decode_ms: float | None = None
    pipeline_e0: float | None = None


SOLVER_GUARDS = {"exhaustive": 12, "dp": 20, "bb": 20, "ga": None, "aco": None}


def _median_time_ms(fn: Callable[[], object], repetitions: int, warmups: int) -> float:
    for _ in range(warmups):
        fn()
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def benchmark_solvers(
    n_values: Sequence[int],
    instances_per_n: int = 20,
    seed: int = 0,
    ga: GaConfig = GaConfig(),
    aco: AcoConfig = AcoConfig(),
    repetitions: int = 20,
    warmups: int = 3,
    heuristic_samples: int = 0,
    predictor: Predictor | None = None,
    pipeline: PipelineConfig | None = None,
) -> list[BenchRow]:
    """Median wall-times per solver per n, heuristic e0 columns, and optional
    pipeline columns when a predictor (or oracle passthrough config) is given.

    Timing cells cycle through instances_per_n fixed instances; cells beyond a
    solver's size guard are skipped and marked.
    """
    rows = []
    for n in n_values:
        row = BenchRow(n=n)
        instances = [generate_instance(n, seed + 1000 * n + k) for k in range(instances_per_n)]
        optima = {inst.id: solve_dp(inst) for inst in instances} if n <= 20 else {}

        solvers: dict[str, Callable[[TspInstance], Tour]] = {
            "exhaustive": solve_exhaustive,
            "dp": solve_dp,
            "bb": solve_branch_bound,
            "ga": lambda i: solve_genetic(i, ga),
            "aco": lambda i: solve_ant_colony(i, aco),
        }
        for name, fn in solvers.items():
            guard = SOLVER_GUARDS[name]
            if guard is not None and n > guard:
                row.skipped.append(name)
                continue
            cycle = iter_cycle(instances)
            row.times_ms[name] = _median_time_ms(lambda: fn(next(cycle)), repetitions, warmups)

        if heuristic_samples > 0 and n <= 20:
            h_instances = [
                generate_instance(n, seed + 777_000 + 1000 * n + k)
                for k in range(heuristic_samples)
            ]
            h_optima = [solve_dp(i) for i in h_instances]
            for name, fn in (("ga", lambda i: solve_genetic(i, ga)),
                             ("aco", lambda i: solve_ant_colony(i, aco))):
                sols = [
                    (fn(i).length, o.length, True) for i, o in zip(h_instances, h_optima)
                ]
                row.heuristic_e0[name] = compute_metrics(sols).e0

        if pipeline is not None and n <= 20:
            test_set = [(i, optima[i.id]) for i in instances]
            run = run_pipeline_eval(predictor, test_set, pipeline, skip_collisions=True)
            denom = max(run.report.samples, 1)
            row.pipeline_predict_ms = 1e3 * run.predict_time_s / denom
            row.pipeline_decode_ms = 1e3 * run.decode_time_s / denom
            row.pipeline_e0 = run.report.e0
        rows.append(row)
    return rows


def iter_cycle(items: Sequence):
    def gen():
        while True:
            for item in items:
                yield item

    return gen()


def bench_rows_to_csv(rows: list[BenchRow]) -> str:
    headers = [
        "n",
        "exhaustive_ms",
        "dp_ms",
        "bb_ms",
        "ga_ms",
        "ga_e0",
        "aco_ms",
        "aco_e0",
        "fcn_ms",
        "decode_ms",
        "pipeline_e0",
    ]
    lines = [",".join(headers)]
    for row in rows:
        def fmt_time(name: str) -> str:
            if name in row.skipped:
                return "skipped"
            v = row.times_ms.get(name)
            return f"{v:.3f}" if v is not None else ""

        def fmt_e0(value: float | None) -> str:
            return f"{100.0 * value:.2f}%" if value is not None else ""

        lines.append(
            ",".join(
                [
                    str(row.n),
                    fmt_time("exhaustive"),
                    fmt_time("dp"),
                    fmt_time("bb"),
                    fmt_time("ga"),
                    fmt_e0(row.heuristic_e0.get("ga")),
                    fmt_time("aco"),
                    fmt_e0(row.heuristic_e0.get("aco")),
                    f"{row.pipeline_predict_ms:.3f}" if row.pipeline_predict_ms is not None else "",
                    f"{row.pipeline_decode_ms:.3f}" if row.pipeline_decode_ms is not None else "",
                    fmt_e0(row.pipeline_e0),
                ]
            )
        )
    return "\n".join(lines) + "\n"
