"""Command-line entry point wiring the modules into reproducible pipelines.

Every command writes a run_manifest.json next to its outputs with the full
argument snapshot. Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric guard.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .decode import DecodeConfig, post_process
from .errors import DataError, NumericError, TspFcnError
from .evaluation import (
    PipelineConfig,
    bench_rows_to_csv,
    benchmark_solvers,
    generalization_sweep,
    run_pipeline_eval,
)
from .instance import generate_instance, load_jsonl, normalize
from .raster import (
    RenderConfig,
    image_path_mask,
    load_label_png,
    load_png,
    probs_to_image,
    render_input,
    render_label,
    render_scatter,
    save_label_png,
    save_png,
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

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATA_DIR_ENV = "TSPFCN_DATA_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise UsageError(message)


def _write_run_manifest(out_dir: Path, command: str, args: argparse.Namespace, **extra) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "args": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
    }
    manifest.update(extra)
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _render_config(args: argparse.Namespace, mode: str) -> RenderConfig:
    return RenderConfig(
        w=args.size,
        h=args.size,
        city_halfwidth=args.city_halfwidth,
        path_thickness=args.path_thickness,
        mode=mode,
    )


def _add_render_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--size", type=int, default=224, help="image width and height")
    p.add_argument("--city-halfwidth", type=int, default=6, dest="city_halfwidth")
    p.add_argument("--path-thickness", type=int, default=1, dest="path_thickness")


def _default_data_dir(value: str | None) -> str:
    if value:
        return value
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return env
    raise UsageError(f"no data directory given and {DATA_DIR_ENV} is not set")


def _gen_record(task: tuple[int, int]):
    n, seed = task
    inst = generate_instance(n, seed)
    return inst, solve_dp(inst)


def cmd_gen(args: argparse.Namespace) -> int:
    from .dataset import write_dataset

    out = Path(_default_data_dir(args.out))
    cfg = _render_config(args, "scatter" if args.mode == "scatter" else "full-graph")
    tasks = [(args.n, args.seed + k) for k in range(args.count)]
    if args.jobs > 1:
        import multiprocessing as mp

        with mp.Pool(args.jobs) as pool:
            records = pool.map(_gen_record, tasks)
    else:
        records = [_gen_record(t) for t in tasks]
    write_dataset(out, records, cfg, n=args.n, seed=args.seed)
    _write_run_manifest(out, "gen", args, count=len(records))
    print(f"wrote {len(records)} instances to {out}")
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    records = load_jsonl(args.infile)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mode = args.mode
    cfg = _render_config(args, mode)
    count = 0
    for inst, tour in records:
        if mode == "tour-label":
            if tour is None:
                raise DataError(f"instance {inst.id} has no tour for label rendering")
            save_label_png(render_label(inst, tour, cfg), out / f"{inst.id}.png")
        elif mode == "scatter":
            save_png(render_scatter(inst, cfg), out / f"{inst.id}.png")
        else:
            save_png(render_input(inst, cfg), out / f"{inst.id}.png")
        count += 1
    _write_run_manifest(out, "render", args, count=count)
    print(f"rendered {count} {mode} images to {out}")
    return EXIT_OK


_SOLVERS = {
    "exh": solve_exhaustive,
    "dp": solve_dp,
    "bb": solve_branch_bound,
}


def cmd_solve(args: argparse.Namespace) -> int:
    records = load_jsonl(args.infile)
    ga = GaConfig(
        population=args.ga_pop,
        crossover_rate=args.ga_cross,
        mutation_rate=args.ga_mut,
        generations=args.ga_gens,
        seed=args.seed,
    )
    aco = AcoConfig(
        ant_num=args.aco_ants,
        rho=args.aco_rho,
        alpha=args.aco_alpha,
        beta=args.aco_beta,
        iterations=args.aco_iters,
        seed=args.seed,
    )
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    results = []
    for inst, _ in records:
        t0 = time.perf_counter()
        if args.algo == "ga":
            tour = solve_genetic(inst, ga)
        elif args.algo == "aco":
            tour = solve_ant_colony(inst, aco)
        else:
            tour = _SOLVERS[args.algo](inst)
        elapsed_ms = (time.perf_counter() - t0) * 1e3
        results.append(
            {
                "id": inst.id,
                "algo": args.algo,
                "order": list(tour.order),
                "length": tour.length,
                "time_ms": elapsed_ms,
            }
        )
    with open(out_path, "w", encoding="utf-8") as fh:
        for obj in results:
            fh.write(json.dumps(obj) + "\n")
    _write_run_manifest(out_path.parent, "solve", args, count=len(results))
    print(f"solved {len(results)} instances with {args.algo} -> {out_path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    from .dataset import load_dataset, training_samples
    from .net import ArchConfig, TrainConfig, init_model, save_checkpoint, train
    from .net.train import write_curve_csv

    data_dir = Path(_default_data_dir(args.data))
    dataset = load_dataset(data_dir)
    samples = training_samples(dataset)
    size = dataset.render_config.w
    if args.preset == "desk":
        cfg = ArchConfig.desk(input_size=size, dropout_rate=args.dropout)
    else:
        cfg = ArchConfig(input_size=size, dropout_rate=args.dropout)
    model = init_model(cfg, seed=args.seed)
    tcfg = TrainConfig(
        learning_rate=args.lr,
        dropout=args.dropout,
        max_iterations=args.iterations,
        chunk_size=args.chunk_size,
        snapshot_every=args.snapshot_every,
        seed=args.seed,
    )
    n_test = min(args.test_samples, max(0, len(samples) - 1))
    test = samples[len(samples) - n_test :] if n_test else None
    train_split = samples[: len(samples) - n_test] if n_test else samples
    probe = test[0][0] if test else train_split[0][0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train(
        train_split,
        model,
        tcfg,
        test_data=test,
        probe=probe if args.snapshots else None,
        snapshot_dir=out / "snapshots" if args.snapshots else None,
    )
    save_checkpoint(result.model, out / "model.ckpt")
    write_curve_csv(result.curve, out / "learning_curve.csv")
    _write_run_manifest(out, "train", args, iterations=result.iterations)
    print(
        f"trained {result.iterations} iterations "
        f"(final train loss {result.curve[-1].train_loss:.5f}) -> {out / 'model.ckpt'}"
    )
    return EXIT_OK


def _load_instance_file(path: str):
    records = load_jsonl(path)
    if len(records) != 1:
        raise DataError(f"{path} must hold exactly one instance, found {len(records)}")
    return records


def cmd_predict(args: argparse.Namespace) -> int:
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if args.oracle_passthrough:
        if not args.label:
            raise UsageError("--oracle-passthrough requires --label")
        mask = load_label_png(args.label)
        probs = mask.classes.astype(np.float64)
    else:
        if not args.model or not args.image:
            raise UsageError("predict needs --model and --image (or --oracle-passthrough)")
        from .net import load_checkpoint, predict

        model = load_checkpoint(args.model)
        image = load_png(args.image)
        s = model.config.input_size
        if (image.w, image.h) != (s, s):
            raise DataError(f"image is {image.w}x{image.h}, checkpoint expects {s}x{s}")
        probs = predict(model, image.pixels.astype(np.float32) / 255.0)
    save_png(probs_to_image(probs), out_path)
    _write_run_manifest(out_path.parent, "predict", args)
    print(f"wrote prediction mask {out_path}")
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    [(inst, _)] = _load_instance_file(args.instance)
    image = load_png(args.mask)
    mask = image_path_mask(image)
    pc = normalize(inst, image.w, image.h)
    cfg = DecodeConfig(
        m=args.m,
        departure=args.departure,
        seed=args.seed,
        city_halfwidth=args.city_halfwidth,
    )
    sol = post_process(mask, inst, cfg, pixel_coords=pc)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(sol.to_json(), indent=2) + "\n")
    _write_run_manifest(out_path.parent, "decode", args, length=sol.tour.length)
    print(f"decoded tour length {sol.tour.length:.4f} -> {out_path}")
    return EXIT_OK


def _pipeline_pieces(args: argparse.Namespace):
    """(predictor, PipelineConfig) from --model / --oracle-passthrough flags."""
    render_mode = "scatter" if args.mode == "scatter" else "full-graph"
    rcfg = _render_config(args, render_mode)
    dcfg = DecodeConfig(m=args.m, seed=args.seed, city_halfwidth=args.city_halfwidth)
    if args.oracle_passthrough:
        return None, PipelineConfig(render=rcfg, decode=dcfg, oracle_passthrough=True)
    if not args.model:
        raise UsageError("need --model or --oracle-passthrough")
    from .net import load_checkpoint, predict

    model = load_checkpoint(args.model)
    if model.config.input_size != args.size:
        raise DataError(
            f"checkpoint input size {model.config.input_size} != --size {args.size}"
        )
    return (lambda image: predict(model, image)), PipelineConfig(render=rcfg, decode=dcfg)


def _eval_chunk(task):
    """Worker for --jobs: evaluates a slice of the test set with its own model."""
    chunk, model_path, pcfg, skip_collisions = task
    predictor = None
    if model_path is not None:
        from .net import load_checkpoint, predict

        model = load_checkpoint(model_path)
        predictor = lambda image: predict(model, image)  # noqa: E731
    run = run_pipeline_eval(predictor, chunk, pcfg, skip_collisions=skip_collisions)
    return run.solutions, run.collisions, run.predict_time_s, run.decode_time_s


def cmd_eval(args: argparse.Namespace) -> int:
    predictor, pcfg = _pipeline_pieces(args)
    records = load_jsonl(args.infile)
    test_set = []
    for inst, tour in records:
        if tour is None:
            tour = solve_dp(inst)
        test_set.append((inst, tour))
    if args.jobs > 1 and len(test_set) > 1:
        import multiprocessing as mp

        from .evaluation import compute_metrics

        jobs = min(args.jobs, len(test_set))
        chunks = [test_set[i::jobs] for i in range(jobs)]
        model_path = None if args.oracle_passthrough else args.model
        tasks = [(chunk, model_path, pcfg, args.skip_collisions) for chunk in chunks]
        with mp.Pool(jobs) as pool:
            parts = pool.map(_eval_chunk, tasks)
        solutions = [s for part in parts for s in part[0]]
        collisions = sum(part[1] for part in parts)
        predict_time = sum(part[2] for part in parts)
        decode_time = sum(part[3] for part in parts)
        report_obj = compute_metrics(solutions)
    else:
        run = run_pipeline_eval(predictor, test_set, pcfg, skip_collisions=args.skip_collisions)
        report_obj = run.report
        collisions, predict_time, decode_time = run.collisions, run.predict_time_s, run.decode_time_s
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "metrics": report_obj.as_percent_dict(),
        "collisions": collisions,
        "predict_time_s": predict_time,
        "decode_time_s": decode_time,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_run_manifest(out, "eval", args)
    print(str(report_obj))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    lo, hi = _parse_range(args.n)
    predictor, pcfg = (None, None)
    if args.oracle_passthrough or args.model:
        predictor, pcfg = _pipeline_pieces(args)
    rows = benchmark_solvers(
        list(range(lo, hi + 1)),
        instances_per_n=args.instances,
        seed=args.seed,
        ga=GaConfig(seed=args.seed, generations=args.ga_gens),
        aco=AcoConfig(seed=args.seed, iterations=args.aco_iters),
        repetitions=args.reps,
        warmups=args.warmups,
        heuristic_samples=args.heuristic_samples,
        predictor=predictor,
        pipeline=pcfg,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_text = bench_rows_to_csv(rows)
    (out / "bench.csv").write_text(csv_text)
    _write_run_manifest(out, "bench", args)
    print(csv_text, end="")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    predictor, pcfg = _pipeline_pieces(args)
    lo, hi = _parse_range(args.n)
    runs = generalization_sweep(
        predictor,
        list(range(lo, hi + 1)),
        samples_per_n=args.samples,
        cfg=pcfg,
        base_seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        str(n): {"metrics": run.report.as_percent_dict(), "collisions": run.collisions}
        for n, run in runs.items()
    }
    (out / "sweep.json").write_text(json.dumps(payload, indent=2) + "\n")
    _write_run_manifest(out, "sweep", args)
    for n, run in sorted(runs.items()):
        print(f"n={n}: {run.report}")
    return EXIT_OK


def _parse_range(text: str) -> tuple[int, int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
    else:
        lo = hi = text
    try:
        lo_i, hi_i = int(lo), int(hi)
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}, expected e.g. 4..12") from exc
    if lo_i > hi_i:
        raise UsageError(f"bad range {text!r}: {lo_i} > {hi_i}")
    return lo_i, hi_i


def build_parser() -> _Parser:
    parser = _Parser(prog="tspfcn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tspfcn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate instances, optimal tours, images and labels")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help=f"dataset dir (default ${DATA_DIR_ENV})")
    p.add_argument("--mode", choices=["full-graph", "scatter"], default="full-graph")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers across samples")
    _add_render_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("render", help="render instances from a JSONL file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["full-graph", "scatter", "tour-label"], default="full-graph")
    _add_render_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("solve", help="run a baseline solver over instances")
    p.add_argument("--algo", choices=["exh", "dp", "bb", "ga", "aco"], required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ga-pop", type=int, default=300, dest="ga_pop")
    p.add_argument("--ga-cross", type=float, default=0.85, dest="ga_cross")
    p.add_argument("--ga-mut", type=float, default=0.02, dest="ga_mut")
    p.add_argument("--ga-gens", type=int, default=500, dest="ga_gens")
    p.add_argument("--aco-ants", type=int, default=8, dest="aco_ants")
    p.add_argument("--aco-rho", type=float, default=0.5, dest="aco_rho")
    p.add_argument("--aco-alpha", type=float, default=1.0, dest="aco_alpha")
    p.add_argument("--aco-beta", type=float, default=2.0, dest="aco_beta")
    p.add_argument("--aco-iters", type=int, default=200, dest="aco_iters")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="train the FCN on a generated dataset")
    p.add_argument("--data", default=None, help=f"dataset dir (default ${DATA_DIR_ENV})")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=["desk", "full"], default="desk",
                   help="desk: small CPU-friendly net; full: the 1024-channel original")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--iterations", type=int, default=3000)
    p.add_argument("--chunk-size", type=int, default=3000, dest="chunk_size")
    p.add_argument("--snapshot-every", type=int, default=50, dest="snapshot_every")
    p.add_argument("--test-samples", type=int, default=0, dest="test_samples")
    p.add_argument("--snapshots", action="store_true", help="write probe prediction PNGs")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run the FCN (or oracle passthrough) on one image")
    p.add_argument("--model", default=None)
    p.add_argument("--image", default=None)
    p.add_argument("--label", default=None, help="label PNG for --oracle-passthrough")
    p.add_argument("--oracle-passthrough", action="store_true", dest="oracle_passthrough")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("decode", help="extract a tour from a black/white mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--instance", required=True, help="single-instance JSONL file")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--departure", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--city-halfwidth", type=int, default=6, dest="city_halfwidth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    for name, helptext in (
        ("eval", "render+predict+decode over instances, report metrics"),
        ("bench", "timing benchmark across solvers"),
        ("sweep", "pipeline metrics across city counts"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model", default=None)
        p.add_argument("--oracle-passthrough", action="store_true", dest="oracle_passthrough")
        p.add_argument("--mode", choices=["full-graph", "scatter"], default="full-graph")
        p.add_argument("--m", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)
        _add_render_flags(p)
        if name == "eval":
            p.add_argument("--in", dest="infile", required=True)
            p.add_argument("--skip-collisions", action="store_true", dest="skip_collisions")
            p.add_argument("--jobs", type=int, default=1, help="parallel workers across samples")
            p.set_defaults(func=cmd_eval)
        elif name == "bench":
            p.add_argument("--n", default="4..10")
            p.add_argument("--instances", type=int, default=5)
            p.add_argument("--reps", type=int, default=20)
            p.add_argument("--warmups", type=int, default=3)
            p.add_argument("--heuristic-samples", type=int, default=0, dest="heuristic_samples")
            p.add_argument("--ga-gens", type=int, default=500, dest="ga_gens")
            p.add_argument("--aco-iters", type=int, default=200, dest="aco_iters")
            p.set_defaults(func=cmd_bench)
        else:
            p.add_argument("--n", default="4..12")
            p.add_argument("--samples", type=int, default=100)
            p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TspFcnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
