"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The slowest tests (training
descent, solver benchmark) take a few minutes each; the whole suite is sized
for a single CPU core.
"""
import math
import time

import numpy as np

from tspfcn.decode import DecodeConfig, decode_timing, linear_fit_r2, post_process
from tspfcn.evaluation import (
    PipelineConfig,
    benchmark_solvers,
    compute_metrics,
    generalization_sweep,
)
from tspfcn.instance import generate_instance, normalize
from tspfcn.net import (
    ArchConfig,
    TrainConfig,
    gradient_check,
    init_model,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from tspfcn.net.model import loss
from tspfcn.raster import (
    RenderConfig,
    image_path_mask,
    load_png,
    pixel_collisions,
    probs_to_image,
    render_input,
    render_label,
    save_png,
)
from tspfcn.dataset import image_to_float, label_to_onehot
from tspfcn.solvers import (
    AcoConfig,
    GaConfig,
    solve_ant_colony,
    solve_branch_bound,
    solve_dp,
    solve_exhaustive,
    solve_genetic,
)


def _report(number: int, name: str, passed: bool, details: str, started: float) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {number:02d} {name}: {status} ({details}; {time.time()-started:.1f}s)")


def test_criterion_01_exact_solver_equivalence():
    started = time.time()
    worst = 0.0
    checked = 0
    for n in range(4, 10):
        for k in range(200):
            inst = generate_instance(n, seed=1_000 * n + k)
            a = solve_dp(inst).length
            b = solve_exhaustive(inst).length
            c = solve_branch_bound(inst).length
            rel = (max(a, b, c) - min(a, b, c)) / a
            worst = max(worst, rel)
            checked += 1
    passed = worst <= 1e-9
    _report(1, "exact-solver equivalence", passed,
            f"{checked} instances, worst relative spread {worst:.2e}", started)
    assert passed


def test_criterion_02_clean_label_decoder_exactness():
    started = time.time()
    cfg = RenderConfig(mode="tour-label")
    hits = total = collisions = 0
    for seed in range(200):
        inst = generate_instance(10, seed=seed)
        pc = normalize(inst, cfg.w, cfg.h)
        if pixel_collisions(pc):
            collisions += 1
            continue
        opt = solve_dp(inst)
        mask = render_label(inst, opt, cfg).path_mask()
        sol = post_process(mask, inst, DecodeConfig(m=None), pixel_coords=pc)
        total += 1
        hits += sol.tour.length <= opt.length * (1 + 1e-9)
    collision_rate = collisions / 200
    passed = hits == total and collision_rate < 0.02
    _report(2, "clean-label decoder exactness", passed,
            f"e0 {hits}/{total}, collision rate {100*collision_rate:.2f}%", started)
    assert passed


def test_criterion_03_gradient_verification():
    started = time.time()
    report = gradient_check(ArchConfig.desk(input_size=32), tolerance=1e-3,
                            seed=0, min_samples=200, step=1e-5)
    _report(3, "gradient verification", report.passed,
            f"{report.checked} parameters, max rel err {report.max_rel_error:.2e}", started)
    assert report.passed, str(report)
    assert report.checked >= 200


def test_criterion_04_loss_closed_forms():
    started = time.time()
    rng = np.random.default_rng(0)
    ch1 = rng.random((64, 64)) < 0.2
    label = np.stack([~ch1, ch1], axis=2).astype(np.float64)
    j_half = loss(np.full((64, 64, 2), 0.5), label)
    j_exact = loss(label.copy(), label)
    err_half = abs(j_half - math.log(2) / 2)
    passed = err_half <= 1e-12 and j_exact <= 1e-11
    _report(4, "loss closed forms", passed,
            f"|J(0.5)-ln2/2|={err_half:.1e}, J(label)={j_exact:.1e}", started)
    assert passed


MEMO_SEEDS = range(8)


def _memorization_samples():
    rcfg = RenderConfig.desk()
    lcfg = RenderConfig.desk(mode="tour-label")
    samples, cases = [], []
    for seed in MEMO_SEEDS:
        inst = generate_instance(10, seed=seed)
        opt = solve_dp(inst)
        samples.append((
            image_to_float(render_input(inst, rcfg)),
            label_to_onehot(render_label(inst, opt, lcfg)),
        ))
        cases.append((inst, opt))
    return samples, cases, lcfg


def test_criterion_05_memorization_descent():
    started = time.time()
    samples, cases, lcfg = _memorization_samples()
    model = init_model(ArchConfig.desk(), seed=7)
    tcfg = TrainConfig(learning_rate=1e-4, dropout=0.5, max_iterations=2000,
                       chunk_size=len(samples), snapshot_every=500, seed=11)
    result = train(samples, model, tcfg)
    initial = result.curve[0].train_loss
    final = result.curve[-1].train_loss
    sols = []
    for (inst, opt), (x, _) in zip(cases, samples):
        mask = image_path_mask(probs_to_image(predict(result.model, x)))
        pc = normalize(inst, lcfg.w, lcfg.h)
        sol = post_process(mask, inst,
                           DecodeConfig(m=None, city_halfwidth=lcfg.city_halfwidth),
                           pixel_coords=pc)
        sols.append((sol.tour.length, opt.length, True))
    report = compute_metrics(sols)
    passed = final < 0.1 * initial and report.e5 == 1.0
    _report(5, "memorization descent", passed,
            f"loss {initial:.4f}->{final:.4f} (ratio {final/initial:.4f}), "
            f"decode e5 {100*report.e5:.0f}%", started)
    assert final < 0.1 * initial
    assert report.e5 == 1.0


def _corrupted_masks(count=100):
    cfg = RenderConfig(mode="tour-label")
    items = []
    rng = np.random.default_rng(4242)
    for k in range(count):
        inst = generate_instance(10, seed=10_000 + k)
        opt = solve_dp(inst)
        mask = render_label(inst, opt, cfg).path_mask().copy()
        path_idx = np.argwhere(mask)
        flips = max(1, int(0.01 * len(path_idx)))
        chosen = path_idx[rng.choice(len(path_idx), size=flips, replace=False)]
        mask[chosen[:, 0], chosen[:, 1]] = False
        items.append((mask, inst, opt))
    return items


def test_criterion_06_departure_monotonicity_and_cost():
    started = time.time()
    items = _corrupted_masks()
    sols_m1, sols_m10 = [], []
    counters_ok = True
    for mask, inst, opt in items:
        pc = normalize(inst, 224, 224)
        s1 = post_process(mask, inst, DecodeConfig(m=1, seed=1), pixel_coords=pc)
        s10 = post_process(mask, inst, DecodeConfig(m=10, seed=1), pixel_coords=pc)
        counters_ok &= s1.diagnostics.density_evaluations == 1 * 10 * 9 // 2
        counters_ok &= s10.diagnostics.density_evaluations == 10 * 10 * 9 // 2
        sols_m1.append((s1.tour.length, opt.length, True))
        sols_m10.append((s10.tour.length, opt.length, True))
    e0_m1 = compute_metrics(sols_m1).e0
    e0_m10 = compute_metrics(sols_m10).e0

    timing_items = [(mask, inst) for mask, inst, _ in items]
    rows = decode_timing(timing_items, m_values=list(range(1, 11)))
    timing_counters_ok = all(r.density_evaluations == r.expected_evaluations for r in rows)
    r2 = linear_fit_r2([r.m for r in rows], [r.mean_time_s for r in rows])

    passed = (e0_m10 >= e0_m1) and counters_ok and timing_counters_ok and r2 >= 0.9
    _report(6, "departure monotonicity and cost", passed,
            f"e0(m=10)={100*e0_m10:.1f}% >= e0(m=1)={100*e0_m1:.1f}%, "
            f"counters exact={counters_ok and timing_counters_ok}, R2={r2:.3f}", started)
    assert e0_m10 >= e0_m1
    assert counters_ok and timing_counters_ok
    assert r2 >= 0.9


def test_criterion_07_metric_arithmetic():
    started = time.time()
    base = 123.456
    report = compute_metrics([
        (1.00 * base, base, True),
        (1.005 * base, base, True),
        (1.03 * base, base, True),
    ])
    checks = {
        "e0": (report.e0, 1 / 3),
        "e1": (report.e1, 2 / 3),
        "e2": (report.e2, 2 / 3),
        "e5": (report.e5, 1.0),
    }
    passed = all(abs(got - want) < 1e-9 for got, want in checks.values())
    passed &= abs(report.r_aver - 1.0116666) < 1e-4  # +-0.01%
    _report(7, "metric arithmetic", passed,
            f"e0={100*report.e0:.2f}% e1={100*report.e1:.2f}% e2={100*report.e2:.2f}% "
            f"e5={100*report.e5:.0f}% R_aver={100*report.r_aver:.3f}%", started)
    assert passed


def test_criterion_08_benchmark_trend_and_heuristic_quality():
    started = time.time()
    rows = benchmark_solvers([8, 9, 10, 11], instances_per_n=5, seed=0,
                             repetitions=20, warmups=3)
    exh = [row.times_ms["exhaustive"] for row in rows]
    bb11 = rows[-1].times_ms["bb"]
    monotone = all(b > a for a, b in zip(exh, exh[1:]))
    beats_bb = exh[-1] > bb11

    ga_cfg = GaConfig(seed=0)
    aco_cfg = AcoConfig(seed=0)
    sols_ga, sols_aco = [], []
    for k in range(480):
        inst = generate_instance(10, seed=500_000 + k)
        opt = solve_dp(inst).length
        sols_ga.append((solve_genetic(inst, ga_cfg).length, opt, True))
        sols_aco.append((solve_ant_colony(inst, aco_cfg).length, opt, True))
    ga_e0 = compute_metrics(sols_ga).e0
    aco_e0 = compute_metrics(sols_aco).e0

    passed = monotone and beats_bb and ga_e0 >= 0.95 and aco_e0 >= 0.80
    _report(8, "benchmark trend and heuristics", passed,
            f"exhaustive ms {['%.1f' % t for t in exh]} (bb@11 {bb11:.1f}), "
            f"GA e0 {100*ga_e0:.2f}%, ACO e0 {100*aco_e0:.2f}%", started)
    assert monotone, exh
    assert beats_bb, (exh[-1], bb11)
    assert ga_e0 >= 0.95
    assert aco_e0 >= 0.80


def test_criterion_09_oracle_passthrough_sweep():
    started = time.time()
    cfg = PipelineConfig(render=RenderConfig(), decode=DecodeConfig(m=None),
                         oracle_passthrough=True)
    runs = generalization_sweep(None, list(range(4, 13)), samples_per_n=100,
                                cfg=cfg, skip_collisions=True)
    failures = {n: run.report.e0 for n, run in runs.items() if run.report.e0 < 1.0}
    passed = not failures
    detail = "e0=100% for n=4..12" if passed else f"below 100% at {failures}"
    _report(9, "oracle-passthrough sweep", passed, detail, started)
    assert passed, failures


def test_criterion_10_round_trips(tmp_path):
    started = time.time()
    inst = generate_instance(10, seed=77)
    cfg = RenderConfig()
    img_a = render_input(inst, cfg)
    img_b = render_input(inst, cfg)
    deterministic = img_a.pixels.tobytes() == img_b.pixels.tobytes()

    png_path = tmp_path / "img.png"
    save_png(img_a, png_path)
    png_ok = np.array_equal(load_png(png_path).pixels, img_a.pixels)

    model = init_model(ArchConfig.desk(input_size=32), seed=3)
    ckpt_path = tmp_path / "model.ckpt"
    save_checkpoint(model, ckpt_path)
    loaded = load_checkpoint(ckpt_path)
    ckpt_ok = all(
        np.array_equal(loaded.params[name], model.params[name]) for name in model.params
    )
    probe = np.random.default_rng(5).random((32, 32, 3)).astype(np.float32)
    predict_ok = np.array_equal(predict(model, probe), predict(loaded, probe))

    passed = deterministic and png_ok and ckpt_ok and predict_ok
    _report(10, "round trips", passed,
            f"render deterministic={deterministic}, png={png_ok}, "
            f"checkpoint={ckpt_ok}, predict equal={predict_ok}", started)
    assert passed
