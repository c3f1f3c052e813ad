"""Finite-difference verification of the analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ArchConfig, FcnModel, backward, forward, init_model, loss


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    checked: int
    tolerance: float
    worst: list[tuple[str, int, float, float, float]] = field(default_factory=list)

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [
            f"gradient check {status}: {self.checked} parameters, "
            f"max relative error {self.max_rel_error:.3e} (tolerance {self.tolerance:.0e})"
        ]
        for name, idx, ana, fd, rel in self.worst:
            lines.append(f"  {name}[{idx}]: analytic={ana:.6e} fd={fd:.6e} rel={rel:.3e}")
        return "\n".join(lines)


def gradient_check(
    cfg: ArchConfig | None = None,
    tolerance: float = 1e-3,
    seed: int = 0,
    min_samples: int = 200,
    step: float = 1e-5,
    model: FcnModel | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central differences on a tiny model.

    Runs in float64 with dropout disabled. Samples parameters from every
    array so each layer is covered; relative error uses
    |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8).
    """
    if model is None:
        if cfg is None:
            cfg = ArchConfig.desk(input_size=32)
        model = init_model(cfg, seed=seed, dtype=np.float64)
    else:
        cfg = model.config
    rng = np.random.default_rng(seed + 1)
    s = cfg.input_size
    image = rng.random((s, s, 3))
    ch1 = rng.random((s, s)) < 0.2
    label = np.stack([~ch1, ch1], axis=2).astype(np.float64)

    _, grads = backward(model, image, label, training=False)

    names = sorted(model.params.keys())
    sizes = {name: model.params[name].size for name in names}
    per_array = max(1, -(-min_samples // len(names)))  # ceil
    alloc = {name: min(per_array, sizes[name]) for name in names}
    # small bias vectors cannot fill their quota; top up from larger arrays
    while sum(alloc.values()) < min_samples:
        spare = [n for n in names if alloc[n] < sizes[n]]
        if not spare:
            break
        for n in spare:
            if sum(alloc.values()) >= min_samples:
                break
            alloc[n] += 1
    worst: list[tuple[str, int, float, float, float]] = []
    max_rel = 0.0
    checked = 0
    for name in names:
        flat = model.params[name].reshape(-1)
        count = alloc[name]
        idxs = rng.choice(flat.size, size=count, replace=False)
        for idx in idxs:
            orig = flat[idx]
            flat[idx] = orig + step
            j_plus = loss(forward(model, image), label)
            flat[idx] = orig - step
            j_minus = loss(forward(model, image), label)
            flat[idx] = orig
            fd = (j_plus - j_minus) / (2.0 * step)
            ana = float(grads[name].reshape(-1)[idx])
            rel = abs(ana - fd) / max(abs(ana), abs(fd), 1e-8)
            checked += 1
            if rel > max_rel:
                max_rel = rel
            worst.append((name, int(idx), ana, fd, rel))
    worst.sort(key=lambda t: -t[4])
    return GradCheckReport(
        passed=max_rel < tolerance,
        max_rel_error=max_rel,
        checked=checked,
        tolerance=tolerance,
        worst=worst[:5],
    )
