"""Adam optimization and the chunked training schedule."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError
from .model import FcnModel, backward, forward, loss, predict


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dropout: float = 0.5
    max_iterations: int = 3000  # per dataset chunk
    chunk_size: int = 3000
    snapshot_every: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.max_iterations < 0 or self.chunk_size < 1 or self.snapshot_every < 1:
            raise ConfigError("bad iteration/chunk/snapshot settings")


@dataclass
class AdamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_model(cls, model: FcnModel) -> "AdamState":
        return cls(
            t=0,
            m={k: np.zeros_like(p) for k, p in model.params.items()},
            v={k: np.zeros_like(p) for k, p in model.params.items()},
        )


def adam_step(
    model: FcnModel, grads: dict[str, np.ndarray], state: AdamState, cfg: TrainConfig
) -> tuple[FcnModel, AdamState]:
    """One bias-corrected Adam update over every parameter, in place."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in model.params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
    return model, state


@dataclass
class CurvePoint:
    iteration: int
    train_loss: float
    test_loss: float  # nan when no test set is given


@dataclass
class TrainResult:
    model: FcnModel
    curve: list[CurvePoint]
    iterations: int


Sample = tuple[np.ndarray, np.ndarray]  # (S,S,3) float image in [0,1], (S,S,2) one-hot label


def _mean_loss(model: FcnModel, samples: list[Sample], cap: int = 64) -> float:
    subset = samples[:cap]
    total = 0.0
    for image, label in subset:
        total += loss(forward(model, image), label)
    return total / len(subset)


def write_curve_csv(curve: list[CurvePoint], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "train_loss", "test_loss"])
        for pt in curve:
            writer.writerow([pt.iteration, f"{pt.train_loss:.8f}", f"{pt.test_loss:.8f}"])


def train(
    data: list[Sample],
    model: FcnModel,
    tcfg: TrainConfig,
    test_data: list[Sample] | None = None,
    probe: np.ndarray | None = None,
    snapshot_dir: str | Path | None = None,
) -> TrainResult:
    """Single-sample Adam iterations over a growing dataset.

    Starts on the first chunk_size samples; after every max_iterations
    iterations the next chunk is added, and training stops once the final
    chunk has had its budget (truncated training). Train/test loss is
    recorded every snapshot_every iterations; when a probe image and a
    snapshot directory are given, the colorized prediction for the probe is
    written as iter_{k}.png at the same cadence.
    """
    if not data:
        raise DataError("empty training set")
    s = model.config.input_size
    for image, label in data:
        if image.shape != (s, s, 3) or label.shape != (s, s, 2):
            raise DataError(
                f"sample shapes {image.shape}/{label.shape} do not match input size {s}"
            )
    out = model.copy()
    state = AdamState.for_model(out)
    rng = np.random.default_rng(tcfg.seed)
    curve: list[CurvePoint] = []
    n_chunks = max(1, -(-len(data) // tcfg.chunk_size))  # ceil

    def snapshot(iteration: int) -> None:
        train_loss = _mean_loss(out, data)
        test_loss = _mean_loss(out, test_data) if test_data else float("nan")
        curve.append(CurvePoint(iteration=iteration, train_loss=train_loss, test_loss=test_loss))
        if probe is not None and snapshot_dir is not None:
            from ..raster import probs_to_image, save_png

            path = Path(snapshot_dir)
            path.mkdir(parents=True, exist_ok=True)
            save_png(probs_to_image(predict(out, probe)), path / f"iter_{iteration}.png")

    iteration = 0
    snapshot(0)
    for chunk in range(n_chunks):
        active = data[: (chunk + 1) * tcfg.chunk_size]
        epoch_order: list[int] = []
        for _ in range(tcfg.max_iterations):
            if not epoch_order:
                epoch_order = list(rng.permutation(len(active)))
            image, label = active[epoch_order.pop()]
            _, grads = backward(
                out, image, label, training=True, rng=rng, dropout_rate=tcfg.dropout
            )
            adam_step(out, grads, state, tcfg)
            iteration += 1
            if iteration % tcfg.snapshot_every == 0:
                snapshot(iteration)
    if iteration % tcfg.snapshot_every != 0:
        snapshot(iteration)
    return TrainResult(model=out, curve=curve, iterations=iteration)


def fine_tune(
    model: FcnModel,
    extra_data: list[Sample],
    tcfg: TrainConfig,
    test_data: list[Sample] | None = None,
    probe: np.ndarray | None = None,
    snapshot_dir: str | Path | None = None,
) -> TrainResult:
    """Continue Adam training on the extra samples only (fresh moments)."""
    return train(extra_data, model, tcfg, test_data=test_data, probe=probe, snapshot_dir=snapshot_dir)
