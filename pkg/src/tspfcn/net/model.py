"""The scaled VGG-style fully convolutional network.

Five conv blocks with 2x2 pooling, two dropout-regularized head convolutions
after the last pool, three 1x1 score heads (on pool3, pool4 and the head
output) upsampled x8/x16/x32 by learned transposed convolutions back to the
input size, concatenated and fused by a 1x1 convolution to two channels,
mapped to a per-pixel class distribution by a softmax over the two channels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, NumericError, ShapeError
from . import layers

LOG_CLAMP = 1e-12
UPSAMPLE_FACTORS = (8, 16, 32)


@dataclass(frozen=True)
class ArchConfig:
    input_size: int = 224
    channels: tuple[int, ...] = (64, 128, 256, 512, 1024)
    convs_per_block: tuple[int, ...] = (2, 2, 3, 3, 3)
    score_channels: int = 1
    dropout_rate: float = 0.5

    def __post_init__(self) -> None:
        if self.input_size % 32 != 0 or self.input_size < 32:
            raise ConfigError(f"input_size must be a positive multiple of 32, got {self.input_size}")
        if len(self.channels) != 5 or len(self.convs_per_block) != 5:
            raise ConfigError("channel schedule and convs_per_block must have 5 entries")
        if any(c < 1 for c in self.channels) or any(c < 1 for c in self.convs_per_block):
            raise ConfigError("channels and convs_per_block must be positive")
        if self.score_channels < 1:
            raise ConfigError("score_channels must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @classmethod
    def desk(cls, input_size: int = 64, **overrides) -> "ArchConfig":
        """CPU-scale preset. Uses wider score heads than the full preset's
        single channel: one shared upsampling stamp per branch cannot express
        one-pixel path lines, which caps how well small models memorize."""
        base = cls(input_size=input_size, channels=(8, 16, 32, 64, 128), score_channels=16)
        return replace(base, **overrides) if overrides else base

    def to_json(self) -> dict:
        return {
            "input_size": self.input_size,
            "channels": list(self.channels),
            "convs_per_block": list(self.convs_per_block),
            "score_channels": self.score_channels,
            "dropout_rate": self.dropout_rate,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ArchConfig":
        return cls(
            input_size=int(obj["input_size"]),
            channels=tuple(int(c) for c in obj["channels"]),
            convs_per_block=tuple(int(c) for c in obj["convs_per_block"]),
            score_channels=int(obj["score_channels"]),
            dropout_rate=float(obj["dropout_rate"]),
        )


def param_specs(cfg: ArchConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Declared layer order: every (name, shape) pair, weights then bias per layer.

    This order is the checkpoint blob order.
    """
    specs: list[tuple[str, tuple[int, ...]]] = []
    c_in = 3
    for b, (c_out, reps) in enumerate(zip(cfg.channels, cfg.convs_per_block), start=1):
        for r in range(1, reps + 1):
            specs.append((f"block{b}_conv{r}_w", (c_out, c_in, 3, 3)))
            specs.append((f"block{b}_conv{r}_b", (c_out,)))
            c_in = c_out
    deep = cfg.channels[4]
    specs.append(("head1_w", (deep, deep, 3, 3)))
    specs.append(("head1_b", (deep,)))
    specs.append(("head2_w", (deep, deep, 1, 1)))
    specs.append(("head2_b", (deep,)))
    sc = cfg.score_channels
    for name, src in (("score3", cfg.channels[2]), ("score4", cfg.channels[3]), ("score5", deep)):
        specs.append((f"{name}_w", (sc, src, 1, 1)))
        specs.append((f"{name}_b", (sc,)))
    for k in UPSAMPLE_FACTORS:
        specs.append((f"up{k}_w", (sc, sc, 2 * k, 2 * k)))
        specs.append((f"up{k}_b", (sc,)))
    specs.append(("fuse_w", (2, 3 * sc, 1, 1)))
    specs.append(("fuse_b", (2,)))
    return specs


@dataclass
class FcnModel:
    config: ArchConfig
    params: dict[str, np.ndarray]
    seed: int | None = None

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.params.values())).dtype

    def copy(self) -> "FcnModel":
        return FcnModel(
            config=self.config,
            params={k: v.copy() for k, v in self.params.items()},
            seed=self.seed,
        )

    def parameter_count(self) -> int:
        return sum(int(v.size) for v in self.params.values())


def _xavier_bound(shape: tuple[int, ...]) -> float:
    # conv (C_out, C_in, k, k) and deconv (C_in, C_out, k, k) share fan arithmetic
    receptive = shape[2] * shape[3]
    fan_in = shape[1] * receptive
    fan_out = shape[0] * receptive
    return math.sqrt(6.0 / (fan_in + fan_out))


def _bilinear_kernel(shape: tuple[int, ...], stride: int, dtype) -> np.ndarray:
    """Upsampling kernel that starts as exact bilinear interpolation.

    Channel-diagonal: channel c upsamples channel c; the kernel is learned
    afterwards like any other parameter.
    """
    c_in, c_out, k, _ = shape
    factor = (k + 1) // 2
    center = factor - 1.0 if k % 2 == 1 else factor - 0.5
    coords = np.arange(k, dtype=np.float64)
    ramp = 1.0 - np.abs(coords - center) / factor
    kernel2d = np.outer(ramp, ramp)
    w = np.zeros(shape, dtype=dtype)
    for c in range(min(c_in, c_out)):
        w[c, c] = kernel2d
    return w


def init_model(cfg: ArchConfig, seed: int = 0, dtype=np.float32) -> FcnModel:
    """Xavier-uniform conv weights, bilinear-initialized (learned) upsamplers,
    every bias exactly 0.1; deterministic per seed."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_specs(cfg):
        if name.endswith("_b"):
            params[name] = np.full(shape, 0.1, dtype=dtype)
        elif name.startswith("up"):
            stride = int(name[2:].split("_")[0])
            params[name] = _bilinear_kernel(shape, stride, dtype)
        else:
            a = _xavier_bound(shape)
            params[name] = rng.uniform(-a, a, shape).astype(dtype)
    return FcnModel(config=cfg, params=params, seed=seed)


def _guard(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")
    return arr


def _forward_chw(
    model: FcnModel,
    x: np.ndarray,
    training: bool,
    rng: np.random.Generator | None,
    dropout_rate: float | None,
):
    cfg = model.config
    p = model.params
    rate = cfg.dropout_rate if dropout_rate is None else dropout_rate
    use_dropout = training and rate > 0.0
    if use_dropout and rng is None:
        rng = np.random.default_rng(model.seed)

    caches: dict = {"blocks": [], "pools": [], "relus": []}
    a = x
    pool_outputs = []
    for b in range(1, 6):
        block_caches = []
        for r in range(1, cfg.convs_per_block[b - 1] + 1):
            a, conv_cache = layers.conv2d_forward(a, p[f"block{b}_conv{r}_w"], p[f"block{b}_conv{r}_b"], pad=1)
            a, relu_mask = layers.relu_forward(a)
            block_caches.append((conv_cache, relu_mask))
        a, pool_cache = layers.maxpool2_forward(a)
        caches["blocks"].append(block_caches)
        caches["pools"].append(pool_cache)
        pool_outputs.append(a)
    p3, p4, p5 = pool_outputs[2], pool_outputs[3], pool_outputs[4]

    h, c6_cache = layers.conv2d_forward(p5, p["head1_w"], p["head1_b"], pad=1)
    h, r6_mask = layers.relu_forward(h)
    d6_mask = None
    if use_dropout:
        h, d6_mask = layers.dropout_forward(h, rate, rng)
    h, c7_cache = layers.conv2d_forward(h, p["head2_w"], p["head2_b"], pad=0)
    h, r7_mask = layers.relu_forward(h)
    d7_mask = None
    if use_dropout:
        h, d7_mask = layers.dropout_forward(h, rate, rng)
    caches["head"] = (c6_cache, r6_mask, d6_mask, c7_cache, r7_mask, d7_mask)

    s3, s3_cache = layers.conv2d_forward(p3, p["score3_w"], p["score3_b"], pad=0)
    s4, s4_cache = layers.conv2d_forward(p4, p["score4_w"], p["score4_b"], pad=0)
    s5, s5_cache = layers.conv2d_forward(h, p["score5_w"], p["score5_b"], pad=0)
    caches["scores"] = (s3_cache, s4_cache, s5_cache)

    ups = []
    up_caches = []
    for k, s in zip(UPSAMPLE_FACTORS, (s3, s4, s5)):
        u, u_cache = layers.deconv2d_forward(s, p[f"up{k}_w"], p[f"up{k}_b"], stride=k, pad=k // 2)
        ups.append(u)
        up_caches.append(u_cache)
    caches["ups"] = up_caches

    cat = np.concatenate(ups, axis=0)
    z, fuse_cache = layers.conv2d_forward(cat, p["fuse_w"], p["fuse_b"], pad=0)
    caches["fuse"] = fuse_cache
    y = layers.channel_softmax(z)
    caches["y"] = y
    return y, caches


def forward(
    model: FcnModel,
    image: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    dropout_rate: float | None = None,
) -> np.ndarray:
    """Per-pixel two-channel class probabilities, same spatial size as the input.

    image is (S, S, 3) with values scaled to [0, 1]. Dropout is active only
    when training is true.
    """
    s = model.config.input_size
    image = np.asarray(image)
    if image.shape != (s, s, 3):
        raise ShapeError(f"expected ({s}, {s}, 3) image, got {image.shape}")
    _guard("input image", image)
    x = np.ascontiguousarray(image.transpose(2, 0, 1), dtype=model.dtype)
    y, _ = _forward_chw(model, x, training, rng, dropout_rate)
    _guard("network output", y)
    return np.ascontiguousarray(y.transpose(1, 2, 0))


def predict(model: FcnModel, image: np.ndarray) -> np.ndarray:
    """Inference pass: dropout off, pure function of (model, image)."""
    return forward(model, image, training=False)


def loss(y: np.ndarray, label: np.ndarray) -> float:
    """Mean one-hot cross entropy: -sum(label * log(y)) / (2 * w * h).

    y is clamped to [1e-12, 1 - 1e-12] before the log. Accumulation happens
    in float64 regardless of input dtype.
    """
    y = np.asarray(y)
    label = np.asarray(label)
    if y.shape != label.shape or y.ndim != 3 or y.shape[2] != 2:
        raise ShapeError(f"prediction {y.shape} and label {label.shape} must both be (h, w, 2)")
    yc = np.clip(y.astype(np.float64), LOG_CLAMP, 1.0 - LOG_CLAMP)
    h, w = y.shape[0], y.shape[1]
    val = -float((label.astype(np.float64) * np.log(yc)).sum()) / (2.0 * w * h)
    if not math.isfinite(val):
        raise NumericError("loss is not finite")
    return val


def _loss_grad_chw(y_chw: np.ndarray, label_chw: np.ndarray) -> np.ndarray:
    """dJ/dy in (2, h, w); zero where the clamp is active."""
    _, h, w = y_chw.shape
    yc = np.clip(y_chw, LOG_CLAMP, 1.0 - LOG_CLAMP)
    inside = (y_chw > LOG_CLAMP) & (y_chw < 1.0 - LOG_CLAMP)
    grad = -(label_chw / yc) / (2.0 * w * h)
    return np.where(inside, grad, 0.0).astype(y_chw.dtype)


def backward(
    model: FcnModel,
    image: np.ndarray,
    label: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    dropout_rate: float | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradients for every parameter (same shapes as params)."""
    s = model.config.input_size
    image = np.asarray(image)
    label = np.asarray(label)
    if image.shape != (s, s, 3):
        raise ShapeError(f"expected ({s}, {s}, 3) image, got {image.shape}")
    if label.shape != (s, s, 2):
        raise ShapeError(f"expected ({s}, {s}, 2) label, got {label.shape}")
    x = np.ascontiguousarray(image.transpose(2, 0, 1), dtype=model.dtype)
    label_chw = np.ascontiguousarray(label.transpose(2, 0, 1), dtype=model.dtype)

    y, caches = _forward_chw(model, x, training, rng, dropout_rate)
    loss_value = loss(y.transpose(1, 2, 0), label)

    grads: dict[str, np.ndarray] = {}
    dy = _loss_grad_chw(y, label_chw)
    dz = layers.channel_softmax_backward(dy, y)

    dcat, grads["fuse_w"], grads["fuse_b"] = layers.conv2d_backward(dz, caches["fuse"])
    sc = model.config.score_channels
    dups = [dcat[i * sc : (i + 1) * sc] for i in range(3)]

    dscores = []
    for k, du, u_cache in zip(UPSAMPLE_FACTORS, dups, caches["ups"]):
        ds, grads[f"up{k}_w"], grads[f"up{k}_b"] = layers.deconv2d_backward(du, u_cache)
        dscores.append(ds)
    ds3, ds4, ds5 = dscores

    s3_cache, s4_cache, s5_cache = caches["scores"]
    dp3_skip, grads["score3_w"], grads["score3_b"] = layers.conv2d_backward(ds3, s3_cache)
    dp4_skip, grads["score4_w"], grads["score4_b"] = layers.conv2d_backward(ds4, s4_cache)
    dh, grads["score5_w"], grads["score5_b"] = layers.conv2d_backward(ds5, s5_cache)

    c6_cache, r6_mask, d6_mask, c7_cache, r7_mask, d7_mask = caches["head"]
    if d7_mask is not None:
        dh = layers.dropout_backward(dh, d7_mask)
    dh = layers.relu_backward(dh, r7_mask)
    dh, grads["head2_w"], grads["head2_b"] = layers.conv2d_backward(dh, c7_cache)
    if d6_mask is not None:
        dh = layers.dropout_backward(dh, d6_mask)
    dh = layers.relu_backward(dh, r6_mask)
    dp5, grads["head1_w"], grads["head1_b"] = layers.conv2d_backward(dh, c6_cache)

    # gradient entering each block's pool output; pool3/pool4 also collect the
    # score-head contributions on the way down
    da = dp5
    for b in range(5, 0, -1):
        if b == 4:
            da = da + dp4_skip
        elif b == 3:
            da = da + dp3_skip
        da = layers.maxpool2_backward(da, caches["pools"][b - 1])
        for r in range(model.config.convs_per_block[b - 1], 0, -1):
            conv_cache, relu_mask = caches["blocks"][b - 1][r - 1]
            da = layers.relu_backward(da, relu_mask)
            da, grads[f"block{b}_conv{r}_w"], grads[f"block{b}_conv{r}_b"] = layers.conv2d_backward(
                da, conv_cache
            )
    for name, g in grads.items():
        _guard(f"gradient {name}", g)
    return loss_value, grads
