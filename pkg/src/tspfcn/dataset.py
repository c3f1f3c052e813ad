"""Dataset directory layout and sample loading.

A dataset directory holds manifest.json (count, n, seed, render config),
instances.jsonl with the optimal tours, and per-instance PNGs under images/
and labels/.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, MalformedFileError
from .instance import Tour, TspInstance, load_jsonl, save_jsonl
from .raster import (
    LabelMask,
    RasterImage,
    RenderConfig,
    load_label_png,
    load_png,
    render_input,
    render_label,
    render_scatter,
    save_label_png,
    save_png,
)


@dataclass
class DatasetRecord:
    instance: TspInstance
    tour: Tour
    image: RasterImage
    label: LabelMask


@dataclass
class Dataset:
    root: Path
    render_config: RenderConfig
    n: int
    seed: int
    records: list[DatasetRecord]

    def __len__(self) -> int:
        return len(self.records)


def image_to_float(image: RasterImage) -> np.ndarray:
    """Scale RGB bytes to [0, 1] floats for the network input."""
    return image.pixels.astype(np.float32) / 255.0


def label_to_onehot(label: LabelMask) -> np.ndarray:
    return label.classes.astype(np.float32)


def training_samples(dataset: Dataset) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(image_to_float(r.image), label_to_onehot(r.label)) for r in dataset.records]


def render_dataset_image(instance: TspInstance, cfg: RenderConfig) -> RasterImage:
    if cfg.mode == "scatter":
        return render_scatter(instance, cfg)
    return render_input(instance, cfg)


def write_dataset(
    out_dir: str | Path,
    records: list[tuple[TspInstance, Tour]],
    cfg: RenderConfig,
    n: int,
    seed: int,
) -> Path:
    root = Path(out_dir)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    save_jsonl(root / "instances.jsonl", records)
    for inst, tour in records:
        save_png(render_dataset_image(inst, cfg), root / "images" / f"{inst.id}.png")
        save_label_png(render_label(inst, tour, cfg), root / "labels" / f"{inst.id}.png")
    manifest = {
        "count": len(records),
        "n": n,
        "seed": seed,
        "render_config": asdict(cfg),
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return root


def load_dataset(root: str | Path) -> Dataset:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"{root} has no manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text())
        cfg_obj = dict(manifest["render_config"])
        cfg_obj["city_color"] = tuple(cfg_obj["city_color"])
        cfg_obj["path_color"] = tuple(cfg_obj["path_color"])
        cfg_obj["background_color"] = tuple(cfg_obj["background_color"])
        cfg = RenderConfig(**cfg_obj)
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedFileError(f"bad manifest in {root}: {exc}") from exc
    records = []
    for inst, tour in load_jsonl(root / "instances.jsonl"):
        if tour is None:
            raise DataError(f"instance {inst.id} in {root} has no tour")
        image = load_png(root / "images" / f"{inst.id}.png")
        if (image.w, image.h) != (cfg.w, cfg.h):
            raise DataError(f"image {inst.id} is {image.w}x{image.h}, manifest says {cfg.w}x{cfg.h}")
        label = load_label_png(root / "labels" / f"{inst.id}.png", expected_size=(cfg.w, cfg.h))
        records.append(DatasetRecord(instance=inst, tour=tour, image=image, label=label))
    return Dataset(
        root=root,
        render_config=cfg,
        n=int(manifest["n"]),
        seed=int(manifest["seed"]),
        records=records,
    )
