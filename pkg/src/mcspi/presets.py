"""Experiment presets and the end-to-end pipeline.

``run_preset`` drives pattern generation, acquisition, tracking, both
reconstruction modes, and metrics, writing every artifact (bucket
stream, track table, images, metrics, provenance) into one directory.
Identical config and seeds produce byte-identical outputs.
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import io as mio
from ._version import __version__
from .acquisition import NoiseModel, run_acquisition
from .config import ExperimentConfig, apply_overrides
from .errors import ConfigError, McspiError
from .metrics import normalized_metrics
from .patterns import PatternBank, build_sequence, cake_cut_order
from .reconstruction import mcspi_run
from .scene import (
    Displacement,
    ObjectImage,
    SceneState,
    Trajectory,
    displacement_sequence,
    motion_bounds,
    render_frame,
)
from .tracking import track_run

OUTPUT_DIR_ENV = "MCSPI_OUTPUT_DIR"
PRESET_NAMES = ("sim-path", "sim-random", "pendulum", "static")

_LEVELS = 256  # builtin objects quantize to these gray levels


@dataclass
class MetricsReport:
    mse: float
    psnr: float
    mean_abs_position_error: float | None
    snapshot_series: list[tuple[int, float, float]]


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round(img * _LEVELS) / _LEVELS, 0.0, 1.0)


def builtin_object(name: str, size: int = 48) -> ObjectImage:
    """Synthetic test objects, quantized to 1/256 gray steps.

    square  solid unit square
    disk    soft-edged disk
    blob    two overlapping smooth bumps
    bars    resolution-board style bar groups at two pitches
    """
    if size < 4:
        raise ConfigError(f"builtin object size must be >= 4, got {size}")
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cx = cy = (size - 1) / 2
    if name == "square":
        img = np.ones((size, size))
    elif name == "disk":
        r = np.hypot(xx - cx, yy - cy)
        img = np.clip((0.42 * size - r) / (0.06 * size), 0.0, 1.0)
    elif name == "blob":
        s1, s2 = 0.22 * size, 0.16 * size
        g1 = np.exp(-(((xx - 0.4 * size) ** 2 + (yy - 0.45 * size) ** 2) / (2 * s1**2)))
        g2 = 0.8 * np.exp(-(((xx - 0.68 * size) ** 2 + (yy - 0.62 * size) ** 2) / (2 * s2**2)))
        img = np.clip(g1 + g2, 0.0, 1.0)
        img[img < 0.05] = 0.0
    elif name == "bars":
        img = np.zeros((size, size))
        w = max(2, size // 14)
        m = max(1, size // 10)
        h = size // 2 - m - w
        for i in range(3):  # coarse vertical triplet, top left
            c = m + i * 2 * w
            img[m : m + h, c : c + w] = 1.0
        for i in range(3):  # coarse horizontal triplet, top right
            r = m + i * 2 * w
            img[r : r + w, size // 2 + m : size - m] = 1.0
        img[size // 2 + m : size - m, m : m + h] = 1.0  # solid block, bottom left
        fw = max(1, w // 2)
        for i in range(4):  # fine vertical group, bottom right
            c = size // 2 + m + i * 2 * fw
            img[size // 2 + m : size - m, c : c + fw] = 1.0
    else:
        raise ConfigError(f"unknown builtin object {name!r}")
    return ObjectImage(_quantize(img))


def load_object(spec: dict) -> ObjectImage:
    if spec["kind"] == "builtin":
        return builtin_object(spec["name"], int(spec.get("size", 48)))
    return ObjectImage(mio.load_gray_image(spec["path"]))


def preset_config(name: str) -> ExperimentConfig:
    """Desk-scale defaults for the four canonical experiments."""
    if name == "sim-path":
        return ExperimentConfig(
            name=name,
            field_size=128,
            object_spec={"kind": "builtin", "name": "blob", "size": 56},
            trajectory={
                "model": "preset-path",
                "seed": 11,
                "params": {
                    "waypoints": [[0, 0], [20, 0], [20, 20], [0, 20], [0, 0]],
                    "step": 1.0,
                    "loop": True,
                },
            },
            num_pairs=600,
        )
    if name == "sim-random":
        return ExperimentConfig(
            name=name,
            field_size=128,
            object_spec={"kind": "builtin", "name": "bars", "size": 64},
            trajectory={
                "model": "random-walk",
                "seed": 23,
                "params": {"max_step": 30.0},
            },
            num_pairs=16384,
            snapshot_taus=[1024, 4096, 16384, 65536],
        )
    if name == "pendulum":
        return ExperimentConfig(
            name=name,
            field_size=128,
            object_spec={"kind": "builtin", "name": "disk", "size": 36},
            trajectory={
                "model": "pendulum",
                "seed": 7,
                "params": {"amplitude_x": 30.0, "amplitude_y": 8.0, "phi0": 0.6, "period": 150.0},
            },
            num_pairs=600,
        )
    if name == "static":
        return ExperimentConfig(
            name=name,
            field_size=64,
            object_spec={"kind": "builtin", "name": "disk", "size": 40},
            trajectory={"model": "static", "seed": 0, "params": {}},
            num_pairs=4096,
        )
    raise ConfigError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")


@lru_cache(maxsize=4)
def cached_cake_cut_order(side: int) -> np.ndarray:
    order = cake_cut_order(side)
    order.setflags(write=False)
    return order


@contextmanager
def _stage(name: str):
    try:
        yield
    except McspiError as e:
        e.args = (f"[{name}] {e}",)
        raise
    except ValueError as e:
        raise ValueError(f"[{name}] {e}") from e


def resolve_output_dir(config: ExperimentConfig, explicit: str | None = None) -> Path:
    """Explicit argument, then $MCSPI_OUTPUT_DIR, then the config, then ./runs/<name>."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env) / config.name
    if config.output_dir:
        return Path(config.output_dir)
    return Path("runs") / config.name


def _prepare_run(config: ExperimentConfig, out: Path):
    """Shared front half of every run: plan, scene, acquisition."""
    side = config.field_size
    with _stage("patterns"):
        if config.ordering == "cake-cut":
            order = cached_cake_cut_order(side)
        else:
            order = np.arange(side * side)
        plan = build_sequence(config.n, config.num_pairs, order, side=side,
                              ordering=config.ordering)
        bank = PatternBank(side)
        mio.write_plan(out / "plan.json", plan)

    with _stage("scene"):
        obj = load_object(config.object_spec)
        traj_spec = dict(config.trajectory)
        params = dict(traj_spec.get("params", {}))
        trajectory = Trajectory(traj_spec["model"], int(traj_spec.get("seed", 0)), params)
        scene = SceneState(side, side, obj, trajectory)
        if trajectory.model == "random-walk" and "bounds" not in params:
            params["bounds"] = list(motion_bounds(scene, margin=1.0))
            trajectory = Trajectory(trajectory.model, trajectory.seed, params)
            scene.trajectory = trajectory
        truth = displacement_sequence(trajectory, plan.num_sets)
        _write_truth_csv(out / "truth.csv", truth)

    with _stage("acquisition"):
        noise = NoiseModel(
            kind=config.noise.get("kind", "none"),
            sigma=float(config.noise.get("sigma", 0.0)),
            seed=int(config.noise.get("seed", 0)),
        )
        records = run_acquisition(scene, plan, noise, bank)
    return plan, bank, scene, truth, records


def run_experiment(config: ExperimentConfig, output_dir: str | Path | None = None) -> dict:
    """Execute one configured run and write all artifacts.

    Returns a report dict mirroring the metrics.json file, with an extra
    ``output_dir`` entry.
    """
    config.validate()
    out = resolve_output_dir(config, str(output_dir) if output_dir else None)
    out.mkdir(parents=True, exist_ok=True)
    (out / "snapshots").mkdir(exist_ok=True)

    plan, bank, scene, truth, records = _prepare_run(config, out)
    mio.write_bucket_csv(out / "buckets.csv", records)

    with _stage("tracking"):
        fixes, track_summary = track_run(
            records, plan, ground_truth=truth, i1_source=config.i1_source
        )
        mio.write_track_csv(out / "track.csv", fixes)
        mio.write_json(out / "track_summary.json",
                       {"mean_abs_error_px": track_summary["mean_abs_error_px"],
                        "fixes": track_summary["fixes"],
                        "gaps": track_summary["gaps"]})

    with _stage("reconstruction"):
        taus = [int(t) for t in config.snapshot_taus]
        recon_c, snaps_c = mcspi_run(records, plan, fixes, "compensated", taus, bank)
        recon_u, snaps_u = mcspi_run(records, plan, None, "uncompensated", taus, bank)
        _export_image(out / "recon_compensated", recon_c)
        _export_image(out / "recon_uncompensated", recon_u)
        for tau, img in snaps_c:
            _export_image(out / "snapshots" / f"compensated_tau{tau:08d}", img)
        for tau, img in snaps_u:
            _export_image(out / "snapshots" / f"uncompensated_tau{tau:08d}", img)

    with _stage("metrics"):
        reference = _reference_image(config, scene, plan, bank, out)
        _export_image(out / "reference", reference)
        m_c = normalized_metrics(recon_c, reference)
        m_u = normalized_metrics(recon_u, reference)
        series = [
            {"tau": tau, **normalized_metrics(img, reference)} for tau, img in snaps_c
        ]
        report = {
            "preset": config.name,
            "reference_mode": config.reference_mode,
            "compensated": m_c,
            "uncompensated": m_u,
            "psnr_gain_db": _psnr_gain(m_c["psnr"], m_u["psnr"]),
            "mean_abs_position_error_px": track_summary["mean_abs_error_px"],
            "track": {"fixes": track_summary["fixes"], "gaps": track_summary["gaps"]},
            "snapshots": series,
        }
        mio.write_json(out / "metrics.json", report)

    mio.write_json(
        out / "provenance.json",
        {"tool": "mcspi", "version": __version__, "config": config.to_dict()},
    )
    report["output_dir"] = str(out)
    return report


def run_preset(
    name: str,
    overrides: dict[str, str] | None = None,
    output_dir: str | Path | None = None,
) -> dict:
    config = preset_config(name)
    if overrides:
        config = apply_overrides(config, overrides)
    return run_experiment(config, output_dir)


def run_simulation(
    config: ExperimentConfig,
    output_dir: str | Path | None = None,
    stream_format: str = "csv",
) -> dict:
    """Acquisition only: write the plan, bucket stream, and ground truth."""
    config.validate()
    if stream_format not in ("csv", "bin"):
        raise ConfigError(f"stream format must be csv or bin, got {stream_format!r}")
    out = resolve_output_dir(config, str(output_dir) if output_dir else None)
    out.mkdir(parents=True, exist_ok=True)

    plan, bank, scene, truth, records = _prepare_run(config, out)
    stream = out / ("buckets.csv" if stream_format == "csv" else "buckets.spibkt")
    mio.write_bucket_stream(stream, records)

    mio.write_json(
        out / "provenance.json",
        {"tool": "mcspi", "version": __version__, "config": config.to_dict()},
    )
    return {"output_dir": str(out), "stream": str(stream), "plan": str(out / "plan.json"),
            "records": len(records)}


def _psnr_gain(psnr_c: float, psnr_u: float) -> float:
    if math.isinf(psnr_c) and math.isinf(psnr_u):
        return 0.0
    return psnr_c - psnr_u


def _reference_image(config, scene, plan, bank, out) -> np.ndarray:
    if config.reference_mode == "ground-truth":
        scene.displacement = Displacement(0.0, 0.0)
        return render_frame(scene)
    # static-recon: image the same object at rest with the same plan
    static_scene = SceneState(
        scene.cols, scene.rows, scene.obj, Trajectory("static", 0, {})
    )
    records = run_acquisition(static_scene, plan, NoiseModel(), bank)
    image, _ = mcspi_run(records, plan, None, "uncompensated", (), bank)
    return image


def _export_image(stem: Path, image: np.ndarray) -> None:
    mio.write_image_raw(stem.with_suffix(".img"), image)
    mio.write_pgm16(stem.with_suffix(".pgm"), image)


def _write_truth_csv(path, truth: np.ndarray) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["set", "rx", "ry"])
        for k, (rx, ry) in enumerate(truth):
            w.writerow([k, repr(float(rx)), repr(float(ry))])
