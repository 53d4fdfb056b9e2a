"""Simulated bucket-detector acquisition.

Projects each slot of a :class:`~mcspi.patterns.SequencePlan` onto the
current frame and records one scalar intensity per pattern. The object is
quasi-static within a set: all ``n + 2`` patterns of a set see the frame
rendered for that set's displacement, and motion happens between sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .patterns import PatternBank, PatternKind, SequencePlan
from .scene import Displacement, SceneState, displacement_sequence, render_frame


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise on the detected scalar ("none" disables)."""

    kind: str = "none"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("noise sigma must be >= 0")


@dataclass(frozen=True)
class BucketRecord:
    """One detected intensity bound to the pattern slot that produced it."""

    slot: int
    set_index: int
    kind: PatternKind
    basis_ordinal: int | None
    value: float


def measure(frame: np.ndarray, pattern) -> float:
    """Elementwise-product sum of frame and pattern; no normalization."""
    values = np.asarray(getattr(pattern, "values", pattern))
    frame = np.asarray(frame)
    if frame.shape != values.shape:
        raise ValueError(
            f"frame {frame.shape} and pattern {values.shape} dimensions differ"
        )
    return float(np.sum(frame * values))


def run_acquisition(
    scene: SceneState,
    plan: SequencePlan,
    noise: NoiseModel | None = None,
    bank: PatternBank | None = None,
    per_pattern_motion: bool = False,
) -> list[BucketRecord]:
    """Acquire the whole plan against the moving scene.

    Emits exactly ``num_sets * (n + 2)`` records in plan order. With
    ``per_pattern_motion`` (a stress-testing mode) the trajectory is
    advanced once per slot instead of once per set.
    """
    if plan.side != scene.cols or plan.side != scene.rows:
        raise ValueError(
            f"plan side {plan.side} does not match field "
            f"{scene.cols}x{scene.rows}"
        )
    if bank is None:
        bank = PatternBank(plan.side)
    noise = noise or NoiseModel()
    rng = np.random.default_rng(noise.seed) if noise.kind == "gaussian" else None

    set_len = plan.set_length
    n_steps = plan.num_sets * set_len if per_pattern_motion else plan.num_sets
    path = displacement_sequence(scene.trajectory, n_steps)

    records: list[BucketRecord] = []
    slot = scene.slot
    for s in range(plan.num_sets):
        if not per_pattern_motion:
            scene.at(Displacement(*path[s]), slot)
            frame = render_frame(scene)
        for kind, ordinal in plan.set_entries(s):
            if per_pattern_motion:
                scene.at(Displacement(*path[slot]), slot)
                frame = render_frame(scene)
            value = measure(frame, bank.binary(kind, ordinal))
            if rng is not None:
                value += rng.normal(0.0, noise.sigma)
            records.append(BucketRecord(slot, s, kind, ordinal, value))
            slot += 1
        scene.slot = slot
    return records


def split_sets(records: list[BucketRecord]) -> list[list[BucketRecord]]:
    """Group a record stream by set index, preserving slot order."""
    sets: list[list[BucketRecord]] = []
    for rec in records:
        if not sets or sets[-1][0].set_index != rec.set_index:
            sets.append([rec])
        else:
            sets[-1].append(rec)
    return sets
