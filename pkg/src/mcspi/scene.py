"""Moving-object scene model: reflectance image, trajectories, frame rendering.

Displacements use the same convention as the moment ramps: ``rx`` grows
rightward along columns, ``ry`` grows toward the top row. The object is
anchored with its intensity centroid at the field center when the
displacement is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple

import numpy as np

TRAJECTORY_MODELS = ("static", "preset-path", "random-walk", "pendulum")


class Displacement(NamedTuple):
    rx: float
    ry: float


def round_half_away(v: float) -> int:
    """Round to nearest integer, halves away from zero (not banker's)."""
    return int(math.floor(v + 0.5)) if v >= 0 else int(math.ceil(v - 0.5))


@dataclass(eq=False)
class ObjectImage:
    """Object reflectance on its own grid, values in [0, 1].

    An all-zero object is rejected: its centroid is undefined and the
    tracker would have nothing to lock onto.
    """

    reflectance: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.reflectance, dtype=np.float64)
        if r.ndim != 2:
            raise ValueError("object reflectance must be a 2-D grid")
        if not np.all(np.isfinite(r)) or r.min() < 0.0 or r.max() > 1.0:
            raise ValueError("object reflectance values must lie in [0, 1]")
        if not np.any(r > 0):
            raise ValueError("object must have at least one positive pixel")
        self.reflectance = r

    @property
    def shape(self) -> tuple[int, int]:
        return self.reflectance.shape

    def centroid(self) -> tuple[float, float]:
        """Intensity centroid in object-local pixel units (x 1..w, y 1..h bottom-up)."""
        r = self.reflectance
        h, w = r.shape
        mass = r.sum()
        xs = np.arange(1, w + 1, dtype=np.float64)
        ys = np.arange(h, 0, -1, dtype=np.float64).reshape(-1, 1)
        return float((r * xs).sum() / mass), float((r * ys).sum() / mass)

    def support_bbox(self) -> tuple[int, int, int, int]:
        """(row_min, row_max, col_min, col_max) of the nonzero support."""
        rows = np.flatnonzero(self.reflectance.any(axis=1))
        cols = np.flatnonzero(self.reflectance.any(axis=0))
        return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


@dataclass(frozen=True)
class Trajectory:
    """Deterministic displacement generator.

    ``model`` is one of ``static``, ``preset-path``, ``random-walk``,
    ``pendulum``; ``params`` holds the model's parameters. The same
    (model, params, seed) always reproduces the same displacement
    sequence; random-walk steps are drawn from per-step seeded streams.

    preset-path params: ``waypoints`` (sequence of (x, y)), ``step``
    (pixels per set, default 1.0), ``loop`` (wrap around a closed path).
    random-walk params: ``max_step`` (default 60.0) and optional
    ``bounds`` (rx_min, rx_max, ry_min, ry_max) the cumulative
    displacement is clamped to. pendulum params: ``amplitude_x``,
    ``amplitude_y``, ``phi0``, ``period``.
    """

    model: str
    seed: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in TRAJECTORY_MODELS:
            raise ValueError(
                f"unknown trajectory model {self.model!r}; expected one of "
                f"{TRAJECTORY_MODELS}"
            )
        if self.model == "preset-path":
            wp = self.params.get("waypoints")
            if not wp or len(wp) < 2:
                raise ValueError("preset-path needs at least two waypoints")


def _polyline_point(waypoints: np.ndarray, s: float, loop: bool) -> tuple[float, float]:
    seg = np.diff(waypoints, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seg_len.sum())
    if total <= 0:
        return float(waypoints[0, 0]), float(waypoints[0, 1])
    if loop:
        s = s % total
    elif s >= total:
        return float(waypoints[-1, 0]), float(waypoints[-1, 1])
    for (x0, y0), (dx, dy), ln in zip(waypoints[:-1], seg, seg_len):
        if ln > 0 and s <= ln:
            t = s / ln
            return float(x0 + t * dx), float(y0 + t * dy)
        s -= ln
    return float(waypoints[-1, 0]), float(waypoints[-1, 1])


def _random_walk_steps(traj: Trajectory, count: int) -> np.ndarray:
    max_step = float(traj.params.get("max_step", 60.0))
    steps = np.empty((count, 2), dtype=np.float64)
    for i in range(count):
        rng = np.random.default_rng([traj.seed, i])
        length = rng.uniform(0.0, max_step)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        steps[i] = (length * math.cos(angle), length * math.sin(angle))
    return steps


def displacement_sequence(traj: Trajectory, count: int) -> np.ndarray:
    """Displacements for sets 0..count-1 as a (count, 2) array of (rx, ry).

    Entry k is the cumulative displacement after k motion steps, i.e. the
    position the object holds while set k is projected (set 0 sees the
    initial position for static, path, and walk models).
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    out = np.zeros((count, 2), dtype=np.float64)
    if count == 0 or traj.model == "static":
        return out
    if traj.model == "preset-path":
        wp = np.asarray(traj.params["waypoints"], dtype=np.float64)
        step = float(traj.params.get("step", 1.0))
        loop = bool(traj.params.get("loop", False))
        for k in range(count):
            out[k] = _polyline_point(wp, k * step, loop)
        return out
    if traj.model == "random-walk":
        steps = _random_walk_steps(traj, count)
        bounds = traj.params.get("bounds")
        pos = np.zeros(2)
        for k in range(1, count):
            pos = pos + steps[k]
            if bounds is not None:
                rx_min, rx_max, ry_min, ry_max = bounds
                pos[0] = min(max(pos[0], rx_min), rx_max)
                pos[1] = min(max(pos[1], ry_min), ry_max)
            out[k] = pos
        return out
    # pendulum: release from the swing extreme, arc through the bottom
    amp_x = float(traj.params.get("amplitude_x", 20.0))
    amp_y = float(traj.params.get("amplitude_y", 6.0))
    phi0 = float(traj.params.get("phi0", 0.5))
    period = float(traj.params.get("period", 200.0))
    k = np.arange(count, dtype=np.float64)
    phi = phi0 * np.cos(2.0 * math.pi * k / period)
    out[:, 0] = amp_x * np.sin(phi)
    out[:, 1] = amp_y * (1.0 - np.cos(phi))
    return out


def displacement_at(traj: Trajectory, set_index: int) -> Displacement:
    """Cumulative displacement after ``set_index`` sets."""
    if set_index < 0:
        raise ValueError("set_index must be non-negative")
    seq = displacement_sequence(traj, set_index + 1)
    return Displacement(float(seq[-1, 0]), float(seq[-1, 1]))


@dataclass(eq=False)
class SceneState:
    """Object placed in a cols x rows field at its current displacement."""

    cols: int
    rows: int
    obj: ObjectImage
    trajectory: Trajectory
    displacement: Displacement = Displacement(0.0, 0.0)
    slot: int = 0

    def __post_init__(self):
        h, w = self.obj.shape
        if h > self.rows or w > self.cols:
            raise ValueError(
                f"object {w}x{h} does not fit the {self.cols}x{self.rows} field"
            )
        # integer anchor placing the object centroid on the field center
        cx, cy = self.obj.centroid()
        self._col0 = round_half_away((self.cols + 1) / 2 - cx)
        self._row0 = round_half_away((self.rows - 1) / 2 + cy - h)

    @property
    def anchor(self) -> tuple[int, int]:
        """(row, col) of the object's top-left corner at zero displacement."""
        return self._row0, self._col0

    def at(self, displacement: Displacement, slot: int | None = None) -> "SceneState":
        self.displacement = displacement
        if slot is not None:
            if slot < self.slot:
                raise ValueError("slot index must be non-decreasing")
            self.slot = slot
        return self


def render_frame(scene: SceneState) -> np.ndarray:
    """The field-of-view image for the scene's current displacement.

    The object is translated by the rounded displacement (ry > 0 moves it
    toward the top row); pixels that leave the field are clipped and the
    background is exactly zero.
    """
    frame = np.zeros((scene.rows, scene.cols), dtype=np.float64)
    dc = round_half_away(scene.displacement.rx)
    dr = -round_half_away(scene.displacement.ry)
    h, w = scene.obj.shape
    r0 = scene._row0 + dr
    c0 = scene._col0 + dc
    rr0, rr1 = max(r0, 0), min(r0 + h, scene.rows)
    cc0, cc1 = max(c0, 0), min(c0 + w, scene.cols)
    if rr0 < rr1 and cc0 < cc1:
        frame[rr0:rr1, cc0:cc1] = scene.obj.reflectance[
            rr0 - r0 : rr1 - r0, cc0 - c0 : cc1 - c0
        ]
    return frame


def motion_bounds(scene: SceneState, margin: float = 0.0) -> tuple[float, float, float, float]:
    """Displacement box (rx_min, rx_max, ry_min, ry_max) keeping the
    object's nonzero support inside the field."""
    rmin, rmax, cmin, cmax = scene.obj.support_bbox()
    row0, col0 = scene.anchor
    top = row0 + rmin
    bottom = scene.rows - 1 - (row0 + rmax)
    left = col0 + cmin
    right = scene.cols - 1 - (col0 + cmax)
    return (
        -(left - margin),
        right - margin,
        -(bottom - margin),
        top - margin,
    )
