"""Centroid recovery from moment-pattern detections.

Each set yields three intensities: the x-ramp and y-ramp detections plus
a total-intensity value synthesized from the set's last complementary
Hadamard pair (the pair sums to the all-ones pattern, so no dedicated
constant pattern is ever projected). Their ratios give the object
centroid at the per-set rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .acquisition import BucketRecord, split_sets
from .errors import NoObjectError, ProtocolError
from .patterns import PatternKind, SequencePlan
from .scene import Displacement

# guards the centroid division; any real object exceeds this by orders
# of magnitude
EPSILON_SIGNAL_PER_PIXEL = 1e-9


class ReferencePoint(NamedTuple):
    x0: float
    y0: float


def field_center(cols: int, rows: int) -> ReferencePoint:
    return ReferencePoint((cols + 1) / 2, (rows + 1) / 2)


@dataclass(frozen=True)
class TrackFix:
    """One centroid estimate: normalized and pixel coordinates plus the
    displacement relative to the reference point. ``valid`` is False for
    gap fixes (no detectable object in that set)."""

    set_index: int
    xc_norm: float
    yc_norm: float
    x_pix: float
    y_pix: float
    displacement: Displacement
    total_intensity: float
    valid: bool = True
    out_of_field: bool = False


def total_from_pair(b_plus: float, b_minus: float) -> float:
    """Total frame intensity synthesized from a complementary pair.

    pos + neg is the all-ones pattern, so the two detections sum to the
    frame total -- the value a constant modulation pattern would detect.
    """
    return b_plus + b_minus


def centroid_from_intensities(
    ix: float, iy: float, total: float, cols: int, rows: int
) -> tuple[float, float]:
    """Centroid in pixels from the two ramp detections and the frame total.

    With the x ramp normalized by its full scale, ix/total is the
    normalized centroid in (0, 1]; multiplying by the column count maps
    it to pixel units. y is measured bottom-up (the y ramp grows toward
    the top row).
    """
    eps = EPSILON_SIGNAL_PER_PIXEL * cols * rows
    if not np.isfinite(total) or total <= eps:
        raise NoObjectError(
            f"total intensity {total!r} below the detectable threshold {eps!r}"
        )
    return cols * ix / total, rows * iy / total


def fix_from_set(
    records: Sequence[BucketRecord],
    reference: ReferencePoint,
    cols: int,
    rows: int,
    i1_source: str = "last-pair",
) -> TrackFix:
    """Build the track fix for one set of records.

    The total intensity comes from the last complementary pair of the
    set by default (nearest in time to the moment projections);
    ``i1_source="mean-of-pairs"`` averages every pair instead.
    """
    if i1_source not in ("last-pair", "mean-of-pairs"):
        raise ValueError(f"unknown i1_source {i1_source!r}")
    pos = [r for r in records if r.kind is PatternKind.HADAMARD_POS]
    neg = [r for r in records if r.kind is PatternKind.HADAMARD_NEG]
    s2 = [r for r in records if r.kind is PatternKind.MOMENT_S2]
    s3 = [r for r in records if r.kind is PatternKind.MOMENT_S3]
    if not pos or len(pos) != len(neg) or len(s2) != 1 or len(s3) != 1:
        raise ProtocolError(
            f"set {records[0].set_index if records else '?'} is malformed: "
            f"{len(pos)} pos / {len(neg)} neg / {len(s2)} s2 / {len(s3)} s3 records"
        )
    if i1_source == "last-pair":
        total = total_from_pair(pos[-1].value, neg[-1].value)
    else:
        total = float(
            np.mean([total_from_pair(p.value, m.value) for p, m in zip(pos, neg)])
        )
    x_pix, y_pix = centroid_from_intensities(
        s2[0].value, s3[0].value, total, cols, rows
    )
    xc_norm = x_pix / cols
    yc_norm = y_pix / rows
    out_of_field = not (0.0 < xc_norm <= 1.0 and 0.0 < yc_norm <= 1.0)
    return TrackFix(
        set_index=records[0].set_index,
        xc_norm=xc_norm,
        yc_norm=yc_norm,
        x_pix=x_pix,
        y_pix=y_pix,
        displacement=Displacement(x_pix - reference.x0, y_pix - reference.y0),
        total_intensity=total,
        out_of_field=out_of_field,
    )


def _gap_fix(set_index: int) -> TrackFix:
    nan = float("nan")
    return TrackFix(
        set_index=set_index,
        xc_norm=nan,
        yc_norm=nan,
        x_pix=nan,
        y_pix=nan,
        displacement=Displacement(nan, nan),
        total_intensity=0.0,
        valid=False,
    )


def track_run(
    records: Sequence[BucketRecord],
    plan: SequencePlan,
    reference: ReferencePoint | None = None,
    ground_truth: np.ndarray | None = None,
    i1_source: str = "last-pair",
    smoothing_window: int = 0,
) -> tuple[list[TrackFix], dict]:
    """One fix per set over a whole record stream.

    Sets with no detectable object become gap fixes (``valid=False``);
    downstream reconstruction falls back to the last valid displacement.
    ``ground_truth`` is an optional (num_sets, 2) array of true (rx, ry)
    displacements; when given, the summary reports the mean Euclidean
    positioning error over valid fixes. ``smoothing_window`` > 1 applies
    a trailing moving average to the fixed positions (off by default).
    """
    if len(records) != plan.num_sets * plan.set_length:
        raise ProtocolError(
            f"stream length {len(records)} does not match plan "
            f"({plan.num_sets} sets of {plan.set_length})"
        )
    for rec, (kind, ordinal) in zip(records, plan.entries):
        if rec.kind is not kind or rec.basis_ordinal != ordinal:
            raise ProtocolError(
                f"slot {rec.slot}: stream has ({rec.kind.value}, "
                f"{rec.basis_ordinal}), plan expects ({kind.value}, {ordinal})"
            )
    reference = reference or field_center(plan.side, plan.side)

    fixes: list[TrackFix] = []
    for set_records in split_sets(list(records)):
        try:
            fixes.append(
                fix_from_set(set_records, reference, plan.side, plan.side, i1_source)
            )
        except NoObjectError:
            fixes.append(_gap_fix(set_records[0].set_index))

    if smoothing_window > 1:
        fixes = _smooth_fixes(fixes, smoothing_window, reference)

    valid = [f for f in fixes if f.valid]
    summary: dict = {
        "fixes": len(valid),
        "gaps": len(fixes) - len(valid),
        "mean_abs_error_px": None,
    }
    if ground_truth is not None and valid:
        truth = np.asarray(ground_truth, dtype=np.float64)
        if truth.shape[0] < len(fixes):
            raise ProtocolError(
                f"ground truth covers {truth.shape[0]} sets, stream has {len(fixes)}"
            )
        errs = [
            float(np.hypot(f.displacement.rx - truth[f.set_index, 0],
                           f.displacement.ry - truth[f.set_index, 1]))
            for f in valid
        ]
        summary["mean_abs_error_px"] = float(np.mean(errs))
    return fixes, summary


def _smooth_fixes(
    fixes: list[TrackFix], window: int, reference: ReferencePoint
) -> list[TrackFix]:
    out: list[TrackFix] = []
    history: list[tuple[float, float]] = []
    for f in fixes:
        if not f.valid:
            out.append(f)
            continue
        history.append((f.x_pix, f.y_pix))
        recent = history[-window:]
        x = float(np.mean([p[0] for p in recent]))
        y = float(np.mean([p[1] for p in recent]))
        out.append(
            TrackFix(
                set_index=f.set_index,
                xc_norm=f.xc_norm,
                yc_norm=f.yc_norm,
                x_pix=x,
                y_pix=y,
                displacement=Displacement(x - reference.x0, y - reference.y0),
                total_intensity=f.total_intensity,
                out_of_field=f.out_of_field,
            )
        )
    return out
