"""Motion-compensated correlation reconstruction.

Every differential bucket value (pos minus neg detection of one
complementary pair) is multiplied onto its bipolar pattern, with the
pattern counter-shifted by the displacement measured for that set, and
summed. Counter-shifting keeps the moving object stationary relative to
the pattern basis; the uncompensated baseline skips the shift and shows
the raw motion blur.

Accumulators are mergeable: partial sums built over disjoint record
subsets combine by adding images and counts, so the result is
independent of accumulation order up to float reassociation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acquisition import BucketRecord, split_sets
from .errors import EmptyAccumulatorError, ProtocolError
from .patterns import PatternBank, PatternKind, SequencePlan
from .scene import Displacement, round_half_away
from .tracking import TrackFix

MODES = ("compensated", "uncompensated")


@dataclass(eq=False)
class ReconAccumulator:
    sum_image: np.ndarray
    eta: int = 0
    mode: str = "compensated"
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)


def new_accumulator(cols: int, rows: int, mode: str = "compensated") -> ReconAccumulator:
    if mode not in MODES:
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    return ReconAccumulator(np.zeros((rows, cols), dtype=np.float64), 0, mode)


def shift_pattern(pattern, displacement: Displacement) -> np.ndarray:
    """Counter-translate a pattern by the object displacement.

    Content moves by (-rx) along columns; ry is positive toward the top
    row, so it becomes a positive row offset. Vacated cells are zero --
    neither +1 nor -1 -- and contribute nothing to the correlation.
    """
    values = np.asarray(getattr(pattern, "values", pattern))
    rx, ry = displacement
    if not (np.isfinite(rx) and np.isfinite(ry)):
        raise ValueError(f"displacement must be finite, got {displacement}")
    dc = -round_half_away(rx)
    dr = round_half_away(ry)
    rows, cols = values.shape
    out = np.zeros_like(values)
    src_r0, src_r1 = max(0, -dr), min(rows, rows - dr)
    src_c0, src_c1 = max(0, -dc), min(cols, cols - dc)
    if src_r0 < src_r1 and src_c0 < src_c1:
        out[src_r0 + dr : src_r1 + dr, src_c0 + dc : src_c1 + dc] = values[
            src_r0:src_r1, src_c0:src_c1
        ]
    return out


def accumulate(
    acc: ReconAccumulator,
    b_plus: float,
    b_minus: float,
    pattern,
    displacement: Displacement = Displacement(0.0, 0.0),
) -> ReconAccumulator:
    """Add one differential measurement: sum += (b+ - b-) * shifted pattern."""
    values = np.asarray(getattr(pattern, "values", pattern))
    if values.shape != acc.sum_image.shape:
        raise ValueError(
            f"pattern {values.shape} does not match accumulator "
            f"{acc.sum_image.shape}"
        )
    if acc.mode == "uncompensated":
        displacement = Displacement(0.0, 0.0)
    rx, ry = displacement
    if round_half_away(rx) != 0 or round_half_away(ry) != 0:
        values = shift_pattern(values, displacement)
    acc.sum_image += (b_plus - b_minus) * values
    acc.eta += 1
    return acc


def merge(a: ReconAccumulator, b: ReconAccumulator) -> ReconAccumulator:
    """Combine partial accumulators built over disjoint record subsets."""
    if a.sum_image.shape != b.sum_image.shape or a.mode != b.mode:
        raise ValueError("accumulators differ in shape or mode")
    out = ReconAccumulator(a.sum_image + b.sum_image, a.eta + b.eta, a.mode)
    out.snapshots = sorted(a.snapshots + b.snapshots, key=lambda t: t[0])
    return out


def finalize(acc: ReconAccumulator) -> np.ndarray:
    """The pattern-count-normalized image. Display normalization is an
    export concern and never happens here."""
    if acc.eta <= 0:
        raise EmptyAccumulatorError("no patterns accumulated")
    return acc.sum_image / acc.eta


def mcspi_run(
    records: list[BucketRecord],
    plan: SequencePlan,
    fixes: list[TrackFix] | None,
    mode: str = "compensated",
    snapshot_taus: tuple[int, ...] | list[int] = (),
    bank: PatternBank | None = None,
) -> tuple[np.ndarray, list[tuple[int, np.ndarray]]]:
    """Reconstruct a whole run, one displacement fix per set.

    All Hadamard pairs of a set are counter-shifted by that set's fix;
    sets whose fix is a gap reuse the last valid displacement (zero until
    one exists). Snapshots of the normalized image are captured the first
    time the cumulative sample count tau reaches each requested
    checkpoint, tagged with the actual tau at capture.
    """
    if mode not in MODES:
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    if len(records) != plan.num_sets * plan.set_length:
        raise ProtocolError(
            f"stream length {len(records)} does not match plan "
            f"({plan.num_sets} sets of {plan.set_length})"
        )
    if mode == "compensated":
        if fixes is None:
            raise ProtocolError("compensated reconstruction needs fixes")
        if len(fixes) != plan.num_sets:
            raise ProtocolError(
                f"{len(fixes)} fixes do not cover {plan.num_sets} sets"
            )
    if bank is None:
        bank = PatternBank(plan.side)

    acc = new_accumulator(plan.side, plan.side, mode)
    pending = sorted(set(int(t) for t in snapshot_taus))
    snapshots: list[tuple[int, np.ndarray]] = []
    last = Displacement(0.0, 0.0)
    tau = 0
    for set_records in split_sets(records):
        s = set_records[0].set_index
        if mode == "compensated":
            fix = fixes[s]
            if fix.set_index != s:
                raise ProtocolError(f"fix order mismatch at set {s}")
            if fix.valid:
                last = fix.displacement
        shift = last
        by_ordinal: dict[int, dict[PatternKind, float]] = {}
        for rec in set_records:
            if rec.kind in (PatternKind.HADAMARD_POS, PatternKind.HADAMARD_NEG):
                by_ordinal.setdefault(rec.basis_ordinal, {})[rec.kind] = rec.value
        for ordinal, pair in by_ordinal.items():
            if len(pair) != 2:
                raise ProtocolError(
                    f"set {s}: pattern {ordinal} lacks its complementary mate"
                )
            accumulate(
                acc,
                pair[PatternKind.HADAMARD_POS],
                pair[PatternKind.HADAMARD_NEG],
                bank.bipolar(ordinal),
                shift,
            )
        tau += len(set_records)
        while pending and tau >= pending[0]:
            snapshots.append((tau, finalize(acc)))
            pending.pop(0)
    acc.snapshots = snapshots
    return finalize(acc), snapshots
