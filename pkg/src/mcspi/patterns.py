"""Modulation patterns for time-multiplexed single-pixel imaging.

Two pattern families share the projector timeline:

* Hadamard patterns (Sylvester construction), reordered so patterns with
  few connected constant-sign blocks come first ("cake-cut" ordering) and
  split into complementary 0/1 pairs for a binary modulator.
* Geometric-moment ramps, binarized with Floyd-Steinberg error diffusion,
  whose bucket detections equal the object's zero- and first-order image
  moments up to a known scale.

A :class:`SequencePlan` interleaves the families: each set of ``n``
Hadamard slots (``n/2`` complementary pairs) is followed by the two
moment patterns, so a single detector alternately carries image and
position information.

Coordinate convention used throughout the package: pixel ``x`` runs
1..C left to right, pixel ``y`` runs 1..R bottom to top (the y ramp
assigns its largest value to the top row).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import CapacityError

# Refuse to materialize bipolar matrices beyond this many entries (int8).
MAX_MATRIX_ENTRIES = 1 << 28


class PatternKind(str, Enum):
    HADAMARD_POS = "H+"
    HADAMARD_NEG = "H-"
    MOMENT_S2 = "S2"
    MOMENT_S3 = "S3"


@dataclass(eq=False)
class BipolarPattern:
    """One Hadamard basis pattern: an N x N grid of +1/-1 values.

    ``basis_index`` is the row index in the natural (Sylvester) ordering
    of the order-N^2 matrix; ``block_count`` the number of 4-connected
    constant-sign regions, which is the cake-cut sort key.
    """

    values: np.ndarray
    basis_index: int
    block_count: int

    @property
    def side(self) -> int:
        return self.values.shape[0]


@dataclass(eq=False)
class BinaryPattern:
    """A 0/1 modulator pattern plus the role it plays in the sequence."""

    values: np.ndarray
    kind: PatternKind


@dataclass(eq=False)
class MomentMatrices:
    """The three grayscale moment ramps (constant, x ramp, y ramp)."""

    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def sylvester_hadamard(k: int) -> np.ndarray:
    """Sylvester-construction Hadamard matrix of side 2**k, dtype int8."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    side = 1 << k
    if side * side > MAX_MATRIX_ENTRIES:
        raise CapacityError(
            f"order-{side} Hadamard matrix ({side * side} entries) exceeds "
            f"the {MAX_MATRIX_ENTRIES}-entry capacity limit"
        )
    h = np.array([[1]], dtype=np.int8)
    for _ in range(k):
        h = np.block([[h, h], [h, -h]]).astype(np.int8)
    return h


@lru_cache(maxsize=8)
def _parity_lut(order: int) -> np.ndarray:
    # parity[i] = popcount(i) mod 2
    lut = np.zeros(order, dtype=np.uint8)
    for i in range(1, order):
        lut[i] = lut[i >> 1] ^ (i & 1)
    lut.setflags(write=False)
    return lut


def hadamard_row(order: int, index: int) -> np.ndarray:
    """Row ``index`` of the order-``order`` Sylvester matrix without
    materializing the whole matrix (H[i, j] = (-1)**popcount(i & j))."""
    if not _is_power_of_two(order):
        raise ValueError(f"order must be a power of two, got {order}")
    if not 0 <= index < order:
        raise ValueError(f"row index {index} outside 0..{order - 1}")
    lut = _parity_lut(order)
    bits = lut[np.bitwise_and(index, np.arange(order))]
    return (1 - 2 * bits.astype(np.int8)).astype(np.int8)


def bipolar_values(side: int, basis_index: int) -> np.ndarray:
    """The 2-D basis pattern: Sylvester row reshaped row-major to side x side."""
    if not _is_power_of_two(side):
        raise ValueError(f"pattern side must be a power of two, got {side}")
    return hadamard_row(side * side, basis_index).reshape(side, side)


def count_blocks(pattern: BipolarPattern | np.ndarray) -> int:
    """Number of 4-connected constant-sign regions in a bipolar pattern."""
    values = np.asarray(getattr(pattern, "values", pattern))
    # scipy's default structuring element is the cross, i.e. 4-connectivity
    _, n_pos = ndimage.label(values > 0)
    _, n_neg = ndimage.label(values < 0)
    return int(n_pos + n_neg)


def hadamard_basis(side: int) -> list[BipolarPattern]:
    """All side^2 basis patterns in natural order.

    Reshaping each row of the order-side^2 Sylvester matrix gives an
    orthogonal basis for side x side images.
    """
    if not _is_power_of_two(side):
        raise ValueError(f"pattern side must be a power of two, got {side}")
    order = side * side
    if order * order > MAX_MATRIX_ENTRIES:
        raise CapacityError(
            f"basis for side {side} needs {order * order} entries, over the "
            f"{MAX_MATRIX_ENTRIES} capacity limit"
        )
    out = []
    for i in range(order):
        values = bipolar_values(side, i)
        out.append(BipolarPattern(values, i, count_blocks(values)))
    return out


def cake_cut_sort(patterns: Sequence[BipolarPattern]) -> list[BipolarPattern]:
    """Sort patterns by ascending block count, ties by natural index."""
    sides = {p.side for p in patterns}
    if len(sides) > 1:
        raise ValueError(f"patterns mix sides {sorted(sides)}")
    return sorted(patterns, key=lambda p: (p.block_count, p.basis_index))


def cake_cut_order(side: int) -> np.ndarray:
    """Natural basis indices in cake-cut order, computed streaming.

    Equivalent to ``[p.basis_index for p in cake_cut_sort(hadamard_basis(side))]``
    but never holds more than one pattern in memory.
    """
    if not _is_power_of_two(side):
        raise ValueError(f"pattern side must be a power of two, got {side}")
    order = side * side
    counts = np.empty(order, dtype=np.int64)
    for i in range(order):
        counts[i] = count_blocks(bipolar_values(side, i))
    return np.lexsort((np.arange(order), counts))


def split_complementary(pattern: BipolarPattern) -> tuple[BinaryPattern, BinaryPattern]:
    """Complementary binary pair (1+H)/2 and (1-H)/2 of a bipolar pattern."""
    v = pattern.values
    pos = ((1 + v) // 2).astype(np.uint8)
    neg = ((1 - v) // 2).astype(np.uint8)
    return (
        BinaryPattern(pos, PatternKind.HADAMARD_POS),
        BinaryPattern(neg, PatternKind.HADAMARD_NEG),
    )


def moment_matrices(cols: int, rows: int) -> MomentMatrices:
    """Grayscale moment ramps for a cols x rows field.

    s1 is constant, s2 holds the pixel x coordinate (1..cols, left to
    right), s3 the pixel y coordinate (rows at the top row down to 1), so
    bucket detections against them give m00, m10 and m01.
    """
    if cols < 1 or rows < 1:
        raise ValueError(f"field must be at least 1x1, got {cols}x{rows}")
    n = max(cols, rows)
    s1 = np.full((rows, cols), float(n))
    s2 = np.tile(np.arange(1, cols + 1, dtype=np.float64), (rows, 1))
    s3 = np.tile(np.arange(rows, 0, -1, dtype=np.float64).reshape(-1, 1), (1, cols))
    return MomentMatrices(s1, s2, s3)


def floyd_steinberg(gray: np.ndarray) -> np.ndarray:
    """Binarize a [0,1] grayscale grid by Floyd-Steinberg error diffusion.

    Plain left-to-right, top-to-bottom scan with threshold 0.5 and the
    classic weights (7/16 right, 3/16 down-left, 5/16 down, 1/16
    down-right). Error that would diffuse outside the grid is discarded.
    Returns a uint8 grid of 0/1.
    """
    work = np.array(gray, dtype=np.float64, copy=True)
    if work.ndim != 2:
        raise ValueError("input must be a 2-D grid")
    if not np.all(np.isfinite(work)) or work.min() < 0.0 or work.max() > 1.0:
        raise ValueError("dither input values must lie in [0, 1]")
    rows, cols = work.shape
    out = np.zeros((rows, cols), dtype=np.uint8)
    for r in range(rows):
        cur = work[r]
        below = work[r + 1] if r + 1 < rows else None
        for c in range(cols):
            old = cur[c]
            q = 1 if old >= 0.5 else 0
            out[r, c] = q
            err = old - q
            if c + 1 < cols:
                cur[c + 1] += err * (7 / 16)
            if below is not None:
                if c > 0:
                    below[c - 1] += err * (3 / 16)
                below[c] += err * (5 / 16)
                if c + 1 < cols:
                    below[c + 1] += err * (1 / 16)
    return out


def moment_binary_patterns(cols: int, rows: int) -> tuple[BinaryPattern, BinaryPattern]:
    """Dithered x- and y-ramp patterns for the modulator.

    Each ramp is normalized by its own full-scale value before dithering
    so the binary local density encodes coordinate/scale directly. The
    constant ramp is never emitted: its binarization is the all-ones
    pattern, which the schedule supplies implicitly as the sum of every
    complementary Hadamard pair.
    """
    m = moment_matrices(cols, rows)
    s2p = floyd_steinberg(m.s2 / cols)
    s3p = floyd_steinberg(m.s3 / rows)
    return (
        BinaryPattern(s2p, PatternKind.MOMENT_S2),
        BinaryPattern(s3p, PatternKind.MOMENT_S3),
    )


@dataclass(eq=False)
class SequencePlan:
    """Time-division multiplexed modulation schedule.

    ``entries`` lists (kind, natural basis index or None) per slot. Every
    set holds ``n`` Hadamard slots as complementary pairs in cake-cut
    order, then the two moment patterns; the basis wraps cyclically when
    exhausted.
    """

    side: int
    n: int
    num_pairs: int
    num_sets: int
    ordering: str = "cake-cut"
    entries: list[tuple[PatternKind, int | None]] = field(default_factory=list)

    @property
    def set_length(self) -> int:
        return self.n + 2

    def set_entries(self, set_index: int) -> list[tuple[PatternKind, int | None]]:
        start = set_index * self.set_length
        return self.entries[start : start + self.set_length]


def build_sequence(
    n: int,
    num_pairs: int,
    basis: Sequence[BipolarPattern] | Sequence[int] | np.ndarray,
    side: int | None = None,
    ordering: str = "cake-cut",
) -> SequencePlan:
    """Lay out the multiplexed schedule for ``num_pairs`` Hadamard pairs.

    ``basis`` is the cake-cut-ordered pattern list, or equivalently the
    ordered natural indices plus an explicit ``side``. The schedule is
    rounded up to whole sets of n/2 pairs + 2 moment slots; any slots
    beyond ``num_pairs`` keep enumerating the ordering (wrapping
    cyclically), so Hadamard ordinals across sets never skip.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError(f"set parameter n must be an even integer >= 2, got {n}")
    if num_pairs < 1:
        raise ValueError(f"num_pairs must be positive, got {num_pairs}")
    if len(basis) == 0:
        raise ValueError("basis must be nonempty")
    first = basis[0]
    if isinstance(first, BipolarPattern):
        side = first.side
        index_order = [p.basis_index for p in basis]
        if any(p.side != side for p in basis):
            raise ValueError("basis patterns mix sides")
    else:
        if side is None:
            raise ValueError("side is required when basis is given as indices")
        index_order = [int(i) for i in np.asarray(basis)]

    pairs_per_set = n // 2
    num_sets = -(-num_pairs // pairs_per_set)  # ceil
    entries: list[tuple[PatternKind, int | None]] = []
    for s in range(num_sets):
        for p in range(pairs_per_set):
            ordinal = index_order[(s * pairs_per_set + p) % len(index_order)]
            entries.append((PatternKind.HADAMARD_POS, ordinal))
            entries.append((PatternKind.HADAMARD_NEG, ordinal))
        entries.append((PatternKind.MOMENT_S2, None))
        entries.append((PatternKind.MOMENT_S3, None))
    return SequencePlan(
        side=side,
        n=n,
        num_pairs=num_pairs,
        num_sets=num_sets,
        ordering=ordering,
        entries=entries,
    )


def positioning_frequency(omega: float | int | Fraction, n: int) -> Fraction:
    """Position fixes per second at projector rate ``omega``: omega/(n+2)."""
    _check_set_parameter(n)
    if omega <= 0:
        raise ValueError(f"projection rate must be positive, got {omega}")
    return Fraction(omega) / (n + 2)


def imaging_efficiency(n: int) -> Fraction:
    """Fraction of slots carrying image information: n/(n+2)."""
    _check_set_parameter(n)
    return Fraction(n, n + 2)


def _check_set_parameter(n: int) -> None:
    if n < 2 or n % 2 != 0:
        raise ValueError(f"set parameter n must be an even integer >= 2, got {n}")


class PatternBank:
    """On-demand pattern values for one field size.

    Bipolar patterns are regenerated from their natural index (cheap LUT
    arithmetic); the two dithered moment patterns are built once. A
    bounded cache keeps recently used bipolar grids for cyclic schedules.
    ``preloaded`` may supply pattern values read from a cache file.
    """

    def __init__(
        self,
        side: int,
        preloaded: dict[int, np.ndarray] | None = None,
        max_cached: int = 8192,
    ):
        if not _is_power_of_two(side):
            raise ValueError(f"pattern side must be a power of two, got {side}")
        self.side = side
        self.max_cached = max_cached
        self._bipolar: dict[int, np.ndarray] = dict(preloaded or {})
        s2p, s3p = moment_binary_patterns(side, side)
        self.moment_s2 = s2p
        self.moment_s3 = s3p

    def bipolar(self, basis_index: int) -> np.ndarray:
        cached = self._bipolar.get(basis_index)
        if cached is not None:
            return cached
        values = bipolar_values(self.side, basis_index)
        if len(self._bipolar) < self.max_cached:
            self._bipolar[basis_index] = values
        return values

    def binary(self, kind: PatternKind, basis_index: int | None) -> np.ndarray:
        if kind is PatternKind.MOMENT_S2:
            return self.moment_s2.values
        if kind is PatternKind.MOMENT_S3:
            return self.moment_s3.values
        if basis_index is None:
            raise ValueError(f"{kind.value} slot needs a basis index")
        v = self.bipolar(basis_index)
        if kind is PatternKind.HADAMARD_POS:
            return ((1 + v) // 2).astype(np.uint8)
        return ((1 - v) // 2).astype(np.uint8)
