"""File formats: images, pattern caches, bucket streams, track tables.

Binary formats carry a one-line ASCII header so files are
self-identifying:

* ``SPIPAT v1 <N> <count> <ordering>`` -- bit-packed bipolar patterns,
  one per record, MSB first, each row padded to a byte boundary; a set
  bit means +1.
* ``SPIBKT v1`` -- bucket records as little-endian (u64 slot, u64 set,
  u8 kind, u32 ordinal, f64 value); ordinal 0xFFFFFFFF marks a moment
  slot.
* ``SPIIMG v1 <C> <R>`` -- row-major little-endian float64 grid.

CSV files use shortest round-trip float formatting, so identical runs
produce byte-identical tables.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from . import patterns as pat
from .acquisition import BucketRecord
from .scene import Displacement
from .tracking import TrackFix

_KIND_CODES = {
    pat.PatternKind.HADAMARD_POS: 0,
    pat.PatternKind.HADAMARD_NEG: 1,
    pat.PatternKind.MOMENT_S2: 2,
    pat.PatternKind.MOMENT_S3: 3,
}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
_NO_ORDINAL = 0xFFFFFFFF
_BUCKET_STRUCT = struct.Struct("<QQBId")


# ---------------------------------------------------------------- images

def read_pgm(path) -> np.ndarray:
    """Load a binary PGM (P5) as float64 in [0, 1]."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte before raster
    width, height, maxval = fields
    if maxval < 256:
        raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    else:
        raw = np.frombuffer(data, dtype=">u2", count=width * height, offset=pos)
    return raw.reshape(height, width).astype(np.float64) / maxval


def write_pgm16(path, image: np.ndarray) -> None:
    """Write a display-normalized 16-bit binary PGM."""
    img = np.asarray(image, dtype=np.float64)
    lo, hi = img.min(), img.max()
    scaled = np.zeros_like(img) if hi == lo else (img - lo) / (hi - lo)
    raster = np.round(scaled * 65535.0).astype(">u2")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + raster.tobytes())


def read_png_gray(path) -> np.ndarray:
    """Load a grayscale PNG as float64 in [0, 1]."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "I;16":
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return arr


def load_gray_image(path) -> np.ndarray:
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        return read_pgm(p)
    if p.suffix.lower() == ".png":
        return read_png_gray(p)
    raise ValueError(f"{path}: unsupported object image format (PGM or PNG)")


def write_image_raw(path, image: np.ndarray) -> None:
    img = np.ascontiguousarray(np.asarray(image, dtype=np.float64))
    rows, cols = img.shape
    header = f"SPIIMG v1 {cols} {rows}\n".encode("ascii")
    Path(path).write_bytes(header + img.astype("<f8").tobytes())


def read_image_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    tag = data[:nl].decode("ascii").split()
    if tag[:2] != ["SPIIMG", "v1"] or len(tag) != 4:
        raise ValueError(f"{path}: not a SPIIMG v1 file")
    cols, rows = int(tag[2]), int(tag[3])
    grid = np.frombuffer(data, dtype="<f8", count=cols * rows, offset=nl + 1)
    return grid.reshape(rows, cols).copy()


def load_image(path) -> np.ndarray:
    """Read an image for metrics: SPIIMG raw or PGM by extension."""
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        return read_pgm(p)
    return read_image_raw(p)


# -------------------------------------------------------- pattern cache

def write_pattern_cache(path, patterns_list, ordering: str = "cake-cut") -> None:
    """Bit-pack bipolar patterns into a SPIPAT v1 cache file."""
    if not patterns_list:
        raise ValueError("nothing to cache")
    side = patterns_list[0].side
    blobs = [f"SPIPAT v1 {side} {len(patterns_list)} {ordering}\n".encode("ascii")]
    for p in patterns_list:
        if p.side != side:
            raise ValueError("patterns mix sides")
        bits = (p.values > 0).astype(np.uint8)
        blobs.append(np.packbits(bits, axis=1).tobytes())
    Path(path).write_bytes(b"".join(blobs))


def read_pattern_cache(path) -> tuple[list[pat.BipolarPattern], str]:
    """Load a SPIPAT v1 cache.

    The natural basis index of each pattern is recovered from its values
    (the sign at flat position 2**b is bit b of the Sylvester row index);
    block counts are recounted.
    """
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    tag = data[:nl].decode("ascii").split()
    if tag[:2] != ["SPIPAT", "v1"] or len(tag) != 5:
        raise ValueError(f"{path}: not a SPIPAT v1 file")
    side, count, ordering = int(tag[2]), int(tag[3]), tag[4]
    bytes_per_row = (side + 7) // 8
    record = side * bytes_per_row
    out = []
    pos = nl + 1
    for _ in range(count):
        packed = np.frombuffer(data, dtype=np.uint8, count=record, offset=pos)
        pos += record
        bits = np.unpackbits(packed.reshape(side, bytes_per_row), axis=1)[:, :side]
        values = (2 * bits.astype(np.int8) - 1).astype(np.int8)
        flat = values.ravel()
        index = 0
        b = 0
        while (1 << b) < side * side:
            if flat[1 << b] < 0:
                index |= 1 << b
            b += 1
        out.append(pat.BipolarPattern(values, index, pat.count_blocks(values)))
    return out, ordering


# -------------------------------------------------------- bucket streams

def write_bucket_csv(path, records: list[BucketRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "set", "kind", "basis_ordinal", "value"])
        for r in records:
            ordinal = "" if r.basis_ordinal is None else r.basis_ordinal
            w.writerow([r.slot, r.set_index, r.kind.value, ordinal, repr(r.value)])


def read_bucket_csv(path) -> list[BucketRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ordinal = row["basis_ordinal"]
            out.append(
                BucketRecord(
                    slot=int(row["slot"]),
                    set_index=int(row["set"]),
                    kind=pat.PatternKind(row["kind"]),
                    basis_ordinal=None if ordinal == "" else int(ordinal),
                    value=float(row["value"]),
                )
            )
    return out


def write_bucket_bin(path, records: list[BucketRecord]) -> None:
    blobs = [b"SPIBKT v1\n"]
    for r in records:
        ordinal = _NO_ORDINAL if r.basis_ordinal is None else r.basis_ordinal
        blobs.append(
            _BUCKET_STRUCT.pack(
                r.slot, r.set_index, _KIND_CODES[r.kind], ordinal, r.value
            )
        )
    Path(path).write_bytes(b"".join(blobs))


def read_bucket_bin(path) -> list[BucketRecord]:
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    if data[:nl] != b"SPIBKT v1":
        raise ValueError(f"{path}: not a SPIBKT v1 file")
    out = []
    for slot, set_index, code, ordinal, value in _BUCKET_STRUCT.iter_unpack(
        data[nl + 1 :]
    ):
        out.append(
            BucketRecord(
                slot=slot,
                set_index=set_index,
                kind=_CODE_KINDS[code],
                basis_ordinal=None if ordinal == _NO_ORDINAL else ordinal,
                value=value,
            )
        )
    return out


def write_bucket_stream(path, records: list[BucketRecord]) -> None:
    if Path(path).suffix.lower() == ".csv":
        write_bucket_csv(path, records)
    else:
        write_bucket_bin(path, records)


def read_bucket_stream(path) -> list[BucketRecord]:
    if Path(path).suffix.lower() == ".csv":
        return read_bucket_csv(path)
    return read_bucket_bin(path)


# ----------------------------------------------------------- track files

def write_track_csv(path, fixes: list[TrackFix]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["set", "x_pix", "y_pix", "rx", "ry", "valid"])
        for f in fixes:
            if f.valid:
                w.writerow(
                    [
                        f.set_index,
                        repr(f.x_pix),
                        repr(f.y_pix),
                        repr(f.displacement.rx),
                        repr(f.displacement.ry),
                        1,
                    ]
                )
            else:
                w.writerow([f.set_index, "", "", "", "", 0])


def read_track_csv(path) -> list[TrackFix]:
    out = []
    nan = float("nan")
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            valid = row["valid"] == "1"
            x = float(row["x_pix"]) if valid else nan
            y = float(row["y_pix"]) if valid else nan
            rx = float(row["rx"]) if valid else nan
            ry = float(row["ry"]) if valid else nan
            out.append(
                TrackFix(
                    set_index=int(row["set"]),
                    xc_norm=nan,
                    yc_norm=nan,
                    x_pix=x,
                    y_pix=y,
                    displacement=Displacement(rx, ry),
                    total_intensity=nan,
                    valid=valid,
                )
            )
    return out


def read_waypoints_csv(path) -> list[tuple[float, float]]:
    """Waypoint path rows are (set_index, x, y); the index column only
    orders the vertices."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((int(row["set_index"]), float(row["x"]), float(row["y"])))
    rows.sort(key=lambda r: r[0])
    return [(x, y) for _, x, y in rows]


# ------------------------------------------------------------------ plan

def write_plan(path, plan: pat.SequencePlan) -> None:
    doc = {
        "format": "SPIPLAN v1",
        "side": plan.side,
        "n": plan.n,
        "num_pairs": plan.num_pairs,
        "num_sets": plan.num_sets,
        "ordering": plan.ordering,
        "entries": [[kind.value, ordinal] for kind, ordinal in plan.entries],
    }
    write_json(path, doc)


def read_plan(path) -> pat.SequencePlan:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "SPIPLAN v1":
        raise ValueError(f"{path}: not a SPIPLAN v1 file")
    entries = [
        (pat.PatternKind(kind), None if ordinal is None else int(ordinal))
        for kind, ordinal in doc["entries"]
    ]
    return pat.SequencePlan(
        side=int(doc["side"]),
        n=int(doc["n"]),
        num_pairs=int(doc["num_pairs"]),
        num_sets=int(doc["num_sets"]),
        ordering=doc["ordering"],
        entries=entries,
    )


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
