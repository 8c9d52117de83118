"""Trace containers, per-index min-max normalization, and dataset files.

A trace is a fixed-length vector of side-channel samples covering one
instruction window. Records pair a power trace with an EM trace captured
simultaneously and carry an instruction label, its group label, and the
id of the boot session the record came from.

Datasets persist in a compact little-endian binary format (magic
``SCDT``, version byte, header, label table, float32 sample blocks,
trailing CRC32) that round-trips bit-exactly, and can be exported to CSV
with one row per record.
"""
from __future__ import annotations

import csv
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChecksumMismatch,
    DimensionMismatch,
    EmptyDataset,
    FormatVersionMismatch,
    IoError,
    RaggedTraces,
)

CHANNELS = ("power", "em")

_MAGIC = b"SCDT"
_VERSION = 1


@dataclass(frozen=True)
class DualTrace:
    """One instruction window seen on both channels at once."""

    power: np.ndarray
    em: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.power, dtype=np.float64)
        e = np.asarray(self.em, dtype=np.float64)
        if p.ndim != 1 or e.ndim != 1:
            raise RaggedTraces("channel traces must be 1-D vectors")
        if p.shape[0] != e.shape[0]:
            raise RaggedTraces(
                f"power window {p.shape[0]} != em window {e.shape[0]}"
            )
        if p.shape[0] == 0:
            raise RaggedTraces("empty trace")
        object.__setattr__(self, "power", p)
        object.__setattr__(self, "em", e)

    @property
    def window(self) -> int:
        return int(self.power.shape[0])

    def channel(self, name: str) -> np.ndarray:
        if name not in CHANNELS:
            raise KeyError(name)
        return self.power if name == "power" else self.em


@dataclass(frozen=True)
class LabeledDataset:
    """Array-backed set of labeled dual-channel records.

    ``labels`` is the ordered instruction alphabet of the set and
    ``label_groups`` assigns exactly one group id to each label, so every
    record's instruction maps to a single group by construction.
    ``class_priors`` aligns with ``labels`` and sums to one.
    """

    power: np.ndarray        # (n, w) float32
    em: np.ndarray           # (n, w) float32
    instr_ids: np.ndarray    # (n,) int32, index into labels
    session_ids: np.ndarray  # (n,) int64
    labels: tuple[str, ...]
    label_groups: tuple[int, ...]
    class_priors: np.ndarray  # (len(labels),) float64

    def __post_init__(self):
        p = np.ascontiguousarray(self.power, dtype=np.float32)
        e = np.ascontiguousarray(self.em, dtype=np.float32)
        if p.ndim != 2 or e.ndim != 2:
            raise RaggedTraces("sample blocks must be 2-D (records x window)")
        if p.shape != e.shape:
            raise RaggedTraces(f"power block {p.shape} != em block {e.shape}")
        ii = np.ascontiguousarray(self.instr_ids, dtype=np.int32)
        ss = np.ascontiguousarray(self.session_ids, dtype=np.int64)
        if ii.shape != (p.shape[0],) or ss.shape != (p.shape[0],):
            raise RaggedTraces("label arrays must have one entry per record")
        if len(self.labels) != len(self.label_groups):
            raise ValueError("labels and label_groups must align")
        if p.shape[0] and (ii.min() < 0 or ii.max() >= len(self.labels)):
            raise ValueError("instruction id outside label table")
        pri = np.ascontiguousarray(self.class_priors, dtype=np.float64)
        if pri.shape != (len(self.labels),):
            raise ValueError("class_priors must align with labels")
        if abs(float(pri.sum()) - 1.0) > 1e-9:
            raise ValueError("class_priors must sum to 1")
        object.__setattr__(self, "power", p)
        object.__setattr__(self, "em", e)
        object.__setattr__(self, "instr_ids", ii)
        object.__setattr__(self, "session_ids", ss)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "label_groups", tuple(int(g) for g in self.label_groups))
        object.__setattr__(self, "class_priors", pri)

    @classmethod
    def from_arrays(cls, power, em, instr_ids, session_ids, labels, label_groups):
        """Build a dataset computing empirical class priors from counts."""
        instr_ids = np.asarray(instr_ids, dtype=np.int32)
        counts = np.bincount(instr_ids, minlength=len(labels)).astype(np.float64)
        total = counts.sum()
        if total == 0:
            raise EmptyDataset("cannot derive priors from zero records")
        return cls(power, em, instr_ids, session_ids, tuple(labels),
                   tuple(label_groups), counts / total)

    @property
    def n_records(self) -> int:
        return int(self.power.shape[0])

    @property
    def window(self) -> int:
        return int(self.power.shape[1])

    @property
    def group_ids(self) -> np.ndarray:
        """Group id per record, derived through the label table."""
        table = np.asarray(self.label_groups, dtype=np.int32)
        return table[self.instr_ids]

    def record(self, i: int):
        """Return (DualTrace, instruction, group, session_id) for record i."""
        dual = DualTrace(self.power[i].astype(np.float64),
                         self.em[i].astype(np.float64))
        instr = self.labels[self.instr_ids[i]]
        group = self.label_groups[self.instr_ids[i]]
        return dual, instr, group, int(self.session_ids[i])

    def subset(self, index) -> "LabeledDataset":
        """Row subset with priors recomputed from the remaining counts."""
        return LabeledDataset.from_arrays(
            self.power[index], self.em[index], self.instr_ids[index],
            self.session_ids[index], self.labels, self.label_groups)


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel, per-index training minima and maxima."""

    minima: np.ndarray  # (2, w) float64, axis 0 ordered as CHANNELS
    maxima: np.ndarray  # (2, w) float64

    def __post_init__(self):
        lo = np.ascontiguousarray(self.minima, dtype=np.float64)
        hi = np.ascontiguousarray(self.maxima, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 2 or lo.shape[0] != len(CHANNELS):
            raise DimensionMismatch("stats must be (2, w) arrays")
        if np.any(hi < lo):
            raise ValueError("maxima below minima")
        object.__setattr__(self, "minima", lo)
        object.__setattr__(self, "maxima", hi)

    @property
    def window(self) -> int:
        return int(self.minima.shape[1])

    @property
    def constant(self) -> np.ndarray:
        """(2, w) flags for indices with zero training range."""
        return self.maxima == self.minima


def fit_normalizer(dataset: LabeledDataset) -> NormalizationStats:
    """Fit per-index min/max on training data only.

    Evaluation data is mapped through these fixed bounds and clamped, so
    drifted sessions never leak into the normalization.
    """
    if dataset.n_records == 0:
        raise EmptyDataset("cannot fit a normalizer on zero records")
    lo = np.stack([dataset.power.min(axis=0), dataset.em.min(axis=0)])
    hi = np.stack([dataset.power.max(axis=0), dataset.em.max(axis=0)])
    return NormalizationStats(lo.astype(np.float64), hi.astype(np.float64))


def _channel_index(channel: int | str) -> int:
    if isinstance(channel, str):
        if channel not in CHANNELS:
            raise KeyError(f"unknown channel {channel!r}")
        return CHANNELS.index(channel)
    return int(channel)


def normalize(values: np.ndarray, stats: NormalizationStats,
              channel: int | str) -> np.ndarray:
    """Map raw samples into [0, 1] through the fitted bounds.

    Accepts a single trace (w,) or a block (n, w). Out-of-range values
    clamp to the bounds; indices that were constant in training map to
    0.5 so they stay uninformative downstream.
    """
    c = _channel_index(channel)
    x = np.asarray(values, dtype=np.float64)
    if x.shape[-1] != stats.window:
        raise DimensionMismatch(
            f"trace length {x.shape[-1]} != fitted window {stats.window}")
    lo = stats.minima[c]
    span = stats.maxima[c] - lo
    const = span == 0
    safe = np.where(const, 1.0, span)
    out = (x - lo) / safe
    np.clip(out, 0.0, 1.0, out=out)
    if const.any():
        out[..., const] = 0.5
    return out


def normalize_dual(dual: DualTrace, stats: NormalizationStats) -> DualTrace:
    return DualTrace(normalize(dual.power, stats, 0),
                     normalize(dual.em, stats, 1))


def normalize_dataset(dataset: LabeledDataset, stats: NormalizationStats):
    """Return (power, em) float64 blocks normalized into [0, 1]."""
    return (normalize(dataset.power, stats, 0),
            normalize(dataset.em, stats, 1))


# -- binary dataset format ----------------------------------------------------

def save_dataset(dataset: LabeledDataset, path) -> None:
    """Write the SCDT binary form: header, label table, priors, ids,
    float32 sample blocks, trailing CRC32 over everything before it."""
    parts = [
        _MAGIC,
        struct.pack("<B", _VERSION),
        struct.pack("<IBIH", dataset.window, len(CHANNELS),
                    dataset.n_records, len(dataset.labels)),
    ]
    for name, group in zip(dataset.labels, dataset.label_groups):
        raw = name.encode("ascii")
        parts.append(struct.pack("<B", len(raw)) + raw + struct.pack("<B", group))
    parts.append(dataset.class_priors.astype("<f8").tobytes())
    parts.append(dataset.instr_ids.astype("<u2").tobytes())
    parts.append(dataset.session_ids.astype("<u4").tobytes())
    parts.append(np.ascontiguousarray(dataset.power, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(dataset.em, dtype="<f4").tobytes())
    body = b"".join(parts)
    blob = body + struct.pack("<I", zlib.crc32(body))
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_dataset(path) -> LabeledDataset:
    """Read an SCDT file back; verifies magic, version, and checksum."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(blob) < 4 or blob[:4] != _MAGIC:
        raise FormatVersionMismatch("not an SCDT file (bad magic)")
    if len(blob) < 5 or blob[4] != _VERSION:
        raise FormatVersionMismatch(
            f"unsupported SCDT version {blob[4] if len(blob) > 4 else '?'}")
    if len(blob) < 9:
        raise ChecksumMismatch("file truncated before checksum")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("CRC32 mismatch (corrupt or truncated file)")

    off = 5
    try:
        window, n_channels, n_records, n_labels = struct.unpack_from("<IBIH", body, off)
        off += struct.calcsize("<IBIH")
        if n_channels != len(CHANNELS):
            raise FormatVersionMismatch(f"unsupported channel count {n_channels}")
        labels, groups = [], []
        for _ in range(n_labels):
            (ln,) = struct.unpack_from("<B", body, off)
            off += 1
            labels.append(body[off:off + ln].decode("ascii"))
            off += ln
            (g,) = struct.unpack_from("<B", body, off)
            off += 1
            groups.append(g)
        pri = np.frombuffer(body, dtype="<f8", count=n_labels, offset=off).copy()
        off += 8 * n_labels
        ii = np.frombuffer(body, dtype="<u2", count=n_records, offset=off)
        ii = ii.astype(np.int32)
        off += 2 * n_records
        ss = np.frombuffer(body, dtype="<u4", count=n_records, offset=off)
        ss = ss.astype(np.int64)
        off += 4 * n_records
        cnt = n_records * window
        power = np.frombuffer(body, dtype="<f4", count=cnt, offset=off)
        power = power.reshape(n_records, window).copy()
        off += 4 * cnt
        em = np.frombuffer(body, dtype="<f4", count=cnt, offset=off)
        em = em.reshape(n_records, window).copy()
        off += 4 * cnt
    except (struct.error, ValueError) as exc:
        raise ChecksumMismatch(f"file shorter than its header promises: {exc}") from exc
    if off != len(body):
        raise ChecksumMismatch("trailing bytes after payload")
    return LabeledDataset(power, em, ii, ss, tuple(labels), tuple(groups), pri)


def export_csv(dataset: LabeledDataset, path) -> None:
    """One row per record: session_id, group, instruction, power samples,
    then em samples. A header row names every column."""
    w = dataset.window
    header = (["session_id", "group", "instruction"]
              + [f"p{k}" for k in range(w)] + [f"e{k}" for k in range(w)])
    groups = dataset.group_ids
    try:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(header)
            for i in range(dataset.n_records):
                row = [int(dataset.session_ids[i]), int(groups[i]),
                       dataset.labels[dataset.instr_ids[i]]]
                row.extend(repr(float(v)) for v in dataset.power[i])
                row.extend(repr(float(v)) for v in dataset.em[i])
                out.writerow(row)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
