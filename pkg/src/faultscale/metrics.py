"""Multi-channel utilization traces, windowed max aggregation and CSV I/O."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

from . import _kernels
from .catalog import RESOURCE_KINDS, ResourceKind, ResourceVector

LATENCY = "latency_ms"
TRACE_COLUMNS = ("t_s",) + tuple(k.value for k in RESOURCE_KINDS)
_EPS = 1e-9


class TraceError(ValueError):
    pass


def clamp_utilization(raw: float) -> float:
    return min(max(float(raw), 0.0), 1.0)


@dataclass(frozen=True)
class Window:
    start: float
    duration: float

    def __post_init__(self):
        if not (self.start >= 0 and math.isfinite(self.start)):
            raise ValueError(f"window start must be >= 0, got {self.start!r}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"window duration must be > 0, got {self.duration!r}")

    @property
    def end(self) -> float:
        return self.start + self.duration


class MetricTrace:
    """Utilization samples for every ``ResourceKind`` at a fixed interval.

    ``samples`` has shape ``(4, n)`` in ``RESOURCE_KINDS`` order.  Sample ``k``
    is taken at ``start_offset + k * sample_interval`` seconds.  The optional
    latency channel is kept separately since it is not a utilization.
    """

    __slots__ = ("samples", "latency", "sample_interval", "start_offset")

    def __init__(self, samples, sample_interval: float = 1.0, start_offset: float = 0.0,
                 latency: Optional[np.ndarray] = None, *, validate: bool = True):
        arr = np.array(samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != len(RESOURCE_KINDS):
            raise TraceError(f"samples must have shape (4, n), got {arr.shape}")
        if not sample_interval > 0:
            raise TraceError("sample_interval must be > 0")
        if start_offset < 0:
            raise TraceError("start_offset must be >= 0")
        lat = None
        if latency is not None:
            lat = np.array(latency, dtype=np.float64)
            if lat.shape != (arr.shape[1],):
                raise TraceError("latency length must match the utilization channels")
        if validate:
            bad = ~np.isfinite(arr) | (arr < 0) | (arr > 1)
            if bad.any():
                col = int(np.argmax(bad.any(axis=0)))
                raise TraceError(f"utilization out of range at row {col + 1}")
            if lat is not None and (~np.isfinite(lat) | (lat < 0)).any():
                col = int(np.argmax(~np.isfinite(lat) | (lat < 0)))
                raise TraceError(f"latency out of range at row {col + 1}")
        arr.setflags(write=False)
        if lat is not None:
            lat.setflags(write=False)
        self.samples = arr
        self.latency = lat
        self.sample_interval = float(sample_interval)
        self.start_offset = float(start_offset)

    @classmethod
    def from_channels(cls, channels: Mapping[Union[str, ResourceKind], np.ndarray], **kwargs) -> "MetricTrace":
        keyed = {ResourceKind(k): np.asarray(v, dtype=np.float64) for k, v in channels.items()}
        lengths = {v.shape for v in keyed.values()}
        if len(lengths) != 1:
            raise TraceError("all channels must have equal length")
        missing = [k.value for k in RESOURCE_KINDS if k not in keyed]
        if missing:
            raise TraceError(f"missing channel(s): {', '.join(missing)}")
        return cls(np.vstack([keyed[k] for k in RESOURCE_KINDS]), **kwargs)

    @classmethod
    def constant(cls, values: Union[float, ResourceVector, Mapping], n: int, **kwargs) -> "MetricTrace":
        if isinstance(values, ResourceVector):
            vec = np.nan_to_num(values.to_array())
        elif isinstance(values, Mapping):
            vec = np.array([float(values.get(k.value, 0.0)) for k in RESOURCE_KINDS])
        else:
            vec = np.full(len(RESOURCE_KINDS), float(values))
        return cls(np.repeat(vec[:, None], n, axis=1), **kwargs)

    def __len__(self) -> int:
        return self.samples.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricTrace):
            return NotImplemented
        if (self.sample_interval, self.start_offset) != (other.sample_interval, other.start_offset):
            return False
        if (self.latency is None) != (other.latency is None):
            return False
        if self.latency is not None and not np.array_equal(self.latency, other.latency):
            return False
        return np.array_equal(self.samples, other.samples)

    __hash__ = None

    def __repr__(self) -> str:
        return (f"MetricTrace(n={len(self)}, interval={self.sample_interval:g}s, "
                f"start={self.start_offset:g}s, latency={'yes' if self.latency is not None else 'no'})")

    @property
    def duration(self) -> float:
        return len(self) * self.sample_interval

    @property
    def end(self) -> float:
        return self.start_offset + self.duration

    @property
    def times(self) -> np.ndarray:
        return self.start_offset + np.arange(len(self)) * self.sample_interval

    def channel(self, name: Union[str, ResourceKind]) -> np.ndarray:
        if name == LATENCY:
            if self.latency is None:
                raise KeyError("trace has no latency channel")
            return self.latency
        try:
            kind = ResourceKind(name)
        except ValueError:
            raise KeyError(f"unknown channel {name!r}") from None
        return self.samples[kind.index]

    def has_channel(self, name: str) -> bool:
        if name == LATENCY:
            return self.latency is not None
        return name in {k.value for k in RESOURCE_KINDS}

    def replace(self, samples=None, latency=..., validate: bool = True) -> "MetricTrace":
        return MetricTrace(
            self.samples if samples is None else samples,
            sample_interval=self.sample_interval,
            start_offset=self.start_offset,
            latency=self.latency if latency is ... else latency,
            validate=validate,
        )

    def index_range(self, window: Window, *, clip: bool = False) -> tuple[int, int]:
        """Half-open sample index range ``[lo, hi)`` covered by ``window``."""
        if not clip and (window.start < self.start_offset - _EPS or window.end > self.end + _EPS):
            raise TraceError(
                f"window [{window.start:g}, {window.end:g}) s outside trace "
                f"[{self.start_offset:g}, {self.end:g}) s"
            )
        lo = math.ceil((window.start - self.start_offset) / self.sample_interval - _EPS)
        hi = math.ceil((window.end - self.start_offset) / self.sample_interval - _EPS)
        lo, hi = max(lo, 0), min(hi, len(self))
        if hi <= lo:
            raise TraceError(f"window [{window.start:g}, {window.end:g}) s contains no samples")
        return lo, hi

    def full_window(self) -> Window:
        return Window(self.start_offset, self.duration)

    def trailing_window(self, duration: float) -> Window:
        """The last ``duration`` seconds of the trace."""
        if duration > self.duration + _EPS:
            raise TraceError(f"lookback {duration:g} s longer than trace ({self.duration:g} s)")
        return Window(self.end - duration, duration)


def _windowed_max(row: np.ndarray, bucket: Optional[int]) -> float:
    if bucket:
        return float(_kernels.bucket_max(np.ascontiguousarray(row), bucket).max())
    return float(row.max())


def max_aggregate(trace: MetricTrace, window: Optional[Window] = None,
                  bucket_s: Optional[float] = None) -> ResourceVector:
    """Per-channel maximum utilization inside ``window``.

    With ``bucket_s`` the window is first reduced to per-bucket maxima
    (e.g. 60 s), which leaves the result unchanged.
    """
    lo, hi = trace.index_range(window or trace.full_window())
    if bucket_s:
        bucket = max(1, int(round(bucket_s / trace.sample_interval)))
        values = [_windowed_max(trace.samples[i, lo:hi], bucket) for i in range(len(RESOURCE_KINDS))]
    else:
        values = _kernels.channel_max(trace.samples, lo, hi)
    return ResourceVector.from_array(values)


def channel_max(trace: MetricTrace, name: str, window: Optional[Window] = None) -> float:
    """Windowed max for a single channel, including ``latency_ms``."""
    lo, hi = trace.index_range(window or trace.full_window())
    return float(trace.channel(name)[lo:hi].max())


def _fmt(x: float) -> str:
    return repr(float(x))


def export_trace(trace: MetricTrace) -> str:
    """CSV document, one row per sample; values round-trip exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = list(TRACE_COLUMNS) + ([LATENCY] if trace.latency is not None else [])
    writer.writerow(cols)
    times = trace.times
    for k in range(len(trace)):
        row = [_fmt(times[k])] + [_fmt(v) for v in trace.samples[:, k]]
        if trace.latency is not None:
            row.append(_fmt(trace.latency[k]))
        writer.writerow(row)
    return buf.getvalue()


def import_trace(document: str) -> MetricTrace:
    reader = csv.reader(io.StringIO(document))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise TraceError("empty trace document") from None
    for col in TRACE_COLUMNS:
        if col not in header:
            raise TraceError(f"header missing column {col!r}")
    has_latency = LATENCY in header
    idx = {name: header.index(name) for name in header}
    times, rows, lat = [], [], []
    for rowno, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise TraceError(f"row {rowno}: expected {len(header)} columns, got {len(row)}")
        try:
            t = float(row[idx["t_s"]])
            vals = [float(row[idx[k.value]]) for k in RESOURCE_KINDS]
            lval = float(row[idx[LATENCY]]) if has_latency else None
        except ValueError as exc:
            raise TraceError(f"row {rowno}: {exc}") from None
        if any(not (0.0 <= v <= 1.0) for v in vals):
            raise TraceError(f"utilization out of range at row {rowno}")
        if lval is not None and not (lval >= 0 and math.isfinite(lval)):
            raise TraceError(f"latency out of range at row {rowno}")
        times.append(t)
        rows.append(vals)
        lat.append(lval)
    if not rows:
        raise TraceError("trace has no samples")
    t = np.array(times)
    interval = float(t[1] - t[0]) if len(t) > 1 else 1.0
    if len(t) > 1:
        expected = t[0] + np.arange(len(t)) * interval
        off = np.flatnonzero(np.abs(t - expected) > 1e-6 * max(1.0, interval))
        if off.size:
            raise TraceError(f"row {int(off[0]) + 1}: irregular sample time {t[off[0]]!r}")
    return MetricTrace(
        np.array(rows).T,
        sample_interval=interval,
        start_offset=float(t[0]),
        latency=np.array(lat) if has_latency else None,
    )


def read_trace(path: Union[str, Path]) -> MetricTrace:
    return import_trace(Path(path).read_text(encoding="utf-8"))


def write_trace(trace: MetricTrace, path: Union[str, Path]) -> None:
    Path(path).write_text(export_trace(trace), encoding="utf-8")
