"""Speed telemetry ingestion and brake-event labelling.

A frame at time ``t`` is labelled as braking when the speed one interval
earlier exceeds the speed at ``t`` by strictly more than ``delta_v``. With
the defaults (0.5 m/s over 1 s) that is a deceleration above 0.5 m/s^2.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..errors import ArgumentError, FormatError, TelemetryLookupError

HEADER = ["timestamp_ms", "speed_mps"]


@dataclass(frozen=True, eq=False)
class TelemetrySeries:
    timestamps_ms: np.ndarray
    speeds: np.ndarray

    def __len__(self):
        return len(self.timestamps_ms)

    def __eq__(self, other):
        return (
            isinstance(other, TelemetrySeries)
            and np.array_equal(self.timestamps_ms, other.timestamps_ms)
            and np.array_equal(self.speeds, other.speeds)
        )


@dataclass(frozen=True)
class BrakeLabelConfig:
    delta_v: float = 0.5
    interval: float = 1.0
    match_tolerance: float = 0.05

    def __post_init__(self):
        if self.delta_v <= 0 or self.interval <= 0 or self.match_tolerance < 0:
            raise ArgumentError("delta_v and interval must be positive, match_tolerance non-negative")


class BrakeLabel(NamedTuple):
    frame_time: float
    brake: bool
    speed_before: float
    speed_now: float


class SkippedFrame(NamedTuple):
    frame_time: float
    reason: str


@dataclass
class LabelResult:
    labels: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


def parse_telemetry(stream):
    """Parse ``timestamp_ms,speed_mps`` CSV text (a string or text file object)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("line 1: missing header") from None
    if [h.strip() for h in header] != HEADER:
        raise FormatError(f"line 1: expected header {','.join(HEADER)}, got {','.join(header)}")
    ts, vs = [], []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise FormatError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            t, v = float(row[0]), float(row[1])
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric value in {row!r}") from None
        if not (np.isfinite(t) and np.isfinite(v)):
            raise FormatError(f"line {lineno}: non-finite value")
        if v < 0:
            raise FormatError(f"line {lineno}: negative speed {v}")
        if ts and t <= ts[-1]:
            raise FormatError(f"line {lineno}: timestamp {t} not after previous {ts[-1]}")
        ts.append(t)
        vs.append(v)
    return TelemetrySeries(np.array(ts, dtype=np.float64), np.array(vs, dtype=np.float64))


def format_telemetry(series):
    lines = [",".join(HEADER)]
    for t, v in zip(series.timestamps_ms, series.speeds):
        lines.append(f"{float(t)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"


def interpolate(t0, v0, t1, v1, t):
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


def speed_at(series, t, tolerance=0.05):
    """Speed at ``t`` seconds.

    Exact hits return the sample. When samples on both sides lie within
    ``tolerance`` seconds the speed is linearly interpolated; otherwise the
    nearest sample within tolerance is used (the earlier one on a tie).
    """
    n = len(series)
    if n == 0:
        raise TelemetryLookupError("empty telemetry series")
    ts, vs = series.timestamps_ms, series.speeds
    t_ms = t * 1000.0
    tol_ms = tolerance * 1000.0
    k = int(np.searchsorted(ts, t_ms, side="left"))
    if k < n and ts[k] == t_ms:
        return float(vs[k])
    before = k - 1 if k > 0 else None
    after = k if k < n else None
    near_before = before is not None and t_ms - ts[before] <= tol_ms
    near_after = after is not None and ts[after] - t_ms <= tol_ms
    if near_before and near_after:
        return float(interpolate(ts[before], vs[before], ts[after], vs[after], t_ms))
    if near_before:
        return float(vs[before])
    if near_after:
        return float(vs[after])
    raise TelemetryLookupError(f"no telemetry sample within {tolerance}s of t={t}s")


def label_brakes(series, frame_times, config=None):
    """Label each frame time; frames whose lookups fail are skipped with a reason."""
    config = config or BrakeLabelConfig()
    result = LabelResult()
    for t in frame_times:
        try:
            before = speed_at(series, t - config.interval, config.match_tolerance)
        except TelemetryLookupError as exc:
            result.skipped.append(SkippedFrame(float(t), f"no speed at t-{config.interval}s: {exc}"))
            continue
        try:
            now = speed_at(series, t, config.match_tolerance)
        except TelemetryLookupError as exc:
            result.skipped.append(SkippedFrame(float(t), f"no speed at t: {exc}"))
            continue
        result.labels.append(BrakeLabel(float(t), bool(before - now > config.delta_v), before, now))
    return result


def frame_times_at(series, fps=3.0):
    """Frame times (seconds) at ``fps`` spanning the series."""
    if len(series) == 0:
        return []
    start = series.timestamps_ms[0] / 1000.0
    stop = series.timestamps_ms[-1] / 1000.0
    n = int(np.floor((stop - start) * fps + 1e-9)) + 1
    return [start + i / fps for i in range(n)]
