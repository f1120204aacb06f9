"""Labeled inertial + context streams: schema, loading, alignment and synthesis.

A dataset file is newline-delimited JSON. Every line is one flat object with
``subject_id``, ``activity``, ``stream`` ("inertial" or "context") and
``timestamp_ms``. Inertial lines add ``device_id``, ``sensor_kind``, ``x``,
``y``, ``z``; context lines add the :class:`ContextSnapshot` attributes, with
the literal string ``"unknown"`` for a missing value.

Consecutive lines sharing ``(subject_id, activity)`` form one
:class:`LabeledRecord` (one activity bout).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

SENSOR_KINDS = ("accelerometer", "gyroscope", "magnetometer")
UNKNOWN = "unknown"

NUMERIC_CONTEXT = ("speed_mps", "height_variation_m", "light_level", "noise_level")
SYMBOLIC_CONTEXT = ("semantic_place", "weather", "transit_proximity", "traffic_level")
CONTEXT_FIELDS = (
    "semantic_place",
    "speed_mps",
    "height_variation_m",
    "weather",
    "transit_proximity",
    "traffic_level",
    "light_level",
    "noise_level",
)

DAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
TIMES_OF_DAY = ("night", "morning", "afternoon", "evening")


class DatasetError(Exception):
    """Base class for dataset problems."""


class ParseError(DatasetError):
    """A line of a dataset file does not follow the schema."""

    def __init__(self, lineno: int, field: str, message: str):
        self.lineno = lineno
        self.field = field
        super().__init__(f"line {lineno}: field {field!r}: {message}")


class ValidationError(DatasetError):
    """Well-formed data that violates the configuration (e.g. unknown activity)."""


class AlignmentError(DatasetError):
    """Streams cannot be put on a common time grid."""


class SensorFrame(NamedTuple):
    timestamp: int
    device_id: str
    sensor_kind: str
    x: float
    y: float
    z: float


def time_of_day(timestamp_ms: float) -> str:
    hour = datetime.fromtimestamp(timestamp_ms / 1000.0, tz=timezone.utc).hour
    return TIMES_OF_DAY[hour // 6]


def day_of_week(timestamp_ms: float) -> str:
    return DAYS[datetime.fromtimestamp(timestamp_ms / 1000.0, tz=timezone.utc).weekday()]


@dataclass(frozen=True)
class ContextSnapshot:
    """Context attributes observed at one instant. ``None`` means unknown.

    ``time_of_day`` and ``day_of_week`` are derived from the timestamp (UTC)
    and therefore never unknown.
    """

    timestamp: int
    semantic_place: str | None = None
    speed_mps: float | None = None
    height_variation_m: float | None = None
    weather: str | None = None
    transit_proximity: bool | None = None
    traffic_level: str | None = None
    light_level: float | None = None
    noise_level: float | None = None

    @property
    def time_of_day(self) -> str:
        return time_of_day(self.timestamp)

    @property
    def day_of_week(self) -> str:
        return day_of_week(self.timestamp)

    @classmethod
    def unknown_at(cls, timestamp: int) -> "ContextSnapshot":
        return cls(timestamp=int(timestamp))


@dataclass
class LabeledRecord:
    subject_id: str
    activity: str
    frames: list[SensorFrame]
    contexts: list[ContextSnapshot]

    @property
    def start_ms(self) -> int:
        return min(self.frames[0].timestamp, self.contexts[0].timestamp)

    def streams(self) -> list[tuple[str, str]]:
        return sorted({(f.device_id, f.sensor_kind) for f in self.frames})


def group_by_subject(records: Iterable[LabeledRecord]) -> dict[str, list[LabeledRecord]]:
    groups: dict[str, list[LabeledRecord]] = {}
    for rec in records:
        groups.setdefault(rec.subject_id, []).append(rec)
    return groups


# --------------------------------------------------------------------------
# file format


def _context_line(subject_id: str, activity: str, snap: ContextSnapshot) -> dict:
    line: dict = {
        "subject_id": subject_id,
        "activity": activity,
        "stream": "context",
        "timestamp_ms": snap.timestamp,
    }
    for name in CONTEXT_FIELDS:
        value = getattr(snap, name)
        line[name] = UNKNOWN if value is None else value
    line["time_of_day"] = snap.time_of_day
    line["day_of_week"] = snap.day_of_week
    return line


def _frame_line(subject_id: str, activity: str, fr: SensorFrame) -> dict:
    return {
        "subject_id": subject_id,
        "activity": activity,
        "stream": "inertial",
        "timestamp_ms": fr.timestamp,
        "device_id": fr.device_id,
        "sensor_kind": fr.sensor_kind,
        "x": fr.x,
        "y": fr.y,
        "z": fr.z,
    }


def iter_lines(records: Iterable[LabeledRecord]) -> Iterable[str]:
    """Serialize records; frames and contexts are merged by timestamp."""
    dumps = json.JSONEncoder(separators=(",", ":"), allow_nan=False).encode
    for rec in records:
        ci = 0
        contexts = rec.contexts
        for fr in rec.frames:
            while ci < len(contexts) and contexts[ci].timestamp < fr.timestamp:
                yield dumps(_context_line(rec.subject_id, rec.activity, contexts[ci]))
                ci += 1
            yield dumps(_frame_line(rec.subject_id, rec.activity, fr))
        for snap in contexts[ci:]:
            yield dumps(_context_line(rec.subject_id, rec.activity, snap))


def write_dataset(records: Iterable[LabeledRecord], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for line in iter_lines(records):
            fh.write(line)
            fh.write("\n")
    return path


def _require(obj: dict, key: str, lineno: int):
    if key not in obj:
        raise ParseError(lineno, key, "missing")
    return obj[key]


def _as_str(obj: dict, key: str, lineno: int) -> str:
    value = _require(obj, key, lineno)
    if not isinstance(value, str) or not value:
        raise ParseError(lineno, key, f"expected non-empty string, got {value!r}")
    return value


def _as_int(obj: dict, key: str, lineno: int) -> int:
    value = _require(obj, key, lineno)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(lineno, key, f"expected integer milliseconds, got {value!r}")
    return value


def _as_float(obj: dict, key: str, lineno: int, optional: bool = False) -> float | None:
    value = _require(obj, key, lineno)
    if optional and value == UNKNOWN:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ParseError(lineno, key, f"expected finite number, got {value!r}")
    return float(value)


def _parse_context(obj: dict, lineno: int) -> ContextSnapshot:
    ts = _as_int(obj, "timestamp_ms", lineno)
    values: dict = {}
    for name in ("semantic_place", "weather", "traffic_level"):
        value = _require(obj, name, lineno)
        if not isinstance(value, str) or not value:
            raise ParseError(lineno, name, f"expected string, got {value!r}")
        values[name] = None if value == UNKNOWN else value
    transit = _require(obj, "transit_proximity", lineno)
    if transit != UNKNOWN and not isinstance(transit, bool):
        raise ParseError(lineno, "transit_proximity", f"expected boolean, got {transit!r}")
    values["transit_proximity"] = None if transit == UNKNOWN else transit
    for name in NUMERIC_CONTEXT:
        values[name] = _as_float(obj, name, lineno, optional=True)
    for name in ("speed_mps", "light_level", "noise_level"):
        if values[name] is not None and values[name] < 0:
            raise ParseError(lineno, name, "must be non-negative")
    snap = ContextSnapshot(timestamp=ts, **values)
    for name in ("time_of_day", "day_of_week"):
        if name in obj and obj[name] != getattr(snap, name):
            raise ParseError(lineno, name, f"does not match timestamp ({getattr(snap, name)!r})")
    return snap


def _parse_frame(obj: dict, lineno: int) -> SensorFrame:
    kind = _as_str(obj, "sensor_kind", lineno)
    if kind not in SENSOR_KINDS:
        raise ParseError(lineno, "sensor_kind", f"unknown sensor kind {kind!r}")
    return SensorFrame(
        _as_int(obj, "timestamp_ms", lineno),
        _as_str(obj, "device_id", lineno),
        kind,
        _as_float(obj, "x", lineno),
        _as_float(obj, "y", lineno),
        _as_float(obj, "z", lineno),
    )


def load_dataset(
    path: str | Path,
    activities: Sequence[str] | None = None,
    streams: Sequence[tuple[str, str]] | None = None,
) -> list[LabeledRecord]:
    """Read a dataset file.

    Parameters
    ----------
    path : path to a newline-delimited JSON dataset.
    activities : allowed activity labels; ``None`` accepts any label.
    streams : allowed ``(device_id, sensor_kind)`` pairs; ``None`` accepts any.

    Returns
    -------
    Records grouped by subject (in order of first appearance) and ordered by
    start time within each subject.

    Raises
    ------
    ParseError
        Malformed line; the message names the line number and field.
    ValidationError
        Activity or stream outside the configuration.
    """
    allowed = set(activities) if activities is not None else None
    allowed_streams = {tuple(s) for s in streams} if streams is not None else None
    records: list[LabeledRecord] = []
    current: LabeledRecord | None = None
    last_ts: dict[tuple[str, str, str], int] = {}
    last_ctx: dict[str, int] = {}

    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, "<line>", f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ParseError(lineno, "<line>", "expected an object")
            subject = _as_str(obj, "subject_id", lineno)
            activity = _as_str(obj, "activity", lineno)
            if allowed is not None and activity not in allowed:
                raise ValidationError(
                    f"line {lineno}: activity {activity!r} is not in the configured activity set"
                )
            stream = _require(obj, "stream", lineno)
            if current is None or current.subject_id != subject or current.activity != activity:
                current = LabeledRecord(subject, activity, [], [])
                records.append(current)
            if stream == "inertial":
                fr = _parse_frame(obj, lineno)
                if allowed_streams is not None and (fr.device_id, fr.sensor_kind) not in allowed_streams:
                    raise ValidationError(
                        f"line {lineno}: stream {(fr.device_id, fr.sensor_kind)} is not in the device manifest"
                    )
                key = (subject, fr.device_id, fr.sensor_kind)
                if key in last_ts and fr.timestamp <= last_ts[key]:
                    raise ParseError(lineno, "timestamp_ms", "not strictly increasing within its stream")
                last_ts[key] = fr.timestamp
                current.frames.append(fr)
            elif stream == "context":
                snap = _parse_context(obj, lineno)
                if subject in last_ctx and snap.timestamp <= last_ctx[subject]:
                    raise ParseError(lineno, "timestamp_ms", "context timestamps not strictly increasing")
                last_ctx[subject] = snap.timestamp
                current.contexts.append(snap)
            else:
                raise ParseError(lineno, "stream", f"expected 'inertial' or 'context', got {stream!r}")

    for rec in records:
        if not rec.frames or not rec.contexts:
            raise ValidationError(
                f"record ({rec.subject_id}, {rec.activity}) needs both inertial and context lines"
            )
    ordered: list[LabeledRecord] = []
    for group in group_by_subject(records).values():
        ordered.extend(sorted(group, key=lambda r: r.start_ms))
    return ordered


# --------------------------------------------------------------------------
# alignment


@dataclass
class AlignedFrames:
    """Frames resampled onto a common grid.

    ``values`` has one row per grid instant and three columns (x, y, z) per
    stream, in the order of ``streams``.
    """

    timestamps: np.ndarray
    values: np.ndarray
    streams: tuple[tuple[str, str], ...]
    grid_hz: float

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def columns(self) -> list[str]:
        return [f"{d}.{k}.{a}" for d, k in self.streams for a in "xyz"]


def _stream_arrays(frames: Iterable[SensorFrame]) -> dict[tuple[str, str], tuple[np.ndarray, np.ndarray]]:
    buckets: dict[tuple[str, str], list[SensorFrame]] = {}
    for fr in frames:
        buckets.setdefault((fr.device_id, fr.sensor_kind), []).append(fr)
    out = {}
    for key, items in buckets.items():
        arr = np.asarray([(f.timestamp, f.x, f.y, f.z) for f in items], dtype=float)
        out[key] = (arr[:, 0], arr[:, 1:])
    return out


def align_streams(
    frames: Iterable[SensorFrame],
    grid_hz: float = 50.0,
    streams: Sequence[tuple[str, str]] | None = None,
) -> AlignedFrames:
    """Resample every stream onto one grid by holding the latest earlier sample.

    The grid starts at the latest stream start and runs, at ``grid_hz``, up to
    and including the earliest stream end.
    """
    if grid_hz <= 0:
        raise ValueError("grid_hz must be positive")
    data = _stream_arrays(frames)
    keys = tuple(tuple(s) for s in streams) if streams is not None else tuple(sorted(data))
    if not keys:
        raise AlignmentError("no inertial streams to align")
    missing = [k for k in keys if k not in data]
    if missing:
        raise AlignmentError(f"missing streams: {missing}")

    start = max(data[k][0][0] for k in keys)
    end = min(data[k][0][-1] for k in keys)
    if start > end:
        raise AlignmentError(f"streams do not overlap (latest start {start}, earliest end {end})")
    step = 1000.0 / grid_hz
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    grid = start + np.arange(n) * step

    cols = []
    for key in keys:
        ts, vals = data[key]
        idx = np.searchsorted(ts, grid, side="right") - 1
        cols.append(vals[idx])
    return AlignedFrames(grid, np.hstack(cols), keys, float(grid_hz))


# --------------------------------------------------------------------------
# synthesis


@dataclass
class SensorMotion:
    """One sensor's synthetic signal: ``mean + amplitude * sin(2 pi f t + phase) + noise``."""

    mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    amplitude: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise: tuple[float, float, float] = (0.1, 0.1, 0.1)
    frequency_hz: float = 1.0


@dataclass
class ContextGenerator:
    """Per-activity distribution of raw context values.

    Symbolic attributes are probability tables (the key ``"unknown"`` yields a
    missing value; ``transit_proximity`` uses keys ``"true"``/``"false"``).
    Numeric attributes are uniform ranges ``(low, high)``, each independently
    missing with probability ``p_unknown``.
    """

    semantic_place: dict[str, float] = field(default_factory=lambda: {UNKNOWN: 1.0})
    weather: dict[str, float] = field(default_factory=lambda: {UNKNOWN: 1.0})
    transit_proximity: dict[str, float] = field(default_factory=lambda: {UNKNOWN: 1.0})
    traffic_level: dict[str, float] = field(default_factory=lambda: {UNKNOWN: 1.0})
    speed_mps: tuple[float, float] | None = None
    height_variation_m: tuple[float, float] | None = None
    light_level: tuple[float, float] | None = None
    noise_level: tuple[float, float] | None = None
    p_unknown: float = 0.0


@dataclass
class ActivityProfile:
    motion: str
    context: ContextGenerator
    minutes: float


@dataclass
class SynthesisProfile:
    """Everything needed to synthesize a labeled multi-subject dataset.

    ``minutes`` budgets are dataset totals, split evenly over subjects.
    ``motions`` maps a generator name to per-sensor-kind parameters; several
    activities may share one motion generator.
    """

    motions: dict[str, dict[str, SensorMotion]]
    activities: dict[str, ActivityProfile]
    devices: tuple[str, ...] = ("phone",)
    sensors: tuple[str, ...] = ("accelerometer", "gyroscope")
    device_gain: dict[str, float] = field(default_factory=dict)
    sample_hz: float = 50.0
    context_period_ms: int = 5000
    subject_variation: float = 0.1
    start_ms: int = 1551690000000  # 2019-03-04 09:00 UTC
    seed: int = 0

    def validate(self) -> None:
        if self.sample_hz <= 0 or self.sample_hz > 1000:
            raise ValueError("sample_hz must be in (0, 1000]")
        if self.context_period_ms <= 0:
            raise ValueError("context_period_ms must be positive")
        for kind in self.sensors:
            if kind not in SENSOR_KINDS:
                raise ValueError(f"unknown sensor kind {kind!r}")
        for name, act in self.activities.items():
            if not act.minutes > 0:
                raise ValueError(f"{name}: duration budget must be positive")
            if act.motion not in self.motions:
                raise ValueError(f"{name}: unknown motion generator {act.motion!r}")
            missing = set(self.sensors) - set(self.motions[act.motion])
            if missing:
                raise ValueError(f"motion {act.motion!r} lacks sensors {sorted(missing)}")
            ctx = act.context
            for attr in SYMBOLIC_CONTEXT:
                table = getattr(ctx, attr)
                if not table or any(p < 0 for p in table.values()):
                    raise ValueError(f"{name}.{attr}: probabilities must be non-negative")
                if abs(sum(table.values()) - 1.0) > 1e-9:
                    raise ValueError(f"{name}.{attr}: probabilities sum to {sum(table.values())}, not 1")
            if attr_keys := set(ctx.transit_proximity) - {"true", "false", UNKNOWN}:
                raise ValueError(f"{name}.transit_proximity: bad keys {sorted(attr_keys)}")
            for attr in NUMERIC_CONTEXT:
                rng = getattr(ctx, attr)
                if rng is not None and rng[0] > rng[1]:
                    raise ValueError(f"{name}.{attr}: empty range {rng}")
            if not 0.0 <= ctx.p_unknown <= 1.0:
                raise ValueError(f"{name}: p_unknown outside [0, 1]")

    def scaled(self, factor: float) -> "SynthesisProfile":
        """Copy with every duration budget multiplied by ``factor``."""
        acts = {
            k: ActivityProfile(v.motion, v.context, v.minutes * factor) for k, v in self.activities.items()
        }
        return SynthesisProfile(**{**self.__dict__, "activities": acts})

    def subset(self, activities: Sequence[str]) -> "SynthesisProfile":
        acts = {k: self.activities[k] for k in activities}
        return SynthesisProfile(**{**self.__dict__, "activities": acts})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthesisProfile":
        data = dict(data)
        motions = {
            name: {kind: SensorMotion(**{k: tuple(v) if isinstance(v, list) else v for k, v in p.items()})
                   for kind, p in sensors.items()}
            for name, sensors in data.pop("motions").items()
        }
        activities = {}
        for name, act in data.pop("activities").items():
            ctx = dict(act["context"])
            for attr in NUMERIC_CONTEXT:
                if ctx.get(attr) is not None:
                    ctx[attr] = tuple(ctx[attr])
            activities[name] = ActivityProfile(act["motion"], ContextGenerator(**ctx), float(act["minutes"]))
        for key in ("devices", "sensors"):
            if key in data:
                data[key] = tuple(data[key])
        profile = cls(motions=motions, activities=activities, **data)
        profile.validate()
        return profile


def load_profile(path: str | Path) -> SynthesisProfile:
    with Path(path).open("r", encoding="utf-8") as fh:
        return SynthesisProfile.from_dict(json.load(fh))


def save_profile(profile: SynthesisProfile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict(), indent=2) + "\n", encoding="utf-8")


def _pick(rng: np.random.Generator, table: dict[str, float]) -> str:
    keys = sorted(table)
    probs = np.array([table[k] for k in keys], dtype=float)
    return keys[int(rng.choice(len(keys), p=probs / probs.sum()))]


def _sample_context(rng: np.random.Generator, gen: ContextGenerator, ts: int) -> ContextSnapshot:
    values: dict = {}
    for attr in ("semantic_place", "weather", "traffic_level"):
        v = _pick(rng, getattr(gen, attr))
        values[attr] = None if v == UNKNOWN else v
    transit = _pick(rng, gen.transit_proximity)
    values["transit_proximity"] = None if transit == UNKNOWN else transit == "true"
    for attr in NUMERIC_CONTEXT:
        bounds = getattr(gen, attr)
        missing = rng.random() < gen.p_unknown
        draw = rng.uniform(*bounds) if bounds is not None else 0.0
        values[attr] = None if bounds is None or missing else round(float(draw), 3)
    return ContextSnapshot(timestamp=ts, **values)


def _synth_frames(
    rng: np.random.Generator,
    profile: SynthesisProfile,
    motion: dict[str, SensorMotion],
    start_ms: int,
    n_samples: int,
    amp_scale: float,
    freq_scale: float,
) -> list[SensorFrame]:
    t_ms = start_ms + np.round(np.arange(n_samples) * 1000.0 / profile.sample_hz).astype(np.int64)
    t_s = (t_ms - start_ms) / 1000.0
    phases = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    columns = []
    for device in profile.devices:
        gain = profile.device_gain.get(device, 1.0)
        for kind in profile.sensors:
            m = motion[kind]
            offset = rng.uniform(0.0, 2.0 * np.pi)
            arg = 2.0 * np.pi * m.frequency_hz * freq_scale * t_s[:, None] + phases[None, :] + offset
            sig = (
                np.asarray(m.mean)[None, :]
                + gain * amp_scale * np.asarray(m.amplitude)[None, :] * np.sin(arg)
                + np.asarray(m.noise)[None, :] * rng.standard_normal((n_samples, 3))
            )
            columns.append((device, kind, np.round(sig, 4)))
    frames = []
    ts_list = t_ms.tolist()
    for i, ts in enumerate(ts_list):
        for device, kind, sig in columns:
            x, y, z = sig[i]
            frames.append(SensorFrame(ts, device, kind, float(x), float(y), float(z)))
    return frames


def generate_synthetic(
    profile: SynthesisProfile,
    n_subjects: int,
    path: str | Path | None = None,
) -> list[LabeledRecord]:
    """Synthesize one bout per (subject, activity); optionally write it to ``path``.

    Output is a pure function of ``(profile, n_subjects)``. Each subject does
    its activities once each, in a subject-specific random order, separated by
    10-second gaps. Subjects get their own amplitude/frequency scaling so that
    cross-subject evaluation is not trivial.
    """
    if n_subjects < 1:
        raise ValueError("n_subjects must be >= 1")
    profile.validate()
    rng = np.random.default_rng(profile.seed)
    names = sorted(profile.activities)
    period_ms = 1000.0 / profile.sample_hz
    records: list[LabeledRecord] = []
    var = profile.subject_variation
    for s in range(n_subjects):
        subject = f"s{s + 1:02d}"
        clock = profile.start_ms + s * 86_400_000
        order = [names[i] for i in rng.permutation(len(names))]
        for act in order:
            spec = profile.activities[act]
            total_ms = int(round(spec.minutes * 60_000))
            share = total_ms // n_subjects + (total_ms % n_subjects if s == n_subjects - 1 else 0)
            n_samples = int(round(share / period_ms))
            if n_samples < 1:
                continue
            amp_scale = float(rng.uniform(1.0 - var, 1.0 + var))
            freq_scale = float(rng.uniform(1.0 - var / 2.0, 1.0 + var / 2.0))
            frames = _synth_frames(
                rng, profile, profile.motions[spec.motion], clock, n_samples, amp_scale, freq_scale
            )
            end = frames[-1].timestamp
            contexts = [
                _sample_context(rng, spec.context, ts)
                for ts in range(clock, end + 1, profile.context_period_ms)
            ]
            records.append(LabeledRecord(subject, act, frames, contexts))
            clock = end + int(period_ms) + 10_000
    if path is not None:
        write_dataset(records, path)
    return records


def minutes_per_activity(records: Iterable[LabeledRecord], sample_hz: float) -> dict[str, float]:
    """Minutes of inertial data per activity, counting samples of the first stream."""
    totals: dict[str, float] = {}
    for rec in records:
        first = rec.streams()[0]
        n = sum(1 for f in rec.frames if (f.device_id, f.sensor_kind) == first)
        totals[rec.activity] = totals.get(rec.activity, 0.0) + n / sample_hz / 60.0
    return totals


BUILTIN_PROFILES = ("confusable", "reference")


def builtin_profile(name: str) -> SynthesisProfile:
    """Shipped profiles: ``confusable`` (motion-sharing pairs with distinct
    contexts) and ``reference`` (13 activities with the reference minute budgets)."""
    from importlib import resources

    if name not in BUILTIN_PROFILES:
        raise ValueError(f"unknown builtin profile {name!r}; choose from {BUILTIN_PROFILES}")
    text = resources.files("ctxhar.data").joinpath(f"{name}_profile.json").read_text(encoding="utf-8")
    return SynthesisProfile.from_dict(json.loads(text))
