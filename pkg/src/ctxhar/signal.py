"""Inertial preprocessing: median filtering, windowing, features, standardization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import ConfigError
from .ingest import AlignedFrames

AXIS_FEATURES = (
    "mean",
    "variance",
    "std",
    "median",
    "rms",
    "kurtosis",
    "skewness",
    "zero_crossing_rate",
    "n_peaks",
    "energy",
    "range",
)
SENSOR_FEATURES = ("corr_xy", "corr_xz", "corr_yz", "magnitude")
FEATURES_PER_SENSOR = 3 * len(AXIS_FEATURES) + len(SENSOR_FEATURES)  # 37

_DEGENERATE_VAR = 1e-12


def median_filter(stream: Sequence[float] | np.ndarray, kernel: int = 3) -> np.ndarray:
    """Running median along axis 0.

    Near the edges the window shrinks symmetrically (sample ``i`` uses
    half-width ``min(kernel // 2, i, n - 1 - i)``), so it stays centred and
    odd. Works on 1-D sequences and column-wise on 2-D arrays.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"median kernel must be a positive odd integer, got {kernel}")
    x = np.asarray(stream, dtype=float)
    n = x.shape[0]
    if kernel == 1 or n == 0:
        return x.copy()
    half = kernel // 2
    out = np.empty_like(x)
    if n >= kernel:
        windows = sliding_window_view(x, kernel, axis=0)
        out[half : n - half] = np.median(windows, axis=-1)
        edges = list(range(half)) + list(range(n - half, n))
    else:
        edges = list(range(n))
    for i in edges:
        h = min(half, i, n - 1 - i)
        out[i] = np.median(x[i - h : i + h + 1], axis=0)
    return out


def filter_aligned(aligned: AlignedFrames, kernel: int = 3) -> AlignedFrames:
    return AlignedFrames(aligned.timestamps, median_filter(aligned.values, kernel), aligned.streams, aligned.grid_hz)


@dataclass
class Segment:
    start_ms: float
    end_ms: float
    window_seconds: float
    samples: np.ndarray
    streams: tuple[tuple[str, str], ...]
    subject_id: str | None = None
    ground_truth_activity: str | None = None


def segment(
    aligned: AlignedFrames,
    window_seconds: float = 4,
    labels: Sequence[str] | None = None,
    subject_id: str | None = None,
    activity: str | None = None,
) -> list[Segment]:
    """Cut aligned frames into contiguous, non-overlapping windows.

    Window ``i`` covers ``[t0 + i*n*1000, t0 + (i+1)*n*1000)`` ms. A trailing
    partial window is dropped. With per-row ``labels``, windows that straddle
    a label change are dropped and the rest carry their label.
    """
    if window_seconds < 1:
        raise ConfigError("window_seconds must be >= 1")
    rows = int(round(window_seconds * aligned.grid_hz))
    if rows < 1:
        raise ConfigError("window shorter than one grid step")
    n_windows = len(aligned) // rows
    width = window_seconds * 1000.0
    t0 = float(aligned.timestamps[0]) if len(aligned) else 0.0
    segs = []
    for i in range(n_windows):
        lo, hi = i * rows, (i + 1) * rows
        label = activity
        if labels is not None:
            window_labels = set(labels[lo:hi])
            if len(window_labels) != 1:
                continue
            label = window_labels.pop()
        start = t0 + i * width
        segs.append(
            Segment(start, start + width, window_seconds, aligned.values[lo:hi], aligned.streams, subject_id, label)
        )
    return segs


def feature_names(streams: Sequence[tuple[str, str]]) -> tuple[str, ...]:
    names = []
    for device, kind in streams:
        prefix = f"{device}.{kind}"
        for axis in "xyz":
            names.extend(f"{prefix}.{axis}.{stat}" for stat in AXIS_FEATURES)
        names.extend(f"{prefix}.{stat}" for stat in SENSOR_FEATURES)
    return tuple(names)


@dataclass
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.values)

    def concat(self, other: "FeatureVector") -> "FeatureVector":
        return FeatureVector(np.concatenate([self.values, other.values]), self.names + other.names)


def _axis_stats(x: np.ndarray) -> np.ndarray:
    """Per-column statistics of a (samples, columns) block -> (11, columns)."""
    n = x.shape[0]
    mean = x.mean(axis=0)
    dev = x - mean
    m2 = (dev**2).mean(axis=0)
    degenerate = m2 <= _DEGENERATE_VAR
    safe = np.where(degenerate, 1.0, m2)
    m3 = (dev**3).mean(axis=0)
    m4 = (dev**4).mean(axis=0)
    skew = np.where(degenerate, 0.0, m3 / safe**1.5)
    kurt = np.where(degenerate, 0.0, m4 / safe**2 - 3.0)
    energy = (x**2).mean(axis=0)
    centered = np.where(np.abs(dev) <= 1e-12, 0.0, dev)
    crossings = (centered[1:] * centered[:-1] < 0).sum(axis=0) / n
    if n >= 3:
        peaks = ((x[1:-1] > x[:-2]) & (x[1:-1] > x[2:])).sum(axis=0).astype(float)
    else:
        peaks = np.zeros(x.shape[1])
    return np.vstack(
        [
            mean,
            m2,
            np.sqrt(m2),
            np.median(x, axis=0),
            np.sqrt(energy),
            kurt,
            skew,
            crossings,
            peaks,
            energy,
            x.max(axis=0) - x.min(axis=0),
        ]
    )


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da, db = a - a.mean(), b - b.mean()
    va, vb = (da**2).mean(), (db**2).mean()
    if va <= _DEGENERATE_VAR or vb <= _DEGENERATE_VAR:
        return 0.0
    return float(np.clip((da * db).mean() / np.sqrt(va * vb), -1.0, 1.0))


def extract_features(seg: Segment | np.ndarray, streams: Sequence[tuple[str, str]] | None = None) -> FeatureVector:
    """37 features per 3-axis sensor.

    Per axis: mean, variance, std, median, rms, excess kurtosis, skewness,
    zero-crossing rate of the mean-removed signal (sign changes / samples),
    count of strict local maxima, energy (mean square), max - min. Per sensor:
    Pearson correlation of xy, xz, yz and the mean Euclidean norm. Statistics
    undefined on zero-variance input are reported as 0.
    """
    if isinstance(seg, Segment):
        samples, streams = seg.samples, seg.streams
    else:
        samples = np.asarray(seg, dtype=float)
        if streams is None:
            streams = tuple(("dev", f"s{i}") for i in range(samples.shape[1] // 3))
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("cannot extract features from an empty segment")
    k = len(streams)
    if samples.shape[1] != 3 * k:
        raise ValueError(f"segment has {samples.shape[1]} columns, expected {3 * k}")

    stats = _axis_stats(samples)  # (11, 3k)
    out = np.empty(k * FEATURES_PER_SENSOR)
    per_axis = len(AXIS_FEATURES)
    for s in range(k):
        block = samples[:, 3 * s : 3 * s + 3]
        base = s * FEATURES_PER_SENSOR
        out[base : base + 3 * per_axis] = stats[:, 3 * s : 3 * s + 3].T.ravel()
        tail = base + 3 * per_axis
        out[tail] = _pearson(block[:, 0], block[:, 1])
        out[tail + 1] = _pearson(block[:, 0], block[:, 2])
        out[tail + 2] = _pearson(block[:, 1], block[:, 2])
        out[tail + 3] = np.sqrt((block**2).sum(axis=1)).mean()
    return FeatureVector(out, feature_names(streams))


class Standardizer:
    """Running per-feature mean/variance (Welford), sample variance (n - 1)."""

    def __init__(self, dim: int, floor: float = 1e-8):
        self.dim = dim
        self.floor = floor
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return np.maximum(np.sqrt(np.maximum(self.m2, 0.0) / (self.count - 1)), self.floor)

    def update(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        self.count += 1
        delta = values - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (values - self.mean)

    def standardize(self, fv: FeatureVector | np.ndarray, update: bool = False):
        values = fv.values if isinstance(fv, FeatureVector) else np.asarray(fv, dtype=float)
        if values.shape != (self.dim,):
            raise ValueError(f"feature vector has shape {values.shape}, standardizer expects ({self.dim},)")
        if update:
            self.update(values)
        out = values.copy() if self.count < 2 else (values - self.mean) / self.std
        return FeatureVector(out, fv.names) if isinstance(fv, FeatureVector) else out

    def to_dict(self) -> dict:
        return {"dim": self.dim, "floor": self.floor, "count": self.count,
                "mean": self.mean.tolist(), "m2": self.m2.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Standardizer":
        obj = cls(data["dim"], data["floor"])
        obj.count = data["count"]
        obj.mean = np.asarray(data["mean"], dtype=float)
        obj.m2 = np.asarray(data["m2"], dtype=float)
        return obj


def standardize(std: Standardizer, fv: FeatureVector, update: bool = False) -> FeatureVector:
    return std.standardize(fv, update=update)
