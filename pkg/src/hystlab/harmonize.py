"""Driving-cycle harmonization: unit standardization, filtering, 10 Hz
resampling, segmentation, truncation, statistical features, fixed-step
tensorization, and min-max scaling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from .core import CHANNEL_ORDER, ChannelId, DrivingCycle, HysteresisLabel

RESAMPLE_HZ = 10.0
RESAMPLE_DT = 1.0 / RESAMPLE_HZ

#: Statistic names in canonical column order (19 per channel).
STAT_NAMES = (
    "min",
    "max",
    "abs_min",
    "abs_max",
    "sum_abs_changes",
    "mean_changes",
    "mean_abs_changes",
    "abs_energy",
    "sum",
    "mean",
    "complexity",
    "sum_positive",
    "sum_negative",
    "mean_positive",
    "mean_negative",
    "n_zeros",
    "rms",
    "first",
    "last",
)

N_STATS = len(STAT_NAMES)

_UNIT_SCALE = {"V": 1.0, "mV": 1e-3, "A": 1.0, "mA": 1e-3, "degC": 1.0}


@dataclass(frozen=True)
class SegmentationPolicy:
    """Rules for opening/closing segments around SoC corrections.

    The minimum segment duration is fixed at 10 s; the relaxation-phase
    detection thresholds are configurable because no canonical values exist.
    """

    relax_current_threshold_A: float = 0.05
    relax_min_duration_s: float = 600.0
    min_segment_duration_s: float = 10.0

    def __post_init__(self):
        if self.relax_current_threshold_A < 0:
            raise ValueError("relax_current_threshold_A must be >= 0")
        if self.relax_min_duration_s <= 0:
            raise ValueError("relax_min_duration_s must be > 0")


@dataclass(frozen=True)
class Segment:
    """A labeled slice of one cycle between SoC corrections, at 10 Hz.

    channels has shape (T', 3) in CHANNEL_ORDER. Segmentation only emits
    segments of >= 100 steps with non-zero current; truncated views of such
    segments may end inside a rest and are still valid instances.
    """

    parent_cycle_id: str
    segment_index: int
    channels: np.ndarray
    label: HysteresisLabel

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        object.__setattr__(self, "channels", ch)
        if ch.ndim != 2 or ch.shape[1] != len(CHANNEL_ORDER):
            raise ValueError("segment channels must be (T', 3)")
        if ch.shape[0] < 2:
            raise ValueError("segment needs at least 2 steps")

    @property
    def sample_id(self) -> str:
        return f"{self.parent_cycle_id}#{self.segment_index}"

    def __len__(self) -> int:
        return self.channels.shape[0]


@dataclass(frozen=True)
class StatMatrix:
    """N x 57 statistical feature matrix with named columns."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    sample_ids: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length must match column count")
        if not np.all(np.isfinite(v)):
            raise ValueError("StatMatrix entries must be finite")

    def to_csv(self, path: str | Path) -> None:
        pd.DataFrame(self.values, columns=list(self.feature_names)).to_csv(
            path, index=False
        )


@dataclass(frozen=True)
class SeqTensor:
    """N x T x F tensor of resampled segments, F = 3."""

    values: np.ndarray
    sample_ids: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 3:
            raise ValueError("SeqTensor must be 3-D (N, T, F)")

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def save(self, path: str | Path) -> None:
        """Flat little-endian float64 blob plus JSON sidecar."""
        path = Path(path)
        self.values.astype("<f8").tofile(path)
        n, t, f = self.values.shape
        sidecar = {
            "N": n,
            "T": t,
            "F": f,
            "feature_order": [c.value for c in CHANNEL_ORDER],
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar))

    @classmethod
    def load(cls, path: str | Path) -> "SeqTensor":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        vals = np.fromfile(path, dtype="<f8").reshape(meta["N"], meta["T"], meta["F"])
        return cls(values=vals)


@dataclass(frozen=True)
class MinMaxScalerParams:
    """Per-feature min/max learned on training rows for unit-interval scaling."""

    per_feature_min: np.ndarray
    per_feature_max: np.ndarray
    fitted_on: str = ""

    def __post_init__(self):
        lo = np.asarray(self.per_feature_min, dtype=float)
        hi = np.asarray(self.per_feature_max, dtype=float)
        object.__setattr__(self, "per_feature_min", lo)
        object.__setattr__(self, "per_feature_max", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("min/max must be 1-D vectors of equal length")
        if np.any(lo > hi):
            raise ValueError("per-feature min must not exceed max")

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "min": self.per_feature_min.tolist(),
                    "max": self.per_feature_max.tolist(),
                    "fitted_on": self.fitted_on,
                }
            )
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "MinMaxScalerParams":
        doc = json.loads(Path(path).read_text())
        return cls(
            per_feature_min=np.array(doc["min"], dtype=float),
            per_feature_max=np.array(doc["max"], dtype=float),
            fitted_on=doc.get("fitted_on", ""),
        )


def standardize_units(cycle: DrivingCycle, units: dict[ChannelId, str] | None = None) -> DrivingCycle:
    """Convert all channels to V / A / degC by pure scaling."""
    if units is None:
        units = cycle.units
    converted = {}
    for cid, series in cycle.channels.items():
        tag = units.get(cid)
        if tag is None:
            raise ValueError(f"{cycle.cycle_id}: no unit tag for {cid.value}")
        if tag not in _UNIT_SCALE:
            raise ValueError(f"{cycle.cycle_id}: unknown unit tag {tag!r}")
        converted[cid] = series * _UNIT_SCALE[tag]
    std_units = {
        ChannelId.BATTERY_CURRENT: "A",
        ChannelId.CELL_VOLTAGE: "V",
        ChannelId.CELL_TEMPERATURE: "degC",
    }
    return DrivingCycle(
        cycle_id=cycle.cycle_id,
        timestamps=cycle.timestamps,
        channels=converted,
        soc_correction=cycle.soc_correction,
        native_rate_hz=cycle.native_rate_hz,
        units={cid: std_units[cid] for cid in converted},
    )


def filter_cycles(cycles: Sequence[DrivingCycle]) -> list[DrivingCycle]:
    """Keep only cycles carrying all three input channels; order preserved."""
    wanted = set(CHANNEL_ORDER)
    return [c for c in cycles if wanted <= set(c.channels)]


def resample_to_10hz(cycle: DrivingCycle) -> DrivingCycle:
    """Linear interpolation onto a 10 Hz grid spanning the original cycle.

    SoC-correction events map to the nearest grid step; colliding events
    shift forward to the next free step so each event appears exactly once.
    """
    t = cycle.timestamps
    if t.size < 2:
        raise ValueError(f"{cycle.cycle_id}: cannot resample a single-point cycle")
    n_steps = int(np.floor((t[-1] - t[0]) / RESAMPLE_DT)) + 1
    grid = t[0] + RESAMPLE_DT * np.arange(n_steps)
    channels = {cid: np.interp(grid, t, series) for cid, series in cycle.channels.items()}
    soc = np.zeros(n_steps, dtype=bool)
    taken: set[int] = set()
    for et in t[cycle.soc_correction]:
        idx = int(np.clip(np.rint((et - t[0]) / RESAMPLE_DT), 0, n_steps - 1))
        while idx in taken and idx < n_steps - 1:
            idx += 1
        taken.add(idx)
        soc[idx] = True
    return DrivingCycle(
        cycle_id=cycle.cycle_id,
        timestamps=grid,
        channels=channels,
        soc_correction=soc,
        native_rate_hz=RESAMPLE_HZ,
        units=dict(cycle.units),
    )


LabelSource = Callable[[str, int, int], float]
"""(cycle_id, segment_index, closing_step_index) -> hysteresis label."""


def _relaxed_before(current: np.ndarray, idx: int, policy: SegmentationPolicy) -> bool:
    """True when |I| stays below the rest threshold for the required duration
    immediately before step idx."""
    need = int(np.ceil(policy.relax_min_duration_s * RESAMPLE_HZ))
    if idx < need:
        return False
    window = current[idx - need : idx]
    return bool(np.all(np.abs(window) < policy.relax_current_threshold_A))


def segment_cycle(
    cycle: DrivingCycle,
    policy: SegmentationPolicy,
    label_source: LabelSource,
) -> list[Segment]:
    """Cut a 10 Hz cycle into labeled segments between SoC corrections.

    A segment opens at the first step after a correction preceded by a
    relaxation phase and closes at the next correction. Candidates shorter
    than 10 s or with identically zero current are discarded, as is a
    trailing open segment with no closing correction.
    """
    if abs(cycle.native_rate_hz - RESAMPLE_HZ) > 1e-9:
        raise ValueError("segment_cycle expects a 10 Hz cycle")
    current = cycle.channels[ChannelId.BATTERY_CURRENT]
    corrections = np.flatnonzero(cycle.soc_correction)
    stacked = np.stack(
        [cycle.channels[cid] for cid in CHANNEL_ORDER], axis=1
    )
    segments: list[Segment] = []
    seg_index = 0
    for k, open_idx in enumerate(corrections):
        if not _relaxed_before(current, open_idx, policy):
            continue
        later = corrections[k + 1 :]
        if later.size == 0:
            break  # trailing open segment: no closing correction
        close_idx = int(later[0])
        start = int(open_idx) + 1
        window = stacked[start : close_idx + 1]
        duration_s = window.shape[0] * RESAMPLE_DT
        if duration_s < policy.min_segment_duration_s:
            continue
        if np.all(window[:, 0] == 0.0):
            continue
        label = float(label_source(cycle.cycle_id, seg_index, close_idx))
        segments.append(
            Segment(
                parent_cycle_id=cycle.cycle_id,
                segment_index=seg_index,
                channels=window,
                label=HysteresisLabel(label),
            )
        )
        seg_index += 1
    return segments


def truncate_last(segments: Sequence[Segment], L: int | None) -> list[Segment]:
    """Keep only the final min(L, T') steps of each segment; None = keep all."""
    if L is None:
        return list(segments)
    if L <= 0:
        raise ValueError("L must be positive")
    out = []
    for seg in segments:
        if len(seg) <= L:
            out.append(seg)
        else:
            out.append(
                Segment(
                    parent_cycle_id=seg.parent_cycle_id,
                    segment_index=seg.segment_index,
                    channels=seg.channels[-L:],
                    label=seg.label,
                )
            )
    return out


def stat_features_1d(x: np.ndarray) -> np.ndarray:
    """The 19 per-channel statistics, in STAT_NAMES order.

    Mean-type statistics divide by the count of contributing elements;
    complexity is the root of summed squared successive differences.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise ValueError("difference statistics need at least 2 points")
    dx = np.diff(x)
    pos = x[x > 0]
    neg = x[x < 0]
    return np.array(
        [
            x.min(),
            x.max(),
            np.abs(x).min(),
            np.abs(x).max(),
            np.abs(dx).sum(),
            dx.mean(),
            np.abs(dx).mean(),
            np.square(x).sum(),
            x.sum(),
            x.mean(),
            np.sqrt(np.square(dx).sum()),
            pos.sum(),
            neg.sum(),
            pos.mean() if pos.size else 0.0,
            neg.mean() if neg.size else 0.0,
            float(np.count_nonzero(x == 0)),
            np.sqrt(np.square(x).mean()),
            x[0],
            x[-1],
        ]
    )


def extract_stat_features(segments: Sequence[Segment]) -> StatMatrix:
    """Per-channel statistics for each segment; columns ordered channel-major."""
    names = tuple(
        f"{cid.value}_{stat}" for cid in CHANNEL_ORDER for stat in STAT_NAMES
    )
    rows = np.empty((len(segments), len(names)))
    for i, seg in enumerate(segments):
        rows[i] = np.concatenate(
            [stat_features_1d(seg.channels[:, j]) for j in range(len(CHANNEL_ORDER))]
        )
    return StatMatrix(
        values=rows,
        feature_names=names,
        sample_ids=tuple(s.sample_id for s in segments),
    )


def resample_fixed_T(segments: Sequence[Segment], T: int) -> SeqTensor:
    """Linear interpolation of each segment at T evenly spaced points
    spanning [first, last] inclusive."""
    if T < 2:
        raise ValueError("T must be at least 2")
    out = np.empty((len(segments), T, len(CHANNEL_ORDER)))
    for i, seg in enumerate(segments):
        n = len(seg)
        src = np.arange(n, dtype=float)
        dst = np.linspace(0.0, n - 1.0, T)
        for j in range(len(CHANNEL_ORDER)):
            out[i, :, j] = np.interp(dst, src, seg.channels[:, j])
    return SeqTensor(values=out, sample_ids=tuple(s.sample_id for s in segments))


def fit_minmax(
    data: StatMatrix | SeqTensor | np.ndarray, fitted_on: str = ""
) -> MinMaxScalerParams:
    """Per-feature extremes over all rows (and all time steps in tensor mode)."""
    v = data if isinstance(data, np.ndarray) else data.values
    if v.size == 0:
        raise ValueError("cannot fit a scaler on empty data")
    if v.ndim == 2:
        lo, hi = v.min(axis=0), v.max(axis=0)
    else:
        lo, hi = v.min(axis=(0, 1)), v.max(axis=(0, 1))
    return MinMaxScalerParams(per_feature_min=lo, per_feature_max=hi, fitted_on=fitted_on)


def apply_minmax(
    data: StatMatrix | SeqTensor | np.ndarray, params: MinMaxScalerParams
) -> StatMatrix | SeqTensor | np.ndarray:
    """Elementwise (x - min)/(max - min); constant features map to 0.

    Out-of-range inputs are deliberately not clamped so that transfer
    experiments with a stale scaler see the raw distribution shift.
    """
    v = data if isinstance(data, np.ndarray) else data.values
    lo, hi = params.per_feature_min, params.per_feature_max
    if v.shape[-1] != lo.size:
        raise ValueError("feature dimension does not match scaler params")
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = (v - lo) / safe
    scaled = np.where(span > 0, scaled, 0.0)
    if isinstance(data, np.ndarray):
        return scaled
    if isinstance(data, StatMatrix):
        return StatMatrix(
            values=scaled, feature_names=data.feature_names, sample_ids=data.sample_ids
        )
    return SeqTensor(values=scaled, sample_ids=data.sample_ids)
