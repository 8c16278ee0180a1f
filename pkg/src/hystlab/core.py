"""Shared domain types, fleet manifest handling, and dataset splitting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd


class ChannelId(Enum):
    """The three model input channels.

    Current sign convention: negative = charging, positive = discharging.
    """

    BATTERY_CURRENT = "battery_current"
    CELL_VOLTAGE = "cell_voltage"
    CELL_TEMPERATURE = "cell_temperature"


#: Canonical channel order used for feature matrices and tensors.
CHANNEL_ORDER = (
    ChannelId.BATTERY_CURRENT,
    ChannelId.CELL_VOLTAGE,
    ChannelId.CELL_TEMPERATURE,
)

#: Closed set of accepted unit tags per channel.
VALID_UNITS = {"V", "mV", "A", "mA", "degC"}

CSV_COLUMNS = {
    ChannelId.BATTERY_CURRENT: "battery_current",
    ChannelId.CELL_VOLTAGE: "cell_voltage",
    ChannelId.CELL_TEMPERATURE: "cell_temperature",
}


class FleetLoadError(ValueError):
    """Raised for malformed manifests; per-file problems are collected, not raised."""


@dataclass(frozen=True)
class DrivingCycle:
    """One recorded multichannel vehicle time series.

    Channels may be missing before filtering; all present series share one
    length and timestamps are strictly increasing seconds since cycle start.
    """

    cycle_id: str
    timestamps: np.ndarray
    channels: dict[ChannelId, np.ndarray]
    soc_correction: np.ndarray
    native_rate_hz: float
    units: dict[ChannelId, str] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        object.__setattr__(self, "timestamps", t)
        if t.ndim != 1 or t.size < 1:
            raise ValueError(f"{self.cycle_id}: need at least one timestamp")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError(f"{self.cycle_id}: timestamps not strictly increasing")
        chans = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        object.__setattr__(self, "channels", chans)
        for cid, series in chans.items():
            if series.shape != t.shape:
                raise ValueError(f"{self.cycle_id}: channel {cid.value} length mismatch")
        soc = np.asarray(self.soc_correction, dtype=bool)
        object.__setattr__(self, "soc_correction", soc)
        if soc.shape != t.shape:
            raise ValueError(f"{self.cycle_id}: soc_correction length mismatch")
        if self.native_rate_hz <= 0:
            raise ValueError(f"{self.cycle_id}: native_rate_hz must be positive")

    def __len__(self) -> int:
        return self.timestamps.size


@dataclass(frozen=True)
class HysteresisLabel:
    """Weighting in [-1, 1] between the discharge (-1) and charge (+1) OCV curves."""

    value: float

    def __post_init__(self):
        if not -1.0 <= self.value <= 1.0:
            raise ValueError(f"hysteresis label {self.value} outside [-1, 1]")


@dataclass(frozen=True)
class QuantileLevels:
    """Ordered target quantile levels, each in (0, 1)."""

    levels: tuple[float, ...] = (0.05, 0.50, 0.95)

    def __post_init__(self):
        lv = tuple(float(x) for x in self.levels)
        object.__setattr__(self, "levels", lv)
        if not lv:
            raise ValueError("need at least one quantile level")
        if any(not 0.0 < x < 1.0 for x in lv):
            raise ValueError("quantile levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError("quantile levels must be strictly increasing")

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


@dataclass(frozen=True)
class FleetManifest:
    """List of cycle CSV files with per-file channel unit declarations."""

    fleet_id: str
    files: tuple[tuple[Path, dict[ChannelId, str]], ...]

    @classmethod
    def from_json(cls, path: str | Path) -> "FleetManifest":
        path = Path(path)
        doc = json.loads(path.read_text())
        files = []
        for entry in doc["files"]:
            units = {}
            for name, tag in entry.get("units", {}).items():
                if tag not in VALID_UNITS:
                    raise FleetLoadError(f"unknown unit tag {tag!r} in {path}")
                units[ChannelId(name)] = tag
            fpath = Path(entry["path"])
            if not fpath.is_absolute():
                fpath = path.parent / fpath
            files.append((fpath, units))
        return cls(fleet_id=doc["fleet_id"], files=tuple(files))

    def to_json(self, path: str | Path) -> None:
        base = Path(path).resolve().parent

        def portable(p: Path) -> str:
            # store paths relative to the manifest so the fleet can move
            resolved = Path(p).resolve()
            try:
                return str(resolved.relative_to(base))
            except ValueError:
                return str(resolved)

        doc = {
            "fleet_id": self.fleet_id,
            "files": [
                {"path": portable(p), "units": {cid.value: tag for cid, tag in units.items()}}
                for p, units in self.files
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2))


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train/val/test sample id sets from an 80/10/10 shuffle."""

    train_ids: tuple
    val_ids: tuple
    test_ids: tuple
    seed: int


@dataclass
class FleetLoadResult:
    cycles: list[DrivingCycle]
    errors: list[str]

    @property
    def n_rejected(self) -> int:
        return len(self.errors)


def _load_cycle_csv(path: Path, units: dict[ChannelId, str]) -> DrivingCycle:
    df = pd.read_csv(path)
    if "t_s" not in df.columns or "soc_correction" not in df.columns:
        raise ValueError("missing required columns t_s/soc_correction")
    channels = {}
    for cid, col in CSV_COLUMNS.items():
        if col in df.columns:
            channels[cid] = df[col].to_numpy(dtype=float)
    t = df["t_s"].to_numpy(dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("non-finite timestamps")
    for cid, series in channels.items():
        if not np.all(np.isfinite(series)):
            raise ValueError(f"non-finite values in {cid.value}")
    soc = df["soc_correction"].to_numpy()
    if not np.all(np.isin(soc, (0, 1))):
        raise ValueError("soc_correction must be 0/1")
    if t.size > 1:
        dt = np.diff(t)
        rate = 1.0 / float(np.median(dt))
    else:
        rate = 1.0
    return DrivingCycle(
        cycle_id=path.stem,
        timestamps=t,
        channels=channels,
        soc_correction=soc.astype(bool),
        native_rate_hz=rate,
        units=dict(units),
    )


def load_fleet(manifest: FleetManifest) -> FleetLoadResult:
    """Load all cycles listed in a manifest.

    Files that are missing or malformed (bad rows, non-monotone timestamps)
    are rejected individually; loading continues and rejects are reported.
    Unit tags are recorded on each cycle but values are not converted here.
    """
    cycles: list[DrivingCycle] = []
    errors: list[str] = []
    for path, units in manifest.files:
        try:
            if not path.exists():
                raise FileNotFoundError(f"no such file: {path}")
            cycles.append(_load_cycle_csv(path, units))
        except (OSError, ValueError, KeyError) as exc:
            errors.append(f"{path}: {exc}")
    return FleetLoadResult(cycles=cycles, errors=errors)


def split_dataset(
    sample_ids: list,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DataSplit:
    """Deterministic shuffled split; floor-based counts, remainder to train."""
    n = len(sample_ids)
    if n < 10:
        raise ValueError(f"need at least 10 samples to split, got {n}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_val = int(np.floor(fractions[1] * n))
    n_test = int(np.floor(fractions[2] * n))
    n_train = n - n_val - n_test
    ids = [sample_ids[i] for i in order]
    return DataSplit(
        train_ids=tuple(ids[:n_train]),
        val_ids=tuple(ids[n_train : n_train + n_val]),
        test_ids=tuple(ids[n_train + n_val :]),
        seed=seed,
    )
