"""Synthetic fleet generator and hysteresis labeling oracle.

Stands in for confidential fleet data: cycles are seeded alternations of
rests, drive bouts, and charge bouts; voltage blends two OCV curves through
a one-state hysteresis dynamic; labels are the hysteresis state at each
closing SoC correction.
"""

from __future__ import annotations

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .core import ChannelId, DrivingCycle, FleetManifest
from .harmonize import (
    RESAMPLE_DT,
    SegmentationPolicy,
    resample_to_10hz,
    segment_cycle,
    standardize_units,
)


@dataclass(frozen=True)
class Chemistry:
    """Cell model: charge/discharge OCV tables, hysteresis rate, capacity."""

    ocv_soc: tuple[float, ...]
    ocv_charge_v: tuple[float, ...]
    ocv_discharge_v: tuple[float, ...]
    gamma: float  # hysteresis approach rate per full capacity throughput
    q_cap_ah: float
    resistance_ohm: float = 0.01
    label_noise_std: float = 0.0

    def __post_init__(self):
        soc = np.asarray(self.ocv_soc, dtype=float)
        chg = np.asarray(self.ocv_charge_v, dtype=float)
        dis = np.asarray(self.ocv_discharge_v, dtype=float)
        if not (soc.size == chg.size == dis.size >= 2):
            raise ValueError("OCV tables must be equal length >= 2")
        if np.any(np.diff(soc) <= 0) or np.any(np.diff(chg) <= 0) or np.any(
            np.diff(dis) <= 0
        ):
            raise ValueError("OCV tables must be strictly increasing")
        if np.any(chg < dis):
            raise ValueError("charge OCV curve must lie at or above discharge curve")

    def ocv(self, soc: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Blend the two curves: h = +1 full charge curve, -1 full discharge."""
        chg = np.interp(soc, self.ocv_soc, self.ocv_charge_v)
        dis = np.interp(soc, self.ocv_soc, self.ocv_discharge_v)
        w = 0.5 * (1.0 + h)
        return w * chg + (1.0 - w) * dis


@dataclass(frozen=True)
class FleetSpec:
    """Generator knobs for one synthetic fleet."""

    fleet_id: str
    n_cycles: int
    seed: int
    chemistry: Chemistry
    mean_cycle_hours: float = 0.8
    native_rate_hz: float = 1.0
    drive_current_max_a: float = 120.0
    charge_current_max_a: float = 80.0
    temp_range_c: tuple[float, float] = (-18.3, 48.9)
    p_drive: float = 0.6  # drive vs charge mix inside active phases
    rest_s_range: tuple[float, float] = (450.0, 1200.0)
    active_s_range: tuple[float, float] = (300.0, 1800.0)
    bout_s_range: tuple[float, float] = (20.0, 120.0)
    correction_rest_s: float = 600.0
    current_unit: str = "A"
    voltage_unit: str = "V"
    current_noise_a: float = 1.0
    voltage_noise_v: float = 0.002

    def __post_init__(self):
        if self.n_cycles < 1 or self.mean_cycle_hours <= 0:
            raise ValueError("need n_cycles >= 1 and positive mean duration")
        if self.temp_range_c[0] >= self.temp_range_c[1]:
            raise ValueError("degenerate temperature range")
        if not 0.0 <= self.p_drive <= 1.0:
            raise ValueError("p_drive must lie in [0, 1]")


@dataclass(frozen=True)
class OracleTrace:
    """Per-timestep hysteresis state in [-1, 1] at 10 Hz."""

    h: np.ndarray

    def label_at(self, step: int) -> float:
        return float(self.h[step])


def hysteresis_step(h: float, i_a: float, dt_s: float, chemistry: Chemistry) -> float:
    """One step of the exponential-approach hysteresis dynamic.

    h decays toward +1 under charging (i < 0) and -1 under discharging
    (i > 0) at a rate set by throughput relative to capacity; rest leaves
    h unchanged.
    """
    if i_a == 0.0:
        return h
    q_cap_c = chemistry.q_cap_ah * 3600.0
    decay = np.exp(-abs(i_a) * chemistry.gamma * dt_s / q_cap_c)
    target = 1.0 if i_a < 0 else -1.0
    return decay * h + (1.0 - decay) * target


def _hysteresis_trace(current: np.ndarray, dt_s: float, chemistry: Chemistry) -> np.ndarray:
    q_cap_c = chemistry.q_cap_ah * 3600.0
    decay = np.exp(-np.abs(current) * chemistry.gamma * dt_s / q_cap_c)
    target = np.where(current < 0, 1.0, -1.0)
    target = np.where(current == 0, 0.0, target)
    gain = np.where(current == 0, 0.0, 1.0 - decay)
    h = np.empty(current.size)
    state = 0.0
    for k in range(current.size):
        state = decay[k] * state + gain[k] * target[k]
        h[k] = state
    return h


def label_oracle(cycle_10hz: DrivingCycle, chemistry: Chemistry) -> OracleTrace:
    """Hysteresis state trace for a 10 Hz cycle, starting from h = 0."""
    current = cycle_10hz.channels[ChannelId.BATTERY_CURRENT]
    return OracleTrace(h=_hysteresis_trace(current, RESAMPLE_DT, chemistry))


def _generate_cycle(spec: FleetSpec, index: int) -> DrivingCycle:
    """One cycle at the native rate, in standard units (A / V / degC)."""
    rng = np.random.default_rng(spec.seed ^ (index + 0x9E3779B9))
    dt = 1.0 / spec.native_rate_hz
    duration_s = max(rng.exponential(spec.mean_cycle_hours * 3600.0), 6.0 * spec.rest_s_range[0])
    chem = spec.chemistry
    q_cap_c = chem.q_cap_ah * 3600.0
    s_est = rng.uniform(0.4, 0.7)
    s_start = s_est
    currents: list[np.ndarray] = []
    corrections: list[np.ndarray] = []
    t_accum = 0.0
    while t_accum < duration_s:
        # rest phase; a long enough rest ends with a SoC correction
        rest_s = rng.uniform(*spec.rest_s_range)
        n_rest = max(int(round(rest_s * spec.native_rate_hz)), 1)
        currents.append(np.zeros(n_rest))
        flags = np.zeros(n_rest, dtype=bool)
        if rest_s >= spec.correction_rest_s:
            flags[-1] = True
        corrections.append(flags)
        t_accum += n_rest * dt
        if t_accum >= duration_s:
            break
        # active phase: piecewise-constant drive/charge bouts plus noise;
        # bout direction leans toward charging when SoC runs low, which
        # keeps the cell inside its normal operating window
        active_s = rng.uniform(*spec.active_s_range)
        n_active = max(int(round(active_s * spec.native_rate_hz)), 1)
        phase = np.empty(n_active)
        pos = 0
        while pos < n_active:
            bout_s = rng.uniform(*spec.bout_s_range)
            n_bout = min(max(int(round(bout_s * spec.native_rate_hz)), 1), n_active - pos)
            p_drive = float(np.clip(spec.p_drive + 1.5 * (s_est - 0.55), 0.05, 0.95))
            if rng.random() < p_drive:
                level = rng.uniform(0.15, 1.0) * spec.drive_current_max_a
            else:
                level = -rng.uniform(0.15, 1.0) * spec.charge_current_max_a
            phase[pos : pos + n_bout] = level
            pos += n_bout
            s_est = float(np.clip(s_est - level * n_bout * dt / q_cap_c, 0.05, 0.95))
        phase += rng.normal(0.0, spec.current_noise_a, size=n_active)
        currents.append(phase)
        corrections.append(np.zeros(n_active, dtype=bool))
        t_accum += n_active * dt
    current = np.concatenate(currents)
    soc_flags = np.concatenate(corrections)
    n = current.size
    t = dt * np.arange(n)
    # SoC bookkeeping (bounded) and hysteresis state drive the voltage
    soc = np.empty(n)
    s = s_start
    for k in range(n):
        s = float(np.clip(s - current[k] * dt / q_cap_c, 0.05, 0.95))
        soc[k] = s
    h = _hysteresis_trace(current, dt, chem)
    voltage = (
        chem.ocv(soc, h)
        - current * chem.resistance_ohm
        + rng.normal(0.0, spec.voltage_noise_v, size=n)
    )
    lo, hi = spec.temp_range_c
    temp = np.empty(n)
    tval = rng.uniform(lo + 0.3 * (hi - lo), lo + 0.8 * (hi - lo))
    steps = rng.normal(0.0, 0.01 * (hi - lo) * np.sqrt(dt), size=n)
    for k in range(n):
        tval = float(np.clip(tval + steps[k], lo, hi))
        temp[k] = tval
    return DrivingCycle(
        cycle_id=f"{spec.fleet_id}_cycle{index:04d}",
        timestamps=t,
        channels={
            ChannelId.BATTERY_CURRENT: current,
            ChannelId.CELL_VOLTAGE: voltage,
            ChannelId.CELL_TEMPERATURE: temp,
        },
        soc_correction=soc_flags,
        native_rate_hz=spec.native_rate_hz,
        units={
            ChannelId.BATTERY_CURRENT: "A",
            ChannelId.CELL_VOLTAGE: "V",
            ChannelId.CELL_TEMPERATURE: "degC",
        },
    )


def _cycle_labels(
    cycle: DrivingCycle, spec: FleetSpec, policy: SegmentationPolicy
) -> list[tuple[int, float]]:
    """(segment_index, label) pairs from the 10 Hz oracle trace."""
    at_10hz = resample_to_10hz(cycle)
    trace = label_oracle(at_10hz, spec.chemistry)
    noise_rng = np.random.default_rng(spec.seed ^ zlib.crc32(cycle.cycle_id.encode()))
    out: list[tuple[int, float]] = []

    def source(_cycle_id: str, seg_index: int, close_idx: int) -> float:
        label = trace.label_at(close_idx)
        if spec.chemistry.label_noise_std > 0:
            label += noise_rng.normal(0.0, spec.chemistry.label_noise_std)
        label = float(np.clip(label, -1.0, 1.0))
        out.append((seg_index, label))
        return label

    segment_cycle(at_10hz, policy, source)
    return out


def generate_fleet(
    spec: FleetSpec,
    out_dir: str | Path,
    policy: SegmentationPolicy | None = None,
    write_labels: bool = True,
    n_workers: int = 1,
) -> FleetManifest:
    """Write n_cycles CSV files, a manifest, and a labels sidecar.

    Fully deterministic for a fixed spec: per-cycle RNGs derive from the
    spec seed and cycle index, so worker scheduling cannot change output.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = policy or SegmentationPolicy()
    cur_scale = 1.0 if spec.current_unit == "A" else 1e3
    volt_scale = 1.0 if spec.voltage_unit == "V" else 1e3

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            cycles = list(pool.map(lambda i: _generate_cycle(spec, i), range(spec.n_cycles)))
    else:
        cycles = [_generate_cycle(spec, i) for i in range(spec.n_cycles)]

    files = []
    label_rows = []
    for cycle in cycles:
        df = pd.DataFrame(
            {
                "t_s": cycle.timestamps,
                "battery_current": cycle.channels[ChannelId.BATTERY_CURRENT] * cur_scale,
                "cell_voltage": cycle.channels[ChannelId.CELL_VOLTAGE] * volt_scale,
                "cell_temperature": cycle.channels[ChannelId.CELL_TEMPERATURE],
                "soc_correction": cycle.soc_correction.astype(int),
            }
        )
        path = out_dir / f"{cycle.cycle_id}.csv"
        df.to_csv(path, index=False, float_format="%.6f")
        files.append(
            (
                path,
                {
                    ChannelId.BATTERY_CURRENT: spec.current_unit,
                    ChannelId.CELL_VOLTAGE: spec.voltage_unit,
                    ChannelId.CELL_TEMPERATURE: "degC",
                },
            )
        )
        if write_labels:
            for seg_index, label in _cycle_labels(cycle, spec, policy):
                label_rows.append((cycle.cycle_id, seg_index, label))

    manifest = FleetManifest(fleet_id=spec.fleet_id, files=tuple(files))
    manifest.to_json(out_dir / "manifest.json")
    if write_labels:
        pd.DataFrame(
            label_rows, columns=["cycle_id", "segment_index", "label"]
        ).to_csv(out_dir / "labels.csv", index=False, float_format="%.9f")
    return manifest


def load_labels(fleet_dir: str | Path) -> dict[tuple[str, int], float]:
    """Read the labels sidecar into a (cycle_id, segment_index) -> label map."""
    df = pd.read_csv(Path(fleet_dir) / "labels.csv")
    return {
        (row.cycle_id, int(row.segment_index)): float(row.label)
        for row in df.itertuples()
    }


def _default_chem_a() -> Chemistry:
    """Iron-phosphate-like cell: flat mid-SoC OCV with a wide hysteresis gap,
    so the relaxed voltage is dominated by the hysteresis state rather than
    SoC. This is the regime where hysteresis tracking matters most."""
    return Chemistry(
        ocv_soc=(0.0, 0.05, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0),
        ocv_charge_v=(3.00, 3.25, 3.320, 3.335, 3.350, 3.365, 3.43, 3.60),
        ocv_discharge_v=(2.95, 3.19, 3.265, 3.280, 3.295, 3.310, 3.39, 3.56),
        gamma=28.0,
        q_cap_ah=60.0,
        resistance_ohm=0.0015,
        label_noise_std=0.02,
    )


def _default_chem_b() -> Chemistry:
    """Layered-oxide-like cell: steep OCV, narrow hysteresis gap, slower
    hysteresis dynamics. Deliberately far from chem A to create a real
    cross-fleet distribution shift."""
    return Chemistry(
        ocv_soc=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
        ocv_charge_v=(3.45, 3.60, 3.70, 3.82, 3.98, 4.20),
        ocv_discharge_v=(3.43, 3.58, 3.68, 3.80, 3.96, 4.18),
        gamma=10.0,
        q_cap_ah=85.0,
        resistance_ohm=0.002,
        label_noise_std=0.02,
    )


def fleet_a_spec(n_cycles: int = 200, seed: int = 11, desk: bool = True) -> FleetSpec:
    """Aggressive, shorter-cycle fleet; desk mode shrinks cycle durations."""
    return FleetSpec(
        fleet_id="fleetA",
        n_cycles=n_cycles,
        seed=seed,
        chemistry=_default_chem_a(),
        mean_cycle_hours=0.8 if desk else 30.4,
        native_rate_hz=1.0 if desk else 1.0 / 30.0,
        drive_current_max_a=150.0,
        charge_current_max_a=110.0,
        temp_range_c=(-18.3, 48.9),
        voltage_unit="mV",
    )


def fleet_b_spec(n_cycles: int = 200, seed: int = 23, desk: bool = True) -> FleetSpec:
    """Milder, longer-cycle fleet with a different chemistry."""
    return FleetSpec(
        fleet_id="fleetB",
        n_cycles=n_cycles,
        seed=seed,
        chemistry=_default_chem_b(),
        mean_cycle_hours=1.2 if desk else 47.4,
        native_rate_hz=1.0 if desk else 1.0 / 30.0,
        drive_current_max_a=90.0,
        charge_current_max_a=55.0,
        temp_range_c=(-5.0, 40.0),
        p_drive=0.55,
    )


def spec_from_json(path: str | Path) -> FleetSpec:
    """Read a FleetSpec from JSON, starting from a named preset if given."""
    doc = json.loads(Path(path).read_text())
    preset = doc.pop("preset", None)
    if preset == "fleetA":
        base = fleet_a_spec()
    elif preset == "fleetB":
        base = fleet_b_spec()
    elif preset is None:
        chem = Chemistry(**doc.pop("chemistry"))
        return FleetSpec(chemistry=chem, **{
            k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()
        })
    else:
        raise ValueError(f"unknown preset {preset!r}")
    if "chemistry" in doc:
        base = replace(base, chemistry=Chemistry(**doc.pop("chemistry")))
    doc = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
    return replace(base, **doc)
