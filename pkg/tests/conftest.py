"""Shared fixtures: a small deterministic synthetic fleet and cycle builders."""

import numpy as np
import pytest

from hystlab.core import ChannelId, DrivingCycle
from hystlab.synthdata import fleet_a_spec, generate_fleet


@pytest.fixture(scope="session")
def small_fleet_dir(tmp_path_factory):
    """A 30-cycle fleet, enough segments for splitting but quick to build."""
    out = tmp_path_factory.mktemp("small_fleet")
    generate_fleet(fleet_a_spec(n_cycles=30, seed=5), out)
    return out


def make_cycle(
    cycle_id="c0",
    duration_s=10.0,
    rate_hz=10.0,
    current=None,
    voltage=None,
    temperature=None,
    correction_steps=(),
    units=None,
):
    """Hand-built DrivingCycle with constant channels unless overridden."""
    n = int(round(duration_s * rate_hz)) + 1
    t = np.arange(n) / rate_hz
    soc = np.zeros(n, dtype=bool)
    for k in correction_steps:
        soc[k] = True
    channels = {
        ChannelId.BATTERY_CURRENT: np.full(n, 1.0) if current is None else np.asarray(current, dtype=float),
        ChannelId.CELL_VOLTAGE: np.full(n, 3.3) if voltage is None else np.asarray(voltage, dtype=float),
        ChannelId.CELL_TEMPERATURE: np.full(n, 25.0) if temperature is None else np.asarray(temperature, dtype=float),
    }
    return DrivingCycle(
        cycle_id=cycle_id,
        timestamps=t,
        channels=channels,
        soc_correction=soc,
        native_rate_hz=rate_hz,
        units=units
        or {
            ChannelId.BATTERY_CURRENT: "A",
            ChannelId.CELL_VOLTAGE: "V",
            ChannelId.CELL_TEMPERATURE: "degC",
        },
    )
