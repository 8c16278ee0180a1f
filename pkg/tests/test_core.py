import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hystlab.core import (
    ChannelId,
    DrivingCycle,
    FleetLoadError,
    FleetManifest,
    HysteresisLabel,
    QuantileLevels,
    load_fleet,
    split_dataset,
)

from conftest import make_cycle


class TestDrivingCycle:
    def test_valid_cycle(self):
        c = make_cycle(duration_s=2.0)
        assert len(c) == 21
        assert c.native_rate_hz == 10.0

    def test_rejects_non_monotone_timestamps(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            DrivingCycle(
                cycle_id="bad",
                timestamps=np.array([0.0, 1.0, 1.0]),
                channels={},
                soc_correction=np.zeros(3, dtype=bool),
                native_rate_hz=1.0,
            )

    def test_rejects_channel_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            DrivingCycle(
                cycle_id="bad",
                timestamps=np.array([0.0, 1.0]),
                channels={ChannelId.BATTERY_CURRENT: np.zeros(3)},
                soc_correction=np.zeros(2, dtype=bool),
                native_rate_hz=1.0,
            )

    def test_rejects_soc_length_mismatch(self):
        with pytest.raises(ValueError, match="soc_correction"):
            DrivingCycle(
                cycle_id="bad",
                timestamps=np.array([0.0, 1.0]),
                channels={},
                soc_correction=np.zeros(3, dtype=bool),
                native_rate_hz=1.0,
            )

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError, match="native_rate_hz"):
            DrivingCycle(
                cycle_id="bad",
                timestamps=np.array([0.0, 1.0]),
                channels={},
                soc_correction=np.zeros(2, dtype=bool),
                native_rate_hz=0.0,
            )


class TestHysteresisLabel:
    def test_bounds(self):
        assert HysteresisLabel(1.0).value == 1.0
        assert HysteresisLabel(-1.0).value == -1.0
        with pytest.raises(ValueError):
            HysteresisLabel(1.0001)
        with pytest.raises(ValueError):
            HysteresisLabel(-1.5)


class TestQuantileLevels:
    def test_default(self):
        q = QuantileLevels()
        assert q.levels == (0.05, 0.50, 0.95)
        assert len(q) == 3
        assert list(q) == [0.05, 0.50, 0.95]

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            QuantileLevels((0.0, 0.5))
        with pytest.raises(ValueError):
            QuantileLevels((0.5, 1.0))

    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError):
            QuantileLevels((0.5, 0.5))
        with pytest.raises(ValueError):
            QuantileLevels((0.9, 0.1))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            QuantileLevels(())


class TestFleetManifest:
    def test_json_round_trip_relative_paths(self, tmp_path):
        m = FleetManifest(
            fleet_id="f1",
            files=((tmp_path / "a.csv", {ChannelId.CELL_VOLTAGE: "mV"}),),
        )
        m.to_json(tmp_path / "manifest.json")
        back = FleetManifest.from_json(tmp_path / "manifest.json")
        assert back.fleet_id == "f1"
        assert back.files[0][0] == tmp_path / "a.csv"
        assert back.files[0][1] == {ChannelId.CELL_VOLTAGE: "mV"}

    def test_relative_path_resolved_against_manifest_dir(self, tmp_path):
        doc = {"fleet_id": "f", "files": [{"path": "x.csv", "units": {}}]}
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        m = FleetManifest.from_json(tmp_path / "manifest.json")
        assert m.files[0][0] == tmp_path / "x.csv"

    def test_rejects_unknown_unit(self, tmp_path):
        doc = {
            "fleet_id": "f",
            "files": [{"path": "x.csv", "units": {"cell_voltage": "kV"}}],
        }
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(FleetLoadError):
            FleetManifest.from_json(tmp_path / "manifest.json")


class TestLoadFleet:
    def _write_csv(self, path, n=5, bad_soc=False):
        df = pd.DataFrame(
            {
                "t_s": np.arange(n, dtype=float),
                "battery_current": np.ones(n),
                "cell_voltage": np.full(n, 3.3),
                "cell_temperature": np.full(n, 25.0),
                "soc_correction": [2 if bad_soc else 0] * n,
            }
        )
        df.to_csv(path, index=False)

    def test_loads_good_files_and_collects_errors(self, tmp_path):
        self._write_csv(tmp_path / "good.csv")
        self._write_csv(tmp_path / "bad.csv", bad_soc=True)
        units = {ChannelId.BATTERY_CURRENT: "A"}
        manifest = FleetManifest(
            fleet_id="f",
            files=(
                (tmp_path / "good.csv", units),
                (tmp_path / "bad.csv", units),
                (tmp_path / "missing.csv", units),
            ),
        )
        result = load_fleet(manifest)
        assert len(result.cycles) == 1
        assert result.n_rejected == 2
        assert result.cycles[0].cycle_id == "good"
        assert result.cycles[0].native_rate_hz == pytest.approx(1.0)

    def test_missing_required_columns_rejected(self, tmp_path):
        pd.DataFrame({"t_s": [0.0, 1.0]}).to_csv(tmp_path / "c.csv", index=False)
        manifest = FleetManifest(fleet_id="f", files=((tmp_path / "c.csv", {}),))
        result = load_fleet(manifest)
        assert result.cycles == []
        assert "soc_correction" in result.errors[0]


class TestSplitDataset:
    def test_counts_and_partition(self):
        ids = [f"s{i}" for i in range(103)]
        split = split_dataset(ids, seed=7)
        assert len(split.val_ids) == 10
        assert len(split.test_ids) == 10
        assert len(split.train_ids) == 83
        combined = set(split.train_ids) | set(split.val_ids) | set(split.test_ids)
        assert combined == set(ids)

    def test_deterministic(self):
        ids = list(range(50))
        assert split_dataset(ids, seed=3) == split_dataset(ids, seed=3)
        assert split_dataset(ids, seed=3) != split_dataset(ids, seed=4)

    def test_rejects_small_and_bad_fractions(self):
        with pytest.raises(ValueError):
            split_dataset(list(range(9)))
        with pytest.raises(ValueError):
            split_dataset(list(range(20)), fractions=(0.5, 0.2, 0.2))

    @given(n=st.integers(10, 400), seed=st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_partition_property(self, n, seed):
        ids = list(range(n))
        split = split_dataset(ids, seed=seed)
        parts = [split.train_ids, split.val_ids, split.test_ids]
        assert sum(len(p) for p in parts) == n
        assert set().union(*map(set, parts)) == set(ids)
        assert len(split.val_ids) == n // 10
        assert len(split.test_ids) == n // 10
