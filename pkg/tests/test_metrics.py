import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hystlab.core import QuantileLevels
from hystlab.metrics import (
    aql,
    coverage,
    evaluate_predictions,
    pinball,
    ram_mb,
    rom_mb,
)
from hystlab.models import TrainConfig, train_lqr, train_qxgb
from hystlab.models.qgru import init_qgru
from hystlab.serialize import serialize_model


class TestPinball:
    def test_hand_values(self):
        assert pinball(1.0, 0.0, 0.95) == pytest.approx(0.95)
        assert pinball(0.0, 1.0, 0.95) == pytest.approx(0.05)
        assert pinball(1.0, 0.0, 0.05) == pytest.approx(0.05)
        assert pinball(3.0, 3.0, 0.5) == 0.0

    def test_rejects_bad_tau(self):
        for tau in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                pinball(1.0, 0.0, tau)

    @given(
        y=st.floats(-100, 100),
        y_hat=st.floats(-100, 100),
        tau=st.floats(0.01, 0.99),
    )
    @settings(max_examples=100, deadline=None)
    def test_nonnegative_and_definition(self, y, y_hat, tau):
        loss = float(pinball(y, y_hat, tau))
        assert loss >= 0.0
        expected = tau * (y - y_hat) if y >= y_hat else (1 - tau) * (y_hat - y)
        assert loss == pytest.approx(expected)


class TestAql:
    def test_hand_grid(self):
        # y = [1, 0], predictions per quantile (0.05, 0.5, 0.95)
        y = np.array([1.0, 0.0])
        preds = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, -1.0]])
        q = QuantileLevels()
        # row 1: 0.05*1 + 0.5*0 + 0.05*1 = 0.10
        # row 2: 0.95*1 + 0.5*0 + 0.95*1 = 1.90
        expected = (0.10 + 1.90) / 6.0
        assert aql(y, preds, q) == pytest.approx(expected, abs=1e-15)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            aql(np.zeros(3), np.zeros((3, 2)), QuantileLevels())

    def test_perfect_predictions_zero(self):
        y = np.array([0.2, -0.3, 0.9])
        preds = np.repeat(y[:, None], 3, axis=1)
        assert aql(y, preds, QuantileLevels()) == 0.0


class TestCoverage:
    def test_basic(self):
        y = np.array([0.0, 0.5, 1.0, 2.0])
        lo = np.zeros(4)
        hi = np.ones(4)
        assert coverage(y, lo, hi) == pytest.approx(0.75)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            coverage(np.zeros(3), np.zeros(2), np.zeros(3))


class TestMemoryAccounting:
    def _lqr(self, k=5):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, k))
        y = rng.normal(size=40)
        return train_lqr(x, y, TrainConfig(max_epochs=3))

    def test_rom_equals_serialized_size(self):
        model = self._lqr()
        assert rom_mb(model) == len(serialize_model(model)) / 2**20

    def test_lqr_ram(self):
        assert ram_mb(self._lqr(k=7)) == 7 * 4 / 2**20

    def test_qxgb_ram(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(30, 4))
        model = train_qxgb(x, rng.normal(size=30), TrainConfig(n_rounds=2, max_depth=3))
        assert ram_mb(model) == (4 + 3) * 4 / 2**20

    def test_qgru_ram_needs_input_shape(self):
        model = init_qgru(3, TrainConfig(hidden_size=8, n_layers=2))
        with pytest.raises(ValueError):
            ram_mb(model)
        expected = (10 * 3 + 4 * 8 * 2 + 3) * 4 / 2**20
        assert ram_mb(model, (10, 3)) == expected

    def test_unknown_model_rejected(self):
        with pytest.raises(TypeError):
            ram_mb(object())


class TestEvalReport:
    def test_perfect_predictions(self):
        y = np.array([0.1, 0.2, 0.3])
        preds = np.repeat(y[:, None], 3, axis=1)
        report = evaluate_predictions(y, preds, QuantileLevels())
        assert report.aql == 0.0
        assert report.coverage_90 == 1.0
        assert report.n_samples == 3

    def test_json_round_trip(self, tmp_path):
        y = np.array([0.1, 0.9])
        preds = np.array([[0.0, 0.5, 1.0], [0.0, 0.5, 1.0]])
        report = evaluate_predictions(y, preds, QuantileLevels())
        report.to_json(tmp_path / "report.json")
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["aql"] == report.aql
        assert doc["n_samples"] == 2
        assert set(doc["per_quantile_loss"]) == {"0.05", "0.5", "0.95"}
