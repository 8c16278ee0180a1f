"""Quickstart: generate a small synthetic fleet, harmonize it, and train a
linear quantile model on per-segment statistical features.

Run from the repository root:

    python3 demos/01_quickstart.py
"""

from pathlib import Path

from hystlab.core import QuantileLevels, split_dataset
from hystlab.dimred import apply_freg, fit_freg
from hystlab.harmonize import apply_minmax, extract_stat_features, fit_minmax
from hystlab.harness import harmonize_fleet
from hystlab.metrics import coverage, evaluate_predictions
from hystlab.models import TrainConfig, predict_lqr, repair_quantile_crossing, train_lqr
from hystlab.synthdata import fleet_a_spec, generate_fleet

out = Path("demo_output/quickstart")
fleet_dir = out / "fleet"

# 80 driving cycles of the LFP-like fleet A preset
generate_fleet(fleet_a_spec(n_cycles=80, seed=5), fleet_dir, n_workers=4)
data = harmonize_fleet(fleet_dir)
print(f"harmonized {len(data.segments)} segments from {fleet_dir}")

# features, split, scale, select
x_raw = extract_stat_features(data.segments).values
y = data.labels
split = split_dataset(list(data.ids), seed=0)
idx = {sid: i for i, sid in enumerate(data.ids)}
tr = [idx[s] for s in split.train_ids + split.val_ids]
te = [idx[s] for s in split.test_ids]

scaler = fit_minmax(x_raw[tr])
x_tr = apply_minmax(x_raw[tr], scaler)
x_te = apply_minmax(x_raw[te], scaler)
selector = fit_freg(x_tr, y[tr], k=10)
x_tr, x_te = apply_freg(x_tr, selector), apply_freg(x_te, selector)

config = TrainConfig(learning_rate=0.2, max_epochs=400, patience=50, l1_strength=0.01)
model = train_lqr(x_tr, y[tr], config)
preds = repair_quantile_crossing(predict_lqr(model, x_te))

report = evaluate_predictions(y[te], preds, QuantileLevels(), model)
print(f"test AQL          {report.aql:.4f}")
print(f"90% coverage      {coverage(y[te], preds[:, 0], preds[:, -1]):.3f}")
print(f"selected features {[int(i) for i in selector.selected_indices]}")
