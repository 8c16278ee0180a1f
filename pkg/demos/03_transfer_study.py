"""Cross-fleet transfer: how badly does a recurrent model trained on one
fleet degrade on another chemistry, and how much does fine-tuning recover?

Strategies: bb = retrain on the target fleet, ab = zero-shot transfer,
ftb = fine-tune the source model, joint = train on both fleets pooled.
Each is evaluated with the source-fleet scaler ("old") and a scaler refit
on the target fleet ("new").

Run from the repository root (takes about a minute):

    python3 demos/03_transfer_study.py
"""

from pathlib import Path

from hystlab.harness import harmonize_fleet, transfer_study
from hystlab.models import TrainConfig
from hystlab.synthdata import fleet_a_spec, fleet_b_spec, generate_fleet

out = Path("demo_output/transfer")

generate_fleet(fleet_a_spec(n_cycles=40, seed=11), out / "fleet_a", n_workers=4)
generate_fleet(fleet_b_spec(n_cycles=40, seed=23), out / "fleet_b", n_workers=4)
data_a = harmonize_fleet(out / "fleet_a")
data_b = harmonize_fleet(out / "fleet_b")

config = TrainConfig(
    learning_rate=0.2, hidden_size=8, n_layers=1, batch_size=16, max_epochs=60,
    patience=15,
)
rows = transfer_study(data_a, data_b, config, L=None, T=60, seed=0)

print(f"{'strategy':>8} {'scaler':>6} {'aql':>8} {'vs retrain':>10}")
for row in rows:
    change = row.get("change_pct")
    change_s = f"{change:+.0f}%" if change is not None else "--"
    print(f"{row['strategy']:>8} {row['scaler']:>6} {row['aql']:>8.4f} {change_s:>10}")
