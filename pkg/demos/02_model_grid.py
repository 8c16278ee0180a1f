"""Desk-scale experiment grid: compare the three quantile model families on
one fleet and write the report tables plus fleet-statistics panel data.

Run from the repository root (takes a couple of minutes):

    python3 demos/02_model_grid.py
"""

from pathlib import Path

from hystlab.harness import (
    GridSpec,
    RowAudit,
    emit_report,
    harmonize_fleet,
    run_sequence_level,
)
from hystlab.synthdata import fleet_a_spec, generate_fleet

out = Path("demo_output/grid")
fleet_dir = out / "fleet"

generate_fleet(fleet_a_spec(n_cycles=60, seed=11), fleet_dir, n_workers=4)
data = harmonize_fleet(fleet_dir)
print(f"{len(data.segments)} segments")

# trimmed menus keep this a coffee-break run; widen for the full comparison
grid = GridSpec(
    L_values=(600,),
    T_values=(10,),
    n_search_trials=2,
    rounds_cap=150,
    hidden_cap=8,
    epochs_cap=60,
    seed=0,
)
audit = RowAudit()
rows = run_sequence_level(data, grid, audit=audit)

for row in sorted(rows, key=lambda r: r.get("aql", float("inf"))):
    if "error" in row:
        print(f"{row['model']:>5} ({row['dimred']}): failed: {row['error']}")
    else:
        print(
            f"{row['model']:>5} ({row['dimred']:>4})  aql={row['aql']:.4f}  "
            f"rom={row['rom_mb'] * 1024:.1f} KB  ram={row['ram_mb'] * 1024:.1f} KB"
        )

written = emit_report({"sequence_level": rows}, out / "report", data=data)
print("report files:", *[p.name for p in written])
