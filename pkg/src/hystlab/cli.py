"""Command-line driver: generate | harmonize | train | evaluate | grid |
transfer | report.

Exit codes: 0 success, 1 runtime failure, 2 usage error. All commands take
--seed and --out; outputs are deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np
import pandas as pd

from .core import QuantileLevels, split_dataset
from .dimred import (
    FRegSelector,
    PcaProjector,
    apply_freg,
    apply_pca,
    fit_freg,
    fit_pca,
)
from .harmonize import (
    MinMaxScalerParams,
    SeqTensor,
    apply_minmax,
    extract_stat_features,
    fit_minmax,
    resample_fixed_T,
    truncate_last,
)
from .harness import (
    GridSpec,
    TransferStrategy,
    harmonize_fleet,
    run_config_file,
    run_transfer,
    emit_report,
)
from .metrics import evaluate_predictions
from .models import (
    TrainConfig,
    load_model,
    predict_lqr,
    predict_qgru,
    predict_qxgb,
    repair_quantile_crossing,
    save_model,
    train_lqr,
    train_qgru,
    train_qxgb,
)
from .synthdata import generate_fleet, spec_from_json


def worker_count() -> int:
    """Worker cap from HYSTLAB_THREADS, defaulting to the machine's cores."""
    raw = os.environ.get("HYSTLAB_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError("HYSTLAB_THREADS must be >= 1")
    return n


def _parse_L(text: str):
    return None if text.lower() == "all" else int(text)


def _load_train_config(path: str | None, seed: int) -> TrainConfig:
    if path is None:
        return TrainConfig(seed=seed)
    doc = json.loads(Path(path).read_text())
    if "quantiles" in doc:
        doc["quantiles"] = QuantileLevels(tuple(doc["quantiles"]))
    known = {f.name for f in dataclass_fields(TrainConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig(**doc).replace(seed=seed)


def _cmd_generate(args) -> int:
    spec = spec_from_json(args.spec)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    generate_fleet(spec, args.out, n_workers=worker_count())
    print(f"wrote fleet {spec.fleet_id} ({spec.n_cycles} cycles) to {args.out}")
    return 0


def _cmd_harmonize(args) -> int:
    data = harmonize_fleet(args.fleet)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    segments = truncate_last(data.segments, _parse_L(args.L))
    pd.DataFrame(
        {"sample_id": [s.sample_id for s in segments],
         "label": [s.label.value for s in segments]}
    ).to_csv(out / "samples.csv", index=False)
    if args.mode == "stats":
        extract_stat_features(segments).to_csv(out / "features.csv")
    else:
        resample_fixed_T(segments, args.T).save(out / "tensor.bin")
    meta = {"mode": args.mode, "L": args.L, "T": args.T, "fleet_id": data.fleet_id}
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    print(f"harmonized {len(segments)} segments into {out} ({args.mode} mode)")
    return 0


def _load_harmonized(data_dir: Path):
    meta = json.loads((data_dir / "meta.json").read_text())
    samples = pd.read_csv(data_dir / "samples.csv")
    y = samples["label"].to_numpy(dtype=float)
    if meta["mode"] == "stats":
        x = pd.read_csv(data_dir / "features.csv").to_numpy(dtype=float)
    else:
        x = SeqTensor.load(data_dir / "tensor.bin").values
    return x, y, meta


def _cmd_train(args) -> int:
    data_dir = Path(args.data)
    x, y, meta = _load_harmonized(data_dir)
    config = _load_train_config(args.config, args.seed)
    split = split_dataset(list(range(y.size)), seed=args.seed)
    fit_idx = list(split.train_ids) + list(split.val_ids)
    scaler = fit_minmax(x[fit_idx])
    xs = apply_minmax(x, scaler)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = {"dimred": args.dimred, "seed": args.seed, "mode": meta["mode"]}
    if meta["mode"] == "stats":
        if args.dimred == "pca":
            reducer = fit_pca(xs[fit_idx], k=min(args.k, xs.shape[1]))
            reducer.to_json(str(out) + ".dimred.json")
            xs = apply_pca(xs, reducer)
        elif args.dimred == "freg":
            reducer = fit_freg(xs[fit_idx], y[fit_idx], k=min(args.k, xs.shape[1]))
            reducer.to_json(str(out) + ".dimred.json")
            xs = apply_freg(xs, reducer)
        if args.model == "lqr":
            model = train_lqr(xs[fit_idx], y[fit_idx], config)
        elif args.model == "qxgb":
            model = train_qxgb(xs[fit_idx], y[fit_idx], config)
        else:
            raise ValueError("qgru requires tensor-mode data")
    else:
        if args.model != "qgru":
            raise ValueError(f"{args.model} requires stats-mode data")
        config = config.replace(batch_size=min(config.batch_size, len(fit_idx)))
        model = train_qgru(xs[fit_idx], y[fit_idx], config)
    save_model(model, out)
    scaler.to_json(str(out) + ".scaler.json")
    Path(str(out) + ".meta.json").write_text(json.dumps(sidecar, indent=2))
    print(f"trained {args.model} on {len(fit_idx)} samples -> {out}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    sidecar = json.loads(Path(str(args.model) + ".meta.json").read_text())
    x, y, meta = _load_harmonized(Path(args.data))
    seed = args.seed if args.seed is not None else sidecar["seed"]
    split = split_dataset(list(range(y.size)), seed=seed)
    test_idx = list(split.test_ids)
    scaler = MinMaxScalerParams.from_json(str(args.model) + ".scaler.json")
    xs = apply_minmax(x, scaler)
    if sidecar.get("dimred") == "pca":
        xs = apply_pca(xs, PcaProjector.from_json(str(args.model) + ".dimred.json"))
    elif sidecar.get("dimred") == "freg":
        xs = apply_freg(xs, FRegSelector.from_json(str(args.model) + ".dimred.json"))
    if args.debug_perfect:
        preds = np.repeat(y[test_idx, None], len(model.quantiles), axis=1)
    elif meta["mode"] == "stats":
        predict = predict_lqr if type(model).__name__ == "LqrModel" else predict_qxgb
        preds = repair_quantile_crossing(predict(model, xs[test_idx]))
    else:
        preds = repair_quantile_crossing(predict_qgru(model, xs[test_idx]))
    input_shape = (x.shape[1], x.shape[2]) if x.ndim == 3 else None
    report = evaluate_predictions(
        y[test_idx], preds, model.quantiles, model=model, input_shape=input_shape
    )
    report.to_json(args.out)
    print(f"aql={report.aql!r} coverage={report.coverage_90!r} -> {args.out}")
    return 0


def _cmd_grid(args) -> int:
    summary = run_config_file(args.config)
    print(json.dumps(summary))
    return 0


def _cmd_transfer(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    data_a = harmonize_fleet(doc["fleet_a_dir"])
    data_b = harmonize_fleet(doc["fleet_b_dir"])
    config = TrainConfig(
        learning_rate=doc.get("learning_rate", 0.005),
        hidden_size=doc.get("hidden_size", 12),
        n_layers=doc.get("n_layers", 1),
        batch_size=doc.get("batch_size", 16),
        max_epochs=doc.get("max_epochs", 40),
        patience=doc.get("patience", 8),
    )
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    row = run_transfer(
        data_a,
        data_b,
        TransferStrategy(args.strategy),
        args.scaler,
        config,
        L=doc.get("L"),
        T=doc.get("T", 60),
        seed=seed,
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(row, indent=2))
    print(json.dumps(row))
    return 0


def _cmd_report(args) -> int:
    data = harmonize_fleet(args.in_dir)
    written = emit_report({}, args.out, data=data)
    print(f"wrote {len(written)} plot-data files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hystlab",
        description="Probabilistic hysteresis-factor prediction pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic fleet from a spec JSON")
    p.add_argument("--spec", required=True, help="fleet spec JSON")
    p.add_argument("--out", required=True, help="output fleet directory")
    p.add_argument("--seed", type=int, default=None, help="override spec seed")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("harmonize", help="segment a fleet and emit model inputs")
    p.add_argument("--fleet", required=True, help="fleet directory")
    p.add_argument("--mode", choices=("stats", "tensor"), required=True)
    p.add_argument("--L", default="all", help="truncation length in steps, or 'all'")
    p.add_argument("--T", type=int, default=60, help="resampled steps (tensor mode)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_harmonize)

    p = sub.add_parser("train", help="train one quantile model")
    p.add_argument("--model", choices=("lqr", "qxgb", "qgru"), required=True)
    p.add_argument("--dimred", choices=("pca", "freg", "none"), default="none")
    p.add_argument("--k", type=int, default=10, help="reduced dimension")
    p.add_argument("--config", default=None, help="TrainConfig JSON")
    p.add_argument("--data", required=True, help="harmonized data directory")
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model on the test split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--debug-perfect",
        action="store_true",
        help="feed true labels as predictions (expects AQL 0)",
    )
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("grid", help="run the experiment grid from a run JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="unused; output dir comes from config")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("transfer", help="one transfer strategy / scaler cell")
    p.add_argument("--config", required=True)
    p.add_argument("--strategy", choices=[s.value for s in TransferStrategy], required=True)
    p.add_argument("--scaler", choices=("old", "new"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("report", help="emit fleet-statistics plot data")
    p.add_argument("--in", dest="in_dir", required=True, help="fleet directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
