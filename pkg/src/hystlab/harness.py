"""Experiment orchestration: hyperparameter random search with k-fold CV,
the sequence-level grid, subsequence-level prediction with an optional
autoregressive variant, cross-fleet transfer strategies, and report files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .core import DataSplit, QuantileLevels, load_fleet, split_dataset
from .core import FleetManifest
from .harmonize import (
    Segment,
    SegmentationPolicy,
    apply_minmax,
    extract_stat_features,
    filter_cycles,
    fit_minmax,
    resample_fixed_T,
    resample_to_10hz,
    segment_cycle,
    standardize_units,
    truncate_last,
)
from .dimred import apply_freg, apply_pca, fit_freg, fit_pca
from .metrics import aql as aql_metric
from .metrics import ram_mb, rom_mb
from .models import (
    TrainConfig,
    predict_lqr,
    predict_qgru,
    predict_qgru_autoregressive,
    predict_qxgb,
    repair_quantile_crossing,
    train_lqr,
    train_qgru,
    train_qxgb,
)
from .models.qgru import augment_autoregressive
from .synthdata import load_labels

SEQUENCE_L_MENU = (600, 3000, 6000, None)
SUBSEQUENCE_L_MENU = (100, 600, 3000, 6000)
T_MENU = (10, 60, 120, 240)

REPORT_COLUMNS = ("dimred", "model", "size", "resample", "aql", "rom_mb", "ram_mb")


class TransferStrategy(Enum):
    RETRAIN = "bb"  # train on B, test on B
    ZERO_SHOT = "ab"  # train on A, test on B
    FINE_TUNE = "ftb"  # pretrain on A, fine-tune on B
    JOINT = "joint"  # train on A + B


@dataclass(frozen=True)
class GridSpec:
    """Menus and desk-scale knobs for the experiment grid."""

    L_values: tuple = SEQUENCE_L_MENU
    T_values: tuple = T_MENU
    model_kinds: tuple = ("lqr", "qxgb", "qgru")
    dimred_kinds: tuple = ("pca", "freg")
    n_search_trials: int = 50
    cv_folds: int = 5
    seed: int = 0
    dimred_k: int = 10
    quantiles: QuantileLevels = field(default_factory=QuantileLevels)
    # desk-scale caps applied on top of the search ranges
    rounds_cap: int | None = None
    hidden_cap: int | None = None
    epochs_cap: int | None = None


class LeakageError(AssertionError):
    pass


class RowAudit:
    """Log of sample ids consumed per pipeline phase, for leakage checks."""

    FIT_PHASES = ("scaler_fit", "dimred_fit", "search", "train")

    def __init__(self):
        self.phases: dict[str, set] = {}

    def record(self, phase: str, ids) -> None:
        self.phases.setdefault(phase, set()).update(ids)

    def assert_no_leakage(self, test_ids) -> None:
        test_set = set(test_ids)
        for phase in self.FIT_PHASES:
            overlap = self.phases.get(phase, set()) & test_set
            if overlap:
                raise LeakageError(
                    f"{len(overlap)} test rows leaked into phase {phase!r}"
                )


@dataclass
class HarmonizedData:
    """Labeled segments of one fleet, ready for transformation."""

    fleet_id: str
    segments: list[Segment]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.sample_id for s in self.segments)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label.value for s in self.segments])

    def subset(self, ids) -> list[int]:
        index = {sid: i for i, sid in enumerate(self.ids)}
        return [index[sid] for sid in ids]


def harmonize_fleet(
    fleet_dir: str | Path, policy: SegmentationPolicy | None = None
) -> HarmonizedData:
    """Full front half of the pipeline: load, standardize, filter,
    resample to 10 Hz, and segment with sidecar labels."""
    fleet_dir = Path(fleet_dir)
    manifest = FleetManifest.from_json(fleet_dir / "manifest.json")
    result = load_fleet(manifest)
    labels = load_labels(fleet_dir)
    policy = policy or SegmentationPolicy()
    segments: list[Segment] = []
    cycles = filter_cycles([standardize_units(c) for c in result.cycles])
    for cycle in cycles:
        at_10hz = resample_to_10hz(cycle)

        def source(cycle_id: str, seg_index: int, _close: int) -> float:
            return labels[(cycle_id, seg_index)]

        segments.extend(segment_cycle(at_10hz, policy, source))
    return HarmonizedData(fleet_id=manifest.fleet_id, segments=segments)


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def sample_config(
    kind: str, rng: np.random.Generator, grid: GridSpec, seed: int
) -> TrainConfig:
    """Draw one configuration from the search ranges for a model kind."""
    base = TrainConfig(quantiles=grid.quantiles, seed=seed)
    if kind == "lqr":
        return base.replace(
            l1_strength=float(rng.uniform(0.0, 1.0)),
            learning_rate=0.2,
            max_epochs=800,
            patience=100,
        )
    if kind == "qxgb":
        rounds_hi = grid.rounds_cap or 1000
        return base.replace(
            learning_rate=_log_uniform(rng, 0.005, 0.1),
            max_depth=int(rng.integers(3, 6)),
            subsample=float(rng.uniform(0.6, 1.0)),
            reg_lambda=_log_uniform(rng, 0.1, 10.0),
            reg_alpha=_log_uniform(rng, 0.1, 3.0),
            min_child_weight=float(rng.integers(1, 5)),
            colsample_bytree=float(rng.uniform(0.7, 0.9)),
            n_rounds=int(rng.integers(50, rounds_hi + 1)),
        )
    if kind == "qgru":
        # learning-rate range rescaled for plain momentum SGD, which needs
        # far larger steps than adaptive optimizers on this loss
        hidden_hi = grid.hidden_cap or 64
        return base.replace(
            learning_rate=_log_uniform(rng, 0.02, 0.5),
            hidden_size=int(rng.integers(4, hidden_hi + 1)),
            n_layers=int(rng.integers(1, 3)),
            batch_size=int(rng.integers(8, 33)),
            max_epochs=grid.epochs_cap or 150,
            patience=25,
        )
    raise ValueError(f"unknown model kind {kind!r}")


def _cv_folds(n: int, k: int, seed: int) -> list[np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    return [order[j::k] for j in range(k)]


def _train_predict_stat(
    kind: str,
    x_train_raw: np.ndarray,
    y_train: np.ndarray,
    x_eval_raw: np.ndarray,
    dimred_kind: str | None,
    dimred_k: int,
    config: TrainConfig,
):
    """Fit scaler + dimred on the training rows only, train, and predict."""
    scaler = fit_minmax(x_train_raw)
    x_train = apply_minmax(x_train_raw, scaler)
    x_eval = apply_minmax(x_eval_raw, scaler)
    if dimred_kind == "pca":
        reducer = fit_pca(x_train, k=min(dimred_k, x_train.shape[1]))
        x_train, x_eval = apply_pca(x_train, reducer), apply_pca(x_eval, reducer)
    elif dimred_kind == "freg":
        reducer = fit_freg(x_train, y_train, k=min(dimred_k, x_train.shape[1]))
        x_train, x_eval = apply_freg(x_train, reducer), apply_freg(x_eval, reducer)
    elif dimred_kind not in (None, "none"):
        raise ValueError(f"unknown dimred kind {dimred_kind!r}")
    if kind == "lqr":
        model = train_lqr(x_train, y_train, config)
        preds = predict_lqr(model, x_eval)
    else:
        model = train_qxgb(x_train, y_train, config)
        preds = predict_qxgb(model, x_eval)
    return model, repair_quantile_crossing(preds), x_train.shape[1]


def _train_predict_qgru(
    x_train_raw: np.ndarray,
    y_train: np.ndarray,
    x_eval_raw: np.ndarray,
    config: TrainConfig,
    x_monitor_raw: np.ndarray | None = None,
    y_monitor: np.ndarray | None = None,
):
    scaler = fit_minmax(x_train_raw)
    x_train = apply_minmax(x_train_raw, scaler)
    x_eval = apply_minmax(x_eval_raw, scaler)
    x_mon = (
        apply_minmax(x_monitor_raw, scaler) if x_monitor_raw is not None else None
    )
    config = config.replace(batch_size=min(config.batch_size, x_train.shape[0]))
    model = train_qgru(x_train, y_train, config, x_val=x_mon, y_val=y_monitor)
    preds = predict_qgru(model, x_eval)
    return model, repair_quantile_crossing(preds)


def random_search_cv(
    kind: str,
    x_raw: np.ndarray,
    y: np.ndarray,
    grid: GridSpec,
    dimred_kind: str | None = None,
    n_trials: int | None = None,
) -> TrainConfig:
    """Random search over the model's ranges, scored by mean CV AQL.

    Fold assignment is seeded; ties break toward the earlier trial.
    """
    n_trials = grid.n_search_trials if n_trials is None else n_trials
    if n_trials < 1:
        raise ValueError("need at least one search trial")
    n = y.size
    folds = _cv_folds(n, grid.cv_folds, grid.seed + 101)
    rng = np.random.default_rng(grid.seed + 202)
    best_config, best_score = None, np.inf
    for trial in range(n_trials):
        config = sample_config(kind, rng, grid, seed=grid.seed + trial)
        scores = []
        for j, val_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(n), val_idx)
            if kind == "qgru":
                cfg = config.replace(batch_size=min(config.batch_size, train_idx.size))
                _, preds = _train_predict_qgru(
                    x_raw[train_idx], y[train_idx], x_raw[val_idx], cfg
                )
            else:
                _, preds, _ = _train_predict_stat(
                    kind,
                    x_raw[train_idx],
                    y[train_idx],
                    x_raw[val_idx],
                    dimred_kind,
                    grid.dimred_k,
                    config,
                )
            scores.append(aql_metric(y[val_idx], preds, grid.quantiles))
        score = float(np.mean(scores))
        if score < best_score:
            best_score, best_config = score, config
    return best_config


def _stat_matrix_for(segments: list[Segment], L: int | None) -> np.ndarray:
    return extract_stat_features(truncate_last(segments, L)).values


def _tensor_for(segments: list[Segment], L: int | None, T: int) -> np.ndarray:
    return resample_fixed_T(truncate_last(segments, L), T).values


def _size_str(L: int | None) -> str:
    return "all" if L is None else str(L)


def run_sequence_level(
    data: HarmonizedData, grid: GridSpec, audit: RowAudit | None = None
) -> list[dict]:
    """Tune, retrain on train+val, and test each grid cell on full segments.

    Returns one report row per cell; failed cells carry an 'error' key and
    the run continues.
    """
    for L in grid.L_values:
        if L not in SEQUENCE_L_MENU:
            raise ValueError(f"L={L} outside the sequence-level menu")
    for T in grid.T_values:
        if T not in T_MENU:
            raise ValueError(f"T={T} outside the resampling menu")
    audit = audit if audit is not None else RowAudit()
    ids = data.ids
    split = split_dataset(list(ids), seed=grid.seed)
    idx_train = data.subset(split.train_ids)
    idx_val = data.subset(split.val_ids)
    idx_test = data.subset(split.test_ids)
    idx_trainval = idx_train + idx_val
    y = data.labels
    rows: list[dict] = []

    def run_cell(model_kind: str, dimred_kind: str | None, L, T) -> dict:
        row = {
            "dimred": dimred_kind or "--",
            "model": model_kind,
            "size": _size_str(L),
            "resample": str(T) if T is not None else "--",
        }
        try:
            if model_kind == "qgru":
                x_raw = _tensor_for(data.segments, L, T)
                best = random_search_cv("qgru", x_raw[idx_train], y[idx_train], grid)
                audit.record("search", [ids[i] for i in idx_train])
                model, preds = _train_predict_qgru(
                    x_raw[idx_trainval], y[idx_trainval], x_raw[idx_test], best
                )
                row["ram_mb"] = ram_mb(model, (T, x_raw.shape[2]))
            else:
                x_raw = _stat_matrix_for(data.segments, L)
                best = random_search_cv(
                    model_kind, x_raw[idx_train], y[idx_train], grid, dimred_kind
                )
                audit.record("search", [ids[i] for i in idx_train])
                model, preds, _k = _train_predict_stat(
                    model_kind,
                    x_raw[idx_trainval],
                    y[idx_trainval],
                    x_raw[idx_test],
                    dimred_kind,
                    grid.dimred_k,
                    best,
                )
                row["ram_mb"] = ram_mb(model)
            audit.record("scaler_fit", [ids[i] for i in idx_trainval])
            audit.record("dimred_fit", [ids[i] for i in idx_trainval])
            audit.record("train", [ids[i] for i in idx_trainval])
            audit.record("test", [ids[i] for i in idx_test])
            row["aql"] = aql_metric(y[idx_test], preds, grid.quantiles)
            row["rom_mb"] = rom_mb(model)
        except Exception as exc:  # per-cell failure: mark and continue
            row["error"] = str(exc)
        return row

    for model_kind in grid.model_kinds:
        if model_kind == "qgru":
            for L in grid.L_values:
                for T in grid.T_values:
                    rows.append(run_cell("qgru", None, L, T))
        else:
            for dimred_kind in grid.dimred_kinds:
                for L in grid.L_values:
                    rows.append(run_cell(model_kind, dimred_kind, L, None))
    audit.assert_no_leakage(split.test_ids)
    return rows


def make_subsequences(
    segments: list[Segment], L: int
) -> list[Segment]:
    """Consecutive non-overlapping L-step windows; trailing remainder and
    zero-current windows are dropped. Each window inherits the parent label."""
    out: list[Segment] = []
    for seg in segments:
        n_windows = len(seg) // L
        emitted = 0
        for k in range(n_windows):
            window = seg.channels[k * L : (k + 1) * L]
            if np.all(window[:, 0] == 0.0):
                continue
            out.append(
                Segment(
                    parent_cycle_id=seg.sample_id,
                    segment_index=emitted,
                    channels=window,
                    label=seg.label,
                )
            )
            emitted += 1
    if not out:
        raise ValueError(f"no subsequence of length {L} fits any segment")
    return out


def run_subsequence_level(
    data: HarmonizedData,
    grid: GridSpec,
    autoregressive: bool = False,
    audit: RowAudit | None = None,
) -> list[dict]:
    """QGRU on fixed-length windows; optionally also the autoregressive
    variant fed with the previous window's median prediction.

    Windows of one parent segment stay within one split (grouped split).
    """
    for L in grid.L_values:
        if L not in SUBSEQUENCE_L_MENU:
            raise ValueError(f"L={L} outside the subsequence-level menu")
    audit = audit if audit is not None else RowAudit()
    parent_ids = data.ids
    split = split_dataset(list(parent_ids), seed=grid.seed)
    rows: list[dict] = []
    for L in grid.L_values:
        for T in grid.T_values:
            try:
                rows.extend(
                    _run_subseq_cell(data, grid, L, T, split, autoregressive, audit)
                )
            except Exception as exc:
                rows.append(
                    {
                        "dimred": "--",
                        "model": "qgru",
                        "size": str(L),
                        "resample": str(T),
                        "error": str(exc),
                    }
                )
    audit.assert_no_leakage(split.test_ids)
    return rows


def _group_indices(subs: list[Segment], parents) -> list[int]:
    wanted = set(parents)
    return [i for i, s in enumerate(subs) if s.parent_cycle_id in wanted]


def _run_subseq_cell(
    data: HarmonizedData,
    grid: GridSpec,
    L: int,
    T: int,
    split: DataSplit,
    autoregressive: bool,
    audit: RowAudit,
) -> list[dict]:
    subs = make_subsequences(data.segments, L)
    x_raw = _tensor_for(subs, None, T)
    y = np.array([s.label.value for s in subs])
    sub_ids = [s.sample_id for s in subs]
    idx_train = _group_indices(subs, split.train_ids)
    idx_val = _group_indices(subs, split.val_ids)
    idx_test = _group_indices(subs, split.test_ids)
    idx_trainval = idx_train + idx_val
    best = random_search_cv(
        "qgru", x_raw[idx_train], y[idx_train], grid
    )
    audit.record("search", [sub_ids[i] for i in idx_train])
    audit.record("scaler_fit", [sub_ids[i] for i in idx_trainval])
    audit.record("train", [sub_ids[i] for i in idx_trainval])
    audit.record("test", [sub_ids[i] for i in idx_test])
    rows = []
    model, preds = _train_predict_qgru(
        x_raw[idx_trainval], y[idx_trainval], x_raw[idx_test], best
    )
    rows.append(
        {
            "dimred": "--",
            "model": "qgru",
            "size": str(L),
            "resample": str(T),
            "aql": aql_metric(y[idx_test], preds, grid.quantiles),
            "rom_mb": rom_mb(model),
            "ram_mb": ram_mb(model, (T, x_raw.shape[2])),
        }
    )
    if autoregressive:
        rows.append(
            _run_autoregressive(
                data, subs, x_raw, y, idx_trainval, idx_test, best, grid, L, T
            )
        )
    return rows


def _run_autoregressive(
    data: HarmonizedData,
    subs: list[Segment],
    x_raw: np.ndarray,
    y: np.ndarray,
    idx_trainval: list[int],
    idx_test: list[int],
    config: TrainConfig,
    grid: GridSpec,
    L: int,
    T: int,
) -> dict:
    """Teacher-forced training, own-prediction feedback at inference."""
    # teacher forcing: previous window's true label; 0.0 for the first window
    prev = np.zeros(len(subs))
    for i, s in enumerate(subs):
        if s.segment_index > 0:
            prev[i] = y[i]  # windows inherit the parent label
    scaler = fit_minmax(x_raw[idx_trainval])
    x_scaled = apply_minmax(x_raw, scaler)
    x_aug = augment_autoregressive(x_scaled, prev)
    cfg = config.replace(
        autoregressive=True, batch_size=min(config.batch_size, len(idx_trainval))
    )
    model = train_qgru(x_aug[idx_trainval], y[idx_trainval], cfg)
    # inference: feed back the previous window's median prediction per parent
    by_parent: dict[str, list[int]] = {}
    for i in idx_test:
        by_parent.setdefault(subs[i].parent_cycle_id, []).append(i)
    preds = np.empty((len(idx_test), len(grid.quantiles)))
    pos_of = {i: p for p, i in enumerate(idx_test)}
    for parent, members in by_parent.items():
        members.sort(key=lambda i: subs[i].segment_index)
        chain = predict_qgru_autoregressive(
            model, x_scaled[members]
        )
        for row, i in zip(chain, members):
            preds[pos_of[i]] = row
    preds = repair_quantile_crossing(preds)
    return {
        "dimred": "--",
        "model": "qgru*",
        "size": str(L),
        "resample": str(T),
        "aql": aql_metric(y[idx_test], preds, grid.quantiles),
        "rom_mb": rom_mb(model),
        "ram_mb": ram_mb(model, (T, x_aug.shape[2])),
    }


def run_transfer(
    data_a: HarmonizedData,
    data_b: HarmonizedData,
    strategy: TransferStrategy,
    scaler_choice: str,
    config: TrainConfig,
    L: int | None = None,
    T: int = 60,
    seed: int = 0,
    fine_tune_epochs: int | None = None,
) -> dict:
    """Train a QGRU under one transfer strategy and test on fleet B's test split.

    scaler_choice: 'old' = fitted on A's training rows; 'new' = fitted on
    B's training rows (retrain/zero-shot) or the combined training rows
    (fine-tune/joint).
    """
    if scaler_choice not in ("old", "new"):
        raise ValueError(f"scaler_choice must be 'old' or 'new', got {scaler_choice!r}")
    split_a = split_dataset(list(data_a.ids), seed=seed)
    split_b = split_dataset(list(data_b.ids), seed=seed)
    xa = _tensor_for(data_a.segments, L, T)
    xb = _tensor_for(data_b.segments, L, T)
    ya, yb = data_a.labels, data_b.labels
    a_train = data_a.subset(split_a.train_ids)
    a_val = data_a.subset(split_a.val_ids)
    b_train = data_b.subset(split_b.train_ids)
    b_val = data_b.subset(split_b.val_ids)
    b_test = data_b.subset(split_b.test_ids)

    if scaler_choice == "old":
        scaler = fit_minmax(xa[a_train], fitted_on=data_a.fleet_id)
    elif strategy in (TransferStrategy.FINE_TUNE, TransferStrategy.JOINT):
        scaler = fit_minmax(
            np.concatenate([xa[a_train], xb[b_train]]), fitted_on="combined"
        )
    else:
        scaler = fit_minmax(xb[b_train], fitted_on=data_b.fleet_id)

    sxa = apply_minmax(xa, scaler)
    sxb = apply_minmax(xb, scaler)
    config = config.replace(seed=seed)

    def fit(x, y, x_val, y_val, initial=None, cfg=config):
        cfg = cfg.replace(batch_size=min(cfg.batch_size, x.shape[0]))
        return train_qgru(x, y, cfg, x_val=x_val, y_val=y_val, initial=initial)

    if strategy is TransferStrategy.RETRAIN:
        model = fit(sxb[b_train], yb[b_train], sxb[b_val], yb[b_val])
    elif strategy is TransferStrategy.ZERO_SHOT:
        model = fit(sxa[a_train], ya[a_train], sxa[a_val], ya[a_val])
    elif strategy is TransferStrategy.FINE_TUNE:
        pre = fit(sxa[a_train], ya[a_train], sxa[a_val], ya[a_val])
        ft_cfg = config.replace(
            learning_rate=0.1 * config.learning_rate,
            max_epochs=(
                fine_tune_epochs if fine_tune_epochs is not None else config.max_epochs
            ),
        )
        if ft_cfg.max_epochs == 0:
            model = pre
        else:
            model = fit(
                sxb[b_train], yb[b_train], sxb[b_val], yb[b_val],
                initial=pre, cfg=ft_cfg,
            )
    elif strategy is TransferStrategy.JOINT:
        x_joint = np.concatenate([sxa[a_train], sxb[b_train]])
        y_joint = np.concatenate([ya[a_train], yb[b_train]])
        model = fit(x_joint, y_joint, sxb[b_val], yb[b_val])
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    preds = repair_quantile_crossing(predict_qgru(model, sxb[b_test]))
    return {
        "strategy": strategy.value,
        "scaler": scaler_choice,
        "aql": aql_metric(yb[b_test], preds, config.quantiles),
        "n_test": len(b_test),
    }


def transfer_study(
    data_a: HarmonizedData,
    data_b: HarmonizedData,
    config: TrainConfig,
    L: int | None = None,
    T: int = 60,
    seed: int = 0,
) -> list[dict]:
    """All strategy x scaler combinations, with percent change vs the
    retrain/old baseline."""
    rows = []
    for strategy in TransferStrategy:
        for scaler_choice in ("old", "new"):
            rows.append(
                run_transfer(data_a, data_b, strategy, scaler_choice, config, L, T, seed)
            )
    baseline = next(
        r["aql"] for r in rows if r["strategy"] == "bb" and r["scaler"] == "old"
    )
    for r in rows:
        r["change_pct"] = 100.0 * (r["aql"] - baseline) / baseline
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(
    tables: dict[str, list[dict]],
    out_dir: str | Path,
    data: HarmonizedData | None = None,
) -> list[Path]:
    """Write each table as CSV plus, when segment data is given, the
    plot-data files for the fleet-statistics panels (label histogram,
    per-segment current extremes, normalized rest voltage vs temperature,
    duration histogram)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for name, rows in tables.items():
        path = out_dir / f"{name}.csv"
        if not rows or "model" in rows[0]:
            columns = REPORT_COLUMNS
            if any("error" in r for r in rows):
                columns = columns + ("error",)
        else:
            columns = tuple(rows[0].keys())
        with open(path, "w") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(row.get(c, "")) for c in columns) + "\n")
        written.append(path)
    if data is not None:
        written.extend(_emit_fleet_panels(data, out_dir))
    return written


def _emit_fleet_panels(data: HarmonizedData, out_dir: Path) -> list[Path]:
    segs = data.segments
    labels = data.labels
    currents_min = [float(s.channels[:, 0].min()) for s in segs]
    currents_max = [float(s.channels[:, 0].max()) for s in segs]
    rest_v = np.array([float(s.channels[0, 1]) for s in segs])
    v_span = rest_v.max() - rest_v.min() if len(segs) > 1 else 1.0
    norm_v = (rest_v - rest_v.min()) / (v_span if v_span > 0 else 1.0)
    temp_mean = [float(s.channels[:, 2].mean()) for s in segs]
    duration_h = [len(s) / 36000.0 for s in segs]
    frames = {
        "panel_label_hist": pd.DataFrame({"label": labels}),
        "panel_current_extremes": pd.DataFrame(
            {"min_current_a": currents_min, "max_current_a": currents_max}
        ),
        "panel_ocv_temperature": pd.DataFrame(
            {"normalized_ocv": norm_v, "temperature_c": temp_mean}
        ),
        "panel_duration_hist": pd.DataFrame({"duration_h": duration_h}),
    }
    written = []
    for name, df in frames.items():
        path = out_dir / f"{name}.csv"
        df.to_csv(path, index=False)
        written.append(path)
    return written


def run_config_file(path: str | Path) -> dict:
    """Drive a full run from one JSON config; see the CLI for the schema."""
    doc = json.loads(Path(path).read_text())
    grid = GridSpec(
        L_values=tuple(None if v in ("all", None) else int(v) for v in doc.get("L_values", [600])),
        T_values=tuple(doc.get("T_values", [60])),
        model_kinds=tuple(doc.get("models", ["lqr", "qxgb", "qgru"])),
        dimred_kinds=tuple(doc.get("dimred", ["pca", "freg"])),
        n_search_trials=doc.get("n_search_trials", 5),
        seed=doc.get("seed", 0),
        dimred_k=doc.get("dimred_k", 10),
        rounds_cap=doc.get("rounds_cap"),
        hidden_cap=doc.get("hidden_cap"),
        epochs_cap=doc.get("epochs_cap"),
    )
    out_dir = Path(doc["output_dir"])
    data = harmonize_fleet(doc["fleet_dir"])
    tables = {}
    if doc.get("sequence_level", True):
        tables["sequence_level"] = run_sequence_level(data, grid)
    if doc.get("subsequence_level", False):
        sub_grid = GridSpec(
            L_values=tuple(doc.get("subseq_L_values", [600])),
            T_values=grid.T_values,
            model_kinds=("qgru",),
            n_search_trials=grid.n_search_trials,
            seed=grid.seed,
            rounds_cap=grid.rounds_cap,
            hidden_cap=grid.hidden_cap,
            epochs_cap=grid.epochs_cap,
        )
        tables["subsequence_level"] = run_subsequence_level(
            data, sub_grid, autoregressive=doc.get("autoregressive", False)
        )
    emit_report(tables, out_dir, data=data)
    return {"tables": {k: len(v) for k, v in tables.items()}, "output_dir": str(out_dir)}
