"""hystlab: probabilistic hysteresis-factor prediction for EV batteries.

Harmonizes heterogeneous driving-cycle time series, extracts features,
trains quantile models (linear, boosted-tree, recurrent), and evaluates
predictive quality and memory footprint, including cross-fleet transfer
experiments on a bundled synthetic fleet generator.
"""

from .core import (
    ChannelId,
    DataSplit,
    DrivingCycle,
    FleetManifest,
    HysteresisLabel,
    QuantileLevels,
    load_fleet,
    split_dataset,
)
from .harmonize import (
    MinMaxScalerParams,
    Segment,
    SegmentationPolicy,
    SeqTensor,
    StatMatrix,
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
from .dimred import (
    FRegSelector,
    PcaProjector,
    apply_freg,
    apply_pca,
    fit_freg,
    fit_pca,
)
from .metrics import EvalReport, aql, coverage, pinball, ram_mb, rom_mb
from .models import (
    LqrModel,
    QgruModel,
    QxgbModel,
    TrainConfig,
    gru_forward,
    load_model,
    predict_lqr,
    predict_qgru,
    predict_qgru_autoregressive,
    predict_qxgb,
    repair_quantile_crossing,
    save_model,
    train_lqr,
    train_qgru,
    train_qxgb,
)
from .synthdata import (
    Chemistry,
    FleetSpec,
    OracleTrace,
    fleet_a_spec,
    fleet_b_spec,
    generate_fleet,
    label_oracle,
)
from .harness import (
    GridSpec,
    HarmonizedData,
    TransferStrategy,
    harmonize_fleet,
    random_search_cv,
    run_sequence_level,
    run_subsequence_level,
    run_transfer,
    transfer_study,
    emit_report,
)

__version__ = "0.1.0"
