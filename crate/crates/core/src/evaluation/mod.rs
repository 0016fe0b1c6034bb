//! ROC AUC and average percentile rank per query structure, macro
//! averaging over (structure, negative kind) cells, and the edge-wise
//! enumeration baseline, and the exact-mode oracle comparison.

mod baseline;
mod exactness;
mod metrics;
mod report;

pub use baseline::{enumeration_baseline, fit_baseline_scale, BaselineScorer, ScaleFit, SCALE_GRID};
pub use exactness::{check_exactness, compare_with_oracle, ExactnessReport, Mismatch};
pub use metrics::{apr, auc};
pub use report::{
    evaluate, evaluate_with, CellMetrics, EvalOptions, ExampleRank, MetricReport, ModelScorer,
    NegativeKind, NegativeSelection, Scorer,
};
