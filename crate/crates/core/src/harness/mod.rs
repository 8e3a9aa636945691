//! Desk-scale inpainting harness: a linear stencil trainer that plugs in the
//! selectors, and the analysis experiments built on it.

mod dataset;
mod model;
mod studies;
mod train;

pub use dataset::{synthetic_split, synthetic_textured, Dataset};
pub use model::{masked_l1_loss, Prediction, ToyInpainter};
pub use studies::{
    correlation_study, deciles, median, overhead, pearson, selection_bias_study, sweep_ratio,
    synthetic_bias_pool, timing_runs, timing_study, BiasConfig, BiasReport, CorrelationRow, CorrelationStudy,
    SweepRow, TimingRow, EARLY_PHASE, TIMING_BLOCK, TIMING_WARMUP,
};
pub use train::{evaluate, train, TrainConfig, TrainOutcome, TrainRecord};
