//! Experiment runner: config files, the training loop, run records and
//! ablation sweeps.

mod ablation;
pub mod commands;
mod config;
mod record;
mod train;

pub use ablation::{
    expand_grid, run_ablation, AblationCell, AblationGrid, StrategyTag, SummaryRow,
};
pub use config::{
    load_config, DatasetConfig, ExperimentConfig, LandscapeSettings, MaskSettings, ObjectiveConfig,
    RatioSettings, SpectrumSettings, TheorySettings,
};
pub use record::{FinalMetrics, RunRecord, RunStatus, StepRow, CSV_HEADER};
pub use train::{train, TrainedRun};
