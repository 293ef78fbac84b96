//! End-to-end training of the physical and digital layers under the four
//! regimes, evaluation metrics and multi-seed sweeps.

mod metrics;
mod prepare;
mod regime;
mod run;
mod sweep;

pub use metrics::{mean_std, Metrics};
pub use prepare::PreparedDataset;
pub use regime::{init_physical, project_constraints, Hyperparams, Regime, INIT_JITTER};
pub use run::{
    eval_noise_seed, evaluate, train_regime, train_regime_observed, EpochInfo, SplitMetrics, StepInfo, TrainObserver,
    TrainedRun,
};
pub use sweep::{
    load_run, run_dir, run_sweep, save_run, summary_csv, RunRecord, RunSummary, SweepOptions, SUMMARY_HEADER,
};
