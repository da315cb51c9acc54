//! End-to-end imitation on the maze: energy-reward policy training with
//! noise-level annealing, and trajectory-metric evaluation.

mod eval;
mod train;

pub use eval::{evaluate, run_episode, write_metrics_csv, Controller, EvalConfig, EvalReport, Episode};
pub use train::{train_near, write_train_log, NearConfig, NearRun, TrainLogRow};
