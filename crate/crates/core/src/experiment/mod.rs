//! Experiment driver: configuration, the training loop, Monte Carlo runs,
//! parameter sweeps and CSV output.

pub mod config;
pub mod output;
pub mod runner;
pub mod selfcheck;

pub use config::{ExperimentConfig, Method, StateMode};
pub use output::{emit_csv, fmt_f64, write_summary, write_traces, SUMMARY_HEADER, TRACE_HEADER};
pub use runner::{
    greedy_ddpg_rate, run_federated_ddpg, run_monte_carlo, run_seed, run_single, scenario_for, static_beams, sweep, MonteCarloResult,
    RunResult, Stats, SweepAxis, SweepPoint,
};
pub use selfcheck::self_check;
