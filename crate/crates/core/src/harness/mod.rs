//! Experiment presets, sweeps over total traffic, and result emission.

mod config;
mod output;
mod run;

pub use config::{preset, ArraySource, CurveKind, ExperimentConfig, DEFAULT_SWEEP, PRESETS};
pub use output::{emit_csv, emit_svg, render_csv, render_svg, write_outputs, Manifest};
pub use run::{
    run_comparison, run_during_experiment_curve, run_taguchi_arm, run_trials, series_from_trials,
    Method, ResultSeries, Scoring, SeriesPoint, TaguchiOutcome, Trial,
};
