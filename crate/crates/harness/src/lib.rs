//! Experiment harness for the `zakotfs` transceiver: TOML configuration,
//! end-to-end trials, Monte-Carlo BER sweeps, SVG plots, IQ files and the
//! `zakotfs` command-line tool.

pub mod cli;
pub mod config;
pub mod iq;
pub mod selftest;
pub mod svg;
pub mod sweep;
pub mod trial;

pub use config::{ConfigError, ExperimentConfig};
pub use iq::{read_iq, write_iq, IqError, IqFile};
pub use sweep::{aggregate, run_sweep, sweep_to_files, BerCurve, BerPoint, SweepError};
pub use trial::{receive, run_trial, run_trial_detailed, ReceivedFrame, Link, TrialArtifacts, TrialError, TrialReport};
