//! Statistics, simulation and forensics for CHSH Bell-test trial records.
//!
//! - [`events`]: trial model, setting tallies, joint outcome counts, bundled data.
//! - [`ingest`]: canonical text files and raw matrix import.
//! - [`stats`]: correlators, CHSH S, win count k, tail probabilities, no-signaling.
//! - [`lhv`]: local-hidden-variable mixtures and postselection policies.
//! - [`harness`]: seeded multi-run Monte Carlo and removal sweeps.

pub mod events;
pub mod harness;
pub mod ingest;
pub mod lhv;
pub mod stats;

pub use events::{fixture_hensen_245, Cell, Dataset, JointCounts, Outcome, OutcomePair, Setting, SettingTally, Trial};
pub use harness::{monte_carlo, run_once, sweep, SimConfig, SimReport, SweepRow};
pub use ingest::{import_matrix, read_canonical, write_canonical, ColumnMap, IngestError, OutcomeEncoding};
pub use lhv::{apply_postselection, canonical_saturating_mixture, Mixture, PostselectionPolicy, RemovalMode, Strategy};
pub use stats::{chsh, ChshReport, NoSignalReport, StatsError};
