//! Simulated crowd workers for corpusforge.
//!
//! Everything in this crate reaches the pipeline through the v1 HTTP API; it
//! has its own wire types and does not link against the engine.

pub mod api;
pub mod error;
pub mod fixture;
pub mod funnel_fixture;
pub mod oracle;
pub mod profile;
pub mod race;
pub mod simulate;
pub mod texts;

pub use api::{Client, FunnelCounts, FunnelStats};
pub use error::{Result, SimError};
pub use fixture::{read_fixture, replay_funnel, FixtureEvent};
pub use oracle::{closed_form_acceptance_rate, expected_acceptance_rate};
pub use profile::{CheatMode, SimConfig, SimWorkerProfile, Speed};
pub use race::{race_for_tasks, RaceOutcome};
pub use simulate::{simulate, SimulationReport};
pub use texts::TextSupply;
