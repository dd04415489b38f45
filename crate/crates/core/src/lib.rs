//! Crowd-translation pipeline core: ingestion, language identification, task
//! engine, quality control, qualification exams, payment ledger and the
//! event-sourced store that records all of it.

pub mod engine;
pub mod error;
pub mod exam;
pub mod ingest;
pub mod langid;
pub mod ledger;
pub mod money;
pub mod qc;
pub mod store;
pub mod tasks;
pub mod types;

pub use engine::{Engine, EngineConfig};
pub use error::{Error, Result};
pub use money::Money;
pub use types::{Direction, Lang};
