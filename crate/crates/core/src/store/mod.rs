//! Event-sourced corpus store.
//!
//! All mutations go through [`Store::write`], which holds the single writer
//! lock, applies events to the in-memory [`State`] and appends them to an
//! optional on-disk journal. Reopening a journal replays it.

mod event;
mod funnel;
mod journal;
mod snapshot;
mod state;

use std::path::Path;

use parking_lot::Mutex;

pub use event::Event;
pub use funnel::{corpus_records, pseudonym, render_corpus, CorpusRecord, DirectionCounters, ExportFormat, FunnelCounts, FunnelStats};
pub use journal::JOURNAL_HEADER;
pub use snapshot::{SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use state::State;

use crate::error::Result;
use journal::Journal;

struct Inner {
    state: State,
    journal: Option<Journal>,
    events: u64,
}

pub struct Store {
    inner: Mutex<Inner>,
}

/// A write transaction. Each emitted event is applied immediately, so later
/// reads inside the same transaction observe it.
pub struct Tx<'a> {
    state: &'a mut State,
    pending: Vec<Event>,
}

impl Tx<'_> {
    pub fn state(&self) -> &State {
        self.state
    }

    pub fn emit(&mut self, event: Event) -> Result<()> {
        self.state.apply(&event)?;
        self.pending.push(event);
        Ok(())
    }
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.inner.lock();
        f.debug_struct("Store")
            .field("events", &inner.events)
            .field("durable", &inner.journal.is_some())
            .finish()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Self::from_state(State::default())
    }

    fn from_state(state: State) -> Self {
        Store { inner: Mutex::new(Inner { state, journal: None, events: 0 }) }
    }

    /// Opens (or creates) a journal file and replays it. A torn final line is
    /// discarded; corruption anywhere else is an integrity error.
    pub fn open(path: impl AsRef<Path>, sync: bool) -> Result<Self> {
        let (journal, state, events) = Journal::open(path.as_ref(), sync)?;
        Ok(Store { inner: Mutex::new(Inner { state, journal: Some(journal), events }) })
    }

    pub fn read<R>(&self, f: impl FnOnce(&State) -> R) -> R {
        f(&self.inner.lock().state)
    }

    /// Runs `f` under the writer lock. Events emitted before an error are kept
    /// and journaled, since they have already been applied.
    pub fn write<R>(&self, f: impl FnOnce(&mut Tx<'_>) -> Result<R>) -> Result<R> {
        let mut inner = self.inner.lock();
        let inner = &mut *inner;
        let mut tx = Tx { state: &mut inner.state, pending: Vec::new() };
        let out = f(&mut tx);
        let pending = tx.pending;
        inner.events += pending.len() as u64;
        if let Some(j) = inner.journal.as_mut() {
            if !pending.is_empty() {
                j.append(&pending)?;
            }
        }
        out
    }

    /// Number of events applied since open (or since the last compaction).
    pub fn event_count(&self) -> u64 {
        self.inner.lock().events
    }

    pub fn is_durable(&self) -> bool {
        self.inner.lock().journal.is_some()
    }

    /// Serializes the full state into a checksummed snapshot.
    pub fn snapshot(&self) -> Result<Vec<u8>> {
        snapshot::encode(&self.inner.lock().state)
    }

    /// Builds an in-memory store from snapshot bytes.
    pub fn restore(bytes: &[u8]) -> Result<Self> {
        Ok(Self::from_state(snapshot::decode(bytes)?))
    }

    /// Writes `bytes` as the starting point of a fresh journal at `path`.
    pub fn restore_to(bytes: &[u8], path: impl AsRef<Path>, sync: bool) -> Result<Self> {
        let state = snapshot::decode(bytes)?;
        let journal = Journal::create_with_snapshot(path.as_ref(), &state, sync)?;
        Ok(Store { inner: Mutex::new(Inner { state, journal: Some(journal), events: 0 }) })
    }

    /// Rewrites the journal as a single snapshot record.
    pub fn compact(&self) -> Result<()> {
        let mut inner = self.inner.lock();
        let inner = &mut *inner;
        if let Some(j) = inner.journal.as_mut() {
            j.compact(&inner.state)?;
        }
        Ok(())
    }
}
