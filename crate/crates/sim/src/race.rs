//! Many workers asking for the same few tasks at the same instant.

use std::collections::HashSet;
use std::sync::Barrier;

use crate::api::{Client, Handle, TaskKind};
use crate::error::{Result, SimError};
use crate::profile::split_direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaceOutcome {
    /// Workers that came away with a task.
    pub assigned: usize,
    /// Distinct task ids among those.
    pub distinct: usize,
    /// Workers told there was nothing to do.
    pub idle: usize,
    /// Tasks created for the race.
    pub tasks: usize,
}

impl RaceOutcome {
    pub fn is_clean(&self) -> bool {
        self.assigned == self.tasks && self.distinct == self.assigned
    }
}

/// Registers `workers` workers named `{tag}-{i}`, uploads `sources` as tasks
/// in `direction`, then releases every worker at once against `next_task`.
pub fn race_for_tasks(client: &Client, direction: &str, sources: &[String], workers: usize, tag: &str) -> Result<RaceOutcome> {
    let (src, tgt) = split_direction(direction)?;
    let tokens: Vec<String> = (0..workers)
        .map(|i| client.register(&format!("{tag}-{i}"), &[src.clone(), tgt.clone()]).map(|r| r.token))
        .collect::<Result<_>>()?;
    let upload = client.upload_sources(&src, "race", sources, Some(direction))?;
    if upload.task_ids.len() != sources.len() {
        return Err(SimError::Input(format!("only {} of {} race sources became tasks", upload.task_ids.len(), sources.len())));
    }
    let barrier = Barrier::new(workers);
    let results: Vec<Result<Option<u64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = tokens
            .iter()
            .map(|token| {
                let barrier = &barrier;
                scope.spawn(move || {
                    barrier.wait();
                    match client.next_task(token, TaskKind::Translate)? {
                        Some(Handle::Translate { task_id, .. }) => Ok(Some(task_id)),
                        Some(other) => Err(SimError::Protocol(format!("asked to translate, got {other:?}"))),
                        None => Ok(None),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("race thread panicked")).collect()
    });
    let mut ids = Vec::new();
    let mut idle = 0;
    for r in results {
        match r? {
            Some(id) => ids.push(id),
            None => idle += 1,
        }
    }
    let distinct = ids.iter().collect::<HashSet<_>>().len();
    Ok(RaceOutcome { assigned: ids.len(), distinct, idle, tasks: upload.task_ids.len() })
}
