//! JSONL event logs that replay a collection run through the API.
//!
//! Each line is `{"event": ..., "direction": ..., "payload": {...}}`. Replay is
//! single-threaded and checks that every task the service hands out is the one
//! the log expects, so a log that drifts from the service fails loudly.

use std::collections::HashMap;
use std::io::BufRead;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::api::{Client, ExamItem, ExamForm, FunnelStats, Handle, Label, Submission, TaskKind, Verdict};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEvent {
    pub event: String,
    #[serde(default)]
    pub direction: Option<String>,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotePayload {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerPayload {
    pub name: String,
    pub langs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamPayload {
    pub version: String,
    pub items: Vec<ExamItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamAnswersPayload {
    pub worker: String,
    pub answers: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcesPayload {
    pub origin: String,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationPayload {
    pub worker: String,
    pub source: String,
    pub text: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictPayload {
    pub worker: String,
    /// Position of the translation among this log's `translation` events.
    pub translation: usize,
    pub verdict: Verdict,
    pub elapsed_ms: u64,
}

impl FixtureEvent {
    pub fn new(event: &str, direction: Option<&str>, payload: impl Serialize) -> Self {
        FixtureEvent {
            event: event.to_string(),
            direction: direction.map(str::to_string),
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }

    fn payload<T: DeserializeOwned>(&self, line: usize) -> Result<T> {
        T::deserialize(&self.payload).map_err(|e| SimError::Input(format!("line {line}: bad {} payload: {e}", self.event)))
    }

    fn direction(&self, line: usize) -> Result<&str> {
        self.direction
            .as_deref()
            .ok_or_else(|| SimError::Input(format!("line {line}: {} needs a direction", self.event)))
    }
}

pub fn read_fixture(reader: impl BufRead) -> Result<Vec<FixtureEvent>> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SimError::Input(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| SimError::Input(format!("line {}: {e}", i + 1)))?);
    }
    Ok(events)
}

pub fn write_fixture(events: &[FixtureEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

fn source_lang(direction: &str, line: usize) -> Result<&str> {
    direction
        .split_once('-')
        .map(|(s, _)| s)
        .ok_or_else(|| SimError::Input(format!("line {line}: bad direction {direction:?}")))
}

/// Replays `events` against the service and returns its funnel afterwards.
pub fn replay_funnel(client: &Client, events: &[FixtureEvent]) -> Result<FunnelStats> {
    let mut tokens: HashMap<String, String> = HashMap::new();
    let mut versions: HashMap<String, String> = HashMap::new();
    let mut translations: Vec<Option<u64>> = Vec::new();
    let token = |tokens: &HashMap<String, String>, name: &str, line: usize| {
        tokens.get(name).cloned().ok_or_else(|| SimError::Input(format!("line {line}: unknown worker {name:?}")))
    };

    for (i, ev) in events.iter().enumerate() {
        let line = i + 1;
        match ev.event.as_str() {
            "note" => {
                ev.payload::<NotePayload>(line)?;
            }
            "worker" => {
                let p: WorkerPayload = ev.payload(line)?;
                let reg = client.register(&p.name, &p.langs)?;
                tokens.insert(p.name, reg.token);
            }
            "exam" => {
                let d = ev.direction(line)?;
                let p: ExamPayload = ev.payload(line)?;
                client.publish_exam(&ExamForm { direction: d.to_string(), version: p.version.clone(), items: p.items })?;
                versions.insert(d.to_string(), p.version);
            }
            "exam_answers" => {
                let d = ev.direction(line)?;
                let p: ExamAnswersPayload = ev.payload(line)?;
                let version = versions
                    .get(d)
                    .ok_or_else(|| SimError::Input(format!("line {line}: no exam published for {d}")))?;
                client.answer_exam(&token(&tokens, &p.worker, line)?, d, version, &p.answers)?;
            }
            "sources" => {
                let d = ev.direction(line)?;
                let p: SourcesPayload = ev.payload(line)?;
                let up = client.upload_sources(source_lang(d, line)?, &p.origin, &p.lines, Some(d))?;
                if up.report.kept != p.lines.len() {
                    return Err(SimError::Input(format!(
                        "line {line}: service kept {} of {} sources ({:?})",
                        up.report.kept,
                        p.lines.len(),
                        up.report
                    )));
                }
            }
            "translation" => {
                let d = ev.direction(line)?;
                let p: TranslationPayload = ev.payload(line)?;
                let t = token(&tokens, &p.worker, line)?;
                let task_id = match client.next_task(&t, TaskKind::Translate)? {
                    Some(Handle::Translate { task_id, direction, source }) if direction == d && source == p.source => task_id,
                    other => {
                        return Err(SimError::Input(format!("line {line}: expected the {d} task for {:?}, got {other:?}", p.source)))
                    }
                };
                let id = match client.submit_translation(&t, task_id, &p.text, p.elapsed_ms)? {
                    Submission::QueuedForVerification { translation_id } => Some(translation_id),
                    Submission::AutoRejected { .. } => None,
                };
                translations.push(id);
            }
            "verdict" => {
                let p: VerdictPayload = ev.payload(line)?;
                let expected = translations
                    .get(p.translation)
                    .copied()
                    .flatten()
                    .ok_or_else(|| SimError::Input(format!("line {line}: translation {} is not in verification", p.translation)))?;
                let t = token(&tokens, &p.worker, line)?;
                let assignment_id = match client.next_task(&t, TaskKind::Verify)? {
                    Some(Handle::Verify { assignment_id, translation_id, .. }) if translation_id == expected => assignment_id,
                    other => {
                        return Err(SimError::Input(format!("line {line}: expected translation {expected}, got {other:?}")))
                    }
                };
                client.submit_verdict(&t, assignment_id, p.verdict, p.elapsed_ms)?;
            }
            other => return Err(SimError::Input(format!("line {line}: unknown event {other:?}"))),
        }
    }
    client.funnel()
}
