//! The same event log applied over HTTP and straight to an engine must leave
//! both with the same funnel, corpus and ledger.

mod common;

use std::collections::HashMap;
use std::sync::Arc;

use corpusforge_core::exam::{ExamForm, ExamItem, Label};
use corpusforge_core::ingest::RawLine;
use corpusforge_core::ledger::CostFilter;
use corpusforge_core::qc::Verdict;
use corpusforge_core::store::{ExportFormat, Store};
use corpusforge_core::tasks::{SubmissionOutcome, TaskHandle, TaskKind};
use corpusforge_core::types::SystemClock;
use corpusforge_core::{Direction, Engine, EngineConfig, Lang};
use corpusforge_sim::fixture::FixtureEvent;
use corpusforge_sim::replay_funnel;
use serde::Deserialize;
use serde_json::Value;

#[derive(Deserialize)]
struct Worker {
    name: String,
    langs: Vec<Lang>,
}

#[derive(Deserialize)]
struct Exam {
    version: String,
    items: Vec<ExamItem>,
}

#[derive(Deserialize)]
struct Answers {
    worker: String,
    answers: Vec<Label>,
}

#[derive(Deserialize)]
struct Sources {
    origin: String,
    lines: Vec<String>,
}

#[derive(Deserialize)]
struct Translation {
    worker: String,
    source: String,
    text: String,
    elapsed_ms: u64,
}

#[derive(Deserialize)]
struct VerdictEvent {
    worker: String,
    translation: usize,
    verdict: Verdict,
    elapsed_ms: u64,
}

fn payload<T: for<'de> Deserialize<'de>>(v: &Value) -> T {
    T::deserialize(v).unwrap()
}

/// Direct counterpart of `replay_funnel`, written against the engine API.
fn replay_direct(engine: &Engine, events: &[FixtureEvent]) {
    let mut workers = HashMap::new();
    let mut versions = HashMap::new();
    let mut translations = Vec::new();
    for ev in events {
        let direction: Option<Direction> = ev.direction.as_deref().map(|d| d.parse().unwrap());
        match ev.event.as_str() {
            "note" => {}
            "worker" => {
                let w: Worker = payload(&ev.payload);
                workers.insert(w.name.clone(), engine.register_worker(&w.name, &w.langs).unwrap().worker_id);
            }
            "exam" => {
                let e: Exam = payload(&ev.payload);
                let d = direction.unwrap();
                versions.insert(d.clone(), e.version.clone());
                engine.publish_form(ExamForm { direction: d, version: e.version, items: e.items }).unwrap();
            }
            "exam_answers" => {
                let a: Answers = payload(&ev.payload);
                let d = direction.unwrap();
                engine.take_exam(workers[&a.worker], &d, Some(&versions[&d]), &a.answers).unwrap();
            }
            "sources" => {
                let s: Sources = payload(&ev.payload);
                let d = direction.unwrap();
                let lines = s.lines.into_iter().map(|text| RawLine { text, origin: s.origin.clone() }).collect();
                engine.ingest(&d.src, lines, Some(&d)).unwrap();
            }
            "translation" => {
                let t: Translation = payload(&ev.payload);
                let w = workers[&t.worker];
                let Some(TaskHandle::Translate { task_id, source, .. }) = engine.assign_next(w, TaskKind::Translate).unwrap() else {
                    panic!("no translate task for {}", t.worker)
                };
                assert_eq!(source, t.source);
                translations.push(match engine.submit_translation(task_id, w, &t.text, t.elapsed_ms).unwrap() {
                    SubmissionOutcome::QueuedForVerification { translation_id, .. } => Some(translation_id),
                    SubmissionOutcome::AutoRejected { .. } => None,
                });
            }
            "verdict" => {
                let v: VerdictEvent = payload(&ev.payload);
                let w = workers[&v.worker];
                let Some(TaskHandle::Verify { assignment_id, translation_id, .. }) = engine.assign_next(w, TaskKind::Verify).unwrap() else {
                    panic!("no verify task for {}", v.worker)
                };
                assert_eq!(Some(translation_id), translations[v.translation]);
                engine.submit_verdict(assignment_id, w, v.verdict, v.elapsed_ms).unwrap();
            }
            other => panic!("unknown event {other}"),
        }
    }
}

#[test]
fn http_and_direct_replays_agree() {
    let events = common::shipped_fixture();
    let (srv, client) = common::server();
    replay_funnel(&client, &events).unwrap();
    let over_http = srv.engine();

    let direct = Engine::new(Store::in_memory(), common::detector(), Arc::new(SystemClock), EngineConfig::default()).unwrap();
    replay_direct(&direct, &events);

    assert_eq!(over_http.funnel_stats(), direct.funnel_stats());
    assert_eq!(over_http.cost_totals(&CostFilter::default()), direct.cost_totals(&CostFilter::default()));
    for d in ["fuv-eng", "eng-fuv", "che-rus", "rus-che"] {
        let d: Direction = d.parse().unwrap();
        for pending in [false, true] {
            assert_eq!(
                over_http.export_corpus(&d, ExportFormat::Tsv, pending).unwrap(),
                direct.export_corpus(&d, ExportFormat::Tsv, pending).unwrap(),
                "{d} pending={pending}"
            );
        }
    }
}
