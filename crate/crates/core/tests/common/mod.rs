#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use corpusforge_core::exam::{ExamForm, Label};
use corpusforge_core::ingest::RawLine;
use corpusforge_core::langid::{train_from_dir, Detector, DEFAULT_MARGIN};
use corpusforge_core::store::Store;
use corpusforge_core::types::{Direction, ManualClock, Timestamp, WorkerId};
use corpusforge_core::{Engine, EngineConfig, Lang};

pub fn seeds_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/seeds")
}

pub fn detector() -> Arc<Detector> {
    static DETECTOR: OnceLock<Arc<Detector>> = OnceLock::new();
    DETECTOR
        .get_or_init(|| Arc::new(Detector::new(train_from_dir(&seeds_dir()).unwrap(), DEFAULT_MARGIN).unwrap()))
        .clone()
}

pub fn lang(code: &str) -> Lang {
    Lang::new(code).unwrap()
}

pub fn dir(s: &str) -> Direction {
    s.parse().unwrap()
}

pub fn engine_with(store: Store, config: EngineConfig) -> (Engine, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(Timestamp(1_700_000_000_000)));
    let engine = Engine::new(store, detector(), clock.clone(), config).unwrap();
    (engine, clock)
}

pub fn engine() -> (Engine, Arc<ManualClock>) {
    engine_with(Store::in_memory(), EngineConfig::default())
}

/// Real sentences of one seed language, long enough to pass ingest.
pub fn seed_lines(code: &str, n: usize) -> Vec<String> {
    std::fs::read_to_string(seeds_dir().join(format!("{code}.txt")))
        .unwrap()
        .lines()
        .filter(|l| (40..200).contains(&l.chars().count()))
        .take(n)
        .map(str::to_string)
        .collect()
}

pub fn raw(lines: &[String]) -> Vec<RawLine> {
    lines.iter().map(|l| RawLine::new(l.as_str(), "test")).collect()
}

pub fn register(engine: &Engine, name: &str, langs: &[&str]) -> WorkerId {
    let langs: Vec<Lang> = langs.iter().map(|l| lang(l)).collect();
    engine.register_worker(name, &langs).unwrap().worker_id
}

/// Ten hand-made items: the first five correct, the rest incorrect.
pub fn simple_form(direction: &Direction) -> ExamForm {
    use corpusforge_core::exam::{DistractorKind, ExamItem};
    let kinds = [
        None,
        None,
        None,
        None,
        None,
        Some(DistractorKind::Mismatch),
        Some(DistractorKind::Mismatch),
        Some(DistractorKind::WrongLanguage),
        Some(DistractorKind::WordForWord),
        Some(DistractorKind::WordForWord),
    ];
    ExamForm {
        direction: direction.clone(),
        version: format!("{direction}-test"),
        items: kinds
            .iter()
            .enumerate()
            .map(|(i, k)| ExamItem {
                src: format!("src {i}"),
                tgt: format!("tgt {i}"),
                true_label: if k.is_none() { Label::Correct } else { Label::Incorrect },
                distractor_kind: *k,
            })
            .collect(),
    }
}

/// Publishes a simple form if none is active and passes the worker.
pub fn qualify(engine: &Engine, worker: WorkerId, direction: &Direction) {
    let form = match engine.exam_form(direction) {
        Ok(f) => f,
        Err(_) => engine.publish_form(simple_form(direction)).unwrap(),
    };
    let result = engine.take_exam(worker, direction, None, &form.true_labels()).unwrap();
    assert!(result.passed);
}
