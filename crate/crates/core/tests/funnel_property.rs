//! Random interleavings of worker actions against the engine; the funnel and
//! structural invariants must hold after every step.

mod common;

use common::*;
use corpusforge_core::qc::Verdict;
use corpusforge_core::store::Store;
use corpusforge_core::tasks::{TaskHandle, TaskKind};
use corpusforge_core::types::{Clock, WorkerId};
use corpusforge_core::{Engine, EngineConfig, Error};
use proptest::prelude::*;

const WORKERS: usize = 6;
const STEPS: usize = 10_000;
const DIRECTIONS: [&str; 4] = ["eng-rus", "rus-eng", "deu-fin", "fin-deu"];

#[derive(Debug, Clone)]
enum Op {
    Translate { worker: usize, text: usize, fast: bool },
    Verify { worker: usize, good: bool },
    /// Fetches work and walks away from it.
    Abandon { worker: usize, verify: bool },
    Tick { minutes: u64 },
    ClearFlag { worker: usize },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..WORKERS, 0..9usize, prop::bool::weighted(0.02))
            .prop_map(|(worker, text, fast)| Op::Translate { worker, text, fast }),
        6 => (0..WORKERS, any::<bool>()).prop_map(|(worker, good)| Op::Verify { worker, good }),
        1 => (0..WORKERS, any::<bool>()).prop_map(|(worker, verify)| Op::Abandon { worker, verify }),
        1 => (1..40u64).prop_map(|minutes| Op::Tick { minutes }),
        1 => (0..WORKERS).prop_map(|worker| Op::ClearFlag { worker }),
    ]
}

struct World {
    engine: Engine,
    clock: std::sync::Arc<corpusforge_core::types::ManualClock>,
    workers: Vec<WorkerId>,
    texts: Vec<String>,
}

fn world() -> World {
    let (engine, clock) = engine_with(Store::in_memory(), EngineConfig::default());
    for d in DIRECTIONS {
        let d = dir(d);
        engine.ingest(&d.src, raw(&seed_lines(d.src.as_str(), 700)), Some(&d)).unwrap();
    }
    let workers: Vec<WorkerId> =
        (0..WORKERS).map(|i| register(&engine, &format!("w{i}"), &["eng", "rus", "deu", "fin"])).collect();
    for w in &workers {
        for d in DIRECTIONS {
            qualify(&engine, *w, &dir(d));
        }
    }
    // Texts in each of the four languages plus one overlong text; most
    // pairings with a direction are wrong-language submissions.
    let mut texts: Vec<String> = Vec::new();
    for code in ["rus", "eng", "deu", "fin"] {
        texts.extend(seed_lines(code, 2));
    }
    texts.push("x".repeat(900));
    World { engine, clock, workers, texts }
}

fn tolerated(e: &Error) -> bool {
    matches!(e, Error::Permission(_) | Error::Conflict(_))
}

fn step(w: &World, op: &Op) {
    let engine = &w.engine;
    match op {
        Op::Translate { worker, text, fast } => {
            let id = w.workers[*worker];
            match engine.assign_next(id, TaskKind::Translate) {
                Ok(Some(TaskHandle::Translate { task_id, .. })) => {
                    let ms = if *fast { 1_000 } else { 40_000 };
                    engine.submit_translation(task_id, id, &w.texts[*text], ms).unwrap();
                }
                Ok(_) => {}
                Err(e) => assert!(tolerated(&e), "{e}"),
            }
        }
        Op::Verify { worker, good } => {
            let id = w.workers[*worker];
            match engine.assign_next(id, TaskKind::Verify) {
                Ok(Some(TaskHandle::Verify { assignment_id, .. })) => {
                    let v = if *good { Verdict::Good } else { Verdict::Bad };
                    engine.submit_verdict(assignment_id, id, v, 12_000).unwrap();
                }
                Ok(_) => {}
                Err(e) => assert!(tolerated(&e), "{e}"),
            }
        }
        Op::Abandon { worker, verify } => {
            let kind = if *verify { TaskKind::Verify } else { TaskKind::Translate };
            if let Err(e) = engine.assign_next(w.workers[*worker], kind) {
                assert!(tolerated(&e), "{e}");
            }
        }
        Op::Tick { minutes } => w.clock.advance_ms(minutes * 60_000),
        Op::ClearFlag { worker } => engine.clear_flag(w.workers[*worker]).unwrap(),
    }
}

fn check_funnel(w: &World) {
    let stats = w.engine.funnel_stats();
    for (d, c) in &stats.directions {
        assert!(c.in_corpus <= c.fully_verified && c.fully_verified <= c.translated, "{d}: {c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 3, max_shrink_iters: 16, ..ProptestConfig::default() })]

    #[test]
    fn funnel_never_inverts(ops in prop::collection::vec(op(), STEPS)) {
        let w = world();
        let start = w.engine.store().event_count();
        for (i, op) in ops.iter().enumerate() {
            step(&w, op);
            check_funnel(&w);
            if i % 250 == 0 {
                w.engine.read(|s| s.check_invariants()).unwrap();
            }
        }
        w.engine.read(|s| s.check_invariants()).unwrap();
        let events = w.engine.store().event_count() - start;
        prop_assert!(events >= STEPS as u64, "only {events} events");
        prop_assert!(w.clock.now().0 > 0);
    }
}
