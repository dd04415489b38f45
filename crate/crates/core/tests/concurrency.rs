mod common;

use std::collections::HashSet;
use std::sync::{Arc, Barrier};

use common::*;
use corpusforge_core::tasks::{TaskHandle, TaskKind};

const WORKERS: usize = 50;
const TASKS: usize = 10;

#[test]
fn racing_workers_never_share_a_task() {
    let lines = seed_lines("eng", 200);
    for trial in 0..100 {
        let (engine, _) = engine();
        let batch = &lines[(trial * 2) % 190..][..TASKS];
        let out = engine.ingest(&lang("eng"), raw(batch), Some(&dir("eng-rus"))).unwrap();
        assert_eq!(out.task_ids.len(), TASKS);
        let workers: Vec<_> = (0..WORKERS).map(|i| register(&engine, &format!("w{i}"), &["eng", "rus"])).collect();

        let engine = Arc::new(engine);
        let barrier = Arc::new(Barrier::new(WORKERS));
        let handles: Vec<_> = workers
            .into_iter()
            .map(|w| {
                let engine = engine.clone();
                let barrier = barrier.clone();
                std::thread::spawn(move || {
                    barrier.wait();
                    engine.assign_next(w, TaskKind::Translate).unwrap()
                })
            })
            .collect();
        let got: Vec<_> = handles.into_iter().filter_map(|h| h.join().unwrap()).collect();
        let ids: HashSet<_> = got
            .iter()
            .map(|h| match h {
                TaskHandle::Translate { task_id, .. } => *task_id,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(got.len(), TASKS, "trial {trial}");
        assert_eq!(ids.len(), TASKS, "trial {trial}: a task went to two workers");
        engine.read(|s| s.check_invariants()).unwrap();
    }
}
