mod common;

use common::*;
use corpusforge_sim::profile::{CheatMode, SimConfig, SimWorkerProfile};
use corpusforge_sim::{race_for_tasks, simulate, Client, SimError};

fn config(directions: &[&str], workers: Vec<SimWorkerProfile>, sources: usize, seed: u64) -> SimConfig {
    SimConfig {
        directions: directions.iter().map(|s| s.to_string()).collect(),
        workers,
        sources_per_direction: sources,
        seed,
    }
}

fn cheaters(langs: &[&str], mode: CheatMode, count: usize) -> SimWorkerProfile {
    SimWorkerProfile { cheat_mode: Some(mode), ..SimWorkerProfile::honest(langs, 0.9, 0.9, count) }
}

#[test]
fn same_seed_same_report() {
    let cfg = config(&["eng-deu"], vec![SimWorkerProfile::honest(&["eng", "deu"], 0.7, 0.9, 6)], 120, 11);
    let texts = texts();
    let a = {
        let (_srv, client) = server();
        simulate(&client, &cfg, &texts).unwrap().to_json()
    };
    let b = {
        let (_srv, client) = server();
        simulate(&client, &cfg, &texts).unwrap().to_json()
    };
    assert_eq!(a, b);
    let other = {
        let (_srv, client) = server();
        simulate(&client, &config(&["eng-deu"], cfg.workers.clone(), 120, 12), &texts).unwrap().to_json()
    };
    assert_ne!(a, other);
}

#[test]
fn honest_pool_runs_to_completion() {
    let (_srv, client) = server();
    let cfg = config(&["eng-fin", "fin-eng"], vec![SimWorkerProfile::honest(&["eng", "fin"], 0.7, 0.9, 8)], 300, 5);
    let r = simulate(&client, &cfg, &texts()).unwrap();
    assert_eq!(r.expected_acceptance_rate.map(|x| (x * 1e4).round()), Some(6888.0));
    for d in ["eng-fin", "fin-eng"] {
        let c = r.directions[d];
        assert_eq!(c.sources, 300);
        assert_eq!(c.translated + c.auto_rejected, c.submitted);
        assert_eq!(c.fully_verified, c.translated, "{d}: {c:?}");
        let server_view = r.funnel.directions[d];
        assert_eq!((server_view.translated, server_view.fully_verified, server_view.in_corpus), (c.translated, c.fully_verified, c.accepted));
    }
    assert!(r.auto_reject_rate < 0.02, "{}", r.auto_reject_rate);
    assert!(r.starved.is_empty());
    assert_eq!(r.flags_raised, 0);
    assert!((r.acceptance_rate - 0.6888).abs() < 0.08, "{}", r.acceptance_rate);
}

#[test]
fn copy_source_pool_never_reaches_the_corpus() {
    let (_srv, client) = server();
    let cfg = config(&["rus-che"], vec![cheaters(&["rus", "che"], CheatMode::CopySource, 5)], 80, 3);
    let r = simulate(&client, &cfg, &texts()).unwrap();
    let c = r.directions["rus-che"];
    assert_eq!(c.submitted, 80);
    assert!(r.auto_reject_rate > 0.97, "{}", r.auto_reject_rate);
    assert_eq!(r.funnel.total.in_corpus, 0);
    assert_eq!(r.expected_acceptance_rate, None);
}

#[test]
fn wrong_language_submissions_are_auto_rejected() {
    let (_srv, client) = server();
    let cfg = config(&["eng-deu"], vec![cheaters(&["eng", "deu"], CheatMode::WrongLanguage, 4)], 60, 8);
    let r = simulate(&client, &cfg, &texts()).unwrap();
    assert!(r.auto_reject_rate > 0.95, "{}", r.auto_reject_rate);
}

#[test]
fn random_fast_workers_get_flagged() {
    let (_srv, client) = server();
    let workers = vec![
        SimWorkerProfile::honest(&["eng", "deu"], 0.8, 0.95, 4),
        cheaters(&["eng", "deu"], CheatMode::RandomFast, 2),
    ];
    let r = simulate(&client, &config(&["eng-deu"], workers, 60, 9), &texts()).unwrap();
    assert_eq!(r.flags_raised, 2);
    assert_eq!(r.directions["eng-deu"].fully_verified, r.directions["eng-deu"].translated);
}

#[test]
fn direction_without_exam_passers_starves() {
    let (_srv, client) = server();
    // Everyone speaks Turkish, but only the English-Finnish bilinguals can pass an exam.
    let workers = vec![
        SimWorkerProfile::honest(&["eng", "tur"], 0.8, 0.0, 4),
        SimWorkerProfile::honest(&["eng", "fin"], 0.8, 0.95, 4),
    ];
    let r = simulate(&client, &config(&["eng-tur", "eng-fin"], workers, 40, 4), &texts()).unwrap();
    let tur = r.directions["eng-tur"];
    assert!(tur.translated > 0);
    assert!(tur.fully_verified < tur.translated, "{tur:?}");
    assert_eq!(r.starved, vec!["eng-tur".to_string()]);
    assert!(r.exams.passed < r.exams.taken);
}

#[test]
fn invalid_inputs_and_unreachable_service() {
    let (_srv, client) = server();
    let bad = config(&["eng-deu"], vec![SimWorkerProfile::honest(&["eng", "deu"], 1.5, 0.9, 1)], 10, 1);
    assert!(matches!(simulate(&client, &bad, &texts()), Err(SimError::Input(_))));
    let none = config(&["eng-deu"], vec![SimWorkerProfile::honest(&["eng", "deu"], 0.5, 0.9, 1)], 0, 1);
    assert!(matches!(simulate(&client, &none, &texts()), Err(SimError::Input(_))));

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let ok = config(&["eng-deu"], vec![SimWorkerProfile::honest(&["eng", "deu"], 0.5, 0.9, 3)], 10, 1);
    assert!(matches!(simulate(&Client::new(&dead).unwrap(), &ok, &texts()), Err(SimError::Environment(_))));
}

#[test]
fn racing_workers_share_out_tasks_exactly_once() {
    let texts = texts();
    let lines: Vec<String> = texts.lines("eng").unwrap().iter().filter(|l| l.len() > 30).take(10).cloned().collect();
    for trial in 0..5 {
        let (_srv, client) = server();
        let out = race_for_tasks(&client, "eng-deu", &lines, 50, &format!("racer{trial}")).unwrap();
        assert!(out.is_clean(), "{out:?}");
        assert_eq!(out.idle, 40);
    }
}
