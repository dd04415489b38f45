mod common;

use common::*;
use corpusforge_core::Lang;
use corpusforge_sim::fixture::{read_fixture, write_fixture, FixtureEvent};
use corpusforge_sim::funnel_fixture::{build, Material, TARGETS};
use corpusforge_sim::{replay_funnel, FunnelCounts, SimError};

fn counts(translated: u64, fully_verified: u64, in_corpus: u64) -> FunnelCounts {
    FunnelCounts { translated, fully_verified, in_corpus }
}

#[test]
fn shipped_fixture_reproduces_the_published_funnel() {
    let (_srv, client) = server();
    let stats = replay_funnel(&client, &shipped_fixture()).unwrap();
    assert_eq!(stats.total, counts(1627, 1470, 1078));
    assert_eq!(stats.directions["fuv-eng"], counts(220, 88, 53));
    assert_eq!(stats.directions["eng-fuv"], counts(311, 286, 176));
    assert_eq!(stats.directions["che-rus"], counts(491, 491, 380));
    assert_eq!(stats.directions["rus-che"], counts(605, 605, 469));
    assert_eq!(stats.directions.len(), 4);

    let cost = client.cost().unwrap();
    assert_eq!(cost.totals.translation, "32.54");
    assert_eq!(cost.totals.verification_set, "4.41");
    assert_eq!(cost.settled_verdict_sets, 441);
}

#[test]
fn shipped_fixture_matches_its_generator() {
    let detector = detector();
    let accepts = |lang: &str, text: &str| {
        let lang = Lang::new(lang).unwrap();
        detector.detect(text).is_ok_and(|d| d.confident && d.lang == lang)
    };
    let events = build(&Material::load(&data_dir()).unwrap(), &accepts).unwrap();
    let shipped = std::fs::read_to_string(data_dir().join("fixtures/collection_funnel.jsonl")).unwrap();
    assert!(write_fixture(&events) == shipped, "regenerate with the make_funnel_fixture example");
    let verdicts = events.iter().filter(|e| e.event == "verdict").count();
    let expected: usize = TARGETS.iter().map(|t| 3 * t.fully_verified).sum();
    assert_eq!(verdicts, expected);
}

#[test]
fn empty_fixture_gives_zeros() {
    let (_srv, client) = server();
    let stats = replay_funnel(&client, &[]).unwrap();
    assert_eq!(stats.total, FunnelCounts::default());
    assert!(stats.directions.values().all(|c| *c == FunnelCounts::default()));
}

#[test]
fn truncation_mid_triple_counts_only_complete_triples() {
    let events = shipped_fixture();
    let verdicts: Vec<usize> = events.iter().enumerate().filter(|(_, e)| e.event == "verdict").map(|(i, _)| i).collect();
    // Ten complete triples and two verdicts of the eleventh.
    let cut = verdicts[31] + 1;
    let (_srv, client) = server();
    let stats = replay_funnel(&client, &events[..cut]).unwrap();
    assert_eq!(stats.total.fully_verified, 10);
    assert_eq!(stats.total.translated, 1627);
    assert!(stats.total.in_corpus <= 10);
}

#[test]
fn malformed_fixtures_are_input_errors() {
    let bad_json = read_fixture("{\"event\": \"worker\"\nnot json\n".as_bytes());
    assert!(matches!(bad_json, Err(SimError::Input(_))));
    let unknown_field = read_fixture("{\"event\":\"note\",\"payload\":{},\"extra\":1}\n".as_bytes());
    assert!(matches!(unknown_field, Err(SimError::Input(_))));

    let (_srv, client) = server();
    let cases = [
        FixtureEvent::new("dance", None, serde_json::json!({})),
        FixtureEvent::new("worker", None, serde_json::json!({"name": "x"})),
        FixtureEvent::new("sources", None, serde_json::json!({"origin": "o", "lines": []})),
        FixtureEvent::new("verdict", Some("che-rus"), serde_json::json!({"worker": "w", "translation": 4, "verdict": "good", "elapsed_ms": 1})),
    ];
    for ev in cases {
        let r = replay_funnel(&client, std::slice::from_ref(&ev));
        assert!(matches!(r, Err(SimError::Input(_))), "{ev:?}: {r:?}");
    }
}

#[test]
fn out_of_order_fixture_is_refused() {
    let mut events = shipped_fixture();
    let first = events.iter().position(|e| e.event == "translation").unwrap();
    events.swap(first, first + 1);
    let (_srv, client) = server();
    assert!(matches!(replay_funnel(&client, &events), Err(SimError::Input(_))));
}
