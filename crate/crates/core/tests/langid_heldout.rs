//! Held-out evaluation of the n-gram detector on the bundled seed texts.

use std::path::PathBuf;

use corpusforge_core::langid::{evaluate, train_profile, Detector, DEFAULT_MARGIN};
use corpusforge_core::Lang;

fn seeds_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/seeds")
}

/// Every fifth line is held out; the rest trains the profile.
fn split(lang: &str) -> (Vec<String>, Vec<String>) {
    let text = std::fs::read_to_string(seeds_dir().join(format!("{lang}.txt"))).unwrap();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        if i % 5 == 4 {
            test.push(line.to_string());
        } else {
            train.push(line.to_string());
        }
    }
    (train, test)
}

const LANGS: [&str; 9] = ["che", "deu", "eng", "fin", "fuv", "rus", "swa", "tur", "yor"];

#[test]
fn held_out_accuracy_on_long_sentences() {
    let mut profiles = Vec::new();
    let mut labeled = Vec::new();
    for code in LANGS {
        let lang = Lang::new(code).unwrap();
        let (train, test) = split(code);
        profiles.push(train_profile(&train, lang.clone()).unwrap());
        labeled.extend(test.into_iter().filter(|s| s.chars().count() >= 40).map(|s| (s, lang.clone())));
    }
    let report = evaluate(&profiles, &labeled, DEFAULT_MARGIN).unwrap();
    for (lang, e) in &report.per_language {
        eprintln!("{lang}: items={} confident={} correct={} accuracy={:?}", e.items, e.confident, e.correct, e.accuracy);
    }
    eprintln!("overall accuracy={:?} abstention={:.4} strict={:.4}", report.accuracy, report.abstention_rate, report.strict_accuracy());
    assert!(report.accuracy.unwrap() >= 0.95);
    let _ = Detector::new(profiles, DEFAULT_MARGIN).unwrap();
}
