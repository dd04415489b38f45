//! Runs the `corpusforge` binary against temporary configs and stores.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn corpusforge(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_corpusforge"));
    cmd.args(args).env_remove("CORPUSFORGE_CONFIG").env("RUST_LOG", "warn");
    cmd
}

fn ok(mut cmd: Command) -> String {
    let out: Output = cmd.output().unwrap();
    assert!(out.status.success(), "{cmd:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// A config with a journal in `dir` and detection trained from the seeds.
fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("corpusforge.toml");
    let body = format!(
        "store_path = \"store.journal\"\n[langid]\ntrain_dir = {:?}\n",
        data_dir().join("seeds").canonicalize().unwrap()
    );
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn cost_projection() {
    let out = ok(corpusforge(&["cost", "project", "--languages", "7000", "--sentences", "1000000", "--price", "1"]));
    assert_eq!(out.trim(), "7000000000.00");
}

#[test]
fn bad_price_is_an_error() {
    let out = corpusforge(&["cost", "project", "--languages", "1", "--sentences", "1", "--price", "lots"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn ingest_then_stats_and_export_from_the_journal() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let sources = dir.path().join("eng.txt");
    let eng = std::fs::read_to_string(data_dir().join("seeds/eng.txt")).unwrap();
    let mut lines: Vec<&str> = eng.lines().filter(|l| l.len() > 30).take(20).collect();
    lines.push("short");
    lines.push(lines[0]);
    std::fs::write(&sources, lines.join("\n")).unwrap();

    let cfg = config.to_str().unwrap();
    let report: Value = serde_json::from_str(&ok(corpusforge(&[
        "--config", cfg, "ingest", "--lang", "eng", "--origin", "seed", "--file", sources.to_str().unwrap(), "--direction",
        "eng-fin",
    ])))
    .unwrap();
    assert_eq!(report["kept"], 20, "{report}");
    assert!(dir.path().join("store.journal").is_file());

    // The config path can also come from the environment.
    let mut stats = corpusforge(&["stats", "--format", "json"]);
    stats.env("CORPUSFORGE_CONFIG", &config);
    let stats: Value = serde_json::from_str(&ok(stats)).unwrap();
    assert_eq!(stats["total"]["translated"], 0, "{stats}");

    let table = ok(corpusforge(&["--config", cfg, "stats"]));
    assert!(table.contains("Translated"), "{table}");

    let out = dir.path().join("eng-fin.tsv");
    ok(corpusforge(&["--config", cfg, "export", "--direction", "eng-fin", "--format", "tsv", "--out", out.to_str().unwrap()]));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");

    let cost: Value = serde_json::from_str(&ok(corpusforge(&["--config", cfg, "cost"]))).unwrap();
    assert!(cost.is_object(), "{cost}");
}

#[test]
fn offline_commands_need_a_store() {
    let out = corpusforge(&["stats"]).current_dir(tempfile::tempdir().unwrap().path()).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn langid_train_and_detect() {
    let dir = tempfile::tempdir().unwrap();
    let mut profiles = Vec::new();
    for lang in ["eng", "deu", "fin"] {
        let out = dir.path().join(format!("{lang}.profile.json"));
        let seed = data_dir().join(format!("seeds/{lang}.txt"));
        ok(corpusforge(&["langid-train", "--lang", lang, "--file", seed.to_str().unwrap(), "--out", out.to_str().unwrap()]));
        profiles.push(out);
    }
    let mut args = vec!["langid-detect", "--text", "Der Hund schläft heute den ganzen Tag im Garten hinter dem Haus."];
    for p in &profiles {
        args.extend(["--profile", p.to_str().unwrap()]);
    }
    let detection: Value = serde_json::from_str(&ok(corpusforge(&args))).unwrap();
    assert_eq!(detection["lang"], "deu", "{detection}");
    assert_eq!(detection["confident"], true, "{detection}");
}

#[test]
fn replay_prints_the_collection_funnel() {
    let fixture = data_dir().join("fixtures/collection_funnel.jsonl");
    let seeds = data_dir().join("seeds");
    let args = ["replay", "--fixture", fixture.to_str().unwrap(), "--seeds", seeds.to_str().unwrap()];
    let stats: Value = serde_json::from_str(&ok(corpusforge(&[&args[..], &["--format", "json"]].concat()))).unwrap();
    assert_eq!(stats["total"]["translated"], 1627);
    assert_eq!(stats["total"]["fully_verified"], 1470);
    assert_eq!(stats["total"]["in_corpus"], 1078);
}

#[test]
fn exam_build_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = std::fs::read_to_string(data_dir().join("parallel/che-rus.tsv")).unwrap();
    let glossary: Vec<&str> = pairs.lines().filter(|l| !l.contains(' ')).collect();
    let glossary_path = dir.path().join("glossary.tsv");
    std::fs::write(&glossary_path, glossary.join("\n")).unwrap();
    let args = |seed: &str| {
        let correct = data_dir().join("parallel/che-rus.tsv");
        let other = data_dir().join("seeds/fuv.txt");
        ok(corpusforge(&[
            "exam-build", "--direction", "che-rus", "--seed", seed, "--correct", correct.to_str().unwrap(), "--glossary",
            glossary_path.to_str().unwrap(), "--other", other.to_str().unwrap(),
        ]))
    };
    let first = args("7");
    assert_eq!(first, args("7"));
    let form: Value = serde_json::from_str(&first).unwrap();
    let items = form["items"].as_array().unwrap();
    assert_eq!(items.len(), 10);
    let kinds = |k: &str| items.iter().filter(|i| i["distractor_kind"] == k).count();
    assert_eq!((kinds("mismatch"), kinds("wrong_language"), kinds("word_for_word")), (2, 1, 2));
}

#[test]
fn shipped_simulation_profiles_are_valid() {
    for name in ["honest", "mixed"] {
        let cfg = corpusforge_sim::SimConfig::load(&data_dir().join(format!("sim/{name}.json"))).unwrap();
        cfg.validate().unwrap();
    }
}
