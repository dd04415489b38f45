#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use corpusforge_core::langid::{train_from_dir, Detector, DEFAULT_MARGIN};
use corpusforge_core::EngineConfig;
use corpusforge_server::{in_memory_state, spawn_background, BackgroundServer};
use corpusforge_sim::fixture::{read_fixture, FixtureEvent};
use corpusforge_sim::{Client, TextSupply};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn detector() -> Arc<Detector> {
    static D: OnceLock<Arc<Detector>> = OnceLock::new();
    D.get_or_init(|| Arc::new(Detector::new(train_from_dir(&data_dir().join("seeds")).unwrap(), DEFAULT_MARGIN).unwrap()))
        .clone()
}

pub fn server() -> (BackgroundServer, Client) {
    let srv = spawn_background(in_memory_state(detector(), EngineConfig::default()).unwrap(), "127.0.0.1:0").unwrap();
    let client = Client::new(&srv.base_url()).unwrap();
    (srv, client)
}

pub fn texts() -> TextSupply {
    TextSupply::from_dir(&data_dir().join("seeds")).unwrap()
}

pub fn shipped_fixture() -> Vec<FixtureEvent> {
    let f = std::fs::File::open(data_dir().join("fixtures/collection_funnel.jsonl")).unwrap();
    read_fixture(std::io::BufReader::new(f)).unwrap()
}
