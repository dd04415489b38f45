//! Regenerates `data/fixtures/collection_funnel.jsonl`.
//!
//! Run from the workspace root: `cargo run -p corpusforge-sim --example make_funnel_fixture`.

use std::path::PathBuf;

use corpusforge_core::langid::{train_from_dir, Detector, DEFAULT_MARGIN};
use corpusforge_core::Lang;
use corpusforge_sim::fixture::write_fixture;
use corpusforge_sim::funnel_fixture::{build, Material};

fn main() {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let detector = Detector::new(train_from_dir(&data.join("seeds")).unwrap(), DEFAULT_MARGIN).unwrap();
    let accepts = |lang: &str, text: &str| {
        let lang = Lang::new(lang).unwrap();
        detector.detect(text).is_ok_and(|d| d.confident && d.lang == lang)
    };
    let events = build(&Material::load(&data).unwrap(), &accepts).unwrap();
    let out = data.join("fixtures/collection_funnel.jsonl");
    std::fs::create_dir_all(out.parent().unwrap()).unwrap();
    std::fs::write(&out, write_fixture(&events)).unwrap();
    println!("wrote {} events to {}", events.len(), out.display());
}
