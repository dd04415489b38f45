//! Per-direction qualification exam for verifiers.
//!
//! A form holds ten sentence pairs: five correct translations, two mismatched
//! pairs, one pair whose target is in another language, and two word-for-word
//! dictionary renderings. Passing a form unlocks verification for its direction.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Direction, Timestamp, WorkerId};

pub const EXAM_ITEMS: usize = 10;
pub const DEFAULT_PASS_THRESHOLD: usize = 8;

const CORRECT_ITEMS: usize = 5;
const MISMATCH_ITEMS: usize = 2;
const WRONG_LANGUAGE_ITEMS: usize = 1;
const WORD_FOR_WORD_ITEMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorKind {
    Mismatch,
    WrongLanguage,
    WordForWord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamItem {
    pub src: String,
    pub tgt: String,
    pub true_label: Label,
    pub distractor_kind: Option<DistractorKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamForm {
    pub direction: Direction,
    pub version: String,
    pub items: Vec<ExamItem>,
}

/// Count of items by kind: (correct, mismatch, wrong_language, word_for_word).
pub type Composition = (usize, usize, usize, usize);

impl ExamForm {
    pub fn composition(&self) -> Composition {
        let mut c = (0, 0, 0, 0);
        for item in &self.items {
            match item.distractor_kind {
                None => c.0 += 1,
                Some(DistractorKind::Mismatch) => c.1 += 1,
                Some(DistractorKind::WrongLanguage) => c.2 += 1,
                Some(DistractorKind::WordForWord) => c.3 += 1,
            }
        }
        c
    }

    pub fn true_labels(&self) -> Vec<Label> {
        self.items.iter().map(|i| i.true_label).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamResult {
    pub worker_id: WorkerId,
    pub direction: Direction,
    pub version: String,
    pub score: usize,
    pub passed: bool,
    pub taken_at: Timestamp,
}

/// Material a form is drawn from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamPools {
    /// Known-good (src, tgt) pairs.
    pub parallel: Vec<(String, String)>,
    /// Source word → target word; the first entry for a word wins.
    pub glossary: Vec<(String, String)>,
    /// Sentences in some third language.
    pub other_lang: Vec<String>,
}

fn read_tsv_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.split_once('\t')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| Error::input(format!("{}:{}: expected two tab-separated columns", path.display(), n + 1)))
        })
        .collect()
}

impl ExamPools {
    /// Reads `correct.tsv`, `glossary.tsv` and `otherlang.txt`.
    pub fn from_files(correct: &Path, glossary: &Path, other_lang: &Path) -> Result<Self> {
        let other = fs::read_to_string(other_lang)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        Ok(ExamPools {
            parallel: read_tsv_pairs(correct)?,
            glossary: read_tsv_pairs(glossary)?,
            other_lang: other,
        })
    }
}

fn split_punct(token: &str) -> (&str, &str, &str) {
    let core_start = token.find(|c: char| c.is_alphanumeric()).unwrap_or(token.len());
    let core_end = token
        .rfind(|c: char| c.is_alphanumeric())
        .map(|i| i + token[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(core_start);
    (&token[..core_start], &token[core_start..core_end], &token[core_end..])
}

/// Naive dictionary rendering: each whitespace token is replaced by its first
/// glossary sense (looked up lowercased, punctuation preserved); unknown tokens
/// pass through.
pub fn word_for_word(src: &str, glossary: &HashMap<String, String>) -> String {
    src.split_whitespace()
        .map(|token| {
            let (lead, core, trail) = split_punct(token);
            match glossary.get(&core.to_lowercase()) {
                Some(t) if !core.is_empty() => format!("{lead}{t}{trail}"),
                _ => token.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn first_sense_glossary(entries: &[(String, String)]) -> HashMap<String, String> {
    let mut map = HashMap::new();
    for (w, t) in entries {
        map.entry(w.to_lowercase()).or_insert_with(|| t.clone());
    }
    map
}

/// Builds a form deterministically from `seed`.
pub fn build_exam(direction: &Direction, pools: &ExamPools, seed: u64) -> Result<ExamForm> {
    let needed = CORRECT_ITEMS + MISMATCH_ITEMS;
    if pools.parallel.len() < needed {
        return Err(Error::input(format!(
            "exam needs at least {needed} parallel pairs, got {}",
            pools.parallel.len()
        )));
    }
    if pools.glossary.is_empty() {
        return Err(Error::input("exam glossary is empty"));
    }
    if pools.other_lang.is_empty() {
        return Err(Error::input("exam needs at least one other-language sentence"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pools.parallel.len()).collect();
    order.shuffle(&mut rng);

    let mut items = Vec::with_capacity(EXAM_ITEMS);
    for &i in &order[..CORRECT_ITEMS] {
        let (src, tgt) = &pools.parallel[i];
        items.push(ExamItem {
            src: src.clone(),
            tgt: tgt.clone(),
            true_label: Label::Correct,
            distractor_kind: None,
        });
    }

    // Each mismatch takes the target of a different pair whose target differs
    // from the true one.
    for &i in &order[CORRECT_ITEMS..needed] {
        let (src, own_tgt) = &pools.parallel[i];
        let donors: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&j| j != i && &pools.parallel[j].1 != own_tgt)
            .collect();
        if donors.is_empty() {
            return Err(Error::input("parallel pool has no distinct targets to mismatch"));
        }
        let donor = donors[rng.random_range(0..donors.len())];
        items.push(ExamItem {
            src: src.clone(),
            tgt: pools.parallel[donor].1.clone(),
            true_label: Label::Incorrect,
            distractor_kind: Some(DistractorKind::Mismatch),
        });
    }

    for _ in 0..WRONG_LANGUAGE_ITEMS {
        let (src, _) = &pools.parallel[order[rng.random_range(0..order.len())]];
        let other = &pools.other_lang[rng.random_range(0..pools.other_lang.len())];
        items.push(ExamItem {
            src: src.clone(),
            tgt: other.clone(),
            true_label: Label::Incorrect,
            distractor_kind: Some(DistractorKind::WrongLanguage),
        });
    }

    let glossary = first_sense_glossary(&pools.glossary);
    let mut wfw_sources: Vec<usize> = order.clone();
    wfw_sources.shuffle(&mut rng);
    for &i in wfw_sources.iter().take(WORD_FOR_WORD_ITEMS) {
        let src = &pools.parallel[i].0;
        items.push(ExamItem {
            src: src.clone(),
            tgt: word_for_word(src, &glossary),
            true_label: Label::Incorrect,
            distractor_kind: Some(DistractorKind::WordForWord),
        });
    }

    items.shuffle(&mut rng);
    Ok(ExamForm {
        direction: direction.clone(),
        version: format!("{direction}-{seed:016x}"),
        items,
    })
}

/// Scores answers against a form. Attempt bookkeeping (one per worker and
/// version) lives in the store.
pub fn grade_exam(
    form: &ExamForm,
    answers: &[Label],
    pass_threshold: usize,
    worker_id: WorkerId,
    taken_at: Timestamp,
) -> Result<ExamResult> {
    if answers.len() != form.items.len() {
        return Err(Error::input(format!(
            "expected {} answers, got {}",
            form.items.len(),
            answers.len()
        )));
    }
    let score = form.items.iter().zip(answers).filter(|(i, a)| i.true_label == **a).count();
    Ok(ExamResult {
        worker_id,
        direction: form.direction.clone(),
        version: form.version.clone(),
        score,
        passed: score >= pass_threshold,
        taken_at,
    })
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Probability that uniformly random answers reach `pass_threshold` correct.
pub fn guess_pass_probability(pass_threshold: usize) -> Result<Ratio<u64>> {
    if pass_threshold > EXAM_ITEMS {
        return Err(Error::input(format!("pass threshold must be within 0..={EXAM_ITEMS}")));
    }
    let n = EXAM_ITEMS as u64;
    let hits: u64 = (pass_threshold as u64..=n).map(|k| binomial(n, k)).sum();
    Ok(Ratio::new(hits, 1 << n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pools(n: usize) -> ExamPools {
        ExamPools {
            parallel: (0..n).map(|i| (format!("source sentence {i}"), format!("target sentence {i}"))).collect(),
            glossary: vec![
                ("source".into(), "tgt-word".into()),
                ("source".into(), "second-sense".into()),
                ("sentence".into(), "phrase".into()),
            ],
            other_lang: vec!["ein ganz anderer Satz".into(), "une autre phrase".into()],
        }
    }

    fn dir() -> Direction {
        "che-rus".parse().unwrap()
    }

    #[test]
    fn composition_is_5_2_1_2() {
        let form = build_exam(&dir(), &pools(12), 7).unwrap();
        assert_eq!(form.items.len(), EXAM_ITEMS);
        assert_eq!(form.composition(), (5, 2, 1, 2));
        for item in &form.items {
            assert_eq!(item.true_label == Label::Correct, item.distractor_kind.is_none());
        }
    }

    #[test]
    fn small_pools_are_rejected() {
        assert!(matches!(build_exam(&dir(), &pools(6), 1), Err(Error::Input(_))));
        let mut p = pools(7);
        p.glossary.clear();
        assert!(matches!(build_exam(&dir(), &p, 1), Err(Error::Input(_))));
        let mut p = pools(7);
        p.other_lang.clear();
        assert!(matches!(build_exam(&dir(), &p, 1), Err(Error::Input(_))));
        assert!(build_exam(&dir(), &pools(7), 1).is_ok());
    }

    #[test]
    fn same_seed_same_form() {
        let a = build_exam(&dir(), &pools(20), 42).unwrap();
        let b = build_exam(&dir(), &pools(20), 42).unwrap();
        let c = build_exam(&dir(), &pools(20), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.version, c.version);
    }

    #[test]
    fn word_for_word_uses_first_sense() {
        let g = first_sense_glossary(&pools(1).glossary);
        assert_eq!(word_for_word("Source sentence, unknown!", &g), "tgt-word phrase, unknown!");
        assert_eq!(word_for_word("«source»", &g), "«tgt-word»");
    }

    #[test]
    fn grading_examples() {
        let form = build_exam(&dir(), &pools(10), 3).unwrap();
        let truth = form.true_labels();
        let r = grade_exam(&form, &truth, 8, WorkerId(1), Timestamp(0)).unwrap();
        assert_eq!((r.score, r.passed), (10, true));

        let flipped: Vec<Label> = truth
            .iter()
            .map(|l| if *l == Label::Correct { Label::Incorrect } else { Label::Correct })
            .collect();
        let r = grade_exam(&form, &flipped, 8, WorkerId(1), Timestamp(0)).unwrap();
        assert_eq!((r.score, r.passed), (0, false));

        let mut eight = truth.clone();
        for l in eight.iter_mut().take(2) {
            *l = if *l == Label::Correct { Label::Incorrect } else { Label::Correct };
        }
        let r = grade_exam(&form, &eight, 8, WorkerId(1), Timestamp(0)).unwrap();
        assert_eq!((r.score, r.passed), (8, true));

        assert!(matches!(grade_exam(&form, &truth[..9], 8, WorkerId(1), Timestamp(0)), Err(Error::Input(_))));
    }

    #[test]
    fn guess_probability_examples() {
        assert_eq!(guess_pass_probability(0).unwrap(), Ratio::from_integer(1));
        assert_eq!(guess_pass_probability(8).unwrap(), Ratio::new(56, 1024));
        assert_eq!(guess_pass_probability(10).unwrap(), Ratio::new(1, 1024));
        assert!(matches!(guess_pass_probability(11), Err(Error::Input(_))));
    }
}
