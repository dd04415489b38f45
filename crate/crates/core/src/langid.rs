//! Character n-gram language identification.
//!
//! A profile is a multinomial over padded character n-grams (orders 1 to 5)
//! with add-one smoothing over the training vocabulary. Detection scores a text
//! under every profile by its mean n-gram log-probability, picks the best, and
//! abstains when the gap to the runner-up is below a margin or when the text is
//! too short to carry evidence.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Lang;

pub const NGRAM_ORDERS: RangeInclusive<usize> = 1..=5;
/// Training corpora shorter than this (in characters) are refused.
pub const MIN_TRAINING_CHARS: usize = 10_000;
/// Normalized texts shorter than this always abstain.
pub const MIN_CONFIDENT_CHARS: usize = 20;
pub const DEFAULT_MARGIN: f64 = 0.05;
pub const PROFILE_FORMAT_VERSION: u32 = 1;

/// Lowercases, turns every non-letter into a space, and collapses whitespace.
/// Combining marks are kept so that tone-marked scripts keep their diacritics.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars().flat_map(char::to_lowercase) {
        let keep = c.is_alphabetic() || is_combining_mark(c);
        if keep {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

fn is_combining_mark(c: char) -> bool {
    matches!(c, '\u{0300}'..='\u{036F}' | '\u{1AB0}'..='\u{1AFF}' | '\u{1DC0}'..='\u{1DFF}')
}

/// Calls `f` for every n-gram of ` text ` for each order in [`NGRAM_ORDERS`].
fn for_each_ngram(normalized: &str, mut f: impl FnMut(&str)) {
    let padded = format!(" {normalized} ");
    let bounds: Vec<usize> = padded
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(padded.len()))
        .collect();
    let chars = bounds.len() - 1;
    for n in NGRAM_ORDERS {
        if n > chars {
            break;
        }
        for start in 0..=(chars - n) {
            f(&padded[bounds[start]..bounds[start + n]]);
        }
    }
}

/// Trained model for one language.
#[derive(Debug, Clone)]
pub struct LangProfile {
    lang: Lang,
    counts: HashMap<String, u64>,
    total_ngrams: u64,
    logprobs: HashMap<String, f64>,
    unseen_logprob: f64,
}

impl PartialEq for LangProfile {
    fn eq(&self, other: &Self) -> bool {
        self.lang == other.lang && self.counts == other.counts
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    version: u32,
    lang: Lang,
    n_range: [usize; 2],
    total_ngrams: u64,
    counts: BTreeMap<String, u64>,
}

impl LangProfile {
    pub fn from_counts(lang: Lang, counts: HashMap<String, u64>) -> Result<Self> {
        if counts.is_empty() || counts.values().any(|&c| c == 0) {
            return Err(Error::Training(format!("profile for {lang} has no usable n-grams")));
        }
        let total_ngrams: u64 = counts.values().sum();
        let denom = (total_ngrams + counts.len() as u64) as f64;
        let logprobs = counts
            .iter()
            .map(|(g, &c)| (g.clone(), ((c + 1) as f64 / denom).ln()))
            .collect();
        Ok(LangProfile {
            lang,
            counts,
            total_ngrams,
            logprobs,
            unseen_logprob: (1.0 / denom).ln(),
        })
    }

    pub fn lang(&self) -> &Lang {
        &self.lang
    }

    pub fn total_ngrams(&self) -> u64 {
        self.total_ngrams
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }

    pub fn ngram_logprobs(&self) -> &HashMap<String, f64> {
        &self.logprobs
    }

    /// Log-probability of an n-gram; unseen n-grams get the smoothed floor.
    pub fn logprob(&self, ngram: &str) -> f64 {
        self.logprobs.get(ngram).copied().unwrap_or(self.unseen_logprob)
    }

    /// Mean log-probability per n-gram of already normalized text.
    fn mean_logprob(&self, normalized: &str) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for_each_ngram(normalized, |g| {
            sum += self.logprob(g);
            n += 1;
        });
        sum / n as f64
    }

    /// Length-normalized log-likelihood of raw text under this profile.
    pub fn score(&self, text: &str) -> f64 {
        self.mean_logprob(&normalize(text))
    }

    pub fn to_json(&self) -> String {
        let file = ProfileFile {
            version: PROFILE_FORMAT_VERSION,
            lang: self.lang.clone(),
            n_range: [*NGRAM_ORDERS.start(), *NGRAM_ORDERS.end()],
            total_ngrams: self.total_ngrams,
            counts: self.counts.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        };
        serde_json::to_string(&file).expect("profile serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(json)
            .map_err(|e| Error::Integrity(format!("unreadable profile: {e}")))?;
        if file.version != PROFILE_FORMAT_VERSION {
            return Err(Error::Integrity(format!("unsupported profile version {}", file.version)));
        }
        if file.n_range != [*NGRAM_ORDERS.start(), *NGRAM_ORDERS.end()] {
            return Err(Error::Integrity(format!("unsupported n-gram range {:?}", file.n_range)));
        }
        let profile = LangProfile::from_counts(file.lang, file.counts.into_iter().collect())?;
        if profile.total_ngrams != file.total_ngrams {
            return Err(Error::Integrity("profile n-gram total does not match its counts".into()));
        }
        Ok(profile)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read profile {}: {e}", path.display())))?;
        Self::from_json(&json)
    }
}

/// Trains a profile. Counting is order-independent, so the same multiset of
/// lines always yields the same profile.
pub fn train_profile<S: AsRef<str>>(corpus: &[S], lang: Lang) -> Result<LangProfile> {
    let chars: usize = corpus.iter().map(|s| s.as_ref().chars().count()).sum();
    if chars < MIN_TRAINING_CHARS {
        return Err(Error::Training(format!(
            "corpus for {lang} has {chars} characters, need at least {MIN_TRAINING_CHARS}"
        )));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for line in corpus {
        let normalized = normalize(line.as_ref());
        if normalized.is_empty() {
            continue;
        }
        for_each_ngram(&normalized, |g| {
            if let Some(c) = counts.get_mut(g) {
                *c += 1;
            } else {
                counts.insert(g.to_string(), 1);
            }
        });
    }
    LangProfile::from_counts(lang, counts)
}

/// Trains on a UTF-8 text file, one sentence per line.
pub fn train_from_file(path: &Path, lang: Lang) -> Result<LangProfile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Training(format!("cannot read {}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    train_profile(&lines, lang)
}

/// Trains one profile per `<code>.txt` file in `dir`, ordered by code.
pub fn train_from_dir(dir: &Path) -> Result<Vec<LangProfile>> {
    let mut files: Vec<(Lang, std::path::PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::Training(format!("cannot read {}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        if let Some(code) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| Lang::new(s).ok()) {
            files.push((code, path));
        }
    }
    files.sort();
    files.into_iter().map(|(lang, path)| train_from_file(&path, lang)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Best language, or `und` for texts too short to judge.
    pub lang: Lang,
    /// Mean log-likelihood per n-gram under the best profile.
    pub score: f64,
    /// Score gap between the best and second-best profile.
    pub margin: f64,
    pub confident: bool,
}

pub fn detect(text: &str, profiles: &[LangProfile], margin_threshold: f64) -> Result<Detection> {
    if profiles.len() < 2 {
        return Err(Error::input("language detection needs at least two profiles"));
    }
    let normalized = normalize(text);
    if normalized.is_empty() {
        return Err(Error::input("cannot detect the language of empty text"));
    }
    let mut scored: Vec<(usize, f64)> = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.mean_logprob(&normalized)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (best, score) = scored[0];
    let margin = score - scored[1].1;
    let lang = if normalized.chars().count() < MIN_CONFIDENT_CHARS {
        Lang::undetermined()
    } else {
        profiles[best].lang.clone()
    };
    let confident = !lang.is_undetermined() && margin >= margin_threshold;
    Ok(Detection { lang, score, margin, confident })
}

/// Immutable set of profiles plus the abstention margin.
#[derive(Debug, Clone)]
pub struct Detector {
    profiles: Vec<LangProfile>,
    margin: f64,
}

impl Detector {
    pub fn new(profiles: Vec<LangProfile>, margin: f64) -> Result<Self> {
        if profiles.len() < 2 {
            return Err(Error::Config("a detector needs at least two language profiles".into()));
        }
        if !margin.is_finite() || margin < 0.0 {
            return Err(Error::Config(format!("invalid langid margin {margin}")));
        }
        let mut langs: Vec<&Lang> = profiles.iter().map(|p| &p.lang).collect();
        langs.sort();
        if langs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate language profile".into()));
        }
        Ok(Detector { profiles, margin })
    }

    pub fn detect(&self, text: &str) -> Result<Detection> {
        detect(text, &self.profiles, self.margin)
    }

    pub fn has_profile(&self, lang: &Lang) -> bool {
        self.profiles.iter().any(|p| &p.lang == lang)
    }

    pub fn langs(&self) -> impl Iterator<Item = &Lang> {
        self.profiles.iter().map(|p| &p.lang)
    }

    pub fn profiles(&self) -> &[LangProfile] {
        &self.profiles
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LangEval {
    pub items: usize,
    pub confident: usize,
    pub correct: usize,
    /// Correct share of confident detections; `None` when every item abstained.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_language: BTreeMap<Lang, LangEval>,
    /// Gold language → detected language, over confident detections only.
    pub confusion: BTreeMap<Lang, BTreeMap<Lang, usize>>,
    pub items: usize,
    pub confident: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub abstention_rate: f64,
}

impl EvalReport {
    /// Correct confident detections over all items, abstentions counted as misses.
    pub fn strict_accuracy(&self) -> f64 {
        self.correct as f64 / self.items as f64
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn evaluate<S: AsRef<str>>(
    profiles: &[LangProfile],
    labeled: &[(S, Lang)],
    margin_threshold: f64,
) -> Result<EvalReport> {
    if labeled.is_empty() {
        return Err(Error::input("evaluation set is empty"));
    }
    if let Some((_, lang)) = labeled.iter().find(|(_, l)| !profiles.iter().any(|p| &p.lang == l)) {
        return Err(Error::input(format!("no profile for labeled language {lang}")));
    }
    let mut per_language: BTreeMap<Lang, LangEval> = BTreeMap::new();
    let mut confusion: BTreeMap<Lang, BTreeMap<Lang, usize>> = BTreeMap::new();
    for (text, gold) in labeled {
        let entry = per_language.entry(gold.clone()).or_default();
        entry.items += 1;
        let det = detect(text.as_ref(), profiles, margin_threshold)?;
        if det.confident {
            entry.confident += 1;
            if &det.lang == gold {
                entry.correct += 1;
            }
            *confusion.entry(gold.clone()).or_default().entry(det.lang).or_default() += 1;
        }
    }
    for e in per_language.values_mut() {
        e.accuracy = ratio(e.correct, e.confident);
    }
    let items = labeled.len();
    let confident: usize = per_language.values().map(|e| e.confident).sum();
    let correct: usize = per_language.values().map(|e| e.correct).sum();
    Ok(EvalReport {
        per_language,
        confusion,
        items,
        confident,
        correct,
        accuracy: ratio(correct, confident),
        abstention_rate: (items - confident) as f64 / items as f64,
    })
}
