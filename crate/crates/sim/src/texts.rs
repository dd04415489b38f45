//! Text pools that simulated requesters and workers draw sentences from.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Result, SimError};

const MAX_SENTENCE_CHARS: usize = 480;

#[derive(Debug, Clone, Default)]
pub struct TextSupply {
    by_lang: BTreeMap<String, Vec<String>>,
}

/// Lowercased, whitespace-collapsed, digit runs folded to `0`.
pub fn normal_form(text: &str) -> String {
    let mut out = String::new();
    for (i, word) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let mut in_digits = false;
        for c in word.chars() {
            if c.is_numeric() {
                if !in_digits {
                    out.push('0');
                }
                in_digits = true;
            } else {
                in_digits = false;
                out.extend(c.to_lowercase());
            }
        }
    }
    out
}

pub fn visible_chars(s: &str) -> usize {
    s.chars().filter(|c| !c.is_whitespace()).count()
}

impl TextSupply {
    /// Reads every `<code>.txt` in `dir`, one sentence per line.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| SimError::Input(format!("{}: {e}", dir.display())))?;
        let mut supply = TextSupply::default();
        for entry in entries {
            let path = entry.map_err(|e| SimError::Input(e.to_string()))?.path();
            if path.extension().is_none_or(|e| e != "txt") {
                continue;
            }
            let Some(code) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            let text = std::fs::read_to_string(&path).map_err(|e| SimError::Input(format!("{}: {e}", path.display())))?;
            supply.insert(code, text.lines().map(str::to_string).collect());
        }
        Ok(supply)
    }

    pub fn insert(&mut self, lang: &str, lines: Vec<String>) {
        let lines: Vec<String> = lines.into_iter().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
        self.by_lang.insert(lang.to_string(), lines);
    }

    pub fn langs(&self) -> impl Iterator<Item = &str> {
        self.by_lang.keys().map(String::as_str)
    }

    pub fn lines(&self, lang: &str) -> Result<&[String]> {
        match self.by_lang.get(lang) {
            Some(v) if v.len() >= 2 => Ok(v),
            _ => Err(SimError::Input(format!("no text supply for {lang}"))),
        }
    }

    /// Two distinct lines joined by a space, at most 480 characters long.
    pub fn sentence(&self, lang: &str, rng: &mut impl Rng) -> Result<String> {
        let lines = self.lines(lang)?;
        for _ in 0..64 {
            let a = lines.choose(rng).expect("non-empty");
            let b = lines.choose(rng).expect("non-empty");
            if a != b && a.chars().count() + b.chars().count() < MAX_SENTENCE_CHARS {
                return Ok(format!("{a} {b}"));
            }
        }
        Err(SimError::Input(format!("the {lang} lines are too long to combine")))
    }

    /// `n` sentences whose normal forms are new to `seen`.
    pub fn fresh_sentences(&self, lang: &str, n: usize, seen: &mut HashSet<String>, rng: &mut impl Rng) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(n);
        let mut misses = 0;
        while out.len() < n {
            let s = self.sentence(lang, rng)?;
            if seen.insert(normal_form(&s)) {
                out.push(s);
            } else {
                misses += 1;
                if misses > 100 * n + 1000 {
                    return Err(SimError::Input(format!("cannot draw {n} distinct {lang} sentences")));
                }
            }
        }
        Ok(out)
    }

    /// A sentence in `lang` whose length is within `max_ratio` of `source`,
    /// or the closest candidate seen.
    pub fn sentence_like(&self, lang: &str, source: &str, max_ratio: f64, rng: &mut impl Rng) -> Result<String> {
        let want = visible_chars(source).max(1) as f64;
        let mut best: Option<(f64, String)> = None;
        for _ in 0..32 {
            let candidate = if rng.random_bool(0.5) {
                self.sentence(lang, rng)?
            } else {
                self.lines(lang)?.choose(rng).expect("non-empty").clone()
            };
            let have = visible_chars(&candidate).max(1) as f64;
            let ratio = have.max(want) / have.min(want);
            if ratio <= max_ratio {
                return Ok(candidate);
            }
            if best.as_ref().is_none_or(|(r, _)| ratio < *r) {
                best = Some((ratio, candidate));
            }
        }
        Ok(best.expect("at least one candidate").1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn normal_form_folds_case_space_and_digits() {
        assert_eq!(normal_form("  Route 66 \t runs  1926 "), "route 0 runs 0");
    }

    #[test]
    fn fresh_sentences_are_distinct() {
        let mut s = TextSupply::default();
        s.insert("eng", (0..20).map(|i| format!("line number {}", "x".repeat(i + 1))).collect());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut seen = HashSet::new();
        let v = s.fresh_sentences("eng", 300, &mut seen, &mut rng).unwrap();
        assert_eq!(v.iter().map(|x| normal_form(x)).collect::<HashSet<_>>().len(), 300);
        assert!(s.fresh_sentences("eng", 1000, &mut seen, &mut rng).is_err());
    }
}
