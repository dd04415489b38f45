//! Source sentence ingestion: normalization, template and duplicate removal,
//! language filtering.

use std::collections::{HashMap, HashSet};
use std::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langid::Detector;
use crate::types::{Lang, SourceId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLine {
    pub text: String,
    pub origin: String,
}

impl RawLine {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        RawLine { text: text.into(), origin: origin.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceStatus {
    Pool,
    Tasked,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSentence {
    pub id: SourceId,
    pub text: String,
    pub lang: Lang,
    pub origin: String,
    pub status: SourceStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input_count: usize,
    pub kept: usize,
    pub dropped_template: usize,
    pub dropped_duplicate: usize,
    pub dropped_language: usize,
    pub dropped_malformed: usize,
}

impl IngestReport {
    pub fn is_conserved(&self) -> bool {
        self.kept
            + self.dropped_template
            + self.dropped_duplicate
            + self.dropped_language
            + self.dropped_malformed
            == self.input_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub min_chars: usize,
    pub max_chars: usize,
    /// A normalized form may appear this many times in one batch before it is
    /// treated as a template.
    pub max_occurrences: NonZeroUsize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            min_chars: 15,
            max_chars: 500,
            max_occurrences: NonZeroUsize::new(3).expect("non-zero"),
        }
    }
}

/// Trim, collapse whitespace, lowercase, and replace each digit run with `0`.
pub fn normalize_sentence(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
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

/// Splits a batch into lines to keep and template lines to flag. A normalized
/// form occurring more than `max_occurrences` times keeps only its first line.
pub fn filter_templates(lines: Vec<RawLine>, max_occurrences: NonZeroUsize) -> (Vec<RawLine>, Vec<RawLine>) {
    let forms: Vec<String> = lines.iter().map(|l| normalize_sentence(&l.text)).collect();
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for f in &forms {
        *freq.entry(f.as_str()).or_default() += 1;
    }
    let mut seen_template: HashSet<&str> = HashSet::new();
    let mut kept = Vec::new();
    let mut flagged = Vec::new();
    for (line, form) in lines.into_iter().zip(&forms) {
        if freq[form.as_str()] > max_occurrences.get() && !seen_template.insert(form.as_str()) {
            flagged.push(line);
        } else {
            kept.push(line);
        }
    }
    (kept, flagged)
}

/// A line that survived screening, with its trimmed text and normalized form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accepted {
    pub text: String,
    pub origin: String,
    pub normalized: String,
}

/// Runs the ingest filters in order: malformed, template, duplicate, language.
/// `is_known` reports normalized forms already present in the pool. Persisting
/// the accepted lines is the caller's job.
pub fn screen(
    lines: Vec<RawLine>,
    expected_lang: &Lang,
    detector: &Detector,
    config: &IngestConfig,
    is_known: impl Fn(&str) -> bool,
) -> Result<(IngestReport, Vec<Accepted>)> {
    if !detector.has_profile(expected_lang) {
        return Err(Error::Config(format!("no language profile for {expected_lang}")));
    }
    let mut report = IngestReport { input_count: lines.len(), ..Default::default() };

    let mut well_formed = Vec::with_capacity(lines.len());
    for line in lines {
        let text = line.text.trim();
        let chars = text.chars().count();
        if chars == 0 || chars < config.min_chars || chars > config.max_chars {
            report.dropped_malformed += 1;
        } else {
            well_formed.push(RawLine { text: text.to_string(), origin: line.origin });
        }
    }

    let (kept, flagged) = filter_templates(well_formed, config.max_occurrences);
    report.dropped_template = flagged.len();

    let mut batch_forms: HashSet<String> = HashSet::new();
    let mut accepted = Vec::new();
    for line in kept {
        let normalized = normalize_sentence(&line.text);
        if is_known(&normalized) || batch_forms.contains(&normalized) {
            report.dropped_duplicate += 1;
            continue;
        }
        batch_forms.insert(normalized.clone());
        let detection = match detector.detect(&line.text) {
            Ok(d) => Some(d),
            // No letters at all.
            Err(Error::Input(_)) => None,
            Err(e) => return Err(e),
        };
        if !detection.is_some_and(|d| d.confident && &d.lang == expected_lang) {
            report.dropped_language += 1;
            continue;
        }
        accepted.push(Accepted { text: line.text, origin: line.origin, normalized });
    }
    report.kept = accepted.len();
    debug_assert!(report.is_conserved());
    Ok((report, accepted))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(texts: &[&str]) -> Vec<RawLine> {
        texts.iter().map(|t| RawLine::new(*t, "test")).collect()
    }

    fn texts(lines: &[RawLine]) -> Vec<&str> {
        lines.iter().map(|l| l.text.as_str()).collect()
    }

    fn nz(n: usize) -> NonZeroUsize {
        NonZeroUsize::new(n).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_sentence("  Hello,   World! "), "hello, world!");
        assert_eq!(normalize_sentence("В 1995 году"), "в 0 году");
        assert_eq!(normalize_sentence(""), "");
        assert_eq!(normalize_sentence("a12b3 4"), "a0b0 0");
        assert_eq!(normalize_sentence("\t\n "), "");
    }

    #[test]
    fn three_stubs_over_threshold_two() {
        let (kept, flagged) = filter_templates(raw(&["stub", "stub", "stub"]), nz(2));
        assert_eq!(kept.len(), 1);
        assert_eq!(flagged.len(), 2);
    }

    #[test]
    fn at_threshold_is_kept() {
        let (kept, flagged) = filter_templates(raw(&["stub", "stub"]), nz(2));
        assert_eq!(kept.len(), 2);
        assert!(flagged.is_empty());
    }

    #[test]
    fn normalization_folds_case() {
        let (kept, flagged) = filter_templates(raw(&["A river.", "A RIVER.", "Unique text."]), nz(1));
        assert_eq!(texts(&kept), ["A river.", "Unique text."]);
        assert_eq!(texts(&flagged), ["A RIVER."]);
    }

    #[test]
    fn digit_runs_make_templates() {
        let lines = raw(&[
            "Village 12 is in district 4.",
            "Village 7 is in district 91.",
            "Village 300 is in district 2.",
            "Something else entirely.",
        ]);
        let (kept, flagged) = filter_templates(lines, nz(2));
        assert_eq!(texts(&kept), ["Village 12 is in district 4.", "Something else entirely."]);
        assert_eq!(flagged.len(), 2);
    }

    #[test]
    fn kept_order_is_preserved() {
        let (kept, _) = filter_templates(raw(&["c", "a", "b", "a", "a"]), nz(1));
        assert_eq!(texts(&kept), ["c", "a", "b"]);
    }
}
