//! Acceptance logic: automatic checks on submitted translations, majority-vote
//! aggregation of verdicts, and fast-response flagging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langid::Detector;
use crate::types::{Direction, Lang, Timestamp, WorkerId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastMs {
    pub translate: u64,
    pub verify: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QcConfig {
    pub length_ratio_max: f64,
    pub fast_ms: FastMs,
    pub fast_min_occurrences: usize,
    pub langid_margin: f64,
}

impl Default for QcConfig {
    fn default() -> Self {
        QcConfig {
            length_ratio_max: 3.0,
            fast_ms: FastMs { translate: 10_000, verify: 3_000 },
            fast_min_occurrences: 3,
            langid_margin: crate::langid::DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailedCheck {
    Empty,
    Length,
    Language,
}

impl std::fmt::Display for FailedCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailedCheck::Empty => "empty",
            FailedCheck::Length => "length",
            FailedCheck::Language => "language",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoCheckResult {
    pub passed: bool,
    pub failed_check: Option<FailedCheck>,
    pub detected_lang: Option<Lang>,
    /// max/min of whitespace-stripped character counts; absent when a side is empty.
    pub length_ratio: Option<f64>,
}

fn visible_chars(s: &str) -> usize {
    s.chars().filter(|c| !c.is_whitespace()).count()
}

/// Symmetric character-count ratio; passes while the ratio does not exceed `max_ratio`.
pub fn length_ratio_check_with(src: &str, tgt: &str, max_ratio: f64) -> Result<(bool, f64)> {
    let a = visible_chars(src);
    let b = visible_chars(tgt);
    if a == 0 || b == 0 {
        return Err(Error::input("length ratio needs two non-empty texts"));
    }
    let ratio = a.max(b) as f64 / a.min(b) as f64;
    Ok((ratio <= max_ratio, ratio))
}

pub fn length_ratio_check(src: &str, tgt: &str) -> Result<(bool, f64)> {
    length_ratio_check_with(src, tgt, QcConfig::default().length_ratio_max)
}

/// Checks in order: empty, length, language. The language check only fails on
/// a confident detection of some other language; abstentions pass through to
/// human verification.
pub fn auto_check(
    translation: &str,
    source: &str,
    direction: &Direction,
    detector: &Detector,
    config: &QcConfig,
) -> Result<AutoCheckResult> {
    for lang in [&direction.src, &direction.tgt] {
        if !detector.has_profile(lang) {
            return Err(Error::Config(format!("no language profile for {lang}")));
        }
    }
    if visible_chars(translation) == 0 {
        return Ok(AutoCheckResult {
            passed: false,
            failed_check: Some(FailedCheck::Empty),
            detected_lang: None,
            length_ratio: None,
        });
    }
    let (ok, ratio) = length_ratio_check_with(source, translation, config.length_ratio_max)?;
    if !ok {
        return Ok(AutoCheckResult {
            passed: false,
            failed_check: Some(FailedCheck::Length),
            detected_lang: None,
            length_ratio: Some(ratio),
        });
    }
    let detected = match detector.detect(translation) {
        Ok(d) => Some(d),
        // Nothing but digits and punctuation: no evidence either way.
        Err(Error::Input(_)) => None,
        Err(e) => return Err(e),
    };
    let wrong_language = detected.as_ref().is_some_and(|d| d.confident && d.lang != direction.tgt);
    Ok(AutoCheckResult {
        passed: !wrong_language,
        failed_check: wrong_language.then_some(FailedCheck::Language),
        detected_lang: detected.map(|d| d.lang),
        length_ratio: Some(ratio),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Good,
    Bad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected,
}

pub const VERDICTS_PER_TRANSLATION: usize = 3;

/// Majority of three: accepted when at least two verdicts are good.
pub fn aggregate_verdicts(verdicts: &[Verdict]) -> Result<Decision> {
    if verdicts.len() != VERDICTS_PER_TRANSLATION {
        return Err(Error::input(format!(
            "majority vote needs exactly {VERDICTS_PER_TRANSLATION} verdicts, got {}",
            verdicts.len()
        )));
    }
    let good = verdicts.iter().filter(|v| **v == Verdict::Good).count();
    Ok(if good * 2 > verdicts.len() { Decision::Accepted } else { Decision::Rejected })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Translate,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    FastResponses,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustFlag {
    pub worker_id: WorkerId,
    pub reason: FlagReason,
    pub evidence_count: usize,
    pub flagged_at: Timestamp,
}

pub fn is_fast(kind: ResponseKind, elapsed_ms: u64, config: &QcConfig) -> bool {
    let threshold = match kind {
        ResponseKind::Translate => config.fast_ms.translate,
        ResponseKind::Verify => config.fast_ms.verify,
    };
    elapsed_ms < threshold
}

/// Raises a flag once the history holds at least `fast_min_occurrences` fast responses.
pub fn flag_fast_responses(
    worker_id: WorkerId,
    history: &[(ResponseKind, u64)],
    config: &QcConfig,
    now: Timestamp,
) -> Option<TrustFlag> {
    let fast = history.iter().filter(|(k, ms)| is_fast(*k, *ms, config)).count();
    (fast >= config.fast_min_occurrences.max(1)).then_some(TrustFlag {
        worker_id,
        reason: FlagReason::FastResponses,
        evidence_count: fast,
        flagged_at: now,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chars(n: usize, c: char) -> String {
        std::iter::repeat(c).take(n).collect()
    }

    #[test]
    fn length_rule_boundaries() {
        assert_eq!(length_ratio_check(&chars(30, 'a'), &chars(90, 'b')).unwrap(), (true, 3.0));
        let (ok, ratio) = length_ratio_check(&chars(20, 'a'), &chars(61, 'b')).unwrap();
        assert!(!ok);
        assert!((ratio - 3.05).abs() < 1e-12);
        assert_eq!(length_ratio_check("same text", "same text").unwrap(), (true, 1.0));
    }

    #[test]
    fn length_rule_ignores_whitespace() {
        assert_eq!(length_ratio_check("a b c", "abc").unwrap(), (true, 1.0));
        assert!(matches!(length_ratio_check("  ", "abc"), Err(Error::Input(_))));
        assert!(matches!(length_ratio_check("abc", ""), Err(Error::Input(_))));
    }

    #[test]
    fn majority_examples() {
        use Verdict::*;
        assert_eq!(aggregate_verdicts(&[Good, Good, Good]).unwrap(), Decision::Accepted);
        assert_eq!(aggregate_verdicts(&[Good, Bad, Good]).unwrap(), Decision::Accepted);
        assert_eq!(aggregate_verdicts(&[Bad, Good, Bad]).unwrap(), Decision::Rejected);
        assert!(matches!(aggregate_verdicts(&[Good, Good]), Err(Error::Input(_))));
        assert!(matches!(aggregate_verdicts(&[Good; 4]), Err(Error::Input(_))));
    }

    #[test]
    fn fast_flag_examples() {
        let cfg = QcConfig::default();
        let w = WorkerId(1);
        let now = Timestamp(0);
        let three_fast = [(ResponseKind::Translate, 1_000); 3];
        let flag = flag_fast_responses(w, &three_fast, &cfg, now).unwrap();
        assert_eq!(flag.reason, FlagReason::FastResponses);
        assert_eq!(flag.evidence_count, 3);

        let one_fast = [
            (ResponseKind::Translate, 1_000),
            (ResponseKind::Translate, 45_000),
            (ResponseKind::Verify, 9_000),
            (ResponseKind::Translate, 60_000),
        ];
        assert!(flag_fast_responses(w, &one_fast, &cfg, now).is_none());
        assert!(flag_fast_responses(w, &[], &cfg, now).is_none());
    }

    #[test]
    fn fast_thresholds_are_per_kind() {
        let cfg = QcConfig::default();
        assert!(is_fast(ResponseKind::Translate, 9_999, &cfg));
        assert!(!is_fast(ResponseKind::Translate, 10_000, &cfg));
        assert!(is_fast(ResponseKind::Verify, 2_999, &cfg));
        assert!(!is_fast(ResponseKind::Verify, 5_000, &cfg));
    }

    proptest! {
        #[test]
        fn ratio_is_symmetric(a in "\\PC{1,80}", b in "\\PC{1,80}") {
            let (ra, rb) = (length_ratio_check(&a, &b), length_ratio_check(&b, &a));
            match (ra, rb) {
                (Ok((pa, x)), Ok((pb, y))) => {
                    prop_assert_eq!(x, y);
                    prop_assert_eq!(pa, pb);
                    prop_assert_eq!(pa, x <= 3.0);
                    prop_assert!(x >= 1.0);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric error"),
            }
        }
    }
}
