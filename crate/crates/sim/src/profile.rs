//! Simulated worker profiles and run configuration.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheatMode {
    /// Pastes the source sentence back as the translation.
    CopySource,
    /// Submits fluent text in a language other than the target.
    WrongLanguage,
    /// Answers everything at random within a second or two.
    RandomFast,
}

/// Log-normal response times, parameterised by median and log-space spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Speed {
    pub translate_median_ms: f64,
    pub verify_median_ms: f64,
    pub sigma: f64,
}

impl Default for Speed {
    fn default() -> Self {
        Speed { translate_median_ms: 60_000.0, verify_median_ms: 15_000.0, sigma: 0.4 }
    }
}

impl Speed {
    fn validate(&self) -> Result<()> {
        let ok = |m: f64| m.is_finite() && m > 0.0;
        if !ok(self.translate_median_ms) || !ok(self.verify_median_ms) || !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(SimError::Input(format!("bad speed parameters {self:?}")));
        }
        Ok(())
    }

    fn sample(median: f64, sigma: f64, rng: &mut impl Rng) -> u64 {
        let dist = LogNormal::new(median.ln(), sigma).expect("validated parameters");
        dist.sample(rng).round().max(1.0) as u64
    }

    pub fn translate_ms(&self, rng: &mut impl Rng) -> u64 {
        Self::sample(self.translate_median_ms, self.sigma, rng)
    }

    pub fn verify_ms(&self, rng: &mut impl Rng) -> u64 {
        Self::sample(self.verify_median_ms, self.sigma, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimWorkerProfile {
    /// Number of identical workers this entry stands for.
    #[serde(default = "one")]
    pub count: usize,
    pub langs: Vec<String>,
    /// Probability that a produced translation is truly good.
    #[serde(alias = "g")]
    pub translate_adequacy: f64,
    /// Probability that a verdict or exam answer matches the truth.
    #[serde(alias = "q")]
    pub verdict_accuracy: f64,
    #[serde(default)]
    pub speed: Speed,
    #[serde(default)]
    pub cheat_mode: Option<CheatMode>,
}

fn one() -> usize {
    1
}

impl SimWorkerProfile {
    pub fn honest(langs: &[&str], g: f64, q: f64, count: usize) -> Self {
        SimWorkerProfile {
            count,
            langs: langs.iter().map(|s| s.to_string()).collect(),
            translate_adequacy: g,
            verdict_accuracy: q,
            speed: Speed::default(),
            cheat_mode: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("translate_adequacy", self.translate_adequacy), ("verdict_accuracy", self.verdict_accuracy)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Input(format!("{name} = {p} is not a probability")));
            }
        }
        if self.langs.is_empty() {
            return Err(SimError::Input("a worker profile needs at least one language".into()));
        }
        if self.count == 0 {
            return Err(SimError::Input("profile count must be positive".into()));
        }
        self.speed.validate()
    }

    pub fn speaks(&self, direction: &(String, String)) -> bool {
        self.langs.contains(&direction.0) && self.langs.contains(&direction.1)
    }
}

/// One simulation run, as read from a profiles file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Directions to exercise, such as `eng-deu`.
    pub directions: Vec<String>,
    pub workers: Vec<SimWorkerProfile>,
    #[serde(default)]
    pub sources_per_direction: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SimError::Input(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.is_empty() {
            return Err(SimError::Input("no directions to simulate".into()));
        }
        for d in &self.directions {
            split_direction(d)?;
        }
        if self.workers.is_empty() {
            return Err(SimError::Input("no worker profiles".into()));
        }
        self.workers.iter().try_for_each(SimWorkerProfile::validate)
    }

    /// The common (g, q) when every worker is honest and identical in both.
    pub fn homogeneous_honest(&self) -> Option<(f64, f64)> {
        let first = self.workers.first()?;
        let same = self.workers.iter().all(|w| {
            w.cheat_mode.is_none()
                && w.translate_adequacy == first.translate_adequacy
                && w.verdict_accuracy == first.verdict_accuracy
        });
        (same && first.cheat_mode.is_none()).then_some((first.translate_adequacy, first.verdict_accuracy))
    }
}

pub fn split_direction(d: &str) -> Result<(String, String)> {
    match d.split_once('-') {
        Some((s, t)) if !s.is_empty() && !t.is_empty() && s != t && !t.contains('-') => Ok((s.to_string(), t.to_string())),
        _ => Err(SimError::Input(format!("bad direction {d:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn profile_file_uses_short_names() {
        let cfg: SimConfig = serde_json::from_str(
            r#"{"directions": ["eng-deu"], "workers": [{"count": 3, "langs": ["eng", "deu"], "g": 0.7, "q": 0.9}]}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.workers[0].speed, Speed::default());
        assert_eq!(cfg.homogeneous_honest(), Some((0.7, 0.9)));
    }

    #[test]
    fn invalid_profiles() {
        let mut p = SimWorkerProfile::honest(&["eng"], 1.2, 0.9, 1);
        assert!(p.validate().is_err());
        p.translate_adequacy = 0.5;
        p.speed.sigma = -1.0;
        assert!(p.validate().is_err());
        assert!(split_direction("eng").is_err());
        assert!(split_direction("eng-eng").is_err());
    }

    #[test]
    fn speed_median_is_respected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = Speed::default();
        let mut xs: Vec<u64> = (0..4001).map(|_| s.verify_ms(&mut rng)).collect();
        xs.sort_unstable();
        let median = xs[2000] as f64;
        assert!((median - 15_000.0).abs() < 600.0, "{median}");
    }
}
