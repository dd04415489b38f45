//! Seeded, single-threaded simulation of a worker population.
//!
//! The simulator plays the requester (uploads sources, publishes exams with
//! known answers) and every worker. It keeps the ground truth of each
//! translation to itself; the service only sees text, timings and verdicts.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::api::{
    Client, CostReport, Decision, ExamForm, ExamItem, FunnelStats, Handle, Label, Submission, TaskKind, Verdict,
    VerdictReply,
};
use crate::error::{Result, SimError};
use crate::oracle::expected_acceptance_rate;
use crate::profile::{split_direction, CheatMode, SimConfig, SimWorkerProfile};
use crate::texts::TextSupply;

/// Stays under the service's default length limit of 3.0.
const HONEST_LENGTH_RATIO: f64 = 2.5;
const UPLOAD_BATCH: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub sources: u64,
    pub submitted: u64,
    pub auto_rejected: u64,
    /// Submissions that passed the automatic checks.
    pub translated: u64,
    /// Translations that received all three verdicts.
    pub fully_verified: u64,
    pub accepted: u64,
    pub truly_good_finalized: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamTally {
    pub taken: u64,
    pub passed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub workers: usize,
    pub directions: BTreeMap<String, DirectionReport>,
    /// Accepted over fully verified, across simulated directions.
    pub acceptance_rate: f64,
    /// Present when every worker is honest with the same g and q.
    pub expected_acceptance_rate: Option<f64>,
    /// Auto-rejected over submitted.
    pub auto_reject_rate: f64,
    pub flags_raised: u64,
    pub exams: ExamTally,
    /// Directions left with translations that never got three verdicts.
    pub starved: Vec<String>,
    /// The service's own funnel at the end of the run.
    pub funnel: FunnelStats,
    pub cost: CostReport,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct SimWorker {
    profile: SimWorkerProfile,
    token: String,
    active: bool,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// A ten-item form whose answers only the simulator knows.
fn exam_form(direction: &(String, String), name: &str, texts: &TextSupply, seed: u64, rng: &mut impl Rng) -> Result<ExamForm> {
    let (src, tgt) = direction;
    let other = texts.langs().find(|l| *l != src && *l != tgt).unwrap_or(src).to_string();
    let mut items = Vec::with_capacity(10);
    let kinds = [None, None, None, None, None, Some("mismatch"), Some("mismatch"), Some("wrong_language"), Some("word_for_word"), Some("word_for_word")];
    for kind in kinds {
        let s = texts.sentence(src, rng)?;
        let t = match kind {
            Some("wrong_language") => texts.sentence(&other, rng)?,
            _ => texts.sentence_like(tgt, &s, HONEST_LENGTH_RATIO, rng)?,
        };
        items.push(ExamItem {
            src: s,
            tgt: t,
            true_label: if kind.is_none() { Label::Correct } else { Label::Incorrect },
            distractor_kind: kind.map(str::to_string),
        });
    }
    Ok(ExamForm { direction: name.to_string(), version: format!("sim-{seed}"), items })
}

/// Uploads sources until `n` have been kept, returning the kept count.
fn upload_sources(client: &Client, name: &str, src: &str, n: usize, texts: &TextSupply, rng: &mut impl Rng) -> Result<u64> {
    let mut seen = HashSet::new();
    let mut kept = 0usize;
    let mut rounds = 0;
    while kept < n {
        rounds += 1;
        if rounds > 20 {
            return Err(SimError::Input(format!("the service keeps dropping {src} sentences; {kept} of {n} kept")));
        }
        let want = (n - kept).min(UPLOAD_BATCH);
        let batch = texts.fresh_sentences(src, want, &mut seen, rng)?;
        kept += client.upload_sources(src, "simulation", &batch, Some(name))?.report.kept;
    }
    Ok(kept as u64)
}

fn produce_translation(
    profile: &SimWorkerProfile,
    direction: &(String, String),
    source: &str,
    texts: &TextSupply,
    rng: &mut impl Rng,
) -> Result<(String, u64, bool)> {
    let (src, tgt) = direction;
    Ok(match profile.cheat_mode {
        None => {
            let good = rng.random_bool(profile.translate_adequacy);
            let text = texts.sentence_like(tgt, source, HONEST_LENGTH_RATIO, rng)?;
            (text, profile.speed.translate_ms(rng), good)
        }
        Some(CheatMode::CopySource) => (source.to_string(), profile.speed.translate_ms(rng), false),
        Some(CheatMode::WrongLanguage) => {
            let others: Vec<&str> = texts.langs().filter(|l| l != tgt && l != src).collect();
            let lang = others.choose(rng).copied().unwrap_or(src.as_str());
            (texts.sentence_like(lang, source, HONEST_LENGTH_RATIO, rng)?, profile.speed.translate_ms(rng), false)
        }
        Some(CheatMode::RandomFast) => {
            let text = texts.sentence_like(tgt, source, HONEST_LENGTH_RATIO, rng)?;
            (text, rng.random_range(300..2_000), false)
        }
    })
}

fn flagged(e: &SimError) -> bool {
    e.status() == Some(403)
}

/// Runs one simulation against the service behind `client`.
pub fn simulate(client: &Client, config: &SimConfig, texts: &TextSupply) -> Result<SimulationReport> {
    config.validate()?;
    if config.sources_per_direction == 0 {
        return Err(SimError::Input("sources_per_direction must be positive".into()));
    }
    let seed = config.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Vec<(String, (String, String))> =
        config.directions.iter().map(|d| split_direction(d).map(|p| (d.clone(), p))).collect::<Result<_>>()?;

    let mut per_dir: BTreeMap<String, DirectionReport> = BTreeMap::new();
    let mut forms: HashMap<String, ExamForm> = HashMap::new();
    for (name, pair) in &directions {
        let form = exam_form(pair, name, texts, seed, &mut rng)?;
        client.publish_exam(&form)?;
        forms.insert(name.clone(), form);
        let sources = upload_sources(client, name, &pair.0, config.sources_per_direction, texts, &mut rng)?;
        per_dir.entry(name.clone()).or_default().sources = sources;
    }

    let mut exams = ExamTally::default();
    let mut workers = Vec::new();
    for profile in &config.workers {
        for _ in 0..profile.count {
            let name = format!("sim-{seed}-{}", workers.len());
            let reg = client.register(&name, &profile.langs)?;
            for (dname, pair) in &directions {
                if !profile.speaks(pair) {
                    continue;
                }
                let form = &forms[dname];
                let answers: Vec<Label> = form
                    .items
                    .iter()
                    .map(|item| match profile.cheat_mode {
                        Some(CheatMode::RandomFast) => {
                            if rng.random_bool(0.5) {
                                Label::Correct
                            } else {
                                Label::Incorrect
                            }
                        }
                        _ if rng.random_bool(profile.verdict_accuracy) => item.true_label,
                        _ => item.true_label.flipped(),
                    })
                    .collect();
                let grade = client.answer_exam(&reg.token, dname, &form.version, &answers)?;
                exams.taken += 1;
                exams.passed += grade.passed as u64;
            }
            workers.push(SimWorker { profile: profile.clone(), token: reg.token, active: true });
        }
    }

    let pairs: HashMap<String, (String, String)> = directions.iter().cloned().collect();
    let mut truth: HashMap<u64, bool> = HashMap::new();
    let mut flags_raised = 0u64;
    loop {
        let mut progress = false;
        for w in workers.iter_mut().filter(|w| w.active) {
            let handle = match client.next_task(&w.token, TaskKind::Translate) {
                Ok(h) => h,
                Err(e) if flagged(&e) => {
                    w.active = false;
                    flags_raised += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let Some(Handle::Translate { task_id, direction, source }) = handle else { continue };
            let Some(pair) = pairs.get(&direction) else {
                return Err(SimError::Protocol(format!("task {task_id} is in unsimulated direction {direction}")));
            };
            let (text, elapsed, good) = produce_translation(&w.profile, pair, &source, texts, &mut rng)?;
            let counters = per_dir.entry(direction.clone()).or_default();
            counters.submitted += 1;
            match client.submit_translation(&w.token, task_id, &text, elapsed)? {
                Submission::AutoRejected { .. } => counters.auto_rejected += 1,
                Submission::QueuedForVerification { translation_id } => {
                    counters.translated += 1;
                    truth.insert(translation_id, good);
                }
            }
            progress = true;
        }
        for w in workers.iter_mut().filter(|w| w.active) {
            let handle = match client.next_task(&w.token, TaskKind::Verify) {
                Ok(h) => h,
                Err(e) if flagged(&e) => {
                    w.active = false;
                    flags_raised += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let Some(Handle::Verify { assignment_id, translation_id, direction, .. }) = handle else { continue };
            let good = truth.get(&translation_id).copied();
            let (verdict_good, elapsed) = match (w.profile.cheat_mode, good) {
                (Some(CheatMode::RandomFast), _) | (_, None) => (rng.random_bool(0.5), rng.random_range(300..2_000)),
                (_, Some(g)) => (if rng.random_bool(w.profile.verdict_accuracy) { g } else { !g }, w.profile.speed.verify_ms(&mut rng)),
            };
            let verdict = if verdict_good { Verdict::Good } else { Verdict::Bad };
            if let VerdictReply::Finalized { decision, .. } = client.submit_verdict(&w.token, assignment_id, verdict, elapsed)? {
                let counters = per_dir.entry(direction).or_default();
                counters.fully_verified += 1;
                counters.accepted += (decision == Decision::Accepted) as u64;
                counters.truly_good_finalized += good.unwrap_or(false) as u64;
            }
            progress = true;
        }
        if !progress {
            break;
        }
    }

    let sum = |f: fn(&DirectionReport) -> u64| per_dir.values().map(f).sum::<u64>();
    let starved = per_dir.iter().filter(|(_, c)| c.fully_verified < c.translated).map(|(d, _)| d.clone()).collect();
    let expected = match config.homogeneous_honest() {
        Some((g, q)) => Some(expected_acceptance_rate(g, q)?),
        None => None,
    };
    Ok(SimulationReport {
        seed,
        workers: workers.len(),
        acceptance_rate: ratio(sum(|c| c.accepted), sum(|c| c.fully_verified)),
        expected_acceptance_rate: expected,
        auto_reject_rate: ratio(sum(|c| c.auto_rejected), sum(|c| c.submitted)),
        flags_raised,
        exams,
        starved,
        funnel: client.funnel()?,
        cost: client.cost()?,
        directions: per_dir,
    })
}
