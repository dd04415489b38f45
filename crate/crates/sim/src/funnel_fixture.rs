//! Generator for the shipped collection-funnel fixture.
//!
//! The fixture is an accounting replay: per direction it reproduces how many
//! translations entered verification, how many received three verdicts and how
//! many were accepted. Chechen and Russian rows are real parallel CLDR display
//! names. The Fula rows pair unrelated sentences of similar length, because no
//! Fula parallel text ships with this repository; only their counts matter.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::api::{ExamItem, Label, Verdict};
use crate::error::{Result, SimError};
use crate::fixture::{
    ExamAnswersPayload, ExamPayload, FixtureEvent, NotePayload, SourcesPayload, TranslationPayload, VerdictPayload,
    WorkerPayload,
};
use crate::texts::{normal_form, visible_chars};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunnelTarget {
    pub direction: &'static str,
    pub translated: usize,
    pub fully_verified: usize,
    pub in_corpus: usize,
    /// Copy-the-source submissions that the language check turns away.
    pub auto_rejected: usize,
}

pub const TARGETS: [FunnelTarget; 4] = [
    FunnelTarget { direction: "che-rus", translated: 491, fully_verified: 491, in_corpus: 380, auto_rejected: 3 },
    FunnelTarget { direction: "rus-che", translated: 605, fully_verified: 605, in_corpus: 469, auto_rejected: 5 },
    FunnelTarget { direction: "fuv-eng", translated: 220, fully_verified: 88, in_corpus: 53, auto_rejected: 4 },
    FunnelTarget { direction: "eng-fuv", translated: 311, fully_verified: 286, in_corpus: 176, auto_rejected: 6 },
];

pub const SEED: u64 = 2021;

/// Text the generator draws from.
#[derive(Debug, Clone, Default)]
pub struct Material {
    pub che_rus: Vec<(String, String)>,
    pub fuv: Vec<String>,
    pub eng: Vec<String>,
}

impl Material {
    /// Reads `parallel/che-rus.tsv`, `seeds/fuv.txt` and `seeds/eng.txt` under `data`.
    pub fn load(data: &Path) -> Result<Self> {
        let read = |rel: &str| {
            std::fs::read_to_string(data.join(rel)).map_err(|e| SimError::Input(format!("{}: {e}", data.join(rel).display())))
        };
        let che_rus = read("parallel/che-rus.tsv")?
            .lines()
            .filter_map(|l| l.split_once('\t'))
            .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
            .filter(|(a, b)| !a.is_empty() && !b.is_empty())
            .collect();
        let lines = |s: String| s.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect::<Vec<_>>();
        Ok(Material { che_rus, fuv: lines(read("seeds/fuv.txt")?), eng: lines(read("seeds/eng.txt")?) })
    }
}

/// Accepts `(lang, text)` when the service would take `text` as `lang`.
pub type Acceptor<'a> = &'a dyn Fn(&str, &str) -> bool;

#[derive(Debug, Clone)]
enum Outcome {
    AutoRejected,
    Pending,
    Verified { accepted: bool },
}

#[derive(Debug, Clone)]
struct Job {
    direction: &'static str,
    source: String,
    translation: String,
    outcome: Outcome,
}

fn chars_ok(s: &str) -> bool {
    (20..=400).contains(&s.chars().count())
}

/// Clauses of the Fula lines, short enough to pass as single sentences.
fn fuv_units(lines: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for line in lines {
        for sentence in line.split(['.', ';', ':']) {
            let sentence = sentence.trim().trim_end_matches(',').trim();
            let pieces: Vec<String> = if sentence.chars().count() > 300 {
                sentence.split(", ").map(|p| p.trim().to_string()).collect()
            } else {
                vec![sentence.to_string()]
            };
            for p in pieces {
                if chars_ok(&p) && seen.insert(normal_form(&p)) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Index of the least-used entry within `max_ratio` of `len`, nearest first.
fn closest(pool: &[String], uses: &[usize], len: usize, max_ratio: f64) -> Option<usize> {
    let want = len.max(1) as f64;
    pool.iter()
        .enumerate()
        .map(|(i, s)| {
            let have = visible_chars(s).max(1) as f64;
            (i, have.max(want) / have.min(want))
        })
        .filter(|(_, r)| *r <= max_ratio)
        .min_by(|a, b| uses[a.0].cmp(&uses[b.0]).then(a.1.total_cmp(&b.1)).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// Three to five CLDR names joined by commas, one text per language.
fn compound(pairs: &[(String, String)], rng: &mut impl Rng) -> (String, String) {
    let k = rng.random_range(3..=5);
    let picked: Vec<&(String, String)> = pairs.choose_multiple(rng, k).collect();
    let che = picked.iter().map(|p| p.0.as_str()).collect::<Vec<_>>().join(", ");
    let rus = picked.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join(", ");
    (che, rus)
}

fn outcomes(t: &FunnelTarget, rng: &mut impl Rng) -> (Vec<Outcome>, Vec<Outcome>) {
    let mut main: Vec<Outcome> = Vec::new();
    main.extend((0..t.auto_rejected).map(|_| Outcome::AutoRejected));
    main.extend((0..t.fully_verified).map(|i| Outcome::Verified { accepted: i < t.in_corpus }));
    main.shuffle(rng);
    let pending = (0..t.translated - t.fully_verified).map(|_| Outcome::Pending).collect();
    (main, pending)
}

fn che_rus_jobs(material: &Material, accepts: Acceptor<'_>, rng: &mut impl Rng) -> Result<(Vec<Job>, Vec<(String, String)>)> {
    let mut seen_che = HashSet::new();
    let mut seen_rus = HashSet::new();
    let mut jobs = Vec::new();
    let mut exam_pairs = Vec::new();
    for t in &TARGETS[..2] {
        let (main, _) = outcomes(t, rng);
        for outcome in main {
            let mut tries = 0;
            let (che, rus) = loop {
                tries += 1;
                if tries > 10_000 {
                    return Err(SimError::Input("cannot find usable Chechen/Russian compounds".into()));
                }
                let (che, rus) = compound(&material.che_rus, rng);
                if !chars_ok(&che) || !chars_ok(&rus) || !accepts("che", &che) || !accepts("rus", &rus) {
                    continue;
                }
                if seen_che.insert(normal_form(&che)) && seen_rus.insert(normal_form(&rus)) {
                    break (che, rus);
                }
            };
            let (source, translation) = if t.direction == "che-rus" { (che, rus) } else { (rus, che) };
            jobs.push(Job { direction: t.direction, source, translation, outcome });
        }
    }
    while exam_pairs.len() < 12 {
        let (che, rus) = compound(&material.che_rus, rng);
        if seen_che.insert(normal_form(&che)) && seen_rus.insert(normal_form(&rus)) {
            exam_pairs.push((che, rus));
        }
    }
    Ok((jobs, exam_pairs))
}

fn fula_jobs(material: &Material, accepts: Acceptor<'_>, rng: &mut impl Rng) -> Result<(Vec<Job>, Vec<Job>)> {
    let fuv: Vec<String> = fuv_units(&material.fuv).into_iter().filter(|s| accepts("fuv", s)).collect();
    let eng: Vec<String> = material
        .eng
        .iter()
        .filter(|s| chars_ok(s) && accepts("eng", s))
        .scan(HashSet::new(), |seen, s| Some(seen.insert(normal_form(s)).then(|| s.clone())))
        .flatten()
        .collect();
    let mut fuv_uses = vec![0usize; fuv.len()];
    let mut eng_uses = vec![0usize; eng.len()];
    let mut fuv_order: Vec<usize> = (0..fuv.len()).collect();
    fuv_order.shuffle(rng);
    let mut eng_order: Vec<usize> = (0..eng.len()).collect();
    eng_order.shuffle(rng);
    let mut fuv_sources = fuv_order.into_iter();
    let mut eng_sources = eng_order.into_iter();

    let mut main = Vec::new();
    let mut pending = Vec::new();
    for t in &TARGETS[2..] {
        let (m, p) = outcomes(t, rng);
        for (outcome, is_pending) in m.into_iter().map(|o| (o, false)).chain(p.into_iter().map(|o| (o, true))) {
            let job = if t.direction == "fuv-eng" {
                let s = fuv_sources.next().ok_or_else(|| SimError::Input("not enough Fula source sentences".into()))?;
                fuv_uses[s] += usize::MAX / 2;
                let len = visible_chars(&fuv[s]);
                let e = closest(&eng, &eng_uses, len, 1.6)
                    .ok_or_else(|| SimError::Input(format!("no English line near {len} characters")))?;
                eng_uses[e] += 1;
                Job { direction: t.direction, source: fuv[s].clone(), translation: eng[e].clone(), outcome }
            } else {
                let s = loop {
                    let s = eng_sources.next().ok_or_else(|| SimError::Input("not enough English source sentences".into()))?;
                    if eng_uses[s] == 0 {
                        break s;
                    }
                };
                eng_uses[s] += usize::MAX / 2;
                let len = visible_chars(&eng[s]);
                let f = closest(&fuv, &fuv_uses, len, 1.6)
                    .ok_or_else(|| SimError::Input(format!("no Fula clause near {len} characters")))?;
                fuv_uses[f] += 1;
                Job { direction: t.direction, source: eng[s].clone(), translation: fuv[f].clone(), outcome }
            };
            if is_pending {
                pending.push(job);
            } else {
                main.push(job);
            }
        }
    }
    Ok((main, pending))
}

/// Spreads each group's verdicts so that every verifier ends on a whole
/// number of ten-verdict sets. The polyglot takes the remainders.
struct VerifierPlan {
    quotas: Vec<(String, usize)>,
}

impl VerifierPlan {
    fn new(names: &[String], total: usize, polyglot: &str, polyglot_share: usize) -> Result<Self> {
        let rest = total - polyglot_share;
        if rest % 10 != 0 {
            return Err(SimError::Input(format!("{rest} verdicts do not split into sets of ten")));
        }
        let sets = rest / 10;
        let n = names.len();
        let quotas = names
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), 10 * (sets / n + usize::from(i < sets % n))))
            .chain(std::iter::once((polyglot.to_string(), polyglot_share)))
            .collect();
        Ok(VerifierPlan { quotas })
    }

    /// The three verifiers with the most verdicts left.
    fn next_triple(&mut self) -> Result<[String; 3]> {
        let mut order: Vec<usize> = (0..self.quotas.len()).collect();
        order.sort_by(|a, b| self.quotas[*b].1.cmp(&self.quotas[*a].1).then(a.cmp(b)));
        let picked: Vec<usize> = order.into_iter().take(3).filter(|i| self.quotas[*i].1 > 0).collect();
        if picked.len() < 3 {
            return Err(SimError::Input("verifier quotas exhausted".into()));
        }
        let mut out: [String; 3] = Default::default();
        for (slot, i) in picked.into_iter().enumerate() {
            self.quotas[i].1 -= 1;
            out[slot] = self.quotas[i].0.clone();
        }
        Ok(out)
    }
}

fn verdicts(accepted: bool, rng: &mut impl Rng) -> [Verdict; 3] {
    let (yes, no) = if accepted { (Verdict::Good, Verdict::Bad) } else { (Verdict::Bad, Verdict::Good) };
    if rng.random_bool(0.75) {
        [yes; 3]
    } else {
        let mut v = [yes, yes, no];
        v.shuffle(rng);
        v
    }
}

fn exam_items(pairs: &[(String, String)], other: &[String]) -> Vec<ExamItem> {
    let item = |src: &str, tgt: String, label: Label, kind: Option<&str>| ExamItem {
        src: src.to_string(),
        tgt,
        true_label: label,
        distractor_kind: kind.map(str::to_string),
    };
    let reversed = |s: &str| s.split(", ").collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join(" ");
    vec![
        item(&pairs[0].0, pairs[0].1.clone(), Label::Correct, None),
        item(&pairs[1].0, pairs[1].1.clone(), Label::Correct, None),
        item(&pairs[2].0, pairs[5].1.clone(), Label::Incorrect, Some("mismatch")),
        item(&pairs[3].0, pairs[3].1.clone(), Label::Correct, None),
        item(&pairs[4].0, other[0].clone(), Label::Incorrect, Some("wrong_language")),
        item(&pairs[5].0, pairs[2].1.clone(), Label::Incorrect, Some("mismatch")),
        item(&pairs[6].0, pairs[6].1.clone(), Label::Correct, None),
        item(&pairs[7].0, reversed(&pairs[7].1), Label::Incorrect, Some("word_for_word")),
        item(&pairs[8].0, pairs[8].1.clone(), Label::Correct, None),
        item(&pairs[9].0, reversed(&pairs[9].1), Label::Incorrect, Some("word_for_word")),
    ]
}

fn worker(name: &str, langs: &[&str]) -> FixtureEvent {
    FixtureEvent::new("worker", None, WorkerPayload { name: name.into(), langs: langs.iter().map(|s| s.to_string()).collect() })
}

/// Builds the full event log.
pub fn build(material: &Material, accepts: Acceptor<'_>) -> Result<Vec<FixtureEvent>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (che_jobs, exam_pairs) = che_rus_jobs(material, accepts, &mut rng)?;
    let (fuv_main, fuv_pending) = fula_jobs(material, accepts, &mut rng)?;
    let jobs: Vec<Job> = che_jobs.into_iter().chain(fuv_main).chain(fuv_pending).collect();

    let mut events = vec![FixtureEvent::new(
        "note",
        None,
        NotePayload {
            text: "Accounting replay of a four-direction collection funnel. Chechen/Russian pairs are CLDR display \
                   names; Fula/English pairs are unrelated sentences of similar length and are not translations."
                .into(),
        },
    )];

    let che_translators: Vec<String> = (1..=4).map(|i| format!("translator-ce-{i}")).collect();
    let fuv_translators: Vec<String> = (1..=3).map(|i| format!("translator-ff-{i}")).collect();
    let che_verifiers: Vec<String> = (1..=6).map(|i| format!("verifier-ce-{i}")).collect();
    let fuv_verifiers: Vec<String> = (1..=4).map(|i| format!("verifier-ff-{i}")).collect();
    let polyglot = "verifier-all";
    for n in &che_translators {
        events.push(worker(n, &["che", "rus"]));
    }
    for n in &fuv_translators {
        events.push(worker(n, &["fuv", "eng"]));
    }
    for n in &che_verifiers {
        events.push(worker(n, &["che", "rus"]));
    }
    for n in &fuv_verifiers {
        events.push(worker(n, &["fuv", "eng"]));
    }
    events.push(worker(polyglot, &["che", "rus", "fuv", "eng"]));
    events.push(worker("applicant-ff", &["fuv", "eng"]));

    // Exams. Fula forms reuse the placeholder pairing.
    let fuv_pairs: Vec<(String, String)> = jobs
        .iter()
        .filter(|j| j.direction == "fuv-eng")
        .take(10)
        .map(|j| (j.source.clone(), j.translation.clone()))
        .collect();
    let eng_pairs: Vec<(String, String)> = jobs
        .iter()
        .filter(|j| j.direction == "eng-fuv")
        .take(10)
        .map(|j| (j.source.clone(), j.translation.clone()))
        .collect();
    let flip = |v: &[(String, String)]| v.iter().map(|(a, b)| (b.clone(), a.clone())).collect::<Vec<_>>();
    let forms = [
        ("che-rus", exam_items(&exam_pairs[..10], &[exam_pairs[10].0.clone()])),
        ("rus-che", exam_items(&flip(&exam_pairs[..10]), &[exam_pairs[11].1.clone()])),
        ("fuv-eng", exam_items(&fuv_pairs, &[eng_pairs[0].1.clone()])),
        ("eng-fuv", exam_items(&eng_pairs, &[fuv_pairs[0].1.clone()])),
    ];
    let mut answers: HashMap<&str, Vec<Label>> = HashMap::new();
    for (d, items) in &forms {
        answers.insert(d, items.iter().map(|i| i.true_label).collect());
        events.push(FixtureEvent::new("exam", Some(d), ExamPayload { version: "v1".into(), items: items.clone() }));
    }
    let take = |events: &mut Vec<FixtureEvent>, name: &str, d: &str, answers: Vec<Label>| {
        events.push(FixtureEvent::new("exam_answers", Some(d), ExamAnswersPayload { worker: name.into(), answers }));
    };
    for n in &che_verifiers {
        for d in ["che-rus", "rus-che"] {
            take(&mut events, n, d, answers[d].clone());
        }
    }
    for n in &fuv_verifiers {
        for d in ["fuv-eng", "eng-fuv"] {
            take(&mut events, n, d, answers[d].clone());
        }
    }
    for d in ["che-rus", "rus-che", "fuv-eng", "eng-fuv"] {
        take(&mut events, polyglot, d, answers[d].clone());
    }
    // Scores 6 of 10 and cannot verify.
    let mut failing = answers["fuv-eng"].clone();
    for a in failing.iter_mut().take(4) {
        *a = a.flipped();
    }
    take(&mut events, "applicant-ff", "fuv-eng", failing);

    // Sources, one batch per run of equal direction.
    let mut i = 0;
    while i < jobs.len() {
        let d = jobs[i].direction;
        let run: Vec<String> = jobs[i..].iter().take_while(|j| j.direction == d).map(|j| j.source.clone()).collect();
        i += run.len();
        events.push(FixtureEvent::new("sources", Some(d), SourcesPayload { origin: "fixture".into(), lines: run }));
    }

    // Translations in task order.
    let mut ce = che_translators.iter().cycle();
    let mut ff = fuv_translators.iter().cycle();
    for job in &jobs {
        let who = if job.direction.contains("che") { ce.next() } else { ff.next() }.expect("cycle");
        let text = match job.outcome {
            Outcome::AutoRejected => job.source.clone(),
            _ => job.translation.clone(),
        };
        events.push(FixtureEvent::new(
            "translation",
            Some(job.direction),
            TranslationPayload { worker: who.clone(), source: job.source.clone(), text, elapsed_ms: rng.random_range(25_000..180_000) },
        ));
    }

    // Verdicts, one translation at a time.
    let group_total = |pred: fn(&str) -> bool| {
        3 * jobs.iter().filter(|j| pred(j.direction) && matches!(j.outcome, Outcome::Verified { .. })).count()
    };
    let ce_total = group_total(|d| d.contains("che"));
    let ff_total = group_total(|d| d.contains("fuv"));
    let mut ce_plan = VerifierPlan::new(&che_verifiers, ce_total, polyglot, ce_total % 10)?;
    let mut ff_plan = VerifierPlan::new(&fuv_verifiers, ff_total, polyglot, ff_total % 10)?;
    if (ce_total % 10 + ff_total % 10) % 10 != 0 {
        return Err(SimError::Input("the polyglot's verdicts do not form whole sets".into()));
    }
    for (ordinal, job) in jobs.iter().enumerate() {
        let Outcome::Verified { accepted } = job.outcome else { continue };
        let plan = if job.direction.contains("che") { &mut ce_plan } else { &mut ff_plan };
        let who = plan.next_triple()?;
        for (name, verdict) in who.iter().zip(verdicts(accepted, &mut rng)) {
            events.push(FixtureEvent::new(
                "verdict",
                Some(job.direction),
                VerdictPayload { worker: name.clone(), translation: ordinal, verdict, elapsed_ms: rng.random_range(6_000..40_000) },
            ));
        }
    }
    Ok(events)
}
