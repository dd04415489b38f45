//! Task engine: the operations workers and requesters perform, each executed
//! as one store transaction.

use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exam::{build_exam, grade_exam, ExamForm, ExamPools, ExamResult, Label, DEFAULT_PASS_THRESHOLD};
use crate::ingest::{screen, IngestConfig, IngestReport, RawLine, SourceSentence, SourceStatus};
use crate::langid::Detector;
use crate::ledger::{CostFilter, PriceSheet, Totals};
use crate::qc::{aggregate_verdicts, auto_check, flag_fast_responses, QcConfig, Verdict, VERDICTS_PER_TRANSLATION};
use crate::store::{corpus_records, render_corpus, Event, ExportFormat, FunnelStats, State, Store, Tx};
use crate::tasks::{
    SessionToken, SubmissionOutcome, TaskHandle, TaskKind, TaskState, Translation, TranslationTask,
    VerdictOutcome, WorkerProfile,
};
use crate::types::{AssignmentId, Clock, Direction, Lang, SourceId, TaskId, Timestamp, WorkerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Deadlines {
    pub translate_ms: u64,
    pub verify_ms: u64,
}

impl Default for Deadlines {
    fn default() -> Self {
        Deadlines { translate_ms: 30 * 60_000, verify_ms: 10 * 60_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExamConfig {
    pub pass_threshold: usize,
}

impl Default for ExamConfig {
    fn default() -> Self {
        ExamConfig { pass_threshold: DEFAULT_PASS_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub prices: PriceSheet,
    pub qc: QcConfig,
    pub deadlines: Deadlines,
    pub exam: ExamConfig,
    pub ingest: IngestConfig,
    pub session_ttl_ms: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            prices: PriceSheet::default(),
            qc: QcConfig::default(),
            deadlines: Deadlines::default(),
            exam: ExamConfig::default(),
            ingest: IngestConfig::default(),
            session_ttl_ms: 30 * 24 * 3_600_000,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.prices.validate()?;
        let qc = &self.qc;
        if !(qc.length_ratio_max >= 1.0) {
            return Err(Error::Config("qc.length_ratio_max must be at least 1".into()));
        }
        if !(qc.langid_margin >= 0.0) {
            return Err(Error::Config("qc.langid_margin must be non-negative".into()));
        }
        if self.deadlines.translate_ms == 0 || self.deadlines.verify_ms == 0 {
            return Err(Error::Config("deadlines must be positive".into()));
        }
        if self.exam.pass_threshold > crate::exam::EXAM_ITEMS {
            return Err(Error::Config("exam.pass_threshold exceeds the number of items".into()));
        }
        if self.ingest.min_chars > self.ingest.max_chars {
            return Err(Error::Config("ingest.min_chars exceeds ingest.max_chars".into()));
        }
        if self.session_ttl_ms == 0 {
            return Err(Error::Config("session_ttl_ms must be positive".into()));
        }
        Ok(())
    }
}

/// An exam as shown to a worker: pairs without labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamView {
    pub direction: Direction,
    pub version: String,
    pub instruction: String,
    pub items: Vec<ExamViewItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamViewItem {
    pub src: String,
    pub tgt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub report: IngestReport,
    pub source_ids: Vec<SourceId>,
    /// Tasks created for the accepted sentences, when a direction was given.
    pub task_ids: Vec<TaskId>,
}

pub struct Engine {
    store: Store,
    detector: Arc<Detector>,
    clock: Arc<dyn Clock>,
    config: EngineConfig,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("store", &self.store).field("config", &self.config).finish()
    }
}

fn new_token() -> String {
    let mut bytes = [0u8; 24];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

impl Engine {
    pub fn new(store: Store, detector: Arc<Detector>, clock: Arc<dyn Clock>, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let engine = Engine { store, detector, clock, config };
        let prices = engine.config.prices;
        engine.store.write(|tx| {
            if *tx.state().ledger().prices() != prices {
                tx.emit(Event::PricesSet { prices })?;
            }
            Ok(())
        })?;
        Ok(engine)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn read<R>(&self, f: impl FnOnce(&State) -> R) -> R {
        self.store.read(f)
    }

    /// Reverts every assignment whose deadline has passed.
    fn sweep(tx: &mut Tx<'_>, now: Timestamp) -> Result<()> {
        for task_id in tx.state().expired_tasks(now) {
            tx.emit(Event::TaskExpired { task_id })?;
        }
        for assignment_id in tx.state().expired_assignments(now) {
            tx.emit(Event::VerificationExpired { assignment_id })?;
        }
        Ok(())
    }

    /// Expires overdue assignments without doing anything else.
    pub fn expire_overdue(&self) -> Result<()> {
        let now = self.now();
        self.store.write(|tx| Self::sweep(tx, now))
    }

    // ---- workers ---------------------------------------------------------------

    pub fn register_worker(&self, name: &str, langs: &[Lang]) -> Result<SessionToken> {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::input("worker name must not be empty"));
        }
        if langs.is_empty() {
            return Err(Error::input("declare at least one language"));
        }
        let now = self.now();
        let ttl = self.config.session_ttl_ms;
        self.store.write(|tx| {
            if tx.state().worker_by_name(name).is_some() {
                return Err(Error::conflict(format!("worker name {name:?} is taken")));
            }
            let id = tx.state().next_worker_id();
            let worker = WorkerProfile {
                id,
                name: name.to_string(),
                langs: langs.iter().cloned().collect(),
                registered_at: now,
                qualified: Default::default(),
                history: Vec::new(),
                flag: None,
            };
            let session = SessionToken { token: new_token(), worker_id: id, issued_at: now, expires_at: now.plus_ms(ttl) };
            tx.emit(Event::WorkerRegistered { worker, session: session.clone() })?;
            Ok(session)
        })
    }

    pub fn authenticate(&self, token: &str) -> Result<WorkerId> {
        let now = self.now();
        self.store.read(|s| match s.session(token) {
            None => Err(Error::Auth("unknown session token".into())),
            Some(t) if t.expires_at <= now => Err(Error::Auth("session token expired".into())),
            Some(t) => Ok(t.worker_id),
        })
    }

    pub fn worker(&self, id: WorkerId) -> Result<WorkerProfile> {
        self.store
            .read(|s| s.worker(id).cloned())
            .ok_or_else(|| Error::not_found(format!("worker {id}")))
    }

    pub fn clear_flag(&self, worker_id: WorkerId) -> Result<()> {
        self.store.write(|tx| {
            let w = tx.state().worker(worker_id).ok_or_else(|| Error::not_found(format!("worker {worker_id}")))?;
            if w.flag.is_some() {
                tx.emit(Event::FlagCleared { worker_id })?;
            }
            Ok(())
        })
    }

    fn check_flag(tx: &mut Tx<'_>, worker_id: WorkerId, qc: &QcConfig, now: Timestamp) -> Result<()> {
        let Some(w) = tx.state().worker(worker_id) else { return Ok(()) };
        if w.flag.is_none() {
            if let Some(flag) = flag_fast_responses(worker_id, &w.history, qc, now) {
                tx.emit(Event::WorkerFlagged { flag })?;
            }
        }
        Ok(())
    }

    // ---- sources and tasks -------------------------------------------------------

    /// Screens a batch and adds the survivors to the pool. With a direction,
    /// translation tasks are created for them in the same transaction.
    pub fn ingest(&self, lang: &Lang, lines: Vec<RawLine>, direction: Option<&Direction>) -> Result<IngestOutcome> {
        if let Some(d) = direction {
            if &d.src != lang {
                return Err(Error::input(format!("direction {d} does not start from {lang}")));
            }
        }
        let now = self.now();
        self.store.write(|tx| {
            let (report, accepted) =
                screen(lines, lang, &self.detector, &self.config.ingest, |form| tx.state().pool_contains(lang, form))?;
            let mut source_ids = Vec::with_capacity(accepted.len());
            for a in accepted {
                let id = tx.state().next_source_id();
                tx.emit(Event::SourceAdded {
                    source: SourceSentence {
                        id,
                        text: a.text,
                        lang: lang.clone(),
                        origin: a.origin,
                        status: SourceStatus::Pool,
                    },
                })?;
                source_ids.push(id);
            }
            let task_ids = match direction {
                Some(d) => Self::create_tasks_tx(tx, &source_ids, d, now)?,
                None => Vec::new(),
            };
            Ok(IngestOutcome { report, source_ids, task_ids })
        })
    }

    fn create_tasks_tx(tx: &mut Tx<'_>, source_ids: &[SourceId], direction: &Direction, now: Timestamp) -> Result<Vec<TaskId>> {
        let mut seen = std::collections::HashSet::new();
        for id in source_ids {
            let s = tx.state().source(*id).ok_or_else(|| Error::input(format!("unknown source {id}")))?;
            if s.lang != direction.src {
                return Err(Error::input(format!("source {id} is {}, not {}", s.lang, direction.src)));
            }
            if s.status != SourceStatus::Pool || !seen.insert(*id) {
                return Err(Error::input(format!("source {id} is already tasked")));
            }
        }
        let mut out = Vec::with_capacity(source_ids.len());
        for source_id in source_ids {
            let task_id = tx.state().next_task_id();
            tx.emit(Event::TaskCreated { task_id, source_id: *source_id, direction: direction.clone(), at: now })?;
            out.push(task_id);
        }
        Ok(out)
    }

    pub fn create_translation_tasks(&self, source_ids: &[SourceId], direction: &Direction) -> Result<Vec<TranslationTask>> {
        let now = self.now();
        self.store.write(|tx| {
            let ids = Self::create_tasks_tx(tx, source_ids, direction, now)?;
            Ok(ids.iter().filter_map(|id| tx.state().task(*id).cloned()).collect())
        })
    }

    /// Creates tasks for up to `limit` pool sentences in the direction's source
    /// language, oldest first.
    pub fn create_tasks_from_pool(&self, direction: &Direction, limit: Option<usize>) -> Result<Vec<TaskId>> {
        let now = self.now();
        self.store.write(|tx| {
            let ids: Vec<SourceId> = tx
                .state()
                .sources()
                .filter(|s| s.lang == direction.src && s.status == SourceStatus::Pool)
                .map(|s| s.id)
                .take(limit.unwrap_or(usize::MAX))
                .collect();
            Self::create_tasks_tx(tx, &ids, direction, now)
        })
    }

    // ---- assignment -----------------------------------------------------------

    fn translate_handle(state: &State, task_id: TaskId) -> Result<TaskHandle> {
        let task = state.task(task_id).ok_or_else(|| Error::Integrity(format!("task {task_id} vanished")))?;
        let source = state
            .source(task.source_id)
            .ok_or_else(|| Error::Integrity(format!("source {} vanished", task.source_id)))?;
        Ok(TaskHandle::Translate {
            task_id,
            direction: task.direction.clone(),
            instruction: task.direction.instruction(),
            source: source.text.clone(),
            deadline: task.deadline.unwrap_or(task.created_at),
        })
    }

    fn verify_handle(state: &State, assignment_id: AssignmentId) -> Result<TaskHandle> {
        let a = state
            .assignment(assignment_id)
            .ok_or_else(|| Error::Integrity(format!("assignment {assignment_id} vanished")))?;
        let tr = state
            .translation(a.translation_id)
            .ok_or_else(|| Error::Integrity(format!("translation {} vanished", a.translation_id)))?;
        let source = state
            .task(tr.task_id)
            .and_then(|t| state.source(t.source_id))
            .map(|s| s.text.clone())
            .unwrap_or_default();
        Ok(TaskHandle::Verify {
            assignment_id,
            translation_id: tr.id,
            direction: tr.direction.clone(),
            source,
            translation: tr.text.clone(),
            deadline: a.deadline.unwrap_or(tr.submitted_at),
        })
    }

    /// Hands the worker its next task of the given kind, or `None` when nothing
    /// is eligible. A worker holding an unexpired assignment of that kind gets
    /// the same one back.
    pub fn assign_next(&self, worker_id: WorkerId, kind: TaskKind) -> Result<Option<TaskHandle>> {
        let now = self.now();
        let deadlines = self.config.deadlines;
        self.store.write(|tx| {
            Self::sweep(tx, now)?;
            let state = tx.state();
            let worker = state.worker(worker_id).ok_or_else(|| Error::Auth(format!("worker {worker_id} is not registered")))?;
            if worker.flag.is_some() {
                return Err(Error::permission(format!("worker {worker_id} is flagged for review")));
            }
            match kind {
                TaskKind::Translate => {
                    if let Some(task_id) = state.active_task_of(worker_id) {
                        return Self::translate_handle(state, task_id).map(Some);
                    }
                    let dirs: Vec<&Direction> = state.open_task_directions().filter(|d| worker.speaks(d)).collect();
                    let Some(task_id) = state.oldest_open_task(dirs.into_iter()) else { return Ok(None) };
                    let deadline = now.plus_ms(deadlines.translate_ms);
                    tx.emit(Event::TaskAssigned { task_id, worker_id, deadline })?;
                    Self::translate_handle(tx.state(), task_id).map(Some)
                }
                TaskKind::Verify => {
                    if let Some(a) = state.active_assignment_of(worker_id) {
                        return Self::verify_handle(state, a).map(Some);
                    }
                    let pick = state
                        .open_assignment_directions()
                        .filter(|d| worker.speaks(d) && worker.qualified.contains(*d))
                        .filter_map(|d| {
                            state.open_assignments(d).find(|a| {
                                state.assignment(*a).is_some_and(|a| {
                                    !state.is_involved(worker_id, a.translation_id)
                                        && state.translation(a.translation_id).is_some_and(|t| t.worker_id != worker_id)
                                })
                            })
                        })
                        .min();
                    let Some(assignment_id) = pick else { return Ok(None) };
                    let deadline = now.plus_ms(deadlines.verify_ms);
                    tx.emit(Event::VerificationReserved { assignment_id, worker_id, deadline })?;
                    Self::verify_handle(tx.state(), assignment_id).map(Some)
                }
            }
        })
    }

    // ---- submissions ------------------------------------------------------------

    pub fn submit_translation(&self, task_id: TaskId, worker_id: WorkerId, text: &str, elapsed_ms: u64) -> Result<SubmissionOutcome> {
        if text.is_empty() {
            return Err(Error::input("translation text must not be empty"));
        }
        let now = self.now();
        self.store.write(|tx| {
            Self::sweep(tx, now)?;
            let state = tx.state();
            let task = state.task(task_id).ok_or_else(|| Error::not_found(format!("task {task_id}")))?;
            if task.state != TaskState::Assigned || task.assigned_to != Some(worker_id) {
                let resubmission = task
                    .translation_id
                    .and_then(|t| state.translation(t))
                    .is_some_and(|t| t.worker_id == worker_id);
                return Err(if resubmission {
                    Error::conflict(format!("task {task_id} already has your translation"))
                } else {
                    Error::permission(format!("task {task_id} is not assigned to worker {worker_id}"))
                });
            }
            let source = state
                .source(task.source_id)
                .ok_or_else(|| Error::Integrity(format!("source {} vanished", task.source_id)))?;
            let result = auto_check(text, &source.text, &task.direction, &self.detector, &self.config.qc)?;

            let translation_id = state.next_translation_id();
            let first_slot = state.next_assignment_id().0;
            let translation = Translation {
                id: translation_id,
                task_id,
                worker_id,
                direction: task.direction.clone(),
                text: text.to_string(),
                elapsed_ms,
                submitted_at: now,
                auto_check: None,
                assignment_ids: Vec::new(),
                decision: None,
                finalized_at: None,
            };
            let assignment_ids: Vec<AssignmentId> = if result.passed {
                (0..VERDICTS_PER_TRANSLATION as u64).map(|i| AssignmentId(first_slot + i)).collect()
            } else {
                Vec::new()
            };
            tx.emit(Event::TranslationSubmitted { translation })?;
            tx.emit(Event::TranslationChecked {
                translation_id,
                result: result.clone(),
                assignment_ids: assignment_ids.clone(),
                at: now,
            })?;
            Self::check_flag(tx, worker_id, &self.config.qc, now)?;
            Ok(match result.failed_check {
                Some(reason) => SubmissionOutcome::AutoRejected { translation_id, reason, detected_lang: result.detected_lang },
                None => SubmissionOutcome::QueuedForVerification { translation_id, assignment_ids },
            })
        })
    }

    pub fn submit_verdict(&self, assignment_id: AssignmentId, worker_id: WorkerId, verdict: Verdict, elapsed_ms: u64) -> Result<VerdictOutcome> {
        let now = self.now();
        self.store.write(|tx| {
            Self::sweep(tx, now)?;
            let state = tx.state();
            let a = state
                .assignment(assignment_id)
                .ok_or_else(|| Error::not_found(format!("assignment {assignment_id}")))?;
            let translation_id = a.translation_id;
            let finalized = state.translation(translation_id).is_some_and(|t| t.decision.is_some());
            if a.verdict.is_some() || finalized {
                return Err(Error::conflict(format!("assignment {assignment_id} already has a verdict")));
            }
            if a.worker_id != Some(worker_id) {
                return Err(Error::permission(format!("assignment {assignment_id} is not reserved by worker {worker_id}")));
            }
            tx.emit(Event::VerdictRecorded { assignment_id, verdict, elapsed_ms, at: now })?;
            Self::check_flag(tx, worker_id, &self.config.qc, now)?;

            let state = tx.state();
            let tr = state
                .translation(translation_id)
                .ok_or_else(|| Error::Integrity(format!("translation {translation_id} vanished")))?;
            let verdicts: Vec<Verdict> = tr
                .assignment_ids
                .iter()
                .filter_map(|id| state.assignment(*id))
                .filter_map(|a| a.verdict)
                .collect();
            if verdicts.len() < VERDICTS_PER_TRANSLATION {
                return Ok(VerdictOutcome::Recorded { translation_id, verdicts: verdicts.len() });
            }
            let decision = aggregate_verdicts(&verdicts)?;
            tx.emit(Event::TranslationFinalized { translation_id, decision, at: now })?;
            Ok(VerdictOutcome::Finalized { translation_id, decision })
        })
    }

    // ---- exams ----------------------------------------------------------------

    /// Builds a form from the pools and makes it the active one for the direction.
    pub fn publish_exam(&self, direction: &Direction, pools: &ExamPools, seed: u64) -> Result<ExamForm> {
        let form = build_exam(direction, pools, seed)?;
        self.publish_form(form)
    }

    pub fn publish_form(&self, form: ExamForm) -> Result<ExamForm> {
        if form.items.len() != crate::exam::EXAM_ITEMS {
            return Err(Error::input(format!("an exam has {} items", crate::exam::EXAM_ITEMS)));
        }
        self.store.write(|tx| {
            tx.emit(Event::ExamPublished { form: form.clone() })?;
            Ok(form)
        })
    }

    pub fn exam_form(&self, direction: &Direction) -> Result<ExamForm> {
        self.store
            .read(|s| s.exam_form(direction).cloned())
            .ok_or_else(|| Error::not_found(format!("no exam published for {direction}")))
    }

    pub fn exam_view(&self, direction: &Direction) -> Result<ExamView> {
        let form = self.exam_form(direction)?;
        Ok(ExamView {
            direction: form.direction.clone(),
            version: form.version.clone(),
            instruction: format!(
                "Is each pair a good translation from {} to {}?",
                direction.src.display_name(),
                direction.tgt.display_name()
            ),
            items: form.items.into_iter().map(|i| ExamViewItem { src: i.src, tgt: i.tgt }).collect(),
        })
    }

    /// Grades one attempt at the active form. `version`, when given, must name
    /// the active form.
    pub fn take_exam(&self, worker_id: WorkerId, direction: &Direction, version: Option<&str>, answers: &[Label]) -> Result<ExamResult> {
        let now = self.now();
        let threshold = self.config.exam.pass_threshold;
        self.store.write(|tx| {
            let state = tx.state();
            let worker = state.worker(worker_id).ok_or_else(|| Error::Auth(format!("worker {worker_id} is not registered")))?;
            if !worker.speaks(direction) {
                return Err(Error::permission(format!("worker {worker_id} has not declared both languages of {direction}")));
            }
            let form = state
                .exam_form(direction)
                .ok_or_else(|| Error::not_found(format!("no exam published for {direction}")))?;
            if version.is_some_and(|v| v != form.version) {
                return Err(Error::conflict(format!("exam version changed; the active one is {}", form.version)));
            }
            if state.has_attempted(worker_id, direction, &form.version) {
                return Err(Error::conflict(format!("worker {worker_id} already took exam {}", form.version)));
            }
            let result = grade_exam(form, answers, threshold, worker_id, now)?;
            tx.emit(Event::ExamGraded { result: result.clone() })?;
            Ok(result)
        })
    }

    // ---- reporting ------------------------------------------------------------

    pub fn funnel_stats(&self) -> FunnelStats {
        self.store.read(|s| s.funnel_stats())
    }

    pub fn export_corpus(&self, direction: &Direction, format: ExportFormat, include_pending: bool) -> Result<String> {
        self.store.read(|s| render_corpus(&corpus_records(s, direction, include_pending)?, format))
    }

    pub fn cost_totals(&self, filter: &CostFilter) -> Totals {
        self.store.read(|s| s.ledger().totals(filter))
    }
}
