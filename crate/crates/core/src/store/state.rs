use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::event::Event;
use super::funnel::{DirectionCounters, FunnelCounts, FunnelStats};
use crate::error::{Error, Result};
use crate::exam::{ExamForm, ExamResult};
use crate::ingest::{normalize_sentence, SourceSentence, SourceStatus};
use crate::ledger::Ledger;
use crate::qc::{Decision, ResponseKind, VERDICTS_PER_TRANSLATION};
use crate::tasks::{
    SessionToken, TaskState, Translation, TranslationTask, VerificationAssignment, WorkerProfile,
};
use crate::types::{
    AssignmentId, Direction, Lang, SourceId, TaskId, Timestamp, TranslationId, WorkerId,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Counters {
    source: u64,
    task: u64,
    translation: u64,
    assignment: u64,
    worker: u64,
}

/// Lookup structures derived from the entity maps; rebuilt after a restore.
#[derive(Debug, Clone, Default)]
struct Indexes {
    worker_names: HashMap<String, WorkerId>,
    pool_forms: HashMap<Lang, HashSet<String>>,
    open_tasks: BTreeMap<Direction, BTreeSet<TaskId>>,
    assigned_tasks: BTreeSet<(Timestamp, TaskId)>,
    worker_task: HashMap<WorkerId, TaskId>,
    open_assignments: BTreeMap<Direction, BTreeSet<AssignmentId>>,
    reserved: BTreeSet<(Timestamp, AssignmentId)>,
    worker_assignment: HashMap<WorkerId, AssignmentId>,
    involved: HashSet<(WorkerId, TranslationId)>,
    attempts: HashSet<(WorkerId, Direction, String)>,
    counters: BTreeMap<Direction, DirectionCounters>,
    accepted: BTreeMap<Direction, BTreeSet<(Timestamp, TranslationId)>>,
}

/// The full system of record. Mutated only through [`State::apply`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct State {
    next: Counters,
    sources: BTreeMap<SourceId, SourceSentence>,
    workers: BTreeMap<WorkerId, WorkerProfile>,
    sessions: BTreeMap<String, SessionToken>,
    tasks: BTreeMap<TaskId, TranslationTask>,
    translations: BTreeMap<TranslationId, Translation>,
    assignments: BTreeMap<AssignmentId, VerificationAssignment>,
    exam_forms: BTreeMap<Direction, ExamForm>,
    exam_results: Vec<ExamResult>,
    ledger: Ledger,
    #[serde(skip)]
    idx: Indexes,
}

fn missing(what: &str, id: impl std::fmt::Display) -> Error {
    Error::Integrity(format!("event references unknown {what} {id}"))
}

impl State {
    // ---- id allocation -------------------------------------------------

    pub fn next_source_id(&self) -> SourceId {
        SourceId(self.next.source + 1)
    }

    pub fn next_task_id(&self) -> TaskId {
        TaskId(self.next.task + 1)
    }

    pub fn next_translation_id(&self) -> TranslationId {
        TranslationId(self.next.translation + 1)
    }

    pub fn next_assignment_id(&self) -> AssignmentId {
        AssignmentId(self.next.assignment + 1)
    }

    pub fn next_worker_id(&self) -> WorkerId {
        WorkerId(self.next.worker + 1)
    }

    // ---- lookups ---------------------------------------------------------

    pub fn source(&self, id: SourceId) -> Option<&SourceSentence> {
        self.sources.get(&id)
    }

    pub fn sources(&self) -> impl Iterator<Item = &SourceSentence> {
        self.sources.values()
    }

    pub fn pool_contains(&self, lang: &Lang, normalized: &str) -> bool {
        self.idx.pool_forms.get(lang).is_some_and(|s| s.contains(normalized))
    }

    pub fn worker(&self, id: WorkerId) -> Option<&WorkerProfile> {
        self.workers.get(&id)
    }

    pub fn workers(&self) -> impl Iterator<Item = &WorkerProfile> {
        self.workers.values()
    }

    pub fn worker_by_name(&self, name: &str) -> Option<&WorkerProfile> {
        self.idx.worker_names.get(name).and_then(|id| self.workers.get(id))
    }

    pub fn session(&self, token: &str) -> Option<&SessionToken> {
        self.sessions.get(token)
    }

    pub fn task(&self, id: TaskId) -> Option<&TranslationTask> {
        self.tasks.get(&id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TranslationTask> {
        self.tasks.values()
    }

    pub fn translation(&self, id: TranslationId) -> Option<&Translation> {
        self.translations.get(&id)
    }

    pub fn translations(&self) -> impl Iterator<Item = &Translation> {
        self.translations.values()
    }

    pub fn assignment(&self, id: AssignmentId) -> Option<&VerificationAssignment> {
        self.assignments.get(&id)
    }

    pub fn assignments(&self) -> impl Iterator<Item = &VerificationAssignment> {
        self.assignments.values()
    }

    pub fn exam_form(&self, direction: &Direction) -> Option<&ExamForm> {
        self.exam_forms.get(direction)
    }

    pub fn exam_results(&self) -> &[ExamResult] {
        &self.exam_results
    }

    pub fn has_attempted(&self, worker: WorkerId, direction: &Direction, version: &str) -> bool {
        self.idx.attempts.contains(&(worker, direction.clone(), version.to_string()))
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn active_task_of(&self, worker: WorkerId) -> Option<TaskId> {
        self.idx.worker_task.get(&worker).copied()
    }

    pub fn active_assignment_of(&self, worker: WorkerId) -> Option<AssignmentId> {
        self.idx.worker_assignment.get(&worker).copied()
    }

    pub fn is_involved(&self, worker: WorkerId, translation: TranslationId) -> bool {
        self.idx.involved.contains(&(worker, translation))
    }

    /// Oldest open task among the given directions.
    pub fn oldest_open_task<'a>(&self, directions: impl Iterator<Item = &'a Direction>) -> Option<TaskId> {
        directions
            .filter_map(|d| self.idx.open_tasks.get(d).and_then(|s| s.first().copied()))
            .min()
    }

    pub fn open_task_directions(&self) -> impl Iterator<Item = &Direction> {
        self.idx.open_tasks.iter().filter(|(_, s)| !s.is_empty()).map(|(d, _)| d)
    }

    pub fn open_assignment_directions(&self) -> impl Iterator<Item = &Direction> {
        self.idx.open_assignments.iter().filter(|(_, s)| !s.is_empty()).map(|(d, _)| d)
    }

    /// Open verification slots of one direction, oldest first.
    pub fn open_assignments(&self, direction: &Direction) -> impl Iterator<Item = AssignmentId> + '_ {
        self.idx.open_assignments.get(direction).into_iter().flatten().copied()
    }

    pub fn expired_tasks(&self, now: Timestamp) -> Vec<TaskId> {
        self.idx.assigned_tasks.iter().take_while(|(d, _)| *d <= now).map(|(_, t)| *t).collect()
    }

    pub fn expired_assignments(&self, now: Timestamp) -> Vec<AssignmentId> {
        self.idx.reserved.iter().take_while(|(d, _)| *d <= now).map(|(_, a)| *a).collect()
    }

    pub fn verdict_count(&self, translation: &Translation) -> usize {
        translation
            .assignment_ids
            .iter()
            .filter_map(|a| self.assignments.get(a))
            .filter(|a| a.verdict.is_some())
            .count()
    }

    /// Accepted translations of one direction in acceptance order.
    pub fn accepted(&self, direction: &Direction) -> impl Iterator<Item = &Translation> {
        self.idx
            .accepted
            .get(direction)
            .into_iter()
            .flatten()
            .filter_map(|(_, id)| self.translations.get(id))
    }

    /// Directions that are known to the store: the four collected ones plus any
    /// that have tasks or an exam. `open_tasks` keeps a (possibly empty) entry
    /// for every direction that ever had a task.
    pub fn known_directions(&self) -> BTreeSet<Direction> {
        let mut out: BTreeSet<Direction> = Direction::collected().into_iter().collect();
        out.extend(self.idx.open_tasks.keys().cloned());
        out.extend(self.exam_forms.keys().cloned());
        out
    }

    pub fn counters(&self, direction: &Direction) -> DirectionCounters {
        self.idx.counters.get(direction).copied().unwrap_or_default()
    }

    pub fn funnel_stats(&self) -> FunnelStats {
        let mut stats = FunnelStats::default();
        for d in self.known_directions() {
            let c = self.counters(&d);
            let counts = FunnelCounts {
                translated: c.translated,
                fully_verified: c.fully_verified,
                in_corpus: c.in_corpus,
            };
            stats.total.translated += counts.translated;
            stats.total.fully_verified += counts.fully_verified;
            stats.total.in_corpus += counts.in_corpus;
            stats.directions.insert(d, counts);
        }
        stats
    }

    // ---- mutation ----------------------------------------------------------

    fn set_task_state(task: &mut TranslationTask, to: TaskState) -> Result<()> {
        if !task.state.can_transition(to) {
            return Err(Error::Integrity(format!(
                "task {} cannot move from {:?} to {:?}",
                task.id, task.state, to
            )));
        }
        task.state = to;
        Ok(())
    }

    pub fn apply(&mut self, event: &Event) -> Result<()> {
        match event {
            Event::PricesSet { prices } => self.ledger.set_prices(*prices),

            Event::SourceAdded { source } => {
                if self.sources.contains_key(&source.id) {
                    return Err(Error::Integrity(format!("duplicate source id {}", source.id)));
                }
                self.next.source = self.next.source.max(source.id.0);
                self.idx
                    .pool_forms
                    .entry(source.lang.clone())
                    .or_default()
                    .insert(normalize_sentence(&source.text));
                self.sources.insert(source.id, source.clone());
            }

            Event::WorkerRegistered { worker, session } => {
                if self.workers.contains_key(&worker.id) || self.idx.worker_names.contains_key(&worker.name) {
                    return Err(Error::Integrity(format!("duplicate worker {}", worker.name)));
                }
                self.next.worker = self.next.worker.max(worker.id.0);
                self.idx.worker_names.insert(worker.name.clone(), worker.id);
                self.workers.insert(worker.id, worker.clone());
                self.sessions.insert(session.token.clone(), session.clone());
            }

            Event::TaskCreated { task_id, source_id, direction, at } => {
                let source = self.sources.get_mut(source_id).ok_or_else(|| missing("source", source_id))?;
                source.status = SourceStatus::Tasked;
                self.next.task = self.next.task.max(task_id.0);
                self.tasks.insert(
                    *task_id,
                    TranslationTask {
                        id: *task_id,
                        source_id: *source_id,
                        direction: direction.clone(),
                        state: TaskState::Open,
                        assigned_to: None,
                        deadline: None,
                        created_at: *at,
                        translation_id: None,
                    },
                );
                self.idx.open_tasks.entry(direction.clone()).or_default().insert(*task_id);
            }

            Event::TaskAssigned { task_id, worker_id, deadline } => {
                let task = self.tasks.get_mut(task_id).ok_or_else(|| missing("task", task_id))?;
                Self::set_task_state(task, TaskState::Assigned)?;
                task.assigned_to = Some(*worker_id);
                task.deadline = Some(*deadline);
                if let Some(open) = self.idx.open_tasks.get_mut(&task.direction) {
                    open.remove(task_id);
                }
                self.idx.assigned_tasks.insert((*deadline, *task_id));
                self.idx.worker_task.insert(*worker_id, *task_id);
            }

            Event::TaskExpired { task_id } => {
                let task = self.tasks.get_mut(task_id).ok_or_else(|| missing("task", task_id))?;
                Self::set_task_state(task, TaskState::Open)?;
                if let (Some(w), Some(d)) = (task.assigned_to.take(), task.deadline.take()) {
                    self.idx.assigned_tasks.remove(&(d, *task_id));
                    if self.idx.worker_task.get(&w) == Some(task_id) {
                        self.idx.worker_task.remove(&w);
                    }
                }
                self.idx.open_tasks.entry(task.direction.clone()).or_default().insert(*task_id);
            }

            Event::TranslationSubmitted { translation } => {
                let task = self.tasks.get_mut(&translation.task_id).ok_or_else(|| missing("task", translation.task_id))?;
                let worker = self
                    .workers
                    .get_mut(&translation.worker_id)
                    .ok_or_else(|| missing("worker", translation.worker_id))?;
                Self::set_task_state(task, TaskState::Submitted)?;
                task.translation_id = Some(translation.id);
                if let Some(d) = task.deadline.take() {
                    self.idx.assigned_tasks.remove(&(d, task.id));
                }
                if self.idx.worker_task.get(&translation.worker_id) == Some(&task.id) {
                    self.idx.worker_task.remove(&translation.worker_id);
                }
                worker.history.push((ResponseKind::Translate, translation.elapsed_ms));
                self.next.translation = self.next.translation.max(translation.id.0);
                self.idx.counters.entry(translation.direction.clone()).or_default().submitted += 1;
                self.translations.insert(translation.id, translation.clone());
            }

            Event::TranslationChecked { translation_id, result, assignment_ids, at } => {
                let tr = self
                    .translations
                    .get_mut(translation_id)
                    .ok_or_else(|| missing("translation", translation_id))?;
                let task = self.tasks.get_mut(&tr.task_id).ok_or_else(|| missing("task", tr.task_id))?;
                if result.passed != !assignment_ids.is_empty() {
                    return Err(Error::Integrity("verification slots must accompany a passed check".into()));
                }
                tr.auto_check = Some(result.clone());
                let counters = self.idx.counters.entry(tr.direction.clone()).or_default();
                if result.passed {
                    Self::set_task_state(task, TaskState::InVerification)?;
                    counters.translated += 1;
                    tr.assignment_ids = assignment_ids.clone();
                    let open = self.idx.open_assignments.entry(tr.direction.clone()).or_default();
                    for id in assignment_ids {
                        self.next.assignment = self.next.assignment.max(id.0);
                        open.insert(*id);
                        self.assignments.insert(
                            *id,
                            VerificationAssignment {
                                id: *id,
                                translation_id: tr.id,
                                direction: tr.direction.clone(),
                                worker_id: None,
                                deadline: None,
                                verdict: None,
                                elapsed_ms: None,
                                decided_at: None,
                            },
                        );
                    }
                    self.ledger.record_translation_payment(tr.worker_id, *at);
                } else {
                    Self::set_task_state(task, TaskState::AutoRejected)?;
                    counters.auto_rejected += 1;
                    if let Some(src) = self.sources.get_mut(&task.source_id) {
                        src.status = SourceStatus::Exhausted;
                    }
                }
            }

            Event::VerificationReserved { assignment_id, worker_id, deadline } => {
                let a = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| missing("assignment", assignment_id))?;
                if a.worker_id.is_some() || a.verdict.is_some() {
                    return Err(Error::Integrity(format!("assignment {assignment_id} is not open")));
                }
                a.worker_id = Some(*worker_id);
                a.deadline = Some(*deadline);
                if let Some(open) = self.idx.open_assignments.get_mut(&a.direction) {
                    open.remove(assignment_id);
                }
                self.idx.reserved.insert((*deadline, *assignment_id));
                self.idx.worker_assignment.insert(*worker_id, *assignment_id);
                self.idx.involved.insert((*worker_id, a.translation_id));
            }

            Event::VerificationExpired { assignment_id } => {
                let a = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| missing("assignment", assignment_id))?;
                if a.verdict.is_some() {
                    return Err(Error::Integrity(format!("assignment {assignment_id} already judged")));
                }
                if let (Some(w), Some(d)) = (a.worker_id.take(), a.deadline.take()) {
                    self.idx.reserved.remove(&(d, *assignment_id));
                    if self.idx.worker_assignment.get(&w) == Some(assignment_id) {
                        self.idx.worker_assignment.remove(&w);
                    }
                    self.idx.involved.remove(&(w, a.translation_id));
                }
                self.idx.open_assignments.entry(a.direction.clone()).or_default().insert(*assignment_id);
            }

            Event::VerdictRecorded { assignment_id, verdict, elapsed_ms, at } => {
                let a = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| missing("assignment", assignment_id))?;
                let worker_id = a.worker_id.ok_or_else(|| missing("reservation for assignment", assignment_id))?;
                if a.verdict.is_some() {
                    return Err(Error::Integrity(format!("assignment {assignment_id} already judged")));
                }
                a.verdict = Some(*verdict);
                a.elapsed_ms = Some(*elapsed_ms);
                a.decided_at = Some(*at);
                if let Some(d) = a.deadline {
                    self.idx.reserved.remove(&(d, *assignment_id));
                }
                if self.idx.worker_assignment.get(&worker_id) == Some(assignment_id) {
                    self.idx.worker_assignment.remove(&worker_id);
                }
                let translation_id = a.translation_id;
                if let Some(w) = self.workers.get_mut(&worker_id) {
                    w.history.push((ResponseKind::Verify, *elapsed_ms));
                }
                self.ledger.record_verdict(worker_id);
                self.ledger.settle_verification_payments(worker_id, *at);
                let tr = self
                    .translations
                    .get(&translation_id)
                    .ok_or_else(|| missing("translation", translation_id))?;
                if self.verdict_count(tr) == VERDICTS_PER_TRANSLATION {
                    self.idx.counters.entry(tr.direction.clone()).or_default().fully_verified += 1;
                }
            }

            Event::TranslationFinalized { translation_id, decision, at } => {
                let tr = self
                    .translations
                    .get_mut(translation_id)
                    .ok_or_else(|| missing("translation", translation_id))?;
                if tr.decision.is_some() {
                    return Err(Error::Integrity(format!("translation {translation_id} already finalized")));
                }
                let task = self.tasks.get_mut(&tr.task_id).ok_or_else(|| missing("task", tr.task_id))?;
                let to = match decision {
                    Decision::Accepted => TaskState::Accepted,
                    Decision::Rejected => TaskState::Rejected,
                };
                Self::set_task_state(task, to)?;
                tr.decision = Some(*decision);
                tr.finalized_at = Some(*at);
                if let Some(src) = self.sources.get_mut(&task.source_id) {
                    src.status = SourceStatus::Exhausted;
                }
                if *decision == Decision::Accepted {
                    self.idx.counters.entry(tr.direction.clone()).or_default().in_corpus += 1;
                    self.idx.accepted.entry(tr.direction.clone()).or_default().insert((*at, tr.id));
                }
            }

            Event::WorkerFlagged { flag } => {
                let w = self.workers.get_mut(&flag.worker_id).ok_or_else(|| missing("worker", flag.worker_id))?;
                w.flag = Some(flag.clone());
            }

            Event::FlagCleared { worker_id } => {
                let w = self.workers.get_mut(worker_id).ok_or_else(|| missing("worker", worker_id))?;
                w.flag = None;
                w.history.clear();
            }

            Event::ExamPublished { form } => {
                self.exam_forms.insert(form.direction.clone(), form.clone());
            }

            Event::ExamGraded { result } => {
                let w = self.workers.get_mut(&result.worker_id).ok_or_else(|| missing("worker", result.worker_id))?;
                if result.passed {
                    w.qualified.insert(result.direction.clone());
                }
                self.idx
                    .attempts
                    .insert((result.worker_id, result.direction.clone(), result.version.clone()));
                self.exam_results.push(result.clone());
            }
        }
        Ok(())
    }

    /// Rebuilds every index from the entity maps.
    pub(crate) fn reindex(&mut self) {
        let mut idx = Indexes::default();
        for w in self.workers.values() {
            idx.worker_names.insert(w.name.clone(), w.id);
        }
        for s in self.sources.values() {
            idx.pool_forms.entry(s.lang.clone()).or_default().insert(normalize_sentence(&s.text));
        }
        for t in self.tasks.values() {
            idx.open_tasks.entry(t.direction.clone()).or_default();
            match t.state {
                TaskState::Open => {
                    idx.open_tasks.entry(t.direction.clone()).or_default().insert(t.id);
                }
                TaskState::Assigned => {
                    if let (Some(w), Some(d)) = (t.assigned_to, t.deadline) {
                        idx.assigned_tasks.insert((d, t.id));
                        idx.worker_task.insert(w, t.id);
                    }
                }
                _ => {}
            }
        }
        for a in self.assignments.values() {
            match (a.worker_id, a.verdict) {
                (None, None) => {
                    idx.open_assignments.entry(a.direction.clone()).or_default().insert(a.id);
                }
                (Some(w), None) => {
                    if let Some(d) = a.deadline {
                        idx.reserved.insert((d, a.id));
                    }
                    idx.worker_assignment.insert(w, a.id);
                    idx.involved.insert((w, a.translation_id));
                }
                (Some(w), Some(_)) => {
                    idx.involved.insert((w, a.translation_id));
                }
                (None, Some(_)) => {}
            }
        }
        for r in &self.exam_results {
            idx.attempts.insert((r.worker_id, r.direction.clone(), r.version.clone()));
        }
        self.idx = idx;
        self.idx.counters = self.recount();
        for tr in self.translations.values() {
            if let (Some(Decision::Accepted), Some(at)) = (tr.decision, tr.finalized_at) {
                self.idx.accepted.entry(tr.direction.clone()).or_default().insert((at, tr.id));
            }
        }
    }

    /// Per-direction counters computed by a full scan of translations.
    pub fn recount(&self) -> BTreeMap<Direction, DirectionCounters> {
        let mut out: BTreeMap<Direction, DirectionCounters> = BTreeMap::new();
        for tr in self.translations.values() {
            let c = out.entry(tr.direction.clone()).or_default();
            c.submitted += 1;
            match &tr.auto_check {
                Some(r) if r.passed => c.translated += 1,
                Some(_) => c.auto_rejected += 1,
                None => {}
            }
            if self.verdict_count(tr) == VERDICTS_PER_TRANSLATION {
                c.fully_verified += 1;
            }
            if tr.decision == Some(Decision::Accepted) {
                c.in_corpus += 1;
            }
        }
        out
    }

    /// Structural invariants; used by tests and after restores.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Integrity(m));
        for (d, c) in &self.idx.counters {
            if !(c.in_corpus <= c.fully_verified && c.fully_verified <= c.translated) {
                return fail(format!("funnel out of order for {d}: {c:?}"));
            }
        }
        let scanned = self.recount();
        for d in scanned.keys().chain(self.idx.counters.keys()) {
            if scanned.get(d).copied().unwrap_or_default() != self.counters(d) {
                return fail(format!("incremental counters drifted for {d}"));
            }
        }
        for tr in self.translations.values() {
            if tr.decision.is_some() {
                let mut judges: Vec<WorkerId> = tr
                    .assignment_ids
                    .iter()
                    .filter_map(|a| self.assignments.get(a))
                    .filter(|a| a.verdict.is_some())
                    .filter_map(|a| a.worker_id)
                    .collect();
                judges.sort();
                judges.dedup();
                if judges.len() != VERDICTS_PER_TRANSLATION || judges.contains(&tr.worker_id) {
                    return fail(format!("translation {} finalized without three distinct non-author verdicts", tr.id));
                }
            }
            if !self.tasks.contains_key(&tr.task_id) || !self.workers.contains_key(&tr.worker_id) {
                return fail(format!("translation {} has dangling references", tr.id));
            }
        }
        for a in self.assignments.values() {
            if !self.translations.contains_key(&a.translation_id) {
                return fail(format!("assignment {} has a dangling translation", a.id));
            }
        }
        let mut holders: HashSet<WorkerId> = HashSet::new();
        for t in self.tasks.values().filter(|t| t.state == TaskState::Assigned) {
            match t.assigned_to {
                None => return fail(format!("assigned task {} has no assignee", t.id)),
                Some(w) if !holders.insert(w) => return fail(format!("worker {w} holds two tasks")),
                Some(_) => {}
            }
        }
        Ok(())
    }
}
