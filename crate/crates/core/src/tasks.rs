//! Task-engine domain types and the translation task state machine.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::qc::{AutoCheckResult, Decision, FailedCheck, ResponseKind, TrustFlag, Verdict};
use crate::types::{AssignmentId, Direction, Lang, SourceId, TaskId, Timestamp, TranslationId, WorkerId};

/// Lifecycle of a translation task:
///
/// ```text
/// open -> assigned -> submitted -> auto_rejected
///   ^        |                  \-> in_verification -> accepted | rejected
///   \--------/ (deadline passed)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Open,
    Assigned,
    Submitted,
    AutoRejected,
    InVerification,
    Accepted,
    Rejected,
}

impl TaskState {
    pub fn can_transition(self, to: TaskState) -> bool {
        use TaskState::*;
        matches!(
            (self, to),
            (Open, Assigned)
                | (Assigned, Open)
                | (Assigned, Submitted)
                | (Submitted, AutoRejected)
                | (Submitted, InVerification)
                | (InVerification, Accepted)
                | (InVerification, Rejected)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::AutoRejected | TaskState::Accepted | TaskState::Rejected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationTask {
    pub id: TaskId,
    pub source_id: SourceId,
    pub direction: Direction,
    pub state: TaskState,
    pub assigned_to: Option<WorkerId>,
    pub deadline: Option<Timestamp>,
    pub created_at: Timestamp,
    pub translation_id: Option<TranslationId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub id: TranslationId,
    pub task_id: TaskId,
    pub worker_id: WorkerId,
    pub direction: Direction,
    pub text: String,
    pub elapsed_ms: u64,
    pub submitted_at: Timestamp,
    pub auto_check: Option<AutoCheckResult>,
    pub assignment_ids: Vec<AssignmentId>,
    pub decision: Option<Decision>,
    pub finalized_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationAssignment {
    pub id: AssignmentId,
    pub translation_id: TranslationId,
    pub direction: Direction,
    pub worker_id: Option<WorkerId>,
    pub deadline: Option<Timestamp>,
    pub verdict: Option<Verdict>,
    pub elapsed_ms: Option<u64>,
    pub decided_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub id: WorkerId,
    pub name: String,
    pub langs: BTreeSet<Lang>,
    pub registered_at: Timestamp,
    /// Directions whose exam this worker has passed.
    pub qualified: BTreeSet<Direction>,
    /// Response times since the last flag clearance.
    pub history: Vec<(ResponseKind, u64)>,
    pub flag: Option<TrustFlag>,
}

impl WorkerProfile {
    pub fn speaks(&self, direction: &Direction) -> bool {
        self.langs.contains(&direction.src) && self.langs.contains(&direction.tgt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: String,
    pub worker_id: WorkerId,
    pub issued_at: Timestamp,
    pub expires_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Translate,
    Verify,
}

impl std::str::FromStr for TaskKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "translate" => Ok(TaskKind::Translate),
            "verify" => Ok(TaskKind::Verify),
            other => Err(crate::Error::Input(format!("unknown task kind {other:?}"))),
        }
    }
}

/// What a worker receives from `assign_next`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskHandle {
    Translate {
        task_id: TaskId,
        direction: Direction,
        instruction: String,
        source: String,
        deadline: Timestamp,
    },
    Verify {
        assignment_id: AssignmentId,
        translation_id: TranslationId,
        direction: Direction,
        source: String,
        translation: String,
        deadline: Timestamp,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SubmissionOutcome {
    AutoRejected {
        translation_id: TranslationId,
        reason: FailedCheck,
        detected_lang: Option<Lang>,
    },
    QueuedForVerification {
        translation_id: TranslationId,
        assignment_ids: Vec<AssignmentId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VerdictOutcome {
    Recorded { translation_id: TranslationId, verdicts: usize },
    Finalized { translation_id: TranslationId, decision: Decision },
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [TaskState; 7] = [
        TaskState::Open,
        TaskState::Assigned,
        TaskState::Submitted,
        TaskState::AutoRejected,
        TaskState::InVerification,
        TaskState::Accepted,
        TaskState::Rejected,
    ];

    #[test]
    fn exactly_seven_edges() {
        let edges = ALL
            .iter()
            .flat_map(|a| ALL.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.can_transition(*b))
            .count();
        assert_eq!(edges, 7);
    }

    #[test]
    fn terminal_states_have_no_exits() {
        for s in ALL.into_iter().filter(|s| s.is_terminal()) {
            assert!(ALL.iter().all(|t| !s.can_transition(*t)));
        }
    }
}
