use serde::{Deserialize, Serialize};

use crate::exam::{ExamForm, ExamResult};
use crate::ingest::SourceSentence;
use crate::ledger::PriceSheet;
use crate::qc::{AutoCheckResult, Decision, TrustFlag, Verdict};
use crate::tasks::{SessionToken, Translation, WorkerProfile};
use crate::types::{AssignmentId, Direction, SourceId, TaskId, Timestamp, TranslationId, WorkerId};

/// Every state change the store accepts. Events carry all ids and timestamps
/// so that replaying them is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    PricesSet {
        prices: PriceSheet,
    },
    SourceAdded {
        source: SourceSentence,
    },
    WorkerRegistered {
        worker: WorkerProfile,
        session: SessionToken,
    },
    TaskCreated {
        task_id: TaskId,
        source_id: SourceId,
        direction: Direction,
        at: Timestamp,
    },
    TaskAssigned {
        task_id: TaskId,
        worker_id: WorkerId,
        deadline: Timestamp,
    },
    TaskExpired {
        task_id: TaskId,
    },
    TranslationSubmitted {
        translation: Translation,
    },
    TranslationChecked {
        translation_id: TranslationId,
        result: AutoCheckResult,
        /// Verification slots opened when the check passed; empty otherwise.
        assignment_ids: Vec<AssignmentId>,
        at: Timestamp,
    },
    VerificationReserved {
        assignment_id: AssignmentId,
        worker_id: WorkerId,
        deadline: Timestamp,
    },
    VerificationExpired {
        assignment_id: AssignmentId,
    },
    VerdictRecorded {
        assignment_id: AssignmentId,
        verdict: Verdict,
        elapsed_ms: u64,
        at: Timestamp,
    },
    TranslationFinalized {
        translation_id: TranslationId,
        decision: Decision,
        at: Timestamp,
    },
    WorkerFlagged {
        flag: TrustFlag,
    },
    FlagCleared {
        worker_id: WorkerId,
    },
    ExamPublished {
        form: ExamForm,
    },
    ExamGraded {
        result: ExamResult,
    },
}
