//! Blocking client for the v1 API and the wire types it needs.

use std::collections::BTreeMap;
use std::time::Duration;

use reqwest::blocking::Client as Http;
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Good,
    Bad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Correct,
    Incorrect,
}

impl Label {
    pub fn flipped(self) -> Label {
        match self {
            Label::Correct => Label::Incorrect,
            Label::Incorrect => Label::Correct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Translate,
    Verify,
}

impl TaskKind {
    fn as_str(self) -> &'static str {
        match self {
            TaskKind::Translate => "translate",
            TaskKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Registered {
    pub worker_id: u64,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Handle {
    Translate {
        task_id: u64,
        direction: String,
        source: String,
    },
    Verify {
        assignment_id: u64,
        translation_id: u64,
        direction: String,
        source: String,
        translation: String,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Submission {
    AutoRejected { translation_id: u64, reason: String },
    QueuedForVerification { translation_id: u64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VerdictReply {
    Recorded { translation_id: u64 },
    Finalized { translation_id: u64, decision: Decision },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamItem {
    pub src: String,
    pub tgt: String,
    pub true_label: Label,
    /// `mismatch`, `wrong_language` or `word_for_word`; absent for correct items.
    pub distractor_kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamForm {
    pub direction: String,
    pub version: String,
    pub items: Vec<ExamItem>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExamGrade {
    pub score: usize,
    pub passed: bool,
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

#[derive(Debug, Clone, Deserialize)]
pub struct Upload {
    pub report: IngestReport,
    pub task_ids: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub translated: u64,
    pub fully_verified: u64,
    pub in_corpus: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelStats {
    pub directions: BTreeMap<String, FunnelCounts>,
    pub total: FunnelCounts,
}

/// Money amounts stay in the service's decimal string form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTotals {
    pub translation: String,
    pub verification_set: String,
    pub grand_total: String,
    pub entries: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub totals: CostTotals,
    pub settled_verdict_sets: u64,
}

#[derive(Clone)]
pub struct Client {
    base: String,
    http: Http,
    requester_token: Option<String>,
}

enum Auth<'a> {
    None,
    Worker(&'a str),
    Requester,
}

impl Client {
    pub fn new(base_url: &str) -> Result<Self> {
        let http = Http::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| SimError::Environment(e.to_string()))?;
        Ok(Client { base: base_url.trim_end_matches('/').to_string(), http, requester_token: None })
    }

    pub fn with_requester_token(mut self, token: impl Into<String>) -> Self {
        self.requester_token = Some(token.into());
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// Sends one request. `Ok(None)` means 204.
    fn send(&self, method: Method, path: &str, auth: Auth<'_>, body: Option<&serde_json::Value>) -> Result<Option<String>> {
        let mut req = self.http.request(method.clone(), format!("{}{path}", self.base));
        match auth {
            Auth::None => {}
            Auth::Worker(t) => req = req.bearer_auth(t),
            Auth::Requester => {
                if let Some(t) = &self.requester_token {
                    req = req.bearer_auth(t);
                }
            }
        }
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().map_err(|e| SimError::Environment(format!("{method} {path}: {e}")))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| SimError::Environment(format!("{method} {path}: {e}")))?;
        if status == StatusCode::NO_CONTENT {
            return Ok(None);
        }
        if !status.is_success() {
            return Err(SimError::Http { method: method.to_string(), path: path.to_string(), status: status.as_u16(), body: text });
        }
        Ok(Some(text))
    }

    fn json<T: DeserializeOwned>(&self, method: Method, path: &str, auth: Auth<'_>, body: Option<&serde_json::Value>) -> Result<Option<T>> {
        match self.send(method, path, auth, body)? {
            None => Ok(None),
            Some(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| SimError::Protocol(format!("{path}: {e}: {text}"))),
        }
    }

    fn expect<T: DeserializeOwned>(&self, method: Method, path: &str, auth: Auth<'_>, body: Option<&serde_json::Value>) -> Result<T> {
        self.json(method, path, auth, body)?
            .ok_or_else(|| SimError::Protocol(format!("{path}: empty response")))
    }

    pub fn register(&self, name: &str, langs: &[String]) -> Result<Registered> {
        self.expect(Method::POST, "/v1/workers", Auth::None, Some(&json!({"name": name, "langs": langs})))
    }

    pub fn next_task(&self, token: &str, kind: TaskKind) -> Result<Option<Handle>> {
        self.json(Method::GET, &format!("/v1/tasks/next?kind={}", kind.as_str()), Auth::Worker(token), None)
    }

    pub fn submit_translation(&self, token: &str, task_id: u64, text: &str, elapsed_ms: u64) -> Result<Submission> {
        self.expect(
            Method::POST,
            &format!("/v1/tasks/{task_id}/translation"),
            Auth::Worker(token),
            Some(&json!({"text": text, "elapsed_ms": elapsed_ms})),
        )
    }

    pub fn submit_verdict(&self, token: &str, assignment_id: u64, verdict: Verdict, elapsed_ms: u64) -> Result<VerdictReply> {
        self.expect(
            Method::POST,
            &format!("/v1/assignments/{assignment_id}/verdict"),
            Auth::Worker(token),
            Some(&json!({"verdict": verdict, "elapsed_ms": elapsed_ms})),
        )
    }

    pub fn publish_exam(&self, form: &ExamForm) -> Result<()> {
        self.send(Method::PUT, &format!("/v1/exam/{}", form.direction), Auth::Requester, Some(&json!({"form": form})))
            .map(|_| ())
    }

    pub fn answer_exam(&self, token: &str, direction: &str, version: &str, answers: &[Label]) -> Result<ExamGrade> {
        self.expect(
            Method::POST,
            &format!("/v1/exam/{direction}/answers"),
            Auth::Worker(token),
            Some(&json!({"version": version, "answers": answers})),
        )
    }

    pub fn upload_sources(&self, lang: &str, origin: &str, lines: &[String], direction: Option<&str>) -> Result<Upload> {
        self.expect(
            Method::POST,
            "/v1/sources",
            Auth::Requester,
            Some(&json!({"lang": lang, "origin": origin, "lines": lines, "direction": direction})),
        )
    }

    pub fn funnel(&self) -> Result<FunnelStats> {
        self.expect(Method::GET, "/v1/stats/funnel", Auth::None, None)
    }

    pub fn cost(&self) -> Result<CostReport> {
        self.expect(Method::GET, "/v1/cost", Auth::Requester, None)
    }
}
