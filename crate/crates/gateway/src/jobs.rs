//! Analyze jobs and their forward-only state machine.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::GatewayError;

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Cancelled)
    }

    /// Allowed moves: queued to running or cancelled, running to any
    /// terminal state.
    pub fn can_move_to(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Queued, Running) | (Queued, Cancelled) | (Running, Done) | (Running, Failed) | (Running, Cancelled)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JobRecord {
    pub id: String,
    pub session_id: String,
    pub state: JobState,
    pub submitted_ms: u64,
    pub started_ms: Option<u64>,
    pub finished_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<GatewayError>,
    /// The report, present exactly when `state` is `done`.
    pub result: Option<Arc<RawValue>>,
}

#[derive(Debug)]
pub struct Job {
    record: Mutex<JobRecord>,
    report: Mutex<Option<Arc<str>>>,
    cancel: AtomicBool,
}

impl Job {
    pub fn new(id: String, session_id: String) -> Self {
        Self {
            record: Mutex::new(JobRecord {
                id,
                session_id,
                state: JobState::Queued,
                submitted_ms: now_ms(),
                started_ms: None,
                finished_ms: None,
                error: None,
                result: None,
            }),
            report: Mutex::new(None),
            cancel: AtomicBool::new(false),
        }
    }

    pub fn record(&self) -> JobRecord {
        self.record.lock().expect("job lock").clone()
    }

    pub fn state(&self) -> JobState {
        self.record.lock().expect("job lock").state
    }

    pub fn cancel_flag(&self) -> &AtomicBool {
        &self.cancel
    }

    fn advance(&self, next: JobState, f: impl FnOnce(&mut JobRecord)) -> bool {
        let mut r = self.record.lock().expect("job lock");
        if !r.state.can_move_to(next) {
            return false;
        }
        r.state = next;
        if next == JobState::Running {
            r.started_ms = Some(now_ms());
        } else {
            r.finished_ms = Some(now_ms());
        }
        f(&mut r);
        true
    }

    /// False when the job was cancelled while queued.
    pub fn start(&self) -> bool {
        self.advance(JobState::Running, |_| {})
    }

    /// `report` must be the canonical report text.
    pub fn finish(&self, report: String) {
        let raw: Arc<RawValue> = RawValue::from_string(report.trim_end().to_string())
            .expect("report text is JSON")
            .into();
        // Held across the advance so a reader never sees `done` without bytes.
        let mut slot = self.report.lock().expect("job lock");
        if self.advance(JobState::Done, |r| r.result = Some(raw)) {
            *slot = Some(report.into());
        }
    }

    pub fn fail(&self, error: GatewayError) {
        self.advance(JobState::Failed, |r| r.error = Some(error));
    }

    pub fn mark_cancelled(&self) {
        self.advance(JobState::Cancelled, |_| {});
    }

    /// Moves the job to cancelled right away. A running worker notices the
    /// flag at its next planner iteration; whatever it returns afterwards is
    /// refused by the state machine.
    pub fn request_cancel(&self) {
        self.cancel.store(true, Ordering::Relaxed);
        self.advance(JobState::Cancelled, |_| {});
    }

    /// The exact report bytes, when done.
    pub fn report(&self) -> Option<Arc<str>> {
        self.report.lock().expect("job lock").clone()
    }
}
