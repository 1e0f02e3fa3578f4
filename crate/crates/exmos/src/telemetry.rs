//! Telemetry journal: interaction events and steering attempts, one JSON
//! record per line.

use exmos_core::analytics::{group_by_user, summarize, AnalyticsError, AttemptRecord, InteractionEvent, UsageSummary, UserLog};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TelemetryRecord {
    Event { session_id: String, event: InteractionEvent },
    Attempt(AttemptRecord),
}

/// Usage summary over a telemetry log; one user per session id. Sessions in
/// `cohort` count as users even when they logged nothing.
pub fn usage_summary(records: &[TelemetryRecord], cohort: &[String]) -> Result<UsageSummary, AnalyticsError> {
    let mut events = Vec::new();
    let mut attempts = Vec::new();
    for r in records {
        match r {
            TelemetryRecord::Event { session_id, event } => events.push((session_id.clone(), event.clone())),
            TelemetryRecord::Attempt(a) => attempts.push(a.clone()),
        }
    }
    let mut logs = group_by_user(events, attempts);
    for id in cohort {
        if !logs.iter().any(|l| &l.user == id) {
            logs.push(UserLog { user: id.clone(), ..UserLog::default() });
        }
    }
    summarize(&logs)
}
