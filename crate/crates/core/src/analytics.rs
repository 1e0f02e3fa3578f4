//! Usage metrics over interaction telemetry and steering attempts.
//!
//! * CPU: clicks per user.
//! * HTPU: hover seconds per user.
//! * effectiveness: successful attempts / attempts.
//! * efficiency: hover seconds on a mechanism's screens / successful attempts
//!   (lower is better).
//!
//! A user is one session. Screens are identified by the event target prefix:
//! `manual.` for the manual configuration screen and `auto.` for the
//! automated one.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no users in the cohort")]
    EmptyCohort,
    #[error("no steering attempts")]
    NoAttempts,
    #[error("no successful attempts")]
    NoSuccesses,
    #[error("invalid event: {0}")]
    InvalidEvent(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Click,
    Hover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub kind: EventKind,
    /// Tile code (`KI`, `DDD`, ...) or control identifier (`manual.apply`, ...).
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt_id: Option<u64>,
}

impl InteractionEvent {
    pub fn click(target: impl Into<String>, timestamp: u64) -> Self {
        InteractionEvent { kind: EventKind::Click, target: target.into(), duration_s: None, timestamp, attempt_id: None }
    }

    pub fn hover(target: impl Into<String>, duration_s: f64, timestamp: u64) -> Self {
        InteractionEvent {
            kind: EventKind::Hover,
            target: target.into(),
            duration_s: Some(duration_s),
            timestamp,
            attempt_id: None,
        }
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        match (self.kind, self.duration_s) {
            (EventKind::Click, Some(_)) => Err(AnalyticsError::InvalidEvent("click events carry no duration")),
            (EventKind::Hover, None) => Err(AnalyticsError::InvalidEvent("hover events need a duration")),
            (EventKind::Hover, Some(d)) if !(d > 0.0 && d.is_finite()) => {
                Err(AnalyticsError::InvalidEvent("hover duration must be positive"))
            }
            _ if self.target.is_empty() => Err(AnalyticsError::InvalidEvent("empty target")),
            _ => Ok(()),
        }
    }

    fn hover_seconds(&self) -> f64 {
        match self.kind {
            EventKind::Hover => self.duration_s.unwrap_or(0.0),
            EventKind::Click => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Manual,
    Automated,
}

impl Mechanism {
    pub const ALL: [Mechanism; 2] = [Mechanism::Manual, Mechanism::Automated];

    /// Event target prefix of the mechanism's configuration screen.
    pub fn screen_prefix(self) -> &'static str {
        match self {
            Mechanism::Manual => "manual.",
            Mechanism::Automated => "auto.",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mechanism::Manual => "manual",
            Mechanism::Automated => "automated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_id: u64,
    pub session_id: String,
    pub mechanism: Mechanism,
    pub resulting_test_accuracy: f64,
    /// The attempt beat the session's version-0 test accuracy.
    pub success: bool,
}

pub fn clicks_per_user(events: &[InteractionEvent], users: usize) -> Result<f64, AnalyticsError> {
    if users == 0 {
        return Err(AnalyticsError::EmptyCohort);
    }
    let clicks = events.iter().filter(|e| e.kind == EventKind::Click).count();
    Ok(clicks as f64 / users as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverTime {
    pub per_user: f64,
    /// Per-target seconds per user; sums to `per_user`.
    pub per_target: BTreeMap<String, f64>,
}

pub fn hover_time_per_user(events: &[InteractionEvent], users: usize) -> Result<HoverTime, AnalyticsError> {
    if users == 0 {
        return Err(AnalyticsError::EmptyCohort);
    }
    let n = users as f64;
    let mut per_target: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for e in events.iter().filter(|e| e.kind == EventKind::Hover) {
        *per_target.entry(e.target.clone()).or_default() += e.hover_seconds();
        total += e.hover_seconds();
    }
    for v in per_target.values_mut() {
        *v /= n;
    }
    Ok(HoverTime { per_user: total / n, per_target })
}

pub fn effectiveness(attempts: &[AttemptRecord]) -> Result<f64, AnalyticsError> {
    if attempts.is_empty() {
        return Err(AnalyticsError::NoAttempts);
    }
    let wins = attempts.iter().filter(|a| a.success).count();
    Ok(wins as f64 / attempts.len() as f64)
}

/// Total hover seconds in `events` divided by the successful attempts.
/// Callers pass the events of the mechanism's screens.
pub fn efficiency(attempts: &[AttemptRecord], events: &[InteractionEvent]) -> Result<f64, AnalyticsError> {
    let wins = attempts.iter().filter(|a| a.success).count();
    if wins == 0 {
        return Err(AnalyticsError::NoSuccesses);
    }
    let hover: f64 = events.iter().map(InteractionEvent::hover_seconds).sum();
    Ok(hover / wins as f64)
}

/// Everything logged for one user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserLog {
    pub user: String,
    pub events: Vec<InteractionEvent>,
    pub attempts: Vec<AttemptRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSummary {
    pub attempts: usize,
    pub successes: usize,
    pub hover_s: f64,
    /// `None` without attempts.
    pub effectiveness: Option<f64>,
    /// `None` without successes.
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub users: usize,
    pub avg_cpu: f64,
    pub avg_htpu: f64,
    pub cpu_per_target: BTreeMap<String, f64>,
    pub htpu_per_target: BTreeMap<String, f64>,
    pub mechanisms: BTreeMap<Mechanism, MechanismSummary>,
}

/// Group a flat log into per-user logs, ordered by user id.
pub fn group_by_user(
    events: impl IntoIterator<Item = (String, InteractionEvent)>,
    attempts: impl IntoIterator<Item = AttemptRecord>,
) -> Vec<UserLog> {
    let mut users: BTreeMap<String, UserLog> = BTreeMap::new();
    for (user, e) in events {
        users.entry(user.clone()).or_insert_with(|| UserLog { user, ..UserLog::default() }).events.push(e);
    }
    for a in attempts {
        let user = a.session_id.clone();
        users.entry(user.clone()).or_insert_with(|| UserLog { user, ..UserLog::default() }).attempts.push(a);
    }
    users.into_values().collect()
}

pub fn summarize(logs: &[UserLog]) -> Result<UsageSummary, AnalyticsError> {
    let ids: BTreeSet<&str> = logs.iter().map(|l| l.user.as_str()).collect();
    let users = ids.len();
    if users == 0 {
        return Err(AnalyticsError::EmptyCohort);
    }
    let events: Vec<InteractionEvent> = logs.iter().flat_map(|l| l.events.iter().cloned()).collect();
    let attempts: Vec<AttemptRecord> = logs.iter().flat_map(|l| l.attempts.iter().cloned()).collect();

    let mut cpu_per_target: BTreeMap<String, f64> = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind == EventKind::Click) {
        *cpu_per_target.entry(e.target.clone()).or_default() += 1.0;
    }
    for v in cpu_per_target.values_mut() {
        *v /= users as f64;
    }
    let hover = hover_time_per_user(&events, users)?;

    let mut mechanisms = BTreeMap::new();
    for m in Mechanism::ALL {
        let mine: Vec<AttemptRecord> = attempts.iter().filter(|a| a.mechanism == m).cloned().collect();
        let screen: Vec<InteractionEvent> =
            events.iter().filter(|e| e.target.starts_with(m.screen_prefix())).cloned().collect();
        mechanisms.insert(
            m,
            MechanismSummary {
                attempts: mine.len(),
                successes: mine.iter().filter(|a| a.success).count(),
                hover_s: screen.iter().map(InteractionEvent::hover_seconds).sum(),
                effectiveness: effectiveness(&mine).ok(),
                efficiency: efficiency(&mine, &screen).ok(),
            },
        );
    }
    Ok(UsageSummary {
        users,
        avg_cpu: clicks_per_user(&events, users)?,
        avg_htpu: hover.per_user,
        cpu_per_target,
        htpu_per_target: hover.per_target,
        mechanisms,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| String::from("-"), |x| format!("{x:.2}"))
}

/// Plain-text rendering: a usage table followed by an outcome table.
pub fn render_table(s: &UsageSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "users: {}", s.users);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<24} {:>10} {:>10}", "target", "CPU", "HTPU (s)");
    let targets: BTreeSet<&String> = s.cpu_per_target.keys().chain(s.htpu_per_target.keys()).collect();
    for t in targets {
        let _ = writeln!(
            out,
            "{:<24} {:>10.2} {:>10.2}",
            t,
            s.cpu_per_target.get(t).copied().unwrap_or(0.0),
            s.htpu_per_target.get(t).copied().unwrap_or(0.0)
        );
    }
    let _ = writeln!(out, "{:<24} {:>10.2} {:>10.2}", "total", s.avg_cpu, s.avg_htpu);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<12} {:>9} {:>10} {:>14} {:>14}",
        "mechanism", "attempts", "successes", "effectiveness", "efficiency (s)"
    );
    for (m, v) in &s.mechanisms {
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>10} {:>14} {:>14}",
            m.label(),
            v.attempts,
            v.successes,
            opt(v.effectiveness),
            opt(v.efficiency)
        );
    }
    out
}
