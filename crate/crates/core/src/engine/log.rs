//! Append-only session events, JSON-lines encoding and replay.

use serde::{Deserialize, Serialize};

use super::imt::{Decision, ImtSession, OnlineImt};
use super::{Hypothesis, Rule, Status};
use crate::masking::MaskScheme;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Pick,
    Include,
    Skip,
    Reject,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    pub k: u64,
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub status: Status,
}

pub fn to_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Parse JSON lines; a malformed final line (an interrupted write) is dropped.
pub fn from_jsonl(text: &str) -> Result<Vec<Event>> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut events = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<Event>(line) {
            Ok(e) => events.push(e),
            Err(_) if i + 1 == lines.len() => break,
            Err(_) => return Err(Error::Degenerate("corrupt event log")),
        }
    }
    Ok(events)
}

fn check(e: &Event, statistic: f64, status: Status) -> Result<()> {
    if e.statistic.to_bits() == statistic.to_bits() && e.status == status {
        Ok(())
    } else {
        Err(Error::Degenerate("replay diverged from the log"))
    }
}

/// Rebuild a batch session from its events, verifying every recorded statistic.
pub fn replay_batch(hyps: &[Hypothesis], scheme: MaskScheme, rule: Rule, events: &[Event]) -> Result<ImtSession> {
    let mut session = ImtSession::new(hyps, scheme, rule)?;
    for e in events {
        match e.action {
            Action::Pick => {
                let id = e.id.ok_or(Error::Degenerate("pick without id"))?;
                let out = session.pick(id)?;
                check(e, out.statistic, out.status)?;
            }
            Action::Stop => session.stop()?,
            Action::Reject => check(e, session.state().statistic, session.state().status)?,
            Action::Include | Action::Skip => return Err(Error::Degenerate("online event in batch log")),
        }
    }
    Ok(session)
}

/// Rebuild an online session: arrivals are taken from `stream` in order.
pub fn replay_online<'a, I>(
    stream: I,
    scheme: MaskScheme,
    rule: Rule,
    horizon: Option<u64>,
    events: &[Event],
) -> Result<OnlineImt>
where
    I: IntoIterator<Item = &'a Hypothesis>,
{
    let mut session = OnlineImt::new(scheme, rule, horizon)?;
    let mut stream = stream.into_iter();
    for e in events {
        let decision = match e.action {
            Action::Include => Decision::Include,
            Action::Skip => Decision::Skip,
            Action::Reject => continue,
            Action::Stop => {
                session.finish();
                continue;
            }
            Action::Pick => return Err(Error::Degenerate("batch event in online log")),
        };
        let h = stream.next().ok_or(Error::Degenerate("log longer than stream"))?;
        if Some(h.id) != e.id {
            return Err(Error::Degenerate("replay diverged from the log"));
        }
        session.step(h, |_| decision)?;
        check(e, session.state().statistic, session.state().status)?;
    }
    Ok(session)
}
