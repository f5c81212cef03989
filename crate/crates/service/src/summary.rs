//! Client event logs and their summaries.
//!
//! An event is `{"t_ms": 1200, "kind": "Keystroke", "payload": "a"}`. Kinds
//! are the simulator actions plus `AeOptionsShown` / `FmOptionsShown`, which
//! mark when a candidate list was displayed and cost nothing. A `SpeakClick`
//! ends a phrase and may carry the spoken phrase in `text`.

use abbrex_core::simulate::{count_actions, ksr, phrase_chars, Action};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    Keystroke(char),
    SpellModeClick,
    ChipClick(usize),
    CandidateClick(usize),
    WordOptionClick(usize),
    ExpandClick,
    SpeakClick,
    AeOptionsShown,
    FmOptionsShown,
}

impl EventKind {
    pub fn action(&self) -> Option<Action> {
        Some(match *self {
            EventKind::Keystroke(c) => Action::Keystroke(c),
            EventKind::SpellModeClick => Action::SpellModeClick,
            EventKind::ChipClick(i) => Action::ChipClick(i),
            EventKind::CandidateClick(i) => Action::CandidateClick(i),
            EventKind::WordOptionClick(i) => Action::WordOptionClick(i),
            EventKind::ExpandClick => Action::ExpandClick,
            EventKind::SpeakClick => Action::SpeakClick,
            EventKind::AeOptionsShown | EventKind::FmOptionsShown => return None,
        })
    }
}

impl From<&Action> for EventKind {
    fn from(a: &Action) -> Self {
        match *a {
            Action::Keystroke(c) => EventKind::Keystroke(c),
            Action::SpellModeClick => EventKind::SpellModeClick,
            Action::ChipClick(i) => EventKind::ChipClick(i),
            Action::CandidateClick(i) => EventKind::CandidateClick(i),
            Action::WordOptionClick(i) => EventKind::WordOptionClick(i),
            Action::ExpandClick => EventKind::ExpandClick,
            Action::SpeakClick => EventKind::SpeakClick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
    /// Phrase spoken by a SpeakClick.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl LogEvent {
    pub fn new(t_ms: u64, kind: EventKind) -> Self {
        LogEvent { t_ms, kind, text: None }
    }

    pub fn speak(t_ms: u64, text: &str) -> Self {
        LogEvent { t_ms, kind: EventKind::SpeakClick, text: Some(text.to_string()) }
    }
}

/// Events for a simulator trace, one every `step_ms`; the SpeakClick carries `phrase`.
pub fn events_from_trace(trace: &[Action], start_ms: u64, step_ms: u64, phrase: &str) -> Vec<LogEvent> {
    trace
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut e = LogEvent::new(start_ms + i as u64 * step_ms, a.into());
            if *a == Action::SpeakClick {
                e.text = Some(phrase.to_string());
            }
            e
        })
        .collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum SummaryError {
    #[error("event timestamps decrease at event {0}")]
    DecreasingTimestamps(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhraseSummary {
    /// Spoken text; `None` for a phrase still being composed.
    pub text: Option<String>,
    pub n_a: usize,
    pub n_c: usize,
    pub ksr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub n_a: usize,
    pub n_c: usize,
    pub ksr: Option<f64>,
    pub ikis_ms: Vec<u64>,
    pub mean_iki_ms: Option<f64>,
    /// Display of AE options → CandidateClick.
    pub ae_response_ms: Vec<u64>,
    pub mean_ae_response_ms: Option<f64>,
    /// Display of FillMask options → WordOptionClick.
    pub fm_response_ms: Vec<u64>,
    pub mean_fm_response_ms: Option<f64>,
    pub phrases: Vec<PhraseSummary>,
}

fn mean(xs: &[u64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<u64>() as f64 / xs.len() as f64)
}

/// Counts actions with the simulator's accounting (SpeakClick excluded),
/// per phrase and in total. IKIs are taken between consecutive keystrokes
/// of the same phrase.
pub fn summarize_session(events: &[LogEvent]) -> Result<SessionSummary, SummaryError> {
    if let Some(i) = events.windows(2).position(|w| w[1].t_ms < w[0].t_ms) {
        return Err(SummaryError::DecreasingTimestamps(i + 1));
    }
    let mut out = SessionSummary::default();
    let mut actions: Vec<Action> = Vec::new();
    let mut last_key: Option<u64> = None;
    let mut ae_shown: Option<u64> = None;
    let mut fm_shown: Option<u64> = None;
    let close = |actions: &mut Vec<Action>, text: Option<String>, out: &mut SessionSummary| {
        let n_a = count_actions(actions);
        let n_c = text.as_deref().map_or(0, phrase_chars);
        out.phrases.push(PhraseSummary { n_a, n_c, ksr: ksr(n_a, n_c).ok(), text });
        actions.clear();
    };
    for e in events {
        match e.kind {
            EventKind::Keystroke(_) => {
                if let Some(prev) = last_key {
                    out.ikis_ms.push(e.t_ms - prev);
                }
                last_key = Some(e.t_ms);
            }
            EventKind::AeOptionsShown => ae_shown = Some(e.t_ms),
            EventKind::FmOptionsShown => fm_shown = Some(e.t_ms),
            EventKind::CandidateClick(_) => {
                if let Some(t) = ae_shown.take() {
                    out.ae_response_ms.push(e.t_ms - t);
                }
            }
            EventKind::WordOptionClick(_) => {
                if let Some(t) = fm_shown.take() {
                    out.fm_response_ms.push(e.t_ms - t);
                }
            }
            _ => {}
        }
        if let Some(a) = e.kind.action() {
            actions.push(a);
        }
        if e.kind == EventKind::SpeakClick {
            close(&mut actions, e.text.clone(), &mut out);
            last_key = None;
            ae_shown = None;
            fm_shown = None;
        }
    }
    if !actions.is_empty() {
        close(&mut actions, None, &mut out);
    }
    out.n_a = out.phrases.iter().map(|p| p.n_a).sum();
    out.n_c = out.phrases.iter().map(|p| p.n_c).sum();
    out.ksr = ksr(out.n_a, out.n_c).ok();
    out.mean_iki_ms = mean(&out.ikis_ms);
    out.mean_ae_response_ms = mean(&out.ae_response_ms);
    out.mean_fm_response_ms = mean(&out.fm_response_ms);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_json_shape() {
        let e = LogEvent::new(500, EventKind::Keystroke('a'));
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"t_ms":500,"kind":"Keystroke","payload":"a"}"#);
        assert_eq!(serde_json::from_str::<LogEvent>(&json).unwrap(), e);
        let s: LogEvent = serde_json::from_str(r#"{"t_ms":9,"kind":"SpeakClick","text":"hi"}"#).unwrap();
        assert_eq!(s, LogEvent::speak(9, "hi"));
        assert!(serde_json::from_str::<LogEvent>(r#"{"t_ms":9,"kind":"Wave"}"#).is_err());
    }

    #[test]
    fn iki_arithmetic() {
        let events: Vec<LogEvent> = [0, 500, 1200].iter().map(|&t| LogEvent::new(t, EventKind::Keystroke('x'))).collect();
        let s = summarize_session(&events).unwrap();
        assert_eq!(s.ikis_ms, [500, 700]);
        assert_eq!(s.mean_iki_ms, Some(600.0));
        assert_eq!(s.n_a, 3);
    }

    #[test]
    fn speak_only() {
        let s = summarize_session(&[LogEvent::speak(10, "hello")]).unwrap();
        assert_eq!((s.n_a, s.n_c, s.ksr), (0, 5, Some(1.0)));
    }

    #[test]
    fn response_times_and_order() {
        let events = vec![
            LogEvent::new(0, EventKind::Keystroke('a')),
            LogEvent::new(100, EventKind::AeOptionsShown),
            LogEvent::new(900, EventKind::CandidateClick(0)),
            LogEvent::new(950, EventKind::ChipClick(1)),
            LogEvent::new(1000, EventKind::FmOptionsShown),
            LogEvent::new(1400, EventKind::WordOptionClick(2)),
            LogEvent::speak(1500, "a b"),
        ];
        let s = summarize_session(&events).unwrap();
        assert_eq!(s.ae_response_ms, [800]);
        assert_eq!(s.fm_response_ms, [400]);
        assert_eq!((s.n_a, s.n_c), (4, 3));
        let mut bad = events.clone();
        bad[3].t_ms = 10;
        assert_eq!(summarize_session(&bad), Err(SummaryError::DecreasingTimestamps(3)));
    }
}
