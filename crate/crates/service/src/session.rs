//! In-memory dialogue sessions with optional JSONL persistence.
//!
//! Each persisted line is one operation:
//! `{"op":"create","session_id":..,"t_ms":..}`,
//! `{"op":"turn","session_id":..,"t_ms":..,"speaker":0,"text":".."}` or
//! `{"op":"log","session_id":..,"events":[..]}`. The file is replayed on open.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::summary::LogEvent;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    NotFound(Uuid),
    #[error("turn text is empty")]
    EmptyTurn,
    #[error("speaker must be 0 or 1")]
    BadSpeaker,
    #[error("event timestamps decrease at event {index} ({prev} > {next})")]
    DecreasingTimestamps { index: usize, prev: u64, next: u64 },
    #[error("session store: {0}")]
    Io(#[from] std::io::Error),
    #[error("session store line {line}: {source}")]
    Corrupt { line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTurn {
    pub speaker: u8,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: Uuid,
    pub turns: Vec<SessionTurn>,
    pub created_ms: u64,
    pub updated_ms: u64,
    #[serde(skip)]
    pub events: Vec<LogEvent>,
}

impl Session {
    /// Texts of the last `max_turns` turns, oldest first.
    pub fn context_window(&self, max_turns: usize) -> Vec<String> {
        let start = self.turns.len().saturating_sub(max_turns);
        self.turns[start..].iter().map(|t| t.text.clone()).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    Create { session_id: Uuid, t_ms: u64 },
    Turn { session_id: Uuid, t_ms: u64, speaker: u8, text: String },
    Log { session_id: Uuid, events: Vec<LogEvent> },
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<Uuid, Session>>,
    journal: Option<Mutex<File>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore::default()
    }

    /// Opens (or creates) a journal file and replays it.
    pub fn open(path: &Path) -> Result<Self, SessionError> {
        let mut store = SessionStore::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: Record = serde_json::from_str(&line).map_err(|source| SessionError::Corrupt { line: i + 1, source })?;
                store.apply(record);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.journal = Some(Mutex::new(file));
        Ok(store)
    }

    fn apply(&self, record: Record) {
        let mut sessions = self.sessions.write();
        match record {
            Record::Create { session_id, t_ms } => {
                sessions.insert(
                    session_id,
                    Session { id: session_id, turns: Vec::new(), created_ms: t_ms, updated_ms: t_ms, events: Vec::new() },
                );
            }
            Record::Turn { session_id, t_ms, speaker, text } => {
                if let Some(s) = sessions.get_mut(&session_id) {
                    s.turns.push(SessionTurn { speaker, text });
                    s.updated_ms = t_ms;
                }
            }
            Record::Log { session_id, events } => {
                if let Some(s) = sessions.get_mut(&session_id) {
                    s.events.extend(events);
                }
            }
        }
    }

    fn journal(&self, record: &Record) -> Result<(), SessionError> {
        if let Some(file) = &self.journal {
            let mut line = serde_json::to_string(record).map_err(|e| std::io::Error::other(e.to_string()))?;
            line.push('\n');
            let mut f = file.lock();
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn create(&self) -> Result<Session, SessionError> {
        let id = Uuid::new_v4();
        let record = Record::Create { session_id: id, t_ms: now_ms() };
        self.journal(&record)?;
        self.apply(record);
        self.get(id)
    }

    pub fn get(&self, id: Uuid) -> Result<Session, SessionError> {
        self.sessions.read().get(&id).cloned().ok_or(SessionError::NotFound(id))
    }

    pub fn context_window(&self, id: Uuid, max_turns: usize) -> Result<Vec<String>, SessionError> {
        self.sessions
            .read()
            .get(&id)
            .map(|s| s.context_window(max_turns))
            .ok_or(SessionError::NotFound(id))
    }

    /// Appends a turn; without an explicit speaker the speakers alternate
    /// starting from 0. Returns the new turn's index.
    pub fn commit_turn(&self, id: Uuid, text: &str, speaker: Option<u8>) -> Result<usize, SessionError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(SessionError::EmptyTurn);
        }
        if speaker.is_some_and(|s| s > 1) {
            return Err(SessionError::BadSpeaker);
        }
        // Hold the write lock across journal + apply so commits are atomic.
        let mut sessions = self.sessions.write();
        let s = sessions.get_mut(&id).ok_or(SessionError::NotFound(id))?;
        let speaker = speaker.unwrap_or_else(|| s.turns.last().map_or(0, |t| 1 - t.speaker.min(1)));
        let t_ms = now_ms().max(s.updated_ms);
        let record = Record::Turn { session_id: id, t_ms, speaker, text: text.to_string() };
        self.journal(&record)?;
        s.turns.push(SessionTurn { speaker, text: text.to_string() });
        s.updated_ms = t_ms;
        Ok(s.turns.len() - 1)
    }

    /// Appends events after checking that timestamps never decrease, also
    /// relative to previously stored events. Returns all stored events.
    pub fn append_events(&self, id: Uuid, events: Vec<LogEvent>) -> Result<Vec<LogEvent>, SessionError> {
        let mut sessions = self.sessions.write();
        let s = sessions.get_mut(&id).ok_or(SessionError::NotFound(id))?;
        let mut prev = s.events.last().map_or(0, |e| e.t_ms);
        for (index, e) in events.iter().enumerate() {
            if e.t_ms < prev {
                return Err(SessionError::DecreasingTimestamps { index, prev, next: e.t_ms });
            }
            prev = e.t_ms;
        }
        let record = Record::Log { session_id: id, events };
        self.journal(&record)?;
        if let Record::Log { events, .. } = record {
            s.events.extend(events);
        }
        Ok(s.events.clone())
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
