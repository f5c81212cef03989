//! Dialogue corpus ingestion, phrase tokenization and task construction.
//!
//! Raw corpora come in one of two line-oriented layouts:
//!
//! ```text
//! chain3_242_108_214_13_28_50<TAB>turn 1<TAB>turn 2<TAB>...<TAB>turn 6
//! ```
//!
//! or a block record, an id line followed by one turn per line:
//!
//! ```text
//! chain3_242_108_214_13_28_50
//! turn 1
//! ...
//! turn 6
//! ```
//!
//! Both layouts may be mixed within one file. The canonical storage format is
//! JSONL with one [`Dialogue`] per line.

use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Punctuation kept inside phrases as its own token.
pub const MID_PUNCT: &[char] = &[',', ';', ':'];
/// Punctuation that ends a sentence; dropped by the tokenizer.
pub const FINAL_PUNCT: &[char] = &['.', '!', '?'];

/// Turns per dialogue in the six-turn corpus format.
pub const TDC_TURNS: usize = 6;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no dialogues")]
    NoDialogues,
    #[error("phrase has no word characters: {0:?}")]
    NoWords(String),
    #[error("invalid dialogue {id:?}: {reason}")]
    InvalidDialogue { id: String, reason: String },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: u8,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    /// Builds a dialogue from turn texts, assigning alternating speakers.
    pub fn from_texts<S: AsRef<str>>(id: &str, texts: &[S]) -> Result<Self, CorpusError> {
        let turns = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Turn {
                speaker: (i % 2) as u8,
                text: t.as_ref().trim().to_string(),
            })
            .collect();
        let dialogue = Dialogue {
            id: id.to_string(),
            turns,
        };
        dialogue.validate()?;
        Ok(dialogue)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |reason: &str| CorpusError::InvalidDialogue {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id"));
        }
        if self.turns.len() < 2 {
            return Err(invalid("fewer than two turns"));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.text.trim().is_empty() {
                return Err(invalid(&format!("turn {i} is empty")));
            }
            if turn.speaker as usize != i % 2 {
                return Err(invalid(&format!("turn {i} breaks speaker alternation")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    MidPunct,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhraseToken {
    pub kind: TokenKind,
    pub surface: String,
}

impl PhraseToken {
    pub fn word(surface: impl Into<String>) -> Self {
        PhraseToken {
            kind: TokenKind::Word,
            surface: surface.into(),
        }
    }

    pub fn punct(c: char) -> Self {
        PhraseToken {
            kind: TokenKind::MidPunct,
            surface: c.to_string(),
        }
    }

    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }

    /// Classifies a bare surface string (as sent by API clients).
    pub fn from_surface(surface: &str) -> Self {
        let mut chars = surface.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if MID_PUNCT.contains(&c) => PhraseToken::punct(c),
            _ => PhraseToken::word(surface),
        }
    }
}

/// NFC-normalizes text and folds apostrophe variants to `'`.
pub fn normalize_unicode(text: &str) -> String {
    text.nfc()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' | '\u{02BC}' | '\u{FF07}' => '\'',
            c => c,
        })
        .collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '-'
}

/// Tokenizes `text` and returns each token with its byte range in the
/// unicode-normalized text (also returned).
pub fn tokenize_with_spans(
    text: &str,
) -> Result<(String, Vec<(PhraseToken, Range<usize>)>), CorpusError> {
    let norm = normalize_unicode(text);
    let mut tokens = Vec::new();
    let mut chars = norm.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if is_word_char(c) {
            let mut end = start;
            while let Some(&(i, c)) = chars.peek() {
                if !is_word_char(c) {
                    break;
                }
                end = i + c.len_utf8();
                chars.next();
            }
            // Quotes and dangling hyphens at the edges are not part of the word.
            let raw = &norm[start..end];
            let lead = raw.len() - raw.trim_start_matches(['\'', '-']).len();
            let trimmed = raw.trim_start_matches(['\'', '-']).trim_end_matches('-');
            if !trimmed.is_empty() {
                let s = start + lead;
                tokens.push((PhraseToken::word(trimmed), s..s + trimmed.len()));
            }
        } else {
            if MID_PUNCT.contains(&c) {
                tokens.push((PhraseToken::punct(c), start..start + 1));
            }
            chars.next();
        }
    }
    // Punctuation cannot open a phrase, and trailing mid punctuation is final.
    while tokens.first().is_some_and(|(t, _)| !t.is_word()) {
        tokens.remove(0);
    }
    while tokens.last().is_some_and(|(t, _)| !t.is_word()) {
        tokens.pop();
    }
    tokens.dedup_by(|b, a| !a.0.is_word() && !b.0.is_word());
    if tokens.is_empty() {
        return Err(CorpusError::NoWords(text.to_string()));
    }
    Ok((norm, tokens))
}

/// Splits a phrase into words and mid-sentence punctuation. Sentence-final
/// punctuation and other symbols are dropped; contractions stay whole.
pub fn tokenize_phrase(text: &str) -> Result<Vec<PhraseToken>, CorpusError> {
    tokenize_with_spans(text).map(|(_, toks)| toks.into_iter().map(|(t, _)| t).collect())
}

/// Number of words plus mid-sentence punctuation marks.
pub fn phrase_length(tokens: &[PhraseToken]) -> usize {
    tokens.len()
}

/// Joins tokens with single spaces, attaching punctuation to the preceding word.
pub fn join_tokens(tokens: &[PhraseToken]) -> String {
    join_surfaces(tokens.iter().map(|t| (t.surface.as_str(), t.is_word())))
}

pub(crate) fn join_surfaces<'a>(parts: impl Iterator<Item = (&'a str, bool)>) -> String {
    let mut out = String::new();
    for (surface, is_word) in parts {
        if !out.is_empty() && is_word {
            out.push(' ');
        }
        out.push_str(surface);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseOutput {
    pub dialogues: Vec<Dialogue>,
    pub warnings: Vec<String>,
}

fn is_record_id(line: &str) -> bool {
    let mut parts = line.split('_');
    let first_ok = parts
        .next()
        .is_some_and(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()));
    let mut rest = 0;
    for p in parts {
        if p.is_empty() || !p.chars().all(|c| c.is_ascii_alphanumeric()) {
            return false;
        }
        rest += 1;
    }
    first_ok && rest > 0
}

fn strip_speaker_label(line: &str) -> &str {
    for label in ["A:", "B:"] {
        if let Some(rest) = line.strip_prefix(label) {
            return rest.trim_start();
        }
    }
    line
}

/// Parses a raw dialogue corpus in either the tab-separated or block layout.
/// Records with the wrong number of turns are skipped with a warning.
pub fn parse_turk_dialogues(raw: &str) -> Result<ParseOutput, CorpusError> {
    parse_dialogues_with(raw, TDC_TURNS)
}

pub fn parse_dialogues_with(raw: &str, expected_turns: usize) -> Result<ParseOutput, CorpusError> {
    let mut out = ParseOutput::default();
    let mut block: Option<(String, usize, Vec<String>)> = None;

    let finish = |record: (String, usize, Vec<String>), out: &mut ParseOutput| {
        let (id, line_no, turns) = record;
        if turns.len() != expected_turns {
            out.warnings.push(format!(
                "line {line_no}: record {id} has {} turns, expected {expected_turns}; skipped",
                turns.len()
            ));
            return;
        }
        match Dialogue::from_texts(&id, &turns) {
            Ok(d) => out.dialogues.push(d),
            Err(e) => out.warnings.push(format!("line {line_no}: {e}; skipped")),
        }
    };

    for (i, line) in raw.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.contains('\t') {
            if let Some(b) = block.take() {
                finish(b, &mut out);
            }
            let mut fields = line.split('\t').map(str::trim);
            let id = fields.next().unwrap_or_default().to_string();
            if !is_record_id(&id) {
                out.warnings
                    .push(format!("line {line_no}: unrecognized record id {id:?}; skipped"));
                continue;
            }
            let turns = fields
                .filter(|f| !f.is_empty())
                .map(|f| strip_speaker_label(f).to_string())
                .collect();
            finish((id, line_no, turns), &mut out);
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if let Some(b) = block.take() {
                finish(b, &mut out);
            }
        } else if is_record_id(trimmed) {
            if let Some(b) = block.take() {
                finish(b, &mut out);
            }
            block = Some((trimmed.to_string(), line_no, Vec::new()));
        } else if let Some((_, _, turns)) = block.as_mut() {
            turns.push(strip_speaker_label(trimmed).to_string());
        } else {
            out.warnings
                .push(format!("line {line_no}: text outside any record; ignored"));
        }
    }
    if let Some(b) = block.take() {
        finish(b, &mut out);
    }
    if out.dialogues.is_empty() {
        return Err(CorpusError::NoDialogues);
    }
    Ok(out)
}

pub fn read_dialogues_jsonl<R: BufRead>(reader: R) -> Result<Vec<Dialogue>, CorpusError> {
    let mut dialogues = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Dialogue =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        d.validate()?;
        dialogues.push(d);
    }
    if dialogues.is_empty() {
        return Err(CorpusError::NoDialogues);
    }
    Ok(dialogues)
}

pub fn write_jsonl<W: Write, T: Serialize>(mut writer: W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Loads dialogues from a path, sniffing JSONL vs. raw layout.
pub fn load_dialogues(path: &std::path::Path) -> Result<ParseOutput, CorpusError> {
    let raw = std::fs::read_to_string(path)?;
    if raw.trim_start().starts_with('{') {
        let dialogues = read_dialogues_jsonl(raw.as_bytes())?;
        Ok(ParseOutput {
            dialogues,
            warnings: Vec::new(),
        })
    } else {
        parse_turk_dialogues(&raw)
    }
}

/// One phrase to enter: a dialogue turn with its preceding turns as context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnTask {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub context: Vec<String>,
    pub target: Vec<PhraseToken>,
}

impl TurnTask {
    pub fn id(&self) -> String {
        format!("{}#{}", self.dialogue_id, self.turn_index)
    }

    /// The phrase as entered by the user (no final punctuation).
    pub fn target_text(&self) -> String {
        join_tokens(&self.target)
    }
}

/// Builds one task per eligible turn. `speaker` keeps only turns of that
/// speaker (0 = first, 1 = second). Turns longer than `max_len` are excluded.
pub fn make_tasks(dialogues: &[Dialogue], speaker: Option<u8>, max_len: usize) -> Vec<TurnTask> {
    let mut tasks = Vec::new();
    for d in dialogues {
        for (i, turn) in d.turns.iter().enumerate() {
            if speaker.is_some_and(|s| s != turn.speaker) {
                continue;
            }
            let Ok(target) = tokenize_phrase(&turn.text) else {
                continue;
            };
            if phrase_length(&target) > max_len {
                continue;
            }
            tasks.push(TurnTask {
                dialogue_id: d.id.clone(),
                turn_index: i,
                context: d.turns[..i].iter().map(|t| t.text.clone()).collect(),
                target,
            });
        }
    }
    tasks
}
