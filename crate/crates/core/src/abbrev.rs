//! Abbreviation schemes: initials-only, complete keywords and incomplete
//! (prefix or consonant) keywords, plus matching and text normalization.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_unicode, PhraseToken, TokenKind, FINAL_PUNCT, MID_PUNCT};

const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AbbrevError {
    #[error("word {0:?} does not start with a letter or digit")]
    BadInitial(String),
    #[error("keyword position {0} is out of range")]
    PositionOutOfRange(usize),
    #[error("keyword position {0} is punctuation, not a word")]
    NotAWord(usize),
    #[error("keyword length limit must be at least 2, got {0}")]
    LimitTooSmall(usize),
    #[error("token {index}: {reason}")]
    InvalidToken { index: usize, reason: String },
    #[error("abbreviation has no tokens")]
    Empty,
}

/// One unit of an abbreviation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "surface", rename_all = "snake_case")]
pub enum AbbrevToken {
    Initial(char),
    CompleteKeyword(String),
    IncompleteKeyword(String),
    MidPunct(char),
}

impl AbbrevToken {
    pub fn is_keyword(&self) -> bool {
        matches!(self, AbbrevToken::CompleteKeyword(_) | AbbrevToken::IncompleteKeyword(_))
    }

    pub fn surface(&self) -> String {
        match self {
            AbbrevToken::Initial(c) | AbbrevToken::MidPunct(c) => c.to_string(),
            AbbrevToken::CompleteKeyword(s) | AbbrevToken::IncompleteKeyword(s) => s.clone(),
        }
    }

    fn validate(&self, index: usize) -> Result<(), AbbrevError> {
        let bad = |reason: &str| AbbrevError::InvalidToken {
            index,
            reason: reason.to_string(),
        };
        match self {
            AbbrevToken::Initial(c) if !c.is_alphanumeric() => Err(bad("initial must be a letter or digit")),
            AbbrevToken::Initial(c) if c.is_uppercase() => Err(bad("initial must be lowercase")),
            AbbrevToken::MidPunct(c) if !MID_PUNCT.contains(c) => Err(bad("unsupported punctuation")),
            AbbrevToken::CompleteKeyword(s) if s.is_empty() || s.contains(char::is_whitespace) => {
                Err(bad("keyword must be a single non-empty word"))
            }
            AbbrevToken::IncompleteKeyword(s) if s.chars().count() < 2 || s.contains(char::is_whitespace) => {
                Err(bad("incomplete keyword needs at least two characters"))
            }
            _ => Ok(()),
        }
    }
}

/// Ordered abbreviation tokens, aligned one-to-one with phrase tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Abbreviation {
    pub tokens: Vec<AbbrevToken>,
}

impl Abbreviation {
    pub fn new(tokens: Vec<AbbrevToken>) -> Result<Self, AbbrevError> {
        let abbrev = Abbreviation { tokens };
        abbrev.validate()?;
        Ok(abbrev)
    }

    pub fn validate(&self) -> Result<(), AbbrevError> {
        if self.tokens.is_empty() {
            return Err(AbbrevError::Empty);
        }
        self.tokens
            .iter()
            .enumerate()
            .try_for_each(|(i, t)| t.validate(i))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Initials plus keywords, i.e. every token except punctuation.
    pub fn word_slots(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| !matches!(t, AbbrevToken::MidPunct(_)))
            .count()
    }

    pub fn keyword_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_keyword()).count()
    }

    /// UI surface form: runs of initials and punctuation are concatenated,
    /// keywords stand alone between single spaces (`"ishpit bedroom"`).
    pub fn render_compact(&self) -> String {
        let mut chunks: Vec<String> = Vec::new();
        let mut run = String::new();
        for t in &self.tokens {
            match t {
                AbbrevToken::Initial(c) | AbbrevToken::MidPunct(c) => run.push(*c),
                AbbrevToken::CompleteKeyword(s) | AbbrevToken::IncompleteKeyword(s) => {
                    if !run.is_empty() {
                        chunks.push(std::mem::take(&mut run));
                    }
                    chunks.push(s.clone());
                }
            }
        }
        if !run.is_empty() {
            chunks.push(run);
        }
        chunks.join(" ")
    }

    /// Model shorthand form: one space between every token (`"i s h p i t bedroom"`).
    pub fn render_spaced(&self) -> String {
        self.tokens
            .iter()
            .map(AbbrevToken::surface)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for Abbreviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_compact())
    }
}

fn first_lower(s: &str) -> Option<char> {
    s.chars().next().and_then(|c| c.to_lowercase().next())
}

fn initial_of(word: &str) -> Result<char, AbbrevError> {
    match first_lower(word) {
        Some(c) if c.is_alphanumeric() => Ok(c),
        _ => Err(AbbrevError::BadInitial(word.to_string())),
    }
}

/// One lowercase initial per word; contractions and hyphenated words give
/// a single initial, mid-sentence punctuation is kept.
pub fn initials_abbrev(tokens: &[PhraseToken]) -> Result<Abbreviation, AbbrevError> {
    let tokens = tokens
        .iter()
        .map(|t| match t.kind {
            TokenKind::Word => initial_of(&t.surface).map(AbbrevToken::Initial),
            TokenKind::MidPunct => Ok(AbbrevToken::MidPunct(t.surface.chars().next().unwrap_or(','))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Abbreviation::new(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShorthandScheme {
    Prefix,
    Consonant,
}

/// How a word is spelled out inside a keyword abbreviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeywordSpec {
    Complete,
    Incomplete { scheme: ShorthandScheme, limit: usize },
}

pub fn prefix_shorthand(word: &str, limit: usize) -> Result<String, AbbrevError> {
    if limit < 2 {
        return Err(AbbrevError::LimitTooSmall(limit));
    }
    Ok(word.to_lowercase().chars().take(limit).collect())
}

/// First letter, then the remaining non-vowel letters, truncated to `limit`.
pub fn consonant_shorthand(word: &str, limit: usize) -> Result<String, AbbrevError> {
    if limit < 2 {
        return Err(AbbrevError::LimitTooSmall(limit));
    }
    let lower = word.to_lowercase();
    let mut chars = lower.chars();
    let mut out: String = chars.next().into_iter().collect();
    out.extend(chars.filter(|c| !VOWELS.contains(c)));
    Ok(out.chars().take(limit).collect())
}

/// Replaces the words at the given token positions by keywords; every other
/// word becomes its initial. A shorthand that turns out to be the whole word is
/// emitted as a complete keyword, and one shorter than two characters falls
/// back to the initial.
pub fn keyword_abbrev(
    tokens: &[PhraseToken],
    spec: &BTreeMap<usize, KeywordSpec>,
) -> Result<Abbreviation, AbbrevError> {
    let mut abbrev = initials_abbrev(tokens)?;
    for (&pos, kw) in spec {
        let token = tokens.get(pos).ok_or(AbbrevError::PositionOutOfRange(pos))?;
        if !token.is_word() {
            return Err(AbbrevError::NotAWord(pos));
        }
        let word = token.surface.to_lowercase();
        let short = match *kw {
            KeywordSpec::Complete => word.clone(),
            KeywordSpec::Incomplete { scheme: ShorthandScheme::Prefix, limit } => prefix_shorthand(&word, limit)?,
            KeywordSpec::Incomplete { scheme: ShorthandScheme::Consonant, limit } => {
                consonant_shorthand(&word, limit)?
            }
        };
        abbrev.tokens[pos] = if short == word {
            AbbrevToken::CompleteKeyword(word)
        } else if short.chars().count() >= 2 {
            AbbrevToken::IncompleteKeyword(short)
        } else {
            AbbrevToken::Initial(initial_of(&word)?)
        };
    }
    Ok(abbrev)
}

/// True when `short` abbreviates `word` under the prefix or consonant scheme.
pub fn is_shorthand_of(short: &str, word: &str) -> bool {
    let word = word.to_lowercase();
    let short = short.to_lowercase();
    let n = short.chars().count();
    if n < 2 {
        return false;
    }
    word.starts_with(&short) || consonant_shorthand(&word, n).is_ok_and(|c| c == short)
}

/// True when `short` abbreviates `word` under the prefix scheme only.
pub fn is_prefix_of(short: &str, word: &str) -> bool {
    short.chars().count() >= 2 && word.to_lowercase().starts_with(&short.to_lowercase())
}

pub fn token_matches(token: &AbbrevToken, phrase_token: &PhraseToken) -> bool {
    match (token, phrase_token.kind) {
        (AbbrevToken::MidPunct(c), TokenKind::MidPunct) => phrase_token.surface.chars().eq(std::iter::once(*c)),
        (AbbrevToken::Initial(c), TokenKind::Word) => first_lower(&phrase_token.surface) == Some(*c),
        (AbbrevToken::CompleteKeyword(k), TokenKind::Word) => k.to_lowercase() == phrase_token.surface.to_lowercase(),
        (AbbrevToken::IncompleteKeyword(k), TokenKind::Word) => is_shorthand_of(k, &phrase_token.surface),
        _ => false,
    }
}

/// Whether a tokenized phrase is a valid expansion of `abbrev`.
pub fn matches_abbreviation(phrase: &[PhraseToken], abbrev: &Abbreviation) -> bool {
    phrase.len() == abbrev.tokens.len()
        && abbrev
            .tokens
            .iter()
            .zip(phrase)
            .all(|(a, p)| token_matches(a, p))
}

/// Text normalization for exact-match comparison: whitespace collapsed,
/// lowercase, trailing sentence-final punctuation removed.
pub fn normalize_for_match(text: &str) -> String {
    let text = normalize_unicode(text).to_lowercase();
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| FINAL_PUNCT.contains(&c) || c.is_whitespace())
        .to_string()
}
