//! Phrase and word predictors behind a common interface.
//!
//! [`Predictor::keyword_ae`] expands an abbreviation (initials with optional
//! keywords) into ranked phrases; [`Predictor::fill_mask`] proposes
//! replacement words sharing an initial for one slot of a phrase.
//!
//! Backends:
//! - [`NgramPredictor`]: constrained beam search over an [`NgramModel`](crate::lm::NgramModel).
//! - [`ExhaustivePredictor`]: full enumeration of the same lattice, used as an oracle.
//! - [`RemotePredictor`]: sampling client for an LLM server over HTTP.
//! - [`ScriptedPredictor`]: fixture lookups for deterministic tests.

mod ngram;
mod remote;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbrev::{matches_abbreviation, normalize_for_match, AbbrevError, Abbreviation};
use crate::corpus::tokenize_phrase;

pub use ngram::{beam_expand, exhaustive_expand, ngram_fill_mask, ExhaustivePredictor, NgramPredictor, DEFAULT_ENUMERATION_CAP};
pub use remote::{
    rank_phrase_samples, rank_word_samples, render_ae_prompt, render_fm_prompt, GenerateRequest, GenerateResponse,
    PromptLabels, RemoteConfig, RemotePredictor, SampleSource,
};
pub use scripted::{fm_key, ScriptedFixture, ScriptedPredictor};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("masked index {index} out of range for {len} words")]
    MaskOutOfRange { index: usize, len: usize },
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Abbrev(#[from] AbbrevError),
    #[error("enumeration of {paths} paths exceeds the cap of {cap}")]
    TooLarge { paths: u128, cap: u128 },
    #[error("backend request failed: {0}")]
    Backend(String),
    #[error("backend timed out")]
    Timeout,
    #[error("malformed backend response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeRequest {
    pub context: Vec<String>,
    pub abbrev: Abbreviation,
    pub k: usize,
}

impl AeRequest {
    pub fn new(context: Vec<String>, abbrev: Abbreviation, k: usize) -> Self {
        AeRequest { context, abbrev, k }
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        if self.k < 1 {
            return Err(PredictError::ZeroK);
        }
        self.abbrev.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseCandidate {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmRequest {
    pub context: Vec<String>,
    /// Phrase tokens (words and mid punctuation) as surfaces.
    pub phrase_words: Vec<String>,
    pub masked_index: usize,
    pub initial: char,
    pub k: usize,
}

impl FmRequest {
    /// Builds a request whose initial is taken from the masked word.
    pub fn for_word(context: Vec<String>, phrase_words: Vec<String>, masked_index: usize, k: usize) -> Result<Self, PredictError> {
        let len = phrase_words.len();
        let initial = phrase_words
            .get(masked_index)
            .ok_or(PredictError::MaskOutOfRange { index: masked_index, len })?
            .chars()
            .next()
            .and_then(|c| c.to_lowercase().next())
            .filter(|c| c.is_alphanumeric())
            .ok_or_else(|| PredictError::Invalid(format!("word {masked_index} has no initial letter")))?;
        Ok(FmRequest {
            context,
            phrase_words,
            masked_index,
            initial,
            k,
        })
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        if self.k < 1 {
            return Err(PredictError::ZeroK);
        }
        if self.masked_index >= self.phrase_words.len() {
            return Err(PredictError::MaskOutOfRange {
                index: self.masked_index,
                len: self.phrase_words.len(),
            });
        }
        Ok(())
    }

    /// The word currently in the masked slot, unless it is a `x_` placeholder.
    pub fn current_word(&self) -> Option<String> {
        let w = self.phrase_words[self.masked_index].to_lowercase();
        (!w.ends_with('_')).then_some(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCandidate {
    pub word: String,
    pub score: f64,
}

/// A KeywordAE + FillMask backend. Implementations are immutable and may be
/// shared across threads.
pub trait Predictor: Send + Sync {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError>;
    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError>;
}

impl<P: Predictor + ?Sized> Predictor for std::sync::Arc<P> {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        (**self).keyword_ae(request)
    }
    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        (**self).fill_mask(request)
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        (**self).keyword_ae(request)
    }
    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        (**self).fill_mask(request)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        (**self).keyword_ae(request)
    }
    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        (**self).fill_mask(request)
    }
}

/// Whether `text` is a valid expansion of `abbrev`.
pub fn candidate_matches(text: &str, abbrev: &Abbreviation) -> bool {
    tokenize_phrase(text).is_ok_and(|t| matches_abbreviation(&t, abbrev))
}

/// Keeps the first occurrence of each normalized text, at most `k`.
pub fn dedup_candidates(cands: Vec<PhraseCandidate>, k: usize) -> Vec<PhraseCandidate> {
    let mut seen = std::collections::HashSet::new();
    cands
        .into_iter()
        .filter_map(|c| {
            let text = normalize_for_match(&c.text);
            seen.insert(text.clone()).then_some(PhraseCandidate { text, score: c.score })
        })
        .take(k)
        .collect()
}
