//! Fixture backend: canned ranked lists keyed by request.
//!
//! Fixture JSON:
//!
//! ```json
//! {
//!   "ae": {"ishpitb": ["i saw him play in the backyard", "..."]},
//!   "fm": {"i saw him play in the b_": ["bedroom", "basement"]}
//! }
//! ```
//!
//! AE keys are the compact abbreviation rendering; FillMask keys come from
//! [`fm_key`]. Context is ignored. Lists are returned verbatim, truncated to
//! `k`; unknown keys give an empty list.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{join_surfaces, PhraseToken};
use crate::expand::{AeRequest, FmRequest, PhraseCandidate, PredictError, Predictor, WordCandidate};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedFixture {
    pub ae: HashMap<String, Vec<String>>,
    pub fm: HashMap<String, Vec<String>>,
}

impl ScriptedFixture {
    pub fn load(path: &Path) -> Result<Self, PredictError> {
        let text = std::fs::read_to_string(path).map_err(|e| PredictError::Invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PredictError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn with_ae(mut self, abbrev: &str, phrases: &[&str]) -> Self {
        self.ae.insert(abbrev.to_string(), phrases.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_fm(mut self, key: &str, words: &[&str]) -> Self {
        self.fm.insert(key.to_string(), words.iter().map(|s| s.to_string()).collect());
        self
    }
}

/// The phrase with the masked slot shown as `<initial>_`, e.g.
/// `"i saw him play in the b_"`.
pub fn fm_key(phrase_words: &[String], masked_index: usize, initial: char) -> String {
    let mask = format!("{initial}_");
    join_surfaces(phrase_words.iter().enumerate().map(|(i, w)| {
        if i == masked_index {
            (mask.as_str(), true)
        } else {
            (w.as_str(), PhraseToken::from_surface(w).is_word())
        }
    }))
    .to_lowercase()
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedPredictor {
    fixture: ScriptedFixture,
}

impl ScriptedPredictor {
    pub fn new(fixture: ScriptedFixture) -> Self {
        ScriptedPredictor { fixture }
    }

    pub fn fixture(&self) -> &ScriptedFixture {
        &self.fixture
    }
}

impl Predictor for ScriptedPredictor {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        request.validate()?;
        let list = self.fixture.ae.get(&request.abbrev.render_compact());
        Ok(list
            .into_iter()
            .flatten()
            .take(request.k)
            .enumerate()
            .map(|(rank, text)| PhraseCandidate { text: text.clone(), score: -(rank as f64) })
            .collect())
    }

    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        request.validate()?;
        let key = fm_key(&request.phrase_words, request.masked_index, request.initial);
        let list = self.fixture.fm.get(&key);
        Ok(list
            .into_iter()
            .flatten()
            .take(request.k)
            .enumerate()
            .map(|(rank, word)| WordCandidate { word: word.clone(), score: -(rank as f64) })
            .collect())
    }
}
