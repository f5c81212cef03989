//! Word n-gram language model with stupid-backoff scoring.
//!
//! Scores are natural-log relative frequencies: at the longest history with a
//! non-zero continuation count, `ln(count(h w) / count(h *))`, plus
//! `ln(backoff)` for every order backed off. Unigrams are relative to the
//! total number of predicted tokens. Sentences are padded on the left with a
//! single [`BOUNDARY`] marker, which only ever appears as history.
//!
//! The vocabulary is kept sorted so that prefix-constrained lookups are a
//! binary-searched range, with a first-character index on top.
//!
//! ## File format
//!
//! JSON object, `format` = `"abbrex-ngram"`, `version` = 1:
//!
//! ```json
//! {"format":"abbrex-ngram","version":1,"order":3,"backoff":0.4,
//!  "vocab":["<s>","a","b"],"ngrams":[[[1],2],[[0,1],2],[[1,2],1]]}
//! ```
//!
//! `ngrams` lists every counted n-gram (orders 1..=order) as word-id arrays
//! into `vocab` with its count. History counts are rebuilt on load.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbrev::consonant_shorthand;
use crate::corpus::{tokenize_phrase, Dialogue, PhraseToken};

pub const BOUNDARY: &str = "<s>";
pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_BACKOFF: f64 = 0.4;
const FORMAT: &str = "abbrex-ngram";
const VERSION: u32 = 1;

pub type WordId = u32;
const BOUNDARY_ID: WordId = 0;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("n-gram order must be at least 1, got {0}")]
    BadOrder(usize),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("invalid model file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Word-level constraint for candidate lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    InitialIs(char),
    HasPrefix(String),
    ConsonantMatches(String),
    Exact(String),
}

impl Constraint {
    pub fn accepts(&self, word: &str) -> bool {
        match self {
            Constraint::InitialIs(c) => word.starts_with(*c),
            Constraint::HasPrefix(p) => word.starts_with(p.as_str()),
            Constraint::ConsonantMatches(s) => {
                let n = s.chars().count();
                n >= 2 && consonant_shorthand(word, n).is_ok_and(|c| &c == s)
            }
            Constraint::Exact(w) => word == w,
        }
    }

    fn search_prefix(&self) -> String {
        match self {
            Constraint::InitialIs(c) => c.to_string(),
            Constraint::HasPrefix(p) | Constraint::Exact(p) => p.clone(),
            Constraint::ConsonantMatches(s) => s.chars().take(1).collect(),
        }
    }
}

/// Training sequences for whole dialogues: the lowercased tokens of every
/// turn, with [`BOUNDARY`] between turns, so that predictions can condition
/// on the end of the previous turn.
pub fn dialogue_sequences(dialogues: &[Dialogue]) -> Vec<Vec<String>> {
    dialogues
        .iter()
        .map(|d| {
            let mut seq = Vec::new();
            for turn in &d.turns {
                let Ok(tokens) = tokenize_phrase(&turn.text) else { continue };
                if !seq.is_empty() {
                    seq.push(BOUNDARY.to_string());
                }
                seq.extend(lower_surfaces(&tokens));
            }
            seq
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    backoff: f64,
    /// id → surface; id 0 is the boundary marker.
    words: Vec<String>,
    ids: HashMap<String, WordId>,
    /// Non-boundary ids sorted by surface.
    sorted: Vec<WordId>,
    /// First character → range into `sorted`.
    by_initial: BTreeMap<char, (usize, usize)>,
    /// Full n-gram (history + word) → count, all orders.
    counts: HashMap<Box<[WordId]>, u32>,
    /// History → number of continuations observed.
    histories: HashMap<Box<[WordId]>, u32>,
    total: u64,
    ln_backoff: f64,
    floor: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    backoff: f64,
    vocab: Vec<String>,
    ngrams: Vec<(Vec<WordId>, u32)>,
}

fn lower_surfaces(tokens: &[PhraseToken]) -> Vec<String> {
    tokens.iter().map(|t| t.surface.to_lowercase()).collect()
}

impl NgramModel {
    /// Counts every k-gram (k ≤ order) of the left-padded sentences.
    pub fn train(sentences: &[Vec<PhraseToken>], order: usize) -> Result<Self, LmError> {
        Self::train_with_backoff(sentences, order, DEFAULT_BACKOFF)
    }

    pub fn train_with_backoff(sentences: &[Vec<PhraseToken>], order: usize, backoff: f64) -> Result<Self, LmError> {
        let seqs: Vec<Vec<String>> = sentences.iter().map(|s| lower_surfaces(s)).collect();
        Self::train_sequences(&seqs, order, backoff)
    }

    /// Trains on word sequences that may contain [`BOUNDARY`] markers, e.g.
    /// whole dialogues with a marker before every turn.
    pub fn train_sequences(seqs: &[Vec<String>], order: usize, backoff: f64) -> Result<Self, LmError> {
        if order < 1 {
            return Err(LmError::BadOrder(order));
        }
        if seqs.iter().all(|s| s.iter().all(|w| w == BOUNDARY)) {
            return Err(LmError::EmptyCorpus);
        }
        let mut words = vec![BOUNDARY.to_string()];
        let mut ids: HashMap<String, WordId> = HashMap::from([(BOUNDARY.to_string(), BOUNDARY_ID)]);
        let mut counts: HashMap<Box<[WordId]>, u32> = HashMap::new();
        for seq in seqs {
            let mut padded = vec![BOUNDARY_ID];
            for w in seq {
                let id = *ids.entry(w.clone()).or_insert_with(|| {
                    words.push(w.clone());
                    (words.len() - 1) as WordId
                });
                padded.push(id);
            }
            for end in 1..padded.len() {
                if padded[end] == BOUNDARY_ID {
                    continue;
                }
                for n in 1..=order.min(end + 1) {
                    *counts.entry(padded[end + 1 - n..=end].into()).or_default() += 1;
                }
            }
        }
        Ok(Self::assemble(order, backoff, words, counts))
    }

    fn assemble(order: usize, backoff: f64, words: Vec<String>, counts: HashMap<Box<[WordId]>, u32>) -> Self {
        let ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i as WordId)).collect();
        let mut sorted: Vec<WordId> = (1..words.len() as WordId).collect();
        sorted.sort_by(|&a, &b| words[a as usize].cmp(&words[b as usize]));
        let mut by_initial: BTreeMap<char, (usize, usize)> = BTreeMap::new();
        for (pos, &id) in sorted.iter().enumerate() {
            if let Some(c) = words[id as usize].chars().next() {
                by_initial.entry(c).and_modify(|r| r.1 = pos + 1).or_insert((pos, pos + 1));
            }
        }
        let mut histories: HashMap<Box<[WordId]>, u32> = HashMap::new();
        let mut total = 0u64;
        for (gram, &c) in &counts {
            if gram.len() == 1 {
                total += u64::from(c);
            } else {
                *histories.entry(gram[..gram.len() - 1].into()).or_default() += c;
            }
        }
        let ln_backoff = backoff.ln();
        // Below the weakest in-vocabulary score: one count, fully backed off.
        let floor = (order as f64) * ln_backoff - ((total + 1) as f64).ln();
        NgramModel {
            order,
            backoff,
            words,
            ids,
            sorted,
            by_initial,
            counts,
            histories,
            total,
            ln_backoff,
            floor,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn backoff(&self) -> f64 {
        self.backoff
    }

    /// Vocabulary size, boundary marker excluded.
    pub fn vocab_len(&self) -> usize {
        self.words.len() - 1
    }

    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.sorted.iter().map(|&id| self.words[id as usize].as_str())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.get(word).is_some_and(|&id| id != BOUNDARY_ID)
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, gram: &[&str]) -> u32 {
        let ids: Option<Vec<WordId>> = gram.iter().map(|w| self.id(w)).collect();
        ids.and_then(|ids| self.counts.get(ids.as_slice()).copied()).unwrap_or(0)
    }

    /// Score assigned to out-of-vocabulary words.
    pub fn oov_score(&self) -> f64 {
        self.floor
    }

    /// Maps context words to ids; unknown words break the history.
    pub fn context_ids<S: AsRef<str>>(&self, context: &[S]) -> Vec<Option<WordId>> {
        context.iter().map(|w| self.id(&w.as_ref().to_lowercase())).collect()
    }

    /// Stupid-backoff log score of `word` after `context`.
    pub fn score<S: AsRef<str>>(&self, word: &str, context: &[S]) -> f64 {
        match self.id(&word.to_lowercase()) {
            Some(id) if id != BOUNDARY_ID => self.score_id(id, &self.context_ids(context)),
            _ => self.floor,
        }
    }

    /// Score by id. `context` entries of `None` are unknown words.
    pub fn score_id(&self, word: WordId, context: &[Option<WordId>]) -> f64 {
        let max_hist = (self.order - 1).min(context.len());
        // Longest usable history stops at the nearest unknown word.
        let known = context.iter().rev().take(max_hist).take_while(|c| c.is_some()).count();
        let mut key: Vec<WordId> = Vec::with_capacity(known + 1);
        for h in (1..=known).rev() {
            key.clear();
            key.extend(context[context.len() - h..].iter().map(|c| c.unwrap_or(BOUNDARY_ID)));
            let hist = self.histories.get(key.as_slice()).copied().unwrap_or(0);
            if hist == 0 {
                continue;
            }
            key.push(word);
            if let Some(&c) = self.counts.get(key.as_slice()) {
                let levels = (max_hist - h) as f64;
                return (f64::from(c) / f64::from(hist)).ln() + levels * self.ln_backoff;
            }
        }
        match self.counts.get([word].as_slice()) {
            Some(&c) => (f64::from(c) / self.total as f64).ln() + max_hist as f64 * self.ln_backoff,
            None => self.floor,
        }
    }

    /// All vocabulary words satisfying `constraint`, in lexicographic order.
    pub fn matching_ids(&self, constraint: &Constraint) -> Vec<WordId> {
        if let Constraint::Exact(w) = constraint {
            return self.id(w).filter(|&id| id != BOUNDARY_ID).into_iter().collect();
        }
        let prefix = constraint.search_prefix();
        let (lo, hi) = match prefix.chars().next() {
            None => (0, self.sorted.len()),
            Some(c) => match self.by_initial.get(&c) {
                None => return Vec::new(),
                Some(&range) => range,
            },
        };
        let slice = &self.sorted[lo..hi];
        let start = slice.partition_point(|&id| self.word(id) < prefix.as_str());
        slice[start..]
            .iter()
            .take_while(|&&id| self.word(id).starts_with(prefix.as_str()))
            .filter(|&&id| constraint.accepts(self.word(id)))
            .copied()
            .collect()
    }

    /// Top-`k` words satisfying `constraint`, best score first, ties broken
    /// lexicographically.
    pub fn candidates<S: AsRef<str>>(&self, context: &[S], constraint: &Constraint, k: usize) -> Result<Vec<(String, f64)>, LmError> {
        if k < 1 {
            return Err(LmError::ZeroK);
        }
        let ctx = self.context_ids(context);
        let mut scored: Vec<(WordId, f64)> = self
            .matching_ids(constraint)
            .into_iter()
            .map(|id| (id, self.score_id(id, &ctx)))
            .collect();
        // matching_ids is lexicographic, so a stable sort keeps ties ordered.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        scored.truncate(k);
        Ok(scored.into_iter().map(|(id, s)| (self.word(id).to_string(), s)).collect())
    }

    /// Word completions of `prefix` (next-word prediction when empty).
    pub fn completions<S: AsRef<str>>(&self, prefix: &str, context: &[S], k: usize) -> Result<Vec<(String, f64)>, LmError> {
        self.candidates(context, &Constraint::HasPrefix(prefix.to_lowercase()), k)
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), LmError> {
        let mut ngrams: Vec<(Vec<WordId>, u32)> = self.counts.iter().map(|(g, &c)| (g.to_vec(), c)).collect();
        ngrams.sort();
        let file = ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            order: self.order,
            backoff: self.backoff,
            vocab: self.words.clone(),
            ngrams,
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, LmError> {
        let file: ModelFile = serde_json::from_reader(reader)?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(LmError::BadFile(format!("unsupported format {} v{}", file.format, file.version)));
        }
        if file.order < 1 {
            return Err(LmError::BadOrder(file.order));
        }
        if file.vocab.first().map(String::as_str) != Some(BOUNDARY) {
            return Err(LmError::BadFile("vocab must start with the boundary marker".into()));
        }
        let n = file.vocab.len() as WordId;
        let mut counts = HashMap::with_capacity(file.ngrams.len());
        for (gram, c) in file.ngrams {
            if gram.is_empty() || gram.len() > file.order || gram.iter().any(|&id| id >= n) {
                return Err(LmError::BadFile(format!("bad n-gram {gram:?}")));
            }
            counts.insert(gram.into_boxed_slice(), c);
        }
        if counts.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        Ok(Self::assemble(file.order, file.backoff, file.vocab, counts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize_phrase;

    fn model(sents: &[&str], order: usize) -> NgramModel {
        let s: Vec<_> = sents.iter().map(|s| tokenize_phrase(s).unwrap()).collect();
        NgramModel::train(&s, order).unwrap()
    }

    #[test]
    fn counts_and_scores() {
        let m = model(&["a b", "a c"], 2);
        assert_eq!(m.count(&["a"]), 2);
        assert_eq!(m.count(&["a", "b"]), 1);
        assert!((m.score("b", &["a"]) - 0.5f64.ln()).abs() < 1e-12);
        let unseen = m.score("a", &["zzz"]);
        assert!((unseen - ((2.0f64 / 4.0).ln() + 0.4f64.ln())).abs() < 1e-12);
        // seen history but unseen continuation backs off too
        assert!((m.score("a", &["b"]) - ((0.5f64).ln() + 0.4f64.ln())).abs() < 1e-12);
        assert_eq!(m.score("nope", &["a"]), m.oov_score());
        assert!(m.oov_score() < m.score("b", &["zzz"]));
    }

    #[test]
    fn boundary_history() {
        let m = model(&["a b", "a c"], 2);
        assert!((m.score("a", &[BOUNDARY]) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn unigram_ignores_context() {
        let m = model(&["a b", "a c"], 1);
        assert_eq!(m.score("a", &["b"]), m.score("a", &["c", "a"]));
        assert!((m.score("a", &["b"]) - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn train_errors() {
        assert!(matches!(NgramModel::train(&[], 3), Err(LmError::EmptyCorpus)));
        let s = vec![tokenize_phrase("a").unwrap()];
        assert!(matches!(NgramModel::train(&s, 0), Err(LmError::BadOrder(0))));
    }

    #[test]
    fn constrained_candidates() {
        let m = model(&["bed bedroom bedroom bandage", "the bedroom"], 2);
        let none: [&str; 0] = [];
        assert_eq!(m.candidates(&none, &Constraint::Exact("bedroom".into()), 5).unwrap()[0].0, "bedroom");
        assert!(m.candidates(&none, &Constraint::Exact("kitchen".into()), 5).unwrap().is_empty());
        let be: Vec<_> = m.candidates(&none, &Constraint::HasPrefix("be".into()), 2).unwrap();
        assert_eq!(be.iter().map(|c| c.0.as_str()).collect::<Vec<_>>(), ["bedroom", "bed"]);
        let b = m.candidates(&none, &Constraint::InitialIs('b'), 10).unwrap();
        assert_eq!(b.len(), 3);
        // bed and bandage tie on count: lexicographic
        assert_eq!(b.iter().map(|c| c.0.as_str()).collect::<Vec<_>>(), ["bedroom", "bandage", "bed"]);
        let bd = m.candidates(&none, &Constraint::ConsonantMatches("bd".into()), 10).unwrap();
        assert_eq!(bd.iter().map(|c| c.0.as_str()).collect::<Vec<_>>(), ["bedroom", "bed"]);
        assert!(matches!(m.candidates(&none, &Constraint::InitialIs('b'), 0), Err(LmError::ZeroK)));
        assert!(m.candidates(&none, &Constraint::InitialIs('x'), 3).unwrap().is_empty());
    }

    #[test]
    fn save_load_round_trip() {
        let m = model(&["i saw him", "i saw her, then left"], 3);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = NgramModel::load(&buf[..]).unwrap();
        for (w, ctx) in [("saw", vec!["i"]), ("him", vec!["i", "saw"]), (",", vec!["saw", "her"]), ("x", vec![])] {
            assert_eq!(m.score(w, &ctx), back.score(w, &ctx));
        }
        assert!(NgramModel::load(&br#"{"format":"other","version":1,"order":1,"backoff":0.4,"vocab":["<s>"],"ngrams":[]}"#[..]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn candidates_satisfy_constraint(prefix in "[a-e]{1,2}", c in proptest::char::range('a', 'e')) {
            let m = model(&["a ab abc b bad bed", "cab dab eel ace", "bead deed cadence"], 3);
            let none: [&str; 0] = [];
            for cons in [Constraint::HasPrefix(prefix.clone()), Constraint::InitialIs(c), Constraint::ConsonantMatches(format!("{c}d"))] {
                for (w, _) in m.candidates(&none, &cons, 50).unwrap() {
                    proptest::prop_assert!(cons.accepts(&w));
                }
                let brute: Vec<_> = m.vocab().filter(|w| cons.accepts(w)).collect();
                proptest::prop_assert_eq!(m.matching_ids(&cons).len(), brute.len());
            }
        }

        #[test]
        fn score_monotone_in_count(extra in 0usize..5) {
            // "a b" occurs 1 + extra times, "a c" once
            let mut sents = vec!["a c"; 1];
            sents.extend(std::iter::repeat_n("a b", 1 + extra));
            let m = model(&sents, 2);
            proptest::prop_assert!(m.score("b", &["a"]) >= m.score("c", &["a"]));
        }
    }
}
