use std::sync::Arc;

use crate::abbrev::{AbbrevToken, Abbreviation};
use crate::corpus::{join_surfaces, tokenize_phrase};
use crate::expand::{AeRequest, FmRequest, PhraseCandidate, PredictError, Predictor, WordCandidate};
use crate::lm::{Constraint, NgramModel, WordId, BOUNDARY};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;
pub const DEFAULT_BEAM_WIDTH: usize = 32;

/// One way to fill a slot: a vocabulary word, or a literal the model has
/// never seen (spelled keywords and punctuation only).
#[derive(Debug, Clone, PartialEq)]
enum Choice {
    Known(WordId),
    Literal(String),
}

impl Choice {
    fn surface<'a>(&'a self, model: &'a NgramModel) -> &'a str {
        match self {
            Choice::Known(id) => model.word(*id),
            Choice::Literal(s) => s,
        }
    }

    fn id(&self) -> Option<WordId> {
        match self {
            Choice::Known(id) => Some(*id),
            Choice::Literal(_) => None,
        }
    }

    fn score(&self, model: &NgramModel, ctx: &[Option<WordId>]) -> f64 {
        match self {
            Choice::Known(id) => model.score_id(*id, ctx),
            Choice::Literal(_) => model.oov_score(),
        }
    }
}

fn exact_or_literal(model: &NgramModel, surface: &str) -> Vec<Choice> {
    match model.id(surface).filter(|_| model.contains(surface)) {
        Some(id) => vec![Choice::Known(id)],
        None => vec![Choice::Literal(surface.to_string())],
    }
}

fn slot_choices(model: &NgramModel, token: &AbbrevToken) -> Vec<Choice> {
    let known = |ids: Vec<WordId>| ids.into_iter().map(Choice::Known).collect();
    match token {
        AbbrevToken::Initial(c) => known(model.matching_ids(&Constraint::InitialIs(*c))),
        AbbrevToken::CompleteKeyword(w) => exact_or_literal(model, &w.to_lowercase()),
        AbbrevToken::MidPunct(c) => exact_or_literal(model, &c.to_string()),
        AbbrevToken::IncompleteKeyword(s) => {
            let s = s.to_lowercase();
            let mut ids = model.matching_ids(&Constraint::HasPrefix(s.clone()));
            ids.extend(model.matching_ids(&Constraint::ConsonantMatches(s)));
            ids.sort_by(|&a, &b| model.word(a).cmp(model.word(b)));
            ids.dedup();
            known(ids)
        }
    }
}

/// Context ids: each turn opened by a boundary marker, then one more marker
/// to open the phrase being predicted.
fn seed_context(model: &NgramModel, context: &[String]) -> Vec<Option<WordId>> {
    let mut seq = Vec::new();
    for turn in context {
        if let Ok(tokens) = tokenize_phrase(turn) {
            seq.push(BOUNDARY.to_string());
            seq.extend(tokens.iter().map(|t| t.surface.to_lowercase()));
        }
    }
    seq.push(BOUNDARY.to_string());
    // Only the last order-1 entries can matter.
    let keep = model.order().saturating_sub(1);
    let start = seq.len().saturating_sub(keep);
    model.context_ids(&seq[start..])
}

fn is_word_slot(token: &AbbrevToken) -> bool {
    !matches!(token, AbbrevToken::MidPunct(_))
}

fn render(model: &NgramModel, abbrev: &Abbreviation, path: &[&Choice]) -> String {
    join_surfaces(
        path.iter()
            .zip(&abbrev.tokens)
            .map(|(c, t)| (c.surface(model), is_word_slot(t))),
    )
}

fn rank(scored: &mut [(f64, String)]) {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
}

struct Hyp {
    choices: Vec<usize>,
    ctx: Vec<Option<WordId>>,
    score: f64,
}

/// Beam search over the abbreviation's slots. Every slot is filled from the
/// vocabulary words satisfying its token; path scores are summed n-gram log
/// scores conditioned on the (seeded) context. Returns the top `k` paths.
pub fn beam_expand(model: &NgramModel, request: &AeRequest, beam_width: usize) -> Result<Vec<PhraseCandidate>, PredictError> {
    request.validate()?;
    if beam_width < request.k {
        return Err(PredictError::Invalid(format!("beam width {beam_width} is smaller than k = {}", request.k)));
    }
    let slots: Vec<Vec<Choice>> = request.abbrev.tokens.iter().map(|t| slot_choices(model, t)).collect();
    if slots.iter().any(Vec::is_empty) {
        return Ok(Vec::new());
    }
    let hist = model.order().saturating_sub(1);
    let mut beam = vec![Hyp {
        choices: Vec::new(),
        ctx: seed_context(model, &request.context),
        score: 0.0,
    }];
    for options in &slots {
        let mut next = Vec::with_capacity(beam.len() * options.len());
        for hyp in &beam {
            for (i, choice) in options.iter().enumerate() {
                let score = hyp.score + choice.score(model, &hyp.ctx);
                let mut ctx = hyp.ctx.clone();
                ctx.push(choice.id());
                if ctx.len() > hist {
                    ctx.drain(..ctx.len() - hist);
                }
                let mut choices = hyp.choices.clone();
                choices.push(i);
                next.push(Hyp { choices, ctx, score });
            }
        }
        if next.len() > beam_width {
            next.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.choices.cmp(&b.choices)));
            next.truncate(beam_width);
        }
        beam = next;
    }
    let mut scored: Vec<(f64, String)> = beam
        .iter()
        .map(|h| {
            let path: Vec<&Choice> = h.choices.iter().zip(&slots).map(|(&i, opts)| &opts[i]).collect();
            (h.score, render(model, &request.abbrev, &path))
        })
        .collect();
    rank(&mut scored);
    scored.truncate(request.k);
    Ok(scored.into_iter().map(|(score, text)| PhraseCandidate { text, score }).collect())
}

/// Scores every path through the slot lattice. Refuses lattices with more
/// than `cap` paths.
pub fn exhaustive_expand(model: &NgramModel, request: &AeRequest, cap: u128) -> Result<Vec<PhraseCandidate>, PredictError> {
    request.validate()?;
    let slots: Vec<Vec<Choice>> = request.abbrev.tokens.iter().map(|t| slot_choices(model, t)).collect();
    let paths: u128 = slots.iter().map(|s| s.len() as u128).product();
    if paths == 0 {
        return Ok(Vec::new());
    }
    if paths > cap {
        return Err(PredictError::TooLarge { paths, cap });
    }
    let seed = seed_context(model, &request.context);
    let mut scored = Vec::with_capacity(paths as usize);
    let mut odometer = vec![0usize; slots.len()];
    loop {
        let path: Vec<&Choice> = odometer.iter().zip(&slots).map(|(&i, opts)| &opts[i]).collect();
        let mut ctx = seed.clone();
        let mut score = 0.0;
        for choice in &path {
            score += choice.score(model, &ctx);
            ctx.push(choice.id());
        }
        scored.push((score, render(model, &request.abbrev, &path)));

        let mut slot = slots.len();
        loop {
            if slot == 0 {
                rank(&mut scored);
                scored.truncate(request.k);
                return Ok(scored.into_iter().map(|(score, text)| PhraseCandidate { text, score }).collect());
            }
            slot -= 1;
            odometer[slot] += 1;
            if odometer[slot] < slots[slot].len() {
                break;
            }
            odometer[slot] = 0;
        }
    }
}

/// Scores each word with the request's initial by its left context plus, when
/// a right neighbour exists, how well that neighbour follows it. The word
/// currently in the slot is not proposed.
pub fn ngram_fill_mask(model: &NgramModel, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
    request.validate()?;
    let mut left = seed_context(model, &request.context);
    let lower: Vec<String> = request.phrase_words.iter().map(|w| w.to_lowercase()).collect();
    left.extend(model.context_ids(&lower[..request.masked_index]));
    let right = lower.get(request.masked_index + 1);
    let current = request.current_word();
    let mut scored: Vec<(f64, &str)> = model
        .matching_ids(&Constraint::InitialIs(request.initial))
        .into_iter()
        .filter(|&id| current.as_deref() != Some(model.word(id)))
        .map(|id| {
            let mut s = model.score_id(id, &left);
            if let Some(next) = right {
                let mut ctx = left.clone();
                ctx.push(Some(id));
                s += match model.id(next) {
                    Some(nid) if model.contains(next) => model.score_id(nid, &ctx),
                    _ => model.oov_score(),
                };
            }
            (s, model.word(id))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.truncate(request.k);
    Ok(scored
        .into_iter()
        .map(|(score, w)| WordCandidate { word: w.to_string(), score })
        .collect())
}

#[derive(Debug, Clone)]
pub struct NgramPredictor {
    model: Arc<NgramModel>,
    beam_width: usize,
}

impl NgramPredictor {
    pub fn new(model: Arc<NgramModel>) -> Self {
        Self::with_beam_width(model, DEFAULT_BEAM_WIDTH)
    }

    pub fn with_beam_width(model: Arc<NgramModel>, beam_width: usize) -> Self {
        NgramPredictor { model, beam_width }
    }

    pub fn model(&self) -> &NgramModel {
        &self.model
    }
}

impl Predictor for NgramPredictor {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        beam_expand(&self.model, request, self.beam_width.max(request.k))
    }

    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        ngram_fill_mask(&self.model, request)
    }
}

#[derive(Debug, Clone)]
pub struct ExhaustivePredictor {
    model: Arc<NgramModel>,
    cap: u128,
}

impl ExhaustivePredictor {
    pub fn new(model: Arc<NgramModel>) -> Self {
        ExhaustivePredictor { model, cap: DEFAULT_ENUMERATION_CAP }
    }

    pub fn with_cap(model: Arc<NgramModel>, cap: u128) -> Self {
        ExhaustivePredictor { model, cap }
    }
}

impl Predictor for ExhaustivePredictor {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        exhaustive_expand(&self.model, request, self.cap)
    }

    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        ngram_fill_mask(&self.model, request)
    }
}
