//! Ideal-user keystroke simulation.
//!
//! Every action in a trace costs one unit except [`Action::SpeakClick`].
//! `N_c` is the character length of the entered phrase (spaces included,
//! final punctuation excluded) and `KSR = 1 - N_a / N_c`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbrev::{initials_abbrev, normalize_for_match, AbbrevToken, Abbreviation};
use crate::corpus::{tokenize_phrase, PhraseToken, TurnTask};
use crate::expand::{AeRequest, FmRequest, PhraseCandidate, PredictError, Predictor};
use crate::lm::{NgramModel, BOUNDARY};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("N_c must be at least 1")]
    EmptyPhrase,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("target has {len} tokens, more than the maximum of {max}")]
    TooLong { len: usize, max: usize },
    #[error("target cannot be abbreviated: {0}")]
    Abbrev(#[from] crate::abbrev::AbbrevError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One user action. Payloads are a typed character or a 0-based index
/// (token position for chips, rank for candidates and word options).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Action {
    Keystroke(char),
    SpellModeClick,
    ChipClick(usize),
    CandidateClick(usize),
    WordOptionClick(usize),
    /// Manual trigger of an AE call; only emitted when `manual_expand_cost` is set.
    ExpandClick,
    SpeakClick,
}

impl Action {
    pub fn counts(&self) -> bool {
        !matches!(self, Action::SpeakClick)
    }
}

/// Counted actions in a trace.
pub fn count_actions(trace: &[Action]) -> usize {
    trace.iter().filter(|a| a.counts()).count()
}

pub fn ksr(n_a: usize, n_c: usize) -> Result<f64, SimError> {
    if n_c == 0 {
        return Err(SimError::EmptyPhrase);
    }
    Ok(1.0 - n_a as f64 / n_c as f64)
}

/// Character length of the phrase as entered.
pub fn phrase_chars(text: &str) -> usize {
    text.chars().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Initials-only AE, then KeywordAE.
    #[serde(rename = "1")]
    S1,
    /// As S1, but FillMask when the best candidate has one wrong word.
    #[serde(rename = "2")]
    S2,
    /// As S2, with FillMask for up to two wrong words.
    #[serde(rename = "2a")]
    S2A,
}

impl Strategy {
    pub fn fill_mask_allowed(self, wrong: usize) -> bool {
        match self {
            Strategy::S1 => false,
            Strategy::S2 => wrong == 1,
            Strategy::S2A => (1..=2).contains(&wrong),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Strategy::S1 => "1",
            Strategy::S2 => "2",
            Strategy::S2A => "2a",
        }
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "s1" => Ok(Strategy::S1),
            "2" | "s2" => Ok(Strategy::S2),
            "2a" | "s2a" => Ok(Strategy::S2A),
            _ => Err(format!("unknown strategy {s:?} (expected 1, 2 or 2a)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AeVersion {
    /// Keywords are spelled out completely before the next call.
    #[serde(rename = "1")]
    V1,
    /// One letter per call.
    #[serde(rename = "2")]
    V2,
}

impl AeVersion {
    pub fn label(self) -> &'static str {
        match self {
            AeVersion::V1 => "1",
            AeVersion::V2 => "2",
        }
    }
}

impl FromStr for AeVersion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "v1" => Ok(AeVersion::V1),
            "2" | "v2" => Ok(AeVersion::V2),
            _ => Err(format!("unknown AE version {s:?} (expected 1 or 2)")),
        }
    }
}

impl fmt::Display for AeVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub strategy: Strategy,
    pub ae_version: AeVersion,
    pub k: usize,
    pub use_context: bool,
    pub max_len: usize,
    /// Charge one ExpandClick per AE call.
    pub manual_expand_cost: bool,
    /// Charge a CandidateClick for picking the correct AE option before speaking.
    pub charge_selection: bool,
    /// Keyword boxes start with the word's initial.
    pub keyword_prefilled: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            strategy: Strategy::S1,
            ae_version: AeVersion::V1,
            k: 5,
            use_context: true,
            max_len: 10,
            manual_expand_cost: false,
            charge_selection: false,
            keyword_prefilled: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.k < 1 {
            return Err(SimError::ZeroK);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvedBy {
    InitialsOnly,
    KeywordAe,
    FillMask,
    FullSpell,
    /// Forward-prediction baseline.
    Baseline,
}

impl SolvedBy {
    pub fn label(self) -> &'static str {
        match self {
            SolvedBy::InitialsOnly => "initials_only",
            SolvedBy::KeywordAe => "keyword_ae",
            SolvedBy::FillMask => "fill_mask",
            SolvedBy::FullSpell => "full_spell",
            SolvedBy::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub task_id: String,
    pub n_a: usize,
    pub n_c: usize,
    pub ksr: f64,
    pub llm_calls: usize,
    pub solved_by: SolvedBy,
    pub trace: Vec<Action>,
}

impl TurnResult {
    fn finish(task: &TurnTask, mut trace: Vec<Action>, llm_calls: usize, solved_by: SolvedBy) -> Result<Self, SimError> {
        trace.push(Action::SpeakClick);
        let n_a = count_actions(&trace);
        let n_c = phrase_chars(&task.target_text());
        Ok(TurnResult {
            task_id: task.id(),
            n_a,
            n_c,
            ksr: ksr(n_a, n_c)?,
            llm_calls,
            solved_by,
            trace,
        })
    }
}

fn lower(tokens: &[PhraseToken]) -> Vec<String> {
    tokens.iter().map(|t| t.surface.to_lowercase()).collect()
}

/// Best candidate for partial correction: the one with most position-aligned
/// word matches, earliest rank on ties. Candidates that do not align
/// token-for-token are skipped. Returns (rank, tokens, wrong word positions).
fn best_aligned(cands: &[PhraseCandidate], target: &[String]) -> Option<(usize, Vec<String>, Vec<usize>)> {
    let mut best: Option<(usize, Vec<String>, Vec<usize>)> = None;
    for (rank, c) in cands.iter().enumerate() {
        let Ok(toks) = tokenize_phrase(&c.text) else { continue };
        if toks.len() != target.len() {
            continue;
        }
        let words = lower(&toks);
        let wrong: Vec<usize> = (0..target.len()).filter(|&i| words[i] != target[i]).collect();
        if best.as_ref().is_none_or(|b| wrong.len() < b.2.len()) {
            best = Some((rank, words, wrong));
        }
    }
    best
}

fn contains_target(cands: &[PhraseCandidate], target: &str) -> Option<usize> {
    cands.iter().position(|c| normalize_for_match(&c.text) == target)
}

struct Turn<'a> {
    task: &'a TurnTask,
    cfg: &'a SimConfig,
    ae: &'a dyn Predictor,
    fm: &'a dyn Predictor,
    context: Vec<String>,
    target_norm: String,
    target_words: Vec<String>,
    abbrev: Abbreviation,
    /// Letters of each word present in the abbreviation (0 = initial only).
    spelled: Vec<usize>,
    trace: Vec<Action>,
    llm_calls: usize,
}

impl Turn<'_> {
    fn call_ae(&mut self) -> Result<Vec<PhraseCandidate>, SimError> {
        if self.cfg.manual_expand_cost {
            self.trace.push(Action::ExpandClick);
        }
        self.llm_calls += 1;
        let req = AeRequest::new(self.context.clone(), self.abbrev.clone(), self.cfg.k);
        let mut cands = self.ae.keyword_ae(&req)?;
        cands.truncate(self.cfg.k);
        Ok(cands)
    }

    fn word_len(&self, i: usize) -> usize {
        self.target_words[i].chars().count()
    }

    fn fully_spelled(&self, i: usize) -> bool {
        !self.task.target[i].is_word() || self.spelled[i] >= self.word_len(i)
    }

    fn set_spelled(&mut self, i: usize, letters: usize) {
        let word = &self.target_words[i];
        let n = word.chars().count();
        self.spelled[i] = letters.min(n);
        self.abbrev.tokens[i] = if letters >= n {
            AbbrevToken::CompleteKeyword(word.clone())
        } else if letters >= 2 {
            AbbrevToken::IncompleteKeyword(word.chars().take(letters).collect())
        } else {
            self.abbrev.tokens[i].clone()
        };
    }

    fn select_and_finish(mut self, rank: usize, solved_by: SolvedBy) -> Result<TurnResult, SimError> {
        if self.cfg.charge_selection {
            self.trace.push(Action::CandidateClick(rank));
        }
        TurnResult::finish(self.task, self.trace, self.llm_calls, solved_by)
    }

    fn fill_mask(mut self, rank: usize, mut words: Vec<String>, wrong: Vec<usize>) -> Result<TurnResult, SimError> {
        self.trace.push(Action::CandidateClick(rank));
        for i in wrong {
            self.trace.push(Action::ChipClick(i));
            self.llm_calls += 1;
            let req = FmRequest::for_word(self.context.clone(), words.clone(), i, self.cfg.k)?;
            let opts = self.fm.fill_mask(&req)?;
            let target = &self.target_words[i];
            match opts.iter().take(self.cfg.k).position(|o| o.word.to_lowercase() == *target) {
                Some(r) => self.trace.push(Action::WordOptionClick(r)),
                None => self.trace.extend(target.chars().map(Action::Keystroke)),
            }
            words[i] = target.clone();
        }
        TurnResult::finish(self.task, self.trace, self.llm_calls, SolvedBy::FillMask)
    }

    fn run(mut self) -> Result<TurnResult, SimError> {
        self.trace.extend(self.abbrev.render_compact().chars().map(Action::Keystroke));
        let mut cands = self.call_ae()?;
        let mut spell_mode = false;
        let mut active_chip: Option<usize> = None;
        loop {
            if let Some(rank) = contains_target(&cands, &self.target_norm) {
                let by = if spell_mode { SolvedBy::KeywordAe } else { SolvedBy::InitialsOnly };
                return self.select_and_finish(rank, by);
            }
            if (0..self.target_words.len()).all(|i| self.fully_spelled(i)) {
                return TurnResult::finish(self.task, self.trace, self.llm_calls, SolvedBy::FullSpell);
            }
            let best = best_aligned(&cands, &self.target_words);
            if let Some((rank, words, wrong)) = best.clone() {
                if self.cfg.strategy.fill_mask_allowed(wrong.len()) {
                    return self.fill_mask(rank, words, wrong);
                }
            }
            // KeywordAE on the leftmost word that is wrong (or, without an
            // alignable candidate, not yet spelled).
            let next = match &best {
                Some((_, _, wrong)) => wrong.iter().copied().find(|&i| !self.fully_spelled(i)),
                None => None,
            }
            .or_else(|| (0..self.target_words.len()).find(|&i| !self.fully_spelled(i)))
            .expect("some word is not fully spelled");
            if !spell_mode {
                self.trace.push(Action::SpellModeClick);
                spell_mode = true;
            }
            if active_chip != Some(next) {
                self.trace.push(Action::ChipClick(next));
                active_chip = Some(next);
                if self.cfg.keyword_prefilled && self.spelled[next] == 0 {
                    self.spelled[next] = 1;
                }
            }
            let have = self.spelled[next];
            let len = self.word_len(next);
            let upto = match self.cfg.ae_version {
                AeVersion::V1 => len,
                AeVersion::V2 => (have + 1).min(len),
            };
            let typed: Vec<char> = self.target_words[next].chars().skip(have).take(upto - have).collect();
            self.trace.extend(typed.into_iter().map(Action::Keystroke));
            self.set_spelled(next, upto);
            cands = self.call_ae()?;
        }
    }
}

/// Runs the ideal-user policy for one turn.
pub fn simulate_turn(task: &TurnTask, cfg: &SimConfig, ae: &dyn Predictor, fm: &dyn Predictor) -> Result<TurnResult, SimError> {
    cfg.validate()?;
    if task.target.len() > cfg.max_len {
        return Err(SimError::TooLong { len: task.target.len(), max: cfg.max_len });
    }
    let abbrev = initials_abbrev(&task.target)?;
    let target_words = lower(&task.target);
    Turn {
        task,
        cfg,
        ae,
        fm,
        context: if cfg.use_context { task.context.clone() } else { Vec::new() },
        target_norm: normalize_for_match(&task.target_text()),
        spelled: vec![0; target_words.len()],
        target_words,
        abbrev,
        trace: Vec::new(),
        llm_calls: 0,
    }
    .run()
}

/// Word suggestions for the forward-prediction baseline.
pub trait WordCompleter: Sync {
    /// Up to `k` words starting with `prefix` (next-word predictions when
    /// empty), given the phrase words entered so far.
    fn complete(&self, history: &[String], prefix: &str, k: usize) -> Vec<String>;
}

impl WordCompleter for NgramModel {
    fn complete(&self, history: &[String], prefix: &str, k: usize) -> Vec<String> {
        if k == 0 {
            return Vec::new();
        }
        let keep = self.order().saturating_sub(1);
        let mut ctx: Vec<&str> = std::iter::once(BOUNDARY).chain(history.iter().map(String::as_str)).collect();
        ctx.drain(..ctx.len().saturating_sub(keep));
        self.completions(prefix, &ctx, k)
            .map(|v| v.into_iter().map(|(w, _)| w).collect())
            .unwrap_or_default()
    }
}

impl<W: WordCompleter + ?Sized> WordCompleter for &W {
    fn complete(&self, history: &[String], prefix: &str, k: usize) -> Vec<String> {
        (**self).complete(history, prefix, k)
    }
}

/// Forward prediction: before every keystroke the user checks the top-`k`
/// suggestions for the current word and clicks the intended word as soon as
/// it shows up. A click inserts the word and a space. Punctuation typed after
/// an inserted space replaces it; a typed word or punctuation mark followed
/// by another word needs a space keystroke.
pub fn simulate_forward_baseline(task: &TurnTask, completer: &dyn WordCompleter, k: usize) -> Result<TurnResult, SimError> {
    let words = lower(&task.target);
    let mut trace = Vec::new();
    let mut history: Vec<String> = Vec::new();
    for (i, tok) in task.target.iter().enumerate() {
        let next_is_word = task.target.get(i + 1).is_some_and(PhraseToken::is_word);
        if !tok.is_word() {
            trace.extend(tok.surface.chars().map(Action::Keystroke));
            if next_is_word {
                trace.push(Action::Keystroke(' '));
            }
            history.push(words[i].clone());
            continue;
        }
        let chars: Vec<char> = tok.surface.chars().collect();
        let mut selected = false;
        for typed in 0..chars.len() {
            let prefix: String = words[i].chars().take(typed).collect();
            let opts = if k == 0 { Vec::new() } else { completer.complete(&history, &prefix, k) };
            if let Some(r) = opts.iter().take(k).position(|w| *w == words[i]) {
                trace.push(Action::CandidateClick(r));
                selected = true;
                break;
            }
            trace.push(Action::Keystroke(chars[typed]));
        }
        if !selected && next_is_word {
            trace.push(Action::Keystroke(' '));
        }
        history.push(words[i].clone());
    }
    TurnResult::finish(task, trace, 0, SolvedBy::Baseline)
}

/// One report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRow {
    pub task_id: String,
    pub strategy: String,
    pub version: String,
    pub k: usize,
    pub context: bool,
    pub n_a: usize,
    pub n_c: usize,
    pub ksr: f64,
    pub llm_calls: usize,
    pub solved_by: SolvedBy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub strategy: String,
    pub version: String,
    pub k: usize,
    pub context: bool,
    pub turns: usize,
    pub mean_ksr: f64,
    /// Turns entered with the first, initials-only AE call.
    pub single_call_fraction: f64,
    pub solved_by: BTreeMap<SolvedBy, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub task_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub aggregates: Vec<Aggregate>,
    pub rows: Vec<TurnRow>,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub traces: Vec<(String, Vec<Action>)>,
}

impl SweepReport {
    /// Recomputes aggregates from rows, one per configuration in first-seen order.
    pub fn recompute(&mut self) {
        self.aggregates = aggregate(&self.rows);
    }

    fn extend(&mut self, other: SweepReport) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
        self.traces.extend(other.traces);
        self.recompute();
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["task_id", "strategy", "version", "k", "context", "n_a", "n_c", "ksr", "llm_calls", "solved_by"])?;
        for r in &self.rows {
            w.write_record([
                r.task_id.clone(),
                r.strategy.clone(),
                r.version.clone(),
                r.k.to_string(),
                r.context.to_string(),
                r.n_a.to_string(),
                r.n_c.to_string(),
                format!("{:.6}", r.ksr),
                r.llm_calls.to_string(),
                r.solved_by.label().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["strategy", "version", "k", "context", "turns", "mean_ksr", "single_call_fraction"])?;
        for a in &self.aggregates {
            w.write_record([
                a.strategy.clone(),
                a.version.clone(),
                a.k.to_string(),
                a.context.to_string(),
                a.turns.to_string(),
                format!("{:.6}", a.mean_ksr),
                format!("{:.6}", a.single_call_fraction),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Traces as JSONL: `{"task_id": ..., "actions": [...]}` per line.
    pub fn write_traces<W: std::io::Write>(&self, mut writer: W) -> std::io::Result<()> {
        for (id, trace) in &self.traces {
            let line = serde_json::json!({"task_id": id, "actions": trace});
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }
}

pub fn aggregate(rows: &[TurnRow]) -> Vec<Aggregate> {
    let mut order: Vec<(String, String, usize, bool)> = Vec::new();
    let mut groups: BTreeMap<(String, String, usize, bool), Vec<&TurnRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.strategy.clone(), r.version.clone(), r.k, r.context);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let n = g.len() as f64;
            let mut solved_by = BTreeMap::new();
            for r in g {
                *solved_by.entry(r.solved_by).or_insert(0) += 1;
            }
            Aggregate {
                turns: g.len(),
                mean_ksr: g.iter().map(|r| r.ksr).sum::<f64>() / n,
                single_call_fraction: g.iter().filter(|r| r.solved_by == SolvedBy::InitialsOnly).count() as f64 / n,
                solved_by,
                strategy: key.0,
                version: key.1,
                k: key.2,
                context: key.3,
            }
        })
        .collect()
}

fn row(result: &TurnResult, strategy: &str, version: &str, k: usize, context: bool) -> TurnRow {
    TurnRow {
        task_id: result.task_id.clone(),
        strategy: strategy.to_string(),
        version: version.to_string(),
        k,
        context,
        n_a: result.n_a,
        n_c: result.n_c,
        ksr: result.ksr,
        llm_calls: result.llm_calls,
        solved_by: result.solved_by,
    }
}

fn run_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

fn collect(tasks: &[TurnTask], results: Vec<Result<TurnResult, SimError>>, label: (&str, &str, usize, bool)) -> SweepReport {
    let mut report = SweepReport::default();
    for (task, res) in tasks.iter().zip(results) {
        match res {
            Ok(r) => {
                report.rows.push(row(&r, label.0, label.1, label.2, label.3));
                report.traces.push((r.task_id, r.trace));
            }
            Err(e) => report.failures.push(Failure { task_id: task.id(), error: e.to_string() }),
        }
    }
    report.recompute();
    report
}

/// Simulates every task on `workers` threads. Failed turns are listed in
/// `failures` and left out of the aggregates. Row order follows `tasks`.
pub fn simulate_corpus(tasks: &[TurnTask], cfg: &SimConfig, ae: &dyn Predictor, fm: &dyn Predictor, workers: usize) -> Result<SweepReport, SimError> {
    cfg.validate()?;
    let results = run_pool(workers, || tasks.par_iter().map(|t| simulate_turn(t, cfg, ae, fm)).collect::<Vec<_>>())?;
    Ok(collect(tasks, results, (cfg.strategy.label(), cfg.ae_version.label(), cfg.k, cfg.use_context)))
}

/// Forward-prediction baseline over every task.
pub fn simulate_baseline_corpus(tasks: &[TurnTask], completer: &dyn WordCompleter, k: usize, workers: usize) -> Result<SweepReport, SimError> {
    let results = run_pool(workers, || {
        tasks
            .par_iter()
            .map(|t| simulate_forward_baseline(t, completer, k))
            .collect::<Vec<_>>()
    })?;
    Ok(collect(tasks, results, ("baseline", "-", k, false)))
}

/// One configuration per entry of `k_values`, otherwise as `cfg`.
pub fn sweep_options(
    tasks: &[TurnTask],
    cfg: &SimConfig,
    ae: &dyn Predictor,
    fm: &dyn Predictor,
    k_values: &[usize],
    workers: usize,
) -> Result<SweepReport, SimError> {
    let mut report = SweepReport::default();
    for &k in k_values {
        report.extend(simulate_corpus(tasks, &SimConfig { k, ..*cfg }, ae, fm, workers)?);
    }
    Ok(report)
}

/// Checks that a trace is consistent with `strategy`: no FillMask under S1,
/// and a FillMask entry (a CandidateClick followed by chips) fixes exactly
/// one word under S2 and at most two under S2A.
pub fn check_containment(trace: &[Action], strategy: Strategy) -> Result<(), String> {
    let body = match trace.last() {
        Some(Action::SpeakClick) => &trace[..trace.len() - 1],
        _ => trace,
    };
    let entry = body.iter().enumerate().position(|(i, a)| {
        matches!(a, Action::CandidateClick(_)) && i + 1 < body.len()
    });
    let Some(entry) = entry else {
        if body.iter().any(|a| matches!(a, Action::WordOptionClick(_))) {
            return Err("word option clicked outside FillMask".into());
        }
        return Ok(());
    };
    let chips = body[entry..].iter().filter(|a| matches!(a, Action::ChipClick(_))).count();
    if strategy.fill_mask_allowed(chips) {
        Ok(())
    } else {
        Err(format!("strategy {strategy} entered FillMask for {chips} word(s)"))
    }
}

/// SpeakClick occurs at most once, as the last action, and does not count.
pub fn check_speak_exclusion(trace: &[Action], n_a: usize) -> Result<(), String> {
    let speaks: Vec<usize> = trace
        .iter()
        .enumerate()
        .filter(|(_, a)| **a == Action::SpeakClick)
        .map(|(i, _)| i)
        .collect();
    if speaks.len() > 1 || speaks.first().is_some_and(|&i| i + 1 != trace.len()) {
        return Err("SpeakClick must appear at most once, last".into());
    }
    let without: Vec<Action> = trace.iter().filter(|a| **a != Action::SpeakClick).cloned().collect();
    if count_actions(&without) != n_a || count_actions(trace) != n_a {
        return Err("removing SpeakClick changed N_a".into());
    }
    Ok(())
}
