//! Fine-tuning data synthesis and top-k evaluation.
//!
//! AE triplets are `{context, shorthand, full}` with the context as
//! brace-delimited turns (`{t1}{t2}`) and the shorthand in spaced rendering.
//! FillMask triplets are `{context, phrase, word}` where the phrase has the
//! masked word replaced by its initial and `_`.
//!
//! Randomness comes from one ChaCha stream per (seed, scheme, dialogue id),
//! so output does not depend on thread count or dialogue order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::sync::OnceLock;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbrev::{initials_abbrev, keyword_abbrev, normalize_for_match, Abbreviation, KeywordSpec, ShorthandScheme};
use crate::corpus::{tokenize_phrase, tokenize_with_spans, Dialogue, PhraseToken, TurnTask};
use crate::expand::{AeRequest, FmRequest, PredictError, Predictor};

const STOPWORDS_TXT: &str = include_str!("../data/stopwords-en.txt");

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("no evaluation tasks")]
    NoTasks,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// Shipped English stop-word list.
pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word.to_lowercase().as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AeScheme {
    InitialsOnly,
    CompleteKw,
    IncompleteKw,
}

impl AeScheme {
    pub const ALL: [AeScheme; 3] = [AeScheme::InitialsOnly, AeScheme::CompleteKw, AeScheme::IncompleteKw];

    pub fn label(self) -> &'static str {
        match self {
            AeScheme::InitialsOnly => "initials_only",
            AeScheme::CompleteKw => "complete_kw",
            AeScheme::IncompleteKw => "incomplete_kw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatagenConfig {
    pub complete_kw_count_range: (usize, usize),
    pub incomplete_kw_count_range: (usize, usize),
    pub nl_range: (usize, usize),
    /// Probability that an incomplete-keyword example uses the prefix scheme.
    pub prefix_ratio: f64,
    pub seed: u64,
    /// Keyword draws per sentence for the keyword schemes.
    pub draws_per_sentence: usize,
    pub max_context_turns: usize,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig {
            complete_kw_count_range: (1, 3),
            incomplete_kw_count_range: (1, 5),
            nl_range: (2, 5),
            prefix_ratio: 0.5,
            seed: 0,
            draws_per_sentence: 1,
            max_context_turns: 5,
        }
    }
}

impl DatagenConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let ranges = [self.complete_kw_count_range, self.incomplete_kw_count_range];
        if ranges.iter().any(|&(lo, hi)| lo < 1 || lo > hi) {
            return Err(DatagenError::Config("keyword count ranges must satisfy 1 <= lo <= hi".into()));
        }
        if self.nl_range.0 < 2 || self.nl_range.0 > self.nl_range.1 {
            return Err(DatagenError::Config("NL range must satisfy 2 <= lo <= hi".into()));
        }
        if !(0.0..=1.0).contains(&self.prefix_ratio) {
            return Err(DatagenError::Config("prefix_ratio must be within [0, 1]".into()));
        }
        if self.draws_per_sentence < 1 {
            return Err(DatagenError::Config("draws_per_sentence must be positive".into()));
        }
        Ok(())
    }
}

/// Generation details kept alongside a triplet (not serialized).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AeMeta {
    pub dialogue_id: String,
    pub turn_index: usize,
    /// Keyword count as drawn, before clamping.
    pub drawn_keywords: usize,
    /// Keywords actually placed.
    pub keywords: usize,
    /// Drawn NL per incomplete keyword.
    pub nl: Vec<usize>,
    pub shorthand_scheme: Option<ShorthandScheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeTriplet {
    pub context: String,
    pub shorthand: String,
    pub full: String,
    #[serde(skip)]
    pub meta: AeMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmTriplet {
    pub context: String,
    pub phrase: String,
    pub word: String,
    #[serde(skip)]
    pub turn_index: usize,
}

/// Brace-delimited context of the last `max_turns` turns.
pub fn render_context(turns: &[String], max_turns: usize) -> String {
    turns[turns.len().saturating_sub(max_turns)..]
        .iter()
        .map(|t| format!("{{{}}}", t.trim()))
        .collect()
}

fn stream_seed(seed: u64, tag: &str, dialogue_id: &str) -> u64 {
    // FNV-1a over tag and id, mixed with the seed: stable across platforms.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in tag.bytes().chain([0]).chain(dialogue_id.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn rng_for(seed: u64, tag: &str, dialogue_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, tag, dialogue_id))
}

fn word_positions(tokens: &[PhraseToken]) -> Vec<usize> {
    (0..tokens.len()).filter(|&i| tokens[i].is_word()).collect()
}

/// Draws one keyword abbreviation. Returns `None` for single-word phrases,
/// which cannot keep a non-keyword word.
fn draw_keywords(tokens: &[PhraseToken], incomplete: bool, cfg: &DatagenConfig, rng: &mut ChaCha8Rng) -> Option<(Abbreviation, AeMeta)> {
    let words = word_positions(tokens);
    let (lo, hi) = if incomplete { cfg.incomplete_kw_count_range } else { cfg.complete_kw_count_range };
    let drawn = rng.gen_range(lo..=hi);
    if words.len() < 2 {
        return None;
    }
    let count = drawn.min(words.len() - 1);
    let mut picks: Vec<usize> = sample(rng, words.len(), count).into_iter().map(|i| words[i]).collect();
    picks.sort_unstable();
    let mut meta = AeMeta { drawn_keywords: drawn, keywords: count, ..AeMeta::default() };
    let mut spec = BTreeMap::new();
    if incomplete {
        let scheme = if rng.gen_bool(cfg.prefix_ratio) { ShorthandScheme::Prefix } else { ShorthandScheme::Consonant };
        meta.shorthand_scheme = Some(scheme);
        for &p in &picks {
            let limit = rng.gen_range(cfg.nl_range.0..=cfg.nl_range.1);
            meta.nl.push(limit);
            spec.insert(p, KeywordSpec::Incomplete { scheme, limit });
        }
    } else {
        for &p in &picks {
            spec.insert(p, KeywordSpec::Complete);
        }
    }
    let abbrev = keyword_abbrev(tokens, &spec).ok()?;
    Some((abbrev, meta))
}

fn synth_dialogue(d: &Dialogue, scheme: AeScheme, cfg: &DatagenConfig) -> Vec<AeTriplet> {
    let mut rng = rng_for(cfg.seed, scheme.label(), &d.id);
    let texts: Vec<String> = d.turns.iter().map(|t| t.text.clone()).collect();
    let mut out = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        let Ok(tokens) = tokenize_phrase(text) else { continue };
        let context = render_context(&texts[..i], cfg.max_context_turns);
        let draws = if scheme == AeScheme::InitialsOnly { 1 } else { cfg.draws_per_sentence };
        for _ in 0..draws {
            let made = match scheme {
                AeScheme::InitialsOnly => initials_abbrev(&tokens).ok().map(|a| (a, AeMeta::default())),
                AeScheme::CompleteKw => draw_keywords(&tokens, false, cfg, &mut rng),
                AeScheme::IncompleteKw => draw_keywords(&tokens, true, cfg, &mut rng),
            };
            let Some((abbrev, mut meta)) = made else { continue };
            meta.dialogue_id = d.id.clone();
            meta.turn_index = i;
            out.push(AeTriplet {
                context: context.clone(),
                shorthand: abbrev.render_spaced(),
                full: text.trim().to_string(),
                meta,
            });
        }
    }
    out
}

fn dedup<T, K: std::hash::Hash + Eq>(items: Vec<T>, key: impl Fn(&T) -> K) -> Vec<T> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|t| seen.insert(key(t))).collect()
}

/// AE triplets for every turn, in dialogue order, deduplicated.
pub fn synth_ae(dialogues: &[Dialogue], scheme: AeScheme, cfg: &DatagenConfig) -> Result<Vec<AeTriplet>, DatagenError> {
    cfg.validate()?;
    let all: Vec<AeTriplet> = dialogues.par_iter().flat_map_iter(|d| synth_dialogue(d, scheme, cfg)).collect();
    Ok(dedup(all, |t| (t.context.clone(), t.shorthand.clone(), t.full.clone())))
}

/// A word can be masked unless it starts with a digit or punctuation.
pub fn is_maskable(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_alphabetic)
}

/// Replaces the token at `index` of `text` by `<initial>_`, keeping the rest
/// of the text (including final punctuation) as written.
pub fn mask_word(text: &str, index: usize) -> Option<(String, String)> {
    let (norm, spans) = tokenize_with_spans(text).ok()?;
    let (tok, range) = spans.get(index)?;
    if !tok.is_word() {
        return None;
    }
    let initial = tok.surface.chars().next()?.to_lowercase().next()?;
    let masked = format!("{}{}_{}", &norm[..range.start], initial, &norm[range.end..]);
    Some((masked.trim().to_string(), tok.surface.clone()))
}

/// One FillMask triplet per turn with a maskable word; the masked word is
/// drawn uniformly among the maskable words.
pub fn synth_fillmask(dialogues: &[Dialogue], cfg: &DatagenConfig) -> Result<Vec<FmTriplet>, DatagenError> {
    cfg.validate()?;
    let all: Vec<FmTriplet> = dialogues
        .par_iter()
        .flat_map_iter(|d| {
            let mut rng = rng_for(cfg.seed, "fill_mask", &d.id);
            let texts: Vec<String> = d.turns.iter().map(|t| t.text.clone()).collect();
            let mut out = Vec::new();
            for (i, text) in texts.iter().enumerate() {
                let Ok(tokens) = tokenize_phrase(text) else { continue };
                let maskable: Vec<usize> = (0..tokens.len())
                    .filter(|&j| tokens[j].is_word() && is_maskable(&tokens[j].surface))
                    .collect();
                if maskable.is_empty() {
                    continue;
                }
                let pick = maskable[rng.gen_range(0..maskable.len())];
                let Some((phrase, word)) = mask_word(text, pick) else { continue };
                out.push(FmTriplet {
                    context: render_context(&texts[..i], cfg.max_context_turns),
                    phrase,
                    word,
                    turn_index: i,
                });
            }
            out
        })
        .collect();
    Ok(dedup(all, |t| (t.context.clone(), t.phrase.clone(), t.word.clone())))
}

/// Tab-separated rows with a header; tabs and newlines inside fields become spaces.
pub fn write_tsv<W: Write>(mut writer: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> std::io::Result<()> {
    writeln!(writer, "{}", header.join("\t"))?;
    for row in rows {
        let fields: Vec<String> = row.iter().map(|f| f.replace(['\t', '\n', '\r'], " ")).collect();
        writeln!(writer, "{}", fields.join("\t"))?;
    }
    Ok(())
}

pub fn ae_tsv_rows(triplets: &[AeTriplet]) -> impl Iterator<Item = Vec<String>> + '_ {
    triplets.iter().map(|t| vec![t.context.clone(), t.shorthand.clone(), t.full.clone()])
}

pub fn fm_tsv_rows(triplets: &[FmTriplet]) -> impl Iterator<Item = Vec<String>> + '_ {
    triplets.iter().map(|t| vec![t.context.clone(), t.phrase.clone(), t.word.clone()])
}

/// Example counts per corpus and scheme.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: Option<DatagenConfig>,
    /// corpus → scheme label (or "fill_mask") → count
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl Manifest {
    pub fn record(&mut self, corpus: &str, scheme: &str, count: usize) {
        self.counts.entry(corpus.to_string()).or_default().insert(scheme.to_string(), count);
    }
}

/// One AE evaluation item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTask {
    pub id: String,
    pub turn_index: usize,
    pub context: Vec<String>,
    pub abbrev: Abbreviation,
    pub target: String,
}

/// Initials-only evaluation items for turn tasks.
pub fn initials_eval_tasks(tasks: &[TurnTask], use_context: bool) -> Vec<EvalTask> {
    tasks
        .iter()
        .filter_map(|t| {
            Some(EvalTask {
                id: t.id(),
                turn_index: t.turn_index,
                context: if use_context { t.context.clone() } else { Vec::new() },
                abbrev: initials_abbrev(&t.target).ok()?,
                target: t.target_text(),
            })
        })
        .collect()
}

/// Fraction of tasks whose normalized target is among the predictor's top `k`.
pub fn eval_topk(predictor: &dyn Predictor, tasks: &[EvalTask], k: usize) -> Result<f64, DatagenError> {
    if tasks.is_empty() {
        return Err(DatagenError::NoTasks);
    }
    let hits = tasks
        .par_iter()
        .map(|t| {
            let want = normalize_for_match(&t.target);
            let cands = predictor.keyword_ae(&AeRequest::new(t.context.clone(), t.abbrev.clone(), k))?;
            Ok::<_, PredictError>(cands.iter().take(k).any(|c| normalize_for_match(&c.text) == want))
        })
        .collect::<Result<Vec<bool>, _>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / tasks.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub keywords: usize,
    /// `None` for complete keywords, else the prefix length limit.
    pub nl: Option<usize>,
    pub tasks: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRowAcc {
    pub turn_index: usize,
    pub context: bool,
    pub tasks: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub by_keywords: Vec<CurveRow>,
    pub by_turn: Vec<TurnRowAcc>,
}

/// Accuracy vs keyword count and NL limit (prefix scheme; `None` = complete
/// keywords), and initials-only accuracy per turn index with and without
/// context. Keyword positions are drawn per task from `seed`; tasks without
/// enough words to keep one non-keyword are skipped for that cell.
pub fn eval_curves(
    predictor: &dyn Predictor,
    tasks: &[TurnTask],
    keyword_counts: &[usize],
    nl_limits: &[Option<usize>],
    k: usize,
    seed: u64,
) -> Result<Curves, DatagenError> {
    let mut curves = Curves::default();
    for &kw in keyword_counts {
        for &nl in nl_limits {
            let items: Vec<EvalTask> = tasks
                .iter()
                .filter_map(|t| {
                    let words = word_positions(&t.target);
                    if kw == 0 || words.len() <= kw {
                        return None;
                    }
                    let mut rng = rng_for(seed, &format!("curve/{kw}"), &t.id());
                    let spec: BTreeMap<usize, KeywordSpec> = sample(&mut rng, words.len(), kw)
                        .into_iter()
                        .map(|i| {
                            let s = match nl {
                                None => KeywordSpec::Complete,
                                Some(limit) => KeywordSpec::Incomplete { scheme: ShorthandScheme::Prefix, limit },
                            };
                            (words[i], s)
                        })
                        .collect();
                    Some(EvalTask {
                        id: t.id(),
                        turn_index: t.turn_index,
                        context: t.context.clone(),
                        abbrev: keyword_abbrev(&t.target, &spec).ok()?,
                        target: t.target_text(),
                    })
                })
                .collect();
            let accuracy = if items.is_empty() { 0.0 } else { eval_topk(predictor, &items, k)? };
            curves.by_keywords.push(CurveRow { keywords: kw, nl, tasks: items.len(), accuracy });
        }
    }
    let turns: BTreeSet<usize> = tasks.iter().map(|t| t.turn_index).collect();
    for turn in turns {
        let subset: Vec<TurnTask> = tasks.iter().filter(|t| t.turn_index == turn).cloned().collect();
        for context in [true, false] {
            let items = initials_eval_tasks(&subset, context);
            let accuracy = eval_topk(predictor, &items, k)?;
            curves.by_turn.push(TurnRowAcc { turn_index: turn, context, tasks: items.len(), accuracy });
        }
    }
    Ok(curves)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAccuracy {
    pub tasks: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FillMaskEval {
    pub stop: SplitAccuracy,
    pub non_stop: SplitAccuracy,
}

fn parse_context(context: &str) -> Vec<String> {
    context
        .split('}')
        .filter_map(|s| s.strip_prefix('{'))
        .map(String::from)
        .collect()
}

/// FillMask top-k accuracy on triplets, split by whether the masked word is
/// a stop word.
pub fn eval_fillmask(predictor: &dyn Predictor, triplets: &[FmTriplet], k: usize) -> Result<FillMaskEval, DatagenError> {
    if triplets.is_empty() {
        return Err(DatagenError::NoTasks);
    }
    let results = triplets
        .par_iter()
        .map(|t| {
            let no_mask = || PredictError::Invalid(format!("no mask in {:?}", t.phrase));
            let unit = t.phrase.split_whitespace().position(|w| w.contains('_')).ok_or_else(no_mask)?;
            // The tokenizer does not accept the marker, so tokenize without it and put it back.
            let tokens = tokenize_phrase(&t.phrase.replace('_', "")).map_err(|e| PredictError::Invalid(e.to_string()))?;
            let mut words: Vec<String> = tokens.iter().map(|t| t.surface.clone()).collect();
            let index = tokens.iter().enumerate().filter(|(_, t)| t.is_word()).nth(unit).map(|(i, _)| i).ok_or_else(no_mask)?;
            words[index].push('_');
            let req = FmRequest::for_word(parse_context(&t.context), words, index, k)?;
            let hit = predictor.fill_mask(&req)?.iter().take(k).any(|c| c.word.eq_ignore_ascii_case(&t.word));
            Ok::<_, PredictError>((is_stopword(&t.word), hit))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let split = |stop: bool| {
        let rows: Vec<bool> = results.iter().filter(|r| r.0 == stop).map(|r| r.1).collect();
        SplitAccuracy {
            tasks: rows.len(),
            accuracy: if rows.is_empty() { 0.0 } else { rows.iter().filter(|&&h| h).count() as f64 / rows.len() as f64 },
        }
    };
    Ok(FillMaskEval { stop: split(true), non_stop: split(false) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abbrev::matches_abbreviation;

    fn dialogue(id: &str, turns: &[&str]) -> Dialogue {
        Dialogue::from_texts(id, turns).unwrap()
    }

    #[test]
    fn initials_shorthand() {
        let d = dialogue("d", &["Hi.", "I saw him play in the bedroom."]);
        let out = synth_ae(&[d], AeScheme::InitialsOnly, &DatagenConfig::default()).unwrap();
        assert_eq!(out[1].shorthand, "i s h p i t b");
        assert_eq!(out[1].context, "{Hi.}");
        assert_eq!(out[0].context, "");
    }

    #[test]
    fn two_word_sentence_clamped() {
        let d = dialogue("d", &["hello there", "ok thanks"]);
        let cfg = DatagenConfig { draws_per_sentence: 50, ..DatagenConfig::default() };
        for scheme in [AeScheme::CompleteKw, AeScheme::IncompleteKw] {
            let out = synth_ae(std::slice::from_ref(&d), scheme, &cfg).unwrap();
            assert!(!out.is_empty());
            for t in &out {
                assert_eq!(t.meta.keywords, 1);
                assert_eq!(t.shorthand.split(' ').count(), 2);
                assert!(t.shorthand.split(' ').any(|s| s.chars().count() == 1), "{}", t.shorthand);
            }
        }
        // single-word sentences give no keyword example
        let d = dialogue("d", &["thanks", "bye"]);
        assert!(synth_ae(&[d], AeScheme::CompleteKw, &cfg).unwrap().is_empty());
    }

    #[test]
    fn complete_keyword_composition() {
        let d = dialogue("d", &["x y", "I saw him play in the bedroom"]);
        let cfg = DatagenConfig { draws_per_sentence: 200, ..DatagenConfig::default() };
        let out = synth_ae(&[d], AeScheme::CompleteKw, &cfg).unwrap();
        assert!(out.iter().any(|t| t.shorthand == "i s h p i t bedroom"));
        for t in &out {
            let toks = tokenize_phrase(&t.full).unwrap();
            // rebuild the abbreviation from its spaced form and re-check
            assert!(crate::expand::candidate_matches(&t.full, &parse_spaced(&t.shorthand, &toks)));
        }
    }

    fn parse_spaced(shorthand: &str, phrase: &[PhraseToken]) -> Abbreviation {
        use crate::abbrev::AbbrevToken;
        let tokens = shorthand
            .split(' ')
            .zip(phrase)
            .map(|(s, p)| {
                let c = s.chars().next().unwrap();
                if !p.is_word() {
                    AbbrevToken::MidPunct(c)
                } else if s.chars().count() == 1 {
                    AbbrevToken::Initial(c)
                } else if s == p.surface.to_lowercase() {
                    AbbrevToken::CompleteKeyword(s.into())
                } else {
                    AbbrevToken::IncompleteKeyword(s.into())
                }
            })
            .collect();
        let a = Abbreviation::new(tokens).unwrap();
        assert!(matches_abbreviation(phrase, &a));
        a
    }

    #[test]
    fn fillmask_examples() {
        let d = dialogue(
            "d",
            &["Been sitting all day. Work was just one meeting after another.", "Oh, I'm sorry.", "7 pm works", "thanks"],
        );
        assert_eq!(mask_word("Oh, I'm sorry.", 3).unwrap(), ("Oh, I'm s_.".to_string(), "sorry".to_string()));
        for seed in 0..40 {
            let out = synth_fillmask(std::slice::from_ref(&d), &DatagenConfig { seed, ..DatagenConfig::default() }).unwrap();
            assert_eq!(out.len(), 4);
            assert_ne!(out[2].word, "7");
            assert_eq!(out[3].phrase, "t_");
            assert_eq!(out[1].context, "{Been sitting all day. Work was just one meeting after another.}");
        }
    }

    #[test]
    fn fillmask_eval_reads_triplets() {
        use crate::expand::{ScriptedFixture, ScriptedPredictor};
        let p = ScriptedPredictor::new(ScriptedFixture::default().with_fm("oh, i'm s_", &["sad", "sorry"]).with_fm("t_ you", &["then"]));
        let t = |phrase: &str, word: &str| FmTriplet { context: "{Hi.}".into(), phrase: phrase.into(), word: word.into(), turn_index: 1 };
        let triplets = [t("Oh, I'm s_.", "sorry"), t("t_ you", "thank"), t("i_ saw it.", "I")];
        let r = eval_fillmask(&p, &triplets, 2).unwrap();
        assert_eq!(r.non_stop, SplitAccuracy { tasks: 2, accuracy: 0.5 });
        assert_eq!(r.stop.tasks, 1);
        assert_eq!(eval_fillmask(&p, &triplets[..1], 1).unwrap().non_stop.accuracy, 0.0);
    }

    #[test]
    fn stopword_list() {
        assert_eq!(stopwords().len(), 179);
        assert!(is_stopword("The") && is_stopword("for") && !is_stopword("bedroom"));
    }

    #[test]
    fn tsv_escapes() {
        let mut buf = Vec::new();
        write_tsv(&mut buf, &["a", "b"], vec![vec!["x\ty".into(), "z".into()]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a\tb\nx y\tz\n");
    }

    #[test]
    fn context_round_trip() {
        let turns = vec!["a b".to_string(), "c".to_string()];
        assert_eq!(parse_context(&render_context(&turns, 5)), turns);
        assert_eq!(render_context(&turns, 1), "{c}");
    }
}
