//! Acceptance suite. Each criterion prints one PASS/FAIL line; the run fails
//! if any criterion fails. Expected values are derived here, independently of
//! the library code under test.
//!
//! The dialogue corpus defaults to the bundled fixture under `data/fixture`;
//! set `ABBREX_TDC_TEST` / `ABBREX_TDC_TRAIN` to point at other splits.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use abbrex_core::abbrev::{initials_abbrev, matches_abbreviation, normalize_for_match, AbbrevToken, Abbreviation, ShorthandScheme};
use abbrex_core::corpus::{load_dialogues, make_tasks, phrase_length, tokenize_phrase, Dialogue, TurnTask};
use abbrex_core::datagen::{self, AeScheme, DatagenConfig, EvalTask};
use abbrex_core::expand::{
    beam_expand, exhaustive_expand, AeRequest, FmRequest, NgramPredictor, PhraseCandidate, PredictError, Predictor, ScriptedFixture,
    ScriptedPredictor, WordCandidate,
};
use abbrex_core::lm::{dialogue_sequences, NgramModel};
use abbrex_core::simulate::{
    self, check_containment, check_speak_exclusion, ksr, simulate_turn, AeVersion, SimConfig, SolvedBy, Strategy,
};
use abbrex_service::{events_from_trace, router, summarize_session, AppState, ServiceConfig, SessionStore};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

// Pinned tolerances and limits.
const KSR_TOL: f64 = 1e-9;
const MEAN_TOL: f64 = 1e-9;
const BIN_TOL: f64 = 0.10;
const PREFIX_RATIO_TOL: f64 = 0.05;
const MAX_CONTEXT_TURNS: usize = 5;
const MAX_LEN: usize = 10;
const ORACLE_INSTANCES: usize = 120;
const DATAGEN_EXAMPLES: usize = 10_000;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn corpus_path(var: &str, file: &str) -> PathBuf {
    std::env::var_os(var)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fixture").join(file))
}

fn load(var: &str, file: &str) -> Vec<Dialogue> {
    let path = corpus_path(var, file);
    load_dialogues(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).dialogues
}

fn test_split() -> &'static [Dialogue] {
    static D: OnceLock<Vec<Dialogue>> = OnceLock::new();
    D.get_or_init(|| load("ABBREX_TDC_TEST", "test.txt"))
}

fn train_split() -> &'static [Dialogue] {
    static D: OnceLock<Vec<Dialogue>> = OnceLock::new();
    D.get_or_init(|| load("ABBREX_TDC_TRAIN", "train.txt"))
}

fn train_lm() -> Arc<NgramModel> {
    static M: OnceLock<Arc<NgramModel>> = OnceLock::new();
    M.get_or_init(|| Arc::new(NgramModel::train_sequences(&dialogue_sequences(train_split()), 3, 0.4).unwrap()))
        .clone()
}

/// Oracle initials: lowercase first character of each word, mid punctuation
/// kept, concatenated.
fn oracle_initials(text: &str) -> String {
    let mut out = String::new();
    for unit in text.split_whitespace() {
        let mut chars = unit.chars();
        if let Some(c) = chars.next() {
            out.extend(c.to_lowercase());
        }
        out.extend(chars.filter(|c| [',', ';', ':'].contains(c)));
    }
    out
}

/// Oracle character count: words joined by single spaces, final punctuation dropped.
fn oracle_chars(text: &str) -> usize {
    text.split_whitespace().collect::<Vec<_>>().join(" ").trim_end_matches(['.', '!', '?']).chars().count()
}

fn task(text: &str) -> TurnTask {
    TurnTask { dialogue_id: "fixture".into(), turn_index: 0, context: vec![], target: tokenize_phrase(text).unwrap() }
}

// 1

fn c1_ksr_formula() -> Result<String, String> {
    let start = Instant::now();
    let cases = [((29, 29), 0.0), ((7, 29), 0.758_620_689_7), ((0, 10), 1.0)];
    for ((n_a, n_c), want) in cases {
        let got = ksr(n_a, n_c).map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= KSR_TOL, || format!("ksr({n_a},{n_c}) = {got}, want {want}"))?;
    }
    ensure(ksr(1, 0).is_err(), || "ksr with N_c = 0 must be an error".into())?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{} cases", cases.len()))
}

// 2

fn c2_round_trip() -> Result<String, String> {
    let start = Instant::now();
    let dialogues = load("ABBREX_TDC_TEST", "test.txt");
    let tasks = make_tasks(&dialogues, None, MAX_LEN);
    ensure(!tasks.is_empty(), || "no test turns".into())?;
    for t in &tasks {
        let a = initials_abbrev(&t.target).map_err(|e| format!("{}: {e}", t.id()))?;
        ensure(matches_abbreviation(&t.target, &a), || format!("{}: abbreviation does not match", t.id()))?;
        ensure(a.len() == phrase_length(&t.target), || format!("{}: {} tokens vs length {}", t.id(), a.len(), phrase_length(&t.target)))?;
        let text = t.target_text();
        ensure(a.render_compact() == oracle_initials(&text), || format!("{}: {:?} vs {:?}", t.id(), a.render_compact(), oracle_initials(&text)))?;
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{} turns from {} dialogues", tasks.len(), dialogues.len()))
}

// 3

struct Toy {
    model: NgramModel,
    request: AeRequest,
    fan_out: u128,
}

fn toy_instance(rng: &mut StdRng) -> Toy {
    let letters: Vec<char> = "abcdefghij".chars().collect();
    let vocab_size = rng.gen_range(12..=300);
    let mut vocab: Vec<String> = Vec::new();
    while vocab.len() < vocab_size {
        let len = rng.gen_range(1..=6);
        let w: String = (0..len).map(|_| *letters.choose(rng).unwrap()).collect();
        if !vocab.contains(&w) {
            vocab.push(w);
        }
    }
    let sentences: Vec<Vec<String>> = (0..rng.gen_range(5..60))
        .map(|_| (0..rng.gen_range(1..8)).map(|_| vocab.choose(rng).unwrap().clone()).collect())
        .collect();
    let order = rng.gen_range(1..=3);
    let model = NgramModel::train_sequences(&sentences, order, 0.4).unwrap();
    let known: Vec<&str> = model.vocab().filter(|w| !w.starts_with('<')).collect();
    let fan = |c: char| known.iter().filter(|w| w.starts_with(c)).count() as u128;
    let slots = rng.gen_range(1..=5);
    let mut tokens = Vec::new();
    let mut fan_out: u128 = 1;
    for i in 0..slots {
        if i > 0 && rng.gen_bool(0.15) {
            tokens.push(AbbrevToken::MidPunct(','));
        }
        if rng.gen_bool(0.2) {
            tokens.push(AbbrevToken::CompleteKeyword(known.choose(rng).unwrap().to_string()));
            continue;
        }
        let c = *letters.choose(rng).unwrap();
        if fan_out * fan(c).max(1) > 20_000 {
            break;
        }
        fan_out *= fan(c).max(1);
        tokens.push(AbbrevToken::Initial(c));
    }
    if tokens.iter().all(|t| matches!(t, AbbrevToken::MidPunct(_))) || tokens.is_empty() {
        tokens = vec![AbbrevToken::Initial(known[0].chars().next().unwrap())];
        fan_out = fan(known[0].chars().next().unwrap());
    }
    let context: Vec<String> = (0..rng.gen_range(0..3)).map(|_| vocab.choose(rng).unwrap().clone()).collect();
    let k = rng.gen_range(1..=20);
    Toy { model, request: AeRequest::new(context, Abbreviation::new(tokens).unwrap(), k), fan_out }
}

fn normalized(c: &[PhraseCandidate]) -> Vec<String> {
    c.iter().map(|c| normalize_for_match(&c.text)).collect()
}

fn c3_oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(3);
    let mut paths: u128 = 0;
    for n in 0..ORACLE_INSTANCES {
        let toy = toy_instance(&mut rng);
        let beam = (toy.fan_out as usize).max(toy.request.k);
        let a = beam_expand(&toy.model, &toy.request, beam).map_err(|e| format!("instance {n}: {e}"))?;
        let b = exhaustive_expand(&toy.model, &toy.request, u128::MAX).map_err(|e| format!("instance {n}: {e}"))?;
        ensure(normalized(&a) == normalized(&b), || {
            format!("instance {n} ({}): beam {:?} vs exhaustive {:?}", toy.request.abbrev.render_compact(), normalized(&a), normalized(&b))
        })?;
        paths += toy.fan_out;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{ORACLE_INSTANCES} instances, {paths} lattice paths"))
}

// 4

const BEDROOM: &str = "i saw him play in the bedroom";
const BACKYARD: &str = "i saw him play in the backyard";

fn c4_scripted_fixtures() -> Result<String, String> {
    let start = Instant::now();
    let ok = "Ok, sounds good.";
    let s2 = SimConfig { strategy: Strategy::S2, ..SimConfig::default() };
    let v2 = SimConfig { ae_version: AeVersion::V2, ..SimConfig::default() };
    struct Case {
        name: &'static str,
        text: &'static str,
        cfg: SimConfig,
        fixture: ScriptedFixture,
        n_a: usize,
        solved_by: SolvedBy,
    }
    let cases = [
        // o , s g
        Case { name: "initials-only", text: ok, cfg: SimConfig::default(), fixture: ScriptedFixture::default().with_ae("o,sg", &[ok]), n_a: 4, solved_by: SolvedBy::InitialsOnly },
        // 7 initials + candidate + chip + word option
        Case {
            name: "fillmask",
            text: BEDROOM,
            cfg: s2,
            fixture: ScriptedFixture::default().with_ae("ishpitb", &[BACKYARD]).with_fm("i saw him play in the b_", &["basement", "bedroom"]),
            n_a: 10,
            solved_by: SolvedBy::FillMask,
        },
        // 7 initials + spell mode + chip + 'e'
        Case {
            name: "v2 single letter",
            text: BEDROOM,
            cfg: v2,
            fixture: ScriptedFixture::default().with_ae("ishpitb", &[BACKYARD]).with_ae("ishpit be", &[BEDROOM]),
            n_a: 10,
            solved_by: SolvedBy::KeywordAe,
        },
        // 7 initials + candidate + chip + "bedroom" typed
        Case {
            name: "fillmask failure",
            text: BEDROOM,
            cfg: s2,
            fixture: ScriptedFixture::default().with_ae("ishpitb", &[BACKYARD]).with_fm("i saw him play in the b_", &["basement", "bathroom"]),
            n_a: 16,
            solved_by: SolvedBy::FillMask,
        },
        // 4 initials + spell mode + 3 chips + "k" + "ounds" + "ood"
        Case { name: "full spell", text: ok, cfg: SimConfig::default(), fixture: ScriptedFixture::default(), n_a: 17, solved_by: SolvedBy::FullSpell },
    ];
    let mut parts = Vec::new();
    for c in cases {
        let p = ScriptedPredictor::new(c.fixture);
        let r = simulate_turn(&task(c.text), &c.cfg, &p, &p).map_err(|e| format!("{}: {e}", c.name))?;
        let n_c = oracle_chars(c.text);
        let want_ksr = 1.0 - c.n_a as f64 / n_c as f64;
        ensure(
            r.n_a == c.n_a && r.n_c == n_c && (r.ksr - want_ksr).abs() <= KSR_TOL && r.solved_by == c.solved_by,
            || format!("{}: got N_a={} N_c={} ksr={:.4} {:?}, want {} {} {:.4} {:?}", c.name, r.n_a, r.n_c, r.ksr, r.solved_by, c.n_a, n_c, want_ksr, c.solved_by),
        )?;
        parts.push(format!("{} {}/{:.3}", c.name, r.n_a, r.ksr));
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(parts.join(", "))
}

// 5

fn c5_invariants() -> Result<String, String> {
    let tasks = make_tasks(test_split(), None, MAX_LEN);
    let p = NgramPredictor::new(train_lm());
    let mut traces = 0;
    for strategy in [Strategy::S1, Strategy::S2, Strategy::S2A] {
        for version in [AeVersion::V1, AeVersion::V2] {
            let cfg = SimConfig { strategy, ae_version: version, ..SimConfig::default() };
            let report = simulate::simulate_corpus(&tasks, &cfg, &p, &p, 4).map_err(|e| e.to_string())?;
            ensure(report.failures.is_empty(), || format!("{} failed turns", report.failures.len()))?;
            let n_a: HashMap<&str, usize> = report.rows.iter().map(|r| (r.task_id.as_str(), r.n_a)).collect();
            for (id, trace) in &report.traces {
                check_containment(trace, strategy).map_err(|e| format!("{strategy} v{version} {id}: {e}"))?;
                check_speak_exclusion(trace, n_a[id.as_str()]).map_err(|e| format!("{strategy} v{version} {id}: {e}"))?;
                traces += 1;
            }
        }
    }
    Ok(format!("{traces} traces, 0 violations"))
}

// 6

/// Fixed ten-item candidate lists derived from the task; the first `k` are
/// returned, so lists for increasing `k` are nested.
/// Distractors are near misses of the target when `near_miss` is set, and
/// otherwise carry an extra word so they never align with the abbreviation.
struct NestedScript {
    target: Vec<String>,
    seed: u64,
    near_miss: bool,
}

fn join(words: &[String]) -> String {
    words.join(" ").replace(" ,", ",").replace(" ;", ";").replace(" :", ":")
}

fn hash(seed: u64, s: &str) -> u64 {
    s.bytes().fold(seed ^ 0x9e37_79b9_7f4a_7c15, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl Predictor for NestedScript {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        let key = request.abbrev.render_compact();
        let mut rng = StdRng::seed_from_u64(hash(self.seed, &key));
        let editable: Vec<usize> =
            request.abbrev.tokens.iter().enumerate().filter(|(_, t)| matches!(t, AbbrevToken::Initial(_))).map(|(i, _)| i).collect();
        let mut list: Vec<String> = Vec::new();
        for n in 0..10 {
            let mut words = self.target.clone();
            if !self.near_miss || editable.is_empty() {
                words.push(format!("zq{n}"));
                list.push(join(&words));
                continue;
            }
            for _ in 0..rng.gen_range(1..=2) {
                let i = *editable.choose(&mut rng).unwrap();
                let initial = words[i].chars().next().unwrap();
                words[i] = format!("{initial}zq{n}");
            }
            list.push(join(&words));
        }
        // Spelling more letters moves the target up; it is absent at rank >= 10.
        let spelled: usize = request.abbrev.tokens.iter().map(|t| if t.is_keyword() { t.surface().len() } else { 0 }).sum();
        let rank = rng.gen_range(0..16usize).saturating_sub(3 * spelled);
        if rank < 10 {
            list.insert(rank.min(list.len()), join(&self.target));
        }
        list.truncate(10);
        Ok(list.into_iter().take(request.k).enumerate().map(|(i, text)| PhraseCandidate { text, score: -(i as f64) }).collect())
    }

    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        let want = self.target[request.masked_index].to_lowercase();
        let mut rng = StdRng::seed_from_u64(hash(self.seed, &format!("{}#{}", request.phrase_words.join(" "), request.masked_index)));
        let mut list: Vec<String> = (0..10).map(|n| format!("{}qz{n}", request.initial)).collect();
        let rank = rng.gen_range(0..14usize);
        if rank < 10 {
            list[rank] = want;
        }
        Ok(list.into_iter().take(request.k).enumerate().map(|(i, word)| WordCandidate { word, score: -(i as f64) }).collect())
    }
}

/// Returns every corpus target sharing the request's context and initials.
struct Oracle(HashMap<(Vec<String>, String), Vec<String>>);

impl Predictor for Oracle {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        let key = (request.context.clone(), request.abbrev.render_compact());
        let targets = self.0.get(&key).map_or(&[][..], Vec::as_slice);
        Ok(targets.iter().map(|t| PhraseCandidate { text: t.clone(), score: 0.0 }).collect())
    }

    fn fill_mask(&self, _: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        Ok(Vec::new())
    }
}

fn oracle_for(tasks: &[TurnTask]) -> Result<Oracle, String> {
    let mut map: HashMap<_, Vec<String>> = HashMap::new();
    for t in tasks {
        let key = (t.context.clone(), initials_abbrev(&t.target).map_err(|e| e.to_string())?.render_compact());
        let list = map.entry(key).or_default();
        if !list.contains(&t.target_text()) {
            list.push(t.target_text());
        }
        ensure(list.len() <= 5, || format!("{}: more than 5 targets share one oracle key", t.id()))?;
    }
    Ok(Oracle(map))
}

/// Lists `(task, config, k)` where KSR drops from `k - 1` to `k`.
fn monotonicity_violations(tasks: &[TurnTask], near_miss: bool) -> Result<(usize, Vec<String>), String> {
    let mut series = 0;
    let mut bad = Vec::new();
    for (n, t) in tasks.iter().enumerate() {
        let words: Vec<String> = t.target.iter().map(|w| w.surface.clone()).collect();
        let p = NestedScript { target: words, seed: n as u64, near_miss };
        for strategy in [Strategy::S1, Strategy::S2, Strategy::S2A] {
            for version in [AeVersion::V1, AeVersion::V2] {
                let mut prev = f64::NEG_INFINITY;
                for k in 1..=10 {
                    let cfg = SimConfig { strategy, ae_version: version, k, ..SimConfig::default() };
                    let r = simulate_turn(t, &cfg, &p, &p).map_err(|e| format!("{}: {e}", t.id()))?;
                    if r.ksr < prev {
                        bad.push(format!("{} S{strategy} v{version} k={k}: {:.4} < {prev:.4}", t.id(), r.ksr));
                    }
                    prev = r.ksr;
                }
                series += 1;
            }
        }
    }
    Ok((series, bad))
}

fn c6_monotonicity() -> Result<String, String> {
    let tasks = make_tasks(test_split(), None, MAX_LEN);
    let oracle = oracle_for(&tasks)?;
    let report = simulate::simulate_corpus(&tasks, &SimConfig::default(), &oracle, &oracle, 4).map_err(|e| e.to_string())?;
    let got = report.aggregates[0].mean_ksr;
    let closed: f64 = tasks
        .iter()
        .map(|t| {
            let text = t.target_text();
            1.0 - oracle_initials(&text).chars().count() as f64 / oracle_chars(&text) as f64
        })
        .sum::<f64>()
        / tasks.len() as f64;
    ensure((got - closed).abs() <= MEAN_TOL, || format!("oracle mean {got} vs closed form {closed}"))?;

    let (series, unaligned) = monotonicity_violations(&tasks, false)?;
    ensure(unaligned.is_empty(), || format!("unaligned distractors: {} violations, first {}", unaligned.len(), unaligned[0]))?;
    let (_, near) = monotonicity_violations(&tasks, true)?;
    ensure(near.is_empty(), || {
        format!(
            "oracle mean ok ({got:.6}); unaligned distractors monotone over {series} series; near-miss distractors: {} of {series} series violate, first {}",
            near.len(),
            near[0]
        )
    })?;
    Ok(format!("{series} series over k=1..10 for each distractor kind; oracle mean {got:.6} = closed form"))
}

// 7

fn c7_baseline() -> Result<String, String> {
    let tasks = make_tasks(test_split(), None, usize::MAX);
    let model = train_lm();
    let zero = simulate::simulate_baseline_corpus(&tasks, model.as_ref(), 0, 4).map_err(|e| e.to_string())?;
    let zero_ksr = zero.aggregates[0].mean_ksr;
    ensure(zero_ksr == 0.0, || format!("k=0 ksr {zero_ksr}"))?;
    let start = Instant::now();
    let r = simulate::simulate_baseline_corpus(&tasks, model.as_ref(), 5, 4).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(r.failures.is_empty(), || format!("{} failed turns", r.failures.len()))?;
    let k5 = r.aggregates[0].mean_ksr;
    ensure(k5 > 0.0, || format!("k=5 ksr {k5}"))?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("{} dialogues / {} turns, k=0 ksr 0, k=5 ksr {k5:.4}, {elapsed:.1?}", test_split().len(), tasks.len()))
}

// 8

fn c8_datagen() -> Result<String, String> {
    // Sentences with at least six words never clamp the keyword count.
    let long: Vec<Dialogue> = train_split()
        .iter()
        .filter(|d| d.turns.iter().any(|t| tokenize_phrase(&t.text).is_ok_and(|w| w.iter().filter(|w| w.is_word()).count() >= 6)))
        .cloned()
        .collect();
    let words = |s: &str| tokenize_phrase(s).map_or(0, |w| w.iter().filter(|w| w.is_word()).count());
    let mut cfg = DatagenConfig { seed: 11, ..DatagenConfig::default() };
    let examples = loop {
        let all = datagen::synth_ae(&long, AeScheme::IncompleteKw, &cfg).map_err(|e| e.to_string())?;
        let kept: Vec<_> = all.into_iter().filter(|t| words(&t.full) >= 6).collect();
        if kept.len() >= DATAGEN_EXAMPLES {
            break kept;
        }
        ensure(cfg.draws_per_sentence < 64, || format!("only {} long-sentence examples", kept.len()))?;
        cfg.draws_per_sentence *= 2;
    };
    let examples = &examples[..DATAGEN_EXAMPLES];
    let n = examples.len() as f64;
    let mut kw: BTreeMap<usize, usize> = BTreeMap::new();
    let mut nl: BTreeMap<usize, usize> = BTreeMap::new();
    let mut prefix = 0usize;
    for e in examples {
        *kw.entry(e.meta.keywords).or_default() += 1;
        for &l in &e.meta.nl {
            *nl.entry(l).or_default() += 1;
        }
        ensure(e.meta.nl.len() == e.meta.keywords, || "NL count differs from keyword count".into())?;
        if e.meta.shorthand_scheme == Some(ShorthandScheme::Prefix) {
            prefix += 1;
        }
    }
    let bins = |counts: &BTreeMap<usize, usize>, lo: usize, hi: usize, what: &str| -> Result<(), String> {
        let total: usize = counts.values().sum();
        let expect = total as f64 / (hi - lo + 1) as f64;
        for v in lo..=hi {
            let c = *counts.get(&v).unwrap_or(&0) as f64;
            ensure((c - expect).abs() <= BIN_TOL * expect, || format!("{what} bin {v}: {c} vs expected {expect:.0}"))?;
        }
        ensure(counts.keys().all(|v| (lo..=hi).contains(v)), || format!("{what} outside [{lo}, {hi}]"))
    };
    bins(&kw, 1, 5, "keyword count")?;
    bins(&nl, 2, 5, "NL")?;
    let ratio = prefix as f64 / n;
    ensure((ratio - 0.5).abs() <= PREFIX_RATIO_TOL, || format!("prefix ratio {ratio}"))?;

    let fm = datagen::synth_fillmask(train_split(), &cfg).map_err(|e| e.to_string())?;
    let bad = fm.iter().filter(|t| !t.word.chars().next().is_some_and(char::is_alphabetic)).count();
    ensure(bad == 0, || format!("{bad} masked words start with a digit or punctuation"))?;

    let render = |seed: u64| -> Result<(Vec<u8>, Vec<u8>), String> {
        let c = DatagenConfig { seed, ..cfg.clone() };
        let mut ae = Vec::new();
        let mut fm = Vec::new();
        abbrex_core::corpus::write_jsonl(&mut ae, &datagen::synth_ae(train_split(), AeScheme::IncompleteKw, &c).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        abbrex_core::corpus::write_jsonl(&mut fm, &datagen::synth_fillmask(train_split(), &c).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        Ok((ae, fm))
    };
    let (a1, f1) = render(5)?;
    let (a2, f2) = render(5)?;
    ensure(a1 == a2 && f1 == f2, || "same seed produced different JSONL".into())?;
    let (a3, _) = render(6)?;
    ensure(a1 != a3, || "different seeds produced identical JSONL".into())?;
    Ok(format!("{DATAGEN_EXAMPLES} examples, keywords {kw:?}, NL {nl:?}, prefix ratio {ratio:.3}, {} masked words", fm.len()))
}

// 9

struct Restyled(HashMap<String, String>, bool);

impl Predictor for Restyled {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        let target = &self.0[&request.abbrev.render_compact()];
        let text = if self.1 {
            // Capitalized with final punctuation: must still count as a hit.
            let mut c = target.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect::<String>() + "!").unwrap_or_default()
        } else {
            format!("{target} zzz")
        };
        Ok(vec![PhraseCandidate { text, score: 0.0 }])
    }

    fn fill_mask(&self, _: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        Ok(Vec::new())
    }
}

fn c9_eval() -> Result<String, String> {
    for (a, b) in [("Hello there!", "hello there"), ("OK, sounds good.", "ok, sounds good"), ("  Wait  a sec?", "wait a sec")] {
        ensure(normalize_for_match(a) == normalize_for_match(b), || format!("{a:?} and {b:?} normalize differently"))?;
    }
    ensure(normalize_for_match("hello there") != normalize_for_match("hello, there"), || "mid punctuation must be kept".into())?;
    let tasks = make_tasks(test_split(), None, MAX_LEN);
    let items: Vec<EvalTask> = datagen::initials_eval_tasks(&tasks, true);
    let oracle = oracle_for(&tasks)?;
    let acc = datagen::eval_topk(&oracle, &items, 5).map_err(|e| e.to_string())?;
    ensure(acc == 1.0, || format!("oracle accuracy {acc}"))?;
    // Context-free items keyed by abbreviation only; drop ambiguous keys.
    let mut by_abbrev: HashMap<String, String> = HashMap::new();
    let mut clash = std::collections::HashSet::new();
    for t in &items {
        let key = t.abbrev.render_compact();
        if by_abbrev.insert(key.clone(), t.target.clone()).is_some_and(|p| p != t.target) {
            clash.insert(key);
        }
    }
    let unique: Vec<EvalTask> = items.iter().filter(|t| !clash.contains(&t.abbrev.render_compact())).cloned().collect();
    let restyled = datagen::eval_topk(&Restyled(by_abbrev.clone(), true), &unique, 5).map_err(|e| e.to_string())?;
    ensure(restyled == 1.0, || format!("restyled oracle accuracy {restyled}"))?;
    let never = datagen::eval_topk(&Restyled(by_abbrev, false), &items, 5).map_err(|e| e.to_string())?;
    ensure(never == 0.0, || format!("never-correct accuracy {never}"))?;
    Ok(format!("{} items: oracle 1.0, restyled oracle 1.0, never-correct 0.0", items.len()))
}

// 10

#[derive(Default)]
struct Instrumented {
    max_context: AtomicUsize,
    calls: AtomicUsize,
}

impl Instrumented {
    fn record(&self, context: &[String]) {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.max_context.fetch_max(context.len(), Ordering::SeqCst);
    }
}

impl Predictor for Instrumented {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        self.record(&request.context);
        Ok(Vec::new())
    }

    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        self.record(&request.context);
        Ok(Vec::new())
    }
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<serde_json::Value>) -> (u16, serde_json::Value) {
    use http_body_util::BodyExt;
    use tower::ServiceExt;
    let req = axum::http::Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(axum::body::Body::empty, |b| axum::body::Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null))
}

async fn random_sessions(backend: Arc<Instrumented>) -> Result<usize, String> {
    use serde_json::json;
    let app = router(AppState::new(backend.clone(), SessionStore::in_memory(), ServiceConfig::default()));
    let mut rng = StdRng::seed_from_u64(10);
    let mut requests = 0;
    for s in 0..100 {
        let (status, body) = call(&app, "POST", "/v1/session", None).await;
        ensure(status == 201, || format!("create session: {status}"))?;
        let id = body["session_id"].as_str().unwrap().to_string();
        for t in 0..rng.gen_range(0..15) {
            let (status, _) = call(&app, "POST", &format!("/v1/session/{id}/turn"), Some(json!({"text": format!("turn {t} of {s}")}))).await;
            ensure(status == 200, || format!("commit turn: {status}"))?;
            for _ in 0..rng.gen_range(0..3) {
                let (status, _) = if rng.gen_bool(0.5) {
                    let abbrev = json!([{"kind": "initial", "surface": "h"}, {"kind": "initial", "surface": "a"}]);
                    call(&app, "POST", "/v1/ae", Some(json!({"session_id": id, "abbreviation": abbrev}))).await
                } else {
                    call(&app, "POST", "/v1/fillmask", Some(json!({"session_id": id, "phrase_words": ["how", "are"], "masked_index": 1}))).await
                };
                ensure(status == 200, || format!("predict call: {status}"))?;
                requests += 1;
            }
        }
    }
    Ok(requests)
}

fn c10_service() -> Result<String, String> {
    let backend = Arc::new(Instrumented::default());
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let requests = rt.block_on(random_sessions(backend.clone()))?;
    let max = backend.max_context.load(Ordering::SeqCst);
    ensure(backend.calls.load(Ordering::SeqCst) == requests, || "not every request reached the backend".into())?;
    ensure(max <= MAX_CONTEXT_TURNS, || format!("outbound context of {max} turns"))?;

    let tasks = make_tasks(test_split(), None, MAX_LEN);
    let p = NgramPredictor::new(train_lm());
    let mut compared = 0;
    for strategy in [Strategy::S1, Strategy::S2A] {
        let cfg = SimConfig { strategy, ae_version: AeVersion::V2, charge_selection: true, ..SimConfig::default() };
        let report = simulate::simulate_corpus(&tasks, &cfg, &p, &p, 4).map_err(|e| e.to_string())?;
        let rows: HashMap<&str, _> = report.rows.iter().map(|r| (r.task_id.as_str(), r)).collect();
        let texts: HashMap<String, String> = tasks.iter().map(|t| (t.id(), t.target_text())).collect();
        for (id, trace) in &report.traces {
            let row = rows[id.as_str()];
            let events = events_from_trace(trace, 1_000, 350, &texts[id]);
            let s = summarize_session(&events).map_err(|e| e.to_string())?;
            ensure(s.n_a == row.n_a && s.n_c == row.n_c, || format!("{id}: summary {}/{} vs simulator {}/{}", s.n_a, s.n_c, row.n_a, row.n_c))?;
            compared += 1;
        }
    }
    Ok(format!("max outbound context {max} over {requests} requests in 100 sessions; {compared} traces summarized exactly"))
}

fn main() {
    let checks: [(u8, &str, Check); 10] = [
        (1, "KSR formula", c1_ksr_formula),
        (2, "abbreviation round-trip", c2_round_trip),
        (3, "beam/exhaustive oracle equivalence", c3_oracle_equivalence),
        (4, "scripted-trace replication", c4_scripted_fixtures),
        (5, "containment and speak exclusion", c5_invariants),
        (6, "monotonicity and oracle mean", c6_monotonicity),
        (7, "forward baseline", c7_baseline),
        (8, "datagen distributions", c8_datagen),
        (9, "evaluation harness", c9_eval),
        (10, "service contract", c10_service),
    ];
    let only: Option<u8> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, check) in checks {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {why} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
