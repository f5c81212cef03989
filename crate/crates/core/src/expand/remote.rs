//! Sampling client for a fine-tuned LLM served over HTTP.
//!
//! Wire protocol (one POST per prediction, UTF-8 JSON both ways):
//!
//! ```text
//! POST <endpoint>
//! {"prompt": "<text>", "num_samples": 128, "temperature": 1.0, "max_decode_tokens": 20}
//!
//! 200 OK
//! {"samples": ["<text>", ...]}
//! ```
//!
//! AE prompts render as `context: {t1}{t2} shorthand: {i s h p i t b} full:`
//! and FillMask prompts as `context: {t1} phrase: {oh, i'm s_} word:`; the
//! labels are configurable. Samples may optionally be wrapped in braces.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::abbrev::{matches_abbreviation, normalize_for_match, Abbreviation};
use crate::corpus::{join_surfaces, tokenize_phrase, PhraseToken, FINAL_PUNCT};
use crate::expand::{AeRequest, FmRequest, PhraseCandidate, PredictError, Predictor, WordCandidate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptLabels {
    pub context: String,
    pub shorthand: String,
    pub full: String,
    pub phrase: String,
    pub word: String,
}

impl Default for PromptLabels {
    fn default() -> Self {
        PromptLabels {
            context: "context:".into(),
            shorthand: "shorthand:".into(),
            full: "full:".into(),
            phrase: "phrase:".into(),
            word: "word:".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub ae_temperature: f64,
    pub fm_temperature: f64,
    pub samples_small: usize,
    pub samples_large: usize,
    /// Abbreviations with at most this many initials + keywords use `samples_small`.
    pub small_threshold: usize,
    pub max_context_turns: usize,
    pub ae_max_decode_tokens: usize,
    pub fm_max_decode_tokens: usize,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    pub labels: PromptLabels,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8500/generate".into(),
            ae_temperature: 1.0,
            fm_temperature: 2.0,
            samples_small: 128,
            samples_large: 256,
            small_threshold: 5,
            max_context_turns: 5,
            ae_max_decode_tokens: 20,
            fm_max_decode_tokens: 6,
            timeout_ms: 10_000,
            max_in_flight: 4,
            labels: PromptLabels::default(),
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<(), PredictError> {
        let positive = [
            ("samples_small", self.samples_small),
            ("samples_large", self.samples_large),
            ("small_threshold", self.small_threshold),
            ("max_context_turns", self.max_context_turns),
            ("ae_max_decode_tokens", self.ae_max_decode_tokens),
            ("fm_max_decode_tokens", self.fm_max_decode_tokens),
            ("max_in_flight", self.max_in_flight),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(PredictError::Invalid(format!("{name} must be positive")));
            }
        }
        if !(self.ae_temperature > 0.0 && self.fm_temperature > 0.0 && self.timeout_ms > 0) {
            return Err(PredictError::Invalid("temperatures and timeout must be positive".into()));
        }
        Ok(())
    }

    /// Applies `<PREFIX>REMOTE_ENDPOINT`, `<PREFIX>REMOTE_TIMEOUT_MS`,
    /// `<PREFIX>AE_TEMPERATURE`, `<PREFIX>FM_TEMPERATURE` and
    /// `<PREFIX>MAX_IN_FLIGHT` from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, prefix: &str, vars: I) -> Result<(), PredictError> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, PredictError> {
            v.parse().map_err(|_| PredictError::Invalid(format!("bad value for {key}: {v:?}")))
        }
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(prefix) else { continue };
            match name {
                "REMOTE_ENDPOINT" => self.endpoint = value,
                "REMOTE_TIMEOUT_MS" => self.timeout_ms = parse(&key, &value)?,
                "AE_TEMPERATURE" => self.ae_temperature = parse(&key, &value)?,
                "FM_TEMPERATURE" => self.fm_temperature = parse(&key, &value)?,
                "MAX_IN_FLIGHT" => self.max_in_flight = parse(&key, &value)?,
                _ => {}
            }
        }
        Ok(())
    }

    /// Samples requested for an abbreviation.
    pub fn num_samples(&self, abbrev: &Abbreviation) -> usize {
        if abbrev.word_slots() <= self.small_threshold {
            self.samples_small
        } else {
            self.samples_large
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub num_samples: usize,
    pub temperature: f64,
    pub max_decode_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub samples: Vec<String>,
}

/// Anything that turns a prompt into samples.
pub trait SampleSource: Send + Sync {
    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, PredictError>;
}

pub struct HttpSampleSource {
    endpoint: String,
    timeout: Duration,
    // Built on first use so that construction never happens on an async thread.
    client: OnceLock<reqwest::blocking::Client>,
}

impl HttpSampleSource {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        HttpSampleSource {
            endpoint: endpoint.into(),
            timeout,
            client: OnceLock::new(),
        }
    }
}

impl SampleSource for HttpSampleSource {
    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, PredictError> {
        let client = match self.client.get() {
            Some(c) => c,
            None => {
                let c = reqwest::blocking::Client::builder()
                    .timeout(self.timeout)
                    .build()
                    .map_err(|e| PredictError::Backend(e.to_string()))?;
                self.client.get_or_init(|| c)
            }
        };
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                PredictError::Timeout
            } else {
                PredictError::Backend(e.to_string())
            }
        };
        let resp = client.post(&self.endpoint).json(request).send().map_err(classify)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(PredictError::Backend(format!("HTTP {status}")));
        }
        let body = resp.bytes().map_err(classify)?;
        serde_json::from_slice(&body).map_err(|e| PredictError::Malformed(e.to_string()))
    }
}

struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

pub struct RemotePredictor<S = HttpSampleSource> {
    config: RemoteConfig,
    source: S,
    in_flight: InFlight,
}

impl RemotePredictor<HttpSampleSource> {
    pub fn http(config: RemoteConfig) -> Result<Self, PredictError> {
        let source = HttpSampleSource::new(config.endpoint.clone(), Duration::from_millis(config.timeout_ms));
        Self::with_source(config, source)
    }
}

impl<S: SampleSource> RemotePredictor<S> {
    pub fn with_source(config: RemoteConfig, source: S) -> Result<Self, PredictError> {
        config.validate()?;
        let in_flight = InFlight {
            limit: config.max_in_flight,
            active: Mutex::new(0),
            freed: Condvar::new(),
        };
        Ok(RemotePredictor { config, source, in_flight })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn call(&self, request: GenerateRequest) -> Result<GenerateResponse, PredictError> {
        let _slot = self.in_flight.acquire();
        self.source.generate(&request)
    }
}

fn context_window(context: &[String], max_turns: usize) -> &[String] {
    &context[context.len().saturating_sub(max_turns)..]
}

fn braced_turns(context: &[String]) -> String {
    context.iter().map(|t| format!("{{{}}}", t.trim())).collect()
}

fn labelled(label: &str, body: &str) -> String {
    if body.is_empty() {
        label.to_string()
    } else {
        format!("{label} {body}")
    }
}

pub fn render_ae_prompt(labels: &PromptLabels, context: &[String], abbrev: &Abbreviation) -> String {
    [
        labelled(&labels.context, &braced_turns(context)),
        labelled(&labels.shorthand, &format!("{{{}}}", abbrev.render_spaced())),
        labels.full.clone(),
    ]
    .join(" ")
}

pub fn render_fm_prompt(labels: &PromptLabels, context: &[String], phrase_words: &[String], masked_index: usize, initial: char) -> String {
    let mask = format!("{initial}_");
    let phrase = join_surfaces(phrase_words.iter().enumerate().map(|(i, w)| {
        let t = PhraseToken::from_surface(w);
        (if i == masked_index { mask.as_str() } else { w.as_str() }, t.is_word() || i == masked_index)
    }));
    [
        labelled(&labels.context, &braced_turns(context)),
        labelled(&labels.phrase, &format!("{{{phrase}}}")),
        labels.word.clone(),
    ]
    .join(" ")
}

fn strip_braces(sample: &str) -> &str {
    let s = sample.trim();
    s.strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .unwrap_or(s)
        .trim()
}

fn rank_by_frequency(items: Vec<String>, total: usize, k: usize) -> Vec<(String, f64)> {
    // first-occurrence order, then frequency (stable sort keeps ties in order)
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for key in items {
        match index.get(&key) {
            Some(&i) => order[i].1 += 1,
            None => {
                index.insert(key.clone(), order.len());
                order.push((key, 1));
            }
        }
    }
    order.sort_by_key(|o| std::cmp::Reverse(o.1));
    order.truncate(k);
    let total = total.max(1) as f64;
    order.into_iter().map(|(s, n)| (s, n as f64 / total)).collect()
}

/// Normalizes samples, drops those that do not fit the abbreviation, and
/// ranks the distinct survivors by how often they were sampled (ties by
/// first occurrence). Scores are sample fractions.
pub fn rank_phrase_samples(samples: &[String], abbrev: &Abbreviation, k: usize) -> Vec<PhraseCandidate> {
    let kept = samples
        .iter()
        .map(|s| normalize_for_match(strip_braces(s)))
        .filter(|s| tokenize_phrase(s).is_ok_and(|t| matches_abbreviation(&t, abbrev)))
        .collect();
    rank_by_frequency(kept, samples.len(), k)
        .into_iter()
        .map(|(text, score)| PhraseCandidate { text, score })
        .collect()
}

/// Word-level counterpart of [`rank_phrase_samples`]: keeps single words
/// starting with `initial`, other than `exclude`.
pub fn rank_word_samples(samples: &[String], initial: char, exclude: Option<&str>, k: usize) -> Vec<WordCandidate> {
    let kept = samples
        .iter()
        .map(|s| {
            strip_braces(s)
                .to_lowercase()
                .trim_end_matches(|c: char| FINAL_PUNCT.contains(&c))
                .trim()
                .to_string()
        })
        .filter(|w| {
            tokenize_phrase(w).is_ok_and(|t| t.len() == 1 && t[0].is_word() && &t[0].surface == w)
                && w.starts_with(initial)
                && Some(w.as_str()) != exclude
        })
        .collect();
    rank_by_frequency(kept, samples.len(), k)
        .into_iter()
        .map(|(word, score)| WordCandidate { word, score })
        .collect()
}

impl<S: SampleSource> RemotePredictor<S> {
    pub fn ae_generate_request(&self, request: &AeRequest) -> GenerateRequest {
        let ctx = context_window(&request.context, self.config.max_context_turns);
        GenerateRequest {
            prompt: render_ae_prompt(&self.config.labels, ctx, &request.abbrev),
            num_samples: self.config.num_samples(&request.abbrev),
            temperature: self.config.ae_temperature,
            max_decode_tokens: self.config.ae_max_decode_tokens,
        }
    }

    pub fn fm_generate_request(&self, request: &FmRequest) -> GenerateRequest {
        let ctx = context_window(&request.context, self.config.max_context_turns);
        GenerateRequest {
            prompt: render_fm_prompt(&self.config.labels, ctx, &request.phrase_words, request.masked_index, request.initial),
            num_samples: self.config.samples_small,
            temperature: self.config.fm_temperature,
            max_decode_tokens: self.config.fm_max_decode_tokens,
        }
    }
}

impl<S: SampleSource> Predictor for RemotePredictor<S> {
    fn keyword_ae(&self, request: &AeRequest) -> Result<Vec<PhraseCandidate>, PredictError> {
        request.validate()?;
        let resp = self.call(self.ae_generate_request(request))?;
        Ok(rank_phrase_samples(&resp.samples, &request.abbrev, request.k))
    }

    fn fill_mask(&self, request: &FmRequest) -> Result<Vec<WordCandidate>, PredictError> {
        request.validate()?;
        let resp = self.call(self.fm_generate_request(request))?;
        let current = request.current_word();
        Ok(rank_word_samples(&resp.samples, request.initial, current.as_deref(), request.k))
    }
}
