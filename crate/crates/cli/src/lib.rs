//! `abbrex` command-line driver.
//!
//! Settings come from built-in defaults, then a TOML file (`--config`), then
//! `ABBREX_*` environment variables, then flags; later sources win.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use abbrex_core::corpus::{load_dialogues, make_tasks, write_jsonl, Dialogue, TurnTask};
use abbrex_core::datagen::{self, AeScheme, DatagenConfig, FmTriplet, Manifest};
use abbrex_core::expand::{
    ExhaustivePredictor, NgramPredictor, PredictError, Predictor, RemoteConfig, RemotePredictor, ScriptedFixture, ScriptedPredictor,
};
use abbrex_core::lm::{dialogue_sequences, NgramModel, DEFAULT_BACKOFF, DEFAULT_ORDER};
use abbrex_core::simulate::{self, AeVersion, SimConfig, SimError, Strategy, SweepReport};
use abbrex_service::{AppState, ServiceConfig, SessionStore};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "ABBREX_";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Backend(m) => m,
        }
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::Backend(_) | PredictError::Timeout | PredictError::Malformed(_) => CliError::Backend(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Predict(p) => p.into(),
            SimError::ZeroK => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<datagen::DatagenError> for CliError {
    fn from(e: datagen::DatagenError) -> Self {
        match e {
            datagen::DatagenError::Predict(p) => p.into(),
            datagen::DatagenError::Config(m) => CliError::Usage(m),
            e => CliError::Data(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Ngram,
    Exhaustive,
    Remote,
    Scripted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub lm: Option<PathBuf>,
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub order: usize,
    pub backoff: f64,
    pub beam_width: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { order: DEFAULT_ORDER, backoff: DEFAULT_BACKOFF, beam_width: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeConfig {
    pub addr: String,
    pub sessions: Option<PathBuf>,
    #[serde(flatten)]
    pub service: ServiceConfig,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { addr: "127.0.0.1:8080".into(), sessions: None, service: ServiceConfig::default() }
    }
}

/// Union of file, environment and flag settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub predictor: PredictorKind,
    pub workers: usize,
    pub paths: PathsConfig,
    pub lm: LmConfig,
    pub sim: SimConfig,
    pub remote: RemoteConfig,
    pub serve: ServeConfig,
    pub datagen: DatagenConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            predictor: PredictorKind::Ngram,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            paths: PathsConfig::default(),
            lm: LmConfig::default(),
            sim: SimConfig::default(),
            remote: RemoteConfig::default(),
            serve: ServeConfig::default(),
            datagen: DatagenConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Applies `ABBREX_*` variables: TRAIN, TEST, LM, FIXTURE, PREDICTOR,
    /// WORKERS, ADDR, SEED and the remote backend settings.
    pub fn apply_env(&mut self, vars: &[(String, String)]) -> CliResult {
        let bad = |k: &str, v: &str| CliError::Usage(format!("bad value for {k}: {v:?}"));
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            match name {
                "TRAIN" => self.paths.train = Some(value.into()),
                "TEST" => self.paths.test = Some(value.into()),
                "LM" => self.paths.lm = Some(value.into()),
                "FIXTURE" => self.paths.fixture = Some(value.into()),
                "PREDICTOR" => self.predictor = PredictorKind::from_str(value, true).map_err(|_| bad(key, value))?,
                "WORKERS" => self.workers = value.parse().map_err(|_| bad(key, value))?,
                "ADDR" => self.serve.addr = value.clone(),
                "SEED" => self.datagen.seed = value.parse().map_err(|_| bad(key, value))?,
                _ => {}
            }
        }
        self.remote.apply_env(ENV_PREFIX, vars.iter().cloned()).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Parser, Debug)]
#[command(name = "abbrex", version, about = "Abbreviation expansion experiments: simulation, data generation, evaluation and serving")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a raw dialogue corpus into canonical JSONL.
    Ingest(IngestArgs),
    /// Train an n-gram model on a dialogue corpus.
    TrainLm(TrainArgs),
    /// Simulate the ideal user over a test corpus.
    Simulate(SimArgs),
    /// Simulate for a range of option counts.
    Sweep(SimArgs),
    /// Synthesize fine-tuning triplets.
    Datagen(DatagenArgs),
    /// Top-k exact-match evaluation.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Expected turns per dialogue record.
    #[arg(long, default_value_t = 6)]
    pub turns: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training corpus (raw or JSONL); defaults to the configured train path.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub backoff: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct PredictorArgs {
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorKind>,
    /// Saved n-gram model.
    #[arg(long)]
    pub lm: Option<PathBuf>,
    /// Corpus to train an n-gram model from when no --lm is given.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Scripted predictor fixture (JSON).
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Remote generation endpoint.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub beam_width: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TaskArgs {
    /// Test corpus (raw or JSONL); defaults to the configured test path.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Only turns of this speaker (0 or 1).
    #[arg(long)]
    pub speaker: Option<u8>,
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[command(flatten)]
    pub tasks: TaskArgs,
    #[command(flatten)]
    pub predictor: PredictorArgs,
    /// 1, 2 or 2a.
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// 1 or 2.
    #[arg(long)]
    pub ae_version: Option<AeVersion>,
    /// Option count: a number, or for `sweep` a range like `1..10` or a list `1,3,5`.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long, overrides_with = "no_context")]
    pub context: bool,
    #[arg(long, overrides_with = "context")]
    pub no_context: bool,
    /// Run the forward-prediction baseline instead of abbreviation expansion.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub manual_expand: bool,
    #[arg(long)]
    pub charge_selection: bool,
    /// Keyword boxes start empty instead of holding the initial.
    #[arg(long)]
    pub no_prefill: bool,
    /// Per-turn rows: CSV, or the full report when the path ends in .json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Action traces as JSONL.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DatagenArgs {
    #[arg(long)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub draws: Option<usize>,
    /// Also write TSV files.
    #[arg(long)]
    pub tsv: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub tasks: TaskArgs,
    #[command(flatten)]
    pub predictor: PredictorArgs,
    #[arg(long, default_value_t = 5)]
    pub topk: usize,
    #[arg(long, overrides_with = "no_context")]
    pub context: bool,
    #[arg(long, overrides_with = "context")]
    pub no_context: bool,
    /// Also print accuracy curves (JSON).
    #[arg(long)]
    pub curves: bool,
    /// FillMask triplets (JSONL) to evaluate, split by stop words.
    #[arg(long)]
    pub fillmask: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub predictor: PredictorArgs,
    #[arg(long)]
    pub addr: Option<String>,
    /// Session journal (JSONL).
    #[arg(long)]
    pub sessions: Option<PathBuf>,
}

/// Parses and runs; returns the exit code.
pub fn run<I, T>(args: I, env: &[(String, String)], out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli, env, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn execute(cli: Cli, env: &[(String, String)], out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut cfg = match &cli.config {
        Some(p) => CliConfig::from_file(p)?,
        None => CliConfig::default(),
    };
    cfg.apply_env(env)?;
    match cli.command {
        Command::Ingest(a) => ingest(&a, out, err),
        Command::TrainLm(a) => train_lm(&cfg, &a, out, err),
        Command::Simulate(a) => simulate_cmd(&cfg, &a, false, out, err),
        Command::Sweep(a) => simulate_cmd(&cfg, &a, true, out, err),
        Command::Datagen(a) => datagen_cmd(&cfg, &a, out, err),
        Command::Eval(a) => eval_cmd(&cfg, &a, out, err),
        Command::Serve(a) => serve_cmd(&cfg, &a, err),
    }
}

fn read_corpus(path: &Path, err: &mut dyn Write) -> CliResult<Vec<Dialogue>> {
    let parsed = load_dialogues(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for w in &parsed.warnings {
        let _ = writeln!(err, "warning: {}: {w}", path.display());
    }
    Ok(parsed.dialogues)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn ingest(a: &IngestArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let raw = std::fs::read_to_string(&a.input).map_err(io_err(&a.input))?;
    let parsed = abbrex_core::corpus::parse_dialogues_with(&raw, a.turns)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    for w in &parsed.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let mut w = create(&a.out)?;
    write_jsonl(&mut w, &parsed.dialogues).map_err(io_err(&a.out))?;
    w.flush().map_err(io_err(&a.out))?;
    let _ = writeln!(out, "{} dialogues, {} warnings", parsed.dialogues.len(), parsed.warnings.len());
    Ok(())
}

fn train_model(cfg: &CliConfig, path: &Path, err: &mut dyn Write) -> CliResult<NgramModel> {
    let dialogues = read_corpus(path, err)?;
    NgramModel::train_sequences(&dialogue_sequences(&dialogues), cfg.lm.order, cfg.lm.backoff)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn train_lm(cfg: &CliConfig, a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut cfg = cfg.clone();
    if let Some(o) = a.order {
        cfg.lm.order = o;
    }
    if let Some(b) = a.backoff {
        cfg.lm.backoff = b;
    }
    if cfg.lm.order < 1 || !(cfg.lm.backoff > 0.0 && cfg.lm.backoff <= 1.0) {
        return Err(CliError::Usage("order must be >= 1 and backoff within (0, 1]".into()));
    }
    let input = a.input.clone().or(cfg.paths.train.clone()).ok_or_else(|| CliError::Usage("no training corpus: pass --input".into()))?;
    let model = train_model(&cfg, &input, err)?;
    let mut w = create(&a.out)?;
    model.save(&mut w).map_err(|e| CliError::Data(e.to_string()))?;
    w.flush().map_err(io_err(&a.out))?;
    let _ = writeln!(out, "order {} model, {} words", model.order(), model.vocab_len());
    Ok(())
}

fn load_model(cfg: &CliConfig, a: &PredictorArgs, err: &mut dyn Write) -> CliResult<NgramModel> {
    if let Some(path) = a.lm.clone().or(cfg.paths.lm.clone()) {
        let f = File::open(&path).map_err(io_err(&path))?;
        return NgramModel::load(BufReader::new(f)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())));
    }
    match a.train.clone().or(cfg.paths.train.clone()) {
        Some(path) => train_model(cfg, &path, err),
        None => Err(CliError::Usage("no language model: pass --lm or --train".into())),
    }
}

fn build_predictor(cfg: &CliConfig, a: &PredictorArgs, err: &mut dyn Write) -> CliResult<Arc<dyn Predictor>> {
    let beam = a.beam_width.unwrap_or(cfg.lm.beam_width);
    Ok(match a.predictor.unwrap_or(cfg.predictor) {
        PredictorKind::Ngram => Arc::new(NgramPredictor::with_beam_width(Arc::new(load_model(cfg, a, err)?), beam)),
        PredictorKind::Exhaustive => Arc::new(ExhaustivePredictor::new(Arc::new(load_model(cfg, a, err)?))),
        PredictorKind::Scripted => {
            let path = a.fixture.clone().or(cfg.paths.fixture.clone()).ok_or_else(|| CliError::Usage("scripted predictor needs --fixture".into()))?;
            Arc::new(ScriptedPredictor::new(ScriptedFixture::load(&path).map_err(|e| CliError::Data(e.to_string()))?))
        }
        PredictorKind::Remote => {
            let mut remote = cfg.remote.clone();
            if let Some(e) = &a.endpoint {
                remote.endpoint = e.clone();
            }
            Arc::new(RemotePredictor::http(remote).map_err(|e| CliError::Usage(e.to_string()))?)
        }
    })
}

fn load_tasks(cfg: &CliConfig, a: &TaskArgs, err: &mut dyn Write) -> CliResult<Vec<TurnTask>> {
    let input = a.input.clone().or(cfg.paths.test.clone()).ok_or_else(|| CliError::Usage("no test corpus: pass --input".into()))?;
    if a.speaker.is_some_and(|s| s > 1) {
        return Err(CliError::Usage("--speaker must be 0 or 1".into()));
    }
    let dialogues = read_corpus(&input, err)?;
    Ok(make_tasks(&dialogues, a.speaker, a.max_len.unwrap_or(cfg.sim.max_len)))
}

/// Parses `5`, `1..10` (inclusive) or `1,3,5`.
pub fn parse_k_values(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid option count {s:?}");
    let ks: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if ks.is_empty() {
        return Err(bad());
    }
    Ok(ks)
}

fn write_report(report: &SweepReport, a: &SimArgs) -> CliResult {
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::to_writer_pretty(&mut w, report).map_err(|e| CliError::Data(e.to_string()))?;
            writeln!(w).map_err(io_err(path))?;
        } else {
            report.write_csv(&mut w).map_err(|e| CliError::Data(e.to_string()))?;
        }
        w.flush().map_err(io_err(path))?;
    }
    if let Some(path) = &a.traces {
        let mut w = create(path)?;
        report.write_traces(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    Ok(())
}

fn simulate_cmd(cfg: &CliConfig, a: &SimArgs, sweep: bool, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut sim = cfg.sim;
    if let Some(s) = a.strategy {
        sim.strategy = s;
    }
    if let Some(v) = a.ae_version {
        sim.ae_version = v;
    }
    if a.context {
        sim.use_context = true;
    }
    if a.no_context {
        sim.use_context = false;
    }
    sim.manual_expand_cost |= a.manual_expand;
    sim.charge_selection |= a.charge_selection;
    if a.no_prefill {
        sim.keyword_prefilled = false;
    }
    if let Some(m) = a.tasks.max_len {
        sim.max_len = m;
    }
    let ks = match &a.k {
        Some(s) => parse_k_values(s).map_err(CliError::Usage)?,
        None => vec![sim.k],
    };
    if !sweep && ks.len() != 1 {
        return Err(CliError::Usage("simulate takes a single --k; use sweep for ranges".into()));
    }
    let workers = a.workers.unwrap_or(cfg.workers).max(1);
    let tasks = load_tasks(cfg, &a.tasks, err)?;
    if tasks.is_empty() {
        return Err(CliError::Data("no tasks after filtering".into()));
    }
    let report = if a.baseline {
        let model = load_model(cfg, &a.predictor, err)?;
        let mut report = SweepReport::default();
        for &k in &ks {
            let r = simulate::simulate_baseline_corpus(&tasks, &model, k, workers)?;
            report.rows.extend(r.rows);
            report.failures.extend(r.failures);
            report.traces.extend(r.traces);
        }
        report.recompute();
        report
    } else {
        if ks.contains(&0) {
            return Err(CliError::Usage("k must be at least 1".into()));
        }
        let predictor = build_predictor(cfg, &a.predictor, err)?;
        simulate::sweep_options(&tasks, &sim, predictor.as_ref(), predictor.as_ref(), &ks, workers)?
    };
    for f in &report.failures {
        let _ = writeln!(err, "warning: {} failed: {}", f.task_id, f.error);
    }
    if report.rows.is_empty() {
        if let Some(f) = report.failures.first() {
            return Err(classify_failure(&f.error));
        }
    }
    report.write_summary_csv(&mut *out).map_err(|e| CliError::Data(e.to_string()))?;
    write_report(&report, a)
}

fn classify_failure(message: &str) -> CliError {
    if message.contains("backend") || message.contains("timed out") || message.contains("malformed") {
        CliError::Backend(message.to_string())
    } else {
        CliError::Data(message.to_string())
    }
}

fn datagen_cmd(cfg: &CliConfig, a: &DatagenArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut dg = cfg.datagen.clone();
    if let Some(s) = a.seed {
        dg.seed = s;
    }
    if let Some(d) = a.draws {
        dg.draws_per_sentence = d;
    }
    dg.validate()?;
    let inputs: Vec<PathBuf> = if a.input.is_empty() { cfg.paths.train.iter().cloned().collect() } else { a.input.clone() };
    if inputs.is_empty() {
        return Err(CliError::Usage("no corpus: pass --input".into()));
    }
    std::fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    let mut manifest = Manifest { seed: dg.seed, config: Some(dg.clone()), ..Manifest::default() };
    for input in &inputs {
        let dialogues = read_corpus(input, err)?;
        let name = input.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().to_string());
        for scheme in AeScheme::ALL {
            let triplets = datagen::synth_ae(&dialogues, scheme, &dg)?;
            let stem = a.out_dir.join(format!("{name}.ae.{}", scheme.label()));
            write_both(&stem, &triplets, a.tsv.then(|| datagen::ae_tsv_rows(&triplets).collect()), &["context", "shorthand", "full"])?;
            manifest.record(&name, scheme.label(), triplets.len());
        }
        let fm = datagen::synth_fillmask(&dialogues, &dg)?;
        let stem = a.out_dir.join(format!("{name}.fillmask"));
        write_both(&stem, &fm, a.tsv.then(|| datagen::fm_tsv_rows(&fm).collect()), &["context", "phrase", "word"])?;
        manifest.record(&name, "fill_mask", fm.len());
    }
    let path = a.out_dir.join("manifest.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    for (corpus, counts) in &manifest.counts {
        for (scheme, n) in counts {
            let _ = writeln!(out, "{corpus}\t{scheme}\t{n}");
        }
    }
    Ok(())
}

fn write_both<T: Serialize>(stem: &Path, items: &[T], tsv: Option<Vec<Vec<String>>>, header: &[&str]) -> CliResult {
    let path = stem.with_extension(format!("{}.jsonl", stem.extension().map_or(String::new(), |e| e.to_string_lossy().to_string())));
    let mut w = create(&path)?;
    write_jsonl(&mut w, items).and_then(|_| w.flush()).map_err(io_err(&path))?;
    if let Some(rows) = tsv {
        let path = path.with_extension("tsv");
        let mut w = create(&path)?;
        datagen::write_tsv(&mut w, header, rows).and_then(|_| w.flush()).map_err(io_err(&path))?;
    }
    Ok(())
}

fn read_fm_triplets(path: &Path) -> CliResult<Vec<FmTriplet>> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

fn eval_cmd(cfg: &CliConfig, a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    if a.topk < 1 {
        return Err(CliError::Usage("--topk must be at least 1".into()));
    }
    let use_context = if a.no_context { false } else { a.context || cfg.sim.use_context };
    let tasks = load_tasks(cfg, &a.tasks, err)?;
    let predictor = build_predictor(cfg, &a.predictor, err)?;
    let items = datagen::initials_eval_tasks(&tasks, use_context);
    let acc = datagen::eval_topk(predictor.as_ref(), &items, a.topk)?;
    let _ = writeln!(out, "top-{} accuracy: {acc:.4} ({} tasks, context {})", a.topk, items.len(), if use_context { "on" } else { "off" });
    if a.curves {
        let nls = [None, Some(2), Some(3), Some(4), Some(5)];
        let curves = datagen::eval_curves(predictor.as_ref(), &tasks, &[1, 2, 3, 4, 5], &nls, a.topk, a.seed)?;
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&curves).unwrap_or_default());
    }
    if let Some(path) = &a.fillmask {
        let triplets = read_fm_triplets(path)?;
        let r = datagen::eval_fillmask(predictor.as_ref(), &triplets, a.topk)?;
        let _ = writeln!(
            out,
            "fillmask top-{}: stop {:.4} ({}), non-stop {:.4} ({})",
            a.topk, r.stop.accuracy, r.stop.tasks, r.non_stop.accuracy, r.non_stop.tasks
        );
    }
    Ok(())
}

fn serve_cmd(cfg: &CliConfig, a: &ServeArgs, err: &mut dyn Write) -> CliResult {
    let predictor = build_predictor(cfg, &a.predictor, err)?;
    let addr = a.addr.clone().unwrap_or(cfg.serve.addr.clone());
    let sessions = match a.sessions.clone().or(cfg.serve.sessions.clone()) {
        Some(p) => SessionStore::open(&p).map_err(|e| CliError::Data(e.to_string()))?,
        None => SessionStore::in_memory(),
    };
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let state = AppState::new(predictor.clone(), sessions, cfg.serve.service.clone());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Backend(e.to_string()))?;
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| CliError::Backend(format!("bind {addr}: {e}")))?;
        abbrex_service::serve(listener, state).await.map_err(|e| CliError::Backend(e.to_string()))
    });
    // Blocking HTTP clients inside the predictor must be dropped outside the runtime.
    drop(runtime);
    drop(predictor);
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_values() {
        assert_eq!(parse_k_values("1..10").unwrap(), (1..=10).collect::<Vec<_>>());
        assert_eq!(parse_k_values("1..=3").unwrap(), [1, 2, 3]);
        assert_eq!(parse_k_values("5").unwrap(), [5]);
        assert_eq!(parse_k_values("1,3").unwrap(), [1, 3]);
        assert!(parse_k_values("3..1").is_err());
        assert!(parse_k_values("x").is_err());
    }

    #[test]
    fn precedence() {
        let file: CliConfig = toml::from_str("workers = 2\n[sim]\nk = 3\n[remote]\nendpoint = \"http://file\"\n").unwrap();
        assert_eq!((file.workers, file.sim.k), (2, 3));
        let mut cfg = file.clone();
        cfg.apply_env(&[
            ("ABBREX_WORKERS".into(), "7".into()),
            ("ABBREX_REMOTE_ENDPOINT".into(), "http://env".into()),
        ])
        .unwrap();
        assert_eq!((cfg.workers, cfg.remote.endpoint.as_str(), cfg.sim.k), (7, "http://env", 3));
        assert!(cfg.apply_env(&[("ABBREX_WORKERS".into(), "many".into())]).is_err());
    }
}
