use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use lrmt::corpus::{
    export_corpus, ingest_opus_books, load_corpus, published_counts, validate_counts, Corpus, CorpusError, LangPair,
};
use lrmt::experiment::{
    curve_csv, epoch_curve, generate_training_manifest, load_score_records, persist_run, render_report, run_experiment,
    run_id, CurveInput, EmbeddingConfig, ErrorCategory, ExperimentConfig, ExperimentError, Layout, ModelLabel,
    ScoreRecord,
};
use lrmt::metrics::{zip_segments, EvalOptions, MetricError, MetricKind};
use lrmt::prompting::{Direction, PromptError, TemplateRegistry, PLAIN_TEMPLATE};
use lrmt::retrieval::{
    build_index, embed_batch, EmbedError, EmbeddingIndex, EmbeddingVector, IndexMeta, RetrievalError,
};
use lrmt::standardize::{standardize_corpus, RuleConfig, TextLanguage, UnknownRule};

use crate::GlobalOptions;

/// Stdout writes that stop quietly when the reader has gone away.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! say_raw {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Validation,
    Transport,
    Internal,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Validation => "validation",
            Category::Transport => "transport",
            Category::Internal => "internal",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Category::Usage => 2,
            Category::Validation => 3,
            Category::Transport => 4,
            Category::Internal => 5,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    fn new(category: Category, message: impl Into<String>) -> Self {
        CliError {
            category,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError::new(Category::Usage, message)
    }

    fn validation(message: impl Into<String>) -> Self {
        CliError::new(Category::Validation, message)
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let category = match e.category() {
            ErrorCategory::Transport => Category::Transport,
            ErrorCategory::Validation => Category::Validation,
        };
        CliError::new(category, e.to_string())
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::validation(e.to_string())
            }
        }
    )*};
}

validation_from!(CorpusError, RetrievalError, MetricError, PromptError, UnknownRule);

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        ExperimentError::from(e).into()
    }
}

type CliResult = Result<(), CliError>;

fn write_file(path: &Path, contents: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::new(Category::Internal, format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::new(Category::Internal, format!("{}: {e}", path.display())))
}

fn ensure_output_dir(g: &GlobalOptions) -> CliResult {
    fs::create_dir_all(&g.output_dir)
        .map_err(|e| CliError::new(Category::Internal, format!("{}: {e}", g.output_dir.display())))
}

fn out_path(g: &GlobalOptions, explicit: &Option<PathBuf>, default: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| g.output_dir.join(default))
}

fn print_dry_run(resolved: &Value) -> CliResult {
    say!(
        "{}",
        serde_json::to_string_pretty(resolved).expect("JSON value serializes")
    );
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

fn parse_lang_pair(s: &str) -> Result<LangPair, CliError> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| CliError::usage(format!("language pair {s:?} must look like fr-mo")))?;
    if a != "fr" {
        return Err(CliError::usage(format!("language pair {s:?} must start with fr")));
    }
    Ok(LangPair::new(a, b)?)
}

fn parse_direction(s: &str) -> Result<Direction, CliError> {
    s.parse().map_err(|e: PromptError| CliError::usage(e.to_string()))
}

fn read_config_table(g: &GlobalOptions) -> Result<(toml::Table, PathBuf), CliError> {
    match &g.config {
        None => Ok((toml::Table::new(), PathBuf::from("."))),
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            let table: toml::Table = text
                .parse()
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            let base = path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            Ok((table, base))
        }
    }
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()
            .map(|d| d.join(p))
            .unwrap_or_else(|_| p.to_path_buf())
    }
}

fn path_value(p: &Path) -> toml::Value {
    toml::Value::String(absolute(p).to_string_lossy().into_owned())
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Jsonl,
    OpusBooks,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Jsonl)]
    format: InputFormat,
    /// Language pair of a JSONL input.
    #[arg(long, default_value = "fr-mo")]
    lang_pair: String,
    /// Defaults to <output-dir>/corpus.jsonl.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Compare per-kind counts against the published dataset sizes.
    #[arg(long)]
    check_counts: bool,
}

pub fn ingest(g: &GlobalOptions, a: &IngestArgs) -> CliResult {
    let lang_pair = match a.format {
        InputFormat::OpusBooks => LangPair::fr_it(),
        InputFormat::Jsonl => parse_lang_pair(&a.lang_pair)?,
    };
    let output = out_path(g, &a.output, "corpus.jsonl");
    if g.dry_run {
        return print_dry_run(&json!({
            "command": "ingest",
            "input": a.input,
            "format": format!("{:?}", a.format).to_lowercase(),
            "lang_pair": lang_pair.to_string(),
            "output": output,
            "check_counts": a.check_counts,
        }));
    }
    let corpus = match a.format {
        InputFormat::OpusBooks => ingest_opus_books(&a.input)?,
        InputFormat::Jsonl => load_corpus(&a.input, &lang_pair)?,
    };
    ensure_output_dir(g)?;
    export_corpus(&corpus, &output).map_err(|e| CliError::new(Category::Internal, e.to_string()))?;
    say!(
        "ingested {} pairs ({}) -> {}",
        corpus.len(),
        lang_pair,
        output.display()
    );
    if a.check_counts {
        say_raw!("{}", validate_counts(&corpus, &published_counts()));
    }
    Ok(())
}

// ----------------------------------------------------------- standardize

#[derive(Debug, Args)]
pub struct StandardizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "fr-mo")]
    lang_pair: String,
    /// Comma-separated rule names, in order; defaults to the standard set.
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<String>>,
    /// Defaults to <output-dir>/standardized.jsonl.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn standardize(g: &GlobalOptions, a: &StandardizeArgs) -> CliResult {
    let lang_pair = parse_lang_pair(&a.lang_pair)?;
    let config = |lang| match &a.rules {
        Some(names) => RuleConfig::from_names(names, lang),
        None => Ok(RuleConfig::default_for(lang)),
    };
    let fr = config(TextLanguage::Fr)?;
    let partner = config(TextLanguage::Mo)?;
    let output = out_path(g, &a.output, "standardized.jsonl");
    let report_json = g.output_dir.join("standardize_report.json");
    let report_txt = g.output_dir.join("standardize_report.txt");
    if g.dry_run {
        return print_dry_run(&json!({
            "command": "standardize",
            "input": a.input,
            "lang_pair": lang_pair.to_string(),
            "rules_fr": fr.enabled_rules.iter().map(|r| r.name()).collect::<Vec<_>>(),
            "rules_partner": partner.enabled_rules.iter().map(|r| r.name()).collect::<Vec<_>>(),
            "output": output,
            "report": [report_json, report_txt],
        }));
    }
    let corpus = load_corpus(&a.input, &lang_pair)?;
    let (clean, report) = standardize_corpus(&corpus, &fr, &partner);
    ensure_output_dir(g)?;
    export_corpus(&clean, &output).map_err(|e| CliError::new(Category::Internal, e.to_string()))?;
    write_file(&report_json, &pretty(&report))?;
    write_file(&report_txt, &report.render())?;
    say!(
        "standardized {} pairs, {} changed -> {}",
        report.pairs_processed,
        report.pairs_changed,
        output.display()
    );
    Ok(())
}

// ------------------------------------------------------- embed and index

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    Fallback,
    Http,
}

#[derive(Debug, Args)]
pub struct EmbeddingFlags {
    #[arg(long, value_enum)]
    embedder: Option<EmbedderKind>,
    /// Fallback embedder dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    embedding_endpoint: Option<String>,
    #[arg(long)]
    embedding_model: Option<String>,
    /// Environment variable holding the embedding service token.
    #[arg(long)]
    embedding_auth_env: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
}

fn embedding_config(g: &GlobalOptions, f: &EmbeddingFlags) -> Result<EmbeddingConfig, CliError> {
    let (table, _) = read_config_table(g)?;
    let mut section = match table.get("embedding") {
        Some(toml::Value::Table(t)) => t.clone(),
        Some(_) => return Err(CliError::validation("[embedding] must be a table")),
        None => toml::Table::new(),
    };
    let mut set = |k: &str, v: toml::Value| {
        section.insert(k.to_string(), v);
    };
    if let Some(k) = f.embedder {
        set("kind", toml::Value::String(format!("{k:?}").to_lowercase()));
    }
    if let Some(d) = f.dim {
        set("dim", toml::Value::Integer(d as i64));
    }
    if let Some(e) = &f.embedding_endpoint {
        set("endpoint", toml::Value::String(e.clone()));
    }
    if let Some(m) = &f.embedding_model {
        set("model", toml::Value::String(m.clone()));
    }
    if let Some(e) = &f.embedding_auth_env {
        set("auth_env", toml::Value::String(e.clone()));
    }
    if let Some(b) = f.batch_size {
        set("batch_size", toml::Value::Integer(b as i64));
    }
    section
        .try_into()
        .map_err(|e: toml::de::Error| CliError::validation(format!("embedding config: {e}")))
}

fn embed_corpus(corpus: &Corpus, config: &EmbeddingConfig) -> Result<(Vec<EmbeddingVector>, String), CliError> {
    let embedder = config.embedder()?;
    let items: Vec<(String, String)> = corpus.pairs().iter().map(|p| (p.id.clone(), p.fr.clone())).collect();
    let vectors = embed_batch(&items, embedder.as_ref(), &config.batch_options())?;
    Ok((vectors, embedder.model_id()))
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "fr-mo")]
    lang_pair: String,
    #[command(flatten)]
    embedding: EmbeddingFlags,
    /// Defaults to <output-dir>/vectors.jsonl.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn embed(g: &GlobalOptions, a: &EmbedArgs) -> CliResult {
    let lang_pair = parse_lang_pair(&a.lang_pair)?;
    let config = embedding_config(g, &a.embedding)?;
    let output = out_path(g, &a.output, "vectors.jsonl");
    if g.dry_run {
        return print_dry_run(&json!({
            "command": "embed",
            "corpus": a.corpus,
            "lang_pair": lang_pair.to_string(),
            "embedding": config,
            "output": output,
        }));
    }
    let corpus = load_corpus(&a.corpus, &lang_pair)?;
    let (vectors, model) = embed_corpus(&corpus, &config)?;
    let mut out = String::new();
    for v in &vectors {
        out.push_str(&serde_json::to_string(v).expect("vector serializes"));
        out.push('\n');
    }
    ensure_output_dir(g)?;
    write_file(&output, &out)?;
    say!("embedded {} texts with {model} -> {}", vectors.len(), output.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Corpus whose French side is embedded.
    #[arg(long, conflicts_with = "vectors", required_unless_present = "vectors")]
    corpus: Option<PathBuf>,
    /// Precomputed vectors (JSONL from `embed`).
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Model identifier recorded for precomputed vectors.
    #[arg(long, default_value = "unknown")]
    vectors_model: String,
    #[arg(long, default_value = "fr-mo")]
    lang_pair: String,
    #[command(flatten)]
    embedding: EmbeddingFlags,
    /// Defaults to <output-dir>/index.lrix.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn index(g: &GlobalOptions, a: &IndexArgs) -> CliResult {
    let lang_pair = parse_lang_pair(&a.lang_pair)?;
    let config = embedding_config(g, &a.embedding)?;
    let output = out_path(g, &a.output, "index.lrix");
    if g.dry_run {
        return print_dry_run(&json!({
            "command": "index",
            "corpus": a.corpus,
            "vectors": a.vectors,
            "lang_pair": lang_pair.to_string(),
            "embedding": if a.vectors.is_some() { Value::Null } else { serde_json::to_value(&config).expect("config serializes") },
            "output": output,
            "meta": EmbeddingIndex::meta_path(&output),
        }));
    }
    let (vectors, model) = match (&a.corpus, &a.vectors) {
        (Some(corpus), _) => embed_corpus(&load_corpus(corpus, &lang_pair)?, &config)?,
        (None, Some(path)) => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            let vectors = text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    serde_json::from_str(l)
                        .map_err(|e| CliError::validation(format!("{}: line {}: {e}", path.display(), i + 1)))
                })
                .collect::<Result<Vec<EmbeddingVector>, _>>()?;
            (vectors, a.vectors_model.clone())
        }
        (None, None) => return Err(CliError::usage("either --corpus or --vectors is required")),
    };
    let index = build_index(vectors, IndexMeta::now(model))?;
    ensure_output_dir(g)?;
    index
        .save(&output)
        .map_err(|e| CliError::new(Category::Internal, e.to_string()))?;
    say!(
        "indexed {} entries (dim {}) -> {}",
        index.len(),
        index.dim(),
        output.display()
    );
    Ok(())
}

// ------------------------------------------------------- translate / run

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    model_label: Option<String>,
    #[arg(long)]
    row_label: Option<String>,
    #[arg(long)]
    direction: Option<String>,
    /// base, rag or rag_plus_italian.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// reference_side or source_side.
    #[arg(long)]
    retrieval_mode: Option<String>,
    #[arg(long)]
    template: Option<String>,
    /// Use the offline mock backend.
    #[arg(long)]
    mock: bool,
    /// Mock behaviour: reference, echo or table.
    #[arg(long)]
    mock_mode: Option<String>,
    #[arg(long)]
    max_inflight: Option<usize>,
    /// Comma-separated metrics.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    #[command(flatten)]
    embedding: EmbeddingFlags,
}

fn experiment_config(g: &GlobalOptions, a: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let (mut table, base) = read_config_table(g)?;
    let mut put = |k: &str, v: toml::Value| {
        table.insert(k.to_string(), v);
    };
    let s = |v: &String| toml::Value::String(v.clone());
    if let Some(v) = &a.name {
        put("name", s(v));
    }
    if let Some(v) = &a.model_label {
        put("model_label", s(v));
    }
    if let Some(v) = &a.row_label {
        put("row_label", s(v));
    }
    if let Some(v) = &a.direction {
        put("direction", s(v));
    }
    if let Some(v) = &a.variant {
        put("variant", s(v));
    }
    if let Some(v) = a.k {
        put("retrieval_k", toml::Value::Integer(v as i64));
    }
    if let Some(v) = &a.retrieval_mode {
        put("retrieval_mode", s(v));
    }
    if let Some(v) = &a.template {
        put("template_id", s(v));
    }
    if let Some(v) = &a.metrics {
        put("metrics", toml::Value::Array(v.iter().map(s).collect()));
    }
    let mut section = |name: &str| -> Result<toml::Table, CliError> {
        match table.remove(name) {
            Some(toml::Value::Table(t)) => Ok(t),
            Some(_) => Err(CliError::validation(format!("[{name}] must be a table"))),
            None => Ok(toml::Table::new()),
        }
    };
    let mut corpus = section("corpus")?;
    let mut backend = section("backend")?;
    for (key, value) in [("train", &a.train), ("test", &a.test), ("index", &a.index)] {
        if let Some(p) = value {
            corpus.insert(key.into(), path_value(p));
        }
    }
    if a.mock {
        backend.insert("kind".into(), toml::Value::String("mock".into()));
    }
    if let Some(m) = &a.mock_mode {
        backend.insert("mock".into(), s(m));
    }
    if let Some(n) = a.max_inflight {
        backend.insert("max_inflight".into(), toml::Value::Integer(n as i64));
    }
    table.insert("corpus".into(), toml::Value::Table(corpus));
    table.insert("backend".into(), toml::Value::Table(backend));
    let embedding = embedding_config(g, &a.embedding)?;
    table.insert(
        "embedding".into(),
        toml::Value::try_from(&embedding).map_err(|e| CliError::new(Category::Internal, e.to_string()))?,
    );
    if a.variant.as_deref() == Some("base") && a.index.is_none() {
        if let Some(toml::Value::Table(c)) = table.get_mut("corpus") {
            c.remove("index");
        }
    }
    let text = toml::to_string(&table).map_err(|e| CliError::new(Category::Internal, e.to_string()))?;
    let config = ExperimentConfig::from_toml(&text, &base)?;
    config.validate()?;
    Ok(config)
}

pub fn run(g: &GlobalOptions, a: &RunArgs, persist: bool) -> CliResult {
    let config = experiment_config(g, a)?;
    let id = run_id(&config);
    if g.dry_run {
        let target = if persist {
            g.output_dir.join(&id)
        } else {
            g.output_dir.clone()
        };
        return print_dry_run(&json!({
            "command": if persist { "run" } else { "translate" },
            "run_id": id,
            "output": target,
            "config": config,
        }));
    }
    let output = run_experiment(&config)?;
    ensure_output_dir(g)?;
    let record = &output.record;
    if persist {
        let dir = persist_run(&output, &g.output_dir)?;
        say!("run {} -> {}", record.run_id, dir.display());
    } else {
        let mut hyps = String::new();
        for h in record.hypotheses() {
            hyps.push_str(&h.replace(['\n', '\r'], " "));
            hyps.push('\n');
        }
        write_file(&g.output_dir.join("hypotheses.txt"), &hyps)?;
        let mut prompts = String::new();
        for p in &output.prompts {
            prompts.push_str(&serde_json::to_string(&p.request).expect("request serializes"));
            prompts.push('\n');
        }
        write_file(&g.output_dir.join("prompts.jsonl"), &prompts)?;
        say!(
            "translated {} segments ({} failed) -> {}",
            record.segments.len(),
            record.backend.failed,
            g.output_dir.join("hypotheses.txt").display()
        );
    }
    for s in &record.scores {
        say!("{}", format_score(s.metric, s.corpus_value));
    }
    Ok(())
}

fn format_score(metric: MetricKind, value: f64) -> String {
    match metric {
        MetricKind::Meteor => format!("{} {:.4}", metric.label(), value),
        _ => format!("{} {:.2}", metric.label(), value),
    }
}

// ----------------------------------------------------------------- score

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    hypotheses: PathBuf,
    #[arg(long)]
    references: PathBuf,
    /// Comma-separated metrics; defaults to all.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    #[arg(long)]
    lowercase: bool,
    /// Defaults to <output-dir>/scores.json.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn score(g: &GlobalOptions, a: &ScoreArgs) -> CliResult {
    let metrics: Vec<MetricKind> = match &a.metrics {
        Some(names) => names
            .iter()
            .map(|n| n.parse().map_err(CliError::usage))
            .collect::<Result<_, _>>()?,
        None => MetricKind::ALL.to_vec(),
    };
    let output = out_path(g, &a.output, "scores.json");
    if g.dry_run {
        return print_dry_run(&json!({
            "command": "score",
            "hypotheses": a.hypotheses,
            "references": a.references,
            "metrics": metrics,
            "lowercase": a.lowercase,
            "output": output,
        }));
    }
    let pairs = zip_segments(&read_lines(&a.hypotheses)?, &read_lines(&a.references)?)?;
    let options = EvalOptions { lowercase: a.lowercase };
    let scores = metrics
        .iter()
        .map(|m| m.score(&pairs, options))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &scores {
        say!("{}", format_score(s.metric, s.corpus_value));
    }
    ensure_output_dir(g)?;
    write_file(&output, &pretty(&scores))
}

// ---------------------------------------------------------------- report

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Score record files (JSON or JSONL) or run directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "bleu_meteor")]
    layout: String,
}

pub fn report(g: &GlobalOptions, a: &ReportArgs) -> CliResult {
    let layout: Layout = a.layout.parse().map_err(CliError::usage)?;
    let text_path = g.output_dir.join("report.txt");
    let json_path = g.output_dir.join("report.json");
    let files: Vec<PathBuf> = a
        .inputs
        .iter()
        .map(|p| if p.is_dir() { p.join("scores.json") } else { p.clone() })
        .collect();
    if g.dry_run {
        return print_dry_run(&json!({
            "command": "report",
            "inputs": files,
            "layout": layout,
            "output": [text_path, json_path],
        }));
    }
    let mut records: Vec<ScoreRecord> = Vec::new();
    for f in &files {
        records.extend(load_score_records(f)?);
    }
    let table = render_report(&records, layout)?;
    let text = table.render();
    say_raw!("{text}");
    ensure_output_dir(g)?;
    write_file(&text_path, &text)?;
    write_file(&json_path, &pretty(&table))
}

// ----------------------------------------------------------------- stage

#[derive(Debug, Args)]
pub struct StageArgs {
    #[arg(long)]
    fr_it: PathBuf,
    #[arg(long)]
    fr_mo: PathBuf,
    #[arg(long, default_value = "fr-mo")]
    direction: String,
    #[arg(long, default_value = PLAIN_TEMPLATE)]
    template: String,
}

pub fn stage(g: &GlobalOptions, a: &StageArgs) -> CliResult {
    let direction = parse_direction(&a.direction)?;
    let registry = TemplateRegistry::default();
    let template = registry.get(&a.template)?.clone();
    if g.dry_run {
        return print_dry_run(&json!({
            "command": "stage",
            "fr_it": a.fr_it,
            "fr_mo": a.fr_mo,
            "direction": direction,
            "template": a.template,
            "output": (["phase1.jsonl", "phase2.jsonl", "manifest.json"].map(|f| g.output_dir.join(f))),
        }));
    }
    let fr_it = load_corpus(&a.fr_it, &LangPair::fr_it())?;
    let fr_mo = load_corpus(&a.fr_mo, &LangPair::fr_mo())?;
    ensure_output_dir(g)?;
    let manifest = lrmt::experiment::stage_italian_phase(&fr_it, &fr_mo, &direction, &template, &g.output_dir)?;
    for p in &manifest.phases {
        say!(
            "phase {} {} {} records -> {}",
            p.order,
            p.direction,
            p.records,
            g.output_dir.join(&p.file).display()
        );
    }
    Ok(())
}

// -------------------------------------------------------------- manifest

#[derive(Debug, Args)]
pub struct ManifestArgs {
    /// LYRA-L, LYRA-G, LYRA-M or NLLB.
    #[arg(long)]
    model: String,
    /// Defaults to <output-dir>/manifest-<model>.json.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn manifest(g: &GlobalOptions, a: &ManifestArgs) -> CliResult {
    let label: ModelLabel = a
        .model
        .parse()
        .map_err(|e: ExperimentError| CliError::usage(e.to_string()))?;
    let output = out_path(g, &a.output, &format!("manifest-{label}.json"));
    if g.dry_run {
        return print_dry_run(&json!({"command": "manifest", "model": label, "output": output}));
    }
    let text = pretty(&generate_training_manifest(label));
    say_raw!("{text}");
    ensure_output_dir(g)?;
    write_file(&output, &text)
}

// ----------------------------------------------------------------- curve

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    references: PathBuf,
    #[arg(long, default_value = "fr-mo")]
    direction: String,
    /// EPOCH=HYPOTHESIS_FILE, repeatable.
    #[arg(long = "epoch", required = true)]
    epochs: Vec<String>,
    #[arg(long)]
    lowercase: bool,
    /// Defaults to <output-dir>/curve.csv.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn curve(g: &GlobalOptions, a: &CurveArgs) -> CliResult {
    let direction = parse_direction(&a.direction)?;
    let inputs = a
        .epochs
        .iter()
        .map(|spec| {
            let (e, p) = spec
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--epoch {spec:?} must look like 3=hyp.txt")))?;
            let epoch = e
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad epoch number {e:?}")))?;
            Ok(CurveInput {
                epoch,
                direction: direction.clone(),
                hypotheses: PathBuf::from(p),
                references: a.references.clone(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let output = out_path(g, &a.output, "curve.csv");
    if g.dry_run {
        let epochs: BTreeMap<u32, &Path> = inputs.iter().map(|i| (i.epoch, i.hypotheses.as_path())).collect();
        return print_dry_run(&json!({
            "command": "curve",
            "references": a.references,
            "direction": direction,
            "epochs": epochs,
            "output": output,
        }));
    }
    let rows = epoch_curve(&inputs, EvalOptions { lowercase: a.lowercase })?;
    let csv = curve_csv(&rows);
    say_raw!("{csv}");
    ensure_output_dir(g)?;
    write_file(&output, &csv)
}
