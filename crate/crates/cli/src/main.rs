//! `lrmt`: corpus curation, retrieval, translation runs and evaluation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "lrmt", version, about = "Low-resource machine translation toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalOptions,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOptions {
    /// Experiment config (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Verbosity::Normal)]
    pub verbosity: Verbosity,
    /// Directory for outputs; created if absent.
    #[arg(long, global = true, default_value = "output")]
    pub output_dir: PathBuf,
    /// Print the resolved configuration and exit without writing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verbosity {
    Quiet,
    Normal,
    Debug,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus file and write it in canonical form.
    Ingest(commands::IngestArgs),
    /// Apply the standardization rules to a corpus.
    Standardize(commands::StandardizeArgs),
    /// Embed the French side of a corpus.
    Embed(commands::EmbedArgs),
    /// Build a retrieval index from a corpus or precomputed vectors.
    Index(commands::IndexArgs),
    /// Produce hypotheses for a test corpus.
    Translate(commands::RunArgs),
    /// Score a hypothesis file against a reference file.
    Score(commands::ScoreArgs),
    /// Render a score table from score records or run directories.
    Report(commands::ReportArgs),
    /// Stage French-Italian then French-Monégasque training bundles.
    Stage(commands::StageArgs),
    /// Emit the fine-tuning manifest for a model.
    Manifest(commands::ManifestArgs),
    /// BLEU per training epoch as CSV.
    Curve(commands::CurveArgs),
    /// Run a full experiment and persist its run directory.
    Run(commands::RunArgs),
}

fn init_logging(v: Verbosity) {
    let level = match v {
        Verbosity::Quiet => log::LevelFilter::Error,
        Verbosity::Normal => log::LevelFilter::Warn,
        Verbosity::Debug => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.global.verbosity);
    let g = &cli.global;
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(g, a),
        Command::Standardize(a) => commands::standardize(g, a),
        Command::Embed(a) => commands::embed(g, a),
        Command::Index(a) => commands::index(g, a),
        Command::Translate(a) => commands::run(g, a, false),
        Command::Score(a) => commands::score(g, a),
        Command::Report(a) => commands::report(g, a),
        Command::Stage(a) => commands::stage(g, a),
        Command::Manifest(a) => commands::manifest(g, a),
        Command::Curve(a) => commands::curve(g, a),
        Command::Run(a) => commands::run(g, a, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { category, message }) => {
            eprintln!("error[{}]: {message}", category.name());
            ExitCode::from(category.code())
        }
    }
}
