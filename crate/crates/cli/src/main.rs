//! Command-line front end: analyze one binary for anti-dynamic-analysis
//! blocks, or evaluate detection rates over a ground-truth corpus.
//!
//! Exit codes: 0 success, 2 packed input (analysis halted), 3 load/manifest
//! error, 4 rating-backend error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tadascan::features::api::ApiKnowledgeBase;
use tadascan::rating::{LocalRuleRater, RatingBackend, RemoteChatBackend, RemoteConfig};
use tadascan::report::{
    emit_report, emit_stats, evaluate_corpus, CorpusManifest, PipelineError, ReportFormat,
};
use tadascan::{analyze, AnalyzeConfig};

#[derive(Parser)]
#[command(
    name = "tadascan",
    version,
    about = "Pinpoint anti-dynamic-analysis basic blocks in x86 PE binaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one PE file (or fixture manifest) and emit a breakpoint report.
    Analyze {
        /// Input file: a 32-bit PE, or a fixture manifest with --fixture.
        path: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// Rating threshold for positive blocks.
        #[arg(long, default_value_t = 7)]
        threshold: u8,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write every rated block's full prompt into this directory.
        #[arg(long)]
        dump_prompts: Option<PathBuf>,
        /// Treat the input as a text fixture manifest.
        #[arg(long)]
        fixture: bool,
        /// Merge extra API signatures over the built-in knowledge base.
        #[arg(long)]
        api_kb: Option<PathBuf>,
    },
    /// Run detection-rate evaluation over a ground-truth corpus manifest.
    Evaluate {
        /// Corpus manifest path.
        manifest: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 7)]
        threshold: u8,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct BackendArgs {
    /// Rating backend.
    #[arg(long, value_enum, default_value_t = Backend::Local)]
    backend: Backend,
    /// Chat-completions endpoint for --backend remote.
    #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
    remote_url: String,
    /// Model name for --backend remote.
    #[arg(long, default_value = "gpt-4-turbo")]
    remote_model: String,
    /// Environment variable holding the bearer token for --backend remote.
    #[arg(long, default_value = "TADASCAN_API_KEY")]
    api_key_env: String,
    /// Request timeout in seconds for --backend remote.
    #[arg(long, default_value_t = 60)]
    remote_timeout: u64,
    /// Cache backend responses in this file (keyed by prompt hash).
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Local,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> ReportFormat {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Text => ReportFormat::Text,
        }
    }
}

fn make_backend(args: &BackendArgs) -> Result<Box<dyn RatingBackend>, PipelineError> {
    match args.backend {
        Backend::Local => Ok(Box::new(LocalRuleRater)),
        Backend::Remote => {
            let config = RemoteConfig {
                url: args.remote_url.clone(),
                model: args.remote_model.clone(),
                api_key_env: args.api_key_env.clone(),
                timeout: Duration::from_secs(args.remote_timeout),
            };
            RemoteChatBackend::new(config)
                .map(|b| Box::new(b) as Box<dyn RatingBackend>)
                .map_err(|e| PipelineError::Rating(e.to_string()))
        }
    }
}

fn write_output(bytes: &[u8], out: Option<&PathBuf>) -> Result<(), PipelineError> {
    match out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| PipelineError::Output(e.to_string()))
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| PipelineError::Output(e.to_string()))
        }
    }
}

fn run() -> Result<u8, PipelineError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze {
            path,
            backend,
            threshold,
            out,
            format,
            dump_prompts,
            fixture,
            api_kb,
        } => {
            let mut knowledge_base = ApiKnowledgeBase::default();
            if let Some(kb_path) = api_kb {
                let text = fs::read_to_string(&kb_path)
                    .map_err(|e| PipelineError::Load(format!("{}: {e}", kb_path.display())))?;
                knowledge_base
                    .merge(&text)
                    .map_err(|e| PipelineError::Load(e.to_string()))?;
            }
            let mut config = AnalyzeConfig {
                fixture,
                knowledge_base,
                dump_prompts,
                cache_path: backend.cache.clone(),
                ..AnalyzeConfig::default()
            };
            config.rating.threshold = threshold;
            config.rating.request_timeout = Duration::from_secs(backend.remote_timeout);

            let backend = make_backend(&backend)?;
            let report = analyze(&path, backend.as_ref(), &config)?;
            let bytes = emit_report(&report, format.into())?;
            write_output(&bytes, out.as_ref())?;
            Ok(if report.packing.is_packed() { 2 } else { 0 })
        }
        Command::Evaluate {
            manifest,
            backend,
            threshold,
            out,
            format,
        } => {
            let corpus = CorpusManifest::load(&manifest)?;
            let mut config = AnalyzeConfig {
                cache_path: backend.cache.clone(),
                ..AnalyzeConfig::default()
            };
            config.rating.threshold = threshold;
            let backend = make_backend(&backend)?;
            let stats = evaluate_corpus(&corpus, backend.as_ref(), &config)?;
            let bytes = emit_stats(&stats, format.into())?;
            write_output(&bytes, out.as_ref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("tadascan: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
