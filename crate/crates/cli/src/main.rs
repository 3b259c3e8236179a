mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "repoprint", version, about = "Repository activity fingerprinting and classification")]
struct Cli {
    /// Worker threads for data-parallel stages (default: all cores). Ignored
    /// in builds without the `parallel` feature.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse archives, curate repositories, resolve countries; writes repos.bin.
    Ingest(IngestArgs),
    /// Build the feature table from repos.bin.
    Features(FeaturesArgs),
    /// Train the sequence autoencoder.
    EmbedTrain(EmbedTrainArgs),
    /// Per-cluster logistic regression against the majority baseline.
    Evaluate(EvalArgs),
    /// Leave-one-out or feature-family ablations.
    Ablate(AblateArgs),
    /// Leave-one-out KNN over company labels plus a PCA projection.
    CaseStudy(CaseStudyArgs),
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
    /// Event-type KL divergence and profile z-tests between two groups.
    Stats(StatsArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Archive file glob; repeatable. `.gz` files are decompressed.
    #[arg(long, required = true)]
    pub archive: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub min_events: usize,
    #[arg(long, num_args = 0..=1, default_value_t = true, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub require_create: bool,
    /// Inclusive UTC date range `YYYY-MM-DD..YYYY-MM-DD`.
    #[arg(long, default_value = "2017-01-01..2020-06-30")]
    pub window: String,
    /// `file:<gazetteer.tsv>` or `http:<nominatim base url>`.
    #[arg(long)]
    pub geocoder: Option<String>,
    /// Location cache TSV, read if present and rewritten afterwards.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// `actor TAB location [TAB company]` profiles used for country labels.
    #[arg(long)]
    pub users: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub repos: PathBuf,
    /// Metadata sidecar `repo_id,stars,forks,open_issues,description`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub lda_k: usize,
    #[arg(long, env = "REPOPRINT_SEED", default_value_t = 1)]
    pub lda_seed: u64,
    #[arg(long, default_value_t = 500)]
    pub lda_iters: usize,
    /// Document-topic prior. Default 0.5; see README on why not 50/k.
    #[arg(long, default_value_t = 0.5)]
    pub lda_alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lda_beta: f64,
    /// Trained `.vrae` checkpoint, or `none` for a zero-filled block.
    #[arg(long, default_value = "none")]
    pub embedder: String,
    /// Width of the zero-filled block when no embedder is given.
    #[arg(long, default_value_t = 8)]
    pub latent: usize,
    /// `repo_id,<label>` CSV overriding the labels stored in repos.bin.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Header for the label column: country, company or label.
    #[arg(long, default_value = "country")]
    pub label_column: String,
    /// Shell-free command that translates comment text on stdin to stdout.
    #[arg(long, alias = "translate-cmd")]
    pub translator_cmd: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedTrainArgs {
    #[arg(long)]
    pub repos: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub latent: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 500)]
    pub max_len: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, env = "REPOPRINT_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub include_watch: bool,
    /// Train on at most this many repositories (evenly strided).
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalCommon {
    #[arg(long)]
    pub features: PathBuf,
    /// `repo_id,<label>` CSV overriding the labels in the feature table.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// `auto` or three comma-separated activity counts.
    #[arg(long, default_value = "auto")]
    pub cuts: String,
    /// Number of split seeds.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// First split seed; the others follow consecutively.
    #[arg(long, env = "REPOPRINT_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    #[arg(long, default_value = "US")]
    pub positive_label: String,
    /// Shuffle labels with this seed before evaluating (null control).
    #[arg(long)]
    pub permute_labels: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: EvalCommon,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AblateMode {
    Loo,
    Groups,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub mode: AblateMode,
    /// Comma-separated units for `loo`: column names, family names or
    /// `seq_emb`. Default: every column plus the embedding block.
    #[arg(long, value_delimiter = ',')]
    pub units: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: EvalCommon,
}

#[derive(Debug, Args, Serialize)]
pub struct CaseStudyArgs {
    /// Feature table whose label column holds company names.
    #[arg(long)]
    pub features: PathBuf,
    /// `repo_id,company` CSV overriding the table's labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// `reference` or a JSON file holding a list of group profiles.
    #[arg(long, default_value = "reference")]
    pub profiles: String,
    /// Move the two reference profiles toward each other (0 = apart, 1 = equal).
    #[arg(long, default_value_t = 0.0)]
    pub mix: f64,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, env = "REPOPRINT_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareBy {
    Country,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub repos: PathBuf,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "country")]
    pub compare: CompareBy,
    /// The two groups to compare, e.g. `US,CN`. Default: the two largest.
    #[arg(long, value_delimiter = ',')]
    pub groups: Vec<String>,
    /// Seed and sweeps for the topic model behind the topic-affinity test.
    #[arg(long, env = "REPOPRINT_SEED", default_value_t = 1)]
    pub lda_seed: u64,
    #[arg(long, default_value_t = 500)]
    pub lda_iters: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Coarse machine-readable class of the innermost library error.
fn error_kind(e: &anyhow::Error) -> &'static str {
    use repoprint::{features, ingest, learn, pipeline, seqembed, store, synth};
    for cause in e.chain() {
        if cause.is::<ingest::IngestError>() {
            return "ingest";
        } else if cause.is::<features::FeatureError>() {
            return "features";
        } else if cause.is::<seqembed::SeqError>() {
            return "seqembed";
        } else if cause.is::<learn::LearnError>() {
            return "learn";
        } else if cause.is::<pipeline::PipelineError>() {
            return "pipeline";
        } else if cause.is::<synth::SynthError>() {
            return "synth";
        } else if cause.is::<store::StoreError>() {
            return "store";
        } else if cause.is::<repoprint::analytics::AnalyticsError>() {
            return "analytics";
        }
    }
    if e.chain().any(|c| c.is::<std::io::Error>()) {
        "io"
    } else {
        "runtime"
    }
}

fn report_error(e: &anyhow::Error) {
    let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
    let payload = serde_json::json!({
        "error": {
            "kind": error_kind(e),
            "message": e.to_string(),
            "causes": chain[1..].to_vec(),
        }
    });
    eprintln!("{payload}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        // clap exits 2 on usage errors and 0 for --help / --version.
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            report_error(&anyhow::anyhow!("configuring thread pool: {e}"));
            return ExitCode::from(1);
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        log::warn!("--threads ignored: built without the `parallel` feature");
    }
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Features(a) => commands::features(a),
        Command::EmbedTrain(a) => commands::embed_train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::CaseStudy(a) => commands::case_study(a),
        Command::Synth(a) => commands::synth(a),
        Command::Stats(a) => commands::stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::from(1)
        }
    }
}
