//! Reproducible experiment runner for `renewal-lab`.
//!
//! `renewal-lab <subcommand> --config PATH` writes `<subcommand>.csv`, any
//! auxiliary `<subcommand>-<name>.csv` tables and a `<subcommand>.meta.json`
//! sidecar into the output directory. The exit status is 0 on success, 1 on
//! I/O failure, 2 on a config error, and `10 + i` for the `i`-th entry of
//! [`CORE_CATEGORIES`]; the category is also printed as JSON on stderr.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use config::ExperimentConfig;
pub use experiments::Experiment;
use output::{content_hash, write_all, Metadata};

/// Environment variable naming the output directory when neither `--out`
/// nor the config sets one.
pub const OUT_ENV: &str = "RENEWAL_LAB_OUT";
pub const DEFAULT_OUT: &str = "renewal-lab-out";

/// Error categories of the core library, in exit-code order.
pub const CORE_CATEGORIES: [&str; 17] = [
    "dimension",
    "not-unimodular",
    "decomposition",
    "precondition",
    "eigen",
    "bound-violation",
    "measure",
    "resolution",
    "grid",
    "degenerate-spectrum",
    "singular",
    "out-of-domain",
    "quadrature",
    "cutoff",
    "non-transient",
    "tolerance",
    "empty-regular-set",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] renewal_lab::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.category(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => 10 + CORE_CATEGORIES.iter().position(|c| *c == e.category()).expect("every core category is listed") as i32,
        }
    }

    /// `{"category": ..., "exit_code": ..., "message": ...}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "category": self.category(), "exit_code": self.exit_code(), "message": self.to_string() }).to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "renewal-lab", version, about = "Random walks on SL_d(R): proximality, transfer operators and renewal experiments")]
pub struct Cli {
    pub experiment: Experiment,
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the config. Seeds are TOML integers, so at most
    /// 2^63 - 1.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=config::MAX_SEED))]
    pub seed: Option<u64>,
    /// Output directory; falls back to the config, then $RENEWAL_LAB_OUT,
    /// then ./renewal-lab-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Suppresses the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

/// What a successful run produced.
#[derive(Debug)]
pub struct Report {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Loads the config and applies the command line overrides.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(name) = &cfg.experiment {
        if name != cli.experiment.name() {
            return Err(CliError::Config(format!("config is for {name:?}, not {:?}", cli.experiment.name())));
        }
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let start = Instant::now();
    let cfg = effective_config(cli)?;
    let seed = cfg.seed()?;
    let dir = output_dir(&cfg);
    let outcome = match cli.workers {
        Some(n) => {
            if n == 0 {
                return Err(CliError::Config("--workers must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?;
            pool.install(|| experiments::run(cli.experiment, &cfg, seed))?
        }
        None => experiments::run(cli.experiment, &cfg, seed)?,
    };
    let config_text = cfg.to_toml();
    let name = cli.experiment.name();
    // Where the results go is not an input of the computation.
    let hashed = ExperimentConfig { out: None, seed: Some(seed), ..cfg.clone() }.to_toml();
    let meta = Metadata {
        subcommand: name,
        seed,
        workers: cli.workers,
        config: &config_text,
        input_hash: content_hash(format!("{name}\n{hashed}").as_bytes()),
        outputs: outcome.tables.iter().map(|t| t.file_name(name)).collect(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
    };
    let files = write_all(&dir, name, &outcome.tables, &meta)?;
    Ok(Report { summary: outcome.summary, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let mut codes: Vec<i32> = CORE_CATEGORIES.iter().enumerate().map(|(i, _)| 10 + i as i32).collect();
        codes.extend([1, 2]);
        let n = codes.len();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), n);
        let e = CliError::Core(renewal_lab::Error::Singular { re: 0.0, im: 6.28, sigma_min: 1e-12 });
        assert_eq!(e.exit_code(), 20);
        assert!(e.to_json().contains("\"category\":\"singular\""));
    }

    #[test]
    fn seed_override_and_experiment_mismatch() {
        let cli = Cli::parse_from(["renewal-lab", "lyapunov", "--seed", "4"]);
        assert_eq!(effective_config(&cli).unwrap().seed, Some(4));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "experiment = \"stationary\"\nseed = 1\n").unwrap();
        let cli = Cli::parse_from(["renewal-lab", "lyapunov", "--config", path.to_str().unwrap()]);
        assert!(matches!(effective_config(&cli), Err(CliError::Config(_))));
        assert!(Cli::try_parse_from(["renewal-lab", "lyapunov", "--seed", "9223372036854775808"]).is_err());
    }
}
