use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvm_core::valuation::{DEFAULT_HOUSEHOLDS, DEFAULT_YEARS};

#[derive(Debug, Parser)]
#[command(
    name = "cvm",
    version,
    about = "Spike-model contingent valuation: estimation, simulation, bid design and survey service"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the spike model and report coefficients, WTP and intervals.
    Estimate(EstimateArgs),
    /// Scale a mean WTP to a national annual and total value.
    AggregateValue(AggregateArgs),
    /// Write a synthetic respondent CSV drawn from known coefficients.
    Simulate(SimulateArgs),
    /// Derive bid pairs from pilot WTP answers.
    DesignBids(DesignArgs),
    /// Run the survey HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtestFlag {
    /// Keep protest zeros as true zeros.
    Include,
    /// Drop protest zeros (respondent-level input only).
    Exclude,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Respondent or aggregate CSV; the layout is detected from the header.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated covariate columns, or `none`.
    #[arg(long, default_value = "none")]
    pub covariates: String,
    #[arg(long, value_enum, default_value_t = ProtestFlag::Include)]
    pub protest: ProtestFlag,
    /// Seed for the Krinsky–Robb draws.
    #[arg(long, env = "CVM_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Krinsky–Robb replications.
    #[arg(long, default_value_t = 5000)]
    pub reps: usize,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HOUSEHOLDS)]
    pub households: u64,
    #[arg(long, default_value_t = DEFAULT_YEARS)]
    pub years: u32,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Mean WTP per household per year, KRW.
    #[arg(long, allow_hyphen_values = true)]
    pub mean_wtp: f64,
    #[arg(long, default_value_t = DEFAULT_HOUSEHOLDS)]
    pub households: u64,
    #[arg(long, default_value_t = DEFAULT_YEARS)]
    pub years: u32,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Intercept of the logistic index.
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    /// Bid coefficient per KRW 1,000.
    #[arg(long, allow_hyphen_values = true)]
    pub b: f64,
    /// Covariate coefficients; covariates x1, x2, … are standard normal.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = "CVM_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Bid design CSV (`lower,upper`); defaults to the ten published pairs.
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Pilot WTP answers, one per line.
    #[arg(long)]
    pub pilot: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    /// Fraction trimmed from each tail.
    #[arg(long, default_value_t = 0.05)]
    pub trim: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Port to bind; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Survey definition JSON; defaults to the bundled questionnaire.
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// Directory for the response log.
    #[arg(long, default_value = "survey-data")]
    pub store: PathBuf,
    /// Seed for session ids and arm assignment; random when omitted.
    #[arg(long, env = "CVM_SEED")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 24 * 60 * 60)]
    pub idle_timeout_secs: u64,
    /// Bearer token for GET /export; export is disabled without one.
    #[arg(long, env = "CVM_EXPORT_TOKEN", hide_env_values = true)]
    pub export_token: Option<String>,
    /// Allowed browser origin (repeatable); any origin when omitted.
    #[arg(long = "cors-origin")]
    pub cors_origins: Vec<String>,
}
