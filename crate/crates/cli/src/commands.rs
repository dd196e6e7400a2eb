use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use cvm_core::data::{
    cells_to_observations, design_bids, load_input, read_design, read_pilot, records_to_observations,
    write_respondents, BidDesign, SurveyInput,
};
use cvm_core::{
    aggregate_value, fit, krinsky_robb_ci, simulate_population, CvmError, FitOptions, KrinskyRobbConfig, ModelSpec,
    NationalValue, SpikeParams,
};
use cvm_survey::{ResponseStore, ServiceConfig, SurveyDefinition, SurveyService};
use sha2::{Digest, Sha256};

use crate::args::{AggregateArgs, DesignArgs, EstimateArgs, ProtestFlag, ServeArgs, SimulateArgs};
use crate::error::{CliError, Result};
use crate::report::{billions, group_thousands, InputDigest, ModelInfo, Provenance, ReportBundle, SCHEMA_VERSION};

fn flags(e: CvmError) -> CliError {
    match e {
        CvmError::InvalidArgument(m) => CliError::Flags(m),
        other => CliError::Core(other),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Input {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

fn parse_covariates(raw: &str) -> Result<Vec<String>> {
    let raw = raw.trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    Ok(raw.split(',').map(|s| s.trim().to_owned()).collect())
}

/// Fits the model and builds the report; does not print anything.
pub fn estimate(args: &EstimateArgs) -> Result<ReportBundle> {
    let mut spec = ModelSpec::with_covariates(parse_covariates(&args.covariates)?).map_err(flags)?;
    if args.protest == ProtestFlag::Exclude {
        spec = spec.excluding_protests();
    }
    let kr_cfg = KrinskyRobbConfig {
        replications: args.reps,
        seed: args.seed,
        ..KrinskyRobbConfig::default()
    };
    if args.reps < 100 {
        return Err(CliError::Flags(format!(
            "--reps {} is below the minimum of 100",
            args.reps
        )));
    }
    if args.households == 0 || args.years == 0 {
        return Err(CliError::Flags("--households and --years must be positive".into()));
    }

    let bytes = read_bytes(&args.input)?;
    let digest = InputDigest {
        path: args.input.display().to_string(),
        sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
        bytes: bytes.len() as u64,
    };
    let input = load_input(&args.input).map_err(|e| match e {
        CvmError::Io(source) => CliError::Input {
            path: digest.path.clone(),
            source,
        },
        other => CliError::Core(other),
    })?;

    let (obs, audit, layout) = match &input {
        SurveyInput::Aggregate(cells) => {
            if !spec.covariate_names.is_empty() {
                return Err(CliError::Flags(
                    "aggregate input carries no covariates; use --covariates none or respondent-level input".into(),
                ));
            }
            if !spec.include_protest_as_zero {
                return Err(CliError::Flags(
                    "aggregate input carries no protest status; --protest exclude needs respondent-level input".into(),
                ));
            }
            (cells_to_observations::<f64>(cells, &spec)?, None, "aggregate")
        }
        SurveyInput::Respondents(records) => {
            if let Some(first) = records.first() {
                let missing: Vec<&str> = spec
                    .covariate_names
                    .iter()
                    .filter(|n| !first.covariates.contains_key(*n))
                    .map(String::as_str)
                    .collect();
                if !missing.is_empty() {
                    return Err(CliError::Flags(format!(
                        "covariates not present in {}: {}",
                        digest.path,
                        missing.join(", ")
                    )));
                }
            }
            let (obs, audit) = records_to_observations::<f64>(records, &spec)?;
            (obs, Some(audit), "respondent")
        }
    };

    let fitted = fit(&obs, &spec, &FitOptions::default())?;
    let kr = krinsky_robb_ci(&fitted, &kr_cfg).map_err(flags)?;
    let aggregation = aggregate_value(fitted.mean_wtp, args.households, args.years).map_err(flags)?;
    tracing::debug!(iterations = fitted.iterations, "fit converged");

    Ok(ReportBundle {
        schema_version: SCHEMA_VERSION.to_owned(),
        model: ModelInfo {
            covariates: spec.covariate_names.clone(),
            protest: match args.protest {
                ProtestFlag::Include => "include",
                ProtestFlag::Exclude => "exclude",
            }
            .to_owned(),
            input_layout: layout.to_owned(),
        },
        fit: fitted,
        krinsky_robb: kr,
        aggregation,
        protest_audit: audit,
        provenance: Provenance {
            tool: "cvm".to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            input: digest,
            seed: args.seed,
            replications: args.reps,
        },
    })
}

pub fn aggregate(args: &AggregateArgs) -> Result<NationalValue> {
    aggregate_value(args.mean_wtp, args.households, args.years).map_err(flags)
}

pub fn render_aggregate(v: &NationalValue) -> String {
    format!(
        "Mean WTP            KRW {} per household per year\n\
         Households          {}\n\
         Annual value        {} (KRW {})\n\
         Total over {} years  {} (KRW {})\n",
        group_thousands(v.mean_wtp, 2),
        group_thousands(v.households as f64, 0),
        billions(v.annual),
        group_thousands(v.annual, 0),
        v.years,
        billions(v.total),
        group_thousands(v.total, 0),
    )
}

/// Simulated respondent CSV.
pub fn simulate(args: &SimulateArgs) -> Result<String> {
    let truth = SpikeParams::new(args.a, args.theta.clone(), args.b).map_err(flags)?;
    let design = match &args.design {
        Some(path) => read_design(read_bytes(path)?.as_slice())?,
        None => BidDesign::published(),
    };
    let pop = simulate_population(&truth, &design, args.n, args.seed).map_err(flags)?;
    let mut out = Vec::new();
    write_respondents(&mut out, &pop.records, &pop.covariate_names())?;
    Ok(String::from_utf8(out).expect("csv writer emits utf-8"))
}

/// Bid design CSV.
pub fn design(args: &DesignArgs) -> Result<String> {
    let pilot = read_pilot(read_bytes(&args.pilot)?.as_slice())?;
    let design = design_bids(&pilot, args.pairs, args.trim).map_err(flags)?;
    Ok(design.to_csv())
}

pub fn build_service(args: &ServeArgs) -> Result<SurveyService> {
    let definition = match &args.survey {
        Some(path) => {
            let text = String::from_utf8_lossy(&read_bytes(path)?).into_owned();
            SurveyDefinition::from_json(&text)?
        }
        None => SurveyDefinition::bundled(),
    };
    if args.idle_timeout_secs == 0 {
        return Err(CliError::Flags("--idle-timeout-secs must be positive".into()));
    }
    let seed = args.seed.unwrap_or_else(rand::random);
    tracing::info!(seed, "session assignment seed");
    let store = ResponseStore::open(&args.store)?;
    let config = ServiceConfig {
        seed,
        idle_timeout: Duration::from_secs(args.idle_timeout_secs),
        export_token: args.export_token.clone().filter(|t| !t.is_empty()),
        cors_origins: args.cors_origins.clone(),
    };
    Ok(SurveyService::new(definition, store, config))
}

/// Binds, prints the listening address on stdout, and serves until Ctrl-C.
pub fn serve(args: &ServeArgs) -> Result<()> {
    let service = Arc::new(build_service(args)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Survey(e.into()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host, args.port))
            .await
            .map_err(|e| CliError::Flags(format!("cannot bind {}:{}: {e}", args.host, args.port)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Survey(e.into()))?;
        {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "listening on http://{addr}");
            let _ = writeln!(stdout, "port {}", addr.port());
            let _ = stdout.flush();
        }
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        cvm_survey::http::serve(listener, service, shutdown)
            .await
            .map_err(|e| CliError::Survey(e.into()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariate_list() {
        assert!(parse_covariates("none").unwrap().is_empty());
        assert!(parse_covariates(" ").unwrap().is_empty());
        assert_eq!(parse_covariates("sex, age").unwrap(), ["sex", "age"]);
    }

    #[test]
    fn aggregate_text_mentions_both_totals() {
        let v = aggregate_value(7222.55, 23_093_108, 5).unwrap();
        let text = render_aggregate(&v);
        assert!(text.contains("KRW 166.79 billion"));
        assert!(text.contains("KRW 833.96 billion"));
    }
}
