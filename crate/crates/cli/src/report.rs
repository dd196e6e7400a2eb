use std::fmt::Write as _;

use cvm_core::data::ProtestAudit;
use cvm_core::{FitResult, KrinskyRobbResult, NationalValue};
use serde::{Deserialize, Serialize};

/// Version of `schema/report.schema.json` that reports conform to.
pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: String,
    pub model: ModelInfo,
    pub fit: FitResult<f64>,
    pub krinsky_robb: KrinskyRobbResult<f64>,
    pub aggregation: NationalValue,
    /// Present for respondent-level input only.
    pub protest_audit: Option<ProtestAudit>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub covariates: Vec<String>,
    /// `include` or `exclude`.
    pub protest: String,
    /// `respondent` or `aggregate`.
    pub input_layout: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub input: InputDigest,
    pub seed: u64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl ReportBundle {
    /// Pretty JSON with a trailing newline. No timestamps, so equal inputs
    /// give equal bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn stars(t: f64) -> &'static str {
    let t = t.abs();
    if t >= 2.576 {
        "**"
    } else if t >= 1.96 {
        "*"
    } else {
        ""
    }
}

/// `1234567.891` → `1,234,567.89` with `decimals` places.
pub fn group_thousands(value: f64, decimals: usize) -> String {
    let raw = format!("{:.*}", decimals, value.abs());
    let (int, frac) = raw.split_once('.').map_or((raw.as_str(), None), |(i, f)| (i, Some(f)));
    let mut out = String::new();
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    if let Some(f) = frac {
        out.push('.');
        out.push_str(f);
    }
    if value.is_sign_negative() && raw.chars().any(|c| c.is_ascii_digit() && c != '0') {
        out.insert(0, '-');
    }
    out
}

pub fn billions(krw: f64) -> String {
    format!("KRW {:.2} billion", krw / 1e9)
}

const LABEL: usize = 26;

fn row(out: &mut String, label: &str, value: &str) {
    let _ = writeln!(out, "{label:<LABEL$}{value}");
}

/// Text rendering laid out like a published estimation table: each
/// coefficient with its t-statistic in brackets below it.
pub fn render_table(r: &ReportBundle) -> String {
    let fit = &r.fit;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Spike model, {} respondents ({} input, protest zeros {}d)",
        fit.n_respondents, r.model.input_layout, r.model.protest
    );
    let _ = writeln!(out, "{}", "-".repeat(LABEL + 26));
    let coefs = fit.params.to_vec();
    for (i, name) in fit.coefficient_names.iter().enumerate() {
        let label = if name == "bid" {
            "Bid (KRW 1,000)"
        } else {
            name.as_str()
        };
        row(&mut out, label, &format!("{:.4}{}", coefs[i], stars(fit.t_stats[i])));
        row(&mut out, "", &format!("[{:.2}]", fit.t_stats[i]));
    }
    row(&mut out, "Spike", &format!("{:.3}", fit.spike));
    row(&mut out, "Log-likelihood", &format!("{:.2}", fit.log_lik));
    row(
        &mut out,
        &format!("Wald chi2({})", fit.wald.df),
        &format!("{:.2} (p = {:.4})", fit.wald.stat, fit.wald.p_value),
    );
    row(&mut out, "Mean WTP (KRW)", &group_thousands(fit.mean_wtp, 2));
    row(&mut out, "", &format!("[{:.2}]", fit.mean_wtp_t));
    for ci in &r.krinsky_robb.intervals {
        row(
            &mut out,
            &format!("{:.0}% CI (Krinsky-Robb)", ci.level * 100.0),
            &format!("{} - {}", group_thousands(ci.lo, 2), group_thousands(ci.hi, 2)),
        );
    }
    let _ = writeln!(out, "{}", "-".repeat(LABEL + 26));
    let _ = writeln!(
        out,
        "** |t| >= 2.576, * |t| >= 1.96; {} replications, seed {}",
        r.krinsky_robb.replications, r.provenance.seed
    );
    let agg = &r.aggregation;
    row(
        &mut out,
        "Annual national value",
        &format!(
            "{} ({} households)",
            billions(agg.annual),
            group_thousands(agg.households as f64, 0)
        ),
    );
    row(
        &mut out,
        "Total national value",
        &format!("{} over {} years", billions(agg.total), agg.years),
    );
    if let Some(a) = &r.protest_audit {
        let _ = writeln!(
            out,
            "Protest zeros: {} of {} zero responses ({} respondents removed)",
            a.protest, a.zero_responses, a.removed
        );
    }
    out
}
