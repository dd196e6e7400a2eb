//! Simulation-based uncertainty: Krinsky–Robb intervals for mean WTP and a
//! synthetic respondent generator used to validate the estimator.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BidDesign, RespondentRecord, ZeroReason};
use crate::error::{CvmError, Result};
use crate::estimation::FitResult;
use crate::linalg::SquareMatrix;
use crate::model::{self, Arm, Outcome, SpikeParams, BID_SCALE};
use crate::scalar::Scalar;

/// Redraw budget per replicate before giving up on a positive bid coefficient.
const MAX_REDRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrinskyRobbConfig {
    pub replications: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
}

impl Default for KrinskyRobbConfig {
    fn default() -> Self {
        KrinskyRobbConfig {
            replications: 5000,
            levels: vec![0.95, 0.99],
            seed: 0,
        }
    }
}

impl KrinskyRobbConfig {
    pub fn with_seed(seed: u64) -> Self {
        KrinskyRobbConfig {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(CvmError::InvalidArgument(format!(
                "{} replications is below the minimum of 100",
                self.replications
            )));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(CvmError::InvalidArgument("coverage levels must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConfidenceInterval<T> {
    pub level: f64,
    pub lo: T,
    pub hi: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KrinskyRobbResult<T> {
    pub intervals: Vec<ConfidenceInterval<T>>,
    pub replications: usize,
    /// Coefficient draws discarded because the bid coefficient was not positive.
    pub rejected_draws: u64,
}

impl<T: Scalar> KrinskyRobbResult<T> {
    pub fn at(&self, level: f64) -> Option<&ConfidenceInterval<T>> {
        self.intervals.iter().find(|c| (c.level - level).abs() < 1e-12)
    }
}

/// Independent RNG stream for one replicate of a seeded run.
fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Krinsky–Robb percentile intervals for mean WTP at the fit's covariate means.
pub fn krinsky_robb_ci<T: Scalar>(fit: &FitResult<T>, cfg: &KrinskyRobbConfig) -> Result<KrinskyRobbResult<T>> {
    krinsky_robb(&fit.params, &fit.covariance, &fit.covariate_means, cfg)
}

/// Draws coefficient vectors from `N(params, covariance)`, evaluates mean WTP
/// at `s` for each and returns equal-tailed percentile intervals.
///
/// Replicate `i` draws from its own stream of the seeded generator, so the
/// result does not depend on how the work is scheduled across threads.
pub fn krinsky_robb<T: Scalar>(
    params: &SpikeParams<T>,
    covariance: &SquareMatrix<T>,
    s: &[T],
    cfg: &KrinskyRobbConfig,
) -> Result<KrinskyRobbResult<T>> {
    cfg.validate()?;
    let k = params.n_coefficients();
    if covariance.dim() != k {
        return Err(CvmError::InvalidArgument(format!(
            "covariance is {0}x{0}, model has {k} coefficients",
            covariance.dim()
        )));
    }
    let chol = covariance.psd_cholesky(T::lit(1e-12))?;
    let centre = params.to_vec();

    let draws: Vec<(T, u64)> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(cfg.seed, i);
            for rejected in 0..MAX_REDRAWS as u64 {
                let z: Vec<T> = (0..k).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
                let x: Vec<T> = centre.iter().zip(chol.mul_vec(&z)).map(|(&m, d)| m + d).collect();
                if x[k - 1] > T::zero() {
                    let p = SpikeParams::from_slice(&x)?;
                    return Ok((model::mean_wtp(&p, s)?, rejected));
                }
            }
            Err(CvmError::DegenerateData(format!(
                "replicate {i}: no draw with a positive bid coefficient in {MAX_REDRAWS} attempts"
            )))
        })
        .collect::<Result<_>>()?;

    let rejected_draws = draws.iter().map(|d| d.1).sum();
    let mut values: Vec<T> = draws.into_iter().map(|d| d.0).collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite WTP draws"));

    let intervals = cfg
        .levels
        .iter()
        .map(|&level| {
            let tail = (1.0 - level) / 2.0;
            ConfidenceInterval {
                level,
                lo: percentile(&values, tail),
                hi: percentile(&values, 1.0 - tail),
            }
        })
        .collect();
    Ok(KrinskyRobbResult {
        intervals,
        replications: cfg.replications,
        rejected_draws,
    })
}

/// Linear-interpolation percentile of sorted values.
fn percentile<T: Scalar>(sorted: &[T], p: f64) -> T {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + T::lit(h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Draws one latent WTP (KRW) from the spike-logistic law: zero with the
/// spike probability, otherwise by inverting the conditional CDF above zero.
pub fn draw_wtp<R: Rng + ?Sized>(params: &SpikeParams<f64>, s: &[f64], rng: &mut R) -> Result<f64> {
    if !(params.b > 0.0) {
        return Err(CvmError::InvalidArgument("WTP draws need b > 0".into()));
    }
    let idx = params.index(s)?;
    let spike = crate::scalar::logistic(-idx);
    let u: f64 = rng.random();
    if u < spike {
        return Ok(0.0);
    }
    // G(w) = σ(b·w - ā) on w > 0, so w = (ā + logit u) / b
    let logit = (u / (1.0 - u)).ln();
    Ok(((idx + logit) / params.b * BID_SCALE).max(f64::MIN_POSITIVE))
}

/// Synthetic survey generated from known coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPopulation {
    pub records: Vec<RespondentRecord>,
    /// Latent WTP behind each record, in KRW.
    pub latent_wtp: Vec<f64>,
    pub truth: SpikeParams<f64>,
    pub design: BidDesign,
    pub seed: u64,
}

impl SimulatedPopulation {
    /// Covariate names used when `truth` has covariate coefficients.
    pub fn covariate_names(&self) -> Vec<String> {
        covariate_names(self.truth.theta.len())
    }
}

fn covariate_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("x{i}")).collect()
}

/// Zero-reason frequencies used to label simulated zero responses.
const ZERO_REASON_WEIGHTS: [(ZeroReason, u32); 6] = [
    (ZeroReason::CannotAfford, 43),
    (ZeroReason::ExistingTax, 90),
    (ZeroReason::NotEnoughInfo, 38),
    (ZeroReason::NotPriority, 43),
    (ZeroReason::NotInterested, 28),
    (ZeroReason::Other, 7),
];

pub(crate) fn draw_zero_reason<R: Rng + ?Sized>(rng: &mut R) -> ZeroReason {
    let total: u32 = ZERO_REASON_WEIGHTS.iter().map(|w| w.1).sum();
    let mut pick = rng.random_range(0..total);
    for (reason, w) in ZERO_REASON_WEIGHTS {
        if pick < w {
            return reason;
        }
        pick -= w;
    }
    ZeroReason::Other
}

/// Simulates `n` respondents answering the design under `truth`.
///
/// Bid pairs are assigned round-robin and arms by a seeded fair coin. When
/// `truth` has covariate coefficients, covariates `x1…xk` are standard normal.
pub fn simulate_population(
    truth: &SpikeParams<f64>,
    design: &BidDesign,
    n: usize,
    seed: u64,
) -> Result<SimulatedPopulation> {
    if n == 0 {
        return Err(CvmError::InvalidArgument("population size must be positive".into()));
    }
    let design = BidDesign::new(design.pairs().to_vec())?;
    if !(truth.b > 0.0) {
        return Err(CvmError::InvalidArgument("simulation needs b > 0".into()));
    }
    let names = covariate_names(truth.theta.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    let width = n.to_string().len();

    for i in 0..n {
        let bids = design.pairs()[i % design.len()];
        let arm = if rng.random_bool(0.5) {
            Arm::UpperFirst
        } else {
            Arm::LowerFirst
        };
        let s: Vec<f64> = (0..names.len()).map(|_| rng.sample(StandardNormal)).collect();
        let wtp = draw_wtp(truth, &s, &mut rng)?;
        let outcome = Outcome::from_wtp(arm, bids, wtp);
        let zero_reason = outcome.is_zero().then(|| draw_zero_reason(&mut rng));
        let covariates: BTreeMap<String, f64> = names.iter().cloned().zip(s).collect();
        records.push(RespondentRecord::new(
            format!("sim{i:0width$}"),
            arm,
            bids,
            outcome,
            covariates,
            zero_reason,
        )?);
        latent.push(wtp);
    }
    Ok(SimulatedPopulation {
        records,
        latent_wtp: latent,
        truth: truth.clone(),
        design,
        seed,
    })
}
