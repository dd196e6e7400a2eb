//! Logistic spike model for one-and-one-half-bounded dichotomous choice.
//!
//! Willingness to pay `W` has a point mass at zero and a logistic tail:
//!
//! ```text
//! G(A) = 1 / (1 + exp(ā - b·A))   A > 0
//!        1 / (1 + exp(ā))         A = 0
//!        0                        A < 0
//! ```
//!
//! with `ā = a + θ·s` for a covariate vector `s`. Amounts are given in KRW
//! and enter the index in thousands of KRW, so `b` is per thousand KRW.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CvmError, Result};
use crate::linalg::SquareMatrix;
use crate::scalar::{logistic, logistic_diff, softplus, Scalar};

/// KRW per unit of the bid coefficient.
pub const BID_SCALE: f64 = 1000.0;

#[inline]
fn scaled<T: Scalar>(krw: T) -> T {
    krw / T::lit(BID_SCALE)
}

/// Lower and upper initial bids of one design cell, in whole KRW.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(u32, u32)", into = "(u32, u32)")]
pub struct BidPair {
    lower: u32,
    upper: u32,
}

impl BidPair {
    pub fn new(lower: u32, upper: u32) -> Result<Self> {
        if lower == 0 {
            return Err(CvmError::InvalidArgument("lower bid must be positive".into()));
        }
        if upper <= lower {
            return Err(CvmError::InvalidArgument(format!(
                "upper bid {upper} must exceed lower bid {lower}"
            )));
        }
        Ok(BidPair { lower, upper })
    }

    pub fn lower(&self) -> u32 {
        self.lower
    }

    pub fn upper(&self) -> u32 {
        self.upper
    }

    /// The bid shown first under `arm`.
    pub fn initial(&self, arm: Arm) -> u32 {
        match arm {
            Arm::UpperFirst => self.upper,
            Arm::LowerFirst => self.lower,
        }
    }
}

impl TryFrom<(u32, u32)> for BidPair {
    type Error = CvmError;
    fn try_from((lo, hi): (u32, u32)) -> Result<Self> {
        BidPair::new(lo, hi)
    }
}

impl From<BidPair> for (u32, u32) {
    fn from(p: BidPair) -> Self {
        (p.lower, p.upper)
    }
}

/// Which bid of the pair is presented first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    UpperFirst,
    LowerFirst,
}

impl Arm {
    pub fn code(self) -> &'static str {
        match self {
            Arm::UpperFirst => "upper",
            Arm::LowerFirst => "lower",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Arm {
    type Err = CvmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "upper" => Ok(Arm::UpperFirst),
            "lower" => Ok(Arm::LowerFirst),
            other => Err(CvmError::InvalidArgument(format!("unknown arm `{other}`"))),
        }
    }
}

/// Answer sequence of one respondent. `U_*` codes belong to the upper-first
/// arm, `L_*` codes to the lower-first arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "U_Y")]
    UY,
    #[serde(rename = "U_NY")]
    UNY,
    #[serde(rename = "U_NNY")]
    UNNY,
    #[serde(rename = "U_NNN")]
    UNNN,
    #[serde(rename = "L_YY")]
    LYY,
    #[serde(rename = "L_YN")]
    LYN,
    #[serde(rename = "L_NY")]
    LNY,
    #[serde(rename = "L_NN")]
    LNN,
}

impl Outcome {
    pub const ALL: [Outcome; 8] = [
        Outcome::UY,
        Outcome::UNY,
        Outcome::UNNY,
        Outcome::UNNN,
        Outcome::LYY,
        Outcome::LYN,
        Outcome::LNY,
        Outcome::LNN,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Outcome::UY => "U_Y",
            Outcome::UNY => "U_NY",
            Outcome::UNNY => "U_NNY",
            Outcome::UNNN => "U_NNN",
            Outcome::LYY => "L_YY",
            Outcome::LYN => "L_YN",
            Outcome::LNY => "L_NY",
            Outcome::LNN => "L_NN",
        }
    }

    pub fn arm(self) -> Arm {
        match self {
            Outcome::UY | Outcome::UNY | Outcome::UNNY | Outcome::UNNN => Arm::UpperFirst,
            _ => Arm::LowerFirst,
        }
    }

    /// Outcomes ending in a "no" to the KRW-1 follow-up.
    pub fn is_zero(self) -> bool {
        matches!(self, Outcome::UNNN | Outcome::LNN)
    }

    /// The four outcomes of `arm`, ordered from highest to lowest WTP.
    pub fn for_arm(arm: Arm) -> [Outcome; 4] {
        match arm {
            Arm::UpperFirst => [Outcome::UY, Outcome::UNY, Outcome::UNNY, Outcome::UNNN],
            Arm::LowerFirst => [Outcome::LYY, Outcome::LYN, Outcome::LNY, Outcome::LNN],
        }
    }

    /// Outcome implied by a latent WTP: "yes" to a bid iff `wtp >= bid`, and
    /// "yes" to the KRW-1 follow-up iff `wtp > 0`.
    pub fn from_wtp(arm: Arm, bids: BidPair, wtp: f64) -> Outcome {
        let [high, mid, low, zero] = Outcome::for_arm(arm);
        if wtp >= f64::from(bids.upper) {
            high
        } else if wtp >= f64::from(bids.lower) {
            mid
        } else if wtp > 0.0 {
            low
        } else {
            zero
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Outcome {
    type Err = CvmError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Outcome::ALL
            .into_iter()
            .find(|o| o.code() == s)
            .ok_or_else(|| CvmError::InvalidArgument(format!("unknown outcome code `{s}`")))
    }
}

/// Where a respondent's WTP is known to lie. Bounds are in KRW.
///
/// `Between { lo: 0, .. }` is the open interval `(0, hi)` above the spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum CensorKind<T> {
    PointZero,
    Between { lo: T, hi: T },
    Above { lo: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CensorObservation<T> {
    kind: CensorKind<T>,
    weight: u32,
}

impl<T: Scalar> CensorObservation<T> {
    pub fn new(kind: CensorKind<T>, weight: u32) -> Result<Self> {
        if weight == 0 {
            return Err(CvmError::InvalidArgument(
                "observation weight must be at least 1".into(),
            ));
        }
        match kind {
            CensorKind::PointZero => {}
            CensorKind::Between { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo >= T::zero() && hi > lo) {
                    return Err(CvmError::InvalidArgument(format!(
                        "interval bounds must satisfy 0 <= lo < hi, got ({lo}, {hi})"
                    )));
                }
            }
            CensorKind::Above { lo } => {
                if !(lo.is_finite() && lo > T::zero()) {
                    return Err(CvmError::InvalidArgument(format!(
                        "right-open interval needs a positive bound, got {lo}"
                    )));
                }
            }
        }
        Ok(CensorObservation { kind, weight })
    }

    pub fn point_zero() -> Self {
        CensorObservation {
            kind: CensorKind::PointZero,
            weight: 1,
        }
    }

    pub fn kind(&self) -> CensorKind<T> {
        self.kind
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn with_weight(self, weight: u32) -> Result<Self> {
        CensorObservation::new(self.kind, weight)
    }

    /// Whether a respondent with WTP `wtp` (KRW) answers into this set,
    /// taking "yes" to mean `wtp >= bid`. The sets for one bid pair
    /// partition the non-negative reals.
    pub fn contains(&self, wtp: T) -> bool {
        match self.kind {
            CensorKind::PointZero => wtp == T::zero(),
            CensorKind::Between { lo, hi } => wtp >= lo && wtp < hi && wtp > T::zero(),
            CensorKind::Above { lo } => wtp >= lo,
        }
    }
}

/// A censoring interval together with the respondent's covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Observation<T> {
    pub censor: CensorObservation<T>,
    pub covariates: Vec<T>,
}

impl<T: Scalar> Observation<T> {
    pub fn new(censor: CensorObservation<T>, covariates: Vec<T>) -> Self {
        Observation { censor, covariates }
    }

    /// Observation without covariates.
    pub fn plain(censor: CensorObservation<T>) -> Self {
        Observation {
            censor,
            covariates: Vec::new(),
        }
    }
}

/// Coefficients of the logistic index `a + θ·s - b·A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SpikeParams<T> {
    pub a: T,
    pub theta: Vec<T>,
    pub b: T,
}

impl<T: Scalar> SpikeParams<T> {
    pub fn new(a: T, theta: Vec<T>, b: T) -> Result<Self> {
        let p = SpikeParams { a, theta, b };
        p.check_finite()?;
        Ok(p)
    }

    pub fn without_covariates(a: T, b: T) -> Result<Self> {
        Self::new(a, Vec::new(), b)
    }

    fn check_finite(&self) -> Result<()> {
        if self.a.is_finite() && self.b.is_finite() && self.theta.iter().all(|t| t.is_finite()) {
            Ok(())
        } else {
            Err(CvmError::InvalidArgument("spike parameters must be finite".into()))
        }
    }

    /// Number of coefficients, `2 + |θ|`.
    pub fn n_coefficients(&self) -> usize {
        self.theta.len() + 2
    }

    /// Packs as `(a, θ…, b)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.n_coefficients());
        v.push(self.a);
        v.extend_from_slice(&self.theta);
        v.push(self.b);
        v
    }

    pub fn from_slice(v: &[T]) -> Result<Self> {
        if v.len() < 2 {
            return Err(CvmError::InvalidArgument("need at least (a, b)".into()));
        }
        Self::new(v[0], v[1..v.len() - 1].to_vec(), v[v.len() - 1])
    }

    /// Linear index `ā = a + θ·s`.
    pub fn index(&self, s: &[T]) -> Result<T> {
        if s.len() != self.theta.len() {
            return Err(CvmError::InvalidArgument(format!(
                "covariate vector has {} entries, model expects {}",
                s.len(),
                self.theta.len()
            )));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(CvmError::InvalidArgument("covariates must be finite".into()));
        }
        Ok(self.a + self.theta.iter().zip(s).map(|(&t, &x)| t * x).sum::<T>())
    }
}

/// WTP distribution function at `amount` KRW.
pub fn spike_cdf<T: Scalar>(params: &SpikeParams<T>, s: &[T], amount: T) -> Result<T> {
    params.check_finite()?;
    if !amount.is_finite() {
        return Err(CvmError::InvalidArgument("bid amount must be finite".into()));
    }
    let idx = params.index(s)?;
    Ok(cdf_at(idx, params.b, amount))
}

#[inline]
fn cdf_at<T: Scalar>(index: T, b: T, amount: T) -> T {
    if amount < T::zero() {
        T::zero()
    } else if amount == T::zero() {
        logistic(-index)
    } else {
        logistic(b * scaled(amount) - index)
    }
}

/// Probability of a "yes" to a bid of `amount` KRW.
pub fn prob_yes<T: Scalar>(params: &SpikeParams<T>, s: &[T], amount: T) -> Result<T> {
    params.check_finite()?;
    if !(amount > T::zero()) {
        return Err(CvmError::InvalidArgument("bid amount must be positive".into()));
    }
    let idx = params.index(s)?;
    Ok(logistic(idx - params.b * scaled(amount)))
}

/// Probability mass at zero WTP, `1 / (1 + exp(ā))`.
pub fn spike_probability<T: Scalar>(params: &SpikeParams<T>, s: &[T]) -> Result<T> {
    Ok(logistic(-params.index(s)?))
}

/// Mean WTP in KRW, `ln(1 + exp(ā)) / b`.
pub fn mean_wtp<T: Scalar>(params: &SpikeParams<T>, s: &[T]) -> Result<T> {
    if !(params.b > T::zero()) {
        return Err(CvmError::InvalidArgument(format!(
            "mean WTP needs b > 0, got {}",
            params.b
        )));
    }
    let idx = params.index(s)?;
    Ok(softplus(idx) / params.b * T::lit(BID_SCALE))
}

/// Inverts the mean-WTP formula: the index `ā` that yields `mean_wtp` KRW
/// under bid coefficient `b`.
pub fn index_from_mean_wtp<T: Scalar>(b: T, mean_wtp: T) -> Result<T> {
    if !(b > T::zero() && mean_wtp > T::zero()) {
        return Err(CvmError::InvalidArgument("need b > 0 and a positive mean WTP".into()));
    }
    Ok((b * scaled(mean_wtp)).exp_m1().ln())
}

/// Maps an answer sequence to the interval it reveals.
pub fn outcome_to_interval<T: Scalar>(arm: Arm, bids: BidPair, outcome: Outcome) -> Result<CensorObservation<T>> {
    if outcome.arm() != arm {
        return Err(CvmError::InvalidArgument(format!(
            "outcome {outcome} is not valid for the {arm}-first arm"
        )));
    }
    let lower = T::lit(f64::from(bids.lower()));
    let upper = T::lit(f64::from(bids.upper()));
    let kind = match outcome {
        Outcome::UY | Outcome::LYY => CensorKind::Above { lo: upper },
        Outcome::UNY | Outcome::LYN => CensorKind::Between { lo: lower, hi: upper },
        Outcome::UNNY | Outcome::LNY => CensorKind::Between {
            lo: T::zero(),
            hi: lower,
        },
        Outcome::UNNN | Outcome::LNN => CensorKind::PointZero,
    };
    CensorObservation::new(kind, 1)
}

/// Probability of the censoring set under index `ā` and slope `b`.
fn term_probability<T: Scalar>(kind: CensorKind<T>, index: T, b: T) -> T {
    match kind {
        CensorKind::PointZero => logistic(-index),
        CensorKind::Above { lo } => logistic(index - b * scaled(lo)),
        CensorKind::Between { lo, hi } => {
            let z_hi = b * scaled(hi) - index;
            let z_lo = if lo > T::zero() { b * scaled(lo) - index } else { -index };
            logistic_diff(z_hi, z_lo)
        }
    }
}

/// Log-likelihood value plus optional derivatives over `(a, θ…, b)`.
pub(crate) struct Evaluation<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: Option<SquareMatrix<T>>,
    pub floored: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Order {
    Value,
    Gradient,
    Hessian,
}

/// Evaluates the log-likelihood. With `floor`, non-positive terms are
/// replaced by the precision's probability floor and counted; otherwise they
/// are a numeric-domain error.
pub(crate) fn evaluate<T: Scalar>(
    params: &SpikeParams<T>,
    data: &[Observation<T>],
    order: Order,
    floor: bool,
) -> Result<Evaluation<T>> {
    if data.is_empty() {
        return Err(CvmError::EmptyData);
    }
    params.check_finite()?;
    let k = params.n_coefficients();
    let mut value = T::zero();
    let mut gradient = vec![T::zero(); k];
    let mut hessian = (order == Order::Hessian).then(|| SquareMatrix::zeros(k));
    let mut floored = 0;
    let min_p = T::probability_floor();

    // scratch buffers: d = ∂z/∂x for z = b·A - ā, and ∇P
    let mut dir = vec![T::zero(); k];
    let mut grad_p = vec![T::zero(); k];

    for (i, obs) in data.iter().enumerate() {
        let idx = params.index(&obs.covariates)?;
        let kind = obs.censor.kind();
        let w = T::lit(f64::from(obs.censor.weight()));
        let p = term_probability(kind, idx, params.b);

        if !(p > min_p) || !p.is_finite() {
            if floor {
                value = value + w * min_p.ln();
                floored += 1;
                continue;
            }
            if !(p > T::zero()) || !p.is_finite() {
                return Err(CvmError::NumericDomain {
                    index: i,
                    observation: format!("{:?}", obs.censor),
                });
            }
        }
        value = value + w * p.ln();
        if order == Order::Value {
            continue;
        }

        // P = Σ c · σ(z(A)) (+ 1 for the right-open case)
        let pieces: [(T, T); 2] = match kind {
            CensorKind::PointZero => [(T::one(), T::zero()), (T::zero(), T::zero())],
            CensorKind::Above { lo } => [(-T::one(), scaled(lo)), (T::zero(), T::zero())],
            CensorKind::Between { lo, hi } => [(T::one(), scaled(hi)), (-T::one(), scaled(lo))],
        };

        grad_p.iter_mut().for_each(|g| *g = T::zero());
        let mut second: [(T, T); 2] = [(T::zero(), T::zero()); 2];
        for (slot, &(c, amount)) in pieces.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            let z = params.b * amount - idx;
            let (sig, comp) = (logistic(z), logistic(-z));
            let d1 = sig * comp;
            let d2 = d1 * (comp - sig);
            second[slot] = (c * d2, amount);
            fill_direction(&mut dir, &obs.covariates, amount);
            for (g, &d) in grad_p.iter_mut().zip(&dir) {
                *g = *g + c * d1 * d;
            }
        }

        for (g, &gp) in gradient.iter_mut().zip(&grad_p) {
            *g = *g + w * gp / p;
        }

        if let Some(h) = hessian.as_mut() {
            // ∇² ln P = ∇²P / P - (∇P/P)(∇P/P)ᵀ, with ∇²P = Σ c σ'' d dᵀ
            for &(c2, amount) in second.iter() {
                if c2 == T::zero() {
                    continue;
                }
                fill_direction(&mut dir, &obs.covariates, amount);
                for r in 0..k {
                    for c in 0..=r {
                        h[(r, c)] = h[(r, c)] + w * c2 * dir[r] * dir[c] / p;
                    }
                }
            }
            for r in 0..k {
                for c in 0..=r {
                    h[(r, c)] = h[(r, c)] - w * (grad_p[r] / p) * (grad_p[c] / p);
                }
            }
        }
    }

    if let Some(h) = hessian.as_mut() {
        for r in 0..k {
            for c in 0..r {
                h[(c, r)] = h[(r, c)];
            }
        }
    }
    Ok(Evaluation {
        value,
        gradient,
        hessian,
        floored,
    })
}

/// `∂z/∂(a, θ…, b)` for `z = b·A - a - θ·s`, with `A` already scaled.
#[inline]
fn fill_direction<T: Scalar>(dir: &mut [T], s: &[T], amount: T) {
    let k = dir.len();
    dir[0] = -T::one();
    for (d, &x) in dir[1..k - 1].iter_mut().zip(s) {
        *d = -x;
    }
    dir[k - 1] = amount;
}

/// Log-likelihood of the spike model over weighted observations.
pub fn log_likelihood<T: Scalar>(params: &SpikeParams<T>, data: &[Observation<T>]) -> Result<T> {
    Ok(evaluate(params, data, Order::Value, false)?.value)
}

/// Analytic gradient of [`log_likelihood`] with respect to `(a, θ…, b)`.
pub fn log_likelihood_gradient<T: Scalar>(params: &SpikeParams<T>, data: &[Observation<T>]) -> Result<Vec<T>> {
    Ok(evaluate(params, data, Order::Gradient, false)?.gradient)
}

/// Analytic Hessian of [`log_likelihood`].
pub fn log_likelihood_hessian<T: Scalar>(params: &SpikeParams<T>, data: &[Observation<T>]) -> Result<SquareMatrix<T>> {
    Ok(evaluate(params, data, Order::Hessian, false)?
        .hessian
        .expect("hessian requested"))
}
