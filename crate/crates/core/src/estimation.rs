//! Maximum-likelihood fitting of the spike model.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{CvmError, IterationTrace, Result};
use crate::linalg::SquareMatrix;
use crate::model::{self, evaluate, CensorKind, Observation, Order, SpikeParams, BID_SCALE};
use crate::scalar::{logistic, Scalar};

/// Which covariates enter the index, and how protest zeros are treated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub covariate_names: Vec<String>,
    pub include_protest_as_zero: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            covariate_names: Vec::new(),
            include_protest_as_zero: true,
        }
    }
}

impl ModelSpec {
    pub fn with_covariates<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let covariate_names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in covariate_names.iter().enumerate() {
            if n.trim().is_empty() {
                return Err(CvmError::InvalidArgument("empty covariate name".into()));
            }
            if covariate_names[..i].contains(n) {
                return Err(CvmError::InvalidArgument(format!("duplicate covariate `{n}`")));
            }
        }
        Ok(ModelSpec {
            covariate_names,
            include_protest_as_zero: true,
        })
    }

    pub fn excluding_protests(mut self) -> Self {
        self.include_protest_as_zero = false;
        self
    }

    /// Coefficient labels in parameter order: constant, covariates, bid.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.covariate_names.len() + 2);
        names.push("constant".to_owned());
        names.extend(self.covariate_names.iter().cloned());
        names.push("bid".to_owned());
        names
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions<T> {
    /// Convergence threshold on the gradient sup-norm.
    pub tol: T,
    pub max_iter: usize,
    pub start: Option<SpikeParams<T>>,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            tol: T::default_tolerance(),
            max_iter: 200,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub stat: f64,
    pub df: usize,
    pub p_value: f64,
}

/// A derived quantity with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeltaEstimate<T> {
    pub value: T,
    pub se: T,
    pub t: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitResult<T> {
    pub coefficient_names: Vec<String>,
    pub params: SpikeParams<T>,
    /// Inverse observed information over `(a, θ…, b)`.
    pub covariance: SquareMatrix<T>,
    pub log_lik: T,
    pub std_errors: Vec<T>,
    pub t_stats: Vec<T>,
    pub wald: WaldTest,
    /// Weighted sample means of the covariates; derived quantities are
    /// evaluated here.
    pub covariate_means: Vec<T>,
    pub spike: T,
    pub spike_se: T,
    pub mean_wtp: T,
    pub mean_wtp_se: T,
    pub mean_wtp_t: T,
    pub converged: bool,
    pub iterations: usize,
    pub n_respondents: u64,
}

impl<T: Scalar> FitResult<T> {
    pub fn n_coefficients(&self) -> usize {
        self.params.n_coefficients()
    }
}

fn validate<T: Scalar>(data: &[Observation<T>], spec: &ModelSpec) -> Result<()> {
    if data.is_empty() {
        return Err(CvmError::EmptyData);
    }
    let k = spec.covariate_names.len();
    if let Some(bad) = data.iter().position(|o| o.covariates.len() != k) {
        return Err(CvmError::InvalidArgument(format!(
            "observation {bad} has {} covariates, model specifies {k}",
            data[bad].covariates.len()
        )));
    }
    if data.iter().all(|o| matches!(o.censor.kind(), CensorKind::PointZero)) {
        return Err(CvmError::DegenerateData(
            "every observation is a zero response; the bid coefficient is not identified".into(),
        ));
    }
    let mut levels: Vec<T> = Vec::new();
    for o in data {
        let bounds = match o.censor.kind() {
            CensorKind::PointZero => [None, None],
            CensorKind::Above { lo } => [Some(lo), None],
            CensorKind::Between { lo, hi } => [(lo > T::zero()).then_some(lo), Some(hi)],
        };
        for v in bounds.into_iter().flatten() {
            if !levels.contains(&v) {
                levels.push(v);
            }
        }
        if levels.len() >= 2 {
            return Ok(());
        }
    }
    Err(CvmError::DegenerateData("fewer than two distinct bid levels".into()))
}

/// Start values: `a` at the logit of the observed non-zero share, `b` at the
/// reciprocal of the mean revealed bid (thousand-KRW), `θ = 0`.
pub fn default_start<T: Scalar>(data: &[Observation<T>], n_covariates: usize) -> SpikeParams<T> {
    let mut total = 0.0;
    let mut zeros = 0.0;
    let mut bid_sum = 0.0;
    let mut bid_weight = 0.0;
    for o in data {
        let w = f64::from(o.censor.weight());
        total += w;
        let bounds = match o.censor.kind() {
            CensorKind::PointZero => {
                zeros += w;
                [None, None]
            }
            CensorKind::Above { lo } => [Some(lo), None],
            CensorKind::Between { lo, hi } => [(lo > T::zero()).then_some(lo), Some(hi)],
        };
        for v in bounds.into_iter().flatten() {
            bid_sum += w * v.to_f64_lossy() / BID_SCALE;
            bid_weight += w;
        }
    }
    let share = (zeros / total).clamp(1e-3, 1.0 - 1e-3);
    let a = ((1.0 - share) / share).ln();
    let b = if bid_sum > 0.0 { bid_weight / bid_sum } else { 1.0 };
    SpikeParams {
        a: T::lit(a),
        theta: vec![T::zero(); n_covariates],
        b: T::lit(b),
    }
}

/// Maximizes the spike-model log-likelihood.
pub fn fit<T: Scalar>(data: &[Observation<T>], spec: &ModelSpec, options: &FitOptions<T>) -> Result<FitResult<T>> {
    validate(data, spec)?;
    let k = spec.covariate_names.len() + 2;
    let start = match &options.start {
        Some(s) if s.n_coefficients() != k => {
            return Err(CvmError::InvalidArgument(format!(
                "start vector has {} coefficients, model has {k}",
                s.n_coefficients()
            )))
        }
        Some(s) => s.clone(),
        None => default_start(data, k - 2),
    };

    let (params, iterations) = maximize(data, start, options)?;
    finish(data, spec, params, iterations)
}

fn sup_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

fn maximize<T: Scalar>(
    data: &[Observation<T>],
    start: SpikeParams<T>,
    options: &FitOptions<T>,
) -> Result<(SpikeParams<T>, usize)> {
    let mut x = start.to_vec();
    let mut trace = Vec::new();
    let armijo = T::lit(1e-4);
    let eps = T::epsilon();
    let mut polish = 0;

    for iter in 0..options.max_iter {
        let params = SpikeParams::from_slice(&x)?;
        let ev = evaluate(&params, data, Order::Hessian, true)?;
        let g = ev.gradient;
        let gnorm = sup_norm(&g);
        if ev.floored == 0 && gnorm <= options.tol {
            return Ok((params, iter));
        }

        let info = ev.hessian.expect("hessian requested").scaled(-T::one());
        let (dir, newton) = match info.cholesky() {
            Ok(l) => {
                let d = l.solve(&g);
                if dot(&g, &d) > T::zero() {
                    (d, true)
                } else {
                    (diagonal_ascent(&info, &g), false)
                }
            }
            Err(_) => (diagonal_ascent(&info, &g), false),
        };
        trace.push(IterationTrace {
            iteration: iter,
            log_lik: ev.value.to_f64_lossy(),
            grad_norm: gnorm.to_f64_lossy(),
            newton_step: newton,
        });

        let slope = dot(&g, &dir);
        let noise = T::lit(64.0) * eps * (T::one() + ev.value.abs());
        if newton && ev.floored == 0 && slope <= noise {
            // Decrement below the rounding noise of the objective: value
            // comparisons carry no information, take the full Newton step.
            x = x.iter().zip(&dir).map(|(&xi, &di)| xi + di).collect();
            polish += 1;
            if polish >= 2 {
                return Ok((SpikeParams::from_slice(&x)?, iter + 1));
            }
            continue;
        }
        polish = 0;
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<T> = x.iter().zip(&dir).map(|(&xi, &di)| xi + step * di).collect();
            if let Ok(p) = SpikeParams::from_slice(&cand) {
                let v = evaluate(&p, data, Order::Value, true)?.value;
                if v.is_finite() && v >= ev.value + armijo * step * slope {
                    accepted = Some(cand);
                    break;
                }
            }
            step = step * T::lit(0.5);
        }

        match accepted {
            Some(cand) => x = cand,
            None => {
                // No ascent left at working precision: accept if the Newton
                // decrement is at rounding level.
                let scale = T::one() + ev.value.abs();
                if newton && ev.floored == 0 && slope <= T::lit(1e3) * eps * scale {
                    return Ok((params, iter));
                }
                return Err(CvmError::Convergence {
                    iterations: iter + 1,
                    grad_norm: gnorm.to_f64_lossy(),
                    trace,
                });
            }
        }
    }

    let params = SpikeParams::from_slice(&x)?;
    let g = evaluate(&params, data, Order::Gradient, true)?.gradient;
    let gnorm = sup_norm(&g);
    if gnorm <= options.tol {
        return Ok((params, options.max_iter));
    }
    Err(CvmError::Convergence {
        iterations: options.max_iter,
        grad_norm: gnorm.to_f64_lossy(),
        trace,
    })
}

/// Gradient ascent preconditioned by the magnitude of the Hessian diagonal.
fn diagonal_ascent<T: Scalar>(info: &SquareMatrix<T>, g: &[T]) -> Vec<T> {
    let floor = T::lit(1e-8);
    g.iter()
        .enumerate()
        .map(|(i, &gi)| gi / info[(i, i)].abs().max(floor))
        .collect()
}

fn finish<T: Scalar>(
    data: &[Observation<T>],
    spec: &ModelSpec,
    params: SpikeParams<T>,
    iterations: usize,
) -> Result<FitResult<T>> {
    let names = spec.coefficient_names();
    let ev = evaluate(&params, data, Order::Hessian, false)?;
    let info = ev.hessian.expect("hessian requested").scaled(-T::one());
    let covariance = info.inverse_spd().map_err(|_| singular_columns(&info, &names))?;

    let std_errors: Vec<T> = covariance.diagonal().into_iter().map(T::sqrt).collect();
    let coef = params.to_vec();
    let t_stats = coef.iter().zip(&std_errors).map(|(&c, &s)| c / s).collect();
    let all: Vec<usize> = (0..coef.len()).collect();
    let wald = wald_statistic(&coef, &covariance, &all)?;

    let covariate_means = weighted_covariate_means(data, spec.covariate_names.len());
    let spike = model::spike_probability(&params, &covariate_means)?;
    let spike_grad = spike_gradient(&params, &covariate_means)?;
    let spike_se = quad_se(&covariance, &spike_grad)?;
    let wtp = delta_mean_wtp(&params, &covariance, &covariate_means)?;
    let n_respondents = data.iter().map(|o| u64::from(o.censor.weight())).sum();

    Ok(FitResult {
        coefficient_names: names,
        params,
        covariance,
        log_lik: ev.value,
        std_errors,
        t_stats,
        wald,
        covariate_means,
        spike,
        spike_se,
        mean_wtp: wtp.value,
        mean_wtp_se: wtp.se,
        mean_wtp_t: wtp.t,
        converged: true,
        iterations,
        n_respondents,
    })
}

fn singular_columns<T: Scalar>(info: &SquareMatrix<T>, names: &[String]) -> CvmError {
    let n = info.dim();
    let tiny = T::lit(1e-12);
    let mut hits: Vec<usize> = Vec::new();
    fn push(hits: &mut Vec<usize>, i: usize) {
        if !hits.contains(&i) {
            hits.push(i);
        }
    }
    for i in 0..n {
        if info[(i, i)].abs() <= tiny {
            push(&mut hits, i);
        }
    }
    let near_one = T::one() - T::lit(1e-6);
    for i in 0..n {
        for j in 0..i {
            let denom = (info[(i, i)] * info[(j, j)]).abs().sqrt();
            if denom > tiny && (info[(i, j)] / denom).abs() >= near_one {
                push(&mut hits, j);
                push(&mut hits, i);
            }
        }
    }
    if hits.is_empty() {
        // higher-order dependence: name the first column whose pivot collapses
        for m in 1..=n {
            let idx: Vec<usize> = (0..m).collect();
            if info.submatrix(&idx).cholesky().is_err() {
                push(&mut hits, m - 1);
                break;
            }
        }
    }
    CvmError::SingularHessian {
        columns: hits.into_iter().map(|i| names[i].clone()).collect(),
    }
}

fn weighted_covariate_means<T: Scalar>(data: &[Observation<T>], k: usize) -> Vec<T> {
    let mut sums = vec![T::zero(); k];
    let mut total = T::zero();
    for o in data {
        let w = T::lit(f64::from(o.censor.weight()));
        total = total + w;
        for (s, &x) in sums.iter_mut().zip(&o.covariates) {
            *s = *s + w * x;
        }
    }
    sums.into_iter().map(|s| s / total).collect()
}

/// `sqrt(gᵀ V g)` after checking `V` is positive semi-definite.
fn quad_se<T: Scalar>(cov: &SquareMatrix<T>, g: &[T]) -> Result<T> {
    cov.psd_cholesky(T::lit(1e-10))?;
    let var = cov.quad_form(g);
    let scale = g.iter().map(|x| x.abs()).sum::<T>().powi(2)
        * cov.diagonal().into_iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if var < -T::lit(1e-10) * scale {
        return Err(CvmError::NotPositiveDefinite(format!(
            "negative delta-method variance {}",
            var.to_f64_lossy()
        )));
    }
    Ok(var.max(T::zero()).sqrt())
}

/// Gradient of the mean WTP (KRW) with respect to `(a, θ…, b)` at `s`.
pub fn mean_wtp_gradient<T: Scalar>(params: &SpikeParams<T>, s: &[T]) -> Result<Vec<T>> {
    let w = model::mean_wtp(params, s)?;
    let idx = params.index(s)?;
    let d_index = T::lit(BID_SCALE) * logistic(idx) / params.b;
    let mut g = Vec::with_capacity(params.n_coefficients());
    g.push(d_index);
    g.extend(s.iter().map(|&x| x * d_index));
    g.push(-w / params.b);
    Ok(g)
}

fn spike_gradient<T: Scalar>(params: &SpikeParams<T>, s: &[T]) -> Result<Vec<T>> {
    let p = model::spike_probability(params, s)?;
    let d_index = -p * (T::one() - p);
    let mut g = Vec::with_capacity(params.n_coefficients());
    g.push(d_index);
    g.extend(s.iter().map(|&x| x * d_index));
    g.push(T::zero());
    Ok(g)
}

fn delta_mean_wtp<T: Scalar>(params: &SpikeParams<T>, cov: &SquareMatrix<T>, s: &[T]) -> Result<DeltaEstimate<T>> {
    let value = model::mean_wtp(params, s)?;
    let se = quad_se(cov, &mean_wtp_gradient(params, s)?)?;
    let t = if se > T::zero() { value / se } else { T::infinity() };
    Ok(DeltaEstimate { value, se, t })
}

/// Delta-method standard error of mean WTP at the covariate means.
pub fn delta_se_mean_wtp<T: Scalar>(fit: &FitResult<T>) -> Result<DeltaEstimate<T>> {
    delta_mean_wtp(&fit.params, &fit.covariance, &fit.covariate_means)
}

fn wald_statistic<T: Scalar>(coef: &[T], cov: &SquareMatrix<T>, which: &[usize]) -> Result<WaldTest> {
    if which.is_empty() {
        return Err(CvmError::InvalidArgument("Wald subset is empty".into()));
    }
    if let Some(&bad) = which.iter().find(|&&i| i >= coef.len()) {
        return Err(CvmError::InvalidArgument(format!(
            "coefficient index {bad} out of range (model has {})",
            coef.len()
        )));
    }
    for (i, a) in which.iter().enumerate() {
        if which[..i].contains(a) {
            return Err(CvmError::InvalidArgument(format!("coefficient {a} listed twice")));
        }
    }
    let c: Vec<T> = which.iter().map(|&i| coef[i]).collect();
    let block = cov.submatrix(which);
    let l = block
        .cholesky()
        .map_err(|e| CvmError::NotPositiveDefinite(format!("covariance block: {e}")))?;
    let stat = dot(&c, &l.solve(&c)).to_f64_lossy();
    let df = which.len();
    let p_value = ChiSquared::new(df as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN);
    Ok(WaldTest { stat, df, p_value })
}

/// Joint Wald test that the selected coefficients are all zero.
pub fn wald_joint<T: Scalar>(fit: &FitResult<T>, which: &[usize]) -> Result<WaldTest> {
    wald_statistic(&fit.params.to_vec(), &fit.covariance, which)
}

/// Mean WTP of each observation at its own covariates, in KRW.
pub fn individual_mean_wtp<T: Scalar>(params: &SpikeParams<T>, data: &[Observation<T>]) -> Result<Vec<T>> {
    data.iter().map(|o| model::mean_wtp(params, &o.covariates)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CensorObservation, Observation};
    use approx::assert_abs_diff_eq;

    fn toy() -> Vec<Observation<f64>> {
        let mk = |k, w| Observation::plain(CensorObservation::new(k, w).unwrap());
        vec![
            mk(CensorKind::PointZero, 20),
            mk(CensorKind::Between { lo: 0.0, hi: 2000.0 }, 25),
            mk(CensorKind::Between { lo: 2000.0, hi: 6000.0 }, 30),
            mk(CensorKind::Above { lo: 6000.0 }, 25),
        ]
    }

    #[test]
    fn toy_fit_hits_stationary_point() {
        let data = toy();
        let f = fit(&data, &ModelSpec::default(), &FitOptions::default()).unwrap();
        let g = model::log_likelihood_gradient(&f.params, &data).unwrap();
        assert!(g.iter().all(|x| x.abs() <= 1e-8));
        assert!(f.params.b > 0.0);
        assert_eq!(f.n_respondents, 100);
        assert_abs_diff_eq!(
            f.spike,
            model::spike_probability(&f.params, &[]).unwrap(),
            epsilon = 0.0
        );
        assert!(f.spike > 0.0 && f.spike < 1.0);
    }

    #[test]
    fn all_point_zero_is_degenerate() {
        let data = vec![Observation::plain(CensorObservation::<f64>::point_zero()); 5];
        let err = fit(&data, &ModelSpec::default(), &FitOptions::default()).unwrap_err();
        assert!(matches!(err, CvmError::DegenerateData(_)));
    }

    #[test]
    fn single_bid_level_is_degenerate() {
        let above = CensorObservation::new(CensorKind::Above { lo: 1000.0 }, 3).unwrap();
        let data = vec![
            Observation::plain(above),
            Observation::plain(CensorObservation::point_zero()),
        ];
        assert!(matches!(
            fit(&data, &ModelSpec::default(), &FitOptions::default()),
            Err(CvmError::DegenerateData(_))
        ));
    }

    #[test]
    fn wald_single_coefficient_is_t_squared() {
        let f = fit(&toy(), &ModelSpec::default(), &FitOptions::default()).unwrap();
        for i in 0..2 {
            let w = wald_joint(&f, &[i]).unwrap();
            assert_eq!(w.df, 1);
            assert_abs_diff_eq!(w.stat, f.t_stats[i].powi(2), epsilon = 1e-8 * w.stat.max(1.0));
        }
        assert!(wald_joint(&f, &[]).is_err());
        assert!(wald_joint(&f, &[5]).is_err());
    }

    #[test]
    fn wald_zero_coefficient_contributes_nothing() {
        let cov = SquareMatrix::from_rows(&[vec![0.04, 0.0], vec![0.0, 0.01]]).unwrap();
        let w = wald_statistic(&[0.0, 0.3], &cov, &[0, 1]).unwrap();
        assert_abs_diff_eq!(w.stat, 0.3f64.powi(2) / 0.01, epsilon = 1e-12);
        let only_zero = wald_statistic(&[0.0, 0.3], &cov, &[0]).unwrap();
        assert_eq!(only_zero.stat, 0.0);
        assert_abs_diff_eq!(only_zero.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_covariance_gives_zero_se() {
        let mut f = fit(&toy(), &ModelSpec::default(), &FitOptions::default()).unwrap();
        f.covariance = SquareMatrix::zeros(2);
        let d = delta_se_mean_wtp(&f).unwrap();
        assert_eq!(d.se, 0.0);
        assert_eq!(d.value, f.mean_wtp);
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let mut f = fit(&toy(), &ModelSpec::default(), &FitOptions::default()).unwrap();
        f.covariance = SquareMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(matches!(delta_se_mean_wtp(&f), Err(CvmError::NotPositiveDefinite(_))));
    }

    #[test]
    fn wtp_gradient_matches_finite_differences() {
        let p = SpikeParams::new(0.4, vec![0.3], 0.22).unwrap();
        let s = [1.5];
        let g = mean_wtp_gradient(&p, &s).unwrap();
        let x = p.to_vec();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += h;
            dn[i] -= h;
            let f = |v: &[f64]| model::mean_wtp(&SpikeParams::from_slice(v).unwrap(), &s).unwrap();
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            assert!((g[i] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "component {i}");
        }
    }

    #[test]
    fn collinear_covariates_are_named() {
        let mut data = Vec::new();
        for (k, kind) in [
            CensorKind::PointZero,
            CensorKind::Between { lo: 0.0, hi: 1000.0 },
            CensorKind::Between { lo: 1000.0, hi: 3000.0 },
            CensorKind::Above { lo: 3000.0 },
        ]
        .into_iter()
        .enumerate()
        {
            for j in 0..3 {
                let x = (k + j) as f64;
                let c = CensorObservation::new(kind, 4 + j as u32).unwrap();
                data.push(Observation::new(c, vec![x, 2.0 * x]));
            }
        }
        let spec = ModelSpec::with_covariates(["age", "age2x"]).unwrap();
        let opts = FitOptions {
            max_iter: 50,
            ..FitOptions::default()
        };
        match fit(&data, &spec, &opts) {
            Err(CvmError::SingularHessian { columns }) => {
                assert!(columns.contains(&"age".to_owned()));
                assert!(columns.contains(&"age2x".to_owned()));
            }
            Err(CvmError::Convergence { .. }) => {}
            other => panic!("expected a singularity diagnostic, got {other:?}"),
        }
    }

    #[test]
    fn spec_rejects_duplicate_names() {
        assert!(ModelSpec::with_covariates(["x", "x"]).is_err());
        assert_eq!(
            ModelSpec::with_covariates(["x"]).unwrap().coefficient_names(),
            vec!["constant", "x", "bid"]
        );
    }
}
