//! Survival smoothing of the raw absorption output.
//!
//! Raw cure probabilities from a shallow portfolio routinely violate the
//! properties a cure-rate curve must have (start at one, vanish at the
//! write-off threshold, never increase). A Weibull survival curve
//!
//! ```text
//! S(x) = exp(-(x / lambda)^k)
//! ```
//!
//! is fitted through the per-month cure probabilities and evaluated at the
//! NPL threshold to produce the portfolio cure rate. The shape parameter
//! carries diagnostic value of its own: `k > 1` means the hazard of
//! failing grows with delinquency age, and a one-sided test of `k <= 1`
//! tells whether the data actually supports that reading.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::absorption::AbsorptionResult;
use crate::diagnostics::{Warning, WarningCode};
use crate::loan_tape::{ChainConfig, StateIndex};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SurvivalError {
    #[error("need at least {needed} usable points for the fit, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("all usable abscissae coincide; the regression design is degenerate")]
    DegenerateDesign,
    #[error("estimated shape parameter {k} is not positive; the data does not resemble a survival curve")]
    InvalidShape { k: f64 },
    #[error("Gauss-Newton refinement did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("survival points: {0}")]
    BadPoints(String),
    #[error(transparent)]
    Absorption(#[from] crate::absorption::AbsorptionError),
}

/// Ordered survival observations, anchored at `(0, 1)` and `(N, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalPoints<T> {
    points: Vec<(T, T)>,
    delta: T,
}

impl<T: Scalar> SurvivalPoints<T> {
    /// Validates ordering, range and the two anchor points.
    pub fn new(points: Vec<(T, T)>, delta: T) -> Result<Self, SurvivalError> {
        if points.len() < 2 {
            return Err(SurvivalError::BadPoints("need at least the two anchors".into()));
        }
        let first = points[0];
        let last = points[points.len() - 1];
        if !(first.0 == T::zero() && first.1 == T::one()) {
            return Err(SurvivalError::BadPoints("first point must be (0, 1)".into()));
        }
        if last.1 != T::zero() {
            return Err(SurvivalError::BadPoints(
                "last point must hit zero survival at the write-off threshold".into(),
            ));
        }
        for pair in points.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(SurvivalError::BadPoints(
                    "abscissae must be strictly increasing".into(),
                ));
            }
        }
        for &(x, s) in &points {
            if s < T::zero() || s > T::one() || !x.is_finite() {
                return Err(SurvivalError::BadPoints(format!(
                    "point ({x}, {s}) outside the unit band"
                )));
            }
        }
        Ok(SurvivalPoints { points, delta })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// Largest abscissa; the write-off threshold by construction.
    pub fn horizon(&self) -> T {
        self.points[self.points.len() - 1].0
    }
}

/// Assembles survival points from the absorption analysis: `(0, 1)`, the
/// forborne point at `delta`, one point per past-due month, and `(N, 0)`.
pub fn build_points<T: Scalar>(
    result: &AbsorptionResult<T>,
    cfg: &ChainConfig<T>,
) -> Result<SurvivalPoints<T>, SurvivalError> {
    let mut points = Vec::with_capacity(cfg.n_transient() + 2);
    points.push((T::zero(), T::one()));
    points.push((cfg.delta, result.cure_probability(StateIndex::FORBORNE)?));
    for month in 1..cfg.n_writeoff {
        let state = StateIndex::past_due(month);
        points.push((T::from_f64(month as f64), result.cure_probability(state)?));
    }
    points.push((T::from_f64(cfg.n_writeoff as f64), T::zero()));
    SurvivalPoints::new(points, cfg.delta)
}

/// Warns for every adjacent pair of raw points that violates the
/// non-increasing requirement. Smoothing is the remedy, so this never
/// fails.
pub fn check_conditions<T: Scalar>(points: &SurvivalPoints<T>) -> Vec<Warning> {
    let mut warnings = Vec::new();
    for pair in points.points().windows(2) {
        let ((x_lo, s_lo), (x_hi, s_hi)) = (pair[0], pair[1]);
        if s_hi > s_lo {
            warnings.push(Warning::new(
                WarningCode::NonMonotoneSurvivalPoints,
                format!(
                    "raw survival rises from ({x_lo}, {s_lo}) to ({x_hi}, {s_hi})"
                ),
            ));
        }
    }
    warnings
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitMethod {
    /// Closed-form least squares on `ln(-ln s) = k ln x - k ln lambda`.
    #[default]
    LoglogOls,
    /// Gauss-Newton least squares on the survival values themselves,
    /// initialized from the log-log fit.
    Nls,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::LoglogOls => "loglog_ols",
            FitMethod::Nls => "nls",
        }
    }
}

/// Scale on which the fit's goodness statistics were computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RSquaredScale {
    LogLog,
    Survival,
}

impl RSquaredScale {
    pub fn as_str(self) -> &'static str {
        match self {
            RSquaredScale::LogLog => "loglog",
            RSquaredScale::Survival => "survival",
        }
    }
}

/// Fitted Weibull survival curve with regression statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct WeibullFit<T> {
    pub lambda: T,
    pub k: T,
    pub se_lambda: T,
    pub se_k: T,
    pub t_lambda: T,
    pub t_k: T,
    pub r_squared: T,
    pub r_squared_scale: RSquaredScale,
    /// One-sided p-value for the hypothesis `k <= 1` against `k > 1`.
    pub p_one_sided_k_le_1: T,
    pub df: usize,
    pub n_points_used: usize,
    pub method: FitMethod,
}

impl<T: Scalar> WeibullFit<T> {
    /// Survival value `exp(-(x / lambda)^k)`; exactly one at the origin.
    pub fn survival_at(&self, x: T) -> T {
        let x = x.max(T::zero());
        if x == T::zero() {
            return T::one();
        }
        (-(x / self.lambda).powf(self.k)).exp()
    }

    /// Hazard rate `(k / lambda) * (x / lambda)^(k - 1)` for `x > 0`.
    pub fn hazard_at(&self, x: T) -> T {
        (self.k / self.lambda) * (x / self.lambda).powf(self.k - T::one())
    }
}

/// Cure rate of the portfolio: the fitted survival at the NPL threshold.
pub fn cure_rate<T: Scalar>(fit: &WeibullFit<T>, cfg: &ChainConfig<T>) -> T {
    fit.survival_at(T::from_f64(cfg.npl_threshold as f64))
}

/// Hazard-rate samples plus the shape verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardProfile<T> {
    pub samples: Vec<(T, T)>,
    /// True exactly when `k > 1`: failure intensity grows with age.
    pub monotone_increasing: bool,
}

/// Evaluates the hazard rate on a grid of positive abscissae.
pub fn hazard_profile<T: Scalar>(fit: &WeibullFit<T>, grid: &[T]) -> HazardProfile<T> {
    let samples = grid
        .iter()
        .filter(|&&x| x > T::zero())
        .map(|&x| (x, fit.hazard_at(x)))
        .collect();
    HazardProfile {
        samples,
        monotone_increasing: fit.k > T::one(),
    }
}

/// Default hazard grid: quarter-month steps up to the write-off threshold.
pub fn default_hazard_grid<T: Scalar>(cfg: &ChainConfig<T>) -> Vec<T> {
    let quarter = T::from_f64(0.25);
    let steps = cfg.n_writeoff * 4;
    (1..=steps)
        .map(|i| quarter * T::from_f64(i as f64))
        .collect()
}

/// One-sided p-value for `H0: k <= 1` using a Student-t reference with the
/// regression's residual degrees of freedom.
pub fn one_sided_p_k_le_1(k: f64, se_k: f64, df: usize) -> f64 {
    if !(se_k > 0.0) || df == 0 {
        // a perfect fit leaves no sampling noise: the verdict is certain
        return if k > 1.0 { 0.0 } else { 1.0 };
    }
    let t = (k - 1.0) / se_k;
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid Student-t parameters");
    1.0 - dist.cdf(t)
}

/// Fits the Weibull survival curve to the points.
///
/// `clip_epsilon = 0` (the default) drops points whose log-log transform is
/// undefined — the two anchors, and any interior point with survival
/// exactly zero or one. A positive `clip_epsilon` keeps them instead,
/// clipping survival into `[eps, 1-eps]` and moving the origin to
/// `delta / 2`.
pub fn fit_weibull<T: Scalar>(
    points: &SurvivalPoints<T>,
    method: FitMethod,
    clip_epsilon: T,
) -> Result<WeibullFit<T>, SurvivalError> {
    let loglog = fit_loglog(points, clip_epsilon)?;
    match method {
        FitMethod::LoglogOls => Ok(loglog),
        FitMethod::Nls => fit_nls(points, &loglog),
    }
}

fn fit_loglog<T: Scalar>(
    points: &SurvivalPoints<T>,
    clip_epsilon: T,
) -> Result<WeibullFit<T>, SurvivalError> {
    let zero = T::zero();
    let one = T::one();
    let clip = clip_epsilon > zero;
    let mut transformed: Vec<(T, T)> = Vec::new();
    for &(x, s) in points.points() {
        let (x, s) = if clip {
            let x = if x == zero { points.delta() / T::from_f64(2.0) } else { x };
            let s = s.max(clip_epsilon).min(one - clip_epsilon);
            (x, s)
        } else {
            if x == zero || s <= zero || s >= one {
                continue;
            }
            (x, s)
        };
        transformed.push((x.ln(), (-(s.ln())).ln()));
    }

    let n = transformed.len();
    if n < 3 {
        return Err(SurvivalError::TooFewPoints { needed: 3, got: n });
    }
    let n_t = T::from_f64(n as f64);
    let u_mean = transformed.iter().map(|&(u, _)| u).sum::<T>() / n_t;
    let y_mean = transformed.iter().map(|&(_, y)| y).sum::<T>() / n_t;
    let s_uu = transformed
        .iter()
        .map(|&(u, _)| (u - u_mean) * (u - u_mean))
        .sum::<T>();
    let s_uy = transformed
        .iter()
        .map(|&(u, y)| (u - u_mean) * (y - y_mean))
        .sum::<T>();
    if s_uu <= zero {
        return Err(SurvivalError::DegenerateDesign);
    }

    let k = s_uy / s_uu;
    let intercept = y_mean - k * u_mean;
    if !(k > zero) {
        return Err(SurvivalError::InvalidShape { k: k.to_f64_lossy() });
    }
    let lambda = (-intercept / k).exp();

    let ssr = transformed
        .iter()
        .map(|&(u, y)| {
            let e = y - (intercept + k * u);
            e * e
        })
        .sum::<T>();
    let sst = transformed
        .iter()
        .map(|&(_, y)| (y - y_mean) * (y - y_mean))
        .sum::<T>();
    let r_squared = if sst > zero {
        (one - ssr / sst).max(zero).min(one)
    } else {
        one
    };

    let df = n - 2;
    let sigma2 = ssr / T::from_f64(df as f64);
    let var_k = sigma2 / s_uu;
    let var_intercept = sigma2 * (one / n_t + u_mean * u_mean / s_uu);
    let cov = -sigma2 * u_mean / s_uu;
    // delta method for lambda = exp(-intercept / k):
    // gradient (-lambda/k, lambda*intercept/k^2) w.r.t. (intercept, k)
    let g_a = -lambda / k;
    let g_k = lambda * intercept / (k * k);
    let var_lambda = g_a * g_a * var_intercept + g_k * g_k * var_k + T::from_f64(2.0) * g_a * g_k * cov;
    let se_k = var_k.max(zero).sqrt();
    let se_lambda = var_lambda.max(zero).sqrt();

    Ok(WeibullFit {
        lambda,
        k,
        se_lambda,
        se_k,
        t_lambda: safe_ratio(lambda, se_lambda),
        t_k: safe_ratio(k, se_k),
        r_squared,
        r_squared_scale: RSquaredScale::LogLog,
        p_one_sided_k_le_1: T::from_f64(one_sided_p_k_le_1(
            k.to_f64_lossy(),
            se_k.to_f64_lossy(),
            df,
        )),
        df,
        n_points_used: n,
        method: FitMethod::LoglogOls,
    })
}

const NLS_MAX_ITERATIONS: usize = 200;
const NLS_STEP_TOLERANCE: f64 = 1e-10;

fn fit_nls<T: Scalar>(
    points: &SurvivalPoints<T>,
    init: &WeibullFit<T>,
) -> Result<WeibullFit<T>, SurvivalError> {
    let zero = T::zero();
    let one = T::one();
    let data = points.points();
    let n = data.len();

    let sum_squares = |lambda: T, k: T| -> T {
        data.iter()
            .map(|&(x, s)| {
                let r = s - weibull_survival(x, lambda, k);
                r * r
            })
            .sum()
    };

    let mut lambda = init.lambda;
    let mut k = init.k;
    let mut current = sum_squares(lambda, k);
    let tolerance = T::from_f64(NLS_STEP_TOLERANCE);
    let mut converged = false;

    for _ in 0..NLS_MAX_ITERATIONS {
        // normal equations of the linearized problem
        let mut jtj = [[zero; 2]; 2];
        let mut jtr = [zero; 2];
        for &(x, s) in data {
            let (f, d_lambda, d_k) = weibull_with_gradient(x, lambda, k);
            let r = s - f;
            jtj[0][0] = jtj[0][0] + d_lambda * d_lambda;
            jtj[0][1] = jtj[0][1] + d_lambda * d_k;
            jtj[1][1] = jtj[1][1] + d_k * d_k;
            jtr[0] = jtr[0] + d_lambda * r;
            jtr[1] = jtr[1] + d_k * r;
        }
        jtj[1][0] = jtj[0][1];
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() <= zero {
            return Err(SurvivalError::NonConvergence {
                iterations: NLS_MAX_ITERATIONS,
            });
        }
        let mut step_lambda = (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let mut step_k = (jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let full_step = step_lambda.abs().max(step_k.abs());

        // halve the step until it keeps the parameters positive and does
        // not increase the residual
        let mut accepted = false;
        for _ in 0..60 {
            let cand_lambda = lambda + step_lambda;
            let cand_k = k + step_k;
            if cand_lambda > zero && cand_k > zero {
                let cand = sum_squares(cand_lambda, cand_k);
                if cand <= current {
                    lambda = cand_lambda;
                    k = cand_k;
                    current = cand;
                    accepted = true;
                    break;
                }
            }
            step_lambda = step_lambda / T::from_f64(2.0);
            step_k = step_k / T::from_f64(2.0);
        }
        if !accepted {
            if full_step < tolerance {
                // stuck at floating-point noise around the optimum
                converged = true;
                break;
            }
            return Err(SurvivalError::NonConvergence {
                iterations: NLS_MAX_ITERATIONS,
            });
        }
        if step_lambda.abs().max(step_k.abs()) < tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SurvivalError::NonConvergence {
            iterations: NLS_MAX_ITERATIONS,
        });
    }

    // goodness of fit and linearized covariance on the survival scale
    let s_mean = data.iter().map(|&(_, s)| s).sum::<T>() / T::from_f64(n as f64);
    let ssr = sum_squares(lambda, k);
    let sst = data
        .iter()
        .map(|&(_, s)| (s - s_mean) * (s - s_mean))
        .sum::<T>();
    let r_squared = if sst > zero {
        (one - ssr / sst).max(zero).min(one)
    } else {
        one
    };
    let df = n.saturating_sub(2);
    let sigma2 = if df > 0 { ssr / T::from_f64(df as f64) } else { zero };
    let mut jtj = [[zero; 2]; 2];
    for &(x, _) in data {
        let (_, d_lambda, d_k) = weibull_with_gradient(x, lambda, k);
        jtj[0][0] = jtj[0][0] + d_lambda * d_lambda;
        jtj[0][1] = jtj[0][1] + d_lambda * d_k;
        jtj[1][1] = jtj[1][1] + d_k * d_k;
    }
    jtj[1][0] = jtj[0][1];
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let (se_lambda, se_k) = if det > zero {
        (
            (sigma2 * jtj[1][1] / det).max(zero).sqrt(),
            (sigma2 * jtj[0][0] / det).max(zero).sqrt(),
        )
    } else {
        (zero, zero)
    };

    Ok(WeibullFit {
        lambda,
        k,
        se_lambda,
        se_k,
        t_lambda: safe_ratio(lambda, se_lambda),
        t_k: safe_ratio(k, se_k),
        r_squared,
        r_squared_scale: RSquaredScale::Survival,
        p_one_sided_k_le_1: T::from_f64(one_sided_p_k_le_1(
            k.to_f64_lossy(),
            se_k.to_f64_lossy(),
            df,
        )),
        df,
        n_points_used: n,
        method: FitMethod::Nls,
    })
}

fn weibull_survival<T: Scalar>(x: T, lambda: T, k: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    (-(x / lambda).powf(k)).exp()
}

/// Model value and partial derivatives w.r.t. `(lambda, k)`; both
/// derivatives vanish at the origin.
fn weibull_with_gradient<T: Scalar>(x: T, lambda: T, k: T) -> (T, T, T) {
    if x <= T::zero() {
        return (T::one(), T::zero(), T::zero());
    }
    let ratio = x / lambda;
    let w = ratio.powf(k);
    let f = (-w).exp();
    let d_lambda = f * k * w / lambda;
    let d_k = -f * w * ratio.ln();
    (f, d_lambda, d_k)
}

fn safe_ratio<T: Scalar>(value: T, se: T) -> T {
    if se > T::zero() {
        value / se
    } else {
        T::infinity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn example_points() -> SurvivalPoints<f64> {
        SurvivalPoints::new(
            vec![
                (0.0, 1.0),
                (0.5, 0.37),
                (1.0, 0.52),
                (2.0, 0.398),
                (3.0, 0.155),
                (4.0, 0.038),
                (5.0, 0.021),
                (6.0, 0.021),
                (7.0, 0.01),
                (8.0, 0.0),
            ],
            0.5,
        )
        .unwrap()
    }

    fn synthetic_points(lambda: f64, k: f64, n: usize) -> SurvivalPoints<f64> {
        let mut pts = vec![(0.0, 1.0)];
        for i in 1..=n {
            let x = i as f64;
            pts.push((x, (-(x / lambda).powf(k)).exp()));
        }
        pts.push((n as f64 + 1.0, 0.0));
        SurvivalPoints::new(pts, 0.5).unwrap()
    }

    #[test]
    fn loglog_recovers_exact_weibull() {
        let points = synthetic_points(2.0, 1.5, 7);
        let fit = fit_weibull(&points, FitMethod::LoglogOls, 0.0).unwrap();
        assert_abs_diff_eq!(fit.lambda, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.k, 1.5, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-9);
        assert_eq!(fit.n_points_used, 7);
        assert_eq!(fit.df, 5);
    }

    /// The zero-survival anchor is not on the true curve, so the survival-
    /// scale optimum sits slightly off (2, 1.5). The frozen values come
    /// from an independent Levenberg-Marquardt run over the same points.
    #[test]
    fn nls_matches_independent_optimum() {
        let points = synthetic_points(2.0, 1.5, 7);
        let fit = fit_weibull(&points, FitMethod::Nls, 0.0).unwrap();
        assert_abs_diff_eq!(fit.lambda, 1.999997648949, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.k, 1.500019280714, epsilon = 1e-8);
        assert_eq!(fit.method, FitMethod::Nls);
        assert_eq!(fit.r_squared_scale, RSquaredScale::Survival);
        // all points including the anchors are consumed on the survival scale
        assert_eq!(fit.n_points_used, 9);

        // the refinement can only improve the survival-scale residual
        let loglog = fit_weibull(&points, FitMethod::LoglogOls, 0.0).unwrap();
        let ssr = |f: &WeibullFit<f64>| -> f64 {
            points
                .points()
                .iter()
                .map(|&(x, s)| (s - f.survival_at(x)).powi(2))
                .sum()
        };
        assert!(ssr(&fit) <= ssr(&loglog) + 1e-15);
    }

    /// Frozen output of an independent least-squares computation over the
    /// eight usable example points (anchors excluded, log-log transform,
    /// unweighted). The implementation must match it to ~1e-9.
    #[test]
    fn loglog_matches_independent_regression_oracle() {
        let fit = fit_weibull(&example_points(), FitMethod::LoglogOls, 0.0).unwrap();
        assert_eq!(fit.n_points_used, 8);
        assert_eq!(fit.df, 6);
        assert_abs_diff_eq!(fit.k, 0.737701072946468, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.lambda, 1.043668156810509, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.r_squared, 0.788384684438507, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.se_k, 0.156030409635973, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.se_lambda, 0.281634402771091, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.t_k, 4.727931399190458, epsilon = 1e-7);
        assert_abs_diff_eq!(fit.t_lambda, 3.705755215064369, epsilon = 1e-7);
        assert_abs_diff_eq!(fit.p_one_sided_k_le_1, 0.928127519097879, epsilon = 1e-9);
    }

    #[test]
    fn clip_epsilon_consumes_the_anchors() {
        let fit = fit_weibull(&example_points(), FitMethod::LoglogOls, 1e-6).unwrap();
        assert_eq!(fit.n_points_used, 10);
        assert_eq!(fit.df, 8);
        assert!(fit.lambda > 0.0 && fit.k > 0.0);
    }

    #[test]
    fn survival_at_known_values() {
        let fit = WeibullFit {
            lambda: 1.51,
            k: 1.14,
            se_lambda: 0.0,
            se_k: 0.0,
            t_lambda: f64::INFINITY,
            t_k: f64::INFINITY,
            r_squared: 1.0,
            r_squared_scale: RSquaredScale::LogLog,
            p_one_sided_k_le_1: 0.0,
            df: 0,
            n_points_used: 0,
            method: FitMethod::LoglogOls,
        };
        assert_abs_diff_eq!(fit.survival_at(3.0), 0.1126, epsilon = 2e-3);
        assert_eq!(fit.survival_at(0.0), 1.0);

        let exponential = WeibullFit { lambda: 1.0, k: 1.0, ..fit.clone() };
        assert_abs_diff_eq!(exponential.survival_at(1.0), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn cure_rate_reads_the_npl_threshold() {
        let cfg = ChainConfig::<f64>::new(8);
        // lambda chosen so that (3 / lambda)^1 = ln 2 -> survival 0.5 at 3
        let fit = WeibullFit {
            lambda: 3.0 / std::f64::consts::LN_2,
            k: 1.0,
            se_lambda: 0.0,
            se_k: 0.0,
            t_lambda: f64::INFINITY,
            t_k: f64::INFINITY,
            r_squared: 1.0,
            r_squared_scale: RSquaredScale::LogLog,
            p_one_sided_k_le_1: 0.0,
            df: 0,
            n_points_used: 0,
            method: FitMethod::LoglogOls,
        };
        assert_abs_diff_eq!(cure_rate(&fit, &cfg), 0.5, epsilon = 1e-12);

        // extreme shape: survival is step-like, still ~1 well inside lambda
        let steep = WeibullFit { lambda: 10.0, k: 50.0, ..fit };
        assert!(cure_rate(&steep, &cfg) > 0.999_999);
    }

    #[test]
    fn wald_p_value_matches_reference_statistics() {
        // shape 1.14 with the standard error implied by t = 15.03 and df 8
        let p = one_sided_p_k_le_1(1.14, 1.14 / 15.03, 8);
        assert_abs_diff_eq!(p, 0.049, epsilon = 0.006);
        assert_abs_diff_eq!(p, 0.051067190954261, epsilon = 1e-9);
        // k below one can never reject
        assert!(one_sided_p_k_le_1(0.9, 0.05, 8) > 0.5);
    }

    #[test]
    fn hazard_profile_shapes() {
        let base = WeibullFit {
            lambda: 1.0,
            k: 1.0,
            se_lambda: 0.0,
            se_k: 0.0,
            t_lambda: f64::INFINITY,
            t_k: f64::INFINITY,
            r_squared: 1.0,
            r_squared_scale: RSquaredScale::LogLog,
            p_one_sided_k_le_1: 0.0,
            df: 0,
            n_points_used: 0,
            method: FitMethod::LoglogOls,
        };
        let grid: Vec<f64> = (1..=7).map(|i| i as f64).collect();

        let constant = hazard_profile(&WeibullFit { lambda: 2.0, ..base.clone() }, &grid);
        assert!(!constant.monotone_increasing);
        for &(_, h) in &constant.samples {
            assert_abs_diff_eq!(h, 0.5, epsilon = 1e-12);
        }

        let rising = hazard_profile(&WeibullFit { lambda: 1.51, k: 1.14, ..base.clone() }, &grid);
        assert!(rising.monotone_increasing);
        assert!(rising.samples.windows(2).all(|w| w[1].1 > w[0].1));

        let falling = hazard_profile(&WeibullFit { k: 0.5, ..base }, &grid);
        assert!(!falling.monotone_increasing);
        assert!(falling.samples.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn check_conditions_flags_the_inversion() {
        let warnings = check_conditions(&example_points());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("(0.5, 0.37)"));
        assert!(warnings[0].message.contains("(1, 0.52)"));

        let decreasing = synthetic_points(2.0, 1.5, 7);
        assert!(check_conditions(&decreasing).is_empty());

        // weakly constant interior is fine
        let flat = SurvivalPoints::new(
            vec![(0.0, 1.0), (1.0, 0.4), (2.0, 0.4), (3.0, 0.0)],
            0.5,
        )
        .unwrap();
        assert!(check_conditions(&flat).is_empty());
    }

    #[test]
    fn degenerate_inputs_error_cleanly() {
        // three identical abscissae cannot happen inside SurvivalPoints,
        // so degeneracy is only reachable when too few points survive
        let sparse = SurvivalPoints::new(vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0)], 0.5).unwrap();
        assert!(matches!(
            fit_weibull(&sparse, FitMethod::LoglogOls, 0.0),
            Err(SurvivalError::TooFewPoints { got: 1, .. })
        ));

        // increasing survival produces a negative slope
        let rising = SurvivalPoints::new(
            vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.5), (3.0, 0.9), (4.0, 0.0)],
            0.5,
        )
        .unwrap();
        assert!(matches!(
            fit_weibull(&rising, FitMethod::LoglogOls, 0.0),
            Err(SurvivalError::InvalidShape { .. })
        ));
    }

    #[test]
    fn points_validation() {
        assert!(SurvivalPoints::new(vec![(0.0, 1.0), (1.0, 0.0)], 0.5).is_ok());
        assert!(SurvivalPoints::new(vec![(0.0, 0.9), (1.0, 0.0)], 0.5).is_err());
        assert!(SurvivalPoints::new(vec![(0.0, 1.0), (1.0, 0.1)], 0.5).is_err());
        assert!(SurvivalPoints::new(
            vec![(0.0, 1.0), (2.0, 0.5), (1.0, 0.0)],
            0.5
        )
        .is_err());
        assert!(SurvivalPoints::new(
            vec![(0.0, 1.0), (1.0, 1.5), (2.0, 0.0)],
            0.5
        )
        .is_err());
    }

    fn arbitrary_fit() -> impl Strategy<Value = WeibullFit<f64>> {
        (0.1f64..10.0, 0.1f64..8.0).prop_map(|(lambda, k)| WeibullFit {
            lambda,
            k,
            se_lambda: 0.0,
            se_k: 0.0,
            t_lambda: f64::INFINITY,
            t_k: f64::INFINITY,
            r_squared: 1.0,
            r_squared_scale: RSquaredScale::LogLog,
            p_one_sided_k_le_1: 0.5,
            df: 0,
            n_points_used: 0,
            method: FitMethod::LoglogOls,
        })
    }

    proptest! {
        /// Survival strictly decreases over reasonable abscissae.
        #[test]
        fn survival_is_strictly_decreasing(
            fit in arbitrary_fit(),
            x in 1e-3f64..50.0,
            factor in 1.01f64..4.0,
        ) {
            let s_lo = fit.survival_at(x);
            let s_hi = fit.survival_at(x * factor);
            prop_assert!(s_hi <= s_lo);
            if s_lo > 1e-12 {
                prop_assert!(s_hi < s_lo, "s({x}) = {s_lo}, s({}) = {s_hi}", x * factor);
            }
        }

        /// The monotone-hazard flag is exactly the sign of k - 1.
        #[test]
        fn hazard_flag_tracks_shape(fit in arbitrary_fit()) {
            let profile = hazard_profile(&fit, &[0.5, 1.0, 2.0]);
            prop_assert_eq!(profile.monotone_increasing, fit.k > 1.0);
        }

        /// Rescaling the time axis by c scales lambda by c and leaves the
        /// shape untouched.
        #[test]
        fn time_unit_invariance(c in 0.2f64..5.0) {
            let base = synthetic_points(2.0, 1.3, 7);
            let scaled_pts: Vec<(f64, f64)> = base
                .points()
                .iter()
                .map(|&(x, s)| (x * c, s))
                .collect();
            let scaled = SurvivalPoints::new(scaled_pts, 0.5 * c).unwrap();
            let fit_base = fit_weibull(&base, FitMethod::LoglogOls, 0.0).unwrap();
            let fit_scaled = fit_weibull(&scaled, FitMethod::LoglogOls, 0.0).unwrap();
            prop_assert!((fit_scaled.k - fit_base.k).abs() < 1e-9);
            prop_assert!((fit_scaled.lambda - fit_base.lambda * c).abs() < 1e-9 * c.max(1.0));
        }

        /// R-squared stays in the unit interval for noisy but valid data.
        #[test]
        fn r_squared_bounded(noise in proptest::collection::vec(-0.2f64..0.2, 6))
        {
            let mut pts = vec![(0.0, 1.0)];
            for (i, eps) in noise.iter().enumerate() {
                let x = (i + 1) as f64;
                let s = ((-(x / 3.0f64).powf(1.2)).exp() * (1.0 + eps)).clamp(0.01, 0.99);
                pts.push((x, s));
            }
            pts.push((7.0, 0.0));
            let points = SurvivalPoints::new(pts, 0.5).unwrap();
            match fit_weibull(&points, FitMethod::LoglogOls, 0.0) {
                Ok(fit) => prop_assert!((0.0..=1.0).contains(&fit.r_squared)),
                Err(SurvivalError::InvalidShape { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
            }
        }
    }
}
