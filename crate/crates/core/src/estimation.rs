//! Two-step conditional maximum likelihood.
//!
//! For every candidate threshold the six continuous coefficients are
//! maximized with the analytic score; the threshold estimate is the
//! candidate with the largest profile log-likelihood. Restricted models
//! (no threshold, or `b₂ = 0`) are linear reparameterizations `θ = J·φ` of
//! the full vector and reuse the same likelihood code.

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::likelihood::{g_hat, log_likelihood, loglik_and_score, NUM_PARAMS};
use crate::model::{CountSeries, Regime, SetparParams};
use crate::optimizer::{maximize_multistart, ActiveConstraint, FeasibleRegion, DEFAULT_SLACK};

/// Minimum number of visits to each regime for a grid candidate to be fitted.
pub const MIN_REGIME_OBS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Two regimes, six free coefficients.
    Setpar,
    /// One regime `(δ, α, β)`.
    Par,
    /// Two regimes with `b₂ = 0`.
    #[serde(rename = "setpar-b2zero")]
    SetparB2Zero,
}

impl ModelKind {
    pub fn num_free(self) -> usize {
        match self {
            ModelKind::Setpar => 6,
            ModelKind::Par => 3,
            ModelKind::SetparB2Zero => 5,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Setpar => &["d1", "a1", "b1", "d2", "a2", "b2"],
            ModelKind::Par => &["delta", "alpha", "beta"],
            ModelKind::SetparB2Zero => &["d1", "a1", "b1", "d2", "a2"],
        }
    }

    pub fn has_threshold(self) -> bool {
        self != ModelKind::Par
    }

    pub fn region(self, eps: f64) -> FeasibleRegion {
        match self {
            ModelKind::Setpar => FeasibleRegion::setpar(eps),
            ModelKind::Par => FeasibleRegion::par(eps),
            ModelKind::SetparB2Zero => FeasibleRegion::setpar_b2_zero(eps),
        }
    }

    /// `J` in `θ = J·φ`, of shape `6 × k`.
    pub fn jacobian(self) -> DMatrix<f64> {
        match self {
            ModelKind::Setpar => DMatrix::identity(6, 6),
            ModelKind::Par => DMatrix::from_fn(6, 3, |i, j| if i % 3 == j { 1.0 } else { 0.0 }),
            ModelKind::SetparB2Zero => DMatrix::from_fn(6, 5, |i, j| if i == j { 1.0 } else { 0.0 }),
        }
    }

    pub fn embed(self, phi: &[f64]) -> [f64; NUM_PARAMS] {
        match self {
            ModelKind::Setpar => [phi[0], phi[1], phi[2], phi[3], phi[4], phi[5]],
            ModelKind::Par => [phi[0], phi[1], phi[2], phi[0], phi[1], phi[2]],
            ModelKind::SetparB2Zero => [phi[0], phi[1], phi[2], phi[3], phi[4], 0.0],
        }
    }

    fn pull_back_score(self, s: &[f64; NUM_PARAMS]) -> Vec<f64> {
        match self {
            ModelKind::Setpar => s.to_vec(),
            ModelKind::Par => vec![s[0] + s[3], s[1] + s[4], s[2] + s[5]],
            ModelKind::SetparB2Zero => s[..5].to_vec(),
        }
    }

    /// Interior, moment-flavoured starting point.
    fn moment_start(self, mean: f64, eps: f64) -> Vec<f64> {
        let d = (0.5 * mean * (1.0 - 0.5 - 0.3)).max(10.0 * eps);
        let mut phi = vec![d, 0.5, 0.3, d, 0.5, 0.3];
        phi.truncate(self.num_free());
        phi
    }
}

/// How `λ̃_1` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "value")]
pub enum LambdaInit {
    SampleMean,
    FirstObservation,
    Fixed(f64),
}

impl LambdaInit {
    pub fn resolve(&self, series: &CountSeries) -> Result<f64> {
        let v = match *self {
            LambdaInit::SampleMean => series.mean(),
            LambdaInit::FirstObservation => series.values()[0] as f64,
            LambdaInit::Fixed(v) => v,
        };
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            domain(format!("initial intensity must be positive, {self:?} gives {v}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Replaces the quantile range when set.
    pub thresholds: Option<Vec<u64>>,
    pub lambda_init: LambdaInit,
    /// Margin `ε` of the feasible region.
    pub slack: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Carry each candidate's optimum into the next as an extra start.
    pub warm_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.2,
            alpha2: 0.8,
            thresholds: None,
            lambda_init: LambdaInit::SampleMean,
            slack: DEFAULT_SLACK,
            tol: 1e-8,
            max_iter: 500,
            warm_start: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha1 && self.alpha1 < self.alpha2 && self.alpha2 < 1.0) {
            return domain(format!(
                "quantile levels must satisfy 0 < alpha1 < alpha2 < 1, got ({}, {})",
                self.alpha1, self.alpha2
            ));
        }
        if matches!(&self.thresholds, Some(t) if t.is_empty()) {
            return domain("explicit threshold set is empty");
        }
        if !(self.slack > 0.0 && self.slack < 0.25) {
            return domain(format!("slack must lie in (0, 0.25), got {}", self.slack));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return domain("optimizer tolerance and iteration limit must be positive");
        }
        if let LambdaInit::Fixed(v) = self.lambda_init {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("fixed initial intensity must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Candidate thresholds in increasing order.
    pub fn candidates(&self, series: &CountSeries) -> Result<Vec<u64>> {
        let mut c = match &self.thresholds {
            Some(t) => t.clone(),
            None => {
                let (q1, q2) = quantile_bounds(series, self.alpha1, self.alpha2)?;
                (q1..=q2).collect()
            }
        };
        c.sort_unstable();
        c.dedup();
        Ok(c)
    }
}

/// Optimum of the coefficients at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub threshold: u64,
    /// Full coefficient vector `(d₁, a₁, b₁, d₂, a₂, b₂)`.
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub active: Vec<ActiveConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    /// `None` for the single-regime model.
    pub threshold: Option<u64>,
    /// Full coefficient vector `(d₁, a₁, b₁, d₂, a₂, b₂)`.
    pub theta: Vec<f64>,
    /// Free coefficients, named by [`ModelKind::param_names`].
    pub estimates: Vec<f64>,
    /// `sqrt(diag(Ĝ⁻¹)/n)`; absent when `Ĝ` is not invertible.
    pub std_errors: Option<Vec<f64>>,
    pub loglik: f64,
    pub n: usize,
    pub lambda_init: f64,
    pub lambda_init_policy: LambdaInit,
    /// `Ĝ` in the free coordinates.
    pub g_hat: Vec<Vec<f64>>,
    pub g_hat_inv: Option<Vec<Vec<f64>>>,
    pub aic: f64,
    pub bic: f64,
    pub num_params: usize,
    pub profile: Vec<ProfileEntry>,
    /// Candidates with too few visits to one regime.
    pub skipped: Vec<u64>,
    pub converged: bool,
}

impl FitResult {
    /// Parameters for the recursion; the single-regime model uses
    /// threshold 0 with identical regimes.
    pub fn params(&self) -> Result<SetparParams> {
        SetparParams::from_slice(self.threshold.unwrap_or(0), &self.theta)
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        self.model.param_names()
    }
}

/// Type-1 (inverse empirical CDF) quantiles at levels `α₁`, `α₂`.
pub fn quantile_bounds(series: &CountSeries, alpha1: f64, alpha2: f64) -> Result<(u64, u64)> {
    for a in [alpha1, alpha2] {
        if !(a > 0.0 && a < 1.0) {
            return domain(format!("quantile level must lie in (0, 1), got {a}"));
        }
    }
    let mut sorted = series.values().to_vec();
    sorted.sort_unstable();
    Ok((type1_quantile(&sorted, alpha1), type1_quantile(&sorted, alpha2)))
}

fn type1_quantile(sorted: &[u64], alpha: f64) -> u64 {
    let n = sorted.len();
    let k = ((n as f64 * alpha) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}

/// Visits to each regime among `Y_1, …, Y_{n-1}`, the values that select
/// the recursion branch.
pub fn regime_counts(series: &CountSeries, threshold: u64) -> (usize, usize) {
    let ys = series.values();
    let lower = ys[..ys.len() - 1].iter().filter(|&&y| y <= threshold).count();
    (lower, ys.len() - 1 - lower)
}

fn check_regimes(series: &CountSeries, threshold: u64) -> Result<(usize, usize)> {
    let (lo, hi) = regime_counts(series, threshold);
    if lo == 0 {
        return Err(Error::IllPosedRegime { regime: Regime::Lower, threshold });
    }
    if hi == 0 {
        return Err(Error::IllPosedRegime { regime: Regime::Upper, threshold });
    }
    Ok((lo, hi))
}

fn optimize(
    series: &CountSeries,
    kind: ModelKind,
    threshold: u64,
    lambda_init: f64,
    config: &FitConfig,
    warm: Option<&[f64]>,
) -> Result<ProfileEntry> {
    let region = kind.region(config.slack);
    let n = series.len() as f64;
    let objective = |phi: &[f64]| {
        let theta = kind.embed(phi);
        match SetparParams::from_slice(threshold, &theta).and_then(|p| loglik_and_score(series, &p, lambda_init)) {
            Ok((l, s)) => (l / n, kind.pull_back_score(&s).into_iter().map(|v| v / n).collect()),
            Err(_) => (f64::NAN, vec![f64::NAN; phi.len()]),
        }
    };
    let mut starts = vec![region.project(&kind.moment_start(series.mean(), config.slack))];
    if let Some(w) = warm {
        starts.push(region.project(w));
    }
    let res = maximize_multistart(objective, &region, &starts, config.tol, config.max_iter)?;
    if !res.converged {
        warn!(
            "threshold {threshold}: optimizer stopped after {} steps with projected gradient {:.3e}",
            res.iterations, res.projected_gradient_norm
        );
    }
    Ok(ProfileEntry {
        threshold,
        theta: kind.embed(&res.argmax).to_vec(),
        loglik: res.value * n,
        converged: res.converged,
        iterations: res.iterations,
        projected_gradient_norm: res.projected_gradient_norm,
        active: res.active,
    })
}

/// Maximizes the SETPAR likelihood at a fixed threshold.
pub fn fit_fixed_threshold(series: &CountSeries, threshold: u64, config: &FitConfig) -> Result<ProfileEntry> {
    fit_fixed_threshold_model(series, ModelKind::Setpar, threshold, config)
}

/// As [`fit_fixed_threshold`] for any two-regime model kind.
pub fn fit_fixed_threshold_model(
    series: &CountSeries,
    kind: ModelKind,
    threshold: u64,
    config: &FitConfig,
) -> Result<ProfileEntry> {
    config.validate()?;
    check_regimes(series, threshold)?;
    let lambda_init = config.lambda_init.resolve(series)?;
    optimize(series, kind, threshold, lambda_init, config, None)
}

/// Two-regime fit with threshold search.
pub fn fit(series: &CountSeries, config: &FitConfig) -> Result<FitResult> {
    fit_model(series, ModelKind::Setpar, config)
}

/// Single-regime Poisson autoregression.
pub fn fit_par(series: &CountSeries, config: &FitConfig) -> Result<FitResult> {
    fit_model(series, ModelKind::Par, config)
}

/// Two-regime fit with `b₂` held at zero.
pub fn fit_setpar_b2_zero(series: &CountSeries, config: &FitConfig) -> Result<FitResult> {
    fit_model(series, ModelKind::SetparB2Zero, config)
}

pub fn fit_model(series: &CountSeries, kind: ModelKind, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let lambda_init = config.lambda_init.resolve(series)?;

    let (best, profile, skipped) = if kind.has_threshold() {
        let mut profile: Vec<ProfileEntry> = Vec::new();
        let mut skipped = Vec::new();
        let mut warm: Option<Vec<f64>> = None;
        for r in config.candidates(series)? {
            let (lo, hi) = regime_counts(series, r);
            if lo < MIN_REGIME_OBS || hi < MIN_REGIME_OBS {
                warn!("skipping threshold {r}: regime visits ({lo}, {hi}) below {MIN_REGIME_OBS}");
                skipped.push(r);
                continue;
            }
            let entry = optimize(series, kind, r, lambda_init, config, warm.as_deref())?;
            debug!("threshold {r}: loglik {}", entry.loglik);
            if config.warm_start {
                let th = &entry.theta;
                warm = Some(match kind {
                    ModelKind::SetparB2Zero => th[..5].to_vec(),
                    _ => th.clone(),
                });
            }
            profile.push(entry);
        }
        let mut best: Option<&ProfileEntry> = None;
        for e in &profile {
            if best.is_none_or(|b| e.loglik > b.loglik) {
                best = Some(e);
            }
        }
        let Some(best) = best.cloned() else {
            return Err(Error::Estimation(format!(
                "every candidate threshold leaves a regime with fewer than {MIN_REGIME_OBS} observations"
            )));
        };
        (best, profile, skipped)
    } else {
        (optimize(series, kind, 0, lambda_init, config, None)?, Vec::new(), Vec::new())
    };

    let params = SetparParams::from_slice(best.threshold, &best.theta)?;
    let n = series.len();
    let g = g_hat(series, &params, lambda_init)?.pull_back(&kind.jacobian());
    let g_inv = g.inverse().ok();
    let std_errors = g_inv.as_ref().and_then(|m| {
        let d: Vec<f64> = m.diagonal().iter().copied().collect();
        d.iter().all(|v| *v >= 0.0).then(|| d.iter().map(|v| (v / n as f64).sqrt()).collect())
    });
    if std_errors.is_none() {
        warn!("information matrix is not invertible at the estimate; standard errors unavailable");
    }
    let k = kind.num_free();
    let estimates = match kind {
        ModelKind::Par => best.theta[..3].to_vec(),
        _ => best.theta[..k].to_vec(),
    };
    Ok(FitResult {
        model: kind,
        threshold: kind.has_threshold().then_some(best.threshold),
        theta: best.theta.clone(),
        estimates,
        std_errors,
        loglik: best.loglik,
        n,
        lambda_init,
        lambda_init_policy: config.lambda_init,
        g_hat: g.to_rows(),
        g_hat_inv: g_inv.map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect()),
        aic: -2.0 * best.loglik + 2.0 * k as f64,
        bic: -2.0 * best.loglik + k as f64 * (n as f64).ln(),
        num_params: k,
        profile,
        skipped,
        converged: best.converged,
    })
}

/// Recomputes the log-likelihood of a stored fit on `series`.
pub fn refit_loglik(series: &CountSeries, result: &FitResult) -> Result<f64> {
    log_likelihood(series, &result.params()?, result.lambda_init)
}
