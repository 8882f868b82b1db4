//! Parameter and series types, the threshold intensity recursion and exact
//! simulation of `(λ_t, Y_t)`.

use std::fmt;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::poisson::sample_poisson;
use crate::rng::seeded_rng;

/// Default number of discarded leading pairs in [`simulate`].
pub const DEFAULT_BURN_IN: usize = 500;

/// Which branch of the two-regime recursion applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Lower,
    Upper,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Lower => "lower",
            Regime::Upper => "upper",
        })
    }
}

/// Coefficients `(d, a, b)` of one regime: `λ_t = d + a·λ_{t-1} + b·Y_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub d: f64,
    pub a: f64,
    pub b: f64,
}

impl RegimeParams {
    /// Requires `d > 0` and `a, b ≥ 0`, all finite. Zero feedback
    /// coefficients are accepted so that degenerate and restricted models
    /// (i.i.d. Poisson, `b₂ = 0`) can be expressed.
    pub fn new(d: f64, a: f64, b: f64) -> Result<Self> {
        let p = Self { d, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.is_finite() && self.a.is_finite() && self.b.is_finite()) {
            return domain(format!("non-finite regime coefficients {self:?}"));
        }
        if self.d <= 0.0 {
            return domain(format!("intercept d must be positive, got {}", self.d));
        }
        if self.a < 0.0 || self.b < 0.0 {
            return domain(format!("feedback coefficients must be nonnegative, got a={} b={}", self.a, self.b));
        }
        Ok(())
    }

    /// True when every coefficient is strictly positive.
    pub fn is_strictly_positive(&self) -> bool {
        self.d > 0.0 && self.a > 0.0 && self.b > 0.0
    }

    #[inline]
    pub fn step(&self, lambda_prev: f64, y_prev: u64) -> f64 {
        self.d + self.a * lambda_prev + self.b * y_prev as f64
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.d, self.a, self.b]
    }
}

/// Two-regime parameter vector `θ = (r, θ⁽¹⁾, θ⁽²⁾)`.
///
/// The lower regime applies when `Y_{t-1} ≤ r`, the upper one when
/// `Y_{t-1} > r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetparParams {
    pub threshold: u64,
    pub lower: RegimeParams,
    pub upper: RegimeParams,
}

impl SetparParams {
    pub fn new(threshold: u64, lower: RegimeParams, upper: RegimeParams) -> Result<Self> {
        lower.validate()?;
        upper.validate()?;
        Ok(Self { threshold, lower, upper })
    }

    /// Builds from `(d₁, a₁, b₁, d₂, a₂, b₂)`.
    pub fn from_slice(threshold: u64, theta: &[f64]) -> Result<Self> {
        if theta.len() != 6 {
            return domain(format!("expected 6 coefficients, got {}", theta.len()));
        }
        Self::new(
            threshold,
            RegimeParams::new(theta[0], theta[1], theta[2])?,
            RegimeParams::new(theta[3], theta[4], theta[5])?,
        )
    }

    /// Both regimes share the same coefficients: an ordinary Poisson
    /// autoregression.
    pub fn single_regime(regime: RegimeParams) -> Result<Self> {
        Self::new(0, regime, regime)
    }

    pub fn to_array(&self) -> [f64; 6] {
        let [d1, a1, b1] = self.lower.as_array();
        let [d2, a2, b2] = self.upper.as_array();
        [d1, a1, b1, d2, a2, b2]
    }

    #[inline]
    pub fn regime(&self, y_prev: u64) -> Regime {
        if y_prev <= self.threshold {
            Regime::Lower
        } else {
            Regime::Upper
        }
    }

    #[inline]
    pub fn regime_params(&self, y_prev: u64) -> &RegimeParams {
        match self.regime(y_prev) {
            Regime::Lower => &self.lower,
            Regime::Upper => &self.upper,
        }
    }

    /// `a₁ < 1` and `a₂ + b₂ < 1`: the chain has a unique invariant law with
    /// moments of all orders.
    pub fn is_stable(&self) -> bool {
        self.lower.a < 1.0 && self.upper.a + self.upper.b < 1.0
    }

    /// `max(a₁, a₂)`, the contraction factor of the recursion in `λ`.
    pub fn max_feedback(&self) -> f64 {
        self.lower.a.max(self.upper.a)
    }

    /// Fixed point `d₁/(1 − a₁)` of the lower regime under zero counts.
    /// Falls back to `d₁` when `a₁ ≥ 1`.
    pub fn reachable_state(&self) -> f64 {
        if self.lower.a < 1.0 {
            self.lower.d / (1.0 - self.lower.a)
        } else {
            self.lower.d
        }
    }
}

/// Regime coefficients on half-open count bins `[r_{i-1}, r_i)` with
/// `r_0 = 0` and `r_n = ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRegimeParams {
    thresholds: Vec<u64>,
    regimes: Vec<RegimeParams>,
}

impl MultiRegimeParams {
    pub fn new(thresholds: Vec<u64>, regimes: Vec<RegimeParams>) -> Result<Self> {
        if regimes.len() != thresholds.len() + 1 {
            return domain(format!(
                "{} finite thresholds need {} regimes, got {}",
                thresholds.len(),
                thresholds.len() + 1,
                regimes.len()
            ));
        }
        if thresholds.first() == Some(&0) {
            return domain("the first finite threshold must exceed r_0 = 0");
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return domain("thresholds must be strictly increasing");
        }
        for r in &regimes {
            r.validate()?;
        }
        Ok(Self { thresholds, regimes })
    }

    /// The two-regime model as bins: `y ≤ r` is the bin `[0, r + 1)`.
    pub fn from_setpar(params: &SetparParams) -> Self {
        Self {
            thresholds: vec![params.threshold + 1],
            regimes: vec![params.lower, params.upper],
        }
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    pub fn regimes(&self) -> &[RegimeParams] {
        &self.regimes
    }

    /// Index of the bin containing `y`.
    #[inline]
    pub fn regime_index(&self, y_prev: u64) -> usize {
        self.thresholds.partition_point(|&r| r <= y_prev)
    }
}

/// Observed counts `Y_1, …, Y_n`, `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountSeries(Vec<u64>);

impl CountSeries {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return domain("count series must contain at least one observation");
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().map(|&y| y as f64).sum::<f64>() / self.0.len() as f64
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&y| y as f64).collect()
    }

    /// First `n` observations.
    pub fn head(&self, n: usize) -> Result<Self> {
        Self::new(self.0[..n.min(self.0.len())].to_vec())
    }

    /// Observations from index `start` on.
    pub fn tail_from(&self, start: usize) -> Result<Self> {
        Self::new(self.0[start.min(self.0.len())..].to_vec())
    }

    pub fn into_inner(self) -> Vec<u64> {
        self.0
    }
}

/// Intensities `λ_1, …, λ_n` aligned with a [`CountSeries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityPath {
    values: Vec<f64>,
    initial_value: f64,
}

impl IntensityPath {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last intensity of the path.
    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths are nonempty")
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        domain(format!("intensity must be finite and positive, got {lambda}"))
    }
}

/// One step of the two-regime recursion.
pub fn intensity_step(lambda_prev: f64, y_prev: u64, params: &SetparParams) -> Result<f64> {
    check_lambda(lambda_prev)?;
    Ok(params.regime_params(y_prev).step(lambda_prev, y_prev))
}

/// One step of the multi-regime recursion using half-open bins.
pub fn intensity_step_multi(lambda_prev: f64, y_prev: u64, params: &MultiRegimeParams) -> Result<f64> {
    check_lambda(lambda_prev)?;
    Ok(params.regimes[params.regime_index(y_prev)].step(lambda_prev, y_prev))
}

/// Runs the recursion over `series` from `λ̃_1 = lambda_init`.
pub fn intensity_path(series: &CountSeries, params: &SetparParams, lambda_init: f64) -> Result<IntensityPath> {
    check_lambda(lambda_init)?;
    let ys = series.values();
    let mut values = Vec::with_capacity(ys.len());
    let mut lambda = lambda_init;
    values.push(lambda);
    for &y in &ys[..ys.len() - 1] {
        lambda = params.regime_params(y).step(lambda, y);
        values.push(lambda);
    }
    Ok(IntensityPath { values, initial_value: lambda_init })
}

/// Simulates `n` pairs after discarding `burn_in`, reproducibly from `seed`.
///
/// `lambda_init` defaults to [`SetparParams::reachable_state`].
pub fn simulate(
    params: &SetparParams,
    n: usize,
    seed: u64,
    burn_in: usize,
    lambda_init: Option<f64>,
) -> Result<(CountSeries, IntensityPath)> {
    let mut rng = seeded_rng(seed);
    simulate_with_rng(params, n, burn_in, lambda_init, &mut rng)
}

/// As [`simulate`] with a caller-supplied generator.
///
/// Each time step draws its Poisson variate from a sub-generator seeded by
/// one word of `rng`, so two chains sharing `rng` state see the same
/// innovation at every step regardless of how many uniforms the sampler
/// consumed.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    params: &SetparParams,
    n: usize,
    burn_in: usize,
    lambda_init: Option<f64>,
    rng: &mut R,
) -> Result<(CountSeries, IntensityPath)> {
    params.lower.validate()?;
    params.upper.validate()?;
    drive(n, burn_in, lambda_init.unwrap_or_else(|| params.reachable_state()), rng, |lambda, y| {
        params.regime_params(y).step(lambda, y)
    })
}

/// Simulation under the multi-regime recursion.
pub fn simulate_multi<R: Rng + ?Sized>(
    params: &MultiRegimeParams,
    n: usize,
    burn_in: usize,
    lambda_init: f64,
    rng: &mut R,
) -> Result<(CountSeries, IntensityPath)> {
    drive(n, burn_in, lambda_init, rng, |lambda, y| {
        params.regimes[params.regime_index(y)].step(lambda, y)
    })
}

fn drive<R, F>(n: usize, burn_in: usize, lambda_init: f64, rng: &mut R, step: F) -> Result<(CountSeries, IntensityPath)>
where
    R: Rng + ?Sized,
    F: Fn(f64, u64) -> f64,
{
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    check_lambda(lambda_init)?;
    let mut lambda = lambda_init;
    let mut ys = Vec::with_capacity(n);
    let mut lambdas = Vec::with_capacity(n);
    for t in 0..burn_in + n {
        let mut step_rng = SmallRng::seed_from_u64(rng.next_u64());
        let y = sample_poisson(&mut step_rng, lambda)?;
        if t >= burn_in {
            ys.push(y);
            lambdas.push(lambda);
        }
        lambda = step(lambda, y);
        if !lambda.is_finite() {
            return domain(format!("intensity diverged at step {t}"));
        }
    }
    let initial_value = lambdas[0];
    Ok((CountSeries(ys), IntensityPath { values: lambdas, initial_value }))
}
