//! Pearson residuals, sample autocorrelation, one-step forecasts and
//! dispersion summaries.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{intensity_path, CountSeries, SetparParams};

/// Sample moments of a real sequence.
///
/// `skewness`/`excess_kurtosis` carry the small-sample adjustment
/// `G₁ = g₁·√(n(n−1))/(n−2)` and
/// `G₂ = ((n+1)·g₂ + 6)·(n−1)/((n−2)(n−3))`; the plain moment ratios
/// `g₁ = m₃/m₂^{3/2}` and `g₂ = m₄/m₂² − 3` (central moments averaged by
/// `1/n`) are kept alongside. Undefined values (too few points, zero spread)
/// are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Square root of the unbiased variance.
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub skewness_biased: f64,
    pub excess_kurtosis_biased: f64,
}

impl Moments {
    pub fn of(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let central = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
        let (m2, m3, m4) = (central(2), central(3), central(4));
        let std_dev = if x.len() > 1 { (m2 * n / (n - 1.0)).sqrt() } else { 0.0 };
        let (g1, g2) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
        let skewness = if x.len() > 2 { g1 * (n * (n - 1.0)).sqrt() / (n - 2.0) } else { 0.0 };
        let excess_kurtosis = if x.len() > 3 {
            ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0))
        } else {
            0.0
        };
        Self {
            mean,
            std_dev,
            skewness: if m2 > 0.0 { skewness } else { 0.0 },
            excess_kurtosis: if m2 > 0.0 { excess_kurtosis } else { 0.0 },
            skewness_biased: g1,
            excess_kurtosis_biased: g2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `(Y_t − λ̂_t)/√λ̂_t`
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub moments: Moments,
}

/// Pearson residuals along the fitted intensity path.
pub fn pearson_residuals(series: &CountSeries, params: &SetparParams, lambda_init: f64) -> Result<ResidualReport> {
    let path = intensity_path(series, params, lambda_init)?;
    let residuals: Vec<f64> = series
        .values()
        .iter()
        .zip(path.values())
        .map(|(&y, &l)| (y as f64 - l) / l.sqrt())
        .collect();
    let moments = Moments::of(&residuals);
    Ok(ResidualReport { residuals, fitted: path.values().to_vec(), moments })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfReport {
    /// `ρ̂(0), …, ρ̂(L)`.
    pub values: Vec<f64>,
    pub n: usize,
    /// Half-width `1.96/√n` of the white-noise band.
    pub band: f64,
}

impl AcfReport {
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    /// Lags `1..=L` outside the white-noise band.
    pub fn exceedances(&self) -> usize {
        self.values[1..].iter().filter(|v| v.abs() > self.band).count()
    }
}

/// Sample autocorrelation with the `1/n` autocovariance normalization.
/// A constant sequence has `ρ̂(0) = 1` and `ρ̂(h) = 0` otherwise.
pub fn acf(x: &[f64], max_lag: usize) -> Result<AcfReport> {
    let n = x.len();
    if max_lag >= n {
        return domain(format!("max_lag {max_lag} must be below the series length {n}"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("acf input contains non-finite values");
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    let mut values = vec![1.0];
    for h in 1..=max_lag {
        let ch: f64 = dev[..n - h].iter().zip(&dev[h..]).map(|(a, b)| a * b).sum();
        values.push(if c0 > 0.0 { (ch / c0).clamp(-1.0, 1.0) } else { 0.0 });
    }
    Ok(AcfReport { values, n, band: 1.96 / (n as f64).sqrt() })
}

/// Count series as reals, for [`acf`].
pub fn acf_counts(series: &CountSeries, max_lag: usize) -> Result<AcfReport> {
    acf(&series.as_f64(), max_lag)
}

/// Forecasts `λ̂_t` for every `t` in `horizon`, running the recursion with
/// frozen parameters through `history` and then through the realized
/// horizon values.
pub fn one_step_forecasts(
    history: &CountSeries,
    params: &SetparParams,
    lambda_init: f64,
    horizon: &[u64],
) -> Result<Vec<f64>> {
    if horizon.is_empty() {
        return domain("forecast horizon is empty");
    }
    let path = intensity_path(history, params, lambda_init)?;
    let y_last = history.values()[history.len() - 1];
    let mut lambda = params.regime_params(y_last).step(path.last(), y_last);
    let mut out = Vec::with_capacity(horizon.len());
    for &y in horizon {
        out.push(lambda);
        lambda = params.regime_params(y).step(lambda, y);
    }
    Ok(out)
}

/// Mean squared error between counts and forecasts.
pub fn mse(observed: &[u64], forecast: &[f64]) -> Result<f64> {
    if observed.len() != forecast.len() || observed.is_empty() {
        return domain(format!("length mismatch: {} observations, {} forecasts", observed.len(), forecast.len()));
    }
    Ok(observed.iter().zip(forecast).map(|(&y, f)| (y as f64 - f).powi(2)).sum::<f64>() / observed.len() as f64)
}

/// `(1/n)·Σ_t (Y_t − λ̂_t)²` over the whole fitted series, `t = 1` included.
pub fn in_sample_mse(series: &CountSeries, params: &SetparParams, lambda_init: f64) -> Result<f64> {
    let path = intensity_path(series, params, lambda_init)?;
    mse(series.values(), path.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overdispersion {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `variance / mean`, 0 when the variance is 0.
    pub ratio: f64,
}

pub fn overdispersion_summary(series: &CountSeries) -> Result<Overdispersion> {
    let n = series.len();
    if n < 2 {
        return domain("overdispersion needs at least two observations");
    }
    let x = series.as_f64();
    let mean = x.iter().sum::<f64>() / n as f64;
    let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let ratio = if variance == 0.0 { 0.0 } else { variance / mean };
    Ok(Overdispersion { mean, variance, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn explosive_lower() -> SetparParams {
        SetparParams::from_slice(6, &[0.5, 0.8, 0.7, 0.2, 0.2, 0.1]).unwrap()
    }

    #[test]
    fn moments_of_small_sample() {
        // x = 1, 2, 3, 10: mean 4, deviations −3, −2, −1, 6.
        // m2 = 50/4, m3 = (−27 − 8 − 1 + 216)/4 = 45, m4 = (81 + 16 + 1 + 1296)/4 = 348.5
        let m = Moments::of(&[1.0, 2.0, 3.0, 10.0]);
        assert_relative_eq!(m.mean, 4.0);
        assert_relative_eq!(m.std_dev, (50.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        let g1 = 45.0 / 12.5f64.powf(1.5);
        let g2 = 348.5 / (12.5 * 12.5) - 3.0;
        assert_relative_eq!(m.skewness_biased, g1, epsilon = 1e-14);
        assert_relative_eq!(m.excess_kurtosis_biased, g2, epsilon = 1e-14);
        assert_relative_eq!(m.skewness, g1 * 12f64.sqrt() / 2.0, epsilon = 1e-14);
        assert_relative_eq!(m.excess_kurtosis, (5.0 * g2 + 6.0) * 3.0 / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn exact_fit_has_zero_residuals() {
        // a = b = 0 keeps λ ≡ d, an integer.
        let p = SetparParams::from_slice(2, &[4.0, 0.0, 0.0, 4.0, 0.0, 0.0]).unwrap();
        let s = CountSeries::new(vec![4; 20]).unwrap();
        let r = pearson_residuals(&s, &p, 4.0).unwrap();
        assert!(r.residuals.iter().all(|&v| v == 0.0));
        assert_eq!(r.residuals.len(), 20);
    }

    #[test]
    fn acf_basics() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64).collect();
        let a = acf(&x, 10).unwrap();
        assert_eq!(a.values[0], 1.0);
        assert!(a.values.iter().all(|v| v.abs() <= 1.0));
        let shifted: Vec<f64> = x.iter().map(|v| 3.0 * v + 100.0).collect();
        let b = acf(&shifted, 10).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(u, v, epsilon = 1e-12);
        }
        assert!(acf(&x, 50).is_err());
        let c = acf(&[2.0; 8], 3).unwrap();
        assert_eq!(c.values, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn acf_lag_one_by_hand() {
        // x = 1, 2, 3: deviations −1, 0, 1; c0 = 2, c1 = 0, c2 = −1.
        let a = acf(&[1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(a.values, vec![1.0, 0.0, -0.5]);
    }

    #[test]
    fn forecasts_continue_the_path() {
        let p = explosive_lower();
        let all = CountSeries::new(vec![3, 8, 1, 0, 7, 2, 5, 9, 4]).unwrap();
        let full = intensity_path(&all, &p, 2.5).unwrap();
        let hist = all.head(5).unwrap();
        let f = one_step_forecasts(&hist, &p, 2.5, &all.values()[5..]).unwrap();
        assert_eq!(f.as_slice(), &full.values()[5..]);
        assert!(one_step_forecasts(&hist, &p, 2.5, &[]).is_err());
        let perfect = mse(&[2, 3], &[2.0, 3.0]).unwrap();
        assert_eq!(perfect, 0.0);
    }

    #[test]
    fn overdispersion_values() {
        let o = overdispersion_summary(&CountSeries::new(vec![5; 4]).unwrap()).unwrap();
        assert_eq!((o.variance, o.ratio), (0.0, 0.0));
        let o = overdispersion_summary(&CountSeries::new(vec![1, 2, 3, 6]).unwrap()).unwrap();
        assert_relative_eq!(o.mean, 3.0);
        assert_relative_eq!(o.variance, 14.0 / 3.0, epsilon = 1e-14);
        assert!(overdispersion_summary(&CountSeries::new(vec![1]).unwrap()).is_err());
    }
}
