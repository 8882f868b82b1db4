//! Poisson variate generation.
//!
//! Sequential-search inversion below `INVERSION_LIMIT`, Hörmann's
//! transformed rejection with squeeze (PTRS) above it.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

pub const INVERSION_LIMIT: f64 = 30.0;

/// Draws one Poisson(`lambda`) variate.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> Result<u64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return domain(format!("Poisson mean must be finite and nonnegative, got {lambda}"));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    Ok(if lambda < INVERSION_LIMIT {
        inversion(rng, lambda)
    } else {
        ptrs(rng, lambda)
    })
}

fn inversion<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    // cdf can saturate a hair below 1; the far tail carries no mass at f64 precision.
    let cap = (lambda + 40.0 * lambda.sqrt() + 40.0) as u64;
    while u > cdf && k < cap {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

fn ptrs<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn moments(lambda: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeded_rng(seed);
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_poisson(&mut rng, lambda).unwrap() as f64)
            .collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn zero_mean_gives_zero() {
        let mut rng = seeded_rng(1);
        assert_eq!(sample_poisson(&mut rng, 0.0).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_mean() {
        let mut rng = seeded_rng(1);
        assert!(sample_poisson(&mut rng, -1.0).is_err());
        assert!(sample_poisson(&mut rng, f64::NAN).is_err());
    }

    #[test]
    fn mean_and_variance_match_on_both_branches() {
        for (i, &lambda) in [0.3, 4.0, 29.5, 30.0, 75.0, 1000.0].iter().enumerate() {
            let n = 200_000;
            let (m, v) = moments(lambda, n, 10 + i as u64);
            let se = (lambda / n as f64).sqrt();
            assert!((m - lambda).abs() < 5.0 * se, "lambda {lambda}: mean {m}");
            assert!((v / lambda - 1.0).abs() < 0.03, "lambda {lambda}: var {v}");
        }
    }
}
