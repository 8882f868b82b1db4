//! Likelihood, forgetting and sampler checks against independent oracles.

use proptest::prelude::*;
use rand::RngCore;
use setpar::likelihood::log_likelihood;
use setpar::model::{intensity_path, simulate};
use setpar::poisson::sample_poisson;
use setpar::rng::stream_rng;
use setpar::{CountSeries, SetparParams};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

/// Straight-line recomputation with compensated summation.
fn oracle_loglik(y: &[u64], theta: &[f64; 6], r: u64, init: f64) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut lambda = init;
    for t in 0..y.len() {
        if t > 0 {
            let prev = y[t - 1];
            let (d, a, b) = if prev <= r { (theta[0], theta[1], theta[2]) } else { (theta[3], theta[4], theta[5]) };
            lambda = d + a * lambda + b * prev as f64;
        }
        let term = -lambda + y[t] as f64 * lambda.ln();
        let v = term - comp;
        let s = sum + v;
        comp = (s - sum) - v;
        sum = s;
    }
    sum
}

#[test]
fn three_step_loglik_by_hand() {
    // λ₁ = 2; Y₁ = 2 > 1 → λ₂ = 2 + 0.1·2 + 0.2·2 = 2.6;
    // Y₂ = 0 ≤ 1 → λ₃ = 1 + 0.5·2.6 = 2.3.
    let p = SetparParams::from_slice(1, &[1.0, 0.5, 0.5, 2.0, 0.1, 0.2]).unwrap();
    let y = CountSeries::new(vec![2, 0, 5]).unwrap();
    let expected = (-2.0 + 2.0 * 2f64.ln()) + (-2.6) + (-2.3 + 5.0 * 2.3f64.ln());
    assert!((log_likelihood(&y, &p, 2.0).unwrap() - expected).abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loglik_matches_compensated_oracle(
        r in 0u64..10,
        theta in (0.1f64..4.0, 0.0f64..0.95, 0.0f64..0.8, 0.1f64..4.0, 0.0f64..0.6, 0.0f64..0.39),
        init in 0.1f64..30.0,
        seed in any::<u64>(),
    ) {
        let th = [theta.0, theta.1, theta.2, theta.3, theta.4, theta.5];
        let p = SetparParams::from_slice(r, &th).unwrap();
        let (y, _) = simulate(&p, 500, seed, 50, None).unwrap();
        let got = log_likelihood(&y, &p, init).unwrap();
        let want = oracle_loglik(y.values(), &th, r, init);
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn initial_state_is_forgotten_geometrically(
        r in 0u64..10,
        theta in (0.1f64..4.0, 0.0f64..0.99, 0.0f64..0.8, 0.1f64..4.0, 0.0f64..0.6, 0.0f64..0.39),
        u in 0.01f64..100.0,
        v in 0.01f64..100.0,
        seed in any::<u64>(),
    ) {
        let th = [theta.0, theta.1, theta.2, theta.3, theta.4, theta.5];
        let p = SetparParams::from_slice(r, &th).unwrap();
        let (y, _) = simulate(&p, 300, seed, 50, None).unwrap();
        let pu = intensity_path(&y, &p, u).unwrap();
        let pv = intensity_path(&y, &p, v).unwrap();
        let a_max = p.max_feedback();
        let mut prod = 1.0;
        for t in 0..y.len() {
            if t > 0 {
                prod *= p.regime_params(y.values()[t - 1]).a;
            }
            let (lu, lv) = (pu.values()[t], pv.values()[t]);
            let diff = (lu - lv).abs();
            let exact = prod * (u - v).abs();
            prop_assert!((diff - exact).abs() <= 1e-13 * lu.max(lv) * (t + 1) as f64, "t = {t}: {diff} vs {exact}");
            prop_assert!(exact <= a_max.powi(t as i32) * (u - v).abs() * (1.0 + 1e-12));
        }
    }
}

fn chi_square_p_value(lambda: f64, seed: u64, draws: usize) -> f64 {
    let dist = Poisson::new(lambda).unwrap();
    // Cells of roughly equal probability, at least 5 expected counts each.
    let mut edges = vec![0u64];
    let mut acc = 0.0;
    let target = (50.0f64).min(draws as f64 / 20.0).recip();
    let mut k = 0u64;
    while dist.sf(k) > target {
        acc += dist.pmf(k);
        if acc >= target {
            edges.push(k + 1);
            acc = 0.0;
        }
        k += 1;
    }
    let mut rng = stream_rng(seed, 7);
    let mut counts = vec![0usize; edges.len()];
    for _ in 0..draws {
        let x = sample_poisson(&mut rng, lambda).unwrap();
        let cell = edges.partition_point(|&e| e <= x) - 1;
        counts[cell] += 1;
    }
    let mut stat = 0.0;
    for (c, &lo) in edges.iter().enumerate() {
        let hi = edges.get(c + 1).copied();
        let p = match hi {
            Some(h) => (if h == 0 { 0.0 } else { dist.cdf(h - 1) }) - if lo == 0 { 0.0 } else { dist.cdf(lo - 1) },
            None => if lo == 0 { 1.0 } else { dist.sf(lo - 1) },
        };
        let e = p * draws as f64;
        stat += (counts[c] as f64 - e).powi(2) / e;
    }
    let df = (edges.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn sampler_passes_chi_square_on_both_branches() {
    for (i, lambda) in [0.3, 4.0, 29.5, 30.0, 75.0, 640.0].into_iter().enumerate() {
        let p = chi_square_p_value(lambda, 100 + i as u64, 200_000);
        assert!(p > 1e-4, "λ = {lambda}: p = {p}");
    }
}

#[test]
fn rng_streams_are_independent_of_consumption_elsewhere() {
    let mut a = stream_rng(5, 1);
    let mut b = stream_rng(5, 2);
    let first: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
    for _ in 0..1000 {
        b.next_u64();
    }
    let mut a2 = stream_rng(5, 1);
    let again: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
    assert_eq!(first, again);
}
