//! Residual, autocorrelation and ergodicity behaviour on simulated paths.

use setpar::diagnostics::{acf, acf_counts, overdispersion_summary, pearson_residuals, Moments};
use setpar::mc_study::ergodic_moment_check;
use setpar::model::simulate;
use setpar::poisson::sample_poisson;
use setpar::rng::stream_rng;
use setpar::{CountSeries, SetparParams};

fn stable_regimes() -> SetparParams {
    SetparParams::from_slice(7, &[0.5, 0.7, 0.2, 0.3, 0.4, 0.5]).unwrap()
}

fn explosive_lower() -> SetparParams {
    SetparParams::from_slice(6, &[0.5, 0.8, 0.7, 0.2, 0.2, 0.1]).unwrap()
}

#[test]
fn residuals_at_truth_are_standardized() {
    for seed in 0..10 {
        let (y, path) = simulate(&stable_regimes(), 5000, seed, 500, None).unwrap();
        let r = pearson_residuals(&y, &stable_regimes(), path.initial_value()).unwrap();
        assert_eq!(r.residuals.len(), 5000);
        let n = 5000f64;
        assert!(r.moments.mean.abs() < 3.0 / n.sqrt(), "seed {seed}: mean {}", r.moments.mean);
        let var = r.moments.std_dev.powi(2);
        assert!((0.9..=1.1).contains(&var), "seed {seed}: variance {var}");
    }
}

#[test]
fn residual_acf_shows_no_serial_dependence() {
    let seeds = 50;
    let mut quiet = 0;
    for seed in 0..seeds {
        let (y, path) = simulate(&explosive_lower(), 2000, 10_000 + seed, 500, None).unwrap();
        let r = pearson_residuals(&y, &explosive_lower(), path.initial_value()).unwrap();
        if acf(&r.residuals, 20).unwrap().exceedances() <= 2 {
            quiet += 1;
        }
    }
    assert!(quiet as f64 >= 0.9 * seeds as f64, "{quiet} of {seeds}");
}

#[test]
fn white_noise_acf_stays_in_band() {
    let seeds = 40;
    let mut inside = 0;
    for seed in 0..seeds {
        let mut rng = stream_rng(seed, 3);
        let x: Vec<f64> = (0..10_000).map(|_| sample_poisson(&mut rng, 6.0).unwrap() as f64).collect();
        let a = acf(&x, 20).unwrap();
        if a.values[1..].iter().all(|v| v.abs() < 4.0 / 100.0) {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.95 * seeds as f64, "{inside} of {seeds}");
}

#[test]
fn explosive_lower_paths_have_negative_lag_one_autocorrelation() {
    let seeds = 200;
    let negative = (0..seeds)
        .filter(|&s| {
            let (y, _) = simulate(&explosive_lower(), 500, 50_000 + s, 500, None).unwrap();
            acf_counts(&y, 1).unwrap().values[1] < 0.0
        })
        .count();
    assert!(negative as f64 >= 0.8 * seeds as f64, "{negative} of {seeds}");
}

#[test]
fn iid_poisson_is_equidispersed() {
    let mut rng = stream_rng(17, 0);
    let y: Vec<u64> = (0..100_000).map(|_| sample_poisson(&mut rng, 5.0).unwrap()).collect();
    let o = overdispersion_summary(&CountSeries::new(y).unwrap()).unwrap();
    assert!((0.97..=1.03).contains(&o.ratio), "{}", o.ratio);
}

#[test]
fn moments_match_direct_recomputation() {
    let (y, path) = simulate(&stable_regimes(), 3000, 5, 500, None).unwrap();
    let r = pearson_residuals(&y, &stable_regimes(), path.initial_value()).unwrap();
    let x = &r.residuals;
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let m: Moments = r.moments;
    assert!((m.std_dev - (m2 * n / (n - 1.0)).sqrt()).abs() < 1e-12);
    assert!((m.skewness_biased - m3 / m2.powf(1.5)).abs() < 1e-12);
    assert!((m.excess_kurtosis_biased - (m4 / (m2 * m2) - 3.0)).abs() < 1e-12);
    for (i, (&yt, &l)) in y.values().iter().zip(&r.fitted).enumerate() {
        assert!((x[i] - (yt as f64 - l) / l.sqrt()).abs() < 1e-15);
    }
}

#[test]
fn batch_means_error_matches_seed_spread() {
    let seeds: Vec<u64> = (0..10).collect();
    let report = ergodic_moment_check(&stable_regimes(), 100_000, &seeds, &[2], [0.1, 50.0]).unwrap();
    let means: Vec<f64> = report.rows.iter().map(|r| r.means[0]).collect();
    let mu = means.iter().sum::<f64>() / means.len() as f64;
    let spread = (means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
    let batch = report.rows.iter().map(|r| r.batch_se).sum::<f64>() / report.rows.len() as f64;
    let ratio = spread / batch;
    assert!((0.5..=2.0).contains(&ratio), "spread {spread}, batch se {batch}");
    assert!(!report.flagged());
}
