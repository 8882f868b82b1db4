//! Parallel Monte Carlo replication of simulate-then-fit.
//!
//! Replication `i` at sample size `n` draws from its own ChaCha stream keyed
//! by `(base seed, design hash, n, i)`, so results do not depend on the
//! number of worker threads or the execution order. Aggregates are reduced
//! sequentially in replication order.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimation::{fit, FitConfig};
use crate::model::{simulate_with_rng, SetparParams};
use crate::rng::{derive_stream, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McDesign {
    pub truth: SetparParams,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub fit: FitConfig,
}

impl McDesign {
    pub fn validate(&self) -> Result<()> {
        self.truth.lower.validate()?;
        self.truth.upper.validate()?;
        if self.replications == 0 {
            return domain("replications must be at least 1");
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return domain("sample sizes must be a nonempty list of positive integers");
        }
        self.fit.validate()?;
        if !self.truth.is_stable() {
            warn!("design truth lies outside the stationarity conditions");
        }
        Ok(())
    }

    /// Hash of the data-generating part of the design; the replication count
    /// is excluded so that a longer run extends a shorter one.
    pub fn stream_key(&self) -> u64 {
        let mut parts: Vec<u64> = vec![self.seed, self.truth.threshold, self.burn_in as u64];
        parts.extend(self.truth.to_array().iter().map(|v| v.to_bits()));
        derive_stream(&parts)
    }
}

/// Outcome of one simulate-then-fit replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub threshold: Option<u64>,
    pub theta: Option<Vec<f64>>,
    /// Diagonal of `Ĝ⁻¹` at the estimate.
    pub g_inv_diag: Option<Vec<f64>>,
    pub converged: bool,
    pub error: Option<String>,
}

impl ReplicationRecord {
    /// Usable for aggregation: fitted, converged and with an invertible `Ĝ`.
    pub fn is_valid(&self) -> bool {
        self.error.is_none() && self.converged && self.theta.is_some() && self.g_inv_diag.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    /// `(r̂, d₁, a₁, b₁, d₂, a₂, b₂)` averaged over valid replications.
    pub mean_estimate: Option<Vec<f64>>,
    /// `n` times the sample variance (divisor `R − 1`) of each component of
    /// the estimate; absent with fewer than two valid replications.
    pub n_cov_diag: Option<Vec<f64>>,
    pub mean_g_inv_diag: Option<Vec<f64>>,
    /// Fraction of valid replications with `r̂` equal to the true threshold.
    pub threshold_hit_rate: Option<f64>,
    /// Most frequent `r̂`, smallest on ties.
    pub modal_threshold: Option<u64>,
    pub records: Vec<ReplicationRecord>,
}

impl McCell {
    /// No replication in the cell produced a usable fit.
    pub fn is_invalid(&self) -> bool {
        self.mean_estimate.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub design: McDesign,
    pub cells: Vec<McCell>,
}

fn replicate(design: &McDesign, key: u64, n: usize, index: usize) -> ReplicationRecord {
    let mut rng = stream_rng(design.seed, derive_stream(&[key, n as u64, index as u64]));
    let failed = |e: Error| ReplicationRecord {
        index,
        threshold: None,
        theta: None,
        g_inv_diag: None,
        converged: false,
        error: Some(e.to_string()),
    };
    let series = match simulate_with_rng(&design.truth, n, design.burn_in, None, &mut rng) {
        Ok((y, _)) => y,
        Err(e) => return failed(e),
    };
    match fit(&series, &design.fit) {
        Ok(res) => ReplicationRecord {
            index,
            threshold: res.threshold,
            g_inv_diag: res
                .g_hat_inv
                .as_ref()
                .map(|m| (0..m.len()).map(|i| m[i][i]).collect::<Vec<f64>>())
                .filter(|d| d.iter().all(|v| *v >= 0.0)),
            theta: Some(res.theta),
            converged: res.converged,
            error: None,
        },
        Err(e) => failed(e),
    }
}

fn summarize(n: usize, true_threshold: u64, records: Vec<ReplicationRecord>) -> McCell {
    let valid: Vec<&ReplicationRecord> = records.iter().filter(|r| r.is_valid()).collect();
    let failures = records.len() - valid.len();
    let rows: Vec<Vec<f64>> = valid
        .iter()
        .map(|r| {
            let mut row = vec![r.threshold.unwrap_or(0) as f64];
            row.extend(r.theta.as_ref().expect("valid records carry estimates"));
            row
        })
        .collect();
    let m = rows.len();
    let mean_of = |rows: &[Vec<f64>], width: usize| -> Vec<f64> {
        (0..width).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect()
    };
    let mean_estimate = (m > 0).then(|| mean_of(&rows, 7));
    let n_cov_diag = mean_estimate.as_ref().filter(|_| m > 1).map(|mean| {
        (0..7)
            .map(|j| n as f64 * rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (m - 1) as f64)
            .collect()
    });
    let g_rows: Vec<Vec<f64>> = valid.iter().map(|r| r.g_inv_diag.clone().expect("valid")).collect();
    let mean_g_inv_diag = (m > 0).then(|| mean_of(&g_rows, 6));
    let threshold_hit_rate =
        (m > 0).then(|| valid.iter().filter(|r| r.threshold == Some(true_threshold)).count() as f64 / m as f64);
    let mut counts = std::collections::BTreeMap::new();
    for r in &valid {
        *counts.entry(r.threshold.unwrap_or(0)).or_insert(0usize) += 1;
    }
    let modal_threshold = counts.iter().fold(None, |best: Option<(u64, usize)>, (&r, &c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((r, c)),
    });
    if m == 0 {
        warn!("every replication at n = {n} failed");
    }
    McCell {
        n,
        replications: records.len(),
        failures,
        mean_estimate,
        n_cov_diag,
        mean_g_inv_diag,
        threshold_hit_rate,
        modal_threshold: modal_threshold.map(|(r, _)| r),
        records,
    }
}

/// Simulates and fits `design.replications` paths at each sample size on a
/// pool of `workers` threads.
pub fn run_mc(design: &McDesign, workers: usize) -> Result<McSummary> {
    design.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Estimation(format!("cannot start worker pool: {e}")))?;
    let key = design.stream_key();
    let cells = design
        .sample_sizes
        .iter()
        .map(|&n| {
            let records: Vec<ReplicationRecord> =
                pool.install(|| (0..design.replications).into_par_iter().map(|i| replicate(design, key, n, i)).collect());
            summarize(n, design.truth.threshold, records)
        })
        .collect();
    Ok(McSummary { design: design.clone(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicRow {
    pub seed: u64,
    pub power: i32,
    /// `(1/n)·Σ λ_t^k` from the first and second initial value.
    pub means: [f64; 2],
    pub relative_difference: f64,
    /// Batch-means standard error of the first chain's average.
    pub batch_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub n: usize,
    pub initial_values: [f64; 2],
    pub rows: Vec<ErgodicRow>,
}

impl ErgodicReport {
    pub fn max_relative_difference(&self) -> f64 {
        self.rows.iter().map(|r| r.relative_difference).fold(0.0, f64::max)
    }

    /// Disagreement between the two chains exceeds three batch-means standard
    /// errors somewhere.
    pub fn flagged(&self) -> bool {
        self.rows.iter().any(|r| (r.means[0] - r.means[1]).abs() > 3.0 * r.batch_se)
    }
}

/// Number of batches in the batch-means error estimate.
pub const BATCHES: usize = 20;

/// Time averages of `λ_t^k` from two initial intensities driven by common
/// random numbers, with no burn-in.
pub fn ergodic_moment_check(
    params: &SetparParams,
    n: usize,
    seeds: &[u64],
    powers: &[i32],
    initial_values: [f64; 2],
) -> Result<ErgodicReport> {
    if n < BATCHES {
        return domain(format!("need at least {BATCHES} steps, got {n}"));
    }
    let mut rows = Vec::new();
    for &seed in seeds {
        let paths: Vec<Vec<f64>> = initial_values
            .iter()
            .map(|&u| {
                let mut rng = stream_rng(seed, 0);
                simulate_with_rng(params, n, 0, Some(u), &mut rng).map(|(_, p)| p.values().to_vec())
            })
            .collect::<Result<_>>()?;
        for &k in powers {
            let avg = |p: &[f64]| p.iter().map(|l| l.powi(k)).sum::<f64>() / p.len() as f64;
            let means = [avg(&paths[0]), avg(&paths[1])];
            let size = n / BATCHES;
            let batch: Vec<f64> = paths[0].chunks_exact(size).take(BATCHES).map(avg).collect();
            let bm = batch.iter().sum::<f64>() / BATCHES as f64;
            let var = batch.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            let scale = means[0].abs().max(means[1].abs());
            rows.push(ErgodicRow {
                seed,
                power: k,
                means,
                relative_difference: if scale > 0.0 { (means[0] - means[1]).abs() / scale } else { 0.0 },
                batch_se: (var / BATCHES as f64).sqrt(),
            });
        }
    }
    Ok(ErgodicReport { n, initial_values, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_design(replications: usize) -> McDesign {
        McDesign {
            truth: SetparParams::from_slice(6, &[0.5, 0.8, 0.7, 0.2, 0.2, 0.1]).unwrap(),
            sample_sizes: vec![200],
            replications,
            seed: 42,
            burn_in: 200,
            fit: FitConfig::default(),
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let d = small_design(6);
        assert_eq!(run_mc(&d, 1).unwrap(), run_mc(&d, 4).unwrap());
    }

    #[test]
    fn single_replication_has_no_covariance() {
        let s = run_mc(&small_design(1), 1).unwrap();
        let cell = &s.cells[0];
        assert!(cell.n_cov_diag.is_none());
        let rec = &cell.records[0];
        if rec.is_valid() {
            let mean = cell.mean_estimate.as_ref().unwrap();
            assert_eq!(mean[0], rec.threshold.unwrap() as f64);
            assert_eq!(&mean[1..], rec.theta.as_ref().unwrap().as_slice());
        }
    }

    #[test]
    fn constant_chain_moments_are_exact() {
        let p = SetparParams::from_slice(3, &[2.5, 0.0, 0.0, 2.5, 0.0, 0.0]).unwrap();
        let r = ergodic_moment_check(&p, 1000, &[1], &[1, 2, 3], [2.5, 2.5]).unwrap();
        assert_eq!(r.rows[0].means, [2.5, 2.5]);
        assert_eq!(r.rows[1].means, [6.25, 6.25]);
        assert_eq!(r.rows[2].means, [2.5f64.powi(3); 2]);
        assert_eq!(r.max_relative_difference(), 0.0);
    }

    #[test]
    fn rejects_empty_design() {
        let mut d = small_design(0);
        assert!(run_mc(&d, 1).is_err());
        d.replications = 1;
        d.sample_sizes.clear();
        assert!(run_mc(&d, 1).is_err());
    }
}
