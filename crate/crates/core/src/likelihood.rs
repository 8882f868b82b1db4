//! Conditional Poisson log-likelihood with its exact first and second
//! derivatives.
//!
//! The derivative `∂λ̃_t/∂θ` is carried alongside `λ̃_t` through the
//! varying-coefficient form of the recursion,
//!
//! ```text
//! ∂λ̃_t/∂θ⁽ⁱ⁾ = (1, λ̃_{t-1}, Y_{t-1})ᵀ·1{Y_{t-1} ∈ R_i} + a_{t-1}·∂λ̃_{t-1}/∂θ⁽ⁱ⁾
//! ```
//!
//! with `∂λ̃_1/∂θ = 0`. Differentiating once more gives the Hessian
//! recursion used by [`observed_information`]. Coordinates are ordered
//! `(d₁, a₁, b₁, d₂, a₂, b₂)`.

use nalgebra::{DMatrix, SymmetricEigen};
use crate::error::{domain, Error, Result};
use crate::model::{CountSeries, Regime, SetparParams};

pub const NUM_PARAMS: usize = 6;

pub const PARAM_NAMES: [&str; NUM_PARAMS] = ["d1", "a1", "b1", "d2", "a2", "b2"];

/// `λ̃_t` together with its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreState {
    pub lambda: f64,
    pub dlam_dtheta: [f64; NUM_PARAMS],
}

/// Symmetric information-type matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix(DMatrix<f64>);

impl InfoMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self(matrix)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Largest absolute asymmetry `|m_ij − m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.0 - self.0.transpose()).abs().max()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.0 + self.0.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let sym = (&self.0 + self.0.transpose()) * 0.5;
        if let Some(ch) = sym.clone().cholesky() {
            return Ok(ch.inverse());
        }
        sym.try_inverse().ok_or(Error::SingularInformation)
    }

    /// `Jᵀ·M·J` for a linear reparameterization `θ = J·φ`.
    pub fn pull_back(&self, jacobian: &DMatrix<f64>) -> Self {
        Self(jacobian.transpose() * &self.0 * jacobian)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Order {
    Value,
    Gradient,
    Information,
    Hessian,
}

/// Accumulated sums of one pass over the series.
struct Pass {
    loglik: f64,
    score: [f64; NUM_PARAMS],
    g_sum: [[f64; NUM_PARAMS]; NUM_PARAMS],
    hess_sum: [[f64; NUM_PARAMS]; NUM_PARAMS],
}

fn check_inputs(params: &SetparParams, lambda_init: f64) -> Result<()> {
    if !(lambda_init.is_finite() && lambda_init > 0.0) {
        return domain(format!("initial intensity must be finite and positive, got {lambda_init}"));
    }
    let theta = params.to_array();
    if theta.iter().any(|v| !v.is_finite()) {
        return domain(format!("non-finite parameters {theta:?}"));
    }
    Ok(())
}

fn run_pass(
    series: &CountSeries,
    params: &SetparParams,
    lambda_init: f64,
    order: Order,
    mut visit: impl FnMut(&ScoreState),
) -> Pass {
    let ys = series.values();
    let mut out = Pass {
        loglik: 0.0,
        score: [0.0; NUM_PARAMS],
        g_sum: [[0.0; NUM_PARAMS]; NUM_PARAMS],
        hess_sum: [[0.0; NUM_PARAMS]; NUM_PARAMS],
    };
    let mut lambda = lambda_init;
    let mut dl = [0.0; NUM_PARAMS];
    let mut d2l = [[0.0; NUM_PARAMS]; NUM_PARAMS];

    for (t, &y) in ys.iter().enumerate() {
        if t > 0 {
            let y_prev = ys[t - 1];
            let (off, reg) = match params.regime(y_prev) {
                Regime::Lower => (0, &params.lower),
                Regime::Upper => (3, &params.upper),
            };
            let a = reg.a;
            if order == Order::Hessian {
                // ∂²λ_t/∂θ_j∂θ_k = a·∂²λ_{t-1} + 1{j = a_i}·∂λ_{t-1}/∂θ_k + 1{k = a_i}·∂λ_{t-1}/∂θ_j
                let ia = off + 1;
                for j in 0..NUM_PARAMS {
                    for k in 0..NUM_PARAMS {
                        d2l[j][k] *= a;
                    }
                }
                for k in 0..NUM_PARAMS {
                    d2l[ia][k] += dl[k];
                    d2l[k][ia] += dl[k];
                }
            }
            if order != Order::Value {
                for v in dl.iter_mut() {
                    *v *= a;
                }
                dl[off] += 1.0;
                dl[off + 1] += lambda;
                dl[off + 2] += y_prev as f64;
            }
            lambda = reg.step(lambda, y_prev);
        }

        let yf = y as f64;
        out.loglik += if y == 0 { -lambda } else { -lambda + yf * lambda.ln() };
        if order == Order::Value {
            continue;
        }
        let resid = yf / lambda - 1.0;
        let inv_lambda = 1.0 / lambda;
        for j in 0..NUM_PARAMS {
            out.score[j] += resid * dl[j];
        }
        if order == Order::Information {
            for j in 0..NUM_PARAMS {
                for k in 0..NUM_PARAMS {
                    out.g_sum[j][k] += inv_lambda * dl[j] * dl[k];
                }
            }
        }
        if order == Order::Hessian {
            let w = yf / (lambda * lambda);
            for j in 0..NUM_PARAMS {
                for k in 0..NUM_PARAMS {
                    out.hess_sum[j][k] += resid * d2l[j][k] - w * dl[j] * dl[k];
                }
            }
        }
        visit(&ScoreState { lambda, dlam_dtheta: dl });
    }
    out
}

fn to_matrix(m: &[[f64; NUM_PARAMS]; NUM_PARAMS], scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(NUM_PARAMS, NUM_PARAMS, |i, j| m[i][j] * scale)
}

/// `Σ_t [−λ̃_t + Y_t·log λ̃_t]` with `λ̃_1 = lambda_init`.
pub fn log_likelihood(series: &CountSeries, params: &SetparParams, lambda_init: f64) -> Result<f64> {
    check_inputs(params, lambda_init)?;
    Ok(run_pass(series, params, lambda_init, Order::Value, |_| {}).loglik)
}

/// Gradient of [`log_likelihood`] with respect to the six continuous
/// coefficients at fixed threshold.
pub fn score(series: &CountSeries, params: &SetparParams, lambda_init: f64) -> Result<[f64; NUM_PARAMS]> {
    Ok(loglik_and_score(series, params, lambda_init)?.1)
}

/// Log-likelihood and score from a single pass.
pub fn loglik_and_score(
    series: &CountSeries,
    params: &SetparParams,
    lambda_init: f64,
) -> Result<(f64, [f64; NUM_PARAMS])> {
    check_inputs(params, lambda_init)?;
    let pass = run_pass(series, params, lambda_init, Order::Gradient, |_| {});
    Ok((pass.loglik, pass.score))
}

/// `Ĝ = (1/n)·Σ_t λ̃_t⁻¹·(∂λ̃_t/∂θ)(∂λ̃_t/∂θ)ᵀ`.
pub fn g_hat(series: &CountSeries, params: &SetparParams, lambda_init: f64) -> Result<InfoMatrix> {
    check_inputs(params, lambda_init)?;
    let pass = run_pass(series, params, lambda_init, Order::Information, |_| {});
    Ok(InfoMatrix(to_matrix(&pass.g_sum, 1.0 / series.len() as f64)))
}

/// Negative averaged Hessian `−(1/n)·Σ_t ∂²ℓ̃_t/∂θ∂θᵀ`.
pub fn observed_information(series: &CountSeries, params: &SetparParams, lambda_init: f64) -> Result<InfoMatrix> {
    check_inputs(params, lambda_init)?;
    let pass = run_pass(series, params, lambda_init, Order::Hessian, |_| {});
    Ok(InfoMatrix(to_matrix(&pass.hess_sum, -1.0 / series.len() as f64)))
}

/// `(λ̃_t, ∂λ̃_t/∂θ)` for every `t`.
pub fn score_states(series: &CountSeries, params: &SetparParams, lambda_init: f64) -> Result<Vec<ScoreState>> {
    check_inputs(params, lambda_init)?;
    let mut states = Vec::with_capacity(series.len());
    run_pass(series, params, lambda_init, Order::Gradient, |s| states.push(*s));
    Ok(states)
}
