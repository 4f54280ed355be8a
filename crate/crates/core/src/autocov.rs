//! Autocovariances of a VAR(1) process and its Gaussian time reversal.
//!
//! Convention throughout: `Gamma_k = cov(X_t, X_{t+k}) = E[X_t X_{t+k}^T]`
//! (zero mean). For `X_t = Phi X_{t-1} + Z_t` this gives
//! `Gamma_k = Gamma_{k-1} Phi^T`.

use nalgebra::{DMatrix, DVector};

use crate::companion::{companion, is_causal};
use crate::error::{invalid, Error, Result};
use crate::series::{demean, TimeSeries};
use crate::var::VarModel;

#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSequence {
    gammas: Vec<DMatrix<f64>>,
}

impl AutocovSequence {
    /// `Gamma_0..=Gamma_h`.
    pub fn gammas(&self) -> &[DMatrix<f64>] {
        &self.gammas
    }

    pub fn lag(&self, k: usize) -> Option<&DMatrix<f64>> {
        self.gammas.get(k)
    }
}

fn require_causal_var1(model: &VarModel) -> Result<&DMatrix<f64>> {
    if model.order() != 1 {
        return Err(invalid(format!("expected a VAR(1) model, got order {}", model.order())));
    }
    let phi = &model.coeffs()[0];
    let (causal, radius) = is_causal(&companion(model.coeffs(), &[])?)?;
    if !causal {
        return Err(Error::NotCausal { radius });
    }
    Ok(phi)
}

/// Solves the discrete Lyapunov equation `Gamma_0 = Phi Gamma_0 Phi^T + Sigma`
/// through its vectorised form and propagates `Gamma_k = Gamma_{k-1} Phi^T`.
pub fn theoretical_autocov(model: &VarModel, h: usize) -> Result<AutocovSequence> {
    let phi = require_causal_var1(model)?;
    let k = model.dim();
    let kron = phi.kronecker(phi);
    let system = DMatrix::identity(k * k, k * k) - kron;
    let rhs = DVector::from_column_slice(model.noise_cov().as_slice());
    let vec_gamma = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Lyapunov system is singular".into()))?;
    let g0 = DMatrix::from_column_slice(k, k, vec_gamma.as_slice());
    let g0 = (&g0 + g0.transpose()) * 0.5;

    let phi_t = phi.transpose();
    let mut gammas = Vec::with_capacity(h + 1);
    gammas.push(g0);
    for lag in 1..=h {
        let next = &gammas[lag - 1] * &phi_t;
        gammas.push(next);
    }
    Ok(AutocovSequence { gammas })
}

/// Coefficient of the time-reversed representation `X_t = Phi~ X_{t+1} + Z~_t`,
/// `Phi~ = cov(X_t, X_{t+1}) cov(X_{t+1}, X_{t+1})^{-1} = Gamma_1 Gamma_0^{-1}`.
pub fn reverse_gaussian_var1(model: &VarModel) -> Result<DMatrix<f64>> {
    let acv = theoretical_autocov(model, 1)?;
    let (g0, g1) = (&acv.gammas[0], &acv.gammas[1]);
    let eig = g0.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > 1e12 {
        return Err(Error::RankDeficient("Gamma_0 is singular".into()));
    }
    let inv = g0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("Gamma_0 is singular".into()))?;
    Ok(g1 * inv)
}

/// Sample autocovariances `(1/T) sum_t (x_t - m)(x_{t+k} - m)^T` for `k = 0..=h`.
pub fn sample_autocov(ts: &TimeSeries, h: usize) -> Result<AutocovSequence> {
    if h >= ts.len() {
        return Err(Error::InsufficientLength {
            needed: h + 1,
            got: ts.len(),
        });
    }
    let (centered, _) = demean(ts);
    let x = centered.data();
    let t = ts.len();
    let gammas = (0..=h)
        .map(|lag| {
            let head = x.rows(0, t - lag);
            let tail = x.rows(lag, t - lag);
            head.transpose() * tail / t as f64
        })
        .collect();
    Ok(AutocovSequence { gammas })
}
