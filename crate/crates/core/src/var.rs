//! VAR(p) least-squares estimation and AIC order selection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::series::{demean, TimeSeries};

/// Regressor Gram matrices with a (diagonally equilibrated) condition number
/// above this are treated as rank deficient.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// A fitted (or hand-specified) VAR(p) model
/// `X_t - mean = c + Phi_1 (X_{t-1} - mean) + ... + Phi_p (X_{t-p} - mean) + Z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    coeffs: Vec<DMatrix<f64>>,
    noise_cov: DMatrix<f64>,
    mean: DVector<f64>,
    intercept: DVector<f64>,
}

impl VarModel {
    /// A zero-mean model with the given coefficients and innovation covariance.
    pub fn new(coeffs: Vec<DMatrix<f64>>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let k = noise_cov.nrows();
        if coeffs.is_empty() {
            return Err(invalid("a VAR model needs at least one coefficient matrix"));
        }
        if noise_cov.ncols() != k || coeffs.iter().any(|c| c.shape() != (k, k)) {
            return Err(invalid("coefficient and covariance matrices must all be KxK"));
        }
        if (&noise_cov - noise_cov.transpose()).amax() > 1e-10 {
            return Err(invalid("noise covariance is not symmetric"));
        }
        Ok(Self {
            coeffs,
            noise_cov,
            mean: DVector::zeros(k),
            intercept: DVector::zeros(k),
        })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dim(&self) -> usize {
        self.noise_cov.nrows()
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// Column means removed from the data before fitting.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Constant term of the demeaned regression; close to zero for stationary data.
    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }
}

/// Fitted innovations. Row `i` belongs to time index `offset + i` of the source series.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    data: DMatrix<f64>,
    offset: usize,
}

impl ResidualSeries {
    pub fn new(data: DMatrix<f64>, offset: usize) -> Self {
        Self { data, offset }
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }
}

struct OlsFit {
    // (Kp + 1) x K, lag blocks first, constant row last.
    beta: DMatrix<f64>,
    residuals: DMatrix<f64>,
}

/// Regresses rows `start..T` of `x` on their first `p` lags plus a constant.
fn ols(x: &DMatrix<f64>, p: usize, start: usize) -> Result<OlsFit> {
    let (t, k) = x.shape();
    debug_assert!(start >= p && start < t);
    let n = t - start;
    let width = k * p + 1;
    if n < width {
        return Err(Error::InsufficientLength {
            needed: start + width,
            got: t,
        });
    }
    let regressors = DMatrix::from_fn(n, width, |i, c| {
        if c == width - 1 {
            1.0
        } else {
            let (lag, j) = (c / k + 1, c % k);
            x[(start + i - lag, j)]
        }
    });
    let targets = x.rows(start, n).into_owned();

    let gram = regressors.transpose() * &regressors;
    check_conditioning(&gram)?;
    let rhs = regressors.transpose() * &targets;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("regressor Gram matrix is not positive definite".into()))?;
    let beta = chol.solve(&rhs);
    let residuals = targets - &regressors * &beta;
    Ok(OlsFit { beta, residuals })
}

fn check_conditioning(gram: &DMatrix<f64>) -> Result<()> {
    let diag = gram.diagonal();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::RankDeficient("a regressor column is identically zero".into()));
    }
    let scale = diag.map(|d| 1.0 / d.sqrt());
    let scaled = DMatrix::from_fn(gram.nrows(), gram.ncols(), |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > MAX_GRAM_CONDITION {
        return Err(Error::RankDeficient(format!(
            "regressor Gram matrix condition number {:.3e} exceeds {MAX_GRAM_CONDITION:e}",
            if lo > 0.0 { hi / lo } else { f64::INFINITY }
        )));
    }
    Ok(())
}

fn min_len(k: usize, p: usize) -> usize {
    k * p + p + 1
}

/// Least-squares VAR(p) fit. The series is demeaned internally and a
/// constant is included in the regression, so residuals have exactly zero mean.
pub fn fit_var(ts: &TimeSeries, p: usize) -> Result<(VarModel, ResidualSeries)> {
    if p == 0 {
        return Err(invalid("VAR order must be at least 1"));
    }
    let k = ts.dim();
    if ts.len() < min_len(k, p) {
        return Err(Error::InsufficientLength {
            needed: min_len(k, p),
            got: ts.len(),
        });
    }
    let (centered, mean) = demean(ts);
    let fit = ols(centered.data(), p, p)?;

    let coeffs = (0..p).map(|lag| fit.beta.rows(lag * k, k).transpose()).collect();
    let intercept = fit.beta.row(k * p).transpose();
    let n = fit.residuals.nrows() as f64;
    let cov = fit.residuals.transpose() * &fit.residuals / n;
    let noise_cov = (&cov + cov.transpose()) * 0.5;

    let model = VarModel {
        coeffs,
        noise_cov,
        mean,
        intercept,
    };
    Ok((model, ResidualSeries::new(fit.residuals, p)))
}

/// `AIC(p) = ln det Sigma(p) + 2 p K^2 / T_eff` for `p = 1..=p_max`, all fits
/// sharing the sample window `t = p_max..T`.
pub fn aic_curve(ts: &TimeSeries, p_max: usize) -> Result<Vec<f64>> {
    if p_max == 0 {
        return Err(invalid("p_max must be at least 1"));
    }
    let k = ts.dim();
    if ts.len() < min_len(k, p_max) {
        return Err(Error::InsufficientLength {
            needed: min_len(k, p_max),
            got: ts.len(),
        });
    }
    let (centered, _) = demean(ts);
    let t_eff = (ts.len() - p_max) as f64;
    (1..=p_max)
        .map(|p| {
            let fit = ols(centered.data(), p, p_max)?;
            let sigma = fit.residuals.transpose() * &fit.residuals / t_eff;
            let det = sigma.determinant();
            let log_det = if det > 0.0 { det.ln() } else { f64::NEG_INFINITY };
            Ok(log_det + 2.0 * (p * k * k) as f64 / t_eff)
        })
        .collect()
}

/// Index (1-based order) of the smallest criterion value; ties go to the smaller order.
pub(crate) fn argmin_order(curve: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in curve.iter().enumerate() {
        if *v < curve[best] {
            best = i;
        }
    }
    best + 1
}

/// AIC-minimizing VAR order in `1..=p_max`.
pub fn select_order(ts: &TimeSeries, p_max: usize) -> Result<usize> {
    Ok(argmin_order(&aic_curve(ts, p_max)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_ar1_is_recovered_exactly() {
        let values: Vec<f64> = (0..50).map(|t| 0.5f64.powi(t)).collect();
        let ts = TimeSeries::from_rows(50, 1, &values).unwrap();
        let (model, res) = fit_var(&ts, 1).unwrap();
        assert!((model.coeffs()[0][(0, 0)] - 0.5).abs() < 1e-10);
        assert!(res.data().amax() < 1e-10);
        assert_eq!(res.len(), 49);
        assert_eq!(res.offset(), 1);
    }

    #[test]
    fn too_short_and_degenerate_inputs() {
        let ts = TimeSeries::from_rows(4, 2, &[1.0, 2.0, 0.5, 0.1, 3.0, 1.0, 2.0, 2.5]).unwrap();
        // needs K p + p + 1 = 4 rows at p = 1, 7 at p = 2
        assert!(fit_var(&ts, 2).is_err());
        assert!(matches!(fit_var(&ts, 0), Err(Error::InvalidArgument(_))));

        let constant = TimeSeries::from_rows(20, 1, &[1.5; 20]).unwrap();
        assert!(matches!(fit_var(&constant, 1), Err(Error::RankDeficient(_))));

        // second column duplicates the first
        let vals: Vec<f64> = (0..40)
            .flat_map(|t| {
                let v = ((t * 7919) % 13) as f64;
                [v, v]
            })
            .collect();
        let dup = TimeSeries::from_rows(40, 2, &vals).unwrap();
        assert!(matches!(fit_var(&dup, 1), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn select_order_rejects_zero() {
        let ts = TimeSeries::from_rows(10, 1, &[1.0, 2.0, 0.0, 3.0, 1.0, 4.0, 2.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(select_order(&ts, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn argmin_prefers_smaller_order_on_ties() {
        assert_eq!(argmin_order(&[1.0, 0.5, 0.5]), 2);
        assert_eq!(argmin_order(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), 1);
    }
}
