//! VAR(1) lift of a VARMA(p, q) process and the checks built on it.
//!
//! The state vector is `[X_t, ..., X_{t-p+1}, Z_t, ..., Z_{t-q+1}]`, so the
//! first block row of the lift holds `[Phi_1 .. Phi_p Theta_1 .. Theta_q]`,
//! identity blocks sit on the sub-diagonal of both the AR and MA parts and the
//! first block row of the MA part is zero.

use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{invalid, Error, Result};

/// A spectral radius below `1 - CAUSALITY_TOL` counts as causal.
pub const CAUSALITY_TOL: f64 = 1e-6;
pub const NILPOTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CompanionForm {
    upsilon: DMatrix<f64>,
    k: usize,
    p: usize,
    q: usize,
}

impl CompanionForm {
    pub fn upsilon(&self) -> &DMatrix<f64> {
        &self.upsilon
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
}

pub fn companion(phis: &[DMatrix<f64>], thetas: &[DMatrix<f64>]) -> Result<CompanionForm> {
    let first = phis
        .first()
        .ok_or_else(|| invalid("companion form needs at least one AR coefficient matrix"))?;
    let k = first.nrows();
    if k == 0 || phis.iter().chain(thetas).any(|m| m.shape() != (k, k)) {
        return Err(invalid("all coefficient blocks must be KxK with the same K"));
    }
    let (p, q) = (phis.len(), thetas.len());
    let n = k * (p + q);
    let mut u = DMatrix::zeros(n, n);
    for (i, block) in phis.iter().chain(thetas).enumerate() {
        u.view_mut((0, i * k), (k, k)).copy_from(block);
    }
    for i in 1..p {
        u.view_mut((i * k, (i - 1) * k), (k, k)).fill_with_identity();
    }
    for i in 1..q {
        u.view_mut(((p + i) * k, (p + i - 1) * k), (k, k)).fill_with_identity();
    }
    Ok(CompanionForm { upsilon: u, k, p, q })
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(invalid("spectral radius needs a square matrix"));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn is_causal(cf: &CompanionForm) -> Result<(bool, f64)> {
    let radius = spectral_radius(&cf.upsilon)?;
    Ok((radius < 1.0 - CAUSALITY_TOL, radius))
}

/// `Upsilon^n == 0` (entrywise within 1e-10) where `n` is the lift dimension.
pub fn is_nilpotent(cf: &CompanionForm) -> bool {
    let n = cf.upsilon.nrows();
    let mut power = DMatrix::identity(n, n);
    for _ in 0..n {
        power = &power * &cf.upsilon;
        if power.amax() <= NILPOTENCY_TOL {
            return true;
        }
    }
    power.amax() <= NILPOTENCY_TOL
}

/// MA(infinity) weights `Psi_0..=Psi_n` read off powers of the lift. The
/// innovation enters both the first AR and first MA state block, so
/// `Psi_j` is the sum of those two top-row blocks of `Upsilon^j`.
pub fn ma_coefficients(cf: &CompanionForm, n: usize) -> Result<Vec<DMatrix<f64>>> {
    let (causal, radius) = is_causal(cf)?;
    if !causal {
        return Err(Error::NotCausal { radius });
    }
    let (k, dim) = (cf.k, cf.upsilon.nrows());
    let mut power = DMatrix::identity(dim, dim);
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..=n {
        if j > 0 {
            power = &power * &cf.upsilon;
        }
        let mut psi = power.view((0, 0), (k, k)).into_owned();
        if cf.q > 0 {
            psi += power.view((0, cf.p * k), (k, k));
        }
        out.push(psi);
    }
    Ok(out)
}

/// `det(I - Upsilon z)`.
pub fn lift_determinant(cf: &CompanionForm, z: Complex<f64>) -> Complex<f64> {
    let n = cf.upsilon.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j {
            Complex::new(1.0, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        };
        id - z * cf.upsilon[(i, j)]
    });
    m.determinant()
}

/// `det(I - Phi_1 z - ... - Phi_p z^p)`.
pub fn ar_polynomial_determinant(phis: &[DMatrix<f64>], z: Complex<f64>) -> Complex<f64> {
    let k = phis.first().map_or(0, DMatrix::nrows);
    let mut m = DMatrix::<Complex<f64>>::identity(k, k);
    let mut zp = Complex::new(1.0, 0.0);
    for phi in phis {
        zp *= z;
        m -= phi.map(|v| Complex::new(v, 0.0)) * zp;
    }
    m.determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nilpotent_example() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 0.0])
    }

    #[test]
    fn var1_lift_is_the_coefficient_matrix() {
        let phi = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let cf = companion(std::slice::from_ref(&phi), &[]).unwrap();
        assert_eq!(cf.upsilon(), &phi);
    }

    #[test]
    fn scalar_ar2_textbook_companion() {
        let cf = companion(
            &[DMatrix::from_element(1, 1, 0.3), DMatrix::from_element(1, 1, -0.2)],
            &[],
        )
        .unwrap();
        assert_eq!(cf.upsilon(), &DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 1.0, 0.0]));
    }

    #[test]
    fn varma_layout() {
        let a = |v: f64| DMatrix::from_element(1, 1, v);
        let cf = companion(&[a(0.5), a(0.2)], &[a(0.7), a(0.1)]).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.5, 0.2, 0.7, 0.1, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        );
        assert_eq!(cf.upsilon(), &expected);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let r = companion(&[DMatrix::zeros(2, 2)], &[DMatrix::zeros(3, 3)]);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
        assert!(companion(&[], &[]).is_err());
    }

    #[test]
    fn causality_examples() {
        let half = companion(&[DMatrix::identity(2, 2) * 0.5], &[]).unwrap();
        let (c, r) = is_causal(&half).unwrap();
        assert!(c);
        assert!((r - 0.5).abs() < 1e-12);

        let unit = companion(&[DMatrix::identity(2, 2)], &[]).unwrap();
        let (c, r) = is_causal(&unit).unwrap();
        assert!(!c);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nilpotency_examples() {
        let cf = companion(&[nilpotent_example()], &[]).unwrap();
        assert!(is_nilpotent(&cf));
        assert!((cf.upsilon() * cf.upsilon()).amax() == 0.0);
        assert!(!is_nilpotent(
            &companion(&[DMatrix::identity(2, 2) * 0.5], &[]).unwrap()
        ));
        assert!(is_nilpotent(&companion(&[DMatrix::zeros(3, 3)], &[]).unwrap()));
    }

    #[test]
    fn ma_weights() {
        let cf = companion(&[DMatrix::from_element(1, 1, 0.5)], &[]).unwrap();
        let psi: Vec<f64> = ma_coefficients(&cf, 3).unwrap().iter().map(|m| m[(0, 0)]).collect();
        assert_eq!(psi, vec![1.0, 0.5, 0.25, 0.125]);

        let cf = companion(&[nilpotent_example()], &[]).unwrap();
        let psi = ma_coefficients(&cf, 4).unwrap();
        assert_eq!(psi[0], DMatrix::identity(2, 2));
        assert_eq!(psi[1], nilpotent_example());
        assert!(psi[2..].iter().all(|m| m.amax() == 0.0));

        // ARMA(1,1): psi_1 = phi + theta, psi_2 = phi (phi + theta)
        let a = |v: f64| DMatrix::from_element(1, 1, v);
        let cf = companion(&[a(0.5)], &[a(0.3)]).unwrap();
        let psi = ma_coefficients(&cf, 2).unwrap();
        assert!((psi[1][(0, 0)] - 0.8).abs() < 1e-15);
        assert!((psi[2][(0, 0)] - 0.4).abs() < 1e-15);

        let unit = companion(&[DMatrix::identity(1, 1)], &[]).unwrap();
        assert!(matches!(ma_coefficients(&unit, 2), Err(Error::NotCausal { .. })));
    }
}
