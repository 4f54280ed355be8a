//! VAR(p) simulation with random decaying coefficients and `sgn(G) |G|^r` noise.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::companion::{companion, is_causal, spectral_radius};
use crate::error::{invalid, Error, Result};
use crate::series::TimeSeries;

pub const DEFAULT_LAMBDA: f64 = 2.5;
pub const DEFAULT_BURN_IN: usize = 1000;
/// Coefficient draws are rejected until the companion spectral radius is below this.
pub const MAX_SIM_RADIUS: f64 = 0.95;
pub const MAX_COEFF_ATTEMPTS: usize = 1000;

/// Noise columns are divided by their root mean square, i.e. scaled to unit
/// sample second moment. The family is symmetric so the mean is already ~0.
pub const NOISE_STANDARDIZATION: &str = "unit-sample-second-moment";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: usize,
    pub p: usize,
    pub t: usize,
    pub lambda: f64,
    /// Noise exponent per component.
    pub r: Vec<f64>,
    /// Components forced to Gaussian noise (`r = 1`), 0-based.
    #[serde(default)]
    pub gaussian_dims: Vec<usize>,
    pub burn_in: usize,
    pub seed: u64,
}

impl SimConfig {
    /// All components share exponent `r`; defaults for everything else.
    pub fn uniform(k: usize, p: usize, t: usize, r: f64, seed: u64) -> Self {
        Self {
            k,
            p,
            t,
            lambda: DEFAULT_LAMBDA,
            r: vec![r; k],
            gaussian_dims: Vec::new(),
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p == 0 || self.t == 0 {
            return Err(invalid("k, p and t must all be at least 1"));
        }
        if !(self.lambda > 1.0) {
            return Err(invalid(format!("lambda must exceed 1, got {}", self.lambda)));
        }
        if self.r.len() != self.k {
            return Err(invalid(format!(
                "expected {} noise exponents, got {}",
                self.k,
                self.r.len()
            )));
        }
        if self.r.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid("noise exponents must be finite and nonnegative"));
        }
        if let Some(d) = self.gaussian_dims.iter().find(|d| **d >= self.k) {
            return Err(invalid(format!("gaussian dimension {d} out of range for k={}", self.k)));
        }
        Ok(())
    }

    /// Per-component exponents after forcing `gaussian_dims` to 1.
    pub fn exponents(&self) -> Vec<f64> {
        let mut r = self.r.clone();
        for d in &self.gaussian_dims {
            r[*d] = 1.0;
        }
        r
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub series: TimeSeries,
    pub coeffs: Vec<DMatrix<f64>>,
    /// Coefficient draws needed to pass the causality check.
    pub attempts: usize,
}

fn draw_coeffs<R: Rng + ?Sized>(k: usize, p: usize, lambda: f64, rng: &mut R) -> Vec<DMatrix<f64>> {
    (1..=p)
        .map(|i| {
            let a = lambda.powi(-(i as i32));
            let b = (2.0 * lambda).powi(-(i as i32));
            let mut m = DMatrix::zeros(k, k);
            for row in 0..k {
                for col in 0..k {
                    m[(row, col)] = a * rng.random::<f64>() - b;
                }
            }
            m
        })
        .collect()
}

/// Draws `Phi_i = lambda^-i R - (2 lambda)^-i Q` (`R` uniform on [0, 1), `Q`
/// all ones) until the process is causal with radius below [`MAX_SIM_RADIUS`].
/// Returns the coefficients and the number of draws used.
pub fn gen_coeffs_counted<R: Rng + ?Sized>(
    k: usize,
    p: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<(Vec<DMatrix<f64>>, usize)> {
    if k == 0 || p == 0 {
        return Err(invalid("k and p must be at least 1"));
    }
    if !(lambda > 1.0) {
        return Err(invalid(format!("lambda must exceed 1, got {lambda}")));
    }
    for attempt in 1..=MAX_COEFF_ATTEMPTS {
        let coeffs = draw_coeffs(k, p, lambda, rng);
        let cf = companion(&coeffs, &[])?;
        if spectral_radius(cf.upsilon())? < MAX_SIM_RADIUS {
            return Ok((coeffs, attempt));
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_COEFF_ATTEMPTS,
    })
}

pub fn gen_coeffs<R: Rng + ?Sized>(k: usize, p: usize, lambda: f64, rng: &mut R) -> Result<Vec<DMatrix<f64>>> {
    gen_coeffs_counted(k, p, lambda, rng).map(|(c, _)| c)
}

/// `t x k` noise with entries `sgn(G) |G|^{r_j}`, each column scaled to unit
/// sample second moment.
pub fn gen_noise<R: Rng + ?Sized>(t: usize, k: usize, r: &[f64], rng: &mut R) -> Result<DMatrix<f64>> {
    if r.len() != k {
        return Err(invalid(format!("expected {k} noise exponents, got {}", r.len())));
    }
    let mut noise = DMatrix::zeros(t, k);
    for row in 0..t {
        for (col, exp) in r.iter().enumerate() {
            let g: f64 = rng.sample(StandardNormal);
            noise[(row, col)] = g.signum() * g.abs().powf(*exp);
        }
    }
    for mut col in noise.column_iter_mut() {
        let rms = (col.norm_squared() / t as f64).sqrt();
        if rms > 0.0 {
            col /= rms;
        }
    }
    Ok(noise)
}

/// Runs `X_t = sum_j Phi_j X_{t-j} + Z_t` from zero initial conditions and
/// drops the first `burn_in` rows.
pub fn simulate_var(coeffs: &[DMatrix<f64>], noise: &DMatrix<f64>, burn_in: usize) -> Result<TimeSeries> {
    let cf = companion(coeffs, &[])?;
    let (causal, radius) = is_causal(&cf)?;
    if !causal {
        return Err(Error::NotCausal { radius });
    }
    let k = cf.k();
    if noise.ncols() != k {
        return Err(invalid(format!("noise has {} columns, model has K={k}", noise.ncols())));
    }
    let total = noise.nrows();
    if total <= burn_in {
        return Err(Error::InsufficientLength {
            needed: burn_in + 1,
            got: total,
        });
    }
    let mut x = DMatrix::zeros(total, k);
    for t in 0..total {
        let mut row = noise.row(t).transpose();
        for (j, phi) in coeffs.iter().enumerate() {
            if t > j {
                row += phi * x.row(t - 1 - j).transpose();
            }
        }
        x.set_row(t, &row.transpose());
    }
    TimeSeries::new(x.rows(burn_in, total - burn_in).into_owned())
}

/// Full generator: coefficients first, then noise, from one ChaCha8 stream seeded by `cfg.seed`.
pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (coeffs, attempts) = gen_coeffs_counted(cfg.k, cfg.p, cfg.lambda, &mut rng)?;
    let noise = gen_noise(cfg.t + cfg.burn_in, cfg.k, &cfg.exponents(), &mut rng)?;
    let series = simulate_var(&coeffs, &noise, cfg.burn_in)?;
    Ok(Simulation {
        series,
        coeffs,
        attempts,
    })
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in cell `cell`:
/// `splitmix64(splitmix64(splitmix64(base) ^ cell) ^ trial)`.
pub fn derive_seed(base: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ cell) ^ trial)
}
