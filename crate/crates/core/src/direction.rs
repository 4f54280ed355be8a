//! Two-direction residual-independence test for the arrow of time.
//!
//! A VAR model is fitted to the series as given and to its reversal. In each
//! direction the residuals are tested for independence of lagged values; the
//! direction whose residuals look independent while the other's do not is
//! reported, with an explicit "undecided" outcome when the scores do not
//! separate across the `sig1`/`sig2` gap.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hsic::{
    hsic_pvalue, hsic_statistic, median_bandwidth, per_dimension_median_bandwidth, BandwidthMethod, HsicResult,
    KernelConfig, PValueMethod,
};
use crate::series::TimeSeries;
use crate::var::{aic_curve, argmin_order, fit_var, select_order, ResidualSeries};

/// Minimum number of aligned (value, residual) pairs for scoring.
pub const MIN_PAIRS: usize = 20;
/// Sample covariance condition number above which a series is rejected as degenerate.
pub const MAX_COV_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Score is `-HSIC`.
    NegStatistic,
    /// Score is the HSIC p-value.
    PValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OrderSelection {
    Aic { p_max: usize },
    Fixed { p: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultipleTesting {
    None,
    Bonferroni,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Bandwidth {
    /// Median heuristic on each block, recomputed per direction and lag.
    Median,
    /// Median heuristic scaled by `1/sqrt(d)` for a `d`-dimensional block.
    /// With the plain heuristic the kernel becomes nearly linear as `d`
    /// grows, and least-squares residuals are exactly uncorrelated with the
    /// regressors, so the test loses its power in both directions.
    MedianPerDimension,
    Fixed {
        x: f64,
        z: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionConfig {
    pub sig1: f64,
    pub sig2: f64,
    pub variant: Variant,
    pub lags: Vec<usize>,
    pub order: OrderSelection,
    /// Select the AIC order separately in each direction instead of sharing one.
    pub independent_orders: bool,
    pub multiple_testing: MultipleTesting,
    pub pvalue: PValueMethod,
    pub bandwidth: Bandwidth,
}

impl Default for DirectionConfig {
    fn default() -> Self {
        Self {
            sig1: 0.1,
            sig2: 0.05,
            variant: Variant::PValue,
            lags: vec![1],
            order: OrderSelection::Aic { p_max: 5 },
            independent_orders: false,
            multiple_testing: MultipleTesting::None,
            pvalue: PValueMethod::Gamma,
            bandwidth: Bandwidth::MedianPerDimension,
        }
    }
}

impl DirectionConfig {
    /// Statistic-scored configuration. There are no sensible default
    /// thresholds on the `-HSIC` scale, so both must be given.
    pub fn neg_statistic(sig1: f64, sig2: f64) -> Self {
        Self {
            sig1,
            sig2,
            variant: Variant::NegStatistic,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sig1.is_finite() && self.sig2.is_finite()) {
            return Err(invalid("thresholds must be finite"));
        }
        if self.sig2 > self.sig1 {
            return Err(invalid(format!(
                "sig2 ({}) must not exceed sig1 ({})",
                self.sig2, self.sig1
            )));
        }
        if self.lags.is_empty() {
            return Err(invalid("at least one lag is required"));
        }
        if self.lags[0] == 0 || self.lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("lags must be positive, sorted and distinct"));
        }
        match self.order {
            OrderSelection::Aic { p_max: 0 } | OrderSelection::Fixed { p: 0 } => {
                return Err(invalid("VAR order must be at least 1"))
            }
            _ => {}
        }
        if let PValueMethod::ShiftPermutation { n_resample: 0 } = self.pvalue {
            return Err(invalid("shift-permutation needs at least one resample"));
        }
        if let Bandwidth::Fixed { x, z } = self.bandwidth {
            KernelConfig::fixed(x, z)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Forward,
    Backward,
    Undecided,
}

impl Verdict {
    pub fn flipped(self) -> Self {
        match self {
            Verdict::Forward => Verdict::Backward,
            Verdict::Backward => Verdict::Forward,
            Verdict::Undecided => Verdict::Undecided,
        }
    }
}

/// Decision rule: commit to the larger score only when it exceeds `sig1`
/// while the smaller one falls below `sig2`. Exact ties stay undecided.
pub fn decide(fw: f64, bw: f64, sig1: f64, sig2: f64) -> Verdict {
    if fw.max(bw) > sig1 && fw.min(bw) < sig2 {
        if fw > bw {
            Verdict::Forward
        } else if bw > fw {
            Verdict::Backward
        } else {
            Verdict::Undecided
        }
    } else {
        Verdict::Undecided
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagScore {
    pub lag: usize,
    pub result: HsicResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionScore {
    pub score: f64,
    pub order: usize,
    pub per_lag: Vec<LagScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagDiagnostics {
    pub lag: usize,
    pub fw: HsicResult,
    pub bw: HsicResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub verdict: Verdict,
    pub fw_score: f64,
    pub bw_score: f64,
    pub order_used: usize,
    /// Differs from `order_used` only with independent per-direction orders.
    pub bw_order: usize,
    pub per_lag: Vec<LagDiagnostics>,
    pub variant: Variant,
    pub sig1: f64,
    pub sig2: f64,
}

/// Aligns residual `Z_t` with the observation `X_{t-lag}` for every `t`
/// where both exist. Returns `(x, z)` with matching rows.
pub fn lagged_pairs(ts: &TimeSeries, res: &ResidualSeries, lag: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if lag == 0 {
        return Err(invalid("lag must be at least 1"));
    }
    let t = ts.len();
    let p = res.offset();
    if p + res.len() != t || res.data().ncols() != ts.dim() {
        return Err(invalid("residual series does not belong to this time series"));
    }
    let start = p.max(lag);
    if start >= t {
        return Err(Error::InsufficientLength {
            needed: start + 1,
            got: t,
        });
    }
    let n = t - start;
    let x = ts.data().rows(start - lag, n).into_owned();
    let z = res.data().rows(start - p, n).into_owned();
    Ok((x, z))
}

fn block_bandwidth(sample: &DMatrix<f64>, per_dimension: bool) -> Result<f64> {
    let bw = if per_dimension {
        per_dimension_median_bandwidth(sample)
    } else {
        median_bandwidth(sample)
    };
    match bw {
        // all pairwise distances vanish, so any bandwidth yields the same constant kernel
        Err(Error::Degenerate(_)) => Ok(1.0),
        other => other,
    }
}

fn kernel_config(x: &DMatrix<f64>, z: &DMatrix<f64>, bw: Bandwidth) -> Result<KernelConfig> {
    match bw {
        Bandwidth::Fixed { x: bx, z: bz } => KernelConfig::fixed(bx, bz),
        Bandwidth::Median => Ok(KernelConfig {
            bandwidth_x: block_bandwidth(x, false)?,
            bandwidth_z: block_bandwidth(z, false)?,
            method: BandwidthMethod::MedianHeuristic,
        }),
        Bandwidth::MedianPerDimension => Ok(KernelConfig {
            bandwidth_x: block_bandwidth(x, true)?,
            bandwidth_z: block_bandwidth(z, true)?,
            method: BandwidthMethod::MedianPerDimension,
        }),
    }
}

/// HSIC result for one aligned pair set, with a p-value when the variant needs one.
pub fn score_pairs(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    cfg: &DirectionConfig,
    rng: &mut ChaCha8Rng,
) -> Result<HsicResult> {
    let kernel = kernel_config(x, z, cfg.bandwidth)?;
    match cfg.variant {
        Variant::NegStatistic => hsic_statistic(x, z, &kernel),
        Variant::PValue => hsic_pvalue(x, z, &kernel, cfg.pvalue, rng),
    }
}

/// Single-lag score: `-HSIC` or the p-value.
pub fn lag_score(result: &HsicResult, variant: Variant) -> f64 {
    match variant {
        Variant::NegStatistic => -result.statistic,
        Variant::PValue => result.p_value.unwrap_or(1.0),
    }
}

/// Combines per-lag scores: the least favourable lag wins, with a Bonferroni
/// factor on p-values when requested.
pub fn combine_scores(per_lag: &[LagScore], cfg: &DirectionConfig) -> f64 {
    let worst = per_lag
        .iter()
        .map(|l| lag_score(&l.result, cfg.variant))
        .fold(f64::INFINITY, f64::min);
    match (cfg.variant, cfg.multiple_testing) {
        (Variant::PValue, MultipleTesting::Bonferroni) => (worst * per_lag.len() as f64).min(1.0),
        _ => worst,
    }
}

/// Scores one orientation at a fixed VAR order. The resampling stream is
/// seeded from `seed` alone, so both orientations see identical draws.
pub fn score_direction_with_order(
    ts: &TimeSeries,
    cfg: &DirectionConfig,
    order: usize,
    seed: u64,
) -> Result<DirectionScore> {
    let (_, residuals) = fit_var(ts, order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_lag = cfg
        .lags
        .iter()
        .map(|&lag| {
            let (x, z) = lagged_pairs(ts, &residuals, lag)?;
            if x.nrows() < MIN_PAIRS {
                return Err(Error::InsufficientLength {
                    needed: ts.len() - x.nrows() + MIN_PAIRS,
                    got: ts.len(),
                });
            }
            Ok(LagScore {
                lag,
                result: score_pairs(&x, &z, cfg, &mut rng)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectionScore {
        score: combine_scores(&per_lag, cfg),
        order,
        per_lag,
    })
}

/// Scores the series in the orientation given, selecting the order from this series alone.
pub fn score_direction(ts: &TimeSeries, cfg: &DirectionConfig, seed: u64) -> Result<DirectionScore> {
    cfg.validate()?;
    let order = match cfg.order {
        OrderSelection::Fixed { p } => p,
        OrderSelection::Aic { p_max } => select_order(ts, p_max)?,
    };
    score_direction_with_order(ts, cfg, order, seed)
}

/// Forward and backward orders. The shared AIC order minimizes the sum of
/// the forward and backward criteria so it does not depend on orientation.
fn resolve_orders(fw: &TimeSeries, bw: &TimeSeries, cfg: &DirectionConfig) -> Result<(usize, usize)> {
    match cfg.order {
        OrderSelection::Fixed { p } => Ok((p, p)),
        OrderSelection::Aic { p_max } if cfg.independent_orders => {
            Ok((select_order(fw, p_max)?, select_order(bw, p_max)?))
        }
        OrderSelection::Aic { p_max } => {
            let f = aic_curve(fw, p_max)?;
            let b = aic_curve(bw, p_max)?;
            let joint: Vec<f64> = f.iter().zip(&b).map(|(a, b)| a + b).collect();
            let p = argmin_order(&joint);
            Ok((p, p))
        }
    }
}

fn check_not_degenerate(ts: &TimeSeries) -> Result<()> {
    let eig = ts.sample_covariance().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > MAX_COV_CONDITION {
        return Err(Error::RankDeficient(
            "sample covariance of the series is singular; drop constant or collinear components".into(),
        ));
    }
    Ok(())
}

/// Runs the full two-direction procedure.
pub fn detect(ts: &TimeSeries, cfg: &DirectionConfig, seed: u64) -> Result<DirectionReport> {
    cfg.validate()?;
    check_not_degenerate(ts)?;
    let bw_series = ts.reversed();
    let (fw_order, bw_order) = resolve_orders(ts, &bw_series, cfg)?;

    let (fw, bw) = rayon::join(
        || score_direction_with_order(ts, cfg, fw_order, seed),
        || score_direction_with_order(&bw_series, cfg, bw_order, seed),
    );
    let (fw, bw) = (fw?, bw?);

    let per_lag = fw
        .per_lag
        .into_iter()
        .zip(bw.per_lag)
        .map(|(f, b)| LagDiagnostics {
            lag: f.lag,
            fw: f.result,
            bw: b.result,
        })
        .collect();
    Ok(DirectionReport {
        verdict: decide(fw.score, bw.score, cfg.sig1, cfg.sig2),
        fw_score: fw.score,
        bw_score: bw.score,
        order_used: fw_order,
        bw_order,
        per_lag,
        variant: cfg.variant,
        sig1: cfg.sig1,
        sig2: cfg.sig2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_rule_examples() {
        assert_eq!(decide(0.5, 0.01, 0.1, 0.05), Verdict::Forward);
        assert_eq!(decide(0.01, 0.5, 0.1, 0.05), Verdict::Backward);
        assert_eq!(decide(0.07, 0.06, 0.1, 0.05), Verdict::Undecided);
        assert_eq!(decide(0.5, 0.5, 0.1, 0.05), Verdict::Undecided);
        assert_eq!(decide(0.03, 0.02, 0.1, 0.05), Verdict::Undecided);
    }

    #[test]
    fn lagged_pair_bookkeeping() {
        let ts = TimeSeries::from_rows(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let res = ResidualSeries::new(DMatrix::from_column_slice(4, 1, &[20.0, 30.0, 40.0, 50.0]), 1);
        let (x, z) = lagged_pairs(&ts, &res, 1).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(z.as_slice(), &[20.0, 30.0, 40.0, 50.0]);

        let (x, z) = lagged_pairs(&ts, &res, 3).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
        assert_eq!(z.as_slice(), &[40.0, 50.0]);

        assert!(lagged_pairs(&ts, &res, 5).is_err());
        assert!(lagged_pairs(&ts, &res, 0).is_err());
        let wrong = ResidualSeries::new(DMatrix::zeros(3, 1), 1);
        assert!(lagged_pairs(&ts, &wrong, 1).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DirectionConfig::default().validate().is_ok());
        let bad = [
            DirectionConfig {
                sig1: 0.01,
                sig2: 0.05,
                ..Default::default()
            },
            DirectionConfig {
                lags: vec![],
                ..Default::default()
            },
            DirectionConfig {
                lags: vec![2, 1],
                ..Default::default()
            },
            DirectionConfig {
                lags: vec![0, 1],
                ..Default::default()
            },
            DirectionConfig {
                lags: vec![1, 1],
                ..Default::default()
            },
            DirectionConfig {
                order: OrderSelection::Fixed { p: 0 },
                ..Default::default()
            },
            DirectionConfig {
                bandwidth: Bandwidth::Fixed { x: -1.0, z: 1.0 },
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidArgument(_))), "{cfg:?}");
        }
    }

    #[test]
    fn constant_residuals_score_zero_under_neg_statistic() {
        let cfg = DirectionConfig::neg_statistic(-0.001, -0.01);
        let x = DMatrix::from_fn(50, 2, |i, j| ((i * 31 + j * 7) % 11) as f64);
        let z = DMatrix::from_element(50, 2, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = score_pairs(&x, &z, &cfg, &mut rng).unwrap();
        assert_eq!(lag_score(&r, Variant::NegStatistic), 0.0);
    }

    #[test]
    fn bonferroni_combination() {
        let mk = |lag, p| LagScore {
            lag,
            result: HsicResult {
                statistic: 0.0,
                p_value: Some(p),
                n: 30,
                config: KernelConfig::fixed(1.0, 1.0).unwrap(),
                pvalue_method: Some(PValueMethod::Gamma),
            },
        };
        let lags = vec![mk(1, 0.2), mk(2, 0.01), mk(3, 0.6)];
        let mut cfg = DirectionConfig {
            lags: vec![1, 2, 3],
            ..Default::default()
        };
        assert_eq!(combine_scores(&lags, &cfg), 0.01);
        cfg.multiple_testing = MultipleTesting::Bonferroni;
        assert!((combine_scores(&lags, &cfg) - 0.03).abs() < 1e-15);
        let big = vec![mk(1, 0.5), mk(2, 0.6)];
        assert_eq!(combine_scores(&big, &cfg), 1.0);
    }

    #[test]
    fn degenerate_series_is_an_error_not_a_verdict() {
        let vals: Vec<f64> = (0..200).flat_map(|t| [((t * 37) % 17) as f64, 3.0]).collect();
        let ts = TimeSeries::from_rows(200, 2, &vals).unwrap();
        assert!(matches!(
            detect(&ts, &DirectionConfig::default(), 0),
            Err(Error::RankDeficient(_))
        ));
    }
}
