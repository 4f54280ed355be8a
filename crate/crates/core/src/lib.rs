//! Arrow-of-time detection for multivariate time series.
//!
//! A linear VAR model with non-Gaussian innovations is identifiable in its
//! temporal direction: only in the true direction are the fitted residuals
//! independent of past values. This crate fits VAR models in both
//! directions, scores residual independence with HSIC and reports the
//! direction (or "undecided"), together with a simulator and benchmark grid
//! for studying the method.

pub mod autocov;
pub mod bench;
pub mod cli;
pub mod companion;
pub mod direction;
pub mod error;
pub mod hsic;
pub mod io;
pub mod series;
pub mod simulate;
pub mod var;

pub use autocov::{reverse_gaussian_var1, sample_autocov, theoretical_autocov, AutocovSequence};
pub use companion::{companion, is_causal, is_nilpotent, ma_coefficients, CompanionForm};
pub use direction::{detect, DirectionConfig, DirectionReport, Verdict};
pub use error::{Error, Result};
pub use hsic::{hsic_pvalue, hsic_vstat, median_bandwidth, HsicResult, KernelConfig, PValueMethod};
pub use series::{demean, difference, TimeSeries};
pub use simulate::{simulate, SimConfig, Simulation};
pub use var::{fit_var, select_order, ResidualSeries, VarModel};
