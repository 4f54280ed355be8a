//! C ABI for tsarrow.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`TsaStatus`]; on failure a message is available from
//! [`tsa_last_error_message`] on the same thread until the next failing call.
//! Panics never unwind into C: they are caught and reported as
//! `TSA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsarrow::direction::{Bandwidth, MultipleTesting, OrderSelection, Variant};
use tsarrow::{DirectionConfig, DirectionReport, Error, KernelConfig, PValueMethod, SimConfig, TimeSeries, Verdict};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientLength = 3,
    RankDeficient = 4,
    NotCausal = 5,
    Numerical = 6,
    Degenerate = 7,
    GenerationFailed = 8,
    Parse = 9,
    Io = 10,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsaVerdict {
    Undecided = 0,
    Forward = 1,
    Backward = 2,
}

/// Detection settings. Obtain defaults from [`tsa_detect_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TsaDetectOptions {
    pub sig1: f64,
    pub sig2: f64,
    /// 0: scores are p-values; 1: scores are negated HSIC statistics.
    pub neg_statistic: u8,
    /// Upper bound for AIC order selection; ignored when `fixed_order > 0`.
    pub p_max: usize,
    pub fixed_order: usize,
    /// Tests lags `1..=max_lag`.
    pub max_lag: usize,
    pub bonferroni: u8,
    /// 0 selects the gamma approximation, otherwise the number of circular shifts.
    pub n_resample: usize,
    /// 0: median heuristic over sqrt(dim); 1: plain median heuristic.
    pub plain_median: u8,
    pub seed: u64,
}

/// A `T x K` series.
pub struct TsaSeries {
    inner: TimeSeries,
}

/// Result of [`tsa_detect`].
pub struct TsaReport {
    inner: DirectionReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> TsaStatus {
    match err {
        Error::InvalidArgument(_) => TsaStatus::InvalidArgument,
        Error::InsufficientLength { .. } => TsaStatus::InsufficientLength,
        Error::RankDeficient(_) => TsaStatus::RankDeficient,
        Error::NotCausal { .. } => TsaStatus::NotCausal,
        Error::Numerical(_) => TsaStatus::Numerical,
        Error::Degenerate(_) => TsaStatus::Degenerate,
        Error::GenerationFailed { .. } => TsaStatus::GenerationFailed,
        Error::Parse { .. } => TsaStatus::Parse,
        Error::Io(_) => TsaStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsaStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            TsaStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            TsaStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tsa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `rows * cols` row-major values into a new series.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsa_series_new(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut TsaSeries,
) -> TsaStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if data.is_null() {
            return Err(Failure::Null("data"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidArgument("series size overflows".into()))?;
        let slice = std::slice::from_raw_parts(data, len);
        let inner = TimeSeries::from_rows(rows, cols, slice)?;
        *out = Box::into_raw(Box::new(TsaSeries { inner }));
        Ok(())
    })
}

/// # Safety
/// `series` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsa_series_free(series: *mut TsaSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// # Safety
/// `series` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsa_series_rows(series: *const TsaSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `series` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsa_series_cols(series: *const TsaSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.dim())
}

/// Copies the series row-major into `buf`, which must hold `rows * cols` doubles.
///
/// # Safety
/// `series` must be a live handle and `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tsa_series_copy(series: *const TsaSeries, buf: *mut f64, len: usize) -> TsaStatus {
    guard(|| {
        let s = &non_null(series, "series")?.inner;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let need = s.len() * s.dim();
        if len < need {
            return Err(Error::InvalidArgument(format!("buffer holds {len} values, need {need}")).into());
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for t in 0..s.len() {
            for j in 0..s.dim() {
                out[t * s.dim() + j] = s.data()[(t, j)];
            }
        }
        Ok(())
    })
}

/// Simulates a `t x k` VAR(p) series whose components all use noise exponent `r`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsa_simulate(
    k: usize,
    p: usize,
    t: usize,
    r: f64,
    seed: u64,
    out: *mut *mut TsaSeries,
) -> TsaStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let sim = tsarrow::simulate(&SimConfig::uniform(k, p, t, r, seed))?;
        *out = Box::into_raw(Box::new(TsaSeries { inner: sim.series }));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn tsa_detect_options_default() -> TsaDetectOptions {
    let d = DirectionConfig::default();
    let p_max = match d.order {
        OrderSelection::Aic { p_max } => p_max,
        OrderSelection::Fixed { p } => p,
    };
    TsaDetectOptions {
        sig1: d.sig1,
        sig2: d.sig2,
        neg_statistic: 0,
        p_max,
        fixed_order: 0,
        max_lag: 1,
        bonferroni: 0,
        n_resample: 0,
        plain_median: 0,
        seed: 0,
    }
}

fn config_from(opts: &TsaDetectOptions) -> DirectionConfig {
    DirectionConfig {
        sig1: opts.sig1,
        sig2: opts.sig2,
        variant: if opts.neg_statistic != 0 {
            Variant::NegStatistic
        } else {
            Variant::PValue
        },
        lags: (1..=opts.max_lag).collect(),
        order: if opts.fixed_order > 0 {
            OrderSelection::Fixed { p: opts.fixed_order }
        } else {
            OrderSelection::Aic { p_max: opts.p_max }
        },
        independent_orders: false,
        multiple_testing: if opts.bonferroni != 0 {
            MultipleTesting::Bonferroni
        } else {
            MultipleTesting::None
        },
        pvalue: if opts.n_resample == 0 {
            PValueMethod::Gamma
        } else {
            PValueMethod::ShiftPermutation {
                n_resample: opts.n_resample,
            }
        },
        bandwidth: if opts.plain_median != 0 {
            Bandwidth::Median
        } else {
            Bandwidth::MedianPerDimension
        },
    }
}

/// Runs direction detection. `options` may be NULL for defaults.
///
/// # Safety
/// `series` must be a live handle, `options` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsa_detect(
    series: *const TsaSeries,
    options: *const TsaDetectOptions,
    out: *mut *mut TsaReport,
) -> TsaStatus {
    guard(|| {
        let s = &non_null(series, "series")?.inner;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| tsa_detect_options_default());
        let cfg = config_from(&opts);
        cfg.validate()?;
        let inner = tsarrow::detect(s, &cfg, opts.seed)?;
        *out = Box::into_raw(Box::new(TsaReport { inner }));
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsa_report_free(report: *mut TsaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be NULL or a live handle. NULL yields `TSA_VERDICT_UNDECIDED`.
#[no_mangle]
pub unsafe extern "C" fn tsa_report_verdict(report: *const TsaReport) -> TsaVerdict {
    match report.as_ref().map(|r| r.inner.verdict) {
        Some(Verdict::Forward) => TsaVerdict::Forward,
        Some(Verdict::Backward) => TsaVerdict::Backward,
        _ => TsaVerdict::Undecided,
    }
}

/// # Safety
/// `report` must be NULL or a live handle. NULL yields NaN.
#[no_mangle]
pub unsafe extern "C" fn tsa_report_fw_score(report: *const TsaReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.inner.fw_score)
}

/// # Safety
/// `report` must be NULL or a live handle. NULL yields NaN.
#[no_mangle]
pub unsafe extern "C" fn tsa_report_bw_score(report: *const TsaReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.inner.bw_score)
}

/// # Safety
/// `report` must be NULL or a live handle. NULL yields 0.
#[no_mangle]
pub unsafe extern "C" fn tsa_report_order(report: *const TsaReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.order_used)
}

/// Full report as a NUL-terminated JSON string; release with [`tsa_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsa_report_to_json(report: *const TsaReport, out: *mut *mut c_char) -> TsaStatus {
    guard(|| {
        let r = &non_null(report, "report")?.inner;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let json = serde_json::to_string(r).map_err(|e| Error::Numerical(e.to_string()))?;
        *out = CString::new(json).expect("JSON has no NUL bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// HSIC statistic between two equally long series with median-heuristic
/// bandwidths, and optionally its gamma-approximation p-value.
///
/// # Safety
/// `x` and `z` must be live handles; `statistic` writable; `p_value` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn tsa_hsic(
    x: *const TsaSeries,
    z: *const TsaSeries,
    statistic: *mut f64,
    p_value: *mut f64,
) -> TsaStatus {
    guard(|| {
        let x = non_null(x, "x")?.inner.data();
        let z = non_null(z, "z")?.inner.data();
        if statistic.is_null() {
            return Err(Failure::Null("statistic"));
        }
        let cfg = KernelConfig::median(x, z)?;
        if p_value.is_null() {
            *statistic = tsarrow::hsic_vstat(x, z, &cfg)?;
        } else {
            // the gamma approximation never draws from the generator
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let res = tsarrow::hsic_pvalue(x, z, &cfg, PValueMethod::Gamma, &mut rng)?;
            *statistic = res.statistic;
            *p_value = res.p_value.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}
