//! C ABI for dpbench.
//!
//! Every fallible function returns a [`DpbStatus`]; on anything other than
//! `DPB_STATUS_OK` a message is available from [`dpb_last_error`] on the
//! same thread. Datasets and budget ledgers are opaque handles owned by the
//! caller and released with their `_free` function. Panics never cross the
//! boundary; they surface as `DPB_STATUS_PANIC`.
//!
//! The header `include/dpbench.h` is generated from this file at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dpbench::data::{load_csv, synth_mixed, Dataset, Metadata};
use dpbench::dpml::{calibrate_sigma, default_orders, epsilon_for};
use dpbench::harness::{execute_plan, load_records, persist_records, ExperimentPlan};
use dpbench::mechanisms::{BudgetLedger, PrivacyParams};
use dpbench::metrics::{overhead_percent, rmspe, PairedSample};
use dpbench::queries::{dp_query, np_query, QueryKind, QueryOutput};
use dpbench::report::{aggregate, emit_plot_data, load_summaries, persist_summaries, Metric, PlotShape};
use dpbench::rng::seeded;
use dpbench::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    /// Malformed CSV, metadata, plan or record input.
    Parse = 4,
    BudgetExhausted = 5,
    /// Column missing or of the wrong kind for the query.
    Ineligible = 6,
    /// Divergence, unreachable calibration or undefined metric.
    Numeric = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpbQueryKind {
    Count = 0,
    Sum = 1,
    Avg = 2,
    Histogram = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpbMetric {
    Utility = 0,
    Runtime = 1,
    RuntimeDelta = 2,
    Memory = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpbShape {
    Grid = 0,
    Lines = 1,
}

/// Opaque dataset handle.
pub struct DpbDataset(Dataset);

/// Opaque privacy-budget ledger handle.
pub struct DpbLedger(BudgetLedger);

impl From<DpbQueryKind> for QueryKind {
    fn from(k: DpbQueryKind) -> Self {
        match k {
            DpbQueryKind::Count => QueryKind::Count,
            DpbQueryKind::Sum => QueryKind::Sum,
            DpbQueryKind::Avg => QueryKind::Avg,
            DpbQueryKind::Histogram => QueryKind::Histogram,
        }
    }
}

impl From<DpbMetric> for Metric {
    fn from(m: DpbMetric) -> Self {
        match m {
            DpbMetric::Utility => Metric::Utility,
            DpbMetric::Runtime => Metric::Runtime,
            DpbMetric::RuntimeDelta => Metric::RuntimeDelta,
            DpbMetric::Memory => Metric::Memory,
        }
    }
}

impl From<DpbShape> for PlotShape {
    fn from(s: DpbShape) -> Self {
        match s {
            DpbShape::Grid => PlotShape::Grid,
            DpbShape::Lines => PlotShape::Lines,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DpbStatus, String);

type Outcome = Result<(), Failure>;

fn status_of(e: &Error) -> DpbStatus {
    match e {
        Error::Io { .. } => DpbStatus::Io,
        Error::Metadata(_)
        | Error::ParseCell { .. }
        | Error::UnknownCategory { .. }
        | Error::InvalidRow { .. }
        | Error::MalformedLine { .. }
        | Error::MixedSchema(..)
        | Error::InvalidPlan(_) => DpbStatus::Parse,
        Error::BudgetExhausted { .. } => DpbStatus::BudgetExhausted,
        Error::MissingColumn(_) | Error::NotCategorical(_) | Error::NotContinuous(_) | Error::NoTarget => {
            DpbStatus::Ineligible
        }
        Error::Divergence { .. } | Error::Unreachable { .. } | Error::Empty(_) | Error::ZeroBaseline { .. } => {
            DpbStatus::Numeric
        }
        _ => DpbStatus::InvalidArgument,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Outcome) -> DpbStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DpbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            DpbStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DpbStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DpbStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    text(p, what).map(PathBuf::from)
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn borrow_dataset<'a>(p: *const DpbDataset) -> Result<&'a Dataset, Failure> {
    p.as_ref().map(|d| &d.0).ok_or_else(|| null("dataset"))
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next dpbench call on the same thread.
#[no_mangle]
pub extern "C" fn dpb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dpb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CSV file described by a JSON metadata file.
///
/// # Safety
/// `csv_path` and `meta_path` must be NUL-terminated strings; `out` must be
/// writable. On success `*out` owns a handle to free with
/// [`dpb_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn dpb_dataset_load(
    csv_path: *const c_char,
    meta_path: *const c_char,
    out_dataset: *mut *mut DpbDataset,
) -> DpbStatus {
    guard(|| {
        let slot = out(out_dataset, "out_dataset")?;
        let meta = Metadata::load(path(meta_path, "meta_path")?)?;
        let d = load_csv(path(csv_path, "csv_path")?, &meta.columns, meta.target.as_deref())?;
        *slot = Box::into_raw(Box::new(DpbDataset(d)));
        Ok(())
    })
}

/// Generates the synthetic mixed-type regression dataset: features
/// `x1..xd`, target `y`, continuous `age` and categorical `group`.
///
/// # Safety
/// `weights` must point to `n_weights` readable doubles; `out_dataset`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpb_dataset_synth(
    rows: usize,
    weights: *const f64,
    n_weights: usize,
    noise_std: f64,
    seed: u64,
    out_dataset: *mut *mut DpbDataset,
) -> DpbStatus {
    guard(|| {
        let slot = out(out_dataset, "out_dataset")?;
        if weights.is_null() {
            return Err(null("weights"));
        }
        let w = std::slice::from_raw_parts(weights, n_weights);
        let d = synth_mixed(rows, w, noise_std, seed)?;
        *slot = Box::into_raw(Box::new(DpbDataset(d)));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpb_dataset_size(dataset: *const DpbDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.size())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpb_dataset_free(dataset: *mut DpbDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Creates a sequential-composition ledger with total budget `(ε, δ)`.
///
/// # Safety
/// `out_ledger` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpb_ledger_new(epsilon: f64, delta: f64, out_ledger: *mut *mut DpbLedger) -> DpbStatus {
    guard(|| {
        let slot = out(out_ledger, "out_ledger")?;
        let total = PrivacyParams::new(epsilon, delta)?;
        *slot = Box::into_raw(Box::new(DpbLedger(BudgetLedger::new(total))));
        Ok(())
    })
}

/// Budget still available.
///
/// # Safety
/// `ledger` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpb_ledger_remaining(
    ledger: *const DpbLedger,
    out_epsilon: *mut f64,
    out_delta: *mut f64,
) -> DpbStatus {
    guard(|| {
        let l = ledger.as_ref().ok_or_else(|| null("ledger"))?;
        let r = l.0.remaining();
        *out(out_epsilon, "out_epsilon")? = r.epsilon;
        *out(out_delta, "out_delta")? = r.delta;
        Ok(())
    })
}

/// # Safety
/// `ledger` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpb_ledger_free(ledger: *mut DpbLedger) {
    if !ledger.is_null() {
        drop(Box::from_raw(ledger));
    }
}

unsafe fn run_query(
    dataset: *const DpbDataset,
    kind: QueryKind,
    column: *const c_char,
    private: Option<(f64, *mut DpbLedger, u64)>,
) -> Result<QueryOutput, Failure> {
    let d = borrow_dataset(dataset)?;
    let column = text(column, "column")?;
    let result = match private {
        None => np_query(kind, d, column)?,
        Some((epsilon, ledger, seed)) => {
            let budget = PrivacyParams::pure(epsilon)?;
            let mut rng = seeded(seed);
            match ledger.as_mut() {
                Some(l) => dp_query(kind, d, column, budget, &mut l.0, &mut rng)?,
                None => dp_query(kind, d, column, budget, &mut BudgetLedger::new(budget), &mut rng)?,
            }
        }
    };
    Ok(result.output)
}

fn scalar_kind(kind: DpbQueryKind) -> Result<QueryKind, Failure> {
    match kind {
        DpbQueryKind::Histogram => Err(Failure(
            DpbStatus::InvalidArgument,
            "histogram queries return bins; use dpb_histogram_*".into(),
        )),
        k => Ok(k.into()),
    }
}

/// Exact count, sum or average.
///
/// # Safety
/// `dataset` must be a live handle, `column` a NUL-terminated string and
/// `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn dpb_query_exact(
    dataset: *const DpbDataset,
    kind: DpbQueryKind,
    column: *const c_char,
    out_value: *mut f64,
) -> DpbStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        let v = run_query(dataset, scalar_kind(kind)?, column, None)?;
        *slot = v.scalar().expect("scalar query");
        Ok(())
    })
}

/// Private count, sum or average with budget `epsilon`. The spend is
/// charged to `ledger`, or to a fresh ledger of exactly `epsilon` when
/// `ledger` is null.
///
/// # Safety
/// As for [`dpb_query_exact`]; `ledger` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpb_query_private(
    dataset: *const DpbDataset,
    kind: DpbQueryKind,
    column: *const c_char,
    epsilon: f64,
    ledger: *mut DpbLedger,
    seed: u64,
    out_value: *mut f64,
) -> DpbStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        let v = run_query(dataset, scalar_kind(kind)?, column, Some((epsilon, ledger, seed)))?;
        *slot = v.scalar().expect("scalar query");
        Ok(())
    })
}

unsafe fn write_bins(out: QueryOutput, values: *mut f64, capacity: usize, out_len: *mut usize) -> Outcome {
    let bins = out.bins().expect("histogram output");
    *self::out(out_len, "out_len")? = bins.len();
    if bins.len() > capacity {
        return Err(Failure(
            DpbStatus::BufferTooSmall,
            format!("{} bins need a buffer of at least {}", bins.len(), bins.len()),
        ));
    }
    if values.is_null() {
        return Err(null("values"));
    }
    let dst = std::slice::from_raw_parts_mut(values, bins.len());
    for (d, v) in dst.iter_mut().zip(bins.values()) {
        *d = *v;
    }
    Ok(())
}

/// Exact histogram of a categorical column. Bins are written in
/// lexicographic label order; `*out_len` is always set to the bin count,
/// even when `capacity` is too small.
///
/// # Safety
/// `values` must have room for `capacity` doubles; other pointers as for
/// [`dpb_query_exact`].
#[no_mangle]
pub unsafe extern "C" fn dpb_histogram_exact(
    dataset: *const DpbDataset,
    column: *const c_char,
    values: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> DpbStatus {
    guard(|| {
        let v = run_query(dataset, QueryKind::Histogram, column, None)?;
        write_bins(v, values, capacity, out_len)
    })
}

/// Private histogram; see [`dpb_histogram_exact`] and [`dpb_query_private`].
///
/// # Safety
/// As for [`dpb_histogram_exact`]; `ledger` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpb_histogram_private(
    dataset: *const DpbDataset,
    column: *const c_char,
    epsilon: f64,
    ledger: *mut DpbLedger,
    seed: u64,
    values: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> DpbStatus {
    guard(|| {
        let v = run_query(dataset, QueryKind::Histogram, column, Some((epsilon, ledger, seed)))?;
        write_bins(v, values, capacity, out_len)
    })
}

/// RMSPE in percent over `n` paired results.
///
/// # Safety
/// `np_values` and `dp_values` must each point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn dpb_rmspe(
    np_values: *const f64,
    dp_values: *const f64,
    n: usize,
    out_value: *mut f64,
) -> DpbStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        if n > 0 && (np_values.is_null() || dp_values.is_null()) {
            return Err(null("values"));
        }
        let pairs: Vec<PairedSample> = if n == 0 {
            Vec::new()
        } else {
            let np = std::slice::from_raw_parts(np_values, n);
            let dp = std::slice::from_raw_parts(dp_values, n);
            np.iter().zip(dp).map(|(a, b)| PairedSample::new(*a, *b)).collect()
        };
        *slot = rmspe(&pairs)?;
        Ok(())
    })
}

/// `(dp_peak − np_peak) / np_peak · 100`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpb_overhead_percent(dp_peak: f64, np_peak: f64, out_value: *mut f64) -> DpbStatus {
    guard(|| {
        *out(out_value, "out_value")? = overhead_percent(dp_peak, np_peak)?;
        Ok(())
    })
}

/// ε spent by `steps` rounds of the Poisson-subsampled Gaussian mechanism
/// with noise multiplier `sigma` and rate `q`, at the given δ.
///
/// # Safety
/// `out_epsilon` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpb_rdp_epsilon(
    sigma: f64,
    q: f64,
    steps: usize,
    delta: f64,
    out_epsilon: *mut f64,
) -> DpbStatus {
    guard(|| {
        *out(out_epsilon, "out_epsilon")? = epsilon_for(sigma, q, steps, delta, &default_orders())?;
        Ok(())
    })
}

/// Smallest noise multiplier meeting `(ε, δ)` for the given schedule.
///
/// # Safety
/// `out_sigma` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpb_calibrate_sigma(
    epsilon: f64,
    delta: f64,
    q: f64,
    steps: usize,
    out_sigma: *mut f64,
) -> DpbStatus {
    guard(|| {
        let slot = out(out_sigma, "out_sigma")?;
        let target = PrivacyParams::new(epsilon, delta)?;
        *slot = calibrate_sigma(target, q, steps, &default_orders())?;
        Ok(())
    })
}

/// Executes a JSON plan against `dataset` and writes JSON Lines records.
/// When `override_seed` is true, `seed` replaces the plan's master seed.
///
/// # Safety
/// Paths must be NUL-terminated strings; `dataset` a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpb_run_plan(
    plan_path: *const c_char,
    dataset: *const DpbDataset,
    override_seed: bool,
    seed: u64,
    records_path: *const c_char,
) -> DpbStatus {
    guard(|| {
        let d = borrow_dataset(dataset)?;
        let mut plan = ExperimentPlan::load(path(plan_path, "plan_path")?)?;
        if override_seed {
            plan.master_seed = seed;
        }
        let records = execute_plan(&plan, d)?;
        persist_records(&records, path(records_path, "records_path")?)?;
        Ok(())
    })
}

/// Aggregates a records file into a summaries file.
///
/// # Safety
/// Paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dpb_aggregate(
    records_path: *const c_char,
    trim: usize,
    summaries_path: *const c_char,
) -> DpbStatus {
    guard(|| {
        let records = load_records(path(records_path, "records_path")?)?;
        let summaries = aggregate(&records, trim)?;
        persist_summaries(&summaries, path(summaries_path, "summaries_path")?)?;
        Ok(())
    })
}

/// Writes plot-ready CSV for one metric.
///
/// # Safety
/// Paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dpb_emit_report(
    summaries_path: *const c_char,
    metric: DpbMetric,
    shape: DpbShape,
    out_path: *const c_char,
) -> DpbStatus {
    guard(|| {
        let summaries = load_summaries(path(summaries_path, "summaries_path")?)?;
        emit_plot_data(&summaries, metric.into(), shape.into(), path(out_path, "out_path")?)?;
        Ok(())
    })
}
