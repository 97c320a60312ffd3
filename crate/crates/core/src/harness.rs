//! Experiment execution.
//!
//! An [`ExperimentPlan`] sweeps tasks over a grid of privacy budgets and
//! dataset sizes. For every `(task, ε, size, repetition)` the runner draws a
//! seeded subsample, runs the non-private critical section and then the
//! private one on that same subsample, and emits one [`RunRecord`]. Failed
//! and skipped runs are recorded, never dropped.
//!
//! Measured sections run strictly one at a time in-process, wrapped in a
//! monotonic-clock timer and a resident-memory sampler. With probes
//! switched off the cells are independent and run in parallel.
//!
//! Plans are JSON documents; unknown fields are rejected:
//!
//! ```json
//! {
//!   "epsilons": [0.1, 1.0, 3.0],
//!   "sizes": [1000, 2000],
//!   "tasks": [
//!     { "type": "query", "kind": "count", "column": "age" },
//!     { "type": "regression" }
//!   ],
//!   "master_seed": 7
//! }
//! ```
//!
//! Records are JSON Lines, one [`RunRecord`] per line, each carrying
//! `schema_version`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, subsample, Dataset};
use crate::dpml::{
    calibrate_sigma, default_orders, design_rmse, dp_sgd_train_design, np_sgd_train_design,
    Design, DpSgdParams, SgdConfig, DEFAULT_DELTA,
};
use crate::error::{Error, Result};
use crate::mechanisms::{BudgetLedger, PrivacyParams};
use crate::queries::{dp_query, np_query, QueryKind, QueryOutput};
use crate::rng::{seeded, SeedMixer};
use crate::{EPSILON_GRID, SURVEY_SIZES};

pub const SCHEMA_VERSION: u32 = 1;
pub const QUERY_REPETITIONS: usize = 20;
pub const ML_REPETITIONS: usize = 10;
pub const DEFAULT_TRIM: usize = 1;
pub const DEFAULT_MEMORY_INTERVAL_MS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaskSpec {
    Query { kind: QueryKind, column: String },
    /// Linear regression on the dataset's target column.
    Regression,
}

impl TaskSpec {
    pub fn query(kind: QueryKind, column: impl Into<String>) -> Self {
        TaskSpec::Query {
            kind,
            column: column.into(),
        }
    }

    pub fn id(&self) -> String {
        match self {
            TaskSpec::Query { kind, column } => format!("{kind}:{column}"),
            TaskSpec::Regression => "regression".to_string(),
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, TaskSpec::Regression)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub delta: f64,
    pub train_fraction: f64,
}

impl Default for MlSettings {
    fn default() -> Self {
        let sgd = SgdConfig::default();
        MlSettings {
            learning_rate: sgd.learning_rate,
            epochs: sgd.epochs,
            batch_size: sgd.batch_size,
            clip_norm: 1.0,
            delta: DEFAULT_DELTA,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    /// When false, no probes run and cells execute in parallel.
    pub measure: bool,
    pub memory_interval_ms: u64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            measure: true,
            memory_interval_ms: DEFAULT_MEMORY_INTERVAL_MS,
        }
    }
}

fn default_epsilons() -> Vec<f64> {
    EPSILON_GRID.to_vec()
}

fn default_sizes() -> Vec<usize> {
    SURVEY_SIZES.to_vec()
}

fn default_trim() -> usize {
    DEFAULT_TRIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    pub tasks: Vec<TaskSpec>,
    /// Overrides the per-kind defaults (20 for queries, 10 for regression).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(default = "default_trim")]
    pub trim: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub ml: MlSettings,
    #[serde(default)]
    pub probes: ProbeSettings,
}

impl ExperimentPlan {
    pub fn new(tasks: Vec<TaskSpec>) -> Self {
        ExperimentPlan {
            epsilons: default_epsilons(),
            sizes: default_sizes(),
            tasks,
            repetitions: None,
            trim: DEFAULT_TRIM,
            master_seed: 0,
            ml: MlSettings::default(),
            probes: ProbeSettings::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let plan: ExperimentPlan = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::InvalidPlan(format!("{}: {e}", path.display())))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("plan serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn repetitions_for(&self, task: &TaskSpec) -> usize {
        self.repetitions.unwrap_or(if task.is_regression() {
            ML_REPETITIONS
        } else {
            QUERY_REPETITIONS
        })
    }

    /// Number of records an execution emits.
    pub fn record_count(&self) -> usize {
        self.tasks
            .iter()
            .map(|t| self.repetitions_for(t) * self.epsilons.len() * self.sizes.len())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(m));
        if self.epsilons.is_empty() {
            return bad("ε grid is empty".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("ε={e} is not a positive finite number"));
        }
        if self.sizes.is_empty() {
            return bad("size grid is empty".into());
        }
        if self.sizes.contains(&0) {
            return bad("dataset sizes must be positive".into());
        }
        for t in &self.tasks {
            let reps = self.repetitions_for(t);
            if reps <= 2 * self.trim {
                return bad(format!(
                    "task {}: {reps} repetitions cannot survive trimming {} per tail",
                    t.id(),
                    self.trim
                ));
            }
        }
        let ml = &self.ml;
        if !(ml.learning_rate > 0.0) || ml.epochs == 0 || ml.batch_size == 0 {
            return bad("ml: learning_rate, epochs and batch_size must be positive".into());
        }
        if !(ml.clip_norm > 0.0 && ml.clip_norm.is_finite()) {
            return bad("ml: clip_norm must be positive and finite".into());
        }
        if !(ml.delta > 0.0 && ml.delta < 1.0) {
            return bad("ml: delta must lie in (0, 1)".into());
        }
        if !(ml.train_fraction > 0.0 && ml.train_fraction < 1.0) {
            return bad("ml: train_fraction must lie in (0, 1)".into());
        }
        if self.probes.memory_interval_ms == 0 {
            return bad("probes: memory_interval_ms must be positive".into());
        }
        Ok(())
    }

    /// Checks that every task can run against `d`.
    pub fn validate_for(&self, d: &Dataset) -> Result<()> {
        self.validate()?;
        for t in &self.tasks {
            match t {
                TaskSpec::Query { kind, column } => {
                    let (_, meta) = d
                        .column(column)
                        .map_err(|_| Error::InvalidPlan(format!("task {}: no column `{column}`", t.id())))?;
                    let needs_categorical = *kind == QueryKind::Histogram;
                    let needs_continuous = matches!(kind, QueryKind::Sum | QueryKind::Avg);
                    if needs_categorical && !meta.is_categorical() {
                        return Err(Error::InvalidPlan(format!(
                            "task {}: histogram queries need a categorical column",
                            t.id()
                        )));
                    }
                    if needs_continuous && meta.is_categorical() {
                        return Err(Error::InvalidPlan(format!(
                            "task {}: {kind} needs a continuous column",
                            t.id()
                        )));
                    }
                }
                TaskSpec::Regression => {
                    if d.target().is_none() {
                        return Err(Error::InvalidPlan(
                            "regression task needs a dataset with a target column".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
    Skipped,
}

/// One repetition of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub schema_version: u32,
    pub task: String,
    pub epsilon: f64,
    pub size: usize,
    pub repetition: usize,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default)]
    pub np_output: Option<QueryOutput>,
    #[serde(default)]
    pub dp_output: Option<QueryOutput>,
    #[serde(default)]
    pub np_time_ns: Option<u64>,
    #[serde(default)]
    pub dp_time_ns: Option<u64>,
    /// Signed `dp_time_ns − np_time_ns`.
    #[serde(default)]
    pub runtime_delta_ns: Option<i64>,
    #[serde(default)]
    pub np_peak_bytes: Option<u64>,
    #[serde(default)]
    pub dp_peak_bytes: Option<u64>,
    /// Noise multiplier used by private training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_multiplier: Option<f64>,
}

impl RunRecord {
    fn blank(task: &str, epsilon: f64, size: usize, repetition: usize) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            task: task.to_string(),
            epsilon,
            size,
            repetition,
            status: RunStatus::Ok,
            reason: None,
            np_output: None,
            dp_output: None,
            np_time_ns: None,
            dp_time_ns: None,
            runtime_delta_ns: None,
            np_peak_bytes: None,
            dp_peak_bytes: None,
            noise_multiplier: None,
        }
    }

    fn with_status(mut self, status: RunStatus, reason: impl Into<String>) -> Self {
        self.status = status;
        self.reason = Some(reason.into());
        self
    }
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Time,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    kind: ProbeKind,
    interval: Duration,
}

impl Probe {
    pub fn time() -> Self {
        Probe {
            kind: ProbeKind::Time,
            interval: Duration::from_millis(DEFAULT_MEMORY_INTERVAL_MS),
        }
    }

    pub fn memory(interval: Duration) -> Result<Self> {
        if interval.is_zero() {
            return Err(Error::invalid("memory sampling interval must be positive"));
        }
        Ok(Probe {
            kind: ProbeKind::Memory,
            interval,
        })
    }

    pub fn kind(&self) -> ProbeKind {
        self.kind
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }
}

/// Times `section` on a monotonic clock. A failing section propagates its
/// error and the partial timing is discarded.
pub fn timed_run<T, E>(section: impl FnOnce() -> std::result::Result<T, E>) -> std::result::Result<(T, Duration), E> {
    let start = Instant::now();
    let out = section()?;
    Ok((out, start.elapsed()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MemoryReading {
    /// Peak resident memory above the pre-section baseline, in bytes.
    Peak(u64),
    Unavailable(String),
}

impl MemoryReading {
    pub fn peak(&self) -> Option<u64> {
        match self {
            MemoryReading::Peak(p) => Some(*p),
            MemoryReading::Unavailable(_) => None,
        }
    }
}

#[cfg(target_os = "linux")]
fn page_size() -> u64 {
    static PAGE: OnceLock<u64> = OnceLock::new();
    *PAGE.get_or_init(|| {
        // SAFETY: sysconf has no preconditions.
        let p = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
        if p > 0 {
            p as u64
        } else {
            4096
        }
    })
}

/// Current resident set size of this process.
#[cfg(target_os = "linux")]
pub fn resident_bytes() -> Option<u64> {
    let statm = std::fs::read_to_string("/proc/self/statm").ok()?;
    let pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    Some(pages * page_size())
}

#[cfg(not(target_os = "linux"))]
pub fn resident_bytes() -> Option<u64> {
    None
}

/// Resets the kernel's peak-RSS counter for this process. Not every kernel
/// or sandbox allows it.
#[cfg(target_os = "linux")]
fn reset_high_water_mark() -> bool {
    std::fs::write("/proc/self/clear_refs", "5").is_ok()
}

#[cfg(not(target_os = "linux"))]
fn reset_high_water_mark() -> bool {
    false
}

#[cfg(target_os = "linux")]
fn high_water_mark() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[cfg(not(target_os = "linux"))]
fn high_water_mark() -> Option<u64> {
    None
}

/// Runs `section` while a sampler thread reads resident memory every
/// `interval`, plus once right after the section returns. Reports the
/// maximum seen minus the baseline taken before the section, floored at 0.
///
/// Where the kernel lets the peak-RSS counter be reset, that counter is
/// folded in too, so spikes shorter than `interval` are not missed.
pub fn memory_probe<T>(interval: Duration, section: impl FnOnce() -> T) -> Result<(T, MemoryReading)> {
    if interval.is_zero() {
        return Err(Error::invalid("memory sampling interval must be positive"));
    }
    let Some(baseline) = resident_bytes() else {
        let out = section();
        return Ok((
            out,
            MemoryReading::Unavailable("resident memory is not readable on this platform".into()),
        ));
    };
    let hwm_reset = reset_high_water_mark();
    let peak = AtomicU64::new(baseline);
    let done = AtomicBool::new(false);
    let out = thread::scope(|s| {
        let sampler = s.spawn(|| loop {
            if let Some(r) = resident_bytes() {
                peak.fetch_max(r, Ordering::Relaxed);
            }
            if done.load(Ordering::Acquire) {
                break;
            }
            thread::park_timeout(interval);
        });
        let out = section();
        if let Some(r) = resident_bytes() {
            peak.fetch_max(r, Ordering::Relaxed);
        }
        done.store(true, Ordering::Release);
        sampler.thread().unpark();
        sampler.join().expect("memory sampler panicked");
        out
    });
    if hwm_reset {
        if let Some(h) = high_water_mark() {
            peak.fetch_max(h, Ordering::Relaxed);
        }
    }
    let peak = peak.load(Ordering::Relaxed).saturating_sub(baseline);
    Ok((out, MemoryReading::Peak(peak)))
}

/// Held for the duration of every measured section in the process.
static MEASURED_SECTION: Mutex<()> = Mutex::new(());

/// Start and end of one measured section, relative to the run start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSpan {
    pub label: String,
    pub start_ns: u64,
    pub end_ns: u64,
}

#[derive(Debug, Default, Clone)]
pub struct ExecutionLog {
    pub spans: Vec<SectionSpan>,
}

impl ExecutionLog {
    /// True if any two measured sections overlapped in time.
    pub fn has_overlap(&self) -> bool {
        let mut spans: Vec<&SectionSpan> = self.spans.iter().collect();
        spans.sort_by_key(|s| (s.start_ns, s.end_ns));
        spans.windows(2).any(|w| w[1].start_ns < w[0].end_ns)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Measurement {
    time: Option<Duration>,
    peak: Option<u64>,
}

struct Measurer<'a> {
    probes: Vec<Probe>,
    epoch: Instant,
    log: Option<&'a Mutex<ExecutionLog>>,
}

impl Measurer<'_> {
    fn run<T>(&self, label: &str, section: impl FnOnce() -> Result<T>) -> Result<(T, Measurement)> {
        if self.probes.is_empty() {
            return section().map(|t| (t, Measurement::default()));
        }
        let timed = self.probes.iter().any(|p| p.kind == ProbeKind::Time);
        let memory = self.probes.iter().find(|p| p.kind == ProbeKind::Memory);

        let _guard = MEASURED_SECTION.lock().unwrap_or_else(|e| e.into_inner());
        let start = self.epoch.elapsed();
        let run = || {
            if timed {
                timed_run(section).map(|(t, d)| (t, Some(d)))
            } else {
                section().map(|t| (t, None))
            }
        };
        let (res, peak) = match memory {
            Some(p) => {
                let (res, reading) = memory_probe(p.interval, run)?;
                (res, reading.peak())
            }
            None => (run(), None),
        };
        let end = self.epoch.elapsed();
        if let Some(log) = self.log {
            log.lock().unwrap_or_else(|e| e.into_inner()).spans.push(SectionSpan {
                label: label.to_string(),
                start_ns: start.as_nanos() as u64,
                end_ns: end.as_nanos() as u64,
            });
        }
        let (out, time) = res?;
        Ok((out, Measurement { time, peak }))
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Seed for one repetition of one cell.
pub fn cell_seed(master: u64, task_id: &str, eps_index: usize, size_index: usize, rep: usize) -> u64 {
    SeedMixer::new(master)
        .mix_str(task_id)
        .mix_u64(eps_index as u64)
        .mix_u64(size_index as u64)
        .mix_u64(rep as u64)
        .finish()
}

fn sub_seed(seed: u64, purpose: &str) -> u64 {
    SeedMixer::new(seed).mix_str(purpose).finish()
}

struct Job<'p> {
    task: &'p TaskSpec,
    task_id: String,
    eps_index: usize,
    size_index: usize,
    rep: usize,
}

type SigmaTable = HashMap<(usize, usize), std::result::Result<f64, String>>;

fn ml_schedule(plan: &ExperimentPlan, size: usize) -> Result<(SgdConfig, f64, usize)> {
    let n_train = (plan.ml.train_fraction * size as f64).round() as usize;
    let cfg = SgdConfig {
        learning_rate: plan.ml.learning_rate,
        epochs: plan.ml.epochs,
        batch_size: plan.ml.batch_size,
        seed: 0,
    };
    let (q, steps) = cfg.schedule(n_train)?;
    Ok((cfg, q, steps))
}

fn calibrate_all(plan: &ExperimentPlan, d: &Dataset) -> SigmaTable {
    let mut table = SigmaTable::new();
    if !plan.tasks.iter().any(TaskSpec::is_regression) {
        return table;
    }
    let orders = default_orders();
    for (ei, &eps) in plan.epsilons.iter().enumerate() {
        for (si, &size) in plan.sizes.iter().enumerate() {
            if size > d.size() {
                continue;
            }
            let sigma = ml_schedule(plan, size)
                .and_then(|(_, q, steps)| {
                    let target = PrivacyParams::new(eps, plan.ml.delta)?;
                    calibrate_sigma(target, q, steps, &orders)
                })
                .map_err(|e| e.to_string());
            table.insert((ei, si), sigma);
        }
    }
    table
}

fn run_query(
    plan: &ExperimentPlan,
    d: &Dataset,
    job: &Job<'_>,
    kind: QueryKind,
    column: &str,
    measurer: &Measurer<'_>,
) -> RunRecord {
    let eps = plan.epsilons[job.eps_index];
    let size = plan.sizes[job.size_index];
    let rec = RunRecord::blank(&job.task_id, eps, size, job.rep);
    let seed = cell_seed(plan.master_seed, &job.task_id, job.eps_index, job.size_index, job.rep);

    let outcome = (|| -> Result<RunRecord> {
        let sub = subsample(d, size, sub_seed(seed, "subsample"))?;
        let budget = PrivacyParams::pure(eps)?;
        let mut ledger = BudgetLedger::new(budget);
        let mut rng = seeded(sub_seed(seed, "noise"));

        let (np, np_m) = measurer.run("np", || np_query(kind, &sub, column))?;
        let (dp, dp_m) =
            measurer.run("dp", || dp_query(kind, &sub, column, budget, &mut ledger, &mut rng))?;
        let mut rec = rec.clone();
        fill_measurements(&mut rec, np_m, dp_m);
        let zero_np = np.output.scalar() == Some(0.0);
        rec.np_output = Some(np.output);
        rec.dp_output = Some(dp.output);
        if zero_np {
            return Ok(rec.with_status(
                RunStatus::Skipped,
                "NP result is zero; relative error undefined",
            ));
        }
        Ok(rec)
    })();
    finish(rec, outcome)
}

fn run_regression(
    plan: &ExperimentPlan,
    d: &Dataset,
    job: &Job<'_>,
    sigmas: &SigmaTable,
    measurer: &Measurer<'_>,
) -> RunRecord {
    let eps = plan.epsilons[job.eps_index];
    let size = plan.sizes[job.size_index];
    let rec = RunRecord::blank(&job.task_id, eps, size, job.rep);
    let seed = cell_seed(plan.master_seed, &job.task_id, job.eps_index, job.size_index, job.rep);

    let outcome = (|| -> Result<RunRecord> {
        let sigma = match sigmas.get(&(job.eps_index, job.size_index)) {
            Some(Ok(s)) => *s,
            Some(Err(msg)) => {
                return Ok(rec.clone().with_status(
                    RunStatus::Failed,
                    format!("noise calibration failed: {msg}"),
                ))
            }
            None => return Err(Error::invalid("missing noise calibration")),
        };
        let sub = subsample(d, size, sub_seed(seed, "subsample"))?;
        let (train, test) = split(&sub, plan.ml.train_fraction, sub_seed(seed, "split"))?;
        let train = Design::from_dataset(&train)?;
        let test = Design::from_dataset(&test)?;
        let (mut cfg, _, _) = ml_schedule(plan, size)?;
        cfg.seed = sub_seed(seed, "sgd");
        let target = PrivacyParams::new(eps, plan.ml.delta)?;
        let dp_params = DpSgdParams::new(plan.ml.clip_norm, sigma, Some(target))?;

        let (np_model, np_m) = measurer.run("np", || np_sgd_train_design(&train, &cfg))?;
        let (dp_model, dp_m) = measurer.run("dp", || dp_sgd_train_design(&train, &cfg, &dp_params))?;
        let np_rmse = design_rmse(&np_model, &test)?;
        let dp_rmse = design_rmse(&dp_model, &test)?;

        let mut rec = rec.clone();
        rec.noise_multiplier = Some(sigma);
        fill_measurements(&mut rec, np_m, dp_m);
        rec.np_output = Some(QueryOutput::Scalar(np_rmse));
        rec.dp_output = Some(QueryOutput::Scalar(dp_rmse));
        if np_rmse == 0.0 {
            return Ok(rec.with_status(
                RunStatus::Skipped,
                "NP test error is zero; relative error undefined",
            ));
        }
        Ok(rec)
    })();
    finish(rec, outcome)
}

fn fill_measurements(rec: &mut RunRecord, np: Measurement, dp: Measurement) {
    rec.np_time_ns = np.time.map(|d| d.as_nanos() as u64);
    rec.dp_time_ns = dp.time.map(|d| d.as_nanos() as u64);
    if let (Some(a), Some(b)) = (rec.np_time_ns, rec.dp_time_ns) {
        rec.runtime_delta_ns = Some(b as i64 - a as i64);
    }
    rec.np_peak_bytes = np.peak;
    rec.dp_peak_bytes = dp.peak;
}

fn finish(blank: RunRecord, outcome: Result<RunRecord>) -> RunRecord {
    match outcome {
        Ok(rec) => {
            let finite = rec.np_output.as_ref().is_some_and(QueryOutput::is_finite)
                && rec.dp_output.as_ref().is_some_and(QueryOutput::is_finite);
            if rec.status == RunStatus::Ok && !finite {
                rec.with_status(RunStatus::Failed, "non-finite output")
            } else {
                rec
            }
        }
        Err(e) => blank.with_status(RunStatus::Failed, e.to_string()),
    }
}

/// Runs the whole plan against `d`.
pub fn execute_plan(plan: &ExperimentPlan, d: &Dataset) -> Result<Vec<RunRecord>> {
    execute_plan_logged(plan, d).map(|(records, _)| records)
}

/// Like [`execute_plan`], also returning the spans of every measured
/// section.
pub fn execute_plan_logged(plan: &ExperimentPlan, d: &Dataset) -> Result<(Vec<RunRecord>, ExecutionLog)> {
    plan.validate_for(d)?;
    let sigmas = calibrate_all(plan, d);

    let mut jobs = Vec::with_capacity(plan.record_count());
    for task in &plan.tasks {
        let task_id = task.id();
        for eps_index in 0..plan.epsilons.len() {
            for size_index in 0..plan.sizes.len() {
                for rep in 0..plan.repetitions_for(task) {
                    jobs.push(Job {
                        task,
                        task_id: task_id.clone(),
                        eps_index,
                        size_index,
                        rep,
                    });
                }
            }
        }
    }

    let log = Mutex::new(ExecutionLog::default());
    let run_job = |job: &Job<'_>, measurer: &Measurer<'_>| -> RunRecord {
        let size = plan.sizes[job.size_index];
        if size > d.size() {
            return RunRecord::blank(&job.task_id, plan.epsilons[job.eps_index], size, job.rep)
                .with_status(
                    RunStatus::Skipped,
                    format!("dataset has {} rows, fewer than requested size {size}", d.size()),
                );
        }
        match job.task {
            TaskSpec::Query { kind, column } => run_query(plan, d, job, *kind, column, measurer),
            TaskSpec::Regression => run_regression(plan, d, job, &sigmas, measurer),
        }
    };

    let records = if plan.probes.measure {
        let interval = Duration::from_millis(plan.probes.memory_interval_ms);
        // The first sampler thread of the process pays one-off setup costs.
        memory_probe(interval, || ())?;
        let measurer = Measurer {
            probes: vec![Probe::time(), Probe::memory(interval)?],
            epoch: Instant::now(),
            log: Some(&log),
        };
        jobs.iter().map(|j| run_job(j, &measurer)).collect()
    } else {
        let measurer = Measurer {
            probes: Vec::new(),
            epoch: Instant::now(),
            log: None,
        };
        jobs.par_iter().map(|j| run_job(j, &measurer)).collect()
    };
    Ok((records, log.into_inner().unwrap_or_else(|e| e.into_inner())))
}

// ---------------------------------------------------------------------------
// Record files
// ---------------------------------------------------------------------------

fn write_lines<T: Serialize>(items: &[T], path: &Path, append: bool) -> Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Writes `records` to `path` as JSON Lines, replacing any existing file.
pub fn persist_records(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    write_lines(records, path.as_ref(), false)
}

/// Appends `records` to `path`, creating it if needed.
pub fn append_records(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    write_lines(records, path.as_ref(), true)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    read_lines(path.as_ref())
}
