//! Aggregation of run records into per-cell metrics, and plot-ready CSV.
//!
//! Each `(task, ε, size)` cell is summarized by:
//!
//! - `utility_rmspe`: RMSPE between NP and DP outputs over the `ok`
//!   repetitions that survive trimming. Repetitions are ranked by the
//!   magnitude of their DP − NP error (the L2 norm across bins for
//!   histograms) and `trim` are dropped from each tail. Histogram bins whose
//!   NP count is zero are left out of the RMSPE.
//! - `runtime_rmspe` and `runtime_delta_pct`: the same trimming applied
//!   independently to the runtime pairs, ranked by `|dp − np|`. The first is
//!   the unsigned RMSPE, the second the mean signed `(dp − np) / np`.
//! - `memory_overhead_pct`: `(max dp peak − max np peak) / max np peak`,
//!   left undefined when either peak is below [`MEMORY_RESOLUTION_BYTES`].
//!
//! A cell with too few `ok` repetitions to trim is marked unusable rather
//! than dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{read_lines, RunRecord, RunStatus, SCHEMA_VERSION};
use crate::metrics::{drop_zero_baselines, overhead_percent, rmspe, trim_by_key, PairedSample};
use crate::queries::QueryOutput;

/// Peaks smaller than this are dominated by page-granular allocator noise
/// and do not yield a memory overhead.
pub const MEMORY_RESOLUTION_BYTES: u64 = 64 * 1024;

/// Token written in place of a value for cells that cannot be reported.
pub const UNUSABLE: &str = "unusable";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSummary {
    pub schema_version: u32,
    pub task: String,
    pub epsilon: f64,
    pub size: usize,
    pub utility_rmspe: Option<f64>,
    pub runtime_rmspe: Option<f64>,
    pub runtime_delta_pct: Option<f64>,
    pub memory_overhead_pct: Option<f64>,
    pub n_records: usize,
    pub n_ok: usize,
    pub n_failed: usize,
    pub n_skipped: usize,
    /// Repetitions left after trimming.
    pub n_used: usize,
    pub usable: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl MetricSummary {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        if !self.usable {
            return None;
        }
        match metric {
            Metric::Utility => self.utility_rmspe,
            Metric::Runtime => self.runtime_rmspe,
            Metric::RuntimeDelta => self.runtime_delta_pct,
            Metric::Memory => self.memory_overhead_pct,
        }
    }
}

fn output_pairs(np: &QueryOutput, dp: &QueryOutput) -> Vec<PairedSample> {
    match (np, dp) {
        (QueryOutput::Scalar(a), QueryOutput::Scalar(b)) => vec![PairedSample::new(*a, *b)],
        (QueryOutput::Bins(a), QueryOutput::Bins(b)) => a
            .iter()
            .filter_map(|(label, v)| b.get(label).map(|w| PairedSample::new(*v, *w)))
            .collect(),
        _ => Vec::new(),
    }
}

fn error_magnitude(r: &RunRecord) -> f64 {
    match (&r.np_output, &r.dp_output) {
        (Some(np), Some(dp)) => output_pairs(np, dp)
            .iter()
            .map(|p| (p.dp_value - p.np_value).powi(2))
            .sum::<f64>()
            .sqrt(),
        _ => f64::NAN,
    }
}

type CellKey = (String, u64, usize);

fn summarize(key: &CellKey, records: &[&RunRecord], trim: usize) -> MetricSummary {
    let (task, eps_bits, size) = key;
    let count = |s: RunStatus| records.iter().filter(|r| r.status == s).count();
    let ok: Vec<&RunRecord> = records
        .iter()
        .copied()
        .filter(|r| r.status == RunStatus::Ok && r.np_output.is_some() && r.dp_output.is_some())
        .collect();
    let mut summary = MetricSummary {
        schema_version: SCHEMA_VERSION,
        task: task.clone(),
        epsilon: f64::from_bits(*eps_bits),
        size: *size,
        utility_rmspe: None,
        runtime_rmspe: None,
        runtime_delta_pct: None,
        memory_overhead_pct: None,
        n_records: records.len(),
        n_ok: ok.len(),
        n_failed: count(RunStatus::Failed),
        n_skipped: count(RunStatus::Skipped),
        n_used: 0,
        usable: false,
        warnings: Vec::new(),
    };

    let Ok(kept) = trim_by_key(&ok, trim, trim, |r| error_magnitude(r)) else {
        summary.warnings.push(format!(
            "{} ok repetitions cannot survive trimming {trim} per tail",
            ok.len()
        ));
        return summary;
    };
    summary.n_used = kept.len();

    let pairs: Vec<PairedSample> = kept
        .iter()
        .flat_map(|r| output_pairs(r.np_output.as_ref().unwrap(), r.dp_output.as_ref().unwrap()))
        .collect();
    let (pairs, zero) = drop_zero_baselines(&pairs);
    if zero > 0 {
        summary
            .warnings
            .push(format!("{zero} zero-valued NP results left out of utility RMSPE"));
    }
    match rmspe(&pairs) {
        Ok(v) => summary.utility_rmspe = Some(v),
        Err(e) => summary.warnings.push(format!("utility: {e}")),
    }

    let timings: Vec<PairedSample> = ok
        .iter()
        .filter_map(|r| match (r.np_time_ns, r.dp_time_ns) {
            (Some(a), Some(b)) if a > 0 => Some(PairedSample::new(a as f64, b as f64)),
            _ => None,
        })
        .collect();
    if !timings.is_empty() {
        match trim_by_key(&timings, trim, trim, |p| (p.dp_value - p.np_value).abs()) {
            Ok(t) => {
                summary.runtime_rmspe = rmspe(&t).ok();
                let signed = t.iter().map(|p| -p.relative_error() * 100.0).sum::<f64>() / t.len() as f64;
                summary.runtime_delta_pct = Some(signed);
            }
            Err(_) => summary
                .warnings
                .push(format!("{} timed repetitions cannot be trimmed", timings.len())),
        }
    }

    let np_peak = ok.iter().filter_map(|r| r.np_peak_bytes).max();
    let dp_peak = ok.iter().filter_map(|r| r.dp_peak_bytes).max();
    if let (Some(np), Some(dp)) = (np_peak, dp_peak) {
        if np.min(dp) < MEMORY_RESOLUTION_BYTES {
            summary.warnings.push(format!(
                "peak memory (NP {np} B, DP {dp} B) below probe resolution; memory overhead undefined"
            ));
        } else {
            summary.memory_overhead_pct = overhead_percent(dp as f64, np as f64).ok();
        }
    }

    summary.usable = summary.utility_rmspe.is_some();
    summary
}

/// Groups records by `(task, ε, size)` and summarizes each cell. The
/// output is sorted by task, then ε, then size.
pub fn aggregate(records: &[RunRecord], trim: usize) -> Result<Vec<MetricSummary>> {
    if let Some(first) = records.first() {
        if let Some(other) = records.iter().find(|r| r.schema_version != first.schema_version) {
            return Err(Error::MixedSchema(first.schema_version, other.schema_version));
        }
        if first.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported record schema version {}",
                first.schema_version
            )));
        }
    }
    if let Some(r) = records.iter().find(|r| !(r.epsilon > 0.0 && r.epsilon.is_finite())) {
        return Err(Error::invalid(format!("record has invalid ε={}", r.epsilon)));
    }
    let mut cells: BTreeMap<CellKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.task.clone(), r.epsilon.to_bits(), r.size))
            .or_default()
            .push(r);
    }
    Ok(cells
        .into_iter()
        .map(|(k, mut rs)| {
            rs.sort_by(|a, b| {
                a.repetition
                    .cmp(&b.repetition)
                    .then_with(|| error_magnitude(a).total_cmp(&error_magnitude(b)))
                    .then_with(|| {
                        let key = |r: &RunRecord| serde_json::to_string(r).expect("record serializes");
                        key(a).cmp(&key(b))
                    })
            });
            summarize(&k, &rs, trim)
        })
        .collect())
}

pub fn persist_summaries(summaries: &[MetricSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for s in summaries {
        text.push_str(&serde_json::to_string(s).expect("summary serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_summaries(path: impl AsRef<Path>) -> Result<Vec<MetricSummary>> {
    read_lines(path.as_ref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Utility,
    Runtime,
    RuntimeDelta,
    Memory,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Utility => "utility",
            Metric::Runtime => "runtime",
            Metric::RuntimeDelta => "runtime-delta",
            Metric::Memory => "memory",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "utility" => Ok(Metric::Utility),
            "runtime" => Ok(Metric::Runtime),
            "runtime-delta" => Ok(Metric::RuntimeDelta),
            "memory" => Ok(Metric::Memory),
            _ => Err(Error::invalid(format!("unknown metric `{s}`"))),
        }
    }
}

/// `Grid` is a task × ε × size table for heatmaps; `Lines` has one series
/// per size over ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotShape {
    Grid,
    Lines,
}

impl FromStr for PlotShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(PlotShape::Grid),
            "lines" => Ok(PlotShape::Lines),
            _ => Err(Error::invalid(format!("unknown plot shape `{s}`"))),
        }
    }
}

/// Renders `summaries` as CSV. Every task gets a row for every ε and size
/// seen anywhere in the input; missing or unusable cells carry
/// [`UNUSABLE`]. Rows are ordered by task, then ε, then size.
pub fn render_plot_data(summaries: &[MetricSummary], metric: Metric, shape: PlotShape) -> Result<String> {
    if summaries.is_empty() {
        return Err(Error::Empty("no summaries to plot"));
    }
    let mut epsilons: Vec<f64> = summaries.iter().map(|s| s.epsilon).collect();
    epsilons.sort_by(f64::total_cmp);
    epsilons.dedup();
    let mut sizes: Vec<usize> = summaries.iter().map(|s| s.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut tasks: Vec<&str> = summaries.iter().map(|s| s.task.as_str()).collect();
    tasks.sort_unstable();
    tasks.dedup();

    let index: BTreeMap<(&str, u64, usize), &MetricSummary> = summaries
        .iter()
        .map(|s| ((s.task.as_str(), s.epsilon.to_bits(), s.size), s))
        .collect();
    let value = |task: &str, eps: f64, size: usize| -> String {
        index
            .get(&(task, eps.to_bits(), size))
            .and_then(|s| s.value(metric))
            .map_or_else(|| UNUSABLE.to_string(), |v| v.to_string())
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    match shape {
        PlotShape::Grid => {
            w.write_record(["task", "epsilon", "size", "value"]).unwrap();
            for task in &tasks {
                for &eps in &epsilons {
                    for &size in &sizes {
                        w.write_record([*task, &eps.to_string(), &size.to_string(), &value(task, eps, size)])
                            .unwrap();
                    }
                }
            }
        }
        PlotShape::Lines => {
            w.write_record(["task", "series", "epsilon", "value"]).unwrap();
            for task in &tasks {
                for &size in &sizes {
                    for &eps in &epsilons {
                        w.write_record([*task, &format!("size={size}"), &eps.to_string(), &value(task, eps, size)])
                            .unwrap();
                    }
                }
            }
        }
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8"))
}

pub fn emit_plot_data(
    summaries: &[MetricSummary],
    metric: Metric,
    shape: PlotShape,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = render_plot_data(summaries, metric, shape)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(task: &str, eps: f64, size: usize, rep: usize, np: f64, dp: f64) -> RunRecord {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            task: task.into(),
            epsilon: eps,
            size,
            repetition: rep,
            status: RunStatus::Ok,
            reason: None,
            np_output: Some(QueryOutput::Scalar(np)),
            dp_output: Some(QueryOutput::Scalar(dp)),
            np_time_ns: Some(100),
            dp_time_ns: Some(110),
            runtime_delta_ns: Some(10),
            np_peak_bytes: Some(1_000_000),
            dp_peak_bytes: Some(1_200_000),
            noise_multiplier: None,
        }
    }

    #[test]
    fn trims_one_per_tail() {
        let mut rs: Vec<RunRecord> = (0..20).map(|i| rec("count:a", 1.0, 100, i, 100.0, 101.0)).collect();
        rs[3].dp_output = Some(QueryOutput::Scalar(1000.0));
        rs[7].dp_output = Some(QueryOutput::Scalar(100.0));
        let s = &aggregate(&rs, 1).unwrap()[0];
        assert_eq!(s.n_used, 18);
        assert!((s.utility_rmspe.unwrap() - 1.0).abs() < 1e-12);
        assert!((s.runtime_rmspe.unwrap() - 10.0).abs() < 1e-12);
        assert!((s.runtime_delta_pct.unwrap() - 10.0).abs() < 1e-12);
        assert!((s.memory_overhead_pct.unwrap() - 20.0).abs() < 1e-12);
        assert!(s.usable);
    }

    #[test]
    fn too_few_ok_is_unusable() {
        let mut rs: Vec<RunRecord> = (0..3).map(|i| rec("t", 1.0, 10, i, 1.0, 2.0)).collect();
        rs[0].status = RunStatus::Failed;
        let s = &aggregate(&rs, 1).unwrap()[0];
        assert!(!s.usable);
        assert_eq!((s.n_ok, s.n_failed, s.n_used), (2, 1, 0));
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn histogram_zero_bins_excluded() {
        let bins = |v: [f64; 2]| QueryOutput::Bins([("A".into(), v[0]), ("B".into(), v[1])].into());
        let rs: Vec<RunRecord> = (0..5)
            .map(|i| RunRecord {
                np_output: Some(bins([10.0, 0.0])),
                dp_output: Some(bins([11.0, 0.7])),
                ..rec("histogram:g", 1.0, 10, i, 0.0, 0.0)
            })
            .collect();
        let s = &aggregate(&rs, 1).unwrap()[0];
        assert!((s.utility_rmspe.unwrap() - 10.0).abs() < 1e-9);
        assert!(s.warnings.iter().any(|w| w.contains("zero-valued")));
    }

    #[test]
    fn memory_undefined_below_resolution() {
        for (np, dp) in [(0, 5_000_000), (4096, 0), (4096, 5_000_000)] {
            let rs: Vec<RunRecord> = (0..5)
                .map(|i| RunRecord {
                    np_peak_bytes: Some(np),
                    dp_peak_bytes: Some(dp),
                    ..rec("t", 1.0, 10, i, 1.0, 1.1)
                })
                .collect();
            let s = &aggregate(&rs, 1).unwrap()[0];
            assert_eq!(s.memory_overhead_pct, None);
            assert!(s.usable);
            assert!(s.warnings.iter().any(|w| w.contains("resolution")));
        }
    }

    #[test]
    fn mixed_schema_rejected() {
        let mut rs = vec![rec("t", 1.0, 10, 0, 1.0, 1.0), rec("t", 1.0, 10, 1, 1.0, 1.0)];
        rs[1].schema_version = 2;
        assert!(matches!(aggregate(&rs, 1), Err(Error::MixedSchema(1, 2))));
        assert!(aggregate(&[], 1).unwrap().is_empty());
    }

    #[test]
    fn plot_data_is_complete_and_sorted() {
        let mut rs = Vec::new();
        for eps in [2.0, 0.5] {
            for i in 0..4 {
                rs.push(rec("sum:x", eps, 100, i, 10.0, 11.0));
            }
        }
        rs.extend((0..4).map(|i| rec("count:x", 0.5, 200, i, 10.0, 11.0)));
        let s = aggregate(&rs, 1).unwrap();
        let grid = render_plot_data(&s, Metric::Utility, PlotShape::Grid).unwrap();
        let lines: Vec<&str> = grid.lines().collect();
        assert_eq!(lines[0], "task,epsilon,size,value");
        assert_eq!(lines.len(), 1 + 2 * 2 * 2);
        assert_eq!(lines[1], "count:x,0.5,100,unusable");
        assert_eq!(lines[2], format!("count:x,0.5,200,{}", s[0].utility_rmspe.unwrap()));
        assert_eq!(grid, render_plot_data(&s, Metric::Utility, PlotShape::Grid).unwrap());

        let series = render_plot_data(&s, Metric::Utility, PlotShape::Lines).unwrap();
        assert!(render_plot_data(&[], Metric::Utility, PlotShape::Grid).is_err());
        assert!(series.starts_with("task,series,epsilon,value\ncount:x,size=100,0.5,unusable\n"));
        assert_eq!("runtime-delta".parse::<Metric>().unwrap(), Metric::RuntimeDelta);
        assert!("nope".parse::<PlotShape>().is_err());
    }

    #[test]
    fn summaries_round_trip() {
        let rs: Vec<RunRecord> = (0..4).map(|i| rec("t", 1.0, 10, i, 3.0, 3.3)).collect();
        let s = aggregate(&rs, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        persist_summaries(&s, &p).unwrap();
        assert_eq!(load_summaries(&p).unwrap(), s);
    }
}
