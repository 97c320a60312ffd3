//! SUM, AVG, COUNT and HISTOGRAM in exact and differentially private form.
//!
//! Sensitivities come from column metadata only, under add/remove-one-record
//! neighbours:
//!
//! | query     | sensitivity        | spend                         |
//! |-----------|--------------------|-------------------------------|
//! | count     | 1                  | ε                             |
//! | sum       | max(\|L\|, \|U\|)  | ε                             |
//! | avg       | sum and count      | ε/2 + ε/2                     |
//! | histogram | 1 per bin          | ε once (parallel composition) |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnMeta, Dataset, Value};
use crate::error::{Error, Result};
use crate::mechanisms::{
    clamp, laplace_mechanism_labeled, BudgetLedger, NoiseSpec, PrivacyParams, Spend,
};
use crate::rng::NoiseSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Sum,
    Count,
    Avg,
    Histogram,
}

impl QueryKind {
    pub const ALL: [QueryKind; 4] = [
        QueryKind::Sum,
        QueryKind::Avg,
        QueryKind::Count,
        QueryKind::Histogram,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QueryKind::Sum => "sum",
            QueryKind::Count => "count",
            QueryKind::Avg => "avg",
            QueryKind::Histogram => "histogram",
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(QueryKind::Sum),
            "count" => Ok(QueryKind::Count),
            "avg" | "average" => Ok(QueryKind::Avg),
            "histogram" => Ok(QueryKind::Histogram),
            other => Err(Error::invalid(format!("unknown query kind `{other}`"))),
        }
    }
}

/// A query answer: one number, or one number per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryOutput {
    Scalar(f64),
    Bins(BTreeMap<String, f64>),
}

impl QueryOutput {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            QueryOutput::Scalar(v) => Some(*v),
            QueryOutput::Bins(_) => None,
        }
    }

    pub fn bins(&self) -> Option<&BTreeMap<String, f64>> {
        match self {
            QueryOutput::Bins(b) => Some(b),
            QueryOutput::Scalar(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            QueryOutput::Scalar(v) => v.is_finite(),
            QueryOutput::Bins(b) => b.values().all(|v| v.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub kind: QueryKind,
    pub output: QueryOutput,
    pub budget_spent: Spend,
}

fn continuous_bounds<'a>(d: &'a Dataset, column: &str) -> Result<(usize, f64, f64, &'a ColumnMeta)> {
    let (i, meta) = d.column(column)?;
    let (lo, hi) = meta
        .bounds()
        .ok_or_else(|| Error::NotContinuous(column.to_string()))?;
    Ok((i, lo, hi, meta))
}

fn clamped_sum(d: &Dataset, idx: usize, lo: f64, hi: f64) -> f64 {
    d.rows()
        .iter()
        .map(|r| {
            let v = r[idx].as_real().expect("continuous cell");
            clamp(v, lo, hi).expect("validated bounds")
        })
        .sum()
}

fn category_counts(d: &Dataset, column: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let (i, meta) = d.column(column)?;
    let cats = meta
        .categories()
        .ok_or_else(|| Error::NotCategorical(column.to_string()))?;
    let mut counts = vec![0.0; cats.len()];
    for r in d.rows() {
        if let Value::Category(c) = r[i] {
            counts[c as usize] += 1.0;
        }
    }
    Ok((cats.to_vec(), counts))
}

fn bins(labels: Vec<String>, values: Vec<f64>) -> QueryOutput {
    QueryOutput::Bins(labels.into_iter().zip(values).collect())
}

/// Exact answer; spends nothing.
pub fn np_query(kind: QueryKind, d: &Dataset, column: &str) -> Result<QueryResult> {
    let output = match kind {
        QueryKind::Count => {
            d.column(column)?;
            QueryOutput::Scalar(d.size() as f64)
        }
        QueryKind::Sum => {
            let (i, lo, hi, _) = continuous_bounds(d, column)?;
            QueryOutput::Scalar(clamped_sum(d, i, lo, hi))
        }
        QueryKind::Avg => {
            let (i, lo, hi, _) = continuous_bounds(d, column)?;
            if d.is_empty() {
                return Err(Error::Empty("average over an empty dataset"));
            }
            QueryOutput::Scalar(clamped_sum(d, i, lo, hi) / d.size() as f64)
        }
        QueryKind::Histogram => {
            let (labels, counts) = category_counts(d, column)?;
            bins(labels, counts)
        }
    };
    Ok(QueryResult {
        kind,
        output,
        budget_spent: Spend::default(),
    })
}

fn pure_budget(budget: PrivacyParams) -> Result<()> {
    if budget.delta() != 0.0 {
        return Err(Error::invalid("statistical queries take a pure budget (δ = 0)"));
    }
    Ok(())
}

fn spent(budget: PrivacyParams) -> Spend {
    Spend {
        epsilon: budget.epsilon(),
        delta: 0.0,
    }
}

pub fn dp_count<R: NoiseSource + ?Sized>(
    d: &Dataset,
    column: &str,
    budget: PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    d.column(column)?;
    let noisy = laplace_mechanism_labeled("count", d.size() as f64, 1.0, budget, ledger, rng)?;
    Ok(QueryResult {
        kind: QueryKind::Count,
        output: QueryOutput::Scalar(noisy),
        budget_spent: spent(budget),
    })
}

/// Sensitivity of a clamped sum over `[lower, upper]` under add/remove.
pub fn sum_sensitivity(lower: f64, upper: f64) -> f64 {
    lower.abs().max(upper.abs())
}

pub fn dp_sum<R: NoiseSource + ?Sized>(
    d: &Dataset,
    column: &str,
    budget: PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    let (i, lo, hi, _) = continuous_bounds(d, column)?;
    let total = clamped_sum(d, i, lo, hi);
    let noisy = laplace_mechanism_labeled("sum", total, sum_sensitivity(lo, hi), budget, ledger, rng)?;
    Ok(QueryResult {
        kind: QueryKind::Sum,
        output: QueryOutput::Scalar(noisy),
        budget_spent: spent(budget),
    })
}

/// Noisy clamped sum over a noisy count, each at ε/2. The denominator is
/// floored at 1.
pub fn dp_avg<R: NoiseSource + ?Sized>(
    d: &Dataset,
    column: &str,
    budget: PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    pure_budget(budget)?;
    let (i, lo, hi, _) = continuous_bounds(d, column)?;
    if d.is_empty() {
        return Err(Error::Empty("average over an empty dataset"));
    }
    ledger.ensure_available(budget.epsilon(), 0.0)?;
    let half = PrivacyParams::pure(budget.epsilon() / 2.0)?;
    let total = clamped_sum(d, i, lo, hi);
    let noisy_sum =
        laplace_mechanism_labeled("avg.sum", total, sum_sensitivity(lo, hi), half, ledger, rng)?;
    let noisy_count =
        laplace_mechanism_labeled("avg.count", d.size() as f64, 1.0, half, ledger, rng)?;
    Ok(QueryResult {
        kind: QueryKind::Avg,
        output: QueryOutput::Scalar(noisy_sum / noisy_count.max(1.0)),
        budget_spent: spent(budget),
    })
}

/// Per-category counts plus Laplace(1/ε) noise. Bins are disjoint, so the
/// whole histogram is charged ε once.
pub fn dp_histogram<R: NoiseSource + ?Sized>(
    d: &Dataset,
    column: &str,
    budget: PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    pure_budget(budget)?;
    let (labels, counts) = category_counts(d, column)?;
    let noise = NoiseSpec::laplace_for(1.0, budget.epsilon())?;
    ledger.charge("histogram", budget.epsilon(), 0.0)?;
    let noisy = counts.into_iter().map(|c| c + noise.sample(rng)).collect();
    Ok(QueryResult {
        kind: QueryKind::Histogram,
        output: bins(labels, noisy),
        budget_spent: spent(budget),
    })
}

pub fn dp_query<R: NoiseSource + ?Sized>(
    kind: QueryKind,
    d: &Dataset,
    column: &str,
    budget: PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    match kind {
        QueryKind::Count => dp_count(d, column, budget, ledger, rng),
        QueryKind::Sum => dp_sum(d, column, budget, ledger, rng),
        QueryKind::Avg => dp_avg(d, column, budget, ledger, rng),
        QueryKind::Histogram => dp_histogram(d, column, budget, ledger, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_mixed, ColumnMeta};
    use crate::rng::{seeded, ZeroNoise};

    fn table(values: &[f64], labels: &[u32]) -> Dataset {
        let cols = vec![
            ColumnMeta::continuous("v", 0.0, 10.0).unwrap(),
            ColumnMeta::categorical("c", ["A", "B"]).unwrap(),
        ];
        let rows = values
            .iter()
            .zip(labels)
            .map(|(v, l)| vec![Value::Real(*v), Value::Category(*l)])
            .collect();
        Dataset::new(cols, rows, None).unwrap()
    }

    fn eps(e: f64) -> (PrivacyParams, BudgetLedger) {
        let b = PrivacyParams::pure(e).unwrap();
        (b, BudgetLedger::new(b))
    }

    #[test]
    fn np_answers() {
        let d = table(&[1.0, 2.0, 3.0], &[0, 0, 1]);
        assert_eq!(np_query(QueryKind::Count, &d, "v").unwrap().output, QueryOutput::Scalar(3.0));
        assert_eq!(np_query(QueryKind::Sum, &d, "v").unwrap().output, QueryOutput::Scalar(6.0));
        assert_eq!(np_query(QueryKind::Avg, &d, "v").unwrap().output, QueryOutput::Scalar(2.0));
        let h = np_query(QueryKind::Histogram, &d, "c").unwrap();
        let b = h.output.bins().unwrap();
        assert_eq!(b["A"], 2.0);
        assert_eq!(b["B"], 1.0);
        assert_eq!(h.budget_spent, Spend::default());
    }

    #[test]
    fn np_errors() {
        let d = table(&[1.0], &[0]);
        assert!(matches!(np_query(QueryKind::Histogram, &d, "v"), Err(Error::NotCategorical(_))));
        assert!(matches!(np_query(QueryKind::Sum, &d, "c"), Err(Error::NotContinuous(_))));
        assert!(matches!(np_query(QueryKind::Count, &d, "zz"), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn zero_noise_count_is_exact() {
        let d = table(&[1.0, 2.0, 3.0], &[0, 0, 1]);
        let (b, mut l) = eps(1.0);
        let r = dp_count(&d, "v", b, &mut l, &mut ZeroNoise).unwrap();
        assert_eq!(r.output.scalar(), Some(3.0));
        assert_eq!(r.budget_spent.epsilon, 1.0);
    }

    #[test]
    fn sum_clamps_outliers() {
        let d = table(&[1.0, 2.0, 1000.0], &[0, 0, 0]);
        let (b, mut l) = eps(1.0);
        let r = dp_sum(&d, "v", b, &mut l, &mut ZeroNoise).unwrap();
        assert_eq!(r.output.scalar(), Some(13.0));

        let d = table(&[1.0, 2.5, 3.0], &[0, 0, 0]);
        let (b, mut l) = eps(1.0);
        let r = dp_sum(&d, "v", b, &mut l, &mut ZeroNoise).unwrap();
        assert_eq!(r.output.scalar(), Some(6.5));
    }

    #[test]
    fn sum_sensitivity_uses_largest_bound_magnitude() {
        assert_eq!(sum_sensitivity(0.0, 10.0), 10.0);
        assert_eq!(sum_sensitivity(-20.0, 10.0), 20.0);
        assert_eq!(sum_sensitivity(-1.0, -0.5), 1.0);
    }

    #[test]
    fn sum_noise_variance() {
        // bounds [0, 10] → sensitivity 10, ε = 1 → Var = 2·10² = 200.
        let d = table(&[5.0; 4], &[0; 4]);
        let mut rng = seeded(17);
        let n = 1_000_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let (b, mut l) = eps(1.0);
            let x = dp_sum(&d, "v", b, &mut l, &mut rng).unwrap().output.scalar().unwrap() - 20.0;
            acc += x;
            acc2 += x * x;
        }
        let mean = acc / n as f64;
        let var = acc2 / n as f64 - mean * mean;
        assert!((var - 200.0).abs() / 200.0 < 0.05, "variance {var}");
    }

    #[test]
    fn avg_constant_column_and_ledger() {
        let d = table(&[4.0; 10], &[0; 10]);
        let (b, mut l) = eps(1.0);
        let r = dp_avg(&d, "v", b, &mut l, &mut ZeroNoise).unwrap();
        assert_eq!(r.output.scalar(), Some(4.0));
        let entries = l.entries();
        assert_eq!(entries.len(), 2);
        assert!(entries.iter().all(|e| e.epsilon == 0.5));
        assert_eq!(l.spent().epsilon, 1.0);
    }

    #[test]
    fn avg_does_not_half_spend() {
        let d = table(&[4.0; 10], &[0; 10]);
        let mut l = BudgetLedger::new(PrivacyParams::pure(0.8).unwrap());
        let b = PrivacyParams::pure(1.0).unwrap();
        assert!(dp_avg(&d, "v", b, &mut l, &mut ZeroNoise).is_err());
        assert!(l.entries().is_empty());
    }

    #[test]
    fn avg_median_tracks_truth() {
        let d = synth_mixed(1000, &[1.0], 0.1, 77).unwrap();
        let truth = np_query(QueryKind::Avg, &d, "age").unwrap().output.scalar().unwrap();
        let mut rng = seeded(78);
        let mut xs: Vec<f64> = (0..10_000)
            .map(|_| {
                let (b, mut l) = eps(1.0);
                dp_avg(&d, "age", b, &mut l, &mut rng).unwrap().output.scalar().unwrap()
            })
            .collect();
        xs.sort_by(f64::total_cmp);
        let median = (xs[4999] + xs[5000]) / 2.0;
        assert!((median - truth).abs() / truth < 0.01, "median {median} truth {truth}");
    }

    #[test]
    fn histogram_eligibility_and_zero_noise() {
        let d = table(&[1.0, 2.0], &[0, 0]);
        let (b, mut l) = eps(1.0);
        assert!(matches!(
            dp_histogram(&d, "v", b, &mut l, &mut ZeroNoise),
            Err(Error::NotCategorical(_))
        ));
        assert!(l.entries().is_empty());

        let cols = vec![ColumnMeta::categorical("c", ["only"]).unwrap()];
        let rows = (0..7).map(|_| vec![Value::Category(0)]).collect();
        let single = Dataset::new(cols, rows, None).unwrap();
        let r = dp_histogram(&single, "c", b, &mut l, &mut ZeroNoise).unwrap();
        assert_eq!(r.output.bins().unwrap()["only"], 7.0);
        assert_eq!(l.entries().len(), 1);
        assert_eq!(l.entries()[0].epsilon, 1.0);
    }

    #[test]
    fn histogram_empty_bin_noise_is_centered() {
        // Category B never occurs: its noisy count is pure noise.
        let d = table(&[1.0; 5], &[0; 5]);
        let mut rng = seeded(5);
        let k = 10_000;
        let scale = 1.0 / 0.5;
        let mut sum = 0.0;
        for _ in 0..k {
            let (b, mut l) = eps(0.5);
            sum += dp_histogram(&d, "c", b, &mut l, &mut rng).unwrap().output.bins().unwrap()["B"];
        }
        let mean = sum / k as f64;
        assert!(mean.abs() < 5.0 * scale / (k as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn exhausted_budget_rejected() {
        let d = table(&[1.0], &[0]);
        let mut l = BudgetLedger::new(PrivacyParams::pure(0.5).unwrap());
        let b = PrivacyParams::pure(1.0).unwrap();
        for kind in QueryKind::ALL {
            let col = if kind == QueryKind::Histogram { "c" } else { "v" };
            assert!(matches!(
                dp_query(kind, &d, col, b, &mut l, &mut ZeroNoise),
                Err(Error::BudgetExhausted { .. })
            ));
        }
    }

    #[test]
    fn query_kind_parses() {
        assert_eq!("AVG".parse::<QueryKind>().unwrap(), QueryKind::Avg);
        assert!("median".parse::<QueryKind>().is_err());
    }
}
