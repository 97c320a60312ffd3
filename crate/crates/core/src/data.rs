//! Datasets and their privacy metadata.
//!
//! A [`Dataset`] is an immutable row-major table. Each column carries a
//! [`ColumnMeta`] that is treated as public knowledge: continuous columns
//! declare clamping bounds, categorical columns declare their label set.
//! Bounds are never computed from the data. Continuous cells may fall
//! outside their bounds; mechanisms clamp them before use.
//!
//! Metadata files are JSON:
//!
//! ```json
//! {
//!   "columns": [
//!     { "name": "age",   "kind": "continuous",  "lower": 18, "upper": 90 },
//!     { "name": "group", "kind": "categorical", "categories": ["A", "B"] }
//!   ],
//!   "target": "age"
//! }
//! ```
//!
//! Unknown fields are rejected.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, NoiseSource, SeedMixer};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Continuous { lower: f64, upper: f64 },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawColumn", into = "RawColumn")]
pub struct ColumnMeta {
    name: String,
    kind: ColumnKind,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Result<Self> {
        let name = name.into();
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Metadata(format!(
                "column `{name}`: bounds [{lower}, {upper}] must be finite with lower < upper"
            )));
        }
        Ok(ColumnMeta {
            name,
            kind: ColumnKind::Continuous { lower, upper },
        })
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let name = name.into();
        let categories: Vec<String> = categories.into_iter().map(Into::into).collect();
        if categories.is_empty() {
            return Err(Error::Metadata(format!(
                "column `{name}`: categorical column needs at least one category"
            )));
        }
        let mut seen = HashSet::new();
        for c in &categories {
            if !seen.insert(c.as_str()) {
                return Err(Error::Metadata(format!(
                    "column `{name}`: duplicate category `{c}`"
                )));
            }
        }
        Ok(ColumnMeta {
            name,
            kind: ColumnKind::Categorical { categories },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ColumnKind {
        &self.kind
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            ColumnKind::Continuous { lower, upper } => Some((lower, upper)),
            ColumnKind::Categorical { .. } => None,
        }
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { categories } => Some(categories),
            ColumnKind::Continuous { .. } => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }

    fn check(&self, value: &Value) -> std::result::Result<(), String> {
        match (&self.kind, value) {
            (ColumnKind::Continuous { .. }, Value::Real(v)) => {
                if v.is_finite() {
                    Ok(())
                } else {
                    Err(format!("column `{}`: non-finite value {v}", self.name))
                }
            }
            (ColumnKind::Categorical { categories }, Value::Category(i)) => {
                if (*i as usize) < categories.len() {
                    Ok(())
                } else {
                    Err(format!(
                        "column `{}`: category index {i} out of range",
                        self.name
                    ))
                }
            }
            _ => Err(format!("column `{}`: value kind mismatch", self.name)),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: String,
    kind: RawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Continuous,
    Categorical,
}

impl TryFrom<RawColumn> for ColumnMeta {
    type Error = Error;

    fn try_from(raw: RawColumn) -> Result<Self> {
        match raw.kind {
            RawKind::Continuous => {
                if raw.categories.is_some() {
                    return Err(Error::Metadata(format!(
                        "column `{}`: continuous column cannot list categories",
                        raw.name
                    )));
                }
                match (raw.lower, raw.upper) {
                    (Some(lower), Some(upper)) => ColumnMeta::continuous(raw.name, lower, upper),
                    _ => Err(Error::Metadata(format!(
                        "column `{}`: continuous column needs `lower` and `upper`",
                        raw.name
                    ))),
                }
            }
            RawKind::Categorical => {
                if raw.lower.is_some() || raw.upper.is_some() {
                    return Err(Error::Metadata(format!(
                        "column `{}`: categorical column cannot declare bounds",
                        raw.name
                    )));
                }
                let categories = raw.categories.ok_or_else(|| {
                    Error::Metadata(format!(
                        "column `{}`: categorical column needs `categories`",
                        raw.name
                    ))
                })?;
                ColumnMeta::categorical(raw.name, categories)
            }
        }
    }
}

impl From<ColumnMeta> for RawColumn {
    fn from(meta: ColumnMeta) -> Self {
        match meta.kind {
            ColumnKind::Continuous { lower, upper } => RawColumn {
                name: meta.name,
                kind: RawKind::Continuous,
                lower: Some(lower),
                upper: Some(upper),
                categories: None,
            },
            ColumnKind::Categorical { categories } => RawColumn {
                name: meta.name,
                kind: RawKind::Categorical,
                lower: None,
                upper: None,
                categories: Some(categories),
            },
        }
    }
}

/// Contents of a metadata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub columns: Vec<ColumnMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl Metadata {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let meta: Metadata = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::Metadata(format!("{}: {e}", path.display())))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("metadata serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Metadata("no columns declared".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name()) {
                return Err(Error::Metadata(format!("duplicate column `{}`", c.name())));
            }
        }
        if let Some(t) = &self.target {
            let col = self
                .columns
                .iter()
                .find(|c| c.name() == t)
                .ok_or_else(|| Error::Metadata(format!("target `{t}` is not a declared column")))?;
            if col.is_categorical() {
                return Err(Error::Metadata(format!("target `{t}` must be continuous")));
            }
        }
        Ok(())
    }
}

/// One cell. Categorical cells hold the index of their label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Real(f64),
    Category(u32),
}

impl Value {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(*v),
            Value::Category(_) => None,
        }
    }
}

pub type Row = Vec<Value>;

/// Immutable table with per-column privacy metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<ColumnMeta>,
    rows: Vec<Row>,
    target: Option<String>,
}

impl Dataset {
    /// Builds a dataset, rejecting any row that violates the metadata.
    pub fn new(columns: Vec<ColumnMeta>, rows: Vec<Row>, target: Option<String>) -> Result<Self> {
        Metadata {
            columns: columns.clone(),
            target: target.clone(),
        }
        .validate()?;
        for (i, row) in rows.iter().enumerate() {
            check_row(&columns, row).map_err(|message| Error::InvalidRow {
                row: i + 1,
                message,
            })?;
        }
        Ok(Dataset {
            columns,
            rows,
            target,
        })
    }

    fn with_rows(&self, rows: Vec<Row>) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows,
            target: self.target.clone(),
        }
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn metadata(&self) -> Metadata {
        Metadata {
            columns: self.columns.clone(),
            target: self.target.clone(),
        }
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<(usize, &ColumnMeta)> {
        let i = self.column_index(name)?;
        Ok((i, &self.columns[i]))
    }

    /// Values of a continuous column, in row order.
    pub fn reals(&self, name: &str) -> Result<Vec<f64>> {
        let (i, meta) = self.column(name)?;
        if meta.is_categorical() {
            return Err(Error::NotContinuous(name.to_string()));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r[i].as_real().expect("validated continuous cell"))
            .collect())
    }

    /// Every metadata violation in the table. Always empty for datasets
    /// built through this module.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            if let Err(m) = check_row(&self.columns, row) {
                out.push(format!("row {}: {m}", i + 1));
            }
        }
        out
    }

    /// Renders one cell back to its textual form.
    pub fn render(&self, column: usize, value: &Value) -> String {
        match (self.columns[column].kind(), value) {
            (ColumnKind::Categorical { categories }, Value::Category(c)) => {
                categories[*c as usize].clone()
            }
            (_, Value::Real(v)) => format!("{v}"),
            _ => String::new(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(self.columns.iter().map(|c| c.name()))
            .map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().enumerate().map(|(i, v)| self.render(i, v)))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_row(columns: &[ColumnMeta], row: &Row) -> std::result::Result<(), String> {
    if row.len() != columns.len() {
        return Err(format!(
            "expected {} values, found {}",
            columns.len(),
            row.len()
        ));
    }
    columns
        .iter()
        .zip(row)
        .try_for_each(|(meta, value)| meta.check(value))
}

/// Reads a headed CSV file whose header names are exactly the metadata
/// column names (any order). Rows are numbered from 1, header excluded.
pub fn load_csv(
    path: impl AsRef<Path>,
    meta: &[ColumnMeta],
    target: Option<&str>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedLine {
            line: 1,
            message: e.to_string(),
        })?
        .clone();

    // positions[i] = CSV field index holding metadata column i
    let mut positions = Vec::with_capacity(meta.len());
    for m in meta {
        let pos = header
            .iter()
            .position(|h| h == m.name())
            .ok_or_else(|| Error::MissingColumn(m.name().to_string()))?;
        positions.push(pos);
    }
    if let Some(extra) = header.iter().find(|h| !meta.iter().any(|m| m.name() == *h)) {
        return Err(Error::Metadata(format!(
            "CSV column `{extra}` has no metadata"
        )));
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| Error::InvalidRow {
            row: row_no,
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(meta.len());
        for (m, &pos) in meta.iter().zip(&positions) {
            let cell = record.get(pos).unwrap_or("");
            let value = match m.kind() {
                ColumnKind::Continuous { .. } => {
                    let v: f64 = cell.parse().map_err(|_| Error::ParseCell {
                        row: row_no,
                        column: m.name().to_string(),
                        value: cell.to_string(),
                    })?;
                    Value::Real(v)
                }
                ColumnKind::Categorical { categories } => {
                    let idx = categories.iter().position(|c| c == cell).ok_or_else(|| {
                        Error::UnknownCategory {
                            row: row_no,
                            column: m.name().to_string(),
                            label: cell.to_string(),
                        }
                    })?;
                    Value::Category(idx as u32)
                }
            };
            row.push(value);
        }
        rows.push(row);
    }
    Dataset::new(meta.to_vec(), rows, target.map(str::to_string))
}

/// Uniform sample of `n` rows without replacement. Survivors keep their
/// original relative order, so `n == d.size()` returns `d` unchanged.
pub fn subsample(d: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || n > d.size() {
        return Err(Error::invalid(format!(
            "subsample size {n} outside 1..={}",
            d.size()
        )));
    }
    let mut rng = seeded(seed);
    let mut picked = index::sample(&mut rng, d.size(), n).into_vec();
    picked.sort_unstable();
    Ok(d.with_rows(picked.into_iter().map(|i| d.rows[i].clone()).collect()))
}

/// Seeded disjoint partition into `(train, test)` with
/// `|train| = round(train_fraction * size)`.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n_train = (train_fraction * d.size() as f64).round() as usize;
    let mut order: Vec<usize> = (0..d.size()).collect();
    order.shuffle(&mut seeded(seed));
    let (train_idx, test_idx) = order.split_at_mut(n_train);
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let take = |idx: &[usize]| idx.iter().map(|&i| d.rows[i].clone()).collect();
    Ok((d.with_rows(take(train_idx)), d.with_rows(take(test_idx))))
}

/// How a neighbouring dataset differs from its source.
#[derive(Debug, Clone, PartialEq)]
pub enum NeighborEdit {
    Remove(usize),
    Add(Row),
}

/// Dataset differing from `d` by exactly one record. Added rows go last.
pub fn neighbor(d: &Dataset, edit: NeighborEdit) -> Result<Dataset> {
    let mut rows = d.rows.clone();
    match edit {
        NeighborEdit::Remove(i) => {
            if i >= rows.len() {
                return Err(Error::invalid(format!(
                    "row index {i} out of range for dataset of size {}",
                    rows.len()
                )));
            }
            rows.remove(i);
        }
        NeighborEdit::Add(row) => {
            check_row(&d.columns, &row).map_err(|message| Error::InvalidRow {
                row: rows.len() + 1,
                message,
            })?;
            rows.push(row);
        }
    }
    Ok(d.with_rows(rows))
}

/// Linear-regression data: features `x1..xd` uniform on `[-1, 1]`, target
/// `y = w·x + N(0, noise_std²)` with bounds `±(Σ|w| + 6·noise_std)`.
pub fn synth_regression(n: usize, weights: &[f64], noise_std: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || weights.is_empty() {
        return Err(Error::invalid("synthetic data needs n > 0 and at least one feature"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("noise_std must be >= 0 and weights finite"));
    }
    let d = weights.len();
    let reach = weights.iter().map(|w| w.abs()).sum::<f64>() + 6.0 * noise_std;
    let mut columns = Vec::with_capacity(d + 1);
    for j in 0..d {
        columns.push(ColumnMeta::continuous(format!("x{}", j + 1), -1.0, 1.0)?);
    }
    columns.push(ColumnMeta::continuous("y", -reach, reach)?);

    let mut rng = seeded(seed);
    let rows = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| 2.0 * rng.uniform_open() - 1.0).collect();
            let mut y: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
            if noise_std > 0.0 {
                y += noise_std * rng.standard_normal();
            }
            let mut row: Row = x.into_iter().map(Value::Real).collect();
            row.push(Value::Real(y));
            row
        })
        .collect();
    Dataset::new(columns, rows, Some("y".into()))
}

/// Labels and probabilities of the categorical column added by
/// [`synth_mixed`].
pub const MIXED_GROUPS: [(&str, f64); 4] = [("A", 0.4), ("B", 0.3), ("C", 0.2), ("D", 0.1)];

/// Regression data from [`synth_regression`] plus a positive continuous
/// column `age` uniform on `[18, 90]` and a categorical column `group`
/// drawn from [`MIXED_GROUPS`]. Serves as a stand-in for survey-shaped and
/// clinical-shaped data in one table.
pub fn synth_mixed(n: usize, weights: &[f64], noise_std: f64, seed: u64) -> Result<Dataset> {
    let base = synth_regression(n, weights, noise_std, seed)?;
    let mut columns = base.columns.clone();
    columns.push(ColumnMeta::continuous("age", 18.0, 90.0)?);
    columns.push(ColumnMeta::categorical(
        "group",
        MIXED_GROUPS.iter().map(|(l, _)| *l),
    )?);

    let mut rng = seeded(SeedMixer::new(seed).mix_str("synth_mixed").finish());
    let rows = base
        .rows
        .into_iter()
        .map(|mut row| {
            row.push(Value::Real(18.0 + 72.0 * rng.uniform_open()));
            let u = rng.uniform_open();
            let mut acc = 0.0;
            let mut group = MIXED_GROUPS.len() - 1;
            for (i, (_, p)) in MIXED_GROUPS.iter().enumerate() {
                acc += p;
                if u < acc {
                    group = i;
                    break;
                }
            }
            row.push(Value::Category(group as u32));
            row
        })
        .collect();
    Dataset::new(columns, rows, base.target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn meta_ab() -> Vec<ColumnMeta> {
        vec![
            ColumnMeta::continuous("v", 0.0, 10.0).unwrap(),
            ColumnMeta::categorical("c", ["A", "B"]).unwrap(),
        ]
    }

    fn csv_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let f = csv_file("v,c\n1,A\n2,B\n3.5,A\n");
        let d = load_csv(f.path(), &meta_ab(), None).unwrap();
        assert_eq!(d.size(), 3);
        assert_eq!(d.reals("v").unwrap(), vec![1.0, 2.0, 3.5]);
        assert!(d.violations().is_empty());
    }

    #[test]
    fn header_order_may_differ() {
        let f = csv_file("c,v\nB,4\n");
        let d = load_csv(f.path(), &meta_ab(), None).unwrap();
        assert_eq!(d.rows()[0], vec![Value::Real(4.0), Value::Category(1)]);
    }

    #[test]
    fn unparsable_cell_names_row() {
        let f = csv_file("v,c\n1,A\nabc,B\n3,A\n");
        let err = load_csv(f.path(), &meta_ab(), None).unwrap_err();
        match err {
            Error::ParseCell { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "v");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_category_rejected() {
        let f = csv_file("v,c\n1,X\n");
        assert!(matches!(
            load_csv(f.path(), &meta_ab(), None),
            Err(Error::UnknownCategory { row: 1, .. })
        ));
    }

    #[test]
    fn missing_and_extra_columns_rejected() {
        let f = csv_file("v\n1\n");
        assert!(matches!(
            load_csv(f.path(), &meta_ab(), None),
            Err(Error::MissingColumn(c)) if c == "c"
        ));
        let f = csv_file("v,c,z\n1,A,2\n");
        assert!(matches!(load_csv(f.path(), &meta_ab(), None), Err(Error::Metadata(_))));
    }

    #[test]
    fn out_of_bounds_value_kept_but_non_finite_rejected() {
        let f = csv_file("v,c\n11,A\n");
        let d = load_csv(f.path(), &meta_ab(), None).unwrap();
        assert_eq!(d.reals("v").unwrap(), vec![11.0]);
        let f = csv_file("v,c\n1,A\ninf,B\n");
        assert!(matches!(
            load_csv(f.path(), &meta_ab(), None),
            Err(Error::InvalidRow { row: 2, .. })
        ));
    }

    #[test]
    fn metadata_schema_is_checked() {
        let ok = r#"{"columns":[{"name":"v","kind":"continuous","lower":0,"upper":1},
                     {"name":"c","kind":"categorical","categories":["A"]}],"target":"v"}"#;
        let m: Metadata = serde_json::from_str(ok).unwrap();
        m.validate().unwrap();
        assert_eq!(m.columns[0].bounds(), Some((0.0, 1.0)));

        for bad in [
            r#"{"columns":[{"name":"v","kind":"continuous","lower":1,"upper":1}]}"#,
            r#"{"columns":[{"name":"v","kind":"continuous","lower":0}]}"#,
            r#"{"columns":[{"name":"c","kind":"categorical","categories":[]}]}"#,
            r#"{"columns":[{"name":"c","kind":"categorical","categories":["A","A"]}]}"#,
            r#"{"columns":[{"name":"c","kind":"categorical","categories":["A"],"lower":0}]}"#,
            r#"{"columns":[{"name":"v","kind":"continuous","lower":0,"upper":1,"unit":"kg"}]}"#,
            r#"{"columns":[{"name":"v","kind":"continuous","lower":0,"upper":1}],"extra":1}"#,
        ] {
            assert!(serde_json::from_str::<Metadata>(bad).is_err(), "{bad}");
        }
        let bad_target: Metadata = serde_json::from_str(
            r#"{"columns":[{"name":"c","kind":"categorical","categories":["A"]}],"target":"c"}"#,
        )
        .unwrap();
        assert!(bad_target.validate().is_err());
    }

    #[test]
    fn subsample_full_and_deterministic() {
        let d = synth_mixed(200, &[1.0, -1.0], 0.1, 3).unwrap();
        assert_eq!(subsample(&d, d.size(), 9).unwrap(), d);
        let a = subsample(&d, 50, 11).unwrap();
        let b = subsample(&d, 50, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.size(), 50);
        assert!(subsample(&d, 0, 1).is_err());
        assert!(subsample(&d, 201, 1).is_err());
    }

    #[test]
    fn subsample_survey_size_is_subset() {
        let d = synth_mixed(9358, &[0.5], 0.1, 5).unwrap();
        let s = subsample(&d, 1000, 42).unwrap();
        assert_eq!(s.size(), 1000);
        for row in s.rows() {
            assert!(d.rows().contains(row));
        }
    }

    #[test]
    fn split_partitions() {
        let d = synth_regression(10, &[1.0], 0.0, 1).unwrap();
        let (train, test) = split(&d, 0.8, 4).unwrap();
        assert_eq!((train.size(), test.size()), (8, 2));
        let mut all: Vec<String> = train
            .rows()
            .iter()
            .chain(test.rows())
            .map(|r| format!("{r:?}"))
            .collect();
        let mut orig: Vec<String> = d.rows().iter().map(|r| format!("{r:?}")).collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
        assert_eq!(split(&d, 0.8, 4).unwrap(), (train, test));
        assert!(split(&d, 0.0, 1).is_err());
        assert!(split(&d, 1.0, 1).is_err());
    }

    #[test]
    fn neighbor_add_remove() {
        let d = synth_mixed(20, &[1.0], 0.1, 2).unwrap();
        let removed = neighbor(&d, NeighborEdit::Remove(0)).unwrap();
        assert_eq!(removed.size(), 19);
        assert_eq!(removed.rows(), &d.rows()[1..]);

        let restored = neighbor(&removed, NeighborEdit::Add(d.rows()[0].clone())).unwrap();
        assert_eq!(restored.size(), 20);
        let mut a: Vec<String> = restored.rows().iter().map(|r| format!("{r:?}")).collect();
        let mut b: Vec<String> = d.rows().iter().map(|r| format!("{r:?}")).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);

        assert!(neighbor(&d, NeighborEdit::Remove(20)).is_err());
        assert!(neighbor(&d, NeighborEdit::Add(vec![Value::Real(0.0)])).is_err());
    }

    #[test]
    fn synth_rejects_empty() {
        assert!(synth_regression(0, &[1.0], 0.1, 1).is_err());
        assert!(synth_regression(5, &[], 0.1, 1).is_err());
        assert!(synth_regression(5, &[1.0], -0.1, 1).is_err());
    }

    #[test]
    fn synth_bounds_from_construction() {
        let d = synth_regression(100, &[1.0, -2.0], 0.5, 1).unwrap();
        let (_, y) = d.column("y").unwrap();
        assert_eq!(y.bounds(), Some((-6.0, 6.0)));
        assert!(d.violations().is_empty());
        assert_eq!(d.target(), Some("y"));
    }

    #[test]
    fn csv_round_trip() {
        let d = synth_mixed(30, &[1.0, 0.5], 0.1, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        let meta = dir.path().join("m.json");
        d.write_csv(&csv).unwrap();
        d.metadata().save(&meta).unwrap();
        let m = Metadata::load(&meta).unwrap();
        let back = load_csv(&csv, &m.columns, m.target.as_deref()).unwrap();
        assert_eq!(back, d);
    }
}
