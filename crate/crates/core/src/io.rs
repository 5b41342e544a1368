//! Reading inputs and writing reports.
//!
//! Distributions: CSV with one `label,value` or `value` record per category
//! (an optional header is skipped), or JSON as a bare number array or a
//! `{probs, labels}` object. Tables: CSV matrices with optional column-label
//! header and row-label column, or JSON arrays of rows. Three-way tables are
//! JSON only, as `t[i][j][k]` nested arrays or `{dims, probs}`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::simplex::{Distribution, JointTable, ThreeWayTable};

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn context<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    context(path, serde_json::from_str(&text).map_err(Error::from))
}

pub fn read_text(path: &Path) -> Result<String> {
    read_to_string(path)
}

fn parse_num(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

fn csv_records(text: &str) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(out)
}

/// Values with optional labels, unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledValues {
    pub values: Vec<f64>,
    pub labels: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonVector {
    Bare(Vec<f64>),
    Object {
        #[serde(alias = "values", alias = "weights", alias = "counts")]
        probs: Vec<f64>,
        #[serde(default)]
        labels: Option<Vec<String>>,
    },
}

fn parse_vector_csv(text: &str) -> Result<LabeledValues> {
    let mut records = csv_records(text)?;
    if records.first().is_some_and(|r| r.last().and_then(|v| parse_num(v)).is_none()) {
        records.remove(0);
    }
    if records.is_empty() {
        return Err(Error::Parse("no values".into()));
    }
    let width = records[0].len();
    if width > 2 || records.iter().any(|r| r.len() != width) {
        return Err(Error::Parse("expected `value` or `label,value` records".into()));
    }
    let mut values = Vec::with_capacity(records.len());
    let mut labels = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let v = r.last().unwrap();
        values.push(parse_num(v).ok_or_else(|| Error::Parse(format!("record {}: {v:?} is not a number", i + 1)))?);
        if width == 2 {
            labels.push(r[0].clone());
        }
    }
    Ok(LabeledValues { values, labels: (width == 2).then_some(labels) })
}

pub fn read_values(path: &Path) -> Result<LabeledValues> {
    let text = read_to_string(path)?;
    let parsed = if is_json(path) {
        match serde_json::from_str::<JsonVector>(&text) {
            Ok(JsonVector::Bare(values)) => Ok(LabeledValues { values, labels: None }),
            Ok(JsonVector::Object { probs, labels }) => Ok(LabeledValues { values: probs, labels }),
            Err(e) => Err(Error::from(e)),
        }
    } else {
        parse_vector_csv(&text)
    };
    context(path, parsed)
}

fn labeled(d: Distribution, labels: Option<Vec<String>>) -> Result<Distribution> {
    match labels {
        Some(l) => d.with_labels(l),
        None => Ok(d),
    }
}

/// A probability vector that must already sum to 1.
pub fn read_distribution(path: &Path) -> Result<Distribution> {
    let v = read_values(path)?;
    context(path, Distribution::new(v.values).and_then(|d| labeled(d, v.labels)))
}

/// Nonnegative weights (e.g. counts), normalized on load.
pub fn read_weights(path: &Path) -> Result<Distribution> {
    let v = read_values(path)?;
    context(path, Distribution::from_weights(v.values).and_then(|d| labeled(d, v.labels)))
}

/// Nonnegative integer counts.
pub fn read_counts(path: &Path) -> Result<Vec<u64>> {
    let v = read_values(path)?;
    v.values
        .iter()
        .map(|&x| {
            if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
                Ok(x as u64)
            } else {
                Err(Error::Parse(format!("{}: {x} is not a nonnegative integer count", path.display())))
            }
        })
        .collect()
}

/// Numeric matrix with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: Vec<Vec<f64>>,
    pub row_labels: Option<Vec<String>>,
    pub col_labels: Option<Vec<String>>,
}

fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut records = csv_records(text)?;
    if records.is_empty() {
        return Err(Error::Parse("no rows".into()));
    }
    let header = records[0].iter().skip(1).any(|c| parse_num(c).is_none());
    let header = if header { Some(records.remove(0)) } else { None };
    let row_labelled = records.first().is_some_and(|r| r.first().and_then(|c| parse_num(c)).is_none());
    let mut rows = Vec::with_capacity(records.len());
    let mut row_labels = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let cells = if row_labelled {
            row_labels.push(r[0].clone());
            &r[1..]
        } else {
            &r[..]
        };
        let row = cells
            .iter()
            .map(|c| parse_num(c).ok_or_else(|| Error::Parse(format!("row {}: {c:?} is not a number", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let col_labels = header.map(|h| {
        let skip = usize::from(row_labelled || h.len() > rows.first().map_or(0, Vec::len));
        h[skip..].to_vec()
    });
    Ok(Matrix { rows, row_labels: row_labelled.then_some(row_labels), col_labels })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonMatrix {
    Bare(Vec<Vec<f64>>),
    Object {
        rows: Vec<Vec<f64>>,
        #[serde(default)]
        row_labels: Option<Vec<String>>,
        #[serde(default)]
        col_labels: Option<Vec<String>>,
    },
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = read_to_string(path)?;
    let parsed = if is_json(path) {
        match serde_json::from_str::<JsonMatrix>(&text) {
            Ok(JsonMatrix::Bare(rows)) => Ok(Matrix { rows, row_labels: None, col_labels: None }),
            Ok(JsonMatrix::Object { rows, row_labels, col_labels }) => Ok(Matrix { rows, row_labels, col_labels }),
            Err(e) => Err(Error::from(e)),
        }
    } else {
        parse_matrix_csv(&text)
    };
    context(path, parsed)
}

/// A joint probability table; with `weights` the entries are normalized
/// instead of required to sum to 1.
pub fn read_table(path: &Path, weights: bool) -> Result<JointTable> {
    let m = read_matrix(path)?;
    let t = if weights { JointTable::from_weight_rows(&m.rows) } else { JointTable::from_rows(&m.rows) };
    context(path, t.and_then(|t| t.with_labels(m.row_labels, m.col_labels)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonThreeWay {
    Nested(Vec<Vec<Vec<f64>>>),
    Flat { dims: [usize; 3], probs: Vec<f64> },
}

pub fn read_threeway(path: &Path, weights: bool) -> Result<ThreeWayTable> {
    let text = read_to_string(path)?;
    let parsed = serde_json::from_str::<JsonThreeWay>(&text).map_err(Error::from).and_then(|t| match t {
        JsonThreeWay::Nested(t) if weights => {
            let dims = [t.len(), t.first().map_or(0, Vec::len), t.first().and_then(|p| p.first()).map_or(0, Vec::len)];
            let flat: Vec<f64> = t.iter().flatten().flatten().copied().collect();
            ThreeWayTable::from_nested(&t).or_else(|_| ThreeWayTable::from_weights(dims, flat))
        }
        JsonThreeWay::Nested(t) => ThreeWayTable::from_nested(&t),
        JsonThreeWay::Flat { dims, probs } if weights => ThreeWayTable::from_weights(dims, probs),
        JsonThreeWay::Flat { dims, probs } => ThreeWayTable::new(dims, probs),
    });
    context(path, parsed)
}

/// Writes `contents` to `path` in one step: a sibling temporary file is
/// renamed over the target, so readers never see a partial report.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::domain(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
