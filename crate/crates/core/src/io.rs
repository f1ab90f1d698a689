//! Dataset ingestion and column standardization.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::ComponentParams;
use crate::error::{Error, Result};
use crate::select::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// `n × p`, all entries finite.
    pub matrix: DMatrix<f64>,
    pub column_names: Vec<String>,
    /// Raw class labels; `None` marks a missing label.
    pub labels: Option<Vec<Option<String>>>,
    /// Per-column `(mean, sd)` when the matrix has been standardized.
    pub scaling: Option<Vec<ColumnScaling>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    /// 0-based column index.
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub label: Option<LabelColumn>,
    /// Label cells equal to this token (after trimming) are treated as missing.
    pub missing_label: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            label: None,
            missing_label: None,
        }
    }
}

/// Read a numeric CSV file. See [`read_csv`].
pub fn ingest_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, options)
}

/// Parse CSV text (RFC 4180 quoting). Every non-label column must be numeric
/// and finite; errors carry the 1-based line number of the offending record.
pub fn read_csv<R: std::io::Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let first = match records.next() {
        None => return Err(Error::Parse { line: 1, message: "file is empty".into() }),
        Some(r) => r.map_err(csv_error)?,
    };
    let width = first.len();
    let (header, mut pending) = if options.has_header {
        (first.iter().map(str::to_string).collect::<Vec<_>>(), None)
    } else {
        ((1..=width).map(|k| format!("x{k}")).collect(), Some(first))
    };

    let label_idx = match &options.label {
        None => None,
        Some(LabelColumn::Index(k)) if *k < width => Some(*k),
        Some(LabelColumn::Index(k)) => {
            return Err(Error::Input(format!("label column index {k} outside 0..{width}")));
        }
        Some(LabelColumn::Name(name)) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Input(format!("no column named '{name}'")))?,
        ),
    };
    let feature_cols: Vec<usize> = (0..width).filter(|&k| Some(k) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::Input("no numeric feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    loop {
        let record = match pending.take() {
            Some(r) => r,
            None => match records.next() {
                None => break,
                Some(r) => r.map_err(csv_error)?,
            },
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for &k in &feature_cols {
            let cell = &record[k];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column '{}': '{cell}' is not a number", header[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column '{}': non-finite value '{cell}'", header[k]),
                });
            }
            values.push(v);
        }
        if let Some(k) = label_idx {
            let cell = &record[k];
            let missing = options.missing_label.as_deref() == Some(cell);
            labels.push((!missing).then(|| cell.to_string()));
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    let p = feature_cols.len();
    Ok(Dataset {
        matrix: DMatrix::from_row_slice(n, p, &values),
        column_names: feature_cols.iter().map(|&k| header[k].clone()).collect(),
        labels: label_idx.map(|_| labels),
        scaling: None,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, message: e.to_string() }
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    /// Distinct non-missing labels in order of first appearance; label `k`
    /// (0-based) in [`known_labels`](Self::known_labels) refers to `classes()[k]`.
    pub fn classes(&self) -> Vec<String> {
        let mut classes: Vec<String> = Vec::new();
        for l in self.labels.iter().flatten().flatten() {
            if !classes.contains(l) {
                classes.push(l.clone());
            }
        }
        classes
    }

    /// 0-based class index per row, `None` where missing.
    pub fn known_labels(&self) -> Option<Vec<Option<usize>>> {
        let classes = self.classes();
        self.labels.as_ref().map(|ls| {
            ls.iter()
                .map(|l| l.as_ref().map(|l| classes.iter().position(|c| c == l).expect("class listed")))
                .collect()
        })
    }

    /// The complete labelling as a partition; `None` if labels are absent or
    /// any is missing.
    pub fn truth(&self) -> Option<Partition> {
        let known = self.known_labels()?;
        let labels: Option<Vec<usize>> = known.into_iter().collect();
        labels.map(|l| Partition::new(l, self.classes().len()).expect("indices below class count"))
    }
}

/// Standardize each column to mean 0 and sample standard deviation 1.
pub fn scale_columns(ds: &Dataset) -> Result<Dataset> {
    if ds.scaling.is_some() {
        return Err(Error::Input("dataset is already scaled".into()));
    }
    let n = ds.n();
    if n < 2 {
        return Err(Error::Input("scaling needs at least two rows".into()));
    }
    let mut matrix = ds.matrix.clone();
    let mut scaling = Vec::with_capacity(ds.p());
    for (k, mut col) in matrix.column_iter_mut().enumerate() {
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Input(format!("column '{}' has zero variance", ds.column_names[k])));
        }
        col.apply(|v| *v = (*v - mean) / sd);
        scaling.push(ColumnScaling { mean, sd });
    }
    Ok(Dataset {
        matrix,
        scaling: Some(scaling),
        ..ds.clone()
    })
}

/// Undo [`scale_columns`]; a no-op on unscaled data.
pub fn unscale(ds: &Dataset) -> Dataset {
    let Some(scaling) = &ds.scaling else {
        return ds.clone();
    };
    let mut matrix = ds.matrix.clone();
    for (mut col, s) in matrix.column_iter_mut().zip(scaling) {
        col.apply(|v| *v = *v * s.sd + s.mean);
    }
    Dataset {
        matrix,
        scaling: None,
        ..ds.clone()
    }
}

/// Express component parameters fitted on standardized data in the original
/// units: `ξ ↦ m + Sξ`, `Ω ↦ SΩS`, `λ ↦ Sλ` with `S = diag(sd)`.
pub fn unscale_params(params: &ComponentParams, scaling: &[ColumnScaling]) -> ComponentParams {
    let sd = DVector::from_iterator(scaling.len(), scaling.iter().map(|s| s.sd));
    let mean = DVector::from_iterator(scaling.len(), scaling.iter().map(|s| s.mean));
    let s = DMatrix::from_diagonal(&sd);
    ComponentParams {
        location: mean + params.location.component_mul(&sd),
        scale: &s * &params.scale * &s,
        skew: params.skew.component_mul(&sd),
        dof: params.dof,
    }
}
