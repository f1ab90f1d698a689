//! Run reports: one JSON document per run plus a CSV of MAP labels.
//!
//! Field names are documented in the README. `schema_version` is bumped on
//! any incompatible change.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distributions::ComponentParams;
use crate::em::{map_labels, Family, FitConfig, MixtureFit};
use crate::error::{Error, Result};
use crate::grid::{CellRecord, GridOutcome, GridSpec};
use crate::io::{unscale_params, ColumnScaling, Dataset};
use crate::scale::ScaleModel;
use crate::select::{ari, merge_by_hand, merge_entropy_responsibilities, MergeTree, Partition, MAX_HAND_MERGE};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Cluster,
    Classify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub source: Option<String>,
    pub n: usize,
    pub p: usize,
    pub column_names: Vec<String>,
    /// Column `(mean, sd)` when the data were standardized before fitting.
    pub scaling: Option<Vec<ColumnScaling>>,
    /// Class names, in the order used for 0-based class indices.
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub task: Task,
    pub families: Vec<Family>,
    pub models: Vec<ScaleModel>,
    pub g_min: usize,
    pub g_max: usize,
    pub extend_to: Option<usize>,
    pub extended: bool,
    pub config: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFit {
    /// Index into `records`.
    pub record: usize,
    pub family: Family,
    pub model: ScaleModel,
    pub g: usize,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    /// False when the selected fit hit the iteration cap.
    pub converged: bool,
    pub iterations: usize,
    pub weights: Vec<f64>,
    /// Parameters on the scale the model was fitted on.
    pub components: Vec<ComponentParams>,
    /// Parameters back-transformed to the original units, for scaled data.
    pub components_original_units: Option<Vec<ComponentParams>>,
    pub loglik_trace: Vec<f64>,
    pub warnings: Vec<String>,
    /// `n` rows of `g` posterior probabilities.
    pub responsibilities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandMerge {
    /// 1-based merged labels.
    pub labels: Vec<usize>,
    pub ari: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyMerge {
    pub tree: MergeTree,
    /// Merge step with the largest ARI (0 = unmerged) and that ARI.
    pub best_step: usize,
    pub best_ari: f64,
}

/// Agreement with known labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// ARI over all rows.
    pub ari: f64,
    /// For classification: ARI over the rows whose labels were hidden.
    pub ari_unlabelled: Option<f64>,
    /// Absent when g exceeds the exhaustive-search limit.
    pub hand_merge: Option<HandMerge>,
    pub entropy_merge: EntropyMerge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub generator: String,
    pub data: DataSummary,
    pub grid: GridSummary,
    pub records: Vec<CellRecord>,
    pub selected: SelectedFit,
    /// 1-based MAP labels of the selected fit.
    pub labels: Vec<usize>,
    pub evaluation: Option<Evaluation>,
}

impl RunReport {
    /// Assemble a report. `truth` enables the evaluation block; `hidden`
    /// marks rows whose labels were withheld during classification.
    pub fn new(
        ds: &Dataset,
        source: Option<String>,
        spec: &GridSpec,
        task: Task,
        outcome: &GridOutcome,
        truth: Option<&Partition>,
        hidden: Option<&[bool]>,
    ) -> Result<Self> {
        let fit = &outcome.fit;
        let labels = fit.labels();
        let evaluation = truth.map(|t| evaluate(fit, t, hidden)).transpose()?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            generator: format!("skewclust {}", env!("CARGO_PKG_VERSION")),
            data: DataSummary {
                source,
                n: ds.n(),
                p: ds.p(),
                column_names: ds.column_names.clone(),
                scaling: ds.scaling.clone(),
                classes: ds.classes(),
            },
            grid: GridSummary {
                task,
                families: spec.families.clone(),
                models: spec.models.clone(),
                g_min: spec.g_min,
                g_max: spec.g_max,
                extend_to: spec.extend_to,
                extended: outcome.extended,
                config: spec.config.clone(),
            },
            records: outcome.records.clone(),
            selected: selected_fit(fit, outcome.selected, ds.scaling.as_deref()),
            labels: labels.iter().map(|l| l + 1).collect(),
            evaluation,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => Ok(serde_json::from_value(value)?),
            Some(v) => Err(Error::Input(format!(
                "report schema version {v} is not supported (expected {SCHEMA_VERSION})"
            ))),
            None => Err(Error::Input("report has no schema_version".into())),
        }
    }

    /// The selected fit's responsibilities as an `n × g` matrix.
    pub fn responsibilities(&self) -> DMatrix<f64> {
        let z = &self.selected.responsibilities;
        DMatrix::from_fn(z.len(), self.selected.g, |j, i| z[j][i])
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Copy with every wall-time field zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for rec in &mut r.records {
            rec.wall_time_s = 0.0;
            rec.starts.iter_mut().for_each(|s| s.wall_time_s = 0.0);
        }
        r
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let s = &self.selected;
        let mut out = format!(
            "selected {} {} g={} (BIC {:.3}, loglik {:.3}, {} parameters{})\n",
            s.family,
            s.model,
            s.g,
            s.bic,
            s.loglik,
            s.n_params,
            if s.converged { "" } else { ", not converged" }
        );
        let failed = self.records.iter().filter(|r| r.error.is_some()).count();
        out += &format!("{} cells fitted, {} failed\n", self.records.len(), failed);
        if let Some(e) = &self.evaluation {
            out += &format!("ARI {:.4}", e.ari);
            if let Some(a) = e.ari_unlabelled {
                out += &format!(" (unlabelled rows {a:.4})");
            }
            if let Some(h) = &e.hand_merge {
                out += &format!(", merged by hand {:.4}", h.ari);
            }
            out += &format!(
                ", best entropy merge {:.4} (step {})\n",
                e.entropy_merge.best_ari, e.entropy_merge.best_step
            );
        }
        out
    }
}

fn selected_fit(fit: &MixtureFit, record: usize, scaling: Option<&[ColumnScaling]>) -> SelectedFit {
    let components = fit.params.components.clone();
    SelectedFit {
        record,
        family: fit.family(),
        model: fit.model(),
        g: fit.g(),
        loglik: fit.loglik,
        bic: fit.bic,
        n_params: fit.n_params,
        converged: fit.converged,
        iterations: fit.iterations,
        weights: fit.params.weights.clone(),
        components_original_units: scaling.map(|s| components.iter().map(|c| unscale_params(c, s)).collect()),
        components,
        loglik_trace: fit.loglik_trace.clone(),
        warnings: fit.warnings.clone(),
        responsibilities: fit
            .responsibilities
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
    }
}

/// ARI of the MAP labels against `truth`, plus both merging devices.
pub fn evaluate(fit: &MixtureFit, truth: &Partition, hidden: Option<&[bool]>) -> Result<Evaluation> {
    evaluate_responsibilities(&fit.responsibilities, truth, hidden)
}

/// [`evaluate`] from an `n × g` responsibility matrix alone.
pub fn evaluate_responsibilities(z: &DMatrix<f64>, truth: &Partition, hidden: Option<&[bool]>) -> Result<Evaluation> {
    let g = z.ncols();
    let pred = Partition::new(map_labels(z), g)?;
    let overall = ari(&pred, truth)?;
    let ari_unlabelled = hidden
        .map(|h| {
            if h.len() != truth.len() {
                return Err(Error::Input("hidden-row mask has the wrong length".into()));
            }
            let rows: Vec<usize> = (0..h.len()).filter(|&j| h[j]).collect();
            let sub = |p: &Partition| Partition::new(rows.iter().map(|&j| p.labels()[j]).collect(), p.k());
            ari(&sub(&pred)?, &sub(truth)?)
        })
        .transpose()?;
    let hand_merge = if g <= MAX_HAND_MERGE {
        let (merged, a) = merge_by_hand(&pred, truth)?;
        Some(HandMerge {
            labels: merged.labels().iter().map(|l| l + 1).collect(),
            ari: a,
        })
    } else {
        None
    };
    let tree = merge_entropy_responsibilities(z);
    let (best_step, best_ari) = tree.best_ari(truth)?;
    Ok(Evaluation {
        ari: overall,
        ari_unlabelled,
        hand_merge,
        entropy_merge: EntropyMerge { tree, best_step, best_ari },
    })
}

/// `row,label` with 1-based rows and labels.
pub fn write_labels_csv<W: Write>(mut out: W, labels: &[usize]) -> Result<()> {
    writeln!(out, "row,label")?;
    for (j, l) in labels.iter().enumerate() {
        writeln!(out, "{},{}", j + 1, l)?;
    }
    Ok(())
}

pub fn write_labels_file(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_labels_csv(std::io::BufWriter::new(file), labels)
}

/// Read a label column from a CSV (header required); labels are arbitrary strings.
pub fn read_label_file(path: impl AsRef<Path>, column: Option<&str>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let idx = match column {
        Some(c) => headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| Error::Input(format!("{}: no column '{c}'", path.display())))?,
        None => headers.len().checked_sub(1).ok_or_else(|| Error::Parse { line: 1, message: "empty header".into() })?,
    };
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
        let v = rec.get(idx).ok_or_else(|| Error::Parse {
            line: i + 2,
            message: format!("missing column {}", idx + 1),
        })?;
        labels.push(v.to_string());
    }
    Ok(labels)
}

/// Map string labels to a partition, classes in order of first appearance.
pub fn partition_from_strings(labels: &[String]) -> Partition {
    let mut classes: Vec<&String> = Vec::new();
    let idx = labels
        .iter()
        .map(|l| match classes.iter().position(|c| *c == l) {
            Some(i) => i,
            None => {
                classes.push(l);
                classes.len() - 1
            }
        })
        .collect();
    Partition::from_labels(idx)
}
