//! Fits over a (family × model × g) grid with BIC selection across cells.
//!
//! Cells are independent: each owns its fit state and only reads the shared
//! data, so they may run on a rayon pool. Results are collected in grid order
//! regardless of execution, which keeps reports reproducible.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::em::{self, Family, FitConfig, MixtureFit, StartRecord};
use crate::error::{Error, Result};
use crate::scale::ScaleModel;
use crate::select::{bic, select_best_by, SelectionKey};

/// Environment variable holding the default worker count for parallel grids.
pub const THREADS_ENV: &str = "SKEWCLUST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Named model sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPreset {
    /// All fourteen scale models.
    All,
    /// The ten models also found in mclust.
    Mclust,
    List(Vec<ScaleModel>),
}

impl ModelPreset {
    pub fn models(&self) -> Vec<ScaleModel> {
        match self {
            ModelPreset::All => ScaleModel::ALL.to_vec(),
            ModelPreset::Mclust => ScaleModel::MCLUST.to_vec(),
            ModelPreset::List(m) => m.clone(),
        }
    }

    /// `all`, `mclust`, or a comma-separated list of model names.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "all-14" => Ok(ModelPreset::All),
            "mclust" | "mclust-10" => Ok(ModelPreset::Mclust),
            _ => s
                .split(',')
                .map(|m| m.parse())
                .collect::<Result<Vec<ScaleModel>>>()
                .map(ModelPreset::List),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub families: Vec<Family>,
    pub models: Vec<ScaleModel>,
    pub g_min: usize,
    pub g_max: usize,
    /// When the selected g equals `g_max`, also fit `g_max + 1 ..= extend_to`
    /// and select again.
    pub extend_to: Option<usize>,
    pub config: FitConfig,
    #[serde(skip)]
    pub execution: Execution,
    /// Worker count for parallel execution; falls back to [`THREADS_ENV`],
    /// then to rayon's default.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            families: vec![Family::SkewT],
            models: ScaleModel::MCLUST.to_vec(),
            g_min: 1,
            g_max: 9,
            extend_to: Some(12),
            config: FitConfig::default(),
            execution: Execution::default(),
            threads: None,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.models.is_empty() {
            return Err(Error::Input("grid needs at least one family and one model".into()));
        }
        if self.g_min == 0 || self.g_max < self.g_min {
            return Err(Error::Input(format!("invalid g range {}..{}", self.g_min, self.g_max)));
        }
        if self.threads == Some(0) {
            return Err(Error::Input("thread count must be at least 1".into()));
        }
        self.config.validate()
    }

    fn cells(&self, g_lo: usize, g_hi: usize) -> Vec<(Family, ScaleModel, usize)> {
        let mut cells = Vec::new();
        for &family in &self.families {
            for &model in &self.models {
                for g in g_lo..=g_hi {
                    cells.push((family, model, g));
                }
            }
        }
        cells
    }
}

/// Outcome of one grid cell; `loglik` and `bic` are absent when every start failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub family: Family,
    pub model: ScaleModel,
    pub g: usize,
    pub loglik: Option<f64>,
    pub bic: Option<f64>,
    pub n_params: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub starts: Vec<StartRecord>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl CellRecord {
    fn key(&self) -> Option<SelectionKey> {
        Some(SelectionKey {
            bic: self.bic?,
            n_params: self.n_params,
            g: self.g,
            model: self.model,
            family: self.family,
        })
    }

    pub fn label(&self) -> String {
        format!("{} {} g={}", self.family, self.model, self.g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    /// One record per cell, in (family, model, g) order.
    pub records: Vec<CellRecord>,
    /// Index of the selected cell in `records`.
    pub selected: usize,
    pub fit: MixtureFit,
    /// Whether the g range was extended because the top of the range won.
    pub extended: bool,
}

/// Cluster `data` over the grid and select the largest-BIC fit.
pub fn run_grid(data: &DMatrix<f64>, spec: &GridSpec) -> Result<GridOutcome> {
    run(data, spec, None)
}

/// Semi-supervised classification over the grid's families and models with
/// `g = g_max`; the g range and extension rule do not apply.
pub fn run_classification_grid(data: &DMatrix<f64>, known: &[Option<usize>], spec: &GridSpec) -> Result<GridOutcome> {
    run(data, spec, Some(known))
}

fn run(data: &DMatrix<f64>, spec: &GridSpec, known: Option<&[Option<usize>]>) -> Result<GridOutcome> {
    spec.validate()?;
    let (g_lo, g_hi) = if known.is_some() { (spec.g_max, spec.g_max) } else { (spec.g_min, spec.g_max) };
    let mut results = execute(data, spec, known, &spec.cells(g_lo, g_hi))?;
    let mut selected = select(&results)?;
    let mut extended = false;
    if let Some(top) = spec.extend_to.filter(|&t| known.is_none() && t > g_hi) {
        if results[selected].0.g == g_hi {
            results.extend(execute(data, spec, known, &spec.cells(g_hi + 1, top))?);
            // keep (family, model, g) order
            results.sort_by_key(|(r, _)| {
                (
                    spec.families.iter().position(|&f| f == r.family),
                    spec.models.iter().position(|&m| m == r.model),
                    r.g,
                )
            });
            selected = select(&results)?;
            extended = true;
        }
    }
    let (records, fits): (Vec<CellRecord>, Vec<Option<MixtureFit>>) = results.into_iter().unzip();
    let fit = fits.into_iter().nth(selected).flatten().expect("selected cell has a fit");
    Ok(GridOutcome {
        records,
        selected,
        fit,
        extended,
    })
}

fn select(results: &[(CellRecord, Option<MixtureFit>)]) -> Result<usize> {
    let ok: Vec<usize> = (0..results.len()).filter(|&i| results[i].1.is_some()).collect();
    if ok.is_empty() {
        return Err(Error::AllCellsFailed(
            results
                .iter()
                .map(|(r, _)| format!("{}: {}", r.label(), r.error.as_deref().unwrap_or("failed")))
                .collect(),
        ));
    }
    let best = select_best_by(&ok, |&i| results[i].0.key().expect("completed cell has a BIC"))?;
    Ok(ok[best])
}

fn execute(
    data: &DMatrix<f64>,
    spec: &GridSpec,
    known: Option<&[Option<usize>]>,
    cells: &[(Family, ScaleModel, usize)],
) -> Result<Vec<(CellRecord, Option<MixtureFit>)>> {
    let one = |&(family, model, g): &(Family, ScaleModel, usize)| run_cell(data, spec, known, family, model, g);
    match spec.execution {
        Execution::Sequential => Ok(cells.iter().map(one).collect()),
        Execution::Parallel => parallel_map(cells, one, spec.threads),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send, threads: Option<usize>) -> Result<Vec<R>> {
    use rayon::prelude::*;
    let threads = match threads {
        Some(t) => Some(t),
        None => threads_from_env()?,
    };
    match threads {
        None => Ok(items.par_iter().map(f).collect()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Input(format!("cannot start {t} worker threads: {e}")))?;
            Ok(pool.install(|| items.par_iter().map(f).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send, threads: Option<usize>) -> Result<Vec<R>> {
    let _ = threads;
    Ok(items.iter().map(f).collect())
}

/// Worker count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Error::Input(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}

fn run_cell(
    data: &DMatrix<f64>,
    spec: &GridSpec,
    known: Option<&[Option<usize>]>,
    family: Family,
    model: ScaleModel,
    g: usize,
) -> (CellRecord, Option<MixtureFit>) {
    let clock = Instant::now();
    let result = match known {
        None => em::fit(data, g, model, family, &spec.config),
        Some(k) => em::classify(data, k, g, model, family, &spec.config),
    };
    let wall_time_s = clock.elapsed().as_secs_f64();
    let (n, p) = data.shape();
    match result {
        Ok(fit) => {
            let record = CellRecord {
                family,
                model,
                g,
                loglik: Some(fit.loglik),
                bic: Some(fit.bic),
                n_params: fit.n_params,
                n_obs: fit.n_obs,
                converged: fit.converged,
                iterations: fit.iterations,
                wall_time_s,
                starts: fit.starts.clone(),
                warnings: fit.warnings.clone(),
                error: None,
            };
            debug_assert_eq!(record.bic, Some(bic(fit.loglik, fit.n_params, fit.n_obs)));
            (record, Some(fit))
        }
        Err(e) => (
            CellRecord {
                family,
                model,
                g,
                loglik: None,
                bic: None,
                n_params: em::count_params(family, model, g, p, spec.config.constrain_dof_equal),
                n_obs: n,
                converged: false,
                iterations: 0,
                wall_time_s,
                starts: Vec::new(),
                warnings: Vec::new(),
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}
