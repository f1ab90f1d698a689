//! EM estimation of parsimonious skew mixtures for clustering and
//! semi-supervised classification.
//!
//! Each iteration is an ECM cycle on the expected complete-data
//! log-likelihood: weights, then location and skewness jointly (a weighted
//! regression of `y` on `(1, |U|)`), then the constrained scale, then ν.
//! Every conditional step maximises the same expected log-likelihood, so the
//! observed log-likelihood never decreases.

mod estep;
mod fit;
mod init;
mod mstep;

pub use estep::{e_step, EStep};
pub use fit::{classify, fit, stratified_known_labels};
pub use init::{initialize, kmeans, map_labels};
pub use mstep::{m_step, MStep};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distributions::{ComponentParams, DOF_MAX, DOF_MIN};
use crate::error::{Error, Result};
use crate::scale::{ScaleModel, ScaleOptions, ScaleSolution};

/// Component family. Gaussian and t are the zero-skewness special cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    Gaussian,
    T,
    SkewNormal,
    SkewT,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Gaussian, Family::T, Family::SkewNormal, Family::SkewT];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::T => "t",
            Family::SkewNormal => "skew-normal",
            Family::SkewT => "skew-t",
        }
    }

    pub fn is_skewed(self) -> bool {
        matches!(self, Family::SkewNormal | Family::SkewT)
    }

    pub fn has_dof(self) -> bool {
        matches!(self, Family::T | Family::SkewT)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "t" | "student-t" => Ok(Family::T),
            "skew-normal" | "skewnormal" | "sn" => Ok(Family::SkewNormal),
            "skew-t" | "skewt" | "st" => Ok(Family::SkewT),
            _ => Err(Error::Input(format!("unknown family '{s}'"))),
        }
    }
}

impl TryFrom<String> for Family {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Hard labels from the best of ten k-means++ / Lloyd runs.
    #[serde(rename = "kmeans")]
    KMeans,
    /// Rows drawn from a flat Dirichlet.
    RandomPosterior,
    /// Every entry `1/g`.
    Uniform,
    /// One-hot from the given 0-based labels.
    GivenLabels(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Aitken stopping tolerance on the log-likelihood.
    pub tol: f64,
    pub n_starts: usize,
    pub init: InitStrategy,
    pub seed: u64,
    pub dof_bounds: (f64, f64),
    pub constrain_dof_equal: bool,
    pub dof_init: f64,
    #[serde(skip, default = "em_scale_options")]
    pub scale: ScaleOptions,
}

fn em_scale_options() -> ScaleOptions {
    ScaleOptions {
        allow_unconverged: true,
        ..ScaleOptions::default()
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-5,
            n_starts: 10,
            init: InitStrategy::KMeans,
            seed: 1,
            dof_bounds: (DOF_MIN, DOF_MAX),
            constrain_dof_equal: false,
            dof_init: 50.0,
            scale: em_scale_options(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Input(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Input("max_iter must be at least 1".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Input("n_starts must be at least 1".into()));
        }
        let (lo, hi) = self.dof_bounds;
        if !(lo >= DOF_MIN && hi > lo && hi.is_finite()) {
            return Err(Error::Input(format!(
                "degrees-of-freedom bounds ({lo}, {hi}) must satisfy {DOF_MIN} <= lo < hi"
            )));
        }
        if !(self.dof_init >= lo && self.dof_init <= hi) {
            return Err(Error::Input(format!(
                "initial degrees of freedom {} outside bounds",
                self.dof_init
            )));
        }
        Ok(())
    }
}

/// Mixture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub family: Family,
    pub model: ScaleModel,
    pub weights: Vec<f64>,
    pub components: Vec<ComponentParams>,
    pub scale: ScaleSolution,
}

impl Mixture {
    pub fn g(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, ComponentParams::dim)
    }
}

/// Outcome of one EM start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start: usize,
    pub loglik: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Earlier start with an identical initial partition, if any; such starts are not rerun.
    pub duplicate_of: Option<usize>,
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub params: Mixture,
    /// `n × g` posterior membership probabilities.
    pub responsibilities: DMatrix<f64>,
    /// Final (classification, for [`classify`]) log-likelihood.
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub bic: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub starts: Vec<StartRecord>,
}

impl MixtureFit {
    pub fn g(&self) -> usize {
        self.params.g()
    }

    pub fn family(&self) -> Family {
        self.params.family
    }

    pub fn model(&self) -> ScaleModel {
        self.params.model
    }

    pub fn labels(&self) -> Vec<usize> {
        map_labels(&self.responsibilities)
    }

    /// Largest single-step decrease of the log-likelihood trace (0 if monotone).
    pub fn max_trace_decrease(&self) -> f64 {
        self.loglik_trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Free parameters of a `g`-component mixture in `p` dimensions.
pub fn count_params(family: Family, model: ScaleModel, g: usize, p: usize, constrain_dof_equal: bool) -> usize {
    let mut m = (g - 1) + g * p + model.n_params(g, p);
    if family.is_skewed() {
        m += g * p;
    }
    if family.has_dof() {
        m += if constrain_dof_equal { 1 } else { g };
    }
    m
}

/// Row-major copy of the data so each observation is a contiguous slice.
#[derive(Debug, Clone)]
pub(crate) struct Rows {
    values: Vec<f64>,
    n: usize,
    p: usize,
}

impl Rows {
    pub(crate) fn new(data: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = data.shape();
        if n == 0 || p == 0 {
            return Err(Error::Input("data matrix is empty".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value at row {}, column {}",
                pos % n + 1,
                pos / n + 1
            )));
        }
        let values = data.transpose().as_slice().to_vec();
        Ok(Self { values, n, p })
    }

    #[inline]
    pub(crate) fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.p..(j + 1) * self.p]
    }
}
