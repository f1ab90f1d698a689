//! Constrained estimation of eigen-decomposed scale matrices
//! `Ω_i = λ_i D_i A_i D_i'`.
//!
//! Every solver minimises `Σ_i n_i ln|Ω_i| + tr(W_i Ω_i⁻¹)` over its class,
//! given weighted scatter matrices `W_i` and effective sizes `n_i`.
//! `λ_i` is the volume `|Ω_i|^{1/p}`, `A_i` a diagonal shape with unit
//! determinant and `D_i` an orthogonal orientation.

mod model;
mod solve;

pub use model::{count_scale_params, Constraint, ScaleModel};
pub use solve::{solve_scale, solve_scale_with};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Weighted scatter matrices `W_i` with their effective sizes `n_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSet {
    scatters: Vec<DMatrix<f64>>,
    sizes: Vec<f64>,
    p: usize,
}

impl ScatterSet {
    pub fn new(scatters: Vec<DMatrix<f64>>, sizes: Vec<f64>) -> Result<Self> {
        if scatters.is_empty() {
            return Err(Error::Domain("scatter set is empty".into()));
        }
        if scatters.len() != sizes.len() {
            return Err(Error::Domain(format!(
                "{} scatter matrices but {} sizes",
                scatters.len(),
                sizes.len()
            )));
        }
        let p = scatters[0].nrows();
        let mut scatters = scatters;
        for (i, w) in scatters.iter_mut().enumerate() {
            if w.nrows() != p || w.ncols() != p || p == 0 {
                return Err(Error::Domain(format!("scatter {i} has the wrong shape")));
            }
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::SingularScatter { component: i });
            }
            if !linalg::is_symmetric(w, linalg::SYMMETRY_TOL) {
                return Err(Error::Domain(format!("scatter {i} is not symmetric")));
            }
            linalg::symmetrize(w);
            let min_eig = w.clone().symmetric_eigenvalues().min();
            if min_eig < -linalg::SYMMETRY_TOL * w.amax().max(1.0) {
                return Err(Error::Domain(format!(
                    "scatter {i} is not positive semi-definite (eigenvalue {min_eig:e})"
                )));
            }
        }
        if let Some(i) = sizes.iter().position(|n| !(n.is_finite() && *n > 0.0)) {
            return Err(Error::Domain(format!("component {i} has non-positive size")));
        }
        Ok(Self { scatters, sizes, p })
    }

    pub fn scatters(&self) -> &[DMatrix<f64>] {
        &self.scatters
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn n_components(&self) -> usize {
        self.scatters.len()
    }

    pub fn total_size(&self) -> f64 {
        self.sizes.iter().sum()
    }

    /// `W = Σ W_i`.
    pub fn pooled(&self) -> DMatrix<f64> {
        self.scatters
            .iter()
            .fold(DMatrix::zeros(self.p, self.p), |acc, w| acc + w)
    }

    /// The M-step objective `Σ_i n_i ln|Ω_i| + tr(W_i Ω_i⁻¹)` at the given scales.
    pub fn objective(&self, scales: &[DMatrix<f64>]) -> Result<f64> {
        if scales.len() != self.scatters.len() {
            return Err(Error::Domain("scale count does not match scatter count".into()));
        }
        let mut total = 0.0;
        for ((w, n), omega) in self.scatters.iter().zip(&self.sizes).zip(scales) {
            let l = linalg::cholesky_lower(omega, "scale matrix")?;
            let ln_det = linalg::ln_det_from_cholesky(&l);
            let mut x = w.clone();
            l.solve_lower_triangular_mut(&mut x);
            let x = x.transpose();
            let mut y = x;
            l.solve_lower_triangular_mut(&mut y);
            total += n * ln_det + y.trace();
        }
        Ok(total)
    }
}

/// Controls for the iterative solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleOptions {
    /// Relative objective change that ends flip-flop and MM iterations.
    pub tol: f64,
    pub max_flip_flop: usize,
    pub max_mm: usize,
    /// Return the last iterate instead of an error when an iterative solver
    /// hits its iteration cap.
    pub allow_unconverged: bool,
    /// Scatters above this condition number get a small ridge; `None` turns
    /// near-singular scatters into errors instead.
    pub ridge_condition: Option<f64>,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_flip_flop: 200,
            max_mm: 500,
            allow_unconverged: false,
            ridge_condition: Some(1e12),
        }
    }
}

/// Output of a constrained scale solve.
///
/// Shared factors are stored once per component but are exact copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSolution {
    pub model: ScaleModel,
    pub volumes: Vec<f64>,
    /// Diagonal of `A_i`, unit product.
    pub shapes: Vec<DVector<f64>>,
    pub orientations: Vec<DMatrix<f64>>,
    pub scales: Vec<DMatrix<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last relative objective change of the iterative solver (0 for closed forms).
    pub gap: f64,
    /// Components whose scatter received a ridge.
    pub regularized: Vec<usize>,
}

impl ScaleSolution {
    pub fn n_components(&self) -> usize {
        self.scales.len()
    }
}
