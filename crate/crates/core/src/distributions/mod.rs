//! Multivariate normal, t, skew-normal and skew-t distributions.
//!
//! The skew families use the restricted (single latent) representation
//!
//! ```text
//! Y = ξ + λ|U| + X,   X | w ~ N(0, Ω/w),   U | w ~ N(0, 1/w),   W ~ Γ(ν/2, ν/2)
//! ```
//!
//! with `W ≡ 1` for the skew-normal. Marginalising the half-normal latent gives
//! a density with inflated scale `Σ = Ω + λλ'` times a univariate CDF factor.
//! Everything is computed in log space from a Cholesky factor of `Ω`.

mod latent;
mod sample;

pub use latent::LatentMoments;
pub use sample::{sample_into, sample_skewt};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::special::{self, LN_2, LN_2PI};

/// Smallest degrees of freedom accepted by the skew-t density.
pub const DOF_MIN: f64 = 2.01;
/// Upper end of the default estimation range for ν.
pub const DOF_MAX: f64 = 200.0;

/// Parameters of one skew-t / skew-normal component.
///
/// `dof == None` selects the skew-normal family; a zero `skew` vector reduces
/// to the multivariate t or normal. Serialized with plain arrays, `scale` as
/// a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ParamsRepr", try_from = "ParamsRepr")]
pub struct ComponentParams {
    pub location: DVector<f64>,
    pub scale: DMatrix<f64>,
    pub skew: DVector<f64>,
    pub dof: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    location: Vec<f64>,
    scale: Vec<Vec<f64>>,
    skew: Vec<f64>,
    dof: Option<f64>,
}

impl From<ComponentParams> for ParamsRepr {
    fn from(c: ComponentParams) -> Self {
        Self {
            location: c.location.iter().copied().collect(),
            scale: c.scale.row_iter().map(|r| r.iter().copied().collect()).collect(),
            skew: c.skew.iter().copied().collect(),
            dof: c.dof,
        }
    }
}

impl TryFrom<ParamsRepr> for ComponentParams {
    type Error = String;

    fn try_from(r: ParamsRepr) -> std::result::Result<Self, String> {
        let p = r.location.len();
        if r.skew.len() != p || r.scale.len() != p || r.scale.iter().any(|row| row.len() != p) {
            return Err(format!("location, skew and scale rows must all have length {p}"));
        }
        Ok(Self {
            location: DVector::from_vec(r.location),
            scale: DMatrix::from_fn(p, p, |i, j| r.scale[i][j]),
            skew: DVector::from_vec(r.skew),
            dof: r.dof,
        })
    }
}

impl ComponentParams {
    pub fn new(
        location: DVector<f64>,
        scale: DMatrix<f64>,
        skew: DVector<f64>,
        dof: Option<f64>,
    ) -> Result<Self> {
        let params = Self {
            location,
            scale,
            skew,
            dof,
        };
        params.validate()?;
        Ok(params)
    }

    /// A Gaussian component (zero skewness, no degrees of freedom).
    pub fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        Self::new(mean, cov, DVector::zeros(p), None)
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.location.len();
        if p == 0 {
            return Err(Error::Domain("location vector is empty".into()));
        }
        if self.scale.nrows() != p || self.scale.ncols() != p || self.skew.len() != p {
            return Err(Error::Domain(format!(
                "dimension mismatch: location {p}, scale {}x{}, skew {}",
                self.scale.nrows(),
                self.scale.ncols(),
                self.skew.len()
            )));
        }
        if !self.location.iter().chain(self.skew.iter()).all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite location or skewness".into()));
        }
        if !linalg::is_symmetric(&self.scale, linalg::SYMMETRY_TOL) {
            return Err(Error::Domain("scale matrix is not symmetric".into()));
        }
        linalg::cholesky_lower(&self.scale, "scale matrix")?;
        if let Some(dof) = self.dof {
            if !(dof.is_finite() && dof >= DOF_MIN) {
                return Err(Error::Domain(format!(
                    "degrees of freedom {dof} below minimum {DOF_MIN}"
                )));
            }
        }
        Ok(())
    }

    /// Analytic mean `ξ + λ E|U|`, where `E|U| = √(2/π)` for the skew-normal and
    /// `√(ν/π) Γ((ν-1)/2)/Γ(ν/2)` for the skew-t (finite for ν > 1).
    pub fn mean(&self) -> DVector<f64> {
        let abs_u = match self.dof {
            None => (2.0 / std::f64::consts::PI).sqrt(),
            Some(nu) => {
                (nu / std::f64::consts::PI).sqrt()
                    * (special::ln_gamma(0.5 * (nu - 1.0)) - special::ln_gamma(0.5 * nu)).exp()
            }
        };
        &self.location + &self.skew * abs_u
    }
}

/// Quantities of a component that do not depend on the observation.
///
/// Built once per component per EM iteration; evaluating an observation is then
/// `O(p²)` with no allocation.
#[derive(Debug, Clone)]
pub struct PreparedComponent {
    location: DVector<f64>,
    /// Inverse of the lower Cholesky factor of Ω.
    l_inv: DMatrix<f64>,
    /// `L⁻¹ λ`.
    skew_white: DVector<f64>,
    /// `λ'Ω⁻¹λ`.
    skew_norm2: f64,
    /// `ln |Σ|` with `Σ = Ω + λλ'`.
    ln_det_sigma: f64,
    dof_terms: Option<DofTerms>,
}

/// Gamma-function terms of the skew-t that depend only on ν and p.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DofTerms {
    pub nu: f64,
    /// `α = (ν+p)/2`
    pub alpha: f64,
    pub ln_gamma_alpha: f64,
    pub ln_gamma_alpha_half: f64,
    /// `ln B(a, 1/2)` at `a = α, α + 1, α - h, α + h` for the t CDFs of the latent moments.
    pub ln_beta: [f64; 4],
    pub digamma_alpha: f64,
    /// Multivariate-t log density without the Mahalanobis term.
    kernel_const: f64,
}

/// An evaluated observation, kept so latent moments can be computed later.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointEval {
    pub s: Standardized,
    /// `ln T_{ν+p}(a √((ν+p)/(ν+d)))`; unused for the skew-normal.
    pub ln_t0: f64,
}

/// Observation-level statistics shared by the density and the latent moments.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Standardized {
    /// Squared Mahalanobis distance under Σ.
    pub maha: f64,
    /// Conditional mean of `|U|` given `y` (before truncation), `λ'Σ⁻¹(y-ξ)`.
    pub cond_mean: f64,
    /// Conditional variance `1 - λ'Σ⁻¹λ`.
    pub cond_var: f64,
}

impl PreparedComponent {
    pub fn new(params: &ComponentParams) -> Result<Self> {
        let p = params.dim();
        if params.scale.nrows() != p || params.skew.len() != p {
            return Err(Error::Domain("component dimension mismatch".into()));
        }
        let l = linalg::cholesky_lower(&params.scale, "scale matrix")?;
        let l_inv = linalg::lower_inverse(&l);
        let skew_white = &l_inv * &params.skew;
        let skew_norm2 = skew_white.norm_squared();
        let ln_det_sigma = linalg::ln_det_from_cholesky(&l) + skew_norm2.ln_1p();
        let pf = p as f64;
        let dof_terms = params.dof.map(|nu| {
            let alpha = 0.5 * (nu + pf);
            let ln_gamma_alpha = special::ln_gamma(alpha);
            let h = latent::LOG_W_STEP;
            DofTerms {
                nu,
                alpha,
                ln_beta: [alpha, alpha + 1.0, alpha - h, alpha + h].map(special::ln_beta_half),
                ln_gamma_alpha,
                ln_gamma_alpha_half: special::ln_gamma(alpha + 0.5),
                digamma_alpha: special::digamma(alpha),
                kernel_const: ln_gamma_alpha
                    - special::ln_gamma(0.5 * nu)
                    - 0.5 * pf * (nu * std::f64::consts::PI).ln()
                    - 0.5 * ln_det_sigma,
            }
        });
        Ok(Self {
            location: params.location.clone(),
            l_inv,
            skew_white,
            skew_norm2,
            ln_det_sigma,
            dof_terms,
        })
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub(crate) fn standardize(&self, y: &[f64]) -> Standardized {
        let p = self.location.len();
        let mut white2 = 0.0;
        let mut cross = 0.0;
        for k in 0..p {
            let mut z = 0.0;
            for l in 0..=k {
                z += self.l_inv[(k, l)] * (y[l] - self.location[l]);
            }
            white2 += z * z;
            cross += self.skew_white[k] * z;
        }
        let inflate = 1.0 + self.skew_norm2;
        Standardized {
            maha: (white2 - cross * cross / inflate).max(0.0),
            cond_mean: cross / inflate,
            cond_var: 1.0 / inflate,
        }
    }

    /// Log density at `y` (slice of length p).
    pub fn ln_density(&self, y: &[f64]) -> f64 {
        let s = self.standardize(y);
        self.ln_density_from(&s)
    }

    pub(crate) fn ln_density_from(&self, s: &Standardized) -> f64 {
        self.density_point(s).0
    }

    /// Log density at a standardized observation, with the state needed by
    /// [`latent_at`](Self::latent_at).
    pub(crate) fn density_point(&self, s: &Standardized) -> (f64, PointEval) {
        let p = self.dim() as f64;
        match &self.dof_terms {
            None => {
                let a = s.cond_mean / s.cond_var.sqrt();
                let ln_f = LN_2 - 0.5 * (p * LN_2PI + self.ln_det_sigma + s.maha) + special::ln_norm_cdf(a);
                (ln_f, PointEval { s: *s, ln_t0: 0.0 })
            }
            Some(t) => {
                // zero skewness gives a = 0 and T(0) = 1/2 exactly
                let ln_t0 = if s.cond_mean == 0.0 {
                    -LN_2
                } else {
                    let a2 = s.cond_mean * s.cond_mean / s.cond_var;
                    let x = (t.nu + s.maha) / (t.nu + s.maha + a2);
                    special::ln_t_cdf_beta(s.cond_mean > 0.0, x, t.alpha, t.ln_beta[0])
                };
                let ln_f = LN_2 + t.kernel_const - t.alpha * (s.maha / t.nu).ln_1p() + ln_t0;
                (ln_f, PointEval { s: *s, ln_t0 })
            }
        }
    }

    pub(crate) fn latent_at(&self, pt: &PointEval) -> LatentMoments {
        match &self.dof_terms {
            None => latent::skew_normal(&pt.s),
            Some(t) => latent::skew_t(&pt.s, t, pt.ln_t0),
        }
    }

    pub(crate) fn evaluate_point(&self, y: &[f64]) -> (f64, PointEval) {
        self.density_point(&self.standardize(y))
    }

    /// Log density and E-step latent moments at `y`.
    pub fn evaluate(&self, y: &[f64]) -> (f64, LatentMoments) {
        let (ln_f, pt) = self.evaluate_point(y);
        (ln_f, self.latent_at(&pt))
    }
}

/// Log multivariate-t density given `ln|Σ|` and the squared Mahalanobis distance.
fn ln_mvt_kernel(p: f64, nu: f64, ln_det: f64, maha: f64) -> f64 {
    special::ln_gamma(0.5 * (nu + p)) - special::ln_gamma(0.5 * nu)
        - 0.5 * p * (nu * std::f64::consts::PI).ln()
        - 0.5 * ln_det
        - 0.5 * (nu + p) * (maha / nu).ln_1p()
}

fn check_dims(y: &DVector<f64>, p: usize) -> Result<()> {
    if y.len() != p {
        return Err(Error::Domain(format!(
            "observation has length {}, expected {p}",
            y.len()
        )));
    }
    Ok(())
}

/// `ln φ_p(y | μ, Σ)`.
pub fn ln_density_mvnorm(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let p = mean.len();
    check_dims(y, p)?;
    if cov.nrows() != p || cov.ncols() != p {
        return Err(Error::Domain("covariance dimension mismatch".into()));
    }
    let l = linalg::cholesky_lower(cov, "covariance matrix")?;
    let mut z = y - mean;
    l.solve_lower_triangular_mut(&mut z);
    Ok(-0.5 * (p as f64 * LN_2PI + linalg::ln_det_from_cholesky(&l) + z.norm_squared()))
}

/// Log density of a multivariate t with location `mean`, scale `scale`, `dof` degrees of freedom.
pub fn ln_density_mvt(
    y: &DVector<f64>,
    mean: &DVector<f64>,
    scale: &DMatrix<f64>,
    dof: f64,
) -> Result<f64> {
    let p = mean.len();
    check_dims(y, p)?;
    if !(dof > 0.0) {
        return Err(Error::Domain(format!("degrees of freedom {dof} must be positive")));
    }
    let l = linalg::cholesky_lower(scale, "scale matrix")?;
    let mut z = y - mean;
    l.solve_lower_triangular_mut(&mut z);
    Ok(ln_mvt_kernel(
        p as f64,
        dof,
        linalg::ln_det_from_cholesky(&l),
        z.norm_squared(),
    ))
}

/// Log density of the restricted multivariate skew-normal.
pub fn ln_density_skewnormal(y: &DVector<f64>, params: &ComponentParams) -> Result<f64> {
    if params.dof.is_some() {
        return Err(Error::Misuse(
            "skew-normal density called with degrees of freedom set".into(),
        ));
    }
    check_dims(y, params.dim())?;
    Ok(PreparedComponent::new(params)?.ln_density(y.as_slice()))
}

/// Log density of the restricted multivariate skew-t.
pub fn ln_density_skewt(y: &DVector<f64>, params: &ComponentParams) -> Result<f64> {
    match params.dof {
        None => Err(Error::Domain("skew-t density requires degrees of freedom".into())),
        Some(nu) if !(nu >= DOF_MIN) => Err(Error::Domain(format!(
            "degrees of freedom {nu} below minimum {DOF_MIN}"
        ))),
        Some(_) => {
            check_dims(y, params.dim())?;
            Ok(PreparedComponent::new(params)?.ln_density(y.as_slice()))
        }
    }
}

/// Log density of either skew family, dispatching on `params.dof`.
pub fn ln_density(y: &DVector<f64>, params: &ComponentParams) -> Result<f64> {
    match params.dof {
        None => ln_density_skewnormal(y, params),
        Some(_) => ln_density_skewt(y, params),
    }
}

/// E-step conditional moments of the latent variables given `y`.
pub fn latent_moments(y: &DVector<f64>, params: &ComponentParams) -> Result<LatentMoments> {
    params.validate()?;
    check_dims(y, params.dim())?;
    Ok(PreparedComponent::new(params)?.evaluate(y.as_slice()).1)
}
