//! Conditional moments of the latent `(|U|, W)` given an observation.
//!
//! Given `y`, write `m = λ'Σ⁻¹(y-ξ)`, `v = 1 - λ'Σ⁻¹λ`, `d` the squared
//! Mahalanobis distance under `Σ = Ω + λλ'` and `a = m/√v`. Then
//!
//! * `|U| | y, w` is `N(m, v/w)` truncated to `[0, ∞)`;
//! * `W | y` has density proportional to `w^{α-1} e^{-βw} Φ(a√w)` with
//!   `α = (ν+p)/2`, `β = (ν+d)/2`, whose normaliser is
//!   `K(α) = Γ(α) β^{-α} T_{2α}(a √(α/β))`.
//!
//! Every moment follows from ratios of `K`: `E[W] = K(α+1)/K(α)`,
//! `E[log W] = ∂ ln K/∂α`, and the truncated-normal mean gives `E[W|U|]`.

use serde::{Deserialize, Serialize};

use super::{DofTerms, Standardized};
use crate::special;

/// Per-observation, per-component conditional expectations used by the M-step.
///
/// For the skew-normal family `e_w ≡ 1` and `e_logw ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentMoments {
    /// `E[W | y]`
    pub e_w: f64,
    /// `E[W |U| | y]`
    pub e_wu: f64,
    /// `E[W U² | y]`
    pub e_wu2: f64,
    /// `E[log W | y]`
    pub e_logw: f64,
}

impl LatentMoments {
    pub const GAUSSIAN: LatentMoments = LatentMoments {
        e_w: 1.0,
        e_wu: 0.0,
        e_wu2: 0.0,
        e_logw: 0.0,
    };
}

/// Step used for the central difference of `ln T_{2α}(a√(α/β))` in α.
pub(crate) const LOG_W_STEP: f64 = 5e-4;

pub(crate) fn skew_normal(s: &Standardized) -> LatentMoments {
    let m = s.cond_mean;
    let v = s.cond_var;
    let sd = v.sqrt();
    let a = m / sd;
    let e_u = sd * (a + special::norm_pdf_over_cdf(a));
    clamp(LatentMoments {
        e_w: 1.0,
        e_wu: e_u,
        e_wu2: m * e_u + v,
        e_logw: 0.0,
    })
}

/// Skew-t moments given `ln_t0 = ln T_{ν+p}(a √((ν+p)/(ν+d)))`, which the
/// density shares.
pub(crate) fn skew_t(s: &Standardized, t: &DofTerms, ln_t0: f64) -> LatentMoments {
    let m = s.cond_mean;
    let v = s.cond_var;
    let alpha = t.alpha;
    let beta = 0.5 * (t.nu + s.maha);
    let ln_beta = beta.ln();
    if m == 0.0 {
        // no skewness: W | y ~ Gamma(α, β) and |U| is a half-normal independent of y
        let e_w = alpha / beta;
        let e_wu = (v * 2.0 / std::f64::consts::PI).sqrt() * (t.ln_gamma_alpha_half - t.ln_gamma_alpha - 0.5 * ln_beta).exp();
        return clamp(LatentMoments {
            e_w,
            e_wu,
            e_wu2: v,
            e_logw: t.digamma_alpha - ln_beta,
        });
    }
    let sd = v.sqrt();
    let a = m / sd;
    // every t CDF below is I_x(·, 1/2) at the same x = β / (β + a²/2)
    let x = beta / (beta + 0.5 * a * a);
    let positive = a > 0.0;
    let ln_tcdf = |k: usize, al: f64| special::ln_t_cdf_beta(positive, x, al, t.ln_beta[k]);
    let ln_k0 = t.ln_gamma_alpha - alpha * ln_beta + ln_t0;

    // I_x(α+1, 1/2) = I_x(α, 1/2) - r, so T(α+1) = T(α) ± r/2
    let ln_r = alpha * x.ln() + 0.5 * (-x).ln_1p() - alpha.ln() - t.ln_beta[0];
    let half_r_over_t = 0.5 * (ln_r - ln_t0).exp();
    let ratio = if positive {
        1.0 + half_r_over_t
    } else if half_r_over_t < 1.0 - 1e-4 {
        1.0 - half_r_over_t
    } else {
        (ln_tcdf(1, alpha + 1.0) - ln_t0).exp()
    };
    let e_w = alpha / beta * ratio;
    // E[√W φ(a√W)/Φ(a√W)]
    let e_sqrt_ratio = (t.ln_gamma_alpha_half - (alpha + 0.5) * (beta + 0.5 * a * a).ln() - 0.5 * special::LN_2PI - ln_k0).exp();
    let e_wu = m * e_w + sd * e_sqrt_ratio;
    let h = LOG_W_STEP;
    let d_ln_t = (ln_tcdf(3, alpha + h) - ln_tcdf(2, alpha - h)) / (2.0 * h);
    clamp(LatentMoments {
        e_w,
        e_wu,
        e_wu2: m * e_wu + v,
        e_logw: t.digamma_alpha - ln_beta + d_ln_t,
    })
}

/// |U| ≥ 0 and Cauchy–Schwarz; only rounding can break these.
fn clamp(mut out: LatentMoments) -> LatentMoments {
    out.e_wu = out.e_wu.max(0.0);
    let floor = out.e_wu * out.e_wu / out.e_w;
    if out.e_wu2 < floor {
        out.e_wu2 = floor;
    }
    out
}
