use nalgebra::{DMatrix, DVector};

use super::{Family, FitConfig, Mixture, Rows};
use crate::distributions::{ComponentParams, LatentMoments};
use crate::error::{Error, Result};
use crate::scale::{solve_scale_with, ScaleModel, ScaleSolution, ScatterSet};
use crate::special::digamma;

/// Initial skewness magnitude, applied with the sign of each coordinate's third moment.
const INIT_SKEW: f64 = 0.1;

pub struct MStep {
    pub mixture: Mixture,
    pub warnings: Vec<String>,
}

/// One ECM parameter update from responsibilities and latent moments
/// (row-major `n × g`, as produced by [`e_step`](super::e_step)).
///
/// `warm` is the current scale solution; passing it guarantees the scale
/// objective does not increase relative to the current iterate.
pub fn m_step(
    data: &DMatrix<f64>,
    responsibilities: &DMatrix<f64>,
    latents: &[LatentMoments],
    family: Family,
    model: ScaleModel,
    config: &FitConfig,
    warm: Option<&ScaleSolution>,
) -> Result<MStep> {
    let rows = Rows::new(data)?;
    if responsibilities.nrows() != rows.n || latents.len() != rows.n * responsibilities.ncols() {
        return Err(Error::Domain("responsibilities or latents do not match the data".into()));
    }
    m_step_rows(&rows, responsibilities, latents, family, model, config, warm)
}

pub(crate) fn check_sizes(z: &DMatrix<f64>, p: usize) -> Result<Vec<f64>> {
    let sizes: Vec<f64> = z.column_iter().map(|c| c.sum()).collect();
    let min = (p + 1) as f64;
    if let Some((i, &size)) = sizes.iter().enumerate().find(|(_, &s)| !(s >= min)) {
        return Err(Error::Collapse {
            start: None,
            component: i,
            size,
            min,
        });
    }
    Ok(sizes)
}

fn scale_warnings(sol: &ScaleSolution, warnings: &mut Vec<String>) {
    if !sol.converged {
        warnings.push(format!("{} scale solver reached its iteration cap", sol.model));
    }
    for i in &sol.regularized {
        warnings.push(format!("ridge added to near-singular scatter of component {}", i + 1));
    }
}

pub(crate) fn m_step_rows(
    rows: &Rows,
    z: &DMatrix<f64>,
    latents: &[LatentMoments],
    family: Family,
    model: ScaleModel,
    config: &FitConfig,
    warm: Option<&ScaleSolution>,
) -> Result<MStep> {
    let (n, p) = (rows.n, rows.p);
    let g = z.ncols();
    let sizes = check_sizes(z, p)?;
    let mut warnings = Vec::new();

    let mut locations = Vec::with_capacity(g);
    let mut skews = Vec::with_capacity(g);
    let mut scatters = Vec::with_capacity(g);
    let mut dof_terms = Vec::with_capacity(g);
    for i in 0..g {
        let lm = |j: usize| &latents[j * g + i];
        let (mut s_w, mut s_wt, mut s_wt2, mut s_logw) = (0.0, 0.0, 0.0, 0.0);
        let mut y_w = DVector::zeros(p);
        let mut y_wt = DVector::zeros(p);
        for j in 0..n {
            let zj = z[(j, i)];
            if zj == 0.0 {
                continue;
            }
            let m = lm(j);
            s_w += zj * m.e_w;
            s_wt += zj * m.e_wu;
            s_wt2 += zj * m.e_wu2;
            s_logw += zj * (m.e_logw - m.e_w);
            for (k, y) in rows.row(j).iter().enumerate() {
                y_w[k] += zj * m.e_w * y;
                y_wt[k] += zj * m.e_wu * y;
            }
        }
        let det = s_w * s_wt2 - s_wt * s_wt;
        let (xi, lambda) = if family.is_skewed() && det > 1e-12 * s_w * s_wt2 {
            ((&y_w * s_wt2 - &y_wt * s_wt) / det, (&y_wt * s_w - &y_w * s_wt) / det)
        } else {
            if family.is_skewed() {
                warnings.push(format!("skewness of component {} not identifiable this step", i + 1));
            }
            (&y_w / s_w, DVector::zeros(p))
        };

        // W_i = Σ z [e_w r r' - e_wu (r λ' + λ r')] + S_wt2 λ λ' with r = y - ξ
        let mut w = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        let mut r = vec![0.0; p];
        for j in 0..n {
            let zj = z[(j, i)];
            if zj == 0.0 {
                continue;
            }
            let m = lm(j);
            for (k, y) in rows.row(j).iter().enumerate() {
                r[k] = y - xi[k];
            }
            let zw = zj * m.e_w;
            for c in 0..p {
                let rc = zw * r[c];
                for rr in c..p {
                    w[(rr, c)] += rc * r[rr];
                }
                b[c] += zj * m.e_wu * r[c];
            }
        }
        for c in 0..p {
            for rr in c..p {
                let v = w[(rr, c)] - b[rr] * lambda[c] - lambda[rr] * b[c] + s_wt2 * lambda[rr] * lambda[c];
                w[(rr, c)] = v;
                w[(c, rr)] = v;
            }
        }
        locations.push(xi);
        skews.push(lambda);
        scatters.push(w);
        dof_terms.push(s_logw);
    }

    let set = ScatterSet::new(scatters, sizes.clone())?;
    let sol = solve_scale_with(model, &set, warm, &config.scale)?;
    scale_warnings(&sol, &mut warnings);

    let dofs: Vec<Option<f64>> = if family.has_dof() {
        if config.constrain_dof_equal {
            let c = dof_terms.iter().sum::<f64>() / sizes.iter().sum::<f64>();
            let (nu, warn) = solve_dof(c, config.dof_bounds);
            if let Some(w) = warn {
                warnings.push(format!("shared {w}"));
            }
            vec![Some(nu); g]
        } else {
            (0..g)
                .map(|i| {
                    let (nu, warn) = solve_dof(dof_terms[i] / sizes[i], config.dof_bounds);
                    if let Some(w) = warn {
                        warnings.push(format!("component {}: {w}", i + 1));
                    }
                    Some(nu)
                })
                .collect()
        }
    } else {
        vec![None; g]
    };

    let components = (0..g)
        .map(|i| ComponentParams {
            location: locations[i].clone(),
            scale: sol.scales[i].clone(),
            skew: skews[i].clone(),
            dof: dofs[i],
        })
        .collect();
    Ok(MStep {
        mixture: Mixture {
            family,
            model,
            weights: sizes.iter().map(|s| s / n as f64).collect(),
            components,
            scale: sol,
        },
        warnings,
    })
}

/// Root of `ln(ν/2) + 1 - ψ(ν/2) + c = 0` on `bounds`, where `c` is the
/// weighted mean of `E[ln W] - E[W]`. The left side decreases in ν and the
/// objective is concave, so a root outside the bounds maps to the nearer bound.
pub(crate) fn solve_dof(c: f64, bounds: (f64, f64)) -> (f64, Option<String>) {
    let f = |nu: f64| (0.5 * nu).ln() + 1.0 - digamma(0.5 * nu) + c;
    let (lo, hi) = bounds;
    if f(hi) >= 0.0 {
        return (hi, Some(format!("degrees of freedom clamped to upper bound {hi}")));
    }
    if f(lo) <= 0.0 {
        return (lo, Some(format!("degrees of freedom clamped to lower bound {lo}")));
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    while b - a > 1e-13 {
        let mid = 0.5 * (a + b);
        if f(mid.exp()) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    ((0.5 * (a + b)).exp(), None)
}

/// Starting parameters from initial responsibilities: weighted means,
/// constrained weighted covariances, small skewness in the direction of each
/// coordinate's third moment, and ν at its configured starting value.
pub(crate) fn initial_mixture(
    rows: &Rows,
    z: &DMatrix<f64>,
    family: Family,
    model: ScaleModel,
    config: &FitConfig,
) -> Result<(Mixture, Vec<String>)> {
    let (n, p) = (rows.n, rows.p);
    let g = z.ncols();
    let sizes = check_sizes(z, p)?;
    let mut means = Vec::with_capacity(g);
    let mut scatters = Vec::with_capacity(g);
    let mut skews = Vec::with_capacity(g);
    for i in 0..g {
        let mut mean = DVector::zeros(p);
        for j in 0..n {
            for (k, y) in rows.row(j).iter().enumerate() {
                mean[k] += z[(j, i)] * y;
            }
        }
        mean /= sizes[i];
        let mut w = DMatrix::<f64>::zeros(p, p);
        let mut third = DVector::zeros(p);
        for j in 0..n {
            let zj = z[(j, i)];
            let r = DVector::from_iterator(p, rows.row(j).iter().zip(mean.iter()).map(|(y, m)| y - m));
            w.ger(zj, &r, &r, 1.0);
            third += r.map(|x| zj * x * x * x);
        }
        crate::linalg::symmetrize(&mut w);
        means.push(mean);
        scatters.push(w);
        skews.push(if family.is_skewed() {
            third.map(|t| if t < 0.0 { -INIT_SKEW } else { INIT_SKEW })
        } else {
            DVector::zeros(p)
        });
    }
    let set = ScatterSet::new(scatters, sizes.clone())?;
    let sol = solve_scale_with(model, &set, None, &config.scale)?;
    let mut warnings = Vec::new();
    scale_warnings(&sol, &mut warnings);
    let dof = family.has_dof().then_some(config.dof_init);
    let components = (0..g)
        .map(|i| ComponentParams {
            location: means[i].clone(),
            scale: sol.scales[i].clone(),
            skew: skews[i].clone(),
            dof,
        })
        .collect();
    Ok((
        Mixture {
            family,
            model,
            weights: sizes.iter().map(|s| s / n as f64).collect(),
            components,
            scale: sol,
        },
        warnings,
    ))
}
