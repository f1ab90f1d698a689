use nalgebra::DMatrix;

use super::{Mixture, Rows};
use crate::distributions::{LatentMoments, PreparedComponent};
use crate::error::{Error, Result};
use crate::special::log_sum_exp;

/// Latent moments are only computed where the responsibility reaches this
/// value; elsewhere their M-step weight is negligible and a placeholder is stored.
pub const LATENT_CUTOFF: f64 = 1e-14;

pub struct EStep {
    /// `n × g` posterior membership probabilities.
    pub responsibilities: DMatrix<f64>,
    /// Row-major `n × g` latent moments: entry `j * g + i`.
    pub latents: Vec<LatentMoments>,
    /// `Σ_j ln Σ_i π_i f_i(y_j)`, or the classification log-likelihood when
    /// some rows have fixed labels.
    pub loglik: f64,
}

impl EStep {
    pub fn latent(&self, j: usize, i: usize) -> &LatentMoments {
        &self.latents[j * self.responsibilities.ncols() + i]
    }
}

/// Posterior memberships, latent moments and log-likelihood at `mixture`.
pub fn e_step(data: &DMatrix<f64>, mixture: &Mixture) -> Result<EStep> {
    e_step_rows(&Rows::new(data)?, mixture, None)
}

/// `fixed[j] = Some(i)` pins row `j` to component `i`; such rows contribute
/// `ln π_i f_i(y_j)` to the log-likelihood.
pub(crate) fn e_step_rows(rows: &Rows, mixture: &Mixture, fixed: Option<&[Option<usize>]>) -> Result<EStep> {
    let g = mixture.g();
    if rows.p != mixture.dim() {
        return Err(Error::Domain(format!(
            "data has {} columns but the mixture has dimension {}",
            rows.p,
            mixture.dim()
        )));
    }
    let prepared = mixture
        .components
        .iter()
        .map(PreparedComponent::new)
        .collect::<Result<Vec<_>>>()?;
    let ln_w: Vec<f64> = mixture.weights.iter().map(|w| w.ln()).collect();
    let skewed = mixture.family.is_skewed();
    let heavy = mixture.family.has_dof();

    let mut resp = DMatrix::zeros(rows.n, g);
    let mut latents = Vec::with_capacity(rows.n * g);
    let mut points = Vec::with_capacity(g);
    let mut ln_terms = vec![0.0; g];
    let mut loglik = 0.0;
    for j in 0..rows.n {
        let y = rows.row(j);
        points.clear();
        for i in 0..g {
            let (ln_f, pt) = prepared[i].evaluate_point(y);
            if ln_f.is_nan() {
                return Err(Error::NanDensity {
                    observation: j,
                    component: i,
                });
            }
            ln_terms[i] = ln_w[i] + ln_f;
            points.push(pt);
        }
        match fixed.and_then(|f| f[j]) {
            Some(label) => {
                resp[(j, label)] = 1.0;
                loglik += ln_terms[label];
            }
            None => {
                let lse = log_sum_exp(&ln_terms);
                if lse.is_finite() {
                    for i in 0..g {
                        resp[(j, i)] = (ln_terms[i] - lse).exp();
                    }
                    let total: f64 = resp.row(j).sum();
                    for i in 0..g {
                        resp[(j, i)] /= total;
                    }
                } else {
                    // every component underflowed: fall back to the weights
                    for i in 0..g {
                        resp[(j, i)] = mixture.weights[i];
                    }
                }
                loglik += lse;
            }
        }
        for (i, pt) in points.iter().enumerate() {
            if resp[(j, i)] < LATENT_CUTOFF {
                latents.push(LatentMoments::GAUSSIAN);
                continue;
            }
            let mut lm = prepared[i].latent_at(pt);
            if !skewed {
                lm.e_wu = 0.0;
                lm.e_wu2 = 0.0;
            }
            if !heavy {
                lm.e_w = 1.0;
                lm.e_logw = 0.0;
            }
            latents.push(lm);
        }
    }
    Ok(EStep {
        responsibilities: resp,
        latents,
        loglik,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ComponentParams;
    use crate::em::Family;
    use crate::scale::{solve_scale, ScaleModel, ScatterSet};
    use nalgebra::{dmatrix, dvector};

    fn mixture(components: Vec<ComponentParams>, weights: Vec<f64>, family: Family) -> Mixture {
        let g = components.len();
        let set = ScatterSet::new(components.iter().map(|c| c.scale.clone()).collect(), vec![1.0; g]).unwrap();
        Mixture {
            family,
            model: ScaleModel::VVV,
            weights,
            components,
            scale: solve_scale(ScaleModel::VVV, &set).unwrap(),
        }
    }

    #[test]
    fn single_component_has_unit_responsibilities() {
        let c = ComponentParams::new(dvector![0.0, 0.0], DMatrix::identity(2, 2), dvector![1.0, 0.5], Some(5.0)).unwrap();
        let mix = mixture(vec![c], vec![1.0], Family::SkewT);
        let data = dmatrix![0.0, 1.0; 3.0, -2.0; 50.0, 50.0];
        let es = e_step(&data, &mix).unwrap();
        assert!(es.responsibilities.iter().all(|&z| z == 1.0));
    }

    #[test]
    fn identical_components_split_evenly() {
        let c = ComponentParams::new(dvector![1.0], dmatrix![2.0], dvector![-1.0], None).unwrap();
        let mix = mixture(vec![c.clone(), c], vec![0.5, 0.5], Family::SkewNormal);
        let data = dmatrix![0.0; 1.0; -4.0; 10.0];
        let es = e_step(&data, &mix).unwrap();
        assert!(es.responsibilities.iter().all(|&z| z == 0.5));
    }

    #[test]
    fn far_outlier_does_not_break_normalisation() {
        let a = ComponentParams::gaussian(dvector![0.0], dmatrix![1e-4]).unwrap();
        let b = ComponentParams::gaussian(dvector![1.0], dmatrix![1e-4]).unwrap();
        let mix = mixture(vec![a, b], vec![0.5, 0.5], Family::Gaussian);
        let data = dmatrix![1e6];
        let es = e_step(&data, &mix).unwrap();
        assert!((es.responsibilities.row(0).sum() - 1.0).abs() < 1e-12);
        assert!(es.loglik.is_finite());
    }
}
