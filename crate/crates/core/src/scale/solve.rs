use nalgebra::{DMatrix, DVector};

use super::{ScaleModel, ScaleOptions, ScaleSolution, ScatterSet};
use crate::error::{Error, Result};
use crate::linalg::{self, geometric_mean};

/// Relative ridge added to near-singular scatters, times `tr(W_i)/p`.
const RIDGE: f64 = 1e-8;

/// Solve with default options and no warm start.
pub fn solve_scale(model: ScaleModel, set: &ScatterSet) -> Result<ScaleSolution> {
    solve_scale_with(model, set, None, &ScaleOptions::default())
}

/// Solve `model` on `set`.
///
/// For the iterative classes a compatible `warm` solution (typically the
/// previous EM iterate) is used as a second starting point and the better of
/// the two runs is returned, so the objective never exceeds its value at the
/// warm start.
pub fn solve_scale_with(
    model: ScaleModel,
    set: &ScatterSet,
    warm: Option<&ScaleSolution>,
    opts: &ScaleOptions,
) -> Result<ScaleSolution> {
    let pr = Prepared::new(set, opts)?;
    let warm = warm.filter(|w| pr.accepts(model, w));
    let run = match model {
        ScaleModel::EII => pr.eii(),
        ScaleModel::VII => pr.vii(),
        ScaleModel::EEI => pr.eei(),
        ScaleModel::VVI => pr.vvi(),
        ScaleModel::EVI => pr.evi(),
        ScaleModel::VEI => {
            let diags: Vec<DVector<f64>> = pr.w.iter().map(|w| w.diagonal()).collect();
            let init = pr.volumes_from(&diags);
            let run = pr.common_shape(&diags, None, init, opts)?;
            match warm {
                Some(ws) => better(run, pr.common_shape(&diags, None, ws.volumes.clone(), opts)?),
                None => run,
            }
        }
        ScaleModel::EEE => pr.eee(),
        ScaleModel::VEE => {
            let init = pr.w.iter().zip(&pr.n).map(|(w, n)| det_root(w) / n).collect();
            let run = pr.vee(init, opts)?;
            match warm {
                Some(ws) => better(run, pr.vee(ws.volumes.clone(), opts)?),
                None => run,
            }
        }
        ScaleModel::EVE | ScaleModel::VVE => {
            let varying = model == ScaleModel::VVE;
            let (_, d0) = linalg::sym_eigen_sorted(&pr.pooled());
            let run = pr.common_orientation(varying, d0, opts)?;
            match warm {
                Some(ws) => better(run, pr.common_orientation(varying, ws.orientations[0].clone(), opts)?),
                None => run,
            }
        }
        ScaleModel::EEV => pr.eev(),
        ScaleModel::VEV => {
            let eig: Vec<_> = pr.w.iter().map(linalg::sym_eigen_sorted).collect();
            let values: Vec<DVector<f64>> = eig.iter().map(|(v, _)| v.clone()).collect();
            let orient: Vec<DMatrix<f64>> = eig.into_iter().map(|(_, d)| d).collect();
            let init = pr.volumes_from(&values);
            let run = pr.common_shape(&values, Some(&orient), init, opts)?;
            match warm {
                Some(ws) => better(run, pr.common_shape(&values, Some(&orient), ws.volumes.clone(), opts)?),
                None => run,
            }
        }
        ScaleModel::EVV => pr.evv(),
        ScaleModel::VVV => pr.vvv(),
    };
    if !run.converged && !opts.allow_unconverged {
        return Err(Error::ScaleNotConverged {
            model: model.to_string(),
            iterations: run.iterations,
            gap: run.gap,
        });
    }
    Ok(pr.finish(model, run))
}

struct Decomp {
    volumes: Vec<f64>,
    shapes: Vec<DVector<f64>>,
    orientations: Vec<DMatrix<f64>>,
}

struct Run {
    dec: Decomp,
    objective: f64,
    iterations: usize,
    converged: bool,
    gap: f64,
}

fn better(a: Run, b: Run) -> Run {
    if b.objective < a.objective {
        b
    } else {
        a
    }
}

/// `|W|^{1/p}` through the eigenvalues (robust for ridged scatters).
fn det_root(w: &DMatrix<f64>) -> f64 {
    let eig = w.clone().symmetric_eigenvalues();
    geometric_mean(&eig.map(|e| e.max(f64::MIN_POSITIVE)))
}

/// `diag(D' W D)`.
fn diag_quad(w: &DMatrix<f64>, d: &DMatrix<f64>) -> DVector<f64> {
    let wd = w * d;
    DVector::from_iterator(d.ncols(), (0..d.ncols()).map(|k| d.column(k).dot(&wd.column(k))))
}

/// Run `step` until the relative change in its returned objective drops below `tol`.
fn iterate(max_iter: usize, tol: f64, mut step: impl FnMut() -> Result<f64>) -> Result<(f64, usize, bool, f64)> {
    let mut prev = f64::INFINITY;
    let mut gap = f64::INFINITY;
    let mut obj = f64::INFINITY;
    for it in 1..=max_iter.max(1) {
        obj = step()?;
        if prev.is_finite() {
            gap = ((prev - obj) / obj.abs().max(1.0)).abs();
            if gap < tol {
                return Ok((obj, it, true, gap));
            }
        }
        prev = obj;
    }
    Ok((obj, max_iter.max(1), false, gap))
}

fn fix_signs(d: &mut DMatrix<f64>) {
    for mut col in d.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}

struct Prepared {
    w: Vec<DMatrix<f64>>,
    n: Vec<f64>,
    p: usize,
    total: f64,
    regularized: Vec<usize>,
}

impl Prepared {
    fn new(set: &ScatterSet, opts: &ScaleOptions) -> Result<Self> {
        let p = set.dim();
        let mut w = Vec::with_capacity(set.n_components());
        let mut regularized = Vec::new();
        for (i, wi) in set.scatters().iter().enumerate() {
            let tr = wi.trace();
            if !(tr.is_finite() && tr > 0.0) {
                return Err(Error::SingularScatter { component: i });
            }
            let mut wi = wi.clone();
            if linalg::condition_number(&wi) > opts.ridge_condition.unwrap_or(f64::INFINITY) {
                wi += DMatrix::identity(p, p) * (RIDGE * tr / p as f64);
                regularized.push(i);
            } else if opts.ridge_condition.is_none() && linalg::condition_number(&wi).is_infinite() {
                return Err(Error::SingularScatter { component: i });
            }
            w.push(wi);
        }
        Ok(Self {
            w,
            n: set.sizes().to_vec(),
            p,
            total: set.total_size(),
            regularized,
        })
    }

    fn g(&self) -> usize {
        self.w.len()
    }

    fn pf(&self) -> f64 {
        self.p as f64
    }

    fn pooled(&self) -> DMatrix<f64> {
        self.w.iter().fold(DMatrix::zeros(self.p, self.p), |acc, w| acc + w)
    }

    fn accepts(&self, model: ScaleModel, warm: &ScaleSolution) -> bool {
        warm.model == model
            && warm.volumes.len() == self.g()
            && warm.volumes.iter().all(|v| v.is_finite() && *v > 0.0)
            && warm.orientations.iter().all(|d| d.nrows() == self.p && d.iter().all(|x| x.is_finite()))
    }

    fn objective(&self, dec: &Decomp) -> f64 {
        let mut total = 0.0;
        for i in 0..self.g() {
            let a = &dec.shapes[i];
            let vol = dec.volumes[i];
            let q = diag_quad(&self.w[i], &dec.orientations[i]);
            let ln_det = self.pf() * vol.ln() + a.iter().map(|x| x.ln()).sum::<f64>();
            total += self.n[i] * ln_det + q.iter().zip(a.iter()).map(|(qk, ak)| qk / (vol * ak)).sum::<f64>();
        }
        total
    }

    fn closed(&self, dec: Decomp) -> Run {
        Run {
            objective: self.objective(&dec),
            dec,
            iterations: 1,
            converged: true,
            gap: 0.0,
        }
    }

    fn same<T: Clone>(&self, x: T) -> Vec<T> {
        vec![x; self.g()]
    }

    fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.p, self.p)
    }

    fn ones(&self) -> DVector<f64> {
        DVector::from_element(self.p, 1.0)
    }

    /// Per-component volumes `gm(values_i)/n_i`.
    fn volumes_from(&self, values: &[DVector<f64>]) -> Vec<f64> {
        values.iter().zip(&self.n).map(|(v, n)| geometric_mean(v) / n).collect()
    }

    fn eii(&self) -> Run {
        let tr: f64 = self.w.iter().map(|w| w.trace()).sum();
        let lam = tr / (self.total * self.pf());
        self.closed(Decomp {
            volumes: self.same(lam),
            shapes: self.same(self.ones()),
            orientations: self.same(self.identity()),
        })
    }

    fn vii(&self) -> Run {
        let volumes = self.w.iter().zip(&self.n).map(|(w, n)| w.trace() / (self.pf() * n)).collect();
        self.closed(Decomp {
            volumes,
            shapes: self.same(self.ones()),
            orientations: self.same(self.identity()),
        })
    }

    fn eei(&self) -> Run {
        let b = self.pooled().diagonal();
        let gm = geometric_mean(&b);
        self.closed(Decomp {
            volumes: self.same(gm / self.total),
            shapes: self.same(b / gm),
            orientations: self.same(self.identity()),
        })
    }

    fn vvi(&self) -> Run {
        let diags: Vec<DVector<f64>> = self.w.iter().map(|w| w.diagonal()).collect();
        self.closed(Decomp {
            volumes: self.volumes_from(&diags),
            shapes: diags.iter().map(|b| b / geometric_mean(b)).collect(),
            orientations: self.same(self.identity()),
        })
    }

    /// Alternating on (λ, A_i) from the VVI point; with the volume shared the
    /// shape update does not depend on λ, so one sweep is exact.
    fn evi(&self) -> Run {
        let diags: Vec<DVector<f64>> = self.w.iter().map(|w| w.diagonal()).collect();
        let lam = diags.iter().map(geometric_mean).sum::<f64>() / self.total;
        self.closed(Decomp {
            volumes: self.same(lam),
            shapes: diags.iter().map(|b| b / geometric_mean(b)).collect(),
            orientations: self.same(self.identity()),
        })
    }

    fn eee(&self) -> Run {
        let (e, d) = linalg::sym_eigen_sorted(&self.pooled());
        let gm = geometric_mean(&e);
        self.closed(Decomp {
            volumes: self.same(gm / self.total),
            shapes: self.same(e / gm),
            orientations: self.same(d),
        })
    }

    fn eev(&self) -> Run {
        let eig: Vec<_> = self.w.iter().map(linalg::sym_eigen_sorted).collect();
        let b = eig.iter().fold(DVector::zeros(self.p), |acc, (e, _)| acc + e);
        let gm = geometric_mean(&b);
        self.closed(Decomp {
            volumes: self.same(gm / self.total),
            shapes: self.same(b / gm),
            orientations: eig.into_iter().map(|(_, d)| d).collect(),
        })
    }

    fn evv(&self) -> Run {
        let eig: Vec<_> = self.w.iter().map(linalg::sym_eigen_sorted).collect();
        let lam = eig.iter().map(|(e, _)| geometric_mean(e)).sum::<f64>() / self.total;
        self.closed(Decomp {
            volumes: self.same(lam),
            shapes: eig.iter().map(|(e, _)| e / geometric_mean(e)).collect(),
            orientations: eig.into_iter().map(|(_, d)| d).collect(),
        })
    }

    fn vvv(&self) -> Run {
        let eig: Vec<_> = self.w.iter().map(linalg::sym_eigen_sorted).collect();
        let values: Vec<DVector<f64>> = eig.iter().map(|(e, _)| e.clone()).collect();
        self.closed(Decomp {
            volumes: self.volumes_from(&values),
            shapes: values.iter().map(|e| e / geometric_mean(e)).collect(),
            orientations: eig.into_iter().map(|(_, d)| d).collect(),
        })
    }

    /// Varying volume, shared diagonal shape: flip-flop between `A` and `λ_i`.
    /// `values[i]` is `diag(D_i' W_i D_i)` for fixed orientations (identity
    /// for VEI, the sorted eigenvectors of `W_i` for VEV).
    fn common_shape(
        &self,
        values: &[DVector<f64>],
        orient: Option<&[DMatrix<f64>]>,
        init: Vec<f64>,
        opts: &ScaleOptions,
    ) -> Result<Run> {
        let p = self.pf();
        let mut lam = init;
        let mut a = self.ones();
        let (_, iterations, converged, gap) = iterate(opts.max_flip_flop, opts.tol, || {
            let b = values
                .iter()
                .zip(&lam)
                .fold(DVector::zeros(self.p), |acc, (v, l)| acc + v / *l);
            a = &b / geometric_mean(&b);
            for i in 0..self.g() {
                lam[i] = values[i].component_div(&a).sum() / (p * self.n[i]);
            }
            Ok(self.n.iter().zip(&lam).map(|(n, l)| n * p * l.ln()).sum::<f64>() + p * self.total)
        })?;
        let dec = Decomp {
            volumes: lam,
            shapes: self.same(a),
            orientations: match orient {
                Some(d) => d.to_vec(),
                None => self.same(self.identity()),
            },
        };
        Ok(Run {
            objective: self.objective(&dec),
            dec,
            iterations,
            converged,
            gap,
        })
    }

    /// Varying volume, shared full shape-orientation `C = D A D'`, `|C| = 1`.
    fn vee(&self, init: Vec<f64>, opts: &ScaleOptions) -> Result<Run> {
        let p = self.pf();
        let mut lam = init;
        let mut c = self.identity();
        let (_, iterations, converged, gap) = iterate(opts.max_flip_flop, opts.tol, || {
            let s = self
                .w
                .iter()
                .zip(&lam)
                .fold(DMatrix::zeros(self.p, self.p), |acc, (w, l)| acc + w / *l);
            let l = linalg::cholesky_lower(&s, "pooled scatter")?;
            let root = (linalg::ln_det_from_cholesky(&l) / p).exp();
            c = s / root;
            let c_inv = linalg::cholesky_lower(&c, "shared scale")?;
            let c_inv = {
                let li = linalg::lower_inverse(&c_inv);
                li.transpose() * li
            };
            for i in 0..self.g() {
                lam[i] = self.w[i].dot(&c_inv) / (p * self.n[i]);
            }
            Ok(self.n.iter().zip(&lam).map(|(n, l)| n * p * l.ln()).sum::<f64>() + p * self.total)
        })?;
        let (e, d) = linalg::sym_eigen_sorted(&c);
        let a = &e / geometric_mean(&e);
        let dec = Decomp {
            volumes: lam,
            shapes: self.same(a),
            orientations: self.same(d),
        };
        Ok(Run {
            objective: self.objective(&dec),
            dec,
            iterations,
            converged,
            gap,
        })
    }

    /// One sweep of plane rotations of `D` with shapes and volumes fixed. For
    /// columns `k, l` the objective restricted to a rotation by `θ` is
    /// `a cos 2θ + b sin 2θ + const`, minimised exactly.
    fn jacobi_sweep(&self, d: &mut DMatrix<f64>, lam: &[f64], shapes: &[DVector<f64>]) {
        let p = self.p;
        for k in 0..p {
            for l in (k + 1)..p {
                let (mut a, mut b) = (0.0, 0.0);
                for i in 0..self.g() {
                    let wk = &self.w[i] * d.column(k);
                    let wl = &self.w[i] * d.column(l);
                    let (kk, kl, ll) = (d.column(k).dot(&wk), d.column(k).dot(&wl), d.column(l).dot(&wl));
                    let dm = (1.0 / shapes[i][k] - 1.0 / shapes[i][l]) / lam[i];
                    a += dm * 0.5 * (kk - ll);
                    b += dm * kl;
                }
                if a.hypot(b) == 0.0 {
                    continue;
                }
                let theta = 0.5 * (-b).atan2(-a);
                let (sn, cs) = theta.sin_cos();
                let ck = d.column(k).clone_owned();
                let cl = d.column(l).clone_owned();
                d.set_column(k, &(&ck * cs + &cl * sn));
                d.set_column(l, &(&cl * cs - &ck * sn));
            }
        }
    }

    /// Shared orientation with varying shapes (EVE, VVE). Exact updates of
    /// `A_i` and `λ` given `D`, then majorisation-minimisation steps for `D`
    /// on `Σ_i tr(W_i D M_i D')` with `M_i = (λ_i A_i)⁻¹`. Two majorisers
    /// alternate: bounding `W_i ≤ ω_i I` gives the polar factor of
    /// `Σ_i (ω_i I - W_i) D M_i`; bounding `M_i ≤ μ_i I` gives the transpose
    /// of the polar factor of `Σ_i (μ_i I - M_i) D' W_i`. A sweep of exact
    /// plane rotations follows; MM alone crawls near the optimum.
    fn common_orientation(&self, varying_volume: bool, init: DMatrix<f64>, opts: &ScaleOptions) -> Result<Run> {
        let p = self.pf();
        let omega: Vec<f64> = self.w.iter().map(|w| w.clone().symmetric_eigenvalues().max()).collect();
        let mut d = init;
        let mut lam = vec![1.0; self.g()];
        let mut shapes = self.same(self.ones());

        let update_shapes = |d: &DMatrix<f64>, lam: &mut Vec<f64>, shapes: &mut Vec<DVector<f64>>| {
            let c: Vec<DVector<f64>> = self.w.iter().map(|w| diag_quad(w, d)).collect();
            let gms: Vec<f64> = c.iter().map(geometric_mean).collect();
            if varying_volume {
                for i in 0..self.g() {
                    lam[i] = gms[i] / self.n[i];
                }
            } else {
                let shared = gms.iter().sum::<f64>() / self.total;
                lam.iter_mut().for_each(|l| *l = shared);
            }
            for i in 0..self.g() {
                shapes[i] = &c[i] / gms[i];
            }
        };
        let polar = |m: DMatrix<f64>| -> Result<DMatrix<f64>> {
            let svd = m.svd(true, true);
            match (svd.u, svd.v_t) {
                (Some(u), Some(v_t)) => Ok(u * v_t),
                _ => Err(Error::Domain("SVD failed in orientation update".into())),
            }
        };

        let (_, iterations, converged, gap) = iterate(opts.max_mm, opts.tol, || {
            update_shapes(&d, &mut lam, &mut shapes);
            let mut f = DMatrix::zeros(self.p, self.p);
            for i in 0..self.g() {
                let mut dm = &d * omega[i] - &self.w[i] * &d;
                for (k, mut col) in dm.column_iter_mut().enumerate() {
                    col /= lam[i] * shapes[i][k];
                }
                f += dm;
            }
            d = polar(f)?;
            update_shapes(&d, &mut lam, &mut shapes);
            let mut f = DMatrix::zeros(self.p, self.p);
            for i in 0..self.g() {
                let m: Vec<f64> = shapes[i].iter().map(|a| 1.0 / (lam[i] * a)).collect();
                let mu = m.iter().cloned().fold(0.0, f64::max);
                let mut dw = d.transpose() * &self.w[i];
                for (k, mut row) in dw.row_iter_mut().enumerate() {
                    row *= mu - m[k];
                }
                f += dw;
            }
            d = polar(f)?.transpose();
            update_shapes(&d, &mut lam, &mut shapes);
            self.jacobi_sweep(&mut d, &lam, &shapes);
            let mut obj = 0.0;
            for i in 0..self.g() {
                let q = diag_quad(&self.w[i], &d);
                obj += self.n[i] * p * lam[i].ln() + q.component_div(&shapes[i]).sum() / lam[i];
            }
            Ok(obj)
        })?;
        fix_signs(&mut d);
        update_shapes(&d, &mut lam, &mut shapes);
        let dec = Decomp {
            volumes: lam,
            shapes,
            orientations: self.same(d),
        };
        Ok(Run {
            objective: self.objective(&dec),
            dec,
            iterations,
            converged,
            gap,
        })
    }

    fn finish(self, model: ScaleModel, run: Run) -> ScaleSolution {
        let Decomp {
            volumes,
            shapes,
            orientations,
        } = run.dec;
        let scales = (0..volumes.len())
            .map(|i| linalg::compose(&orientations[i], &(&shapes[i] * volumes[i])))
            .collect();
        ScaleSolution {
            model,
            volumes,
            shapes,
            orientations,
            scales,
            objective: run.objective,
            iterations: run.iterations,
            converged: run.converged,
            gap: run.gap,
            regularized: self.regularized,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn sample_set() -> ScatterSet {
        let w1 = dmatrix![4.0, 1.0, 0.5; 1.0, 3.0, -0.2; 0.5, -0.2, 2.0] * 20.0;
        let w2 = dmatrix![1.0, -0.3, 0.0; -0.3, 2.0, 0.4; 0.0, 0.4, 5.0] * 30.0;
        let w3 = dmatrix![2.0, 0.8, 0.1; 0.8, 1.0, 0.0; 0.1, 0.0, 0.5] * 15.0;
        ScatterSet::new(vec![w1, w2, w3], vec![20.0, 30.0, 15.0]).unwrap()
    }

    #[test]
    fn closed_forms_match_definitions() {
        let set = sample_set();
        let eee = solve_scale(ScaleModel::EEE, &set).unwrap();
        let pooled = set.pooled() / set.total_size();
        for s in &eee.scales {
            assert_relative_eq!(s, &pooled, epsilon = 1e-12);
        }
        let vvv = solve_scale(ScaleModel::VVV, &set).unwrap();
        for (i, s) in vvv.scales.iter().enumerate() {
            assert_relative_eq!(s, &(&set.scatters()[i] / set.sizes()[i]), epsilon = 1e-12);
        }
        let eii = solve_scale(ScaleModel::EII, &set).unwrap();
        let lam = set.pooled().trace() / (set.total_size() * 3.0);
        assert_relative_eq!(eii.scales[0], DMatrix::identity(3, 3) * lam, epsilon = 1e-14);
    }

    #[test]
    fn every_model_reconstructs_and_normalises() {
        let set = sample_set();
        for model in ScaleModel::ALL {
            let sol = solve_scale(model, &set).unwrap();
            assert!(sol.converged, "{model}");
            for i in 0..3 {
                let a = &sol.shapes[i];
                assert!((a.iter().product::<f64>() - 1.0).abs() < 1e-8, "{model}");
                let back = linalg::compose(&sol.orientations[i], &(a * sol.volumes[i]));
                assert_relative_eq!(back, sol.scales[i], epsilon = 1e-10);
            }
            let direct = set.objective(&sol.scales).unwrap();
            assert_relative_eq!(direct, sol.objective, max_relative = 1e-10);
        }
    }

    #[test]
    fn objective_respects_nesting() {
        let set = sample_set();
        let obj = |m| solve_scale(m, &set).unwrap().objective;
        let (vvv, eii) = (obj(ScaleModel::VVV), obj(ScaleModel::EII));
        for model in ScaleModel::ALL {
            let o = obj(model);
            assert!(vvv <= o + 1e-9 && o <= eii + 1e-9, "{model}: {vvv} {o} {eii}");
        }
    }

    #[test]
    fn warm_start_never_worse() {
        let set = sample_set();
        for model in [ScaleModel::EVE, ScaleModel::VVE, ScaleModel::VEE, ScaleModel::VEI, ScaleModel::VEV] {
            let cold = solve_scale(model, &set).unwrap();
            let warm = solve_scale_with(model, &set, Some(&cold), &ScaleOptions::default()).unwrap();
            assert!(warm.objective <= cold.objective + 1e-9 * cold.objective.abs());
        }
    }

    #[test]
    fn zero_scatter_is_an_error_with_index() {
        let set = ScatterSet::new(vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)], vec![3.0, 3.0]).unwrap();
        let err = solve_scale(ScaleModel::VVV, &set).unwrap_err();
        assert_eq!(err, Error::SingularScatter { component: 1 });
    }

    #[test]
    fn rank_deficient_scatter_gets_ridge() {
        let singular = dmatrix![1.0, 1.0; 1.0, 1.0];
        let set = ScatterSet::new(vec![DMatrix::identity(2, 2), singular.clone()], vec![3.0, 3.0]).unwrap();
        let sol = solve_scale(ScaleModel::VVV, &set).unwrap();
        assert_eq!(sol.regularized, vec![1]);
        let strict = ScaleOptions {
            ridge_condition: None,
            ..ScaleOptions::default()
        };
        assert_eq!(
            solve_scale_with(ScaleModel::VVV, &set, None, &strict).unwrap_err(),
            Error::SingularScatter { component: 1 }
        );
    }

    #[test]
    fn iteration_cap_is_reported() {
        let set = sample_set();
        let opts = ScaleOptions {
            max_mm: 2,
            ..ScaleOptions::default()
        };
        let err = solve_scale_with(ScaleModel::EVE, &set, None, &opts).unwrap_err();
        assert!(matches!(err, Error::ScaleNotConverged { iterations: 2, .. }));
        let lenient = ScaleOptions {
            allow_unconverged: true,
            ..opts
        };
        let sol = solve_scale_with(ScaleModel::EVE, &set, None, &lenient).unwrap();
        assert!(!sol.converged);
    }
}
