//! Independent oracles shared by the integration tests. The oracles never call
//! the library's density, latent-moment or scale-solver code; the `*_suite`
//! functions compare library output against them.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use skewclust::distributions::ComponentParams;
use skewclust::scale::{Constraint, ScaleModel, ScaleSolution};

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Simpson weights for `n` intervals on `[a, b]`, as (nodes, weights).
pub fn simpson_nodes(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + k as f64 * h, w * h / 3.0)
        })
        .unzip()
}

/// Multivariate normal density by explicit Cholesky, used only by oracles.
pub fn mvnorm_pdf(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let p = y.len() as f64;
    let chol = cov.clone().cholesky().expect("positive definite");
    let r = y - mean;
    let z = chol.l().solve_lower_triangular(&r).expect("triangular solve");
    let ln_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    (-0.5 * (z.norm_squared() + ln_det + p * (2.0 * std::f64::consts::PI).ln())).exp()
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Density of the restricted skew-normal / skew-t obtained by numerically
/// integrating the hierarchical representation over `|U|` (and `W`).
pub fn density_by_marginalization(y: &DVector<f64>, params: &ComponentParams) -> f64 {
    let xi = &params.location;
    let lambda = &params.skew;
    let omega = &params.scale;
    // p(y | w) = ∫_0^∞ 2 √w φ(√w u) φ_p(y; ξ + λu, Ω/w) du
    let given_w = |w: f64, intervals: usize| {
        let sd = 1.0 / w.sqrt();
        let cov = omega / w;
        let upper = 14.0 * sd;
        simpson(
            |u| {
                let half = 2.0 * (-0.5 * w * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
                half * mvnorm_pdf(y, &(xi + lambda * u), &cov)
            },
            0.0,
            upper,
            intervals,
        )
    };
    match params.dof {
        // the u-posterior can be narrow, so the single skew-normal integral gets a fine grid
        None => given_w(1.0, 40_000),
        Some(nu) => {
            // W ~ Gamma(ν/2, rate ν/2), integrated in t = ln w
            let k = 0.5 * nu;
            let ln_norm = k * k.ln() - ln_gamma(k);
            simpson(
                |t| {
                    let w = t.exp();
                    (ln_norm + k * t - k * w).exp() * given_w(w, 1200)
                },
                -18.0,
                4.5,
                1200,
            )
        }
    }
}

/// Self-normalised importance-sampling estimates of `E[W]`, `E[W|U|]`,
/// `E[W U²]`, `E[ln W]` given `y`, drawing `(U, W)` from their prior, with
/// standard errors.
pub fn mc_latent(y: &DVector<f64>, params: &ComponentParams, draws: usize, rng: &mut ChaCha20Rng) -> ([f64; 4], [f64; 4]) {
    let chol = params.scale.clone().cholesky().expect("positive definite");
    let l = chol.l();
    let r0 = y - &params.location;
    let p = y.len() as f64;
    let gamma = params.dof.map(|nu| Gamma::new(0.5 * nu, 2.0 / nu).unwrap());
    let mut samples = Vec::with_capacity(draws);
    let mut ln_weights = Vec::with_capacity(draws);
    for _ in 0..draws {
        let w = gamma.as_ref().map_or(1.0, |g| g.sample(rng));
        let z: f64 = rng.sample(StandardNormal);
        let u = z.abs() / w.sqrt();
        let r = &r0 - &params.skew * u;
        let q = l.solve_lower_triangular(&r).unwrap().norm_squared();
        // ln φ_p(y; ξ + λu, Ω/w) up to a constant
        ln_weights.push(0.5 * p * w.ln() - 0.5 * w * q);
        samples.push([w, w * u, w * u * u, w.ln()]);
    }
    let max = ln_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = ln_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut mean = [0.0; 4];
    for (s, w) in samples.iter().zip(&weights) {
        for k in 0..4 {
            mean[k] += w * s[k] / total;
        }
    }
    let mut se = [0.0; 4];
    for (s, w) in samples.iter().zip(&weights) {
        for k in 0..4 {
            se[k] += (w / total).powi(2) * (s[k] - mean[k]).powi(2);
        }
    }
    (mean, se.map(f64::sqrt))
}

/// Nelder–Mead simplex minimiser.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize, ftol: f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    if n == 0 {
        return (vec![], f(x0));
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut evals = n + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() <= ftol * (1.0 + values[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|x| x[k]).sum::<f64>() / n as f64).collect();
        let towards = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect() };
        let xr = towards(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = towards(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let xc = if fr < values[n] { towards(-0.5) } else { towards(0.5) };
            let fc = f(&xc);
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
                    values[i] = f(&simplex[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best])
}

/// Unconstrained coordinates for the constrained class of a scale model:
/// log volumes, log shape entries with the last fixed by `|A| = 1`, and
/// Cayley coordinates of each orientation.
pub struct ScaleParametrization {
    pub model: ScaleModel,
    pub g: usize,
    pub p: usize,
}

fn copies(c: Constraint, g: usize) -> usize {
    match c {
        Constraint::Identity => 0,
        Constraint::Equal => 1,
        Constraint::Varying => g,
    }
}

fn cayley(s: &[f64], p: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(p, p);
    let mut idx = 0;
    for r in 0..p {
        for c in (r + 1)..p {
            k[(r, c)] = s[idx];
            k[(c, r)] = -s[idx];
            idx += 1;
        }
    }
    let id = DMatrix::<f64>::identity(p, p);
    (&id - &k) * (&id + &k).try_inverse().expect("I + K invertible for skew K")
}

fn cayley_inverse(d: &DMatrix<f64>) -> Vec<f64> {
    let p = d.nrows();
    let id = DMatrix::<f64>::identity(p, p);
    let k = (&id - d) * (&id + d).try_inverse().expect("no eigenvalue -1");
    let mut s = Vec::new();
    for r in 0..p {
        for c in (r + 1)..p {
            s.push(k[(r, c)]);
        }
    }
    s
}

impl ScaleParametrization {
    pub fn new(model: ScaleModel, g: usize, p: usize) -> Self {
        Self { model, g, p }
    }

    fn blocks(&self) -> (usize, usize, usize) {
        (
            copies(self.model.volume(), self.g),
            copies(self.model.shape(), self.g),
            copies(self.model.orientation(), self.g),
        )
    }

    /// Number of free coordinates; an independent count of the scale parameters.
    pub fn len(&self) -> usize {
        let (v, a, d) = self.blocks();
        v + a * (self.p - 1) + d * self.p * (self.p - 1) / 2
    }

    pub fn scales(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        let (nv, na, nd) = self.blocks();
        let p = self.p;
        let mut it = theta.iter().copied();
        let vols: Vec<f64> = (0..nv).map(|_| it.next().unwrap().exp()).collect();
        let shapes: Vec<DVector<f64>> = (0..na)
            .map(|_| {
                let mut a: Vec<f64> = (0..p - 1).map(|_| it.next().unwrap()).collect();
                a.push(-a.iter().sum::<f64>());
                DVector::from_iterator(p, a.into_iter().map(f64::exp))
            })
            .collect();
        let dirs: Vec<DMatrix<f64>> = (0..nd)
            .map(|_| {
                let s: Vec<f64> = (0..p * (p - 1) / 2).map(|_| it.next().unwrap()).collect();
                cayley(&s, p)
            })
            .collect();
        (0..self.g)
            .map(|i| {
                let lam = vols[if nv == 1 { 0 } else { i }];
                let a = if na == 0 { DVector::from_element(p, 1.0) } else { shapes[if na == 1 { 0 } else { i }].clone() };
                let d = if nd == 0 { DMatrix::identity(p, p) } else { dirs[if nd == 1 { 0 } else { i }].clone() };
                &d * DMatrix::from_diagonal(&a) * d.transpose() * lam
            })
            .collect()
    }

    /// Coordinates of a solver output in this parametrization.
    pub fn from_solution(&self, sol: &ScaleSolution) -> Vec<f64> {
        let (nv, na, nd) = self.blocks();
        let p = self.p;
        let mut theta = Vec::with_capacity(self.len());
        for i in 0..nv {
            theta.push(sol.volumes[i].ln());
        }
        for i in 0..na {
            theta.extend((0..p - 1).map(|k| sol.shapes[i][k].ln()));
        }
        for i in 0..nd {
            let mut d = sol.orientations[i].clone();
            if d.determinant() < 0.0 {
                let flipped = -d.column(p - 1);
                d.set_column(p - 1, &flipped);
            }
            theta.extend(cayley_inverse(&d));
        }
        theta
    }
}

/// `Σ n_i ln|Ω_i| + tr(W_i Ω_i⁻¹)`, computed directly.
pub fn scale_objective(scatters: &[DMatrix<f64>], sizes: &[f64], scales: &[DMatrix<f64>]) -> f64 {
    scatters
        .iter()
        .zip(sizes)
        .zip(scales)
        .map(|((w, n), o)| match o.clone().try_inverse() {
            Some(inv) if o.determinant() > 0.0 => n * o.determinant().ln() + (w * inv).trace(),
            _ => f64::INFINITY,
        })
        .sum()
}

/// Random SPD matrix with eigenvalues spread over about two orders of magnitude.
pub fn random_spd(p: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = m.qr().q();
    let eig = DVector::from_fn(p, |_, _| (rng.random_range(-2.0..2.0f64)).exp());
    &q * DMatrix::from_diagonal(&eig) * q.transpose()
}

/// Random valid component parameters in `p` dimensions.
pub fn random_params(p: usize, skewed: bool, dof: Option<f64>, rng: &mut ChaCha20Rng) -> ComponentParams {
    let location = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
    let mut scale = random_spd(p, rng);
    scale = (&scale + scale.transpose()) * 0.5;
    let skew = if skewed {
        DVector::from_fn(p, |_, _| rng.random_range(-3.0..3.0))
    } else {
        DVector::zeros(p)
    };
    ComponentParams::new(location, scale, skew, dof).expect("valid params")
}

/// One draw of `ξ + λ|U| + X` straight from the hierarchical representation.
pub fn draw_representation(params: &ComponentParams, rng: &mut ChaCha20Rng) -> DVector<f64> {
    let p = params.dim();
    let w = params.dof.map_or(1.0, |nu| Gamma::new(0.5 * nu, 2.0 / nu).unwrap().sample(rng));
    let l = params.scale.clone().cholesky().unwrap().l();
    let u = rng.sample::<f64, _>(StandardNormal).abs() / w.sqrt();
    let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    &params.location + &params.skew * u + l * z / w.sqrt()
}

/// Worst |z-score| of the library's latent moments against [`mc_latent`]
/// over `instances` random (y, params), half skew-normal and half skew-t,
/// with `p` cycling through 1..=3. Also returns the number of moments
/// outside 3 standard errors.
pub fn latent_mc_suite(instances: usize, draws: usize, seed: u64) -> (f64, usize, usize) {
    use rand::SeedableRng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut outside = 0;
    let mut checked = 0;
    for k in 0..instances {
        let p = 1 + k % 3;
        let dof = (k % 2 == 1).then(|| rng.random_range(3.0..30.0));
        let params = random_params(p, true, dof, &mut rng);
        let y = draw_representation(&params, &mut rng);
        let lm = skewclust::distributions::latent_moments(&y, &params).unwrap();
        let (mean, se) = mc_latent(&y, &params, draws, &mut rng);
        let got = [lm.e_w, lm.e_wu, lm.e_wu2, lm.e_logw];
        let moments = if dof.is_some() { 0..4 } else { 1..3 };
        for m in moments {
            let z = (got[m] - mean[m]).abs() / se[m].max(1e-300);
            checked += 1;
            if z > 3.0 {
                outside += 1;
            }
            worst = worst.max(z);
        }
    }
    (worst, outside, checked)
}

/// Largest `solver - Nelder–Mead` objective gap over random scatter sets
/// (g ≤ 3, p ≤ 3). The oracle starts from the solver output, from perturbed
/// copies of it, and from a neutral point; a positive gap means the generic
/// optimiser found a better constrained solution.
pub fn scale_oracle_suite(model: ScaleModel, instances: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    use skewclust::scale::{solve_scale, ScatterSet};
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..instances {
        let g = 1 + k % 3;
        let p = 2 + (k / 3) % 2;
        let sizes: Vec<f64> = (0..g).map(|_| rng.random_range(8.0..40.0)).collect();
        let scatters: Vec<DMatrix<f64>> = sizes.iter().map(|n| random_spd(p, &mut rng) * *n).collect();
        let set = ScatterSet::new(scatters.clone(), sizes.clone()).unwrap();
        let sol = solve_scale(model, &set).unwrap();
        let solver = scale_objective(&scatters, &sizes, &sol.scales);
        let param = ScaleParametrization::new(model, g, p);
        let f = |theta: &[f64]| scale_objective(&scatters, &sizes, &param.scales(theta));
        let from_sol = param.from_solution(&sol);
        let mut best = f(&from_sol);
        let mut starts = vec![from_sol.clone(), vec![0.0; param.len()]];
        for _ in 0..3 {
            starts.push(from_sol.iter().map(|t| t + rng.random_range(-0.3..0.3)).collect());
        }
        for x0 in starts {
            let (mut x, mut fx) = nelder_mead(f, &x0, 0.2, 20_000, 1e-14);
            // restart from the optimum to escape simplex collapse
            for _ in 0..3 {
                let (x2, f2) = nelder_mead(f, &x, 0.05, 20_000, 1e-15);
                if f2 >= fx - 1e-12 {
                    break;
                }
                x = x2;
                fx = f2;
            }
            best = best.min(fx);
        }
        worst = worst.max(solver - best);
    }
    worst
}

/// `∫ exp(ln_density)` over the real line (p = 1) or plane (p = 2), after the
/// substitution `y = c + s tan θ` which maps the whole space to a box.
pub fn total_mass(params: &ComponentParams, n: usize) -> f64 {
    let p = params.dim();
    let half = std::f64::consts::FRAC_PI_2 - 1e-9;
    let (nodes, weights) = simpson_nodes(-half, half, n);
    let centre = params.mean();
    let spread: Vec<f64> = (0..p).map(|k| (params.scale[(k, k)] + params.skew[k].powi(2)).sqrt()).collect();
    let map = |t: f64, k: usize| (centre[k] + spread[k] * t.tan(), spread[k] / t.cos().powi(2));
    let dens = |y: DVector<f64>| skewclust::distributions::ln_density(&y, params).unwrap().exp();
    match p {
        1 => nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| {
                let (y, jac) = map(t, 0);
                w * jac * dens(DVector::from_element(1, y))
            })
            .sum(),
        2 => {
            let mut total = 0.0;
            for (&t1, &w1) in nodes.iter().zip(&weights) {
                let (y1, j1) = map(t1, 0);
                for (&t2, &w2) in nodes.iter().zip(&weights) {
                    let (y2, j2) = map(t2, 1);
                    total += w1 * w2 * j1 * j2 * dens(DVector::from_vec(vec![y1, y2]));
                }
            }
            total
        }
        _ => panic!("total_mass supports p = 1, 2"),
    }
}

/// Table 1 of the scale-constraint family as printed, except EVE, whose
/// printed `- (G-1)(p-1)` is replaced by the direct count `+ (G-1)(p-1)`.
pub fn table_one(model: ScaleModel, g: usize, p: usize) -> usize {
    let (g, p) = (g as i64, p as i64);
    let full = p * (p + 1) / 2;
    let n = match model {
        ScaleModel::EII => 1,
        ScaleModel::VII => g,
        ScaleModel::EEI => p,
        ScaleModel::VEI => g + (p - 1),
        ScaleModel::EVI => g * p - (g - 1),
        ScaleModel::VVI => g * p,
        ScaleModel::EEE => full,
        ScaleModel::VEE => full + (g - 1),
        ScaleModel::EVE => full + (g - 1) * (p - 1),
        ScaleModel::VVE => full + (g - 1) * p,
        ScaleModel::EEV => g * full - (g - 1) * p,
        ScaleModel::VEV => g * full - (g - 1) * (p - 1),
        ScaleModel::EVV => g * full - (g - 1),
        ScaleModel::VVV => g * full,
    };
    n as usize
}
