use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};

use super::{InitStrategy, Rows};
use crate::error::{Error, Result};

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 100;
const MAX_RESEEDS: usize = 10;

/// Initial `n × g` responsibilities.
pub fn initialize(data: &DMatrix<f64>, g: usize, strategy: &InitStrategy, seed: u64) -> Result<DMatrix<f64>> {
    let rows = Rows::new(data)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    initialize_rows(&rows, g, strategy, &mut rng)
}

pub(crate) fn initialize_rows(rows: &Rows, g: usize, strategy: &InitStrategy, rng: &mut ChaCha20Rng) -> Result<DMatrix<f64>> {
    if g == 0 {
        return Err(Error::Input("number of components must be at least 1".into()));
    }
    match strategy {
        InitStrategy::Uniform => Ok(DMatrix::from_element(rows.n, g, 1.0 / g as f64)),
        InitStrategy::RandomPosterior => {
            let mut z = DMatrix::zeros(rows.n, g);
            for j in 0..rows.n {
                let draws: Vec<f64> = (0..g).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = draws.iter().sum();
                for i in 0..g {
                    z[(j, i)] = draws[i] / total;
                }
            }
            Ok(z)
        }
        InitStrategy::KMeans => one_hot(&kmeans_rows(rows, g, rng)?, g),
        InitStrategy::GivenLabels(labels) => {
            if labels.len() != rows.n {
                return Err(Error::Input(format!(
                    "{} initial labels for {} observations",
                    labels.len(),
                    rows.n
                )));
            }
            one_hot(labels, g)
        }
    }
}

pub(crate) fn one_hot(labels: &[usize], g: usize) -> Result<DMatrix<f64>> {
    let mut z = DMatrix::zeros(labels.len(), g);
    for (j, &l) in labels.iter().enumerate() {
        if l >= g {
            return Err(Error::Input(format!("label {} outside 1..{g}", l + 1)));
        }
        z[(j, l)] = 1.0;
    }
    Ok(z)
}

/// Row-wise argmax; ties go to the lower index.
pub fn map_labels(responsibilities: &DMatrix<f64>) -> Vec<usize> {
    responsibilities
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &z) in row.iter().enumerate() {
                if z > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Hard k-means labels: best within-cluster sum of squares over ten
/// k-means++ seeded Lloyd runs.
pub fn kmeans(data: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let rows = Rows::new(data)?;
    kmeans_rows(&rows, k, &mut ChaCha20Rng::seed_from_u64(seed))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn kmeans_rows(rows: &Rows, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if k == 0 || k > rows.n {
        return Err(Error::Input(format!("cannot form {k} clusters from {} observations", rows.n)));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (wss, labels) = lloyd(rows, k, rng)?;
        if best.as_ref().is_none_or(|(b, _)| wss < *b) {
            best = Some((wss, labels));
        }
    }
    Ok(best.expect("at least one restart").1)
}

fn plus_plus(rows: &Rows, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![rows.row(rng.random_range(0..rows.n)).to_vec()];
    let mut d2: Vec<f64> = (0..rows.n).map(|j| sq_dist(rows.row(j), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = rows.n - 1;
            for (j, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = j;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..rows.n)
        };
        let c = rows.row(next).to_vec();
        for (j, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(rows.row(j), &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(rows: &Rows, k: usize, rng: &mut impl Rng) -> Result<(f64, Vec<usize>)> {
    let p = rows.p;
    let mut centers = plus_plus(rows, k, rng);
    let mut labels = vec![usize::MAX; rows.n];
    let mut reseeds = 0;
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (j, label) in labels.iter_mut().enumerate() {
            let y = rows.row(j);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(y, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (j, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            sums[l].iter_mut().zip(rows.row(j)).for_each(|(s, y)| *s += y);
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            reseeds += 1;
            if reseeds > MAX_RESEEDS {
                return Err(Error::EmptyCluster(MAX_RESEEDS));
            }
            // move the empty centre to the point farthest from its own centre
            let far = (0..rows.n)
                .max_by(|&a, &b| {
                    sq_dist(rows.row(a), &centers[labels[a]]).total_cmp(&sq_dist(rows.row(b), &centers[labels[b]]))
                })
                .expect("non-empty data");
            centers[empty] = rows.row(far).to_vec();
            continue;
        }
        for c in 0..k {
            centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        if !changed {
            break;
        }
    }
    let wss = (0..rows.n).map(|j| sq_dist(rows.row(j), &centers[labels[j]])).sum();
    Ok((wss, labels))
}
