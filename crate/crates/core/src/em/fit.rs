use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::estep::{e_step_rows, EStep};
use super::init::initialize_rows;
use super::mstep::{check_sizes, initial_mixture, m_step_rows};
use super::{count_params, Family, FitConfig, Mixture, MixtureFit, Rows, StartRecord};
use crate::error::{Error, Result};
use crate::scale::ScaleModel;
use crate::select::bic;

/// Multi-start EM clustering with `g` components.
///
/// Runs one EM per distinct initial partition (starts whose initialisation
/// repeats an earlier one are recorded as duplicates and skipped) and returns
/// the start with the largest final log-likelihood.
pub fn fit(data: &DMatrix<f64>, g: usize, model: ScaleModel, family: Family, config: &FitConfig) -> Result<MixtureFit> {
    config.validate()?;
    let rows = Rows::new(data)?;
    if g == 0 {
        return Err(Error::Input("number of components must be at least 1".into()));
    }
    if rows.n <= g * (rows.p + 1) {
        return Err(Error::Input(format!(
            "{} observations are too few for {g} components in {} dimensions",
            rows.n, rows.p
        )));
    }

    let mut records = Vec::with_capacity(config.n_starts);
    let mut seen: Vec<(Vec<u64>, usize)> = Vec::new();
    let mut best: Option<(usize, EmRun)> = None;
    for start in 0..config.n_starts {
        let clock = Instant::now();
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        rng.set_stream(start as u64);
        let mut record = StartRecord {
            start,
            loglik: None,
            iterations: 0,
            converged: false,
            duplicate_of: None,
            failure: None,
            wall_time_s: 0.0,
        };
        let z0 = match initialize_rows(&rows, g, &config.init, &mut rng) {
            Ok(z) => z,
            Err(e) => {
                record.failure = Some(e.to_string());
                record.wall_time_s = clock.elapsed().as_secs_f64();
                records.push(record);
                continue;
            }
        };
        let key = init_key(&z0);
        if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
            record.duplicate_of = Some(*first);
            records.push(record);
            continue;
        }
        seen.push((key, start));
        match run_em(&rows, &z0, family, model, config, None) {
            Ok(run) => {
                record.loglik = Some(run.estep.loglik);
                record.iterations = run.trace.len();
                record.converged = run.converged;
                if best.as_ref().is_none_or(|(_, b)| run.estep.loglik > b.estep.loglik) {
                    best = Some((start, run));
                }
            }
            Err(e) => record.failure = Some(tag_start(e, start).to_string()),
        }
        record.wall_time_s = clock.elapsed().as_secs_f64();
        records.push(record);
    }
    match best {
        Some((_, run)) => Ok(assemble(run, &rows, config, records)),
        None => Err(Error::AllStartsFailed(
            records
                .iter()
                .filter_map(|r| r.failure.as_ref().map(|f| format!("start {}: {f}", r.start)))
                .collect(),
        )),
    }
}

/// Semi-supervised classification. `labels[j] = Some(i)` (0-based) fixes row
/// `j` to component `i` in every E-step; unlabelled rows start from uniform
/// responsibilities `1/g`. The objective is the classification log-likelihood
/// `Σ_labelled ln π_i f_i(y_j) + Σ_unlabelled ln Σ_i π_i f_i(y_j)`.
pub fn classify(
    data: &DMatrix<f64>,
    labels: &[Option<usize>],
    g: usize,
    model: ScaleModel,
    family: Family,
    config: &FitConfig,
) -> Result<MixtureFit> {
    config.validate()?;
    let rows = Rows::new(data)?;
    if labels.len() != rows.n {
        return Err(Error::Input(format!("{} labels for {} observations", labels.len(), rows.n)));
    }
    let mut present = vec![false; g];
    for l in labels.iter().flatten() {
        if *l >= g {
            return Err(Error::Input(format!("label {} outside 1..{g}", l + 1)));
        }
        present[*l] = true;
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(Error::Input(format!("class {} has no labelled observation", missing + 1)));
    }
    let mut z0 = DMatrix::from_element(rows.n, g, 1.0 / g as f64);
    for (j, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            z0.row_mut(j).fill(0.0);
            z0[(j, *l)] = 1.0;
        }
    }
    let clock = Instant::now();
    let run = run_em(&rows, &z0, family, model, config, Some(labels)).map_err(|e| tag_start(e, 0))?;
    let record = StartRecord {
        start: 0,
        loglik: Some(run.estep.loglik),
        iterations: run.trace.len(),
        converged: run.converged,
        duplicate_of: None,
        failure: None,
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    Ok(assemble(run, &rows, config, vec![record]))
}

/// A random subset of known labels containing roughly `fraction` of each
/// class and at least one member of every class present.
pub fn stratified_known_labels(labels: &[usize], fraction: f64, seed: u64) -> Result<Vec<Option<usize>>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Input(format!("known fraction {fraction} must lie in (0, 1]")));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut known = vec![None; labels.len()];
    for class in 0..k {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == class).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len());
        for &j in &members[..take] {
            known[j] = Some(class);
        }
    }
    Ok(known)
}

struct EmRun {
    mixture: Mixture,
    estep: EStep,
    trace: Vec<f64>,
    converged: bool,
    warnings: Vec<String>,
}

fn run_em(
    rows: &Rows,
    z0: &DMatrix<f64>,
    family: Family,
    model: ScaleModel,
    config: &FitConfig,
    fixed: Option<&[Option<usize>]>,
) -> Result<EmRun> {
    let (mut mixture, mut warnings) = initial_mixture(rows, z0, family, model, config)?;
    let mut trace = Vec::new();
    loop {
        let estep = e_step_rows(rows, &mixture, fixed)?;
        check_sizes(&estep.responsibilities, rows.p)?;
        trace.push(estep.loglik);
        let converged = aitken_converged(&trace, config.tol);
        if converged || trace.len() >= config.max_iter {
            return Ok(EmRun {
                mixture,
                estep,
                trace,
                converged,
                warnings,
            });
        }
        let m = m_step_rows(rows, &estep.responsibilities, &estep.latents, family, model, config, Some(&mixture.scale))?;
        warnings.extend(m.warnings);
        mixture = m.mixture;
    }
}

/// Aitken asymptotic estimate from three consecutive log-likelihoods:
/// `a = (l2 - l1) / (l1 - l0)`, `l_∞ = l1 + (l2 - l1) / (1 - a)`, defined for `0 ≤ a < 1`.
fn aitken_limit(l0: f64, l1: f64, l2: f64) -> Option<f64> {
    let prev = l1 - l0;
    if prev == 0.0 {
        return None;
    }
    let a = (l2 - l1) / prev;
    (0.0..1.0).contains(&a).then(|| l1 + (l2 - l1) / (1.0 - a))
}

/// Aitken-accelerated stopping rule: EM stops once the asymptotic estimate
/// `l_∞` changes by less than `tol` between consecutive iterations. A
/// negligible last increment also stops.
pub(crate) fn aitken_converged(trace: &[f64], tol: f64) -> bool {
    let k = trace.len();
    if k >= 2 && (trace[k - 1] - trace[k - 2]).abs() <= 1e-3 * tol {
        return true;
    }
    if k < 4 {
        return false;
    }
    let t = &trace[k - 4..];
    match (aitken_limit(t[0], t[1], t[2]), aitken_limit(t[1], t[2], t[3])) {
        (Some(before), Some(now)) => (now - before).abs() < tol,
        _ => false,
    }
}

fn tag_start(e: Error, start: usize) -> Error {
    match e {
        Error::Collapse {
            component, size, min, ..
        } => Error::Collapse {
            start: Some(start),
            component,
            size,
            min,
        },
        other => other,
    }
}

/// Identity of an initialisation: hard partitions compare up to relabelling.
fn init_key(z: &DMatrix<f64>) -> Vec<u64> {
    if z.iter().all(|&v| v == 0.0 || v == 1.0) {
        let mut map: Vec<Option<u64>> = vec![None; z.ncols()];
        let mut next = 0;
        let mut key = vec![u64::MAX];
        for row in z.row_iter() {
            let l = row.iter().position(|&v| v == 1.0).unwrap_or(0);
            let c = *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            });
            key.push(c);
        }
        key
    } else {
        z.iter().map(|v| v.to_bits()).collect()
    }
}

fn assemble(run: EmRun, rows: &Rows, config: &FitConfig, starts: Vec<StartRecord>) -> MixtureFit {
    let EmRun {
        mixture,
        estep,
        trace,
        converged,
        warnings,
    } = run;
    let n_params = count_params(mixture.family, mixture.model, mixture.g(), rows.p, config.constrain_dof_equal);
    let mut unique = Vec::new();
    for w in warnings {
        if !unique.contains(&w) {
            unique.push(w);
        }
    }
    MixtureFit {
        bic: bic(estep.loglik, n_params, rows.n),
        loglik: estep.loglik,
        iterations: trace.len(),
        loglik_trace: trace,
        responsibilities: estep.responsibilities,
        params: mixture,
        n_params,
        n_obs: rows.n,
        converged,
        warnings: unique,
        starts,
    }
}
