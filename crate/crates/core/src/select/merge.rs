use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::partition::{ari, ari_from_table, contingency, Partition};
use crate::em::{map_labels, MixtureFit};
use crate::error::{Error, Result};

/// Largest number of source groups accepted by [`merge_by_hand`].
pub const MAX_HAND_MERGE: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    /// 1-based; the step leaves `g - step` groups.
    pub step: usize,
    /// Indices of the merged pair among the groups present before this step.
    pub merged: (usize, usize),
    /// Original components making up each remaining group.
    pub groups: Vec<Vec<usize>>,
    /// MAP labels over the remaining groups.
    pub labels: Vec<usize>,
    /// Total soft-assignment entropy after the merge.
    pub entropy: f64,
    /// Entropy decrease achieved by this merge.
    pub decrease: f64,
}

/// Successive entropy-driven merges from `g` groups down to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    pub g: usize,
    pub initial_labels: Vec<usize>,
    pub initial_entropy: f64,
    pub steps: Vec<MergeStep>,
}

impl MergeTree {
    /// Best ARI against `truth` over the unmerged solution and every merge
    /// step, as `(step, ari)` with step 0 for the unmerged solution. Requires
    /// true labels, so it is an evaluation device only.
    pub fn best_ari(&self, truth: &Partition) -> Result<(usize, f64)> {
        let mut best = (0, ari(&Partition::from_labels(self.initial_labels.clone()), truth)?);
        for s in &self.steps {
            let a = ari(&Partition::from_labels(s.labels.clone()), truth)?;
            if a > best.1 {
                best = (s.step, a);
            }
        }
        Ok(best)
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn entropy(cols: &[Vec<f64>]) -> f64 {
    0.0 - cols.iter().flatten().map(|&z| xlogx(z)).sum::<f64>()
}

/// Entropy merging of a fitted mixture's components.
pub fn merge_entropy(fit: &MixtureFit) -> MergeTree {
    merge_entropy_responsibilities(&fit.responsibilities)
}

/// At each step merge the pair whose pooled column most reduces the total
/// entropy `-Σ_j Σ_i z_ji ln z_ji`; ties go to the lowest pair.
pub fn merge_entropy_responsibilities(z: &DMatrix<f64>) -> MergeTree {
    let g = z.ncols();
    let mut cols: Vec<Vec<f64>> = z.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut groups: Vec<Vec<usize>> = (0..g).map(|i| vec![i]).collect();
    let initial_entropy = entropy(&cols);
    let mut steps = Vec::new();
    for step in 1..g {
        let k = cols.len();
        let mut best: Option<((usize, usize), f64)> = None;
        for a in 0..k {
            for b in (a + 1)..k {
                let dec: f64 = cols[a]
                    .iter()
                    .zip(&cols[b])
                    .map(|(&x, &y)| xlogx(x + y) - xlogx(x) - xlogx(y))
                    .sum();
                if best.is_none_or(|(_, d)| dec > d) {
                    best = Some(((a, b), dec));
                }
            }
        }
        let ((a, b), dec) = best.expect("at least two groups");
        let removed = cols.remove(b);
        cols[a].iter_mut().zip(removed).for_each(|(x, y)| *x += y);
        let moved = groups.remove(b);
        groups[a].extend(moved);
        groups[a].sort_unstable();
        let merged = DMatrix::from_fn(z.nrows(), cols.len(), |j, i| cols[i][j]);
        steps.push(MergeStep {
            step,
            merged: (a, b),
            groups: groups.clone(),
            labels: map_labels(&merged),
            entropy: entropy(&cols),
            decrease: dec,
        });
    }
    MergeTree {
        g,
        initial_labels: map_labels(z),
        initial_entropy,
        steps,
    }
}

/// Exhaustive column merging of `pred` maximising ARI against `truth`.
///
/// Searches every set partition of pred's groups into at most `truth.k()`
/// blocks, plus the identity merge. Returns the merged partition and its ARI.
/// Needs the true labels, so it is an evaluation device only.
pub fn merge_by_hand(pred: &Partition, truth: &Partition) -> Result<(Partition, f64)> {
    let k = pred.k();
    if k > MAX_HAND_MERGE {
        return Err(Error::Input(format!(
            "merge by hand supports at most {MAX_HAND_MERGE} groups, got {k}"
        )));
    }
    let table = contingency(pred, truth)?;
    let mut best_assign: Vec<usize> = (0..k).collect();
    let mut best_ari = ari_from_table(&table);
    let max_blocks = truth.k().max(1);
    let mut assign = vec![0usize; k];
    let mut visit = |assign: &[usize], blocks: usize| {
        let mut merged = vec![vec![0.0; table.first().map_or(0, Vec::len)]; blocks];
        for (src, &blk) in assign.iter().enumerate() {
            merged[blk].iter_mut().zip(&table[src]).for_each(|(m, t)| *m += t);
        }
        let a = ari_from_table(&merged);
        if a > best_ari {
            best_ari = a;
            best_assign = assign.to_vec();
        }
    };
    if k > 0 {
        restricted_growth(&mut assign, 1, 1, max_blocks, &mut visit);
    }
    let blocks = best_assign.iter().max().map_or(0, |m| m + 1);
    let labels = pred.labels().iter().map(|&l| best_assign[l]).collect();
    Ok((Partition::new(labels, blocks)?, best_ari))
}

/// Enumerate set partitions as restricted growth strings with at most `max` blocks.
fn restricted_growth(
    assign: &mut [usize],
    pos: usize,
    used: usize,
    max: usize,
    visit: &mut impl FnMut(&[usize], usize),
) {
    if pos == assign.len() {
        visit(assign, used);
        return;
    }
    for b in 0..used.min(max) {
        assign[pos] = b;
        restricted_growth(assign, pos + 1, used, max, visit);
    }
    if used < max {
        assign[pos] = used;
        restricted_growth(assign, pos + 1, used + 1, max, visit);
    }
}
