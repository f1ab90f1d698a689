use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A hard partition of `n` items into `k` groups, labels `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Input(format!("label {bad} outside 0..{k}")));
        }
        Ok(Self { labels, k })
    }

    /// Partition with `k = max label + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self { labels, k }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of non-empty groups.
    pub fn n_groups(&self) -> usize {
        let mut seen = vec![false; self.k];
        self.labels.iter().for_each(|&l| seen[l] = true);
        seen.into_iter().filter(|s| *s).count()
    }
}

/// Contingency table `t[r][c]` counting items with label `r` in `a` and `c` in `b`.
pub fn contingency(a: &Partition, b: &Partition) -> Result<Vec<Vec<f64>>> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "partitions have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mut table = vec![vec![0.0; b.k]; a.k];
    for (&ra, &rb) in a.labels.iter().zip(&b.labels) {
        table[ra][rb] += 1.0;
    }
    Ok(table)
}

fn choose2(x: f64) -> f64 {
    0.5 * x * (x - 1.0)
}

/// Adjusted Rand index of a contingency table.
pub fn ari_from_table(table: &[Vec<f64>]) -> f64 {
    let cols = table.first().map_or(0, Vec::len);
    let n: f64 = table.iter().flatten().sum();
    let index: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
    let rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..cols).map(|c| choose2(table.iter().map(|r| r[c]).sum())).sum();
    let expected = rows * cols / choose2(n);
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Adjusted Rand index between two partitions of the same items.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    Ok(ari_from_table(&contingency(a, b)?))
}
