//! BIC model selection, the adjusted Rand index and component merging.

mod merge;
mod partition;

pub use merge::{
    merge_by_hand, merge_entropy, merge_entropy_responsibilities, MergeStep, MergeTree, MAX_HAND_MERGE,
};
pub use partition::{ari, ari_from_table, contingency, Partition};

use std::cmp::Ordering;

use crate::em::{Family, MixtureFit};
use crate::error::{Error, Result};
use crate::scale::ScaleModel;

/// `2 l - m ln n`; larger is better.
pub fn bic(loglik: f64, n_params: usize, n: usize) -> f64 {
    2.0 * loglik - n_params as f64 * (n as f64).ln()
}

/// What [`select_best_by`] compares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionKey {
    pub bic: f64,
    pub n_params: usize,
    pub g: usize,
    pub model: ScaleModel,
    pub family: Family,
}

impl SelectionKey {
    /// `Less` means `self` is preferred: larger BIC, then fewer parameters,
    /// lower g, model order, family order.
    pub fn preference(&self, other: &Self) -> Ordering {
        other
            .bic
            .total_cmp(&self.bic)
            .then(self.n_params.cmp(&other.n_params))
            .then(self.g.cmp(&other.g))
            .then(self.model.cmp(&other.model))
            .then(self.family.cmp(&other.family))
    }
}

/// Index of the preferred item; independent of input order up to exact key ties.
pub fn select_best_by<T>(items: &[T], key: impl Fn(&T) -> SelectionKey) -> Result<usize> {
    let mut best: Option<(usize, SelectionKey)> = None;
    for (i, item) in items.iter().enumerate() {
        let k = key(item);
        if best.is_none_or(|(_, b)| k.preference(&b) == Ordering::Less) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::Input("no fits to select from".into()))
}

impl MixtureFit {
    pub fn selection_key(&self) -> SelectionKey {
        SelectionKey {
            bic: self.bic,
            n_params: self.n_params,
            g: self.g(),
            model: self.params.model,
            family: self.params.family,
        }
    }
}

/// The fit with the largest BIC (ties: fewer parameters, lower g, model name).
pub fn select_best(fits: &[MixtureFit]) -> Result<&MixtureFit> {
    select_best_by(fits, MixtureFit::selection_key).map(|i| &fits[i])
}
