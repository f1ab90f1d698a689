//! Parsimonious mixtures of multivariate skew-normal and skew-t distributions.
//!
//! The crate covers the full modelling pipeline: component densities and
//! samplers, the fourteen eigen-decomposed scale constraints, EM estimation for
//! clustering and semi-supervised classification, BIC model selection, the
//! adjusted Rand index and component merging, simulation designs and CSV/report
//! I/O.

pub mod distributions;
pub mod em;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod report;
pub mod scale;
pub mod select;
pub mod simgen;
pub mod special;

pub use error::{Error, Result};
