//! Reproducible mixture samples, including the three built-in simulation designs.
//!
//! Streams: component `c` (0-based) is drawn from `ChaCha20Rng` seeded with the
//! design seed on stream `c + 1`; the final row shuffle uses stream 0. ChaCha20
//! is portable, so datasets are bit-identical across platforms.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_into, ComponentParams};
use crate::em::Family;
use crate::error::{Error, Result};
use crate::select::Partition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimComponent {
    pub size: usize,
    pub family: Family,
    pub params: ComponentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub components: Vec<SimComponent>,
    pub seed: u64,
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Input("design has no components".into()));
        }
        let p = self.components[0].params.dim();
        for (c, comp) in self.components.iter().enumerate() {
            let label = c + 1;
            if comp.size == 0 {
                return Err(Error::Input(format!("component {label} has size 0")));
            }
            comp.params.validate()?;
            if comp.params.dim() != p {
                return Err(Error::Input(format!("component {label} has dimension {}, expected {p}", comp.params.dim())));
            }
            if comp.family.has_dof() != comp.params.dof.is_some() {
                return Err(Error::Input(format!(
                    "component {label}: degrees of freedom do not match family {}",
                    comp.family
                )));
            }
            if !comp.family.is_skewed() && comp.params.skew.iter().any(|&s| s != 0.0) {
                return Err(Error::Input(format!(
                    "component {label}: family {} must have zero skewness",
                    comp.family
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.components.iter().map(|c| c.size).sum()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.params.dim())
    }
}

fn component(size: usize, family: Family, xi: DVector<f64>, omega: DMatrix<f64>, skew: DVector<f64>, dof: Option<f64>) -> SimComponent {
    SimComponent {
        size,
        family,
        params: ComponentParams {
            location: xi,
            scale: omega,
            skew,
            dof,
        },
    }
}

/// Default third design: two three-dimensional skew-t groups sharing a
/// location, elongated along crossing axes in the x-y plane and skewed in
/// opposite senses, which overlap in an X shape.
pub fn sim3_components() -> Vec<SimComponent> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u1 = dvector![s, s, 0.0];
    let u2 = dvector![s, -s, 0.0];
    let e3 = dvector![0.0, 0.0, 1.0];
    let (long, short, depth) = (2.0, 0.15, 0.5);
    let outer = |v: &DVector<f64>| v * v.transpose();
    let mut omega1 = outer(&u1) * long + outer(&u2) * short + outer(&e3) * depth;
    let mut omega2 = outer(&u2) * long + outer(&u1) * short + outer(&e3) * depth;
    crate::linalg::symmetrize(&mut omega1);
    crate::linalg::symmetrize(&mut omega2);
    let skew = 3.0;
    vec![
        component(100, Family::SkewT, DVector::zeros(3), omega1, &u1 * skew, Some(6.0)),
        component(100, Family::SkewT, DVector::zeros(3), omega2, &u2 * -skew, Some(6.0)),
    ]
}

/// One of the built-in designs `sim1`, `sim2`, `sim3`.
pub fn builtin_design(name: &str, seed: u64) -> Result<SimDesign> {
    let components = match name.trim().to_ascii_lowercase().as_str() {
        "sim1" => vec![
            component(300, Family::Gaussian, dvector![3.0, 0.0], DMatrix::identity(2, 2), DVector::zeros(2), None),
            component(200, Family::T, dvector![-2.0, 4.0], dmatrix![1.0, 0.5; 0.5, 1.0], DVector::zeros(2), Some(4.0)),
        ],
        "sim2" => vec![
            component(150, Family::SkewT, dvector![0.0, 0.0], dmatrix![0.4, 0.2; 0.2, 0.5], dvector![2.0, 4.0], Some(10.0)),
            component(200, Family::SkewT, dvector![6.0, 25.0], dmatrix![1.0, 0.5; 0.5, 1.0], dvector![-2.0, 4.0], Some(8.0)),
            component(150, Family::SkewT, dvector![4.0, 0.0], dmatrix![0.2, 0.0; 0.0, 0.3], dvector![2.0, 4.0], Some(70.0)),
        ],
        "sim3" => sim3_components(),
        other => return Err(Error::Input(format!("unknown design '{other}' (expected sim1, sim2 or sim3)"))),
    };
    Ok(SimDesign { components, seed })
}

/// Draw the design: component blocks in order, then a seeded row shuffle.
/// Returns the data and the source component of each row.
pub fn generate(design: &SimDesign) -> Result<(DMatrix<f64>, Partition)> {
    design.validate()?;
    let (n, p) = (design.n(), design.dim());
    let mut blocks = DMatrix::zeros(n, p);
    let mut source = Vec::with_capacity(n);
    let mut offset = 0;
    for (c, comp) in design.components.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(design.seed);
        rng.set_stream(c as u64 + 1);
        let block = sample_into(&comp.params, comp.size, &mut rng)?;
        blocks.rows_mut(offset, comp.size).copy_from(&block);
        source.extend(std::iter::repeat_n(c, comp.size));
        offset += comp.size;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(design.seed);
    rng.set_stream(0);
    order.shuffle(&mut rng);
    let data = DMatrix::from_fn(n, p, |j, k| blocks[(order[j], k)]);
    let truth = Partition::new(order.iter().map(|&j| source[j]).collect(), design.components.len())?;
    Ok((data, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim1_second_component_matches_paper() {
        let d = builtin_design("sim1", 1).unwrap();
        let c = &d.components[1];
        assert_eq!(c.family, Family::T);
        assert_eq!(c.size, 200);
        assert_eq!(c.params.dof, Some(4.0));
        assert_eq!(c.params.location, dvector![-2.0, 4.0]);
        assert_eq!(c.params.scale, dmatrix![1.0, 0.5; 0.5, 1.0]);
    }

    #[test]
    fn sim2_third_component_is_nearly_skew_normal() {
        let d = builtin_design("sim2", 1).unwrap();
        assert_eq!(d.components[2].params.dof, Some(70.0));
        assert_eq!(d.n(), 500);
    }

    #[test]
    fn same_seed_same_data() {
        for name in ["sim1", "sim2", "sim3"] {
            let a = generate(&builtin_design(name, 9).unwrap()).unwrap();
            let b = generate(&builtin_design(name, 9).unwrap()).unwrap();
            assert_eq!(a, b);
            let c = generate(&builtin_design(name, 10).unwrap()).unwrap();
            assert_ne!(a.0, c.0);
        }
    }

    #[test]
    fn single_component_truth_is_all_first() {
        let mut d = builtin_design("sim1", 2).unwrap();
        d.components.truncate(1);
        let (_, truth) = generate(&d).unwrap();
        assert!(truth.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn sim1_first_component_mean() {
        let (data, truth) = generate(&builtin_design("sim1", 5).unwrap()).unwrap();
        for k in 0..2 {
            let vals: Vec<f64> = (0..data.nrows()).filter(|&j| truth.labels()[j] == 0).map(|j| data[(j, k)]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((mean - [3.0, 0.0][k]).abs() < 0.2, "{mean}");
        }
    }

    #[test]
    fn sim2_skewness_signs_follow_design() {
        let design = builtin_design("sim2", 3).unwrap();
        let (data, truth) = generate(&design).unwrap();
        for (c, comp) in design.components.iter().enumerate() {
            for k in 0..2 {
                let vals: Vec<f64> = (0..data.nrows()).filter(|&j| truth.labels()[j] == c).map(|j| data[(j, k)]).collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let third: f64 = vals.iter().map(|v| (v - m).powi(3)).sum();
                assert_eq!(third.signum(), comp.params.skew[k].signum(), "component {c} coord {k}");
            }
        }
    }

    #[test]
    fn unknown_design_and_bad_family_rejected() {
        assert!(matches!(builtin_design("sim4", 1), Err(Error::Input(_))));
        let mut d = builtin_design("sim1", 1).unwrap();
        d.components[0].params.skew[0] = 1.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn design_serde_round_trip() {
        let d = builtin_design("sim3", 4).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<SimDesign>(&json).unwrap(), d);
    }
}
