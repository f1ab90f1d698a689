use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::ComponentParams;
use crate::error::{Error, Result};
use crate::linalg;

/// Draw `n` observations (rows) from the skew-t (or skew-normal when `dof` is
/// `None`) via its stochastic representation. Deterministic given `seed`.
pub fn sample_skewt(params: &ComponentParams, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_into(params, n, &mut rng)
}

pub fn sample_into<R: Rng + ?Sized>(
    params: &ComponentParams,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Input("sample size must be at least 1".into()));
    }
    params.validate()?;
    let p = params.dim();
    let l = linalg::cholesky_lower(&params.scale, "scale matrix")?;
    let gamma = match params.dof {
        Some(nu) => Some(
            Gamma::new(0.5 * nu, 2.0 / nu)
                .map_err(|e| Error::Domain(format!("gamma mixing distribution: {e}")))?,
        ),
        None => None,
    };
    let mut out = DMatrix::zeros(n, p);
    let mut z = DVector::zeros(p);
    for i in 0..n {
        let w: f64 = gamma.as_ref().map_or(1.0, |g| g.sample(rng));
        let inv_sqrt_w = 1.0 / w.sqrt();
        let u: f64 = rng.sample::<f64, _>(StandardNormal).abs() * inv_sqrt_w;
        for zk in z.iter_mut() {
            *zk = rng.sample(StandardNormal);
        }
        let x = &l * &z;
        for k in 0..p {
            out[(i, k)] = params.location[k] + params.skew[k] * u + x[k] * inv_sqrt_w;
        }
    }
    Ok(out)
}
