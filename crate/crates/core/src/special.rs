//! Scalar special functions: normal and Student-t log CDFs with tail handling,
//! gamma-family helpers.

use statrs::function::gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const LN_2: f64 = std::f64::consts::LN_2;

/// Below this argument `ln Φ` and `φ/Φ` switch to the asymptotic expansion.
pub const NORMAL_TAIL_CUTOFF: f64 = -37.0;

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn digamma(x: f64) -> f64 {
    gamma::digamma(x)
}

#[inline]
pub fn ln_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * LN_2PI
}

/// Sum `1 - 1/x² + 3/x⁴ - 15/x⁶ + ...` of the Mills-ratio expansion, for `x ≪ 0`.
fn mills_series(x: f64) -> f64 {
    let inv = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    sum
}

/// `ln Φ(x)` for the standard normal CDF.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > 5.0 {
        (-0.5 * libm::erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else if x > NORMAL_TAIL_CUTOFF {
        (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        ln_norm_cdf_asymptotic(x)
    }
}

fn ln_norm_cdf_asymptotic(x: f64) -> f64 {
    ln_norm_pdf(x) - (-x).ln() + mills_series(x).ln()
}

/// Inverse Mills ratio `φ(x)/Φ(x)`.
pub fn norm_pdf_over_cdf(x: f64) -> f64 {
    if x > NORMAL_TAIL_CUTOFF {
        (ln_norm_pdf(x) - ln_norm_cdf(x)).exp()
    } else {
        -x / mills_series(x)
    }
}

/// `ln T_ν(x)` for the standard univariate Student-t CDF with `dof` degrees of freedom.
pub fn ln_t_cdf(x: f64, dof: f64) -> f64 {
    if x.is_nan() || dof.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let a = 0.5 * dof;
    ln_t_cdf_beta(x > 0.0, dof / (dof + x * x), a, ln_beta_half(a))
}

/// `ln B(a, 1/2)`.
pub fn ln_beta_half(a: f64) -> f64 {
    ln_gamma(a) + 0.5 * std::f64::consts::PI.ln() - ln_gamma(a + 0.5)
}

/// `ln T_{2a}(t)` written through `P(|T| > |t|) = I_x(a, 1/2)` with
/// `x = 2a / (2a + t²)`. Callers evaluating several `a` at one `x` pass the
/// cached `ln B(a, 1/2)`.
pub fn ln_t_cdf_beta(positive: bool, x: f64, a: f64, ln_beta: f64) -> f64 {
    let (ln_i, j) = beta_reg_half(a, x, ln_beta);
    if !positive {
        ln_i - LN_2
    } else {
        match j {
            Some(j) => (0.5 + 0.5 * j).ln(),
            None => (-0.5 * ln_i.exp()).ln_1p(),
        }
    }
}

/// `I_x(a, 1/2)` as `(ln I, Some(1 - I))` when the complement was the
/// accurate branch, `(ln I, None)` otherwise.
fn beta_reg_half(a: f64, x: f64, ln_beta: f64) -> (f64, Option<f64>) {
    const B: f64 = 0.5;
    if x <= 0.0 {
        return (f64::NEG_INFINITY, Some(1.0));
    }
    if x >= 1.0 {
        return (0.0, Some(0.0));
    }
    let ln_front = a * x.ln() + B * (-x).ln_1p() - ln_beta;
    if x < (a + 1.0) / (a + B + 2.0) {
        (ln_front + beta_cf(a, B, x).ln() - a.ln(), None)
    } else {
        let j = (ln_front + beta_cf(B, a, 1.0 - x).ln() - B.ln()).exp();
        ((-j).ln_1p(), Some(j))
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
