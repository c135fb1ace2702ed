//! Thin wrappers around the special functions used throughout the crate.
//!
//! The error function comes from `libm` (a port of the musl/fdlibm routines,
//! accurate to about one ulp); the inverse error function and the gamma and
//! beta functions come from `statrs`. Upper tails are computed through the
//! complementary functions so that probabilities like `1 - 1e-12` keep their
//! relative accuracy.

use statrs::function::{beta, erf, gamma};

use crate::numeric;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erf::erfc_inv(2.0 * p)
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma::gamma_lr(a, x)
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(a, x)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta::beta_reg(a, b, x)
    }
}

/// Student-t density with `df` degrees of freedom.
pub fn t_pdf(x: f64, df: f64) -> f64 {
    t_ln_pdf(x, df).exp()
}

pub fn t_ln_pdf(x: f64, df: f64) -> f64 {
    ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - 0.5 * (df + 1.0) * (x * x / df).ln_1p()
}

/// Two-sided tail mass `P(|T| > |x|)`.
fn t_two_sided_tail(x: f64, df: f64) -> f64 {
    let x2 = x * x;
    // I_{ν/(ν+x²)}(ν/2, 1/2), switching to the complement when x is small to
    // avoid cancellation in ν/(ν+x²) ≈ 1.
    if x2 < df {
        1.0 - beta_reg(0.5, 0.5 * df, x2 / (df + x2))
    } else {
        beta_reg(0.5 * df, 0.5, df / (df + x2))
    }
}

/// Student-t CDF.
pub fn t_cdf(x: f64, df: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * t_two_sided_tail(x, df);
    if x >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `P(|T| <= x)` for `x >= 0`, computed without the `2F - 1` cancellation.
pub fn t_abs_cdf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let x2 = x * x;
    if x2 < df {
        beta_reg(0.5, 0.5 * df, x2 / (df + x2))
    } else {
        1.0 - beta_reg(0.5 * df, 0.5, df / (df + x2))
    }
}

/// Student-t quantile, by bracketed bisection with Newton polishing.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -t_quantile(1.0 - p, df);
    }
    t_abs_quantile(2.0 * p - 1.0, df)
}

/// Solves `P(|T| <= x) = p`, the quantile of the half-Student-t law.
pub fn t_abs_quantile(p: f64, df: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let target = p;
    let z = norm_quantile(0.5 + 0.5 * p).max(1e-3);
    let mut hi = z;
    while t_abs_cdf(hi, df) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    numeric::invert_monotone(
        |x| t_abs_cdf(x, df),
        |x| 2.0 * t_pdf(x, df),
        target,
        0.0,
        hi,
    )
}

/// Quantile of the Gamma(shape, 1) distribution.
pub fn gamma_quantile(p: f64, shape: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut hi = shape.max(1.0);
    while gamma_p(shape, hi) < p {
        hi *= 2.0;
    }
    let ln_norm = ln_gamma(shape);
    numeric::invert_monotone(
        |x| gamma_p(shape, x),
        |x| {
            if x <= 0.0 {
                0.0
            } else {
                ((shape - 1.0) * x.ln() - x - ln_norm).exp()
            }
        },
        p,
        0.0,
        hi,
    )
}

/// Quantile of the χ² distribution.
pub fn chi2_quantile(p: f64, df: f64) -> f64 {
    2.0 * gamma_quantile(p, 0.5 * df)
}
