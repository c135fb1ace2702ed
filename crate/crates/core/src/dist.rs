//! Prior distribution families for the heterogeneity parameter τ.
//!
//! Every proper family exposes density, CDF, quantile and (where they exist)
//! moments. The improper uniform and Jeffreys priors only have an
//! unnormalized density; asking them for anything else yields
//! [`Error::ImproperPrior`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    ln_gamma, norm_cdf, norm_quantile, norm_sf, t_abs_cdf, t_abs_quantile, t_cdf, t_ln_pdf,
    t_quantile,
};

const LN_2: f64 = std::f64::consts::LN_2;
const FRAC_2_PI: f64 = std::f64::consts::FRAC_2_PI;

/// A heterogeneity prior `p(τ)` on `τ >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HeterogeneityPrior {
    HalfNormal { scale: f64 },
    HalfStudentT { df: f64, scale: f64 },
    HalfCauchy { scale: f64 },
    HalfLogistic { scale: f64 },
    Exponential { rate: f64 },
    Lomax { shape: f64, scale: f64 },
    /// `log τ ~ N(mu, sigma²)`.
    LogNormal { mu: f64, sigma: f64 },
    /// `log τ = location + scale·T` with `T ~ t_df`.
    LogStudentT { location: f64, scale: f64, df: f64 },
    /// Proper uniform on `[0, upper]`.
    Uniform { upper: f64 },
    ImproperUniform,
    /// `p(τ) ∝ √(Σ τ²/(σᵢ²+τ²)²)`; needs the standard errors of a dataset.
    Jeffreys,
}

/// Location, spread and tail summary of a proper prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub median: f64,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub q95: f64,
    pub cv: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

use HeterogeneityPrior as P;

impl HeterogeneityPrior {
    pub fn half_normal(scale: f64) -> Result<Self> {
        P::HalfNormal { scale }.validated()
    }

    pub fn half_student_t(df: f64, scale: f64) -> Result<Self> {
        P::HalfStudentT { df, scale }.validated()
    }

    pub fn half_cauchy(scale: f64) -> Result<Self> {
        P::HalfCauchy { scale }.validated()
    }

    pub fn half_logistic(scale: f64) -> Result<Self> {
        P::HalfLogistic { scale }.validated()
    }

    pub fn exponential_rate(rate: f64) -> Result<Self> {
        P::Exponential { rate }.validated()
    }

    pub fn exponential_scale(scale: f64) -> Result<Self> {
        positive("exponential scale", scale)?;
        P::Exponential { rate: 1.0 / scale }.validated()
    }

    pub fn lomax(shape: f64, scale: f64) -> Result<Self> {
        P::Lomax { shape, scale }.validated()
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        P::LogNormal { mu, sigma }.validated()
    }

    pub fn log_student_t(location: f64, scale: f64, df: f64) -> Result<Self> {
        P::LogStudentT { location, scale, df }.validated()
    }

    pub fn uniform(upper: f64) -> Result<Self> {
        P::Uniform { upper }.validated()
    }

    /// Checks every parameter constraint, returning the prior unchanged.
    pub fn validated(self) -> Result<Self> {
        match self {
            P::HalfNormal { scale } | P::HalfCauchy { scale } | P::HalfLogistic { scale } => {
                positive("scale", scale)?
            }
            P::HalfStudentT { df, scale } => {
                positive("degrees of freedom", df)?;
                positive("scale", scale)?;
            }
            P::Exponential { rate } => positive("rate", rate)?,
            P::Lomax { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)?;
            }
            P::LogNormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::domain("log-normal mu must be finite"));
                }
                positive("sigma", sigma)?;
            }
            P::LogStudentT { location, scale, df } => {
                if !location.is_finite() {
                    return Err(Error::domain("log-Student-t location must be finite"));
                }
                positive("scale", scale)?;
                positive("degrees of freedom", df)?;
            }
            P::Uniform { upper } => positive("upper bound", upper)?,
            P::ImproperUniform | P::Jeffreys => {}
        }
        Ok(self)
    }

    pub fn is_proper(&self) -> bool {
        !matches!(self, P::ImproperUniform | P::Jeffreys)
    }

    /// Short family name used in messages.
    pub fn family_name(&self) -> &'static str {
        match self {
            P::HalfNormal { .. } => "half-normal",
            P::HalfStudentT { .. } => "half-Student-t",
            P::HalfCauchy { .. } => "half-Cauchy",
            P::HalfLogistic { .. } => "half-logistic",
            P::Exponential { .. } => "exponential",
            P::Lomax { .. } => "Lomax",
            P::LogNormal { .. } => "log-normal",
            P::LogStudentT { .. } => "log-Student-t",
            P::Uniform { .. } => "uniform",
            P::ImproperUniform => "improper uniform",
            P::Jeffreys => "Jeffreys",
        }
    }

    fn require_proper(&self, what: &'static str) -> Result<()> {
        if self.is_proper() {
            Ok(())
        } else {
            Err(Error::ImproperPrior(self.family_name(), what))
        }
    }

    /// Log density at `x`. The improper uniform prior has log density 0;
    /// the Jeffreys prior needs standard errors, see [`jeffreys_log_density`].
    pub fn log_density(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("τ must be nonnegative, got {x}")));
        }
        let v = match *self {
            P::HalfNormal { scale } => {
                let z = x / scale;
                0.5 * (FRAC_2_PI).ln() - scale.ln() - 0.5 * z * z
            }
            P::HalfStudentT { df, scale } => LN_2 + t_ln_pdf(x / scale, df) - scale.ln(),
            P::HalfCauchy { scale } => {
                let z = x / scale;
                (FRAC_2_PI / scale).ln() - (z * z).ln_1p()
            }
            P::HalfLogistic { scale } => {
                let z = x / scale;
                // 2 e^{-z} / (σ (1 + e^{-z})²)
                LN_2 - z - scale.ln() - 2.0 * (-z).exp().ln_1p()
            }
            P::Exponential { rate } => rate.ln() - rate * x,
            P::Lomax { shape, scale } => {
                (shape / scale).ln() - (shape + 1.0) * (x / scale).ln_1p()
            }
            P::LogNormal { mu, sigma } => {
                if x == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let z = (x.ln() - mu) / sigma;
                    -x.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
                }
            }
            P::LogStudentT { location, scale, df } => {
                if x == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    t_ln_pdf((x.ln() - location) / scale, df) - scale.ln() - x.ln()
                }
            }
            P::Uniform { upper } => {
                if x <= upper {
                    -upper.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            P::ImproperUniform => 0.0,
            P::Jeffreys => {
                return Err(Error::domain(
                    "the Jeffreys prior depends on the standard errors; bind a dataset first",
                ))
            }
        };
        Ok(v)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    /// `P(τ <= x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.require_proper("CDF")?;
        if !(x >= 0.0) {
            return Err(Error::domain(format!("τ must be nonnegative, got {x}")));
        }
        Ok(match *self {
            P::HalfNormal { scale } => 1.0 - 2.0 * norm_sf(x / scale),
            P::HalfStudentT { df, scale } => t_abs_cdf(x / scale, df),
            P::HalfCauchy { scale } => FRAC_2_PI * (x / scale).atan(),
            P::HalfLogistic { scale } => (0.5 * x / scale).tanh(),
            P::Exponential { rate } => -(-rate * x).exp_m1(),
            P::Lomax { shape, scale } => -(-shape * (x / scale).ln_1p()).exp_m1(),
            P::LogNormal { mu, sigma } => {
                if x == 0.0 {
                    0.0
                } else {
                    norm_cdf((x.ln() - mu) / sigma)
                }
            }
            P::LogStudentT { location, scale, df } => {
                if x == 0.0 {
                    0.0
                } else {
                    t_cdf((x.ln() - location) / scale, df)
                }
            }
            P::Uniform { upper } => (x / upper).min(1.0),
            P::ImproperUniform | P::Jeffreys => unreachable!(),
        })
    }

    /// `P(τ > x)`, accurate in the far upper tail.
    pub fn sf(&self, x: f64) -> Result<f64> {
        self.require_proper("survival function")?;
        if !(x >= 0.0) {
            return Err(Error::domain(format!("τ must be nonnegative, got {x}")));
        }
        Ok(match *self {
            P::HalfNormal { scale } => 2.0 * norm_sf(x / scale),
            P::HalfStudentT { df, scale } => 2.0 * t_cdf(-x / scale, df),
            P::HalfCauchy { scale } => FRAC_2_PI * (scale / x).atan(),
            P::HalfLogistic { scale } => {
                let e = (-x / scale).exp();
                2.0 * e / (1.0 + e)
            }
            P::Exponential { rate } => (-rate * x).exp(),
            P::Lomax { shape, scale } => (-shape * (x / scale).ln_1p()).exp(),
            P::LogNormal { mu, sigma } => {
                if x == 0.0 {
                    1.0
                } else {
                    norm_sf((x.ln() - mu) / sigma)
                }
            }
            P::LogStudentT { location, scale, df } => {
                if x == 0.0 {
                    1.0
                } else {
                    t_cdf(-(x.ln() - location) / scale, df)
                }
            }
            P::Uniform { upper } => (1.0 - x / upper).max(0.0),
            P::ImproperUniform | P::Jeffreys => unreachable!(),
        })
    }

    /// Inverse CDF for `p ∈ [0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.require_proper("quantile")?;
        if !(0.0..1.0).contains(&p) {
            return Err(Error::domain(format!("probability must lie in [0, 1), got {p}")));
        }
        Ok(match *self {
            P::HalfNormal { scale } => scale * norm_quantile(0.5 + 0.5 * p),
            P::HalfStudentT { df, scale } => scale * t_abs_quantile(p, df),
            P::HalfCauchy { scale } => scale * (0.5 * std::f64::consts::PI * p).tan(),
            P::HalfLogistic { scale } => 2.0 * scale * p.atanh(),
            P::Exponential { rate } => -(-p).ln_1p() / rate,
            P::Lomax { shape, scale } => scale * ((-(-p).ln_1p() / shape).exp_m1()),
            P::LogNormal { mu, sigma } => {
                if p == 0.0 {
                    0.0
                } else {
                    (mu + sigma * norm_quantile(p)).exp()
                }
            }
            P::LogStudentT { location, scale, df } => {
                if p == 0.0 {
                    0.0
                } else {
                    (location + scale * t_quantile(p, df)).exp()
                }
            }
            P::Uniform { upper } => p * upper,
            P::ImproperUniform | P::Jeffreys => unreachable!(),
        })
    }

    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }

    /// Expectation, when finite.
    pub fn mean(&self) -> Result<f64> {
        self.require_proper("mean")?;
        let undefined = || Err(Error::UndefinedMoment(format!("{self} has no finite mean")));
        match *self {
            P::HalfNormal { scale } => Ok(scale * FRAC_2_PI.sqrt()),
            P::HalfStudentT { df, scale } => {
                if df <= 1.0 {
                    return undefined();
                }
                Ok(scale * half_t_unit_mean(df))
            }
            P::HalfCauchy { .. } | P::LogStudentT { .. } => undefined(),
            P::HalfLogistic { scale } => Ok(2.0 * LN_2 * scale),
            P::Exponential { rate } => Ok(1.0 / rate),
            P::Lomax { shape, scale } => {
                if shape <= 1.0 {
                    undefined()
                } else {
                    Ok(scale / (shape - 1.0))
                }
            }
            P::LogNormal { mu, sigma } => Ok((mu + 0.5 * sigma * sigma).exp()),
            P::Uniform { upper } => Ok(0.5 * upper),
            P::ImproperUniform | P::Jeffreys => unreachable!(),
        }
    }

    /// Standard deviation, when finite.
    pub fn sd(&self) -> Result<f64> {
        self.require_proper("standard deviation")?;
        let undefined = || Err(Error::UndefinedMoment(format!("{self} has no finite variance")));
        let var = match *self {
            P::HalfNormal { scale } => scale * scale * (1.0 - FRAC_2_PI),
            P::HalfStudentT { df, scale } => {
                if df <= 2.0 {
                    return undefined();
                }
                let m = half_t_unit_mean(df);
                scale * scale * (df / (df - 2.0) - m * m)
            }
            P::HalfCauchy { .. } | P::LogStudentT { .. } => return undefined(),
            P::HalfLogistic { scale } => {
                scale * scale * (std::f64::consts::PI.powi(2) / 3.0 - (2.0 * LN_2).powi(2))
            }
            P::Exponential { rate } => 1.0 / (rate * rate),
            P::Lomax { shape, scale } => {
                if shape <= 2.0 {
                    return undefined();
                }
                scale * scale * shape / ((shape - 1.0).powi(2) * (shape - 2.0))
            }
            P::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                s2.exp_m1() * (2.0 * mu + s2).exp()
            }
            P::Uniform { upper } => upper * upper / 12.0,
            P::ImproperUniform | P::Jeffreys => unreachable!(),
        };
        Ok(var.sqrt())
    }

    /// Median, mean, standard deviation, 95% quantile and coefficient of variation.
    pub fn summarize(&self) -> Result<DistributionSummary> {
        self.require_proper("summary")?;
        let mean = self.mean().ok();
        let sd = self.sd().ok();
        Ok(DistributionSummary {
            median: self.quantile(0.5)?,
            mean,
            sd,
            q95: self.quantile(0.95)?,
            cv: match (mean, sd) {
                (Some(m), Some(s)) => Some(s / m),
                _ => None,
            },
        })
    }

    /// The same family stretched by `factor`: quantiles and moments scale by it.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        positive("scale factor", factor)?;
        Ok(match *self {
            P::HalfNormal { scale } => P::HalfNormal { scale: scale * factor },
            P::HalfStudentT { df, scale } => P::HalfStudentT { df, scale: scale * factor },
            P::HalfCauchy { scale } => P::HalfCauchy { scale: scale * factor },
            P::HalfLogistic { scale } => P::HalfLogistic { scale: scale * factor },
            P::Exponential { rate } => P::Exponential { rate: rate / factor },
            P::Lomax { shape, scale } => P::Lomax { shape, scale: scale * factor },
            P::LogNormal { mu, sigma } => P::LogNormal { mu: mu + factor.ln(), sigma },
            P::LogStudentT { location, scale, df } => P::LogStudentT {
                location: location + factor.ln(),
                scale,
                df,
            },
            P::Uniform { upper } => P::Uniform { upper: upper * factor },
            P::ImproperUniform | P::Jeffreys => {
                return Err(Error::ImproperPrior(self.family_name(), "scale"))
            }
        })
    }

    /// The member of this family (same shape parameters) whose median is `target`.
    pub fn scale_to_median(&self, target: f64) -> Result<Self> {
        positive("target median", target)?;
        let median = self.median()?;
        let scaled = self.rescaled(target / median)?;
        // Log-location families are set exactly rather than by ratio.
        Ok(match scaled {
            P::LogNormal { sigma, .. } => P::LogNormal { mu: target.ln(), sigma },
            P::LogStudentT { scale, df, .. } => P::LogStudentT {
                location: target.ln(),
                scale,
                df,
            },
            other => other,
        })
    }

    /// Draws one value by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.require_proper("sampler")?;
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Human-readable label in the style of the sensitivity tables,
    /// e.g. `half-normal(0.50)` or `Lomax(6, 2.75)`.
    pub fn label(&self) -> String {
        let g = |v: f64| trim_shape(v);
        match *self {
            P::HalfNormal { scale } => format!("half-normal({scale:.2})"),
            P::HalfStudentT { df, scale } => format!("half-Student-t({}, {scale:.2})", g(df)),
            P::HalfCauchy { scale } => format!("half-Cauchy({scale:.2})"),
            P::HalfLogistic { scale } => format!("half-logistic({scale:.2})"),
            P::Exponential { rate } => format!("exponential({:.2})", 1.0 / rate),
            P::Lomax { shape, scale } => format!("Lomax({}, {scale:.2})", g(shape)),
            P::LogNormal { mu, sigma } => format!("log-normal({mu:.2}, {sigma:.2})"),
            P::LogStudentT { location, scale, df } => {
                format!("log-Student-t({location:.2}, {scale:.3}, {})", g(df))
            }
            P::Uniform { upper } => format!("uniform(0, {upper:.2})"),
            P::ImproperUniform => "uniform".to_string(),
            P::Jeffreys => "Jeffreys".to_string(),
        }
    }
}

fn trim_shape(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Mean of the half-Student-t distribution with unit scale (`df > 1`).
pub fn half_t_unit_mean(df: f64) -> f64 {
    2.0 * df.sqrt() / ((df - 1.0) * std::f64::consts::PI.sqrt())
        * (ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df)).exp()
}

/// Unnormalized log density of the Jeffreys prior for the standard errors `sigmas`:
/// `½ log Σ τ²/(σᵢ²+τ²)²`.
pub fn jeffreys_log_density(x: f64, sigmas: &[f64]) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("τ must be nonnegative, got {x}")));
    }
    let s: f64 = sigmas
        .iter()
        .map(|si| {
            let v = si * si + x * x;
            x * x / (v * v)
        })
        .sum();
    Ok(0.5 * s.ln())
}

impl fmt::Display for HeterogeneityPrior {
    /// Prints the canonical specification string accepted by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            P::HalfNormal { scale } => write!(f, "halfnormal({scale})"),
            P::HalfStudentT { df, scale } => write!(f, "halfstudentt({df},{scale})"),
            P::HalfCauchy { scale } => write!(f, "halfcauchy({scale})"),
            P::HalfLogistic { scale } => write!(f, "halflogistic({scale})"),
            P::Exponential { rate } => write!(f, "exponential(rate={rate})"),
            P::Lomax { shape, scale } => write!(f, "lomax({shape},{scale})"),
            P::LogNormal { mu, sigma } => write!(f, "lognormal({mu},{sigma})"),
            P::LogStudentT { location, scale, df } => {
                write!(f, "logstudentt({location},{scale},{df})")
            }
            P::Uniform { upper } => write!(f, "uniform({upper})"),
            P::ImproperUniform => write!(f, "uniform()"),
            P::Jeffreys => write!(f, "jeffreys()"),
        }
    }
}

impl FromStr for HeterogeneityPrior {
    type Err = Error;

    /// Parses specifications such as `halfnormal(0.5)`, `halfstudentt(3, 0.44)`,
    /// `exponential(scale=0.49)`, `lomax(6,2.75)`, `uniform()` or `jeffreys()`.
    /// Case and whitespace are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        let bad = || Error::input(format!("cannot parse prior specification '{s}'"));
        let open = compact.find('(').ok_or_else(bad)?;
        if !compact.ends_with(')') {
            return Err(bad());
        }
        let name = &compact[..open];
        let inner = &compact[open + 1..compact.len() - 1];
        let args: Vec<&str> = if inner.is_empty() {
            Vec::new()
        } else {
            inner.split(',').collect()
        };
        let num = |a: &str| -> Result<f64> {
            a.parse::<f64>()
                .map_err(|_| Error::input(format!("'{a}' is not a number in prior '{s}'")))
        };
        let positional = |n: usize| -> Result<Vec<f64>> {
            if args.len() != n {
                return Err(Error::input(format!(
                    "prior '{name}' takes {n} argument(s), got {} in '{s}'",
                    args.len()
                )));
            }
            args.iter().map(|a| num(a)).collect()
        };
        let prior = match name {
            "halfnormal" => P::half_normal(positional(1)?[0]),
            "halfstudentt" | "halft" => {
                let v = positional(2)?;
                P::half_student_t(v[0], v[1])
            }
            "halfcauchy" => P::half_cauchy(positional(1)?[0]),
            "halflogistic" => P::half_logistic(positional(1)?[0]),
            "exponential" => {
                if args.len() != 1 {
                    return Err(Error::input(format!(
                        "exponential takes one argument 'rate=…' or 'scale=…', got '{s}'"
                    )));
                }
                match args[0].split_once('=') {
                    Some(("rate", v)) => P::exponential_rate(num(v)?),
                    Some(("scale", v)) => P::exponential_scale(num(v)?),
                    _ => {
                        return Err(Error::input(format!(
                            "exponential needs an explicit 'rate=' or 'scale=' in '{s}'"
                        )))
                    }
                }
            }
            "lomax" => {
                let v = positional(2)?;
                P::lomax(v[0], v[1])
            }
            "lognormal" => {
                let v = positional(2)?;
                P::log_normal(v[0], v[1])
            }
            "logstudentt" | "logt" => {
                let v = positional(3)?;
                P::log_student_t(v[0], v[1], v[2])
            }
            "uniform" => {
                if args.is_empty() {
                    Ok(P::ImproperUniform)
                } else {
                    P::uniform(positional(1)?[0])
                }
            }
            "jeffreys" => {
                positional(0)?;
                Ok(P::Jeffreys)
            }
            _ => return Err(Error::input(format!("unknown prior family '{name}' in '{s}'"))),
        };
        prior.map_err(|e| match e {
            Error::Domain(msg) => Error::Input(format!("{msg} in prior '{s}'")),
            other => other,
        })
    }
}
