//! Heavy-tailed heterogeneity priors built as scale mixtures.
//!
//! An exponential distribution whose scale follows an inverse-gamma law is
//! marginally Lomax; a half-normal distribution whose scale follows a scaled
//! inverse-χ law is marginally half-Student-t. Both constructors take the
//! mixing law's expectation and coefficient of variation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{DistributionSummary, HeterogeneityPrior};
use crate::error::{Error, Result};
use crate::numeric;
use crate::special::{gamma_q, gamma_quantile, ln_gamma};
use crate::toolkit;

/// Largest coefficient of variation accepted for half-normal mixing. Beyond
/// it the degrees of freedom drop towards 2, where the variance ceases to exist.
pub const MAX_HALF_NORMAL_CV: f64 = 2.5;

const NU_LO: f64 = 2.05;
const NU_HI: f64 = 1e7;

/// Expectation and coefficient of variation of the mixing (scale) distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub scale_mean: f64,
    pub scale_cv: f64,
}

impl MixingSpec {
    /// `cv = 0` is allowed and stands for a fixed scale (no mixing).
    pub fn new(scale_mean: f64, scale_cv: f64) -> Result<Self> {
        if !(scale_mean > 0.0 && scale_mean.is_finite()) {
            return Err(Error::domain(format!("mixing mean must be positive, got {scale_mean}")));
        }
        if !(scale_cv >= 0.0 && scale_cv.is_finite()) {
            return Err(Error::domain(format!(
                "mixing coefficient of variation must be nonnegative, got {scale_cv}"
            )));
        }
        Ok(Self { scale_mean, scale_cv })
    }
}

/// Inverse-gamma law with shape `α` and scale `β`: `1/X ~ Gamma(α, rate β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn ln_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.shape, self.scale);
        a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            gamma_q(self.shape, self.scale / x)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.scale / gamma_quantile(1.0 - p, self.shape)
    }

    pub fn summarize(&self) -> DistributionSummary {
        let (a, b) = (self.shape, self.scale);
        let mean = (a > 1.0).then(|| b / (a - 1.0));
        let sd = (a > 2.0).then(|| b / ((a - 1.0) * (a - 2.0).sqrt()));
        DistributionSummary {
            median: self.quantile(0.5),
            mean,
            sd,
            q95: self.quantile(0.95),
            cv: (a > 2.0).then(|| 1.0 / (a - 2.0).sqrt()),
        }
    }
}

/// Scaled inverse-χ law: the distribution of `s/√X` with `X ~ χ²_ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledInverseChi {
    pub df: f64,
    pub scale: f64,
}

impl ScaledInverseChi {
    pub fn new(df: f64, scale: f64) -> Result<Self> {
        if !(df > 0.0 && scale > 0.0 && df.is_finite() && scale.is_finite()) {
            return Err(Error::domain(format!(
                "inverse-χ needs positive df and scale, got ({df}, {scale})"
            )));
        }
        Ok(Self { df, scale })
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (nu, s) = (self.df, self.scale);
        let r = s / x;
        (1.0 - 0.5 * nu) * std::f64::consts::LN_2 - s.ln() - ln_gamma(0.5 * nu)
            + (nu + 1.0) * r.ln()
            - 0.5 * r * r
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        // P(s/√X <= x) = P(X >= s²/x²)
        let r = self.scale / x;
        gamma_q(0.5 * self.df, 0.5 * r * r)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let chi2 = 2.0 * gamma_quantile(1.0 - p, 0.5 * self.df);
        self.scale / chi2.sqrt()
    }

    /// Expectation (`ν > 1`).
    pub fn mean(&self) -> Result<f64> {
        if self.df <= 1.0 {
            return Err(Error::UndefinedMoment(format!(
                "inverse-χ mean needs df > 1, got {}",
                self.df
            )));
        }
        Ok(self.scale * gamma_ratio(self.df) / std::f64::consts::SQRT_2)
    }

    /// Variance (`ν > 2`).
    pub fn variance(&self) -> Result<f64> {
        if self.df <= 2.0 {
            return Err(Error::UndefinedMoment(format!(
                "inverse-χ variance needs df > 2, got {}",
                self.df
            )));
        }
        let r = gamma_ratio(self.df);
        Ok(self.scale * self.scale * (1.0 / (self.df - 2.0) - 0.5 * r * r))
    }

    pub fn summarize(&self) -> DistributionSummary {
        let mean = self.mean().ok();
        let sd = self.variance().ok().map(f64::sqrt);
        DistributionSummary {
            median: self.quantile(0.5),
            mean,
            sd,
            q95: self.quantile(0.95),
            cv: (self.df > 2.0).then(|| inverse_chi_cv(self.df)),
        }
    }
}

/// `Γ((ν-1)/2) / Γ(ν/2)`.
fn gamma_ratio(nu: f64) -> f64 {
    (ln_gamma(0.5 * (nu - 1.0)) - ln_gamma(0.5 * nu)).exp()
}

/// Coefficient of variation of the (scaled) inverse-χ law; it depends on `ν` only.
pub fn inverse_chi_cv(nu: f64) -> f64 {
    let r = gamma_ratio(nu);
    (2.0 / ((nu - 2.0) * r * r) - 1.0).max(0.0).sqrt()
}

/// Degrees of freedom whose inverse-χ coefficient of variation equals `cv`.
pub fn cv_to_nu(cv: f64) -> Result<f64> {
    if !(cv > 0.0 && cv <= MAX_HALF_NORMAL_CV) {
        return Err(Error::domain(format!(
            "coefficient of variation must lie in (0, {MAX_HALF_NORMAL_CV}], got {cv}"
        )));
    }
    if cv < inverse_chi_cv(NU_HI) {
        return Err(Error::domain(format!(
            "coefficient of variation {cv} is too small to resolve; use a fixed scale"
        )));
    }
    // cv(ν) decreases in ν, so bisect on its negative.
    Ok(numeric::bisect_monotone(|nu| -inverse_chi_cv(nu), -cv, NU_LO, NU_HI))
}

/// Lomax prior from an exponential with inverse-gamma distributed scale.
pub fn lomax_from_mixture(spec: MixingSpec) -> Result<HeterogeneityPrior> {
    let spec = MixingSpec::new(spec.scale_mean, spec.scale_cv)?;
    if spec.scale_cv == 0.0 {
        return HeterogeneityPrior::exponential_scale(spec.scale_mean);
    }
    let ig = inverse_gamma_for(spec);
    HeterogeneityPrior::lomax(ig.shape, ig.scale)
}

fn inverse_gamma_for(spec: MixingSpec) -> InverseGamma {
    let k = 1.0 / (spec.scale_cv * spec.scale_cv);
    InverseGamma {
        shape: 2.0 + k,
        scale: spec.scale_mean * (1.0 + k),
    }
}

/// Half-Student-t prior from a half-normal with scaled inverse-χ distributed scale.
pub fn half_t_from_mixture(spec: MixingSpec) -> Result<HeterogeneityPrior> {
    let spec = MixingSpec::new(spec.scale_mean, spec.scale_cv)?;
    if spec.scale_cv == 0.0 {
        return HeterogeneityPrior::half_normal(spec.scale_mean);
    }
    let nu = cv_to_nu(spec.scale_cv)?;
    let unit = ScaledInverseChi::new(nu, nu.sqrt())?.mean()?;
    HeterogeneityPrior::half_student_t(nu, spec.scale_mean / unit)
}

/// The short-tailed family being mixed over its scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureBase {
    Exponential,
    HalfNormal,
}

impl FromStr for MixtureBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" => Ok(Self::Exponential),
            "halfnormal" | "half-normal" => Ok(Self::HalfNormal),
            other => Err(Error::input(format!(
                "unknown mixture base '{other}', expected exponential or halfnormal"
            ))),
        }
    }
}

impl fmt::Display for MixtureBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exponential => "exponential",
            Self::HalfNormal => "halfnormal",
        })
    }
}

/// The mixing law of a scale mixture, or a fixed scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum MixingLaw {
    Fixed { value: f64 },
    InverseGamma(InverseGamma),
    ScaledInverseChi(ScaledInverseChi),
}

impl MixingLaw {
    pub fn summarize(&self) -> DistributionSummary {
        match self {
            MixingLaw::Fixed { value } => DistributionSummary {
                median: *value,
                mean: Some(*value),
                sd: Some(0.0),
                q95: *value,
                cv: Some(0.0),
            },
            MixingLaw::InverseGamma(ig) => ig.summarize(),
            MixingLaw::ScaledInverseChi(ic) => ic.summarize(),
        }
    }
}

/// One row of a mixture table: mixing law, resulting prior and its predictive spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRow {
    pub base: MixtureBase,
    pub spec: MixingSpec,
    pub mixing: MixingLaw,
    pub mixing_summary: DistributionSummary,
    pub prior: HeterogeneityPrior,
    pub heterogeneity: DistributionSummary,
    /// Upper 97.5% quantile of the marginal prior predictive of `θᵢ - μ`.
    pub predictive_q975: f64,
}

/// Builds the mixture prior for `base` and tabulates its implications.
pub fn mixture_row(base: MixtureBase, spec: MixingSpec) -> Result<MixtureRow> {
    let spec = MixingSpec::new(spec.scale_mean, spec.scale_cv)?;
    let (prior, mixing) = match base {
        MixtureBase::Exponential => {
            let prior = lomax_from_mixture(spec)?;
            let mixing = if spec.scale_cv == 0.0 {
                MixingLaw::Fixed { value: spec.scale_mean }
            } else {
                MixingLaw::InverseGamma(inverse_gamma_for(spec))
            };
            (prior, mixing)
        }
        MixtureBase::HalfNormal => {
            let prior = half_t_from_mixture(spec)?;
            let mixing = match prior {
                HeterogeneityPrior::HalfStudentT { df, scale } => {
                    MixingLaw::ScaledInverseChi(ScaledInverseChi::new(df, scale * df.sqrt())?)
                }
                _ => MixingLaw::Fixed { value: spec.scale_mean },
            };
            (prior, mixing)
        }
    };
    let predictive = toolkit::marginal_predictive(&prior, 0.95)?;
    Ok(MixtureRow {
        base,
        spec,
        mixing,
        mixing_summary: mixing.summarize(),
        prior,
        heterogeneity: prior.summarize()?,
        predictive_q975: predictive.interval_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn lomax_examples() {
        let p = lomax_from_mixture(MixingSpec::new(0.5, 0.5).unwrap()).unwrap();
        assert_eq!(p, HeterogeneityPrior::Lomax { shape: 6.0, scale: 2.5 });
        let p = lomax_from_mixture(MixingSpec::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(p, HeterogeneityPrior::Lomax { shape: 3.0, scale: 2.0 });
        let HeterogeneityPrior::Lomax { shape, scale } =
            lomax_from_mixture(MixingSpec::new(1.0, 0.1).unwrap()).unwrap()
        else {
            panic!()
        };
        close(shape, 102.0, 1e-9);
        close(scale, 101.0, 1e-9);
    }

    #[test]
    fn cv_nu_map() {
        close(cv_to_nu(0.5).unwrap(), 4.2, 0.05);
        close(cv_to_nu(1.0).unwrap(), 2.6, 0.05);
        close(inverse_chi_cv(5.0), 0.42, 0.005);
        let nu = cv_to_nu(0.3).unwrap();
        close(inverse_chi_cv(nu), 0.3, 1e-9);
        assert!(cv_to_nu(3.0).is_err());
        assert!(cv_to_nu(0.0).is_err());
    }

    #[test]
    fn half_t_examples() {
        let HeterogeneityPrior::HalfStudentT { df, scale } =
            half_t_from_mixture(MixingSpec::new(0.5, 0.5).unwrap()).unwrap()
        else {
            panic!()
        };
        close(df, 4.2, 0.05);
        close(scale, 0.40, 0.005);
        let HeterogeneityPrior::HalfStudentT { df, scale } =
            half_t_from_mixture(MixingSpec::new(1.0, 0.2).unwrap()).unwrap()
        else {
            panic!()
        };
        close(df, 14.7, 0.05);
        close(scale, 0.95, 0.005);
        assert_eq!(
            half_t_from_mixture(MixingSpec::new(1.0, 0.0).unwrap()).unwrap(),
            HeterogeneityPrior::HalfNormal { scale: 1.0 }
        );
    }

    #[test]
    fn inverse_chi_moments() {
        let ic = ScaledInverseChi::new(4.2, 4.2f64.sqrt()).unwrap();
        close(ic.mean().unwrap(), 1.24, 0.005);
        let ic5 = ScaledInverseChi::new(5.0, 1.0).unwrap();
        close(ic5.variance().unwrap().sqrt() / ic5.mean().unwrap(), 0.42, 0.005);
        let total = numeric::integrate(|x| ic.density(x), 0.0, 200.0, 1e-12);
        close(total, 1.0, 1e-6);
        close(ic.cdf(ic.quantile(0.3)), 0.3, 1e-12);
    }

    #[test]
    fn inverse_gamma_quantiles_invert_the_cdf() {
        let ig = InverseGamma { shape: 6.0, scale: 5.0 };
        for p in [0.05, 0.5, 0.95] {
            close(ig.cdf(ig.quantile(p)), p, 1e-12);
        }
    }
}
