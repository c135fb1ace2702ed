//! Unit information standard deviations and prior maximum sample sizes.

use serde::{Deserialize, Serialize};

use crate::effect::EffectEstimate;
use crate::error::{Error, Result};

/// Whether a UISD refers to one subject or to one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UisdBasis {
    PerSubject,
    PerEvent,
}

/// Whether a UISD was estimated from data or derived from the effect scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UisdSource {
    Empirical,
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UisdEstimate {
    pub value: f64,
    pub basis: UisdBasis,
    pub source: UisdSource,
}

/// Effect scales with a known approximate UISD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "kebab-case")]
pub enum TheoreticalScale {
    Smd,
    /// Log odds for a true proportion `p`.
    LogOdds { p: f64 },
    LogOr,
    /// Log incidence rate ratio; with an event rate per subject the result is
    /// per subject, otherwise per event.
    LogIrr { rate: Option<f64> },
}

/// `s = √(Σnᵢ / Σσᵢ⁻²)`, the UISD implied by sample sizes and standard errors.
pub fn empirical_uisd(studies: &[EffectEstimate]) -> Result<UisdEstimate> {
    if studies.is_empty() {
        return Err(Error::input("cannot estimate a UISD from zero studies"));
    }
    let mut total_n = 0.0;
    let mut precision = 0.0;
    for s in studies {
        let n = s.n.ok_or_else(|| {
            Error::input(format!("study '{}' has no sample size; cannot estimate the UISD", s.label))
        })?;
        total_n += n;
        precision += 1.0 / (s.sigma * s.sigma);
    }
    Ok(UisdEstimate {
        value: (total_n / precision).sqrt(),
        basis: UisdBasis::PerSubject,
        source: UisdSource::Empirical,
    })
}

pub fn theoretical_uisd(scale: TheoreticalScale) -> Result<UisdEstimate> {
    let (value, basis) = match scale {
        TheoreticalScale::Smd => (2.0, UisdBasis::PerSubject),
        TheoreticalScale::LogOdds { p } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::domain(format!("proportion must lie in (0, 1), got {p}")));
            }
            ((1.0 / p + 1.0 / (1.0 - p)).sqrt(), UisdBasis::PerSubject)
        }
        TheoreticalScale::LogOr => (4.0, UisdBasis::PerSubject),
        TheoreticalScale::LogIrr { rate: None } => (2.0, UisdBasis::PerEvent),
        TheoreticalScale::LogIrr { rate: Some(rate) } => {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::domain(format!("event rate must be positive, got {rate}")));
            }
            (2.0 / rate.sqrt(), UisdBasis::PerSubject)
        }
    };
    Ok(UisdEstimate {
        value,
        basis,
        source: UisdSource::Theoretical,
    })
}

/// `(uisd/τ)²`: the most subjects an idealized external meta-analysis with
/// heterogeneity `τ` can contribute to one new study. Infinite at `τ = 0`.
pub fn prior_max_sample_size(tau: f64, uisd: f64) -> Result<f64> {
    if !(uisd > 0.0) || !(tau >= 0.0) {
        return Err(Error::domain(format!(
            "need τ >= 0 and a positive UISD, got τ = {tau}, UISD = {uisd}"
        )));
    }
    if tau == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((uisd / tau).powi(2))
}

/// `(uisd/sd)²`: the number of subjects carrying the same information as a
/// distribution with standard deviation `sd`.
pub fn effective_sample_size(sd: f64, uisd: f64) -> Result<f64> {
    if !(sd > 0.0 && uisd > 0.0) {
        return Err(Error::domain(format!(
            "standard deviation and UISD must be positive, got {sd} and {uisd}"
        )));
    }
    Ok((uisd / sd).powi(2))
}
