//! Prior sensitivity sweeps: the base prior at several scales, other families
//! matched to its median, and the noninformative priors.

use serde::{Deserialize, Serialize};

use crate::dist::HeterogeneityPrior;
use crate::engine::{analyze, AnalysisOptions, AnalysisReport, Dataset, EffectPrior};
use crate::error::{Error, Result};
use crate::par;

/// A family with a free scale, fixed by matching the base prior's median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyTag {
    HalfNormal,
    HalfStudentT { df: f64 },
    HalfCauchy,
    HalfLogistic,
    Exponential,
    Lomax { shape: f64 },
}

impl FamilyTag {
    fn unit(self) -> Result<HeterogeneityPrior> {
        match self {
            FamilyTag::HalfNormal => HeterogeneityPrior::half_normal(1.0),
            FamilyTag::HalfStudentT { df } => HeterogeneityPrior::half_student_t(df, 1.0),
            FamilyTag::HalfCauchy => HeterogeneityPrior::half_cauchy(1.0),
            FamilyTag::HalfLogistic => HeterogeneityPrior::half_logistic(1.0),
            FamilyTag::Exponential => HeterogeneityPrior::exponential_rate(1.0),
            FamilyTag::Lomax { shape } => HeterogeneityPrior::lomax(shape, 1.0),
        }
    }

    /// The member of this family with median `median`.
    pub fn with_median(self, median: f64) -> Result<HeterogeneityPrior> {
        self.unit()?.scale_to_median(median)
    }

    /// Half-Student-t(3), half-Cauchy, half-logistic, exponential, Lomax(6)
    /// and Lomax(1).
    pub fn defaults() -> Vec<FamilyTag> {
        vec![
            FamilyTag::HalfStudentT { df: 3.0 },
            FamilyTag::HalfCauchy,
            FamilyTag::HalfLogistic,
            FamilyTag::Exponential,
            FamilyTag::Lomax { shape: 6.0 },
            FamilyTag::Lomax { shape: 1.0 },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPlan {
    pub base_prior: HeterogeneityPrior,
    pub scale_factors: Vec<f64>,
    pub families: Vec<FamilyTag>,
    pub include_uniform: bool,
    pub include_jeffreys: bool,
}

impl SensitivityPlan {
    /// Scale factors 0.5, 1 and 2, the default families and both
    /// noninformative priors.
    pub fn new(base_prior: HeterogeneityPrior) -> Result<Self> {
        let plan = Self {
            base_prior,
            scale_factors: vec![0.5, 1.0, 2.0],
            families: FamilyTag::defaults(),
            include_uniform: true,
            include_jeffreys: true,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let base = self.base_prior.validated()?;
        if !base.is_proper() {
            return Err(Error::ImproperPrior(base.family_name(), "scale for a sensitivity plan"));
        }
        if let Some(f) = self.scale_factors.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::domain(format!("scale factors must be positive, got {f}")));
        }
        Ok(())
    }

    /// Priors in report order: the base prior, its rescaled variants, the
    /// median-matched families and the noninformative priors. Duplicates are
    /// listed once.
    pub fn priors(&self) -> Result<Vec<HeterogeneityPrior>> {
        self.validate()?;
        let base = self.base_prior;
        let mut out = vec![base];
        let mut push = |p: HeterogeneityPrior| {
            if !out.contains(&p) {
                out.push(p);
            }
        };
        for &f in &self.scale_factors {
            push(if f == 1.0 { base } else { base.rescaled(f)? });
        }
        let median = base.median()?;
        for fam in &self.families {
            let p = fam.with_median(median)?;
            if p.family_name() != base.family_name() || !self.scale_factors.contains(&1.0) {
                push(p);
            }
        }
        if self.include_uniform {
            push(HeterogeneityPrior::ImproperUniform);
        }
        if self.include_jeffreys {
            push(HeterogeneityPrior::Jeffreys);
        }
        Ok(out)
    }
}

/// One variant's outcome; variants whose posterior would be improper are
/// skipped with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOutcome {
    Report(Box<AnalysisReport>),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub label: String,
    pub prior: HeterogeneityPrior,
    pub outcome: RowOutcome,
}

impl SensitivityRow {
    pub fn report(&self) -> Option<&AnalysisReport> {
        match &self.outcome {
            RowOutcome::Report(r) => Some(r),
            RowOutcome::Skipped(_) => None,
        }
    }
}

/// Analyzes `data` under every prior of `plan`, in plan order.
pub fn run_sensitivity(
    data: &Dataset,
    plan: &SensitivityPlan,
    eprior: &EffectPrior,
    options: &AnalysisOptions,
) -> Result<Vec<SensitivityRow>> {
    let priors = plan.priors()?;
    par::map(options.execution, &priors, |p| {
        let outcome = match analyze(data, p, eprior, options) {
            Ok(r) => RowOutcome::Report(Box::new(r)),
            Err(e @ Error::ImproperPosterior(_)) => RowOutcome::Skipped(e.to_string()),
            Err(e) => return Err(e),
        };
        Ok(SensitivityRow {
            label: p.label(),
            prior: *p,
            outcome,
        })
    })
    .into_iter()
    .collect()
}
