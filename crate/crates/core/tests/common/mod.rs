#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

pub mod oracle;

use std::path::PathBuf;

use nnhm_core::effect::ContinuityCorrection;
use nnhm_core::io::{load_dataset, Format};
use nnhm_core::{Dataset, HeterogeneityPrior, Measure};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str, measure: Measure) -> Dataset {
    load_dataset(&fixture_path(name), Format::Csv, measure, ContinuityCorrection::None)
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// The seven example datasets with the prior each was analyzed with.
pub fn examples() -> Vec<(&'static str, Dataset, HeterogeneityPrior)> {
    let hn = |s| HeterogeneityPrior::HalfNormal { scale: s };
    vec![
        ("grande", fixture("grande_md.csv", Measure::Md), hn(0.5)),
        ("aalbers", fixture("aalbers_smd.csv", Measure::Smd), hn(0.5)),
        ("crins", fixture("crins_logor.csv", Measure::LogOr), hn(0.5)),
        ("anker", fixture("anker_logirr.csv", Measure::LogRatioCi), hn(0.5)),
        ("neuenschwander", fixture("neuenschwander_logodds.csv", Measure::LogOdds), hn(1.0)),
        ("bergau", fixture("bergau_loghr.csv", Measure::LogRatioCi), hn(0.125)),
        ("molloy", fixture("molloy_fisherz.csv", Measure::FisherZ), hn(0.2)),
    ]
}

/// Collects mismatches for one group of checks.
#[derive(Default)]
pub struct Checks {
    pub count: usize,
    pub failures: Vec<String>,
}

impl Checks {
    pub fn close(&mut self, what: impl AsRef<str>, got: f64, want: f64, tol: f64) {
        self.count += 1;
        if !((got - want).abs() <= tol) {
            self.failures.push(format!("{}: got {got:.6}, want {want} (tol {tol})", what.as_ref()));
        }
    }

    /// Values read off an exponentiated scale: within `tol` either absolutely
    /// or on the log scale.
    pub fn close_exp(&mut self, what: impl AsRef<str>, got: f64, want: f64, tol: f64) {
        self.count += 1;
        let ok = (got - want).abs() <= tol || (got.ln() - want.ln()).abs() <= tol;
        if !ok {
            self.failures.push(format!("{}: got {got:.6e}, want {want} (tol {tol}, abs or log)", what.as_ref()));
        }
    }

    pub fn truth(&mut self, what: impl AsRef<str>, ok: bool) {
        self.count += 1;
        if !ok {
            self.failures.push(what.as_ref().to_string());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}
