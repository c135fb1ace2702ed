use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nnhm_core::effect::ContinuityCorrection;
use nnhm_core::engine::{tau_marginal_posterior, DEFAULT_GRID_NODES};
use nnhm_core::forest::{render_forest, render_tau_density, AxisTransform, ForestPlotSpec};
use nnhm_core::io::{load_dataset, Format};
use nnhm_core::mixture::{mixture_row, MixingLaw, MixingSpec, MixtureBase};
use nnhm_core::report::{emit_report, fmt2, sensitivity_csv, sensitivity_text, to_json, ReportFormat};
use nnhm_core::sensitivity::{run_sensitivity, SensitivityPlan};
use nnhm_core::toolkit::{category_probabilities, marginal_predictive, preset, CategoryScheme};
use nnhm_core::uisd::{empirical_uisd, prior_max_sample_size};
use nnhm_core::{AnalysisOptions, CiKind, Dataset, EffectPrior, Error, HeterogeneityPrior, Measure};

const GRID_ENV: &str = "NNHM_GRID_NODES";

#[derive(Parser)]
#[command(name = "nnhm", version, about = "Bayesian random-effects meta-analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a dataset and print τ, μ, shrinkage and prediction summaries.
    Analyze(AnalyzeArgs),
    /// Inspect or construct heterogeneity priors.
    #[command(subcommand)]
    Prior(PriorCommand),
    /// Analyze a dataset under a range of alternative priors.
    Sensitivity(SensitivityArgs),
    /// Estimate the unit information standard deviation of a dataset.
    Uisd(UisdArgs),
    /// Derive effect estimates and standard errors from raw study data.
    Effectsize(InputArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input file, CSV or JSON (by extension).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Effect measure: precomputed, md, smd, logor, logodds, logratio-ci, fisherz.
    #[arg(long, default_value = "precomputed")]
    measure: Measure,
    /// Continuity correction for zero cells.
    #[arg(long, value_enum, default_value_t = Cc::None)]
    cc: Cc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cc {
    None,
    Half,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ci {
    Shortest,
    Central,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Heterogeneity prior, e.g. halfnormal(0.5), or a preset name.
    #[arg(long)]
    prior: String,
    /// Prior for the overall effect: uniform() or normal(mean,sd).
    #[arg(long, default_value = "uniform()")]
    effect_prior: EffectPrior,
    /// Credible level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value_t = Ci::Shortest)]
    ci: Ci,
    /// Output format on stdout.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    /// Write a forest plot (SVG).
    #[arg(long, value_name = "FILE")]
    forest: Option<PathBuf>,
    /// Write the posterior density of τ (SVG).
    #[arg(long, value_name = "FILE")]
    tau_density: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PriorCommand {
    /// Prior median, mean and 95% quantile of τ, the predictive range and category probabilities.
    Inspect {
        prior: String,
        /// Categories as lo-hi,lo-hi,... (default: log odds ratio categories).
        #[arg(long)]
        categories: Option<String>,
    },
    /// Scale mixture of an exponential or half-normal prior.
    Mix {
        #[arg(long)]
        base: MixtureBase,
        /// Expectation of the mixed scale.
        #[arg(long)]
        mean: f64,
        /// Coefficient of variation of the mixed scale; 0 keeps the scale fixed.
        #[arg(long)]
        cv: f64,
    },
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    prior: String,
    #[arg(long, default_value = "uniform()")]
    effect_prior: EffectPrior,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
}

#[derive(Args)]
struct UisdArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Heterogeneity value at which to report the prior maximum sample size.
    #[arg(long)]
    tau: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nnhm: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn run(command: Command) -> Result<String, Error> {
    match command {
        Command::Analyze(a) => analyze(a),
        Command::Prior(PriorCommand::Inspect { prior, categories }) => inspect(&prior, categories.as_deref()),
        Command::Prior(PriorCommand::Mix { base, mean, cv }) => mix(base, mean, cv),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Uisd(a) => uisd(a),
        Command::Effectsize(a) => Ok(nnhm_core::report::estimates_csv(load(&a)?.studies())),
    }
}

fn load(a: &InputArgs) -> Result<Dataset, Error> {
    let cc = match a.cc {
        Cc::None => ContinuityCorrection::None,
        Cc::Half => ContinuityCorrection::Half,
    };
    load_dataset(&a.input, Format::from_path(&a.input), a.measure, cc)
}

/// A prior spec, or failing that a preset name.
fn parse_prior(s: &str) -> Result<HeterogeneityPrior, Error> {
    s.parse().or_else(|e| preset(s).map_err(|_| e))
}

fn options(level: f64, ci: Ci) -> Result<AnalysisOptions, Error> {
    if !(level > 0.5 && level < 1.0) {
        return Err(Error::Input(format!("--level must lie in (0.5, 1), got {level}")));
    }
    let grid_nodes = match std::env::var(GRID_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("{GRID_ENV} must be a positive integer, got '{v}'")))?,
        Err(_) => DEFAULT_GRID_NODES,
    };
    Ok(AnalysisOptions {
        level,
        ci_kind: match ci {
            Ci::Shortest => CiKind::Shortest,
            Ci::Central => CiKind::Central,
        },
        grid_nodes,
        ..AnalysisOptions::default()
    })
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

fn analyze(a: AnalyzeArgs) -> Result<String, Error> {
    let data = load(&a.input)?;
    let prior = parse_prior(&a.prior)?;
    let opts = options(a.level, a.ci)?;
    let report = nnhm_core::analyze(&data, &prior, &a.effect_prior, &opts)?;
    if let Some(path) = &a.forest {
        let axis = if a.input.measure.is_log_scale() { AxisTransform::Exp } else { AxisTransform::Identity };
        write(path, &render_forest(&ForestPlotSpec::from_report(&report, axis)))?;
    }
    if let Some(path) = &a.tau_density {
        let gp = tau_marginal_posterior(&data, &prior, &a.effect_prior, opts.grid_nodes, opts.execution)?;
        write(path, &render_tau_density(&gp, &prior))?;
    }
    if let Some(path) = &a.json {
        write(path, &to_json(&report)?)?;
    }
    emit_report(&report, a.format)
}

fn inspect(spec: &str, categories: Option<&str>) -> Result<String, Error> {
    let prior = parse_prior(spec)?;
    let scheme = match categories {
        Some(c) => CategoryScheme::parse(c)?,
        None => CategoryScheme::log_or_default(),
    };
    let s = prior.summarize()?;
    let pred = marginal_predictive(&prior, 0.95)?;
    let probs = category_probabilities(&prior, &scheme)?;
    let mut out = String::new();
    let _ = writeln!(out, "prior  {}", prior.label());
    let _ = writeln!(out, "median  {}", fmt2(s.median));
    let _ = writeln!(out, "mean  {}", s.mean.map_or_else(|| "undefined".to_string(), fmt2));
    let _ = writeln!(out, "q95  {}", fmt2(s.q95));
    let _ = writeln!(out, "predictive 95%  [{}, {}]", fmt2(pred.interval_lo), fmt2(pred.interval_hi));
    let _ = writeln!(out, "exp(predictive)  [{:.3}, {:.3}]", pred.exp_lo, pred.exp_hi);
    let _ = writeln!(out, "P(tau <= {})  {:.1}%", scheme.categories[0].lower, 100.0 * probs.below);
    for (name, p) in &probs.probabilities {
        let _ = writeln!(out, "P({name})  {:.1}%", 100.0 * p);
    }
    Ok(out)
}

fn mix(base: MixtureBase, mean: f64, cv: f64) -> Result<String, Error> {
    let row = mixture_row(base, MixingSpec::new(mean, cv)?)?;
    let mut out = String::new();
    let mixing = match row.mixing {
        MixingLaw::Fixed { value } => format!("fixed({value})"),
        MixingLaw::InverseGamma(ig) => format!("inverse-gamma(shape={:.3}, scale={:.3})", ig.shape, ig.scale),
        MixingLaw::ScaledInverseChi(ic) => format!("scaled-inverse-chi(df={:.3}, scale={:.3})", ic.df, ic.scale),
    };
    let m = row.mixing_summary;
    let h = row.heterogeneity;
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.3}"));
    let _ = writeln!(out, "mixing  {mixing}");
    let _ = writeln!(out, "mixing median  {:.3}   q95  {:.3}", m.median, m.q95);
    let _ = writeln!(out, "prior  {}", row.prior.label());
    let _ = writeln!(out, "tau mean  {}   cv  {}", opt(h.mean), opt(h.cv));
    let _ = writeln!(out, "tau median  {:.3}   q95  {:.3}", h.median, h.q95);
    let _ = writeln!(out, "predictive 97.5%  {:.3}", row.predictive_q975);
    Ok(out)
}

fn sensitivity(a: SensitivityArgs) -> Result<String, Error> {
    let data = load(&a.input)?;
    let plan = SensitivityPlan::new(parse_prior(&a.prior)?)?;
    let rows = run_sensitivity(&data, &plan, &a.effect_prior, &options(a.level, Ci::Shortest)?)?;
    Ok(match a.format {
        TableFormat::Text => sensitivity_text(&rows),
        TableFormat::Csv => sensitivity_csv(&rows),
    })
}

fn uisd(a: UisdArgs) -> Result<String, Error> {
    let data = load(&a.input)?;
    let u = empirical_uisd(data.studies())?;
    let mut out = format!("UISD  {:.3}\n", u.value);
    if let Some(tau) = a.tau {
        let n = prior_max_sample_size(tau, u.value)?;
        let _ = writeln!(out, "n*  {n:.1}  (tau = {tau})");
    }
    Ok(out)
}
