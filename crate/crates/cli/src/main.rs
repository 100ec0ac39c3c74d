//! Command-line front end: every subcommand reads its inputs, makes one
//! library call and writes the result as CSV or JSON.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! The log level is taken from `SHAPEFIT_LOG` (default `warn`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use shapefit::bandwidth::{bootstrap_criterion, BandwidthPlan};
use shapefit::bootstrap::{CurrentStatusModel, IncubationModel, SmoothedBootstrapModel};
use shapefit::confidence::{coverage_experiment, cs_ci_studentized, incubation_ci, CiSettings, CoverageConfig};
use shapefit::functionals::{asymptotic_variance_mean, mean_of_mle, smle_quantile, smle_variance_solution, Cdf};
use shapefit::incubation::{inc_mle_report, IcmOptions};
use shapefit::io::{write_rows, write_step_cdf};
use shapefit::parametric::{fit_parametric_with, Family};
use shapefit::sim::{
    experiment_mean, experiment_percentile, gen_current_status, gen_incubation, ExperimentConfig, ExperimentTable,
    Law, Method, TruthSpec,
};
use shapefit::smle::{Bandwidth, SmleCurve};
use shapefit::{cs_mle, CurrentStatusData, IncubationData, StepDistribution};

#[derive(Debug, Error)]
enum Failure {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<shapefit::Error> for Failure {
    fn from(e: shapefit::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "shapefit", version, about = "Shape-constrained estimation for current status and incubation-time data")]
struct Cli {
    /// Seed for every random draw (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    CurrentStatus,
    Incubation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Weibull,
    Lognormal,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Weibull => Family::Weibull,
            FamilyArg::Lognormal => Family::Lognormal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Functional {
    Mean,
    Smle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentKind {
    Percentile,
    Mean,
    Coverage,
}

/// Evaluation grid `a:b:step`, both ends included.
#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(format!("grid `{s}` is not of the form a:b:step"));
        };
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
        let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
        if !(a.is_finite() && b.is_finite() && step > 0.0 && b >= a) {
            return Err(format!("grid `{s}` needs finite a <= b and step > 0"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        if count > 10_000_000 {
            return Err(format!("grid `{s}` has too many points"));
        }
        Ok(Grid((0..=count).map(|k| a + k as f64 * step).collect()))
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// CSV with columns `t,delta` (current status) or `e,s` (incubation).
    #[arg(long)]
    input: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Right end of the smoothing domain (default: max T, or 20 for incubation).
    #[arg(long)]
    upper: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Nonparametric MLE as an `x,cdf` step function.
    Mle(DataArgs),
    /// SMLE on a grid as `t,cdf`.
    Smle {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        bandwidth: f64,
        #[arg(long)]
        grid: Grid,
    },
    /// Smoothed-bootstrap bandwidth selection.
    Bandwidth {
        #[command(flatten)]
        data: DataArgs,
        /// JSON plan `{c0, c_grid, B, seed, targets}`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Target points; overrides the plan's targets.
        #[arg(long)]
        grid: Option<Grid>,
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Pilot constant `c0` in `h0 = c0 n^(-1/9)`.
        #[arg(long)]
        pilot: Option<f64>,
        /// Write the local bandwidth at every target as `t,h`.
        #[arg(long)]
        local: bool,
    },
    /// Smoothed-bootstrap confidence band as `t,lower,estimate,upper`.
    Ci {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        bandwidth: f64,
        /// Pilot bandwidth `h0`.
        #[arg(long)]
        pilot: f64,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        grid: Grid,
    },
    /// Parametric maximum likelihood fit to incubation data.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Weibull truncation point.
        #[arg(long, default_value_t = 20.0)]
        upper: f64,
    },
    /// Quantile of the SMLE or of a parametric fit.
    Quantile {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.95)]
        p: f64,
        /// Required unless `--family` is given.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
    },
    /// Mean of the MLE or of a parametric fit.
    Mean {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
    },
    /// Asymptotic variance from the adjoint integral equation.
    Variance {
        #[arg(long, value_enum)]
        functional: Functional,
        /// JSON `{truth, exposure, grid_size, t, h, n}`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulated data set.
    Simulate {
        #[arg(long, value_enum)]
        model: Model,
        /// JSON `{truth, law}`; the model's standard design when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulation experiment; per-replication CSV plus a JSON summary on stdout.
    Experiment {
        #[arg(long, value_enum)]
        kind: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn open_output(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Data(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Outcome {
    let mut w = open_output(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Outcome<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("config {}: {e}", path.display())))
}

fn positive(name: &str, v: f64) -> Outcome<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn read_cs(path: &Path) -> Outcome<CurrentStatusData> {
    CurrentStatusData::read_path(path).map_err(|e| input_error(path, e))
}

fn read_inc(path: &Path) -> Outcome<IncubationData> {
    IncubationData::read_path(path).map_err(|e| input_error(path, e))
}

fn input_error(path: &Path, e: shapefit::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn incubation_upper(upper: Option<f64>) -> Outcome<f64> {
    positive("upper", upper.unwrap_or(20.0))
}

/// MLE and the domain end used for smoothing it.
fn fit_mle(data: &DataArgs) -> Outcome<(StepDistribution, f64)> {
    match data.model {
        Model::CurrentStatus => {
            let d = read_cs(&data.input)?;
            let model = CurrentStatusModel::new(&d, data.upper)?;
            Ok((cs_mle(&d)?, model.upper()))
        }
        Model::Incubation => {
            let d = read_inc(&data.input)?;
            let upper = incubation_upper(data.upper)?;
            let f = inc_mle_report(&d, None, IcmOptions::default())?.estimate;
            Ok((f, upper))
        }
    }
}

fn smoothed_curve(data: &DataArgs, h: f64, grid: &[f64]) -> Outcome<SmleCurve> {
    let (f, upper) = fit_mle(data)?;
    Ok(SmleCurve::new(&f.clip_above(upper), Bandwidth::Global(h), grid, upper)?)
}

fn run(cli: Cli) -> Outcome {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Mle(data) => {
            let f = match data.model {
                Model::CurrentStatus => cs_mle(&read_cs(&data.input)?)?,
                Model::Incubation => inc_mle_report(&read_inc(&data.input)?, None, IcmOptions::default())?.estimate,
            };
            let mut w = open_output(data.output.as_deref())?;
            write_step_cdf(&mut w, &f)?;
            w.flush()?;
        }
        Command::Smle { data, bandwidth, grid } => {
            let h = positive("bandwidth", bandwidth)?;
            let curve = smoothed_curve(&data, h, &grid.0)?;
            let mut w = open_output(data.output.as_deref())?;
            write_rows(&mut w, &["t", "cdf"], curve.grid.iter().zip(&curve.values).map(|(t, v)| vec![*t, *v]))?;
            w.flush()?;
        }
        Command::Bandwidth {
            data,
            config,
            grid,
            bootstrap,
            pilot,
            local,
        } => {
            let mut plan = match (&config, data.model) {
                (Some(p), _) => read_config::<BandwidthPlan>(p)?,
                (None, Model::CurrentStatus) => BandwidthPlan::current_status(Vec::new(), 500, seed),
                (None, Model::Incubation) => BandwidthPlan::incubation(Vec::new(), 500, seed),
            };
            if let Some(g) = grid {
                plan.targets = g.0;
            }
            if let Some(b) = bootstrap {
                plan.replications = b;
            }
            if let Some(c0) = pilot {
                plan.c0 = positive("pilot", c0)?;
            }
            if cli.seed.is_some() {
                plan.seed = seed;
            }
            if data.upper.is_some() {
                plan.upper = data.upper;
            }
            if plan.targets.is_empty() {
                return Err(Failure::Usage("no target points: pass --grid or a plan with targets".into()));
            }
            let (criterion, n) = match data.model {
                Model::CurrentStatus => {
                    let model = CurrentStatusModel::new(&read_cs(&data.input)?, plan.upper)?;
                    (bootstrap_criterion(&model, &plan)?, model.sample_size())
                }
                Model::Incubation => {
                    let model = IncubationModel::new(&read_inc(&data.input)?, incubation_upper(plan.upper)?)?;
                    (bootstrap_criterion(&model, &plan)?, model.sample_size())
                }
            };
            if local {
                let curve = criterion.local_curve();
                let mut w = open_output(data.output.as_deref())?;
                write_rows(&mut w, &["t", "h"], criterion.targets.iter().zip(&curve).map(|(t, h)| vec![*t, *h]))?;
                w.flush()?;
            } else {
                let h = criterion.select_global();
                write_json(
                    data.output.as_deref(),
                    &json!({
                        "h": h,
                        "c": h * (n as f64).powf(0.2),
                        "h0": criterion.pilot,
                        "candidates": criterion.candidates,
                        "criterion": criterion.global(),
                    }),
                )?;
            }
        }
        Command::Ci {
            data,
            bandwidth,
            pilot,
            bootstrap,
            alpha,
            grid,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Failure::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
            }
            if bootstrap < 100 {
                return Err(Failure::Usage(format!("--bootstrap must be at least 100, got {bootstrap}")));
            }
            let settings = CiSettings {
                h: positive("bandwidth", bandwidth)?,
                h0: positive("pilot", pilot)?,
                replications: bootstrap,
                alpha,
                seed,
                upper: data.upper,
            };
            let band = match data.model {
                Model::CurrentStatus => cs_ci_studentized(&read_cs(&data.input)?, &grid.0, &settings)?,
                Model::Incubation => incubation_ci(&read_inc(&data.input)?, &grid.0, &settings)?,
            };
            if band.skipped > 0 {
                log::warn!("{} bootstrap evaluations skipped for a vanishing variance estimate", band.skipped);
            }
            let mut w = open_output(data.output.as_deref())?;
            band.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Fit {
            input,
            output,
            family,
            upper,
        } => {
            let fit = fit_parametric_with(&read_inc(&input)?, family.into(), positive("upper", upper)?)?;
            write_json(output.as_deref(), &fit)?;
        }
        Command::Quantile {
            data,
            p,
            bandwidth,
            family,
        } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Failure::Usage(format!("--p must lie in (0, 1), got {p}")));
            }
            let value = match family {
                Some(fam) => {
                    if data.model != Model::Incubation {
                        return Err(Failure::Usage("parametric fits need --model incubation".into()));
                    }
                    let fit =
                        fit_parametric_with(&read_inc(&data.input)?, fam.into(), incubation_upper(data.upper)?)?;
                    json!({ "p": p, "quantile": fit.model.quantile(p), "clamped": false })
                }
                None => {
                    let h = bandwidth.ok_or_else(|| Failure::Usage("--bandwidth is required".into()))?;
                    let h = positive("bandwidth", h)?;
                    let curve = smoothed_curve(&data, h, &[0.0])?;
                    let q = smle_quantile(&curve, p)?;
                    json!({ "p": p, "quantile": q.value, "clamped": q.clamped })
                }
            };
            write_json(data.output.as_deref(), &value)?;
        }
        Command::Mean { data, family } => {
            let value = match family {
                Some(fam) => {
                    if data.model != Model::Incubation {
                        return Err(Failure::Usage("parametric fits need --model incubation".into()));
                    }
                    let fit =
                        fit_parametric_with(&read_inc(&data.input)?, fam.into(), incubation_upper(data.upper)?)?;
                    json!({ "mean": fit.model.mean(), "missing_mass": 0.0 })
                }
                None => {
                    let (f, _) = fit_mle(&data)?;
                    json!({ "mean": mean_of_mle(&f), "missing_mass": 1.0 - f.total_mass() })
                }
            };
            write_json(data.output.as_deref(), &value)?;
        }
        Command::Variance {
            functional,
            config,
            output,
        } => {
            let cfg: VarianceConfig = read_config(&config)?;
            cfg.truth.validate()?;
            let truth = cfg.truth.clone();
            let cdf = move |x: f64| truth.cdf(x);
            let f = Cdf::new(&cdf, cfg.truth.upper())?;
            let value = match functional {
                Functional::Mean => {
                    let r = asymptotic_variance_mean(f, &cfg.exposure, cfg.grid_size)?;
                    json!({
                        "sigma2": r.sigma2,
                        "grid": r.grid_size,
                        "residual": r.residual,
                        "refinement_delta": r.refinement_delta,
                    })
                }
                Functional::Smle => {
                    let missing = |name: &str| Failure::Data(format!("config {}: `{name}` is required", config.display()));
                    let t = cfg.t.ok_or_else(|| missing("t"))?;
                    let h = cfg.h.ok_or_else(|| missing("h"))?;
                    let n = cfg.n.ok_or_else(|| missing("n"))?;
                    let (sigma2, phi) = smle_variance_solution(f, &cfg.exposure, t, h, n, cfg.grid_size)?;
                    json!({ "sigma2": sigma2, "grid": cfg.grid_size, "residual": phi.residual })
                }
            };
            write_json(output.as_deref(), &value)?;
        }
        Command::Simulate {
            model,
            config,
            n,
            output,
        } => {
            if n == 0 {
                return Err(Failure::Usage("--n must be positive".into()));
            }
            let cfg = match config {
                Some(p) => read_config::<SimulateConfig>(&p)?,
                None => SimulateConfig::standard(model),
            };
            let mut w = open_output(output.as_deref())?;
            match model {
                Model::CurrentStatus => gen_current_status(n, &cfg.truth, &cfg.law, seed)?.write_csv(&mut w)?,
                Model::Incubation => gen_incubation(n, &cfg.truth, &cfg.law, seed)?.write_csv(&mut w)?,
            }
            w.flush()?;
        }
        Command::Experiment { kind, config, output } => match kind {
            ExperimentKind::Percentile | ExperimentKind::Mean => {
                let mut cfg: ExperimentConfig = read_config(&config)?;
                if let Some(s) = cli.seed {
                    cfg.seed = s;
                }
                let table = if kind == ExperimentKind::Percentile {
                    experiment_percentile(&cfg)?
                } else {
                    experiment_mean(&cfg)?
                };
                if let Some(p) = &output {
                    let mut w = open_output(Some(p))?;
                    table.write_csv(&mut w)?;
                    w.flush()?;
                }
                write_json(None, &experiment_summary(&table))?;
            }
            ExperimentKind::Coverage => {
                let mut cfg: CoverageConfig = read_config(&config)?;
                if let Some(s) = cli.seed {
                    cfg.seed = s;
                }
                let table = coverage_experiment(&cfg)?;
                let mut w = open_output(output.as_deref())?;
                table.write_csv(&mut w)?;
                w.flush()?;
            }
        },
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct VarianceConfig {
    truth: TruthSpec,
    exposure: Law,
    #[serde(default = "default_grid_size")]
    grid_size: usize,
    t: Option<f64>,
    h: Option<f64>,
    n: Option<usize>,
}

fn default_grid_size() -> usize {
    400
}

#[derive(Debug, Deserialize)]
struct SimulateConfig {
    truth: TruthSpec,
    law: Law,
}

impl SimulateConfig {
    fn standard(model: Model) -> Self {
        match model {
            Model::CurrentStatus => Self {
                truth: TruthSpec::truncated_exponential(),
                law: Law::Uniform { lower: 0.0, upper: 2.0 },
            },
            Model::Incubation => Self {
                truth: TruthSpec::incubation_weibull(),
                law: Law::Uniform { lower: 0.0, upper: 30.0 },
            },
        }
    }
}

fn experiment_summary(table: &ExperimentTable) -> serde_json::Value {
    let methods: serde_json::Map<String, serde_json::Value> = Method::ALL
        .iter()
        .filter_map(|&m| {
            table.quartiles(m).map(|q| {
                (
                    m.name().to_string(),
                    json!({ "q25": q[0], "median": q[1], "q75": q[2] }),
                )
            })
        })
        .collect();
    json!({ "truth": table.truth, "failures": table.failures.len(), "quartiles": methods })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SHAPEFIT_LOG", "warn")).init();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("usage error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
