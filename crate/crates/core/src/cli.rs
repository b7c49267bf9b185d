//! The `windplan` command line: data generation, solving, evaluation,
//! cross-validation and method comparison.
//!
//! Exit codes: 0 success, 1 any other failure, 2 usage error, 3 infeasible
//! model, 4 iteration limit. Output files are written only once a command has
//! finished; a failing command leaves none behind.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::decomp::{dump_model, solve, Algorithm, Problem, SolveOptions};
use crate::error::Error;
use crate::evaluate::{
    compare_methods, cross_validate_kappa, mean_smoothing_variance, risk_management_cost, smoothing_variance,
    Method, Metric, SeedCase,
};
use crate::fixtures::{self, Fixture};
use crate::instance::PlanningInstance;
use crate::sampling::{
    fit_copula_generator, forecast_from_samples, generate_copula_samples, rows_to_tensor, sample_weibull_field,
    split_samples, substream, ForecastTable, MomentGrid, SampleTensor, SiteHistory,
};
use crate::solution::PlanSolution;

/// Site means and variances used by `gen-data --weibull` when none are given.
pub const WEIBULL_MEAN_RANGE: (f64, f64) = (0.96, 1.44);
pub const WEIBULL_VARIANCE_RANGE: (f64, f64) = (0.0576, 0.121);

#[derive(Debug, Parser)]
#[command(name = "windplan", version, about = "Wind-farm planning under decision-dependent Wasserstein ambiguity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write wind samples and forecasts.
    GenData(GenDataArgs),
    /// Solve a planning problem and write the plan.
    Solve(SolveArgs),
    /// Score a saved plan on test samples.
    Evaluate(EvaluateArgs),
    /// Pick kappa on a validation set.
    Cv(CvArgs),
    /// Compare planning methods at a fixed total capacity.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
#[command(group = ArgGroup::new("source").required(true).args(["weibull", "copula"]))]
pub struct GenDataArgs {
    /// Independent Weibull draws per site.
    #[arg(long)]
    pub weibull: bool,
    /// Fit a Gaussian copula to a history file (one column per site) and
    /// sample from it.
    #[arg(long, value_name = "CSV")]
    pub copula: Option<PathBuf>,
    #[arg(long, default_value_t = 3, conflicts_with = "copula")]
    pub sites: usize,
    #[arg(long, default_value_t = 1, conflicts_with = "copula")]
    pub scenarios: usize,
    #[arg(long, default_value_t = 1, conflicts_with = "copula")]
    pub periods: usize,
    /// Per-site means; evenly spread over [0.96, 1.44] when absent.
    #[arg(long, value_delimiter = ',', conflicts_with = "copula")]
    pub mean: Vec<f64>,
    /// Per-site variances; evenly spread over [0.0576, 0.121] when absent.
    #[arg(long, value_delimiter = ',', conflicts_with = "copula")]
    pub variance: Vec<f64>,
    /// Samples per (scenario, period).
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Also write this many test samples from an independent stream.
    #[arg(long)]
    pub test_n: Option<usize>,
    /// Moment-matching rounds of the copula generator [default: 5].
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Where the instance and training data come from.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Instance file; the built-in 14-bus system when absent.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Training samples; drawn from the built-in system's wind model when
    /// absent.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Forecast file; the training mean when absent.
    #[arg(long)]
    pub forecast: Option<PathBuf>,
    /// Number of generated training samples.
    #[arg(long, default_value_t = 30, conflicts_with = "samples")]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value = "cg-l", value_parser = parse_algorithm)]
    pub algo: Algorithm,
    /// Relative gap of the cut loop.
    #[arg(long, default_value_t = 1e-6)]
    pub nu: f64,
    /// Relative KKT tolerance of the conic solver.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_cg: usize,
    #[arg(long, default_value_t = 200)]
    pub max_lshaped: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// ddroc (alias ddro), ddrov, ndro or eo.
    #[arg(long, default_value = "ddroc", value_parser = parse_method)]
    pub method: Method,
    /// Radius multiplier; 0.1 when absent. Not allowed with eo.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Fix the total number of turbines.
    #[arg(long)]
    pub capacity: Option<u32>,
    #[arg(long, default_value = "solution.json")]
    pub out: PathBuf,
    /// Iteration log (CSV).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write the final model in the plain-text matrix format.
    #[arg(long)]
    pub dump_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Instance the plan was made for; the built-in 14-bus system when
    /// absent.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Risk,
    Smoothing,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Risk => Metric::RiskCost,
            MetricArg::Smoothing => Metric::SmoothingVariance,
        }
    }
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, required = true, value_delimiter = ',')]
    pub grid: Vec<f64>,
    #[arg(long, default_value = "ddroc", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = MetricArg::Risk)]
    pub metric: MetricArg,
    /// Validation samples; split off the training samples when absent.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Share kept for training when splitting.
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long)]
    pub capacity: Option<u32>,
    /// Report file; standard output only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureArg {
    /// Five sites of unequal variance on one bus.
    Heterogeneous,
    /// Four correlated sites on one bus.
    Correlated,
    /// The 14-bus system.
    Ieee14,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_delimiter = ',', default_value = "ddroc,ddrov,ndro,eo", value_parser = parse_method)]
    pub methods: Vec<Method>,
    /// Total number of turbines every method must install.
    #[arg(long, default_value_t = 40)]
    pub capacity: u32,
    /// Number of replications.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// Radius multiplier of the decision-dependent methods.
    #[arg(long, default_value_t = 3.0)]
    pub kappa: f64,
    /// Multiplier of the norm radius; 0.3 * kappa when absent.
    #[arg(long)]
    pub ndro_kappa: Option<f64>,
    #[arg(long, value_enum, default_value_t = FixtureArg::Heterogeneous)]
    pub fixture: FixtureArg,
    /// Use the true covariance instead of the sample estimate (correlated
    /// fixture only).
    #[arg(long)]
    pub true_moments: bool,
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    #[arg(long, default_value_t = 3000)]
    pub test_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(Error::Infeasible(_)) => 3,
            CliError::Run(Error::IterationLimit { .. }) => 4,
            CliError::Run(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Files produced by a command, written together at the end.
#[derive(Debug, Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.0.push((path.into(), bytes.into()));
    }

    /// Writes every file under a temporary name, then renames them all; on
    /// failure the temporaries are removed and nothing is left.
    fn commit(self) -> crate::Result<()> {
        let tmp = |p: &Path| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            p.with_file_name(format!(".{name}.tmp"))
        };
        let mut written = Vec::new();
        for (path, bytes) in &self.0 {
            let t = tmp(path);
            if let Err(e) = std::fs::write(&t, bytes) {
                written.iter().for_each(|w: &PathBuf| drop(std::fs::remove_file(w)));
                return Err(e.into());
            }
            written.push(t);
        }
        for ((path, _), t) in self.0.iter().zip(&written) {
            std::fs::rename(t, path)?;
        }
        Ok(())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to standard output and error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return code;
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Run(Error::IterationLimit { log, .. }) = &e {
                eprint!("{log}");
            }
            e.exit_code()
        }
    }
}

/// Runs a parsed command and returns what it prints.
pub fn execute(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Cv(a) => cv_cmd(a),
        Command::Compare(a) => compare_cmd(a),
    }
}

fn spread((lo, hi): (f64, f64), w: usize, k: usize) -> f64 {
    if w <= 1 {
        lo
    } else {
        lo + (hi - lo) * k as f64 / (w - 1) as f64
    }
}

fn site_values(given: &[f64], sites: usize, range: (f64, f64), flag: &str) -> CliResult<Vec<f64>> {
    match given.len() {
        0 => Ok((0..sites).map(|k| spread(range, sites, k)).collect()),
        1 => Ok(vec![given[0]; sites]),
        len if len == sites => Ok(given.to_vec()),
        len => Err(usage(format!("--{flag} has {len} values for {sites} sites"))),
    }
}

fn tensor_csv(t: &SampleTensor) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf)?;
    Ok(buf)
}

fn forecast_csv(f: &ForecastTable) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f.write_csv(&mut buf)?;
    Ok(buf)
}

fn gen_data(a: GenDataArgs) -> CliResult<String> {
    if a.n < 1 || a.test_n == Some(0) {
        return Err(usage("sample counts must be positive"));
    }
    if a.iterations.is_some() && a.copula.is_none() {
        return Err(usage("--iterations only applies to --copula"));
    }
    if !a.out.is_dir() {
        return Err(usage(format!("output directory {} does not exist", a.out.display())));
    }
    let (train, test) = match &a.copula {
        Some(path) => {
            let iterations = a.iterations.unwrap_or(crate::sampling::DEFAULT_COPULA_ITERATIONS);
            if iterations < 1 {
                return Err(usage("--iterations must be at least 1"));
            }
            if a.n < 2 || a.test_n == Some(1) {
                return Err(usage("the copula generator needs at least two samples"));
            }
            let history = SiteHistory::load(path)?;
            let model = fit_copula_generator(&history.columns)?;
            let draw = |n, label| -> CliResult<SampleTensor> {
                let rows = generate_copula_samples(&model, n, iterations, substream(a.seed, label))?;
                Ok(rows_to_tensor(&rows)?)
            };
            (draw(a.n, "data")?, a.test_n.map(|n| draw(n, "test")).transpose()?)
        }
        None => {
            if a.sites < 1 || a.scenarios < 1 || a.periods < 1 {
                return Err(usage("--sites, --scenarios and --periods must be positive"));
            }
            let mean = site_values(&a.mean, a.sites, WEIBULL_MEAN_RANGE, "mean")?;
            let variance = site_values(&a.variance, a.sites, WEIBULL_VARIANCE_RANGE, "variance")?;
            let grid = MomentGrid::uniform(a.scenarios, a.periods, &mean, &variance);
            let draw = |n, label| sample_weibull_field(&grid, n, substream(a.seed, label));
            (draw(a.n, "data")?, a.test_n.map(|n| draw(n, "test")).transpose()?)
        }
    };
    let mut out = Outputs::default();
    out.add(a.out.join("samples.csv"), tensor_csv(&train)?);
    out.add(a.out.join("forecast.csv"), forecast_csv(&forecast_from_samples(&train))?);
    if let Some(test) = &test {
        out.add(a.out.join("test.csv"), tensor_csv(test)?);
    }
    let mut msg = format!(
        "wrote {} samples for {} sites over {}x{} periods to {}\n",
        train.samples(),
        train.sites(),
        train.scenarios(),
        train.periods(),
        a.out.display()
    );
    if let Some(test) = &test {
        writeln!(msg, "wrote {} test samples", test.samples()).ok();
    }
    out.commit()?;
    Ok(msg)
}

fn solve_options(a: &SolverArgs) -> CliResult<SolveOptions> {
    if !(a.nu > 0.0) || !(a.tol > 0.0) {
        return Err(usage("--nu and --tol must be positive"));
    }
    if a.max_cg < 1 || a.max_lshaped < 1 {
        return Err(usage("iteration limits must be positive"));
    }
    let mut opts = SolveOptions::with_algorithm(a.algo);
    opts.nu = a.nu;
    opts.solver.tol = a.tol;
    opts.max_cg_iterations = a.max_cg;
    opts.max_lshaped_iterations = a.max_lshaped;
    Ok(opts)
}

fn resolve_kappa(method: Method, kappa: Option<f64>) -> CliResult<f64> {
    match (method, kappa) {
        (Method::Eo, Some(_)) => Err(usage("--method eo forbids --kappa")),
        (Method::Eo, None) => Ok(0.0),
        (_, Some(k)) if !(k >= 0.0) || !k.is_finite() => Err(usage(format!("--kappa must be a nonnegative number, got {k}"))),
        (_, k) => Ok(k.unwrap_or(0.1)),
    }
}

fn load_instance(path: Option<&Path>) -> CliResult<PlanningInstance> {
    match path {
        Some(p) => {
            let inst = PlanningInstance::load(p)?;
            inst.check()?;
            Ok(inst)
        }
        None => Ok(fixtures::ieee14_fixture()?.instance),
    }
}

/// Instance, training samples and optional forecast named by `a`.
fn load_data(a: &DataArgs, label: &str) -> CliResult<(PlanningInstance, SampleTensor, Option<ForecastTable>)> {
    if a.instance.is_some() && a.samples.is_none() {
        return Err(usage("--instance needs --samples (samples are only generated for the built-in system)"));
    }
    let inst = load_instance(a.instance.as_deref())?;
    let train = match &a.samples {
        Some(p) => SampleTensor::load(p)?,
        None => {
            if a.n < 2 {
                return Err(usage("--n must be at least 2"));
            }
            fixtures::ieee14_fixture()?.samples(a.n, substream(a.seed, label))?
        }
    };
    train.check_shape(inst.num_scenarios(), inst.num_periods(), inst.num_sites())?;
    let forecast = a.forecast.as_deref().map(ForecastTable::load).transpose()?;
    Ok((inst, train, forecast))
}

fn build_problem(
    inst: PlanningInstance,
    train: SampleTensor,
    forecast: Option<ForecastTable>,
    method: Method,
    kappa: f64,
    capacity: Option<u32>,
) -> CliResult<Problem> {
    if let Some(cap) = capacity {
        let max: u64 = inst.wind_sites.iter().map(|w| u64::from(w.max_turbines)).sum();
        if u64::from(cap) > max {
            return Err(Error::Infeasible(format!("capacity {cap} exceeds the {max} turbines the sites can hold")).into());
        }
    }
    let mut problem = Problem::new(inst, train, method.spec(kappa))?;
    if let Some(f) = forecast {
        problem = problem.with_forecast(f);
    }
    if let Some(cap) = capacity {
        problem = problem.with_capacity(cap);
    }
    Ok(problem)
}

fn solve_cmd(a: SolveArgs) -> CliResult<String> {
    let kappa = resolve_kappa(a.method, a.kappa)?;
    let opts = solve_options(&a.solver)?;
    let (inst, train, forecast) = load_data(&a.data, "data")?;
    let problem = build_problem(inst, train, forecast, a.method, kappa, a.capacity)?;
    let (plan, log) = solve(&problem, &opts)?;

    let mut out = Outputs::default();
    out.add(&a.out, plan.to_json()?);
    if let Some(path) = &a.log {
        out.add(path, log.to_string());
    }
    if let Some(path) = &a.dump_model {
        out.add(path, dump_model(&problem, &plan)?);
    }
    out.commit()?;

    let d = &plan.diagnostics;
    let mut msg = String::new();
    writeln!(msg, "algorithm {} method {} kappa {kappa}", d.algorithm, a.method).ok();
    writeln!(msg, "turbines {:?}", plan.turbines).ok();
    writeln!(msg, "objective {:.10}", plan.objective).ok();
    writeln!(
        msg,
        "tuples {} cuts {} cg_rounds {} lshaped_iterations {} violations {}",
        d.tuples,
        d.cuts,
        d.cg_iterations,
        d.lshaped_iterations,
        d.violations.len()
    )
    .ok();
    Ok(msg)
}

/// The evaluation report of a plan: `metric,value` lines.
pub fn evaluation_report(inst: &PlanningInstance, plan: &PlanSolution, test: &SampleTensor) -> crate::Result<String> {
    test.check_shape(inst.num_scenarios(), inst.num_periods(), inst.num_sites())?;
    let x = plan.x();
    let b = &plan.breakdown;
    let mut r = String::from("metric,value\n");
    writeln!(r, "risk_cost,{}", risk_management_cost(inst, plan, test)?).ok();
    writeln!(r, "smoothing_variance,{}", mean_smoothing_variance(&x, test)?).ok();
    for s in 0..test.scenarios() {
        for t in 0..test.periods() {
            writeln!(r, "smoothing_variance_{s}_{t},{}", smoothing_variance(&x, test, s, t)?).ok();
        }
    }
    for (name, v) in [
        ("investment", b.investment),
        ("generation", b.generation),
        ("reserve", b.reserve),
        ("regularizer", b.regularizer),
        ("recourse", b.recourse),
        ("total", b.total),
    ] {
        writeln!(r, "{name},{v}").ok();
    }
    Ok(r)
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult<String> {
    let plan = PlanSolution::load(&a.solution)?;
    let test = SampleTensor::load(&a.test)?;
    let inst = load_instance(a.instance.as_deref())?;
    if plan.turbines.len() != inst.num_sites() {
        return Err(usage(format!(
            "the plan has {} sites, the instance {}",
            plan.turbines.len(),
            inst.num_sites()
        )));
    }
    let report = evaluation_report(&inst, &plan, &test)?;
    match &a.out {
        Some(path) => {
            let mut out = Outputs::default();
            out.add(path, report.clone());
            out.commit()?;
            Ok(report)
        }
        None => Ok(report),
    }
}

fn cv_cmd(a: CvArgs) -> CliResult<String> {
    if a.method == Method::Eo {
        return Err(usage("cv tunes kappa and --method eo has none"));
    }
    if let Some(k) = a.grid.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
        return Err(usage(format!("grid value {k} must be a nonnegative number")));
    }
    let opts = solve_options(&a.solver)?;
    let (inst, samples, forecast) = load_data(&a.data, "data")?;
    let (train, validation) = match (&a.validation, &a.data.samples) {
        (Some(p), _) => (samples, SampleTensor::load(p)?),
        (None, Some(_)) => split_samples(&samples, a.train_fraction, substream(a.data.seed, "split"))?,
        (None, None) => {
            let n = (a.data.n as f64 * (1.0 - a.train_fraction) / a.train_fraction).ceil().max(2.0) as usize;
            let v = fixtures::ieee14_fixture()?.samples(n, substream(a.data.seed, "cv"))?;
            (samples, v)
        }
    };
    validation.check_shape(inst.num_scenarios(), inst.num_periods(), inst.num_sites())?;
    let problem = build_problem(inst, train, forecast, a.method, 0.0, a.capacity)?;
    let report = cross_validate_kappa(&problem, &validation, &a.grid, a.metric.into(), &opts)?;
    let mut text = String::from("kappa,score\n");
    for (k, v) in &report.scores {
        writeln!(text, "{k},{v}").ok();
    }
    writeln!(text, "best,{}", report.best).ok();
    if let Some(path) = &a.out {
        let mut out = Outputs::default();
        out.add(path, text.clone());
        out.commit()?;
    }
    Ok(text)
}

fn compare_cmd(a: CompareArgs) -> CliResult<String> {
    if a.methods.is_empty() {
        return Err(usage("--methods is empty"));
    }
    if a.seeds < 1 || a.n < 2 || a.test_n < 2 {
        return Err(usage("--seeds must be positive and --n, --test-n at least 2"));
    }
    if !(a.kappa >= 0.0) || !a.kappa.is_finite() {
        return Err(usage("--kappa must be a nonnegative number"));
    }
    let ndro = a.ndro_kappa.unwrap_or(0.3 * a.kappa);
    if !(ndro >= 0.0) || !ndro.is_finite() {
        return Err(usage("--ndro-kappa must be a nonnegative number"));
    }
    if a.true_moments && a.fixture != FixtureArg::Correlated {
        return Err(usage("--true-moments needs --fixture correlated"));
    }
    let opts = solve_options(&a.solver)?;
    let mut methods: Vec<Method> = a.methods.clone();
    methods.sort();
    methods.dedup();
    let methods: Vec<(Method, f64)> = methods
        .into_iter()
        .map(|m| match m {
            Method::Ndro => (m, ndro),
            Method::Eo => (m, 0.0),
            _ => (m, a.kappa),
        })
        .collect();

    let fixture: Option<Fixture> = match a.fixture {
        FixtureArg::Heterogeneous => Some(fixtures::heterogeneous_sites()?),
        FixtureArg::Ieee14 => Some(fixtures::ieee14_fixture()?),
        FixtureArg::Correlated => None,
    };
    let inst = match &fixture {
        Some(f) => f.instance.clone(),
        None => fixtures::correlated_sites()?,
    };
    let draw = |n: usize, seed: u64| match &fixture {
        Some(f) => f.samples(n, seed),
        None => fixtures::correlated_samples(n, seed),
    };
    let cases = (0..a.seeds)
        .map(|i| {
            Ok(SeedCase {
                seed: i as u64,
                train: draw(a.n, substream(a.seed, &format!("data-train-{i}")))?,
                test: draw(a.test_n, substream(a.seed, &format!("data-test-{i}")))?,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let max: u64 = inst.wind_sites.iter().map(|w| u64::from(w.max_turbines)).sum();
    if u64::from(a.capacity) > max {
        return Err(Error::Infeasible(format!("capacity {} exceeds the {max} turbines the sites can hold", a.capacity)).into());
    }
    let truth = if a.true_moments { Some(fixtures::correlated_moments()?) } else { None };
    let report = compare_methods(&inst, &cases, &methods, Some(a.capacity), truth.as_ref(), &opts)?;

    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    let mut out = Outputs::default();
    for (name, text) in report.files()? {
        out.add(a.out.join(name), text);
    }
    out.commit()?;
    let mut msg = report.summary();
    let ms: Vec<Method> = methods.iter().map(|m| m.0).collect();
    for (i, &x) in ms.iter().enumerate() {
        for &y in &ms[i + 1..] {
            for metric in [Metric::RiskCost, Metric::SmoothingVariance] {
                writeln!(msg, "{x}<={y} {metric:?} {:.2}", report.win_fraction(x, y, metric)).ok();
            }
        }
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("windplan").chain(args.iter().copied()))
    }

    #[test]
    fn empirical_method_rejects_kappa() {
        assert!(matches!(resolve_kappa(Method::Eo, Some(0.5)), Err(CliError::Usage(_))));
        assert_eq!(resolve_kappa(Method::Eo, None).unwrap(), 0.0);
        assert_eq!(resolve_kappa(Method::DdroV, None).unwrap(), 0.1);
        assert!(resolve_kappa(Method::Ndro, Some(-1.0)).is_err());
        assert!(resolve_kappa(Method::Ndro, Some(f64::NAN)).is_err());
    }

    #[test]
    fn exit_codes_follow_the_error_kind() {
        assert_eq!(usage("x").exit_code(), 2);
        assert_eq!(CliError::from(Error::Infeasible("x".into())).exit_code(), 3);
        let limit = Error::IterationLimit {
            what: "cut loop",
            iterations: 1,
            log: Box::default(),
        };
        assert_eq!(CliError::from(limit).exit_code(), 4);
        assert_eq!(CliError::from(Error::Invalid("x".into())).exit_code(), 1);
    }

    #[test]
    fn flag_conflicts_are_parse_errors() {
        assert!(parse(&["gen-data"]).is_err());
        assert!(parse(&["gen-data", "--weibull", "--copula", "h.csv"]).is_err());
        assert!(parse(&["gen-data", "--copula", "h.csv", "--sites", "2"]).is_err());
        assert!(parse(&["solve", "--samples", "s.csv", "--n", "4"]).is_err());
        assert!(parse(&["solve", "--algo", "dc"]).is_err());
        assert!(parse(&["cv"]).is_err());
        let cli = parse(&["solve", "--algo", "cg", "--method", "ddro", "--kappa", "0.5"]).unwrap();
        match cli.command {
            Command::Solve(a) => {
                assert_eq!((a.solver.algo, a.method, a.kappa), (Algorithm::Cg, Method::DdroC, Some(0.5)));
            }
            _ => panic!("expected solve"),
        }
    }

    #[test]
    fn default_moments_spread_over_the_range() {
        let m = site_values(&[], 3, WEIBULL_MEAN_RANGE, "--mean").unwrap();
        assert_eq!(m, vec![0.96, 1.2, 1.44]);
        assert_eq!(site_values(&[], 1, WEIBULL_MEAN_RANGE, "--mean").unwrap(), vec![0.96]);
        assert!(site_values(&[1.0, 2.0], 3, WEIBULL_MEAN_RANGE, "--mean").is_err());
    }

    #[test]
    fn failed_commit_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::default();
        out.add(dir.path().join("a.txt"), "a");
        out.add(dir.path().join("missing").join("b.txt"), "b");
        assert!(out.commit().is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn instance_without_samples_is_a_usage_error() {
        let cli = parse(&["solve", "--instance", "i.json"]).unwrap();
        assert_eq!(execute(cli).unwrap_err().exit_code(), 2);
        let cli = parse(&["gen-data", "--weibull", "--iterations", "3"]).unwrap();
        assert_eq!(execute(cli).unwrap_err().exit_code(), 2);
        let cli = parse(&["cv", "--grid", "0,1", "--method", "eo"]).unwrap();
        assert_eq!(execute(cli).unwrap_err().exit_code(), 2);
    }
}
