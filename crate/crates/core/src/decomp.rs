//! Solution pipelines: the extensive form, lazy line constraints around an
//! inner solver, and the cut loop that replaces the sample copies of the
//! recourse problem by optimality cuts.

use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use windplan_conic::{BnbSettings, SolverSettings};

use crate::ambiguity::{AmbiguitySpec, MomentTable, RadiusMode};
use crate::error::{Error, Result};
use crate::instance::PlanningInstance;
use crate::model::{assemble_extensive, assemble_master, ModelData, TupleSet};
use crate::recourse::{empirical_recourse_expectation, line_flow_check};
use crate::sampling::{forecast_from_samples, ForecastTable, SampleTensor};
use crate::solution::{evaluate_objective, CostBreakdown, Diagnostics, LineTuple, PlanSolution, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Every line tuple in exact form, one integer solve.
    Extensive,
    /// Lazy line constraints over extensive solves.
    Cg,
    /// Lazy line constraints over the cut loop.
    CgL,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Extensive => "extensive",
            Algorithm::Cg => "cg",
            Algorithm::CgL => "cg-l",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extensive" => Ok(Algorithm::Extensive),
            "cg" => Ok(Algorithm::Cg),
            "cg-l" | "cg_l" => Ok(Algorithm::CgL),
            _ => Err(Error::Invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub algorithm: Algorithm,
    pub max_cg_iterations: usize,
    pub max_lshaped_iterations: usize,
    /// Relative gap of the cut loop.
    pub nu: f64,
    /// Run the cut loop on the continuous master before branching.
    pub warm_start: bool,
    pub solver: SolverSettings,
    pub bnb: BnbSettings,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::CgL,
            max_cg_iterations: 50,
            max_lshaped_iterations: 200,
            nu: 1e-6,
            warm_start: true,
            solver: SolverSettings::default(),
            bnb: BnbSettings::default(),
        }
    }
}

impl SolveOptions {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }
}

/// Instance, training data and ambiguity settings of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub instance: PlanningInstance,
    pub train: SampleTensor,
    pub forecast: ForecastTable,
    pub moments: Option<MomentTable>,
    pub spec: AmbiguitySpec,
    pub total_capacity: Option<u32>,
}

impl Problem {
    /// Forecast = training mean; moments from the training samples when the
    /// mode needs them.
    pub fn new(instance: PlanningInstance, train: SampleTensor, spec: AmbiguitySpec) -> Result<Self> {
        let forecast = forecast_from_samples(&train);
        let moments = match spec.mode {
            RadiusMode::FullCovariance | RadiusMode::Diagonal => Some(MomentTable::from_samples(&train)?),
            _ => None,
        };
        Ok(Self {
            instance,
            train,
            forecast,
            moments,
            spec,
            total_capacity: None,
        })
    }

    pub fn with_forecast(mut self, forecast: ForecastTable) -> Self {
        self.forecast = forecast;
        self
    }

    /// Replaces the estimated moments, e.g. by the true ones.
    pub fn with_moments(mut self, moments: MomentTable) -> Self {
        self.moments = Some(moments);
        self
    }

    pub fn with_capacity(mut self, total: u32) -> Self {
        self.total_capacity = Some(total);
        self
    }

    pub fn data(&self) -> ModelData<'_> {
        ModelData {
            inst: &self.instance,
            train: &self.train,
            forecast: &self.forecast,
            moments: self.moments.as_ref(),
            spec: &self.spec,
            total_capacity: self.total_capacity,
        }
    }

    pub fn violations(&self, x: &[f64], schedule: &Schedule) -> Result<Vec<LineTuple>> {
        line_flow_check(&self.instance, x, schedule, &self.train, self.moments.as_ref(), &self.spec)
    }

    pub fn evaluate(&self, x: &[f64], schedule: &Schedule, phi: f64) -> Result<CostBreakdown> {
        evaluate_objective(
            &self.instance,
            &self.train,
            &self.forecast,
            self.moments.as_ref(),
            &self.spec,
            phi,
            x,
            schedule,
        )
    }
}

/// Optimality cut `q_st >= x.x + up.r_up + down.r_down + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub s: usize,
    pub t: usize,
    pub x: Vec<f64>,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub constant: f64,
    pub iteration: usize,
}

impl Cut {
    /// Cut from the per-sample recourse duals at `(x, schedule)`; returns the
    /// cut and the sample-average recourse there.
    pub fn generate(data: &ModelData<'_>, s: usize, t: usize, x: &[f64], schedule: &Schedule, iteration: usize) -> (Self, f64) {
        let inst = data.inst;
        let rows = data.train.rows(s, t);
        let forecast = data.forecast.period(s, t);
        let units = schedule.units(inst, s, t);
        let rec = empirical_recourse_expectation(x, &rows, forecast, &units, inst.costs.wc, inst.costs.ls);
        let n = rows.len() as f64;
        let g = units.len();
        let mut cut = Cut {
            s,
            t,
            x: vec![0.0; x.len()],
            up: vec![0.0; g],
            down: vec![0.0; g],
            constant: 0.0,
            iteration,
        };
        for (obs, sol) in rows.iter().zip(&rec.solutions) {
            for w in 0..x.len() {
                cut.x[w] -= (obs[w] - forecast[w]) * sol.gamma / n;
            }
            for k in 0..g {
                cut.up[k] -= sol.mu_up[k] / n;
                cut.down[k] -= sol.mu_down[k] / n;
            }
        }
        (cut, rec.mean)
    }

    pub fn value(&self, x: &[f64], up: &[f64], down: &[f64]) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
        self.constant + dot(&self.x, x) + dot(&self.up, up) + dot(&self.down, down)
    }

    fn key(&self) -> (usize, usize, Vec<i64>) {
        let q = |v: &f64| (v / 1e-9).round() as i64;
        let coefs = self
            .x
            .iter()
            .chain(&self.up)
            .chain(&self.down)
            .chain(std::iter::once(&self.constant))
            .map(q)
            .collect();
        (self.s, self.t, coefs)
    }
}

/// Cuts kept across line-constraint rounds, deduplicated at 1e-9.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    cuts: Vec<Cut>,
    seen: HashSet<(usize, usize, Vec<i64>)>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cut: Cut) -> bool {
        if self.seen.insert(cut.key()) {
            self.cuts.push(cut);
            true
        } else {
            false
        }
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iter: usize,
    pub lb: f64,
    pub ub: f64,
    pub cuts: usize,
    pub tuples: usize,
    pub ms: u128,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{},{}", self.iter, self.lb, self.ub, self.cuts, self.tuples, self.ms)
    }
}

/// Iteration log; `iter,lb,ub,cuts,tuples,ms` per line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveLog {
    pub entries: Vec<LogEntry>,
    /// Index of the first entry of each line-constraint round.
    pub rounds: Vec<usize>,
}

impl SolveLog {
    pub const HEADER: &'static str = "iter,lb,ub,cuts,tuples,ms";

    pub fn lines(&self) -> Vec<String> {
        self.entries.iter().map(ToString::to_string).collect()
    }

    /// Entries of each round, in order.
    pub fn round_entries(&self) -> Vec<&[LogEntry]> {
        let mut out = Vec::new();
        for (k, &start) in self.rounds.iter().enumerate() {
            let end = self.rounds.get(k + 1).copied().unwrap_or(self.entries.len());
            out.push(&self.entries[start..end]);
        }
        out
    }

    fn push(&mut self, clock: &Instant, lb: f64, ub: f64, cuts: usize, tuples: usize) {
        self.entries.push(LogEntry {
            iter: self.entries.len() + 1,
            lb,
            ub,
            cuts,
            tuples,
            ms: clock.elapsed().as_millis(),
        });
    }
}

impl fmt::Display for SolveLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::HEADER)?;
        for e in &self.entries {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Outcome of one inner solve for a fixed tuple set.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub turbines: Vec<u32>,
    pub schedule: Schedule,
    pub objective: f64,
    pub lower_bound: f64,
    pub phi: f64,
    pub nodes: usize,
    pub iterations: usize,
}

fn relative_gap(ub: f64, lb: f64) -> f64 {
    (ub - lb) / lb.abs().max(1.0)
}

fn extensive_inner(
    data: &ModelData<'_>,
    tuples: &TupleSet,
    opts: &SolveOptions,
    log: &mut SolveLog,
    clock: &Instant,
) -> Result<InnerSolution> {
    let model = assemble_extensive(data, tuples)?;
    let int = model.solve_integer(&opts.solver, &opts.bnb)?;
    let (turbines, _) = model.extract(&int.x);
    let polished = model.solve_fixed(&turbines, &opts.solver)?;
    let (_, schedule) = model.extract(&polished.x);
    let objective = polished.objective;
    let lower_bound = int.best_bound.min(objective);
    log.push(clock, lower_bound, objective, 0, tuples.len());
    Ok(InnerSolution {
        turbines,
        schedule,
        objective,
        lower_bound,
        phi: model.phi,
        nodes: int.nodes,
        iterations: 1,
    })
}

fn lshaped_inner(
    data: &ModelData<'_>,
    tuples: &TupleSet,
    pool: &mut CutPool,
    opts: &SolveOptions,
    log: &mut SolveLog,
    clock: &Instant,
) -> Result<InnerSolution> {
    let inst = data.inst;
    let (sc, pe) = (inst.num_scenarios(), inst.num_periods());
    let mut master = assemble_master(data, tuples)?;
    for cut in pool.cuts() {
        master.add_cut(cut)?;
    }
    let master_bnb = BnbSettings {
        gap_tol: opts.bnb.gap_tol.min(opts.nu * 0.1),
        ..opts.bnb
    };
    let mut integer = !opts.warm_start;
    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    let mut relaxed_ub = f64::INFINITY;
    let mut best: Option<(Vec<u32>, Schedule)> = None;
    let mut nodes = 0;
    for it in 1..=opts.max_lshaped_iterations {
        let (xs, bound) = if integer {
            let sol = master.solve_integer(&opts.solver, &master_bnb)?;
            nodes += sol.nodes;
            (sol.x, sol.best_bound)
        } else {
            let sol = master.solve_relaxed(&opts.solver)?;
            nodes += 1;
            let obj = sol.objective;
            (sol.x, obj)
        };
        lb = lb.max(bound);
        let (turbines, schedule) = master.extract(&xs);
        let x: Vec<f64> = if integer {
            turbines.iter().map(|&v| f64::from(v)).collect()
        } else {
            master.x.iter().map(|v| xs[v.index()]).collect()
        };
        let mut value = master.program.objective_value(&xs);
        let mut added = 0;
        for s in 0..sc {
            let dur = inst.scenarios.duration[s];
            for t in 0..pe {
                let (cut, q) = Cut::generate(data, s, t, &x, &schedule, it);
                value += dur * (q - xs[master.q[s * pe + t].index()]);
                if pool.insert(cut.clone()) {
                    master.add_cut(&cut)?;
                    added += 1;
                }
            }
        }
        if integer {
            if value < ub {
                ub = value;
                best = Some((turbines, schedule));
            }
            log.push(clock, lb, ub, pool.len(), tuples.len());
            if relative_gap(ub, lb) <= opts.nu || added == 0 {
                let (turbines, schedule) = best.expect("an incumbent exists once ub is finite");
                return Ok(InnerSolution {
                    turbines,
                    schedule,
                    objective: ub,
                    lower_bound: lb,
                    phi: master.phi,
                    nodes,
                    iterations: it,
                });
            }
        } else {
            relaxed_ub = relaxed_ub.min(value);
            log.push(clock, lb, f64::INFINITY, pool.len(), tuples.len());
            if relative_gap(relaxed_ub, lb) <= opts.nu || added == 0 {
                integer = true;
            }
        }
    }
    Err(Error::IterationLimit {
        what: "cut loop",
        iterations: opts.max_lshaped_iterations,
        log: Box::new(log.clone()),
    })
}

fn finish(
    problem: &Problem,
    inner: InnerSolution,
    tuples: &TupleSet,
    algorithm: Algorithm,
    cg_iterations: usize,
    lshaped_iterations: usize,
    cuts: usize,
    log: &SolveLog,
    clock: &Instant,
) -> Result<PlanSolution> {
    let x: Vec<f64> = inner.turbines.iter().map(|&v| f64::from(v)).collect();
    let breakdown = problem.evaluate(&x, &inner.schedule, inner.phi)?;
    let violations = problem.violations(&x, &inner.schedule)?;
    let mut blocks: Vec<(usize, usize, usize)> = tuples.default_blocks().copied().collect();
    blocks.sort_unstable();
    Ok(PlanSolution {
        turbines: inner.turbines,
        schedule: inner.schedule,
        forecast: problem.forecast.clone(),
        objective: inner.objective,
        breakdown,
        diagnostics: Diagnostics {
            algorithm: algorithm.name().into(),
            mode: Some(problem.spec.mode),
            model_objective: inner.objective,
            lower_bound: inner.lower_bound,
            cg_iterations,
            lshaped_iterations,
            cuts,
            nodes: inner.nodes,
            tuples: tuples.len(),
            line_blocks: blocks,
            exact_directions: tuples.exact_directions().copied().collect(),
            violations,
            wall_ms: clock.elapsed().as_millis(),
            log: log.lines(),
        },
    })
}

/// Which solver handles each round of [`constraint_generation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    Extensive,
    LShaped,
}

/// Starts without line constraints, solves, and adds every violated tuple:
/// in default form the first time its line appears, upgraded to the exact
/// form when the line already has a block. Stops once the plan passes the
/// line check.
pub fn constraint_generation(problem: &Problem, inner: InnerSolver, opts: &SolveOptions) -> Result<(PlanSolution, SolveLog)> {
    let data = problem.data();
    data.check()?;
    let clock = Instant::now();
    let mut log = SolveLog::default();
    let mut tuples = TupleSet::new();
    let mut pool = CutPool::new();
    let mut lshaped_iterations = 0;
    for round in 1..=opts.max_cg_iterations {
        log.rounds.push(log.entries.len());
        let sol = match inner {
            InnerSolver::Extensive => extensive_inner(&data, &tuples, opts, &mut log, &clock)?,
            InnerSolver::LShaped => lshaped_inner(&data, &tuples, &mut pool, opts, &mut log, &clock)?,
        };
        lshaped_iterations += if inner == InnerSolver::LShaped { sol.iterations } else { 0 };
        let x: Vec<f64> = sol.turbines.iter().map(|&v| f64::from(v)).collect();
        let violated = problem.violations(&x, &sol.schedule)?;
        if violated.is_empty() {
            let algorithm = match inner {
                InnerSolver::Extensive => Algorithm::Cg,
                InnerSolver::LShaped => Algorithm::CgL,
            };
            let plan = finish(problem, sol, &tuples, algorithm, round, lshaped_iterations, pool.len(), &log, &clock)?;
            return Ok((plan, log));
        }
        let before = tuples.clone();
        for tuple in violated {
            if before.has_block(tuple.s, tuple.t, tuple.l) {
                if !tuples.insert_exact(tuple) {
                    return Err(Error::Stalled((tuple.s, tuple.t, tuple.l, tuple.k)));
                }
            } else {
                tuples.insert_default(tuple);
            }
        }
    }
    Err(Error::IterationLimit {
        what: "constraint generation",
        iterations: opts.max_cg_iterations,
        log: Box::new(log),
    })
}

/// The cut loop for a fixed tuple set.
pub fn l_shaped(problem: &Problem, tuples: &TupleSet, opts: &SolveOptions) -> Result<(PlanSolution, SolveLog)> {
    let data = problem.data();
    data.check()?;
    let clock = Instant::now();
    let mut log = SolveLog::default();
    log.rounds.push(0);
    let mut pool = CutPool::new();
    let sol = lshaped_inner(&data, tuples, &mut pool, opts, &mut log, &clock)?;
    let iterations = sol.iterations;
    let plan = finish(problem, sol, tuples, Algorithm::CgL, 0, iterations, pool.len(), &log, &clock)?;
    Ok((plan, log))
}

/// The extensive form with every line tuple in exact form.
pub fn solve_extensive(problem: &Problem, opts: &SolveOptions) -> Result<(PlanSolution, SolveLog)> {
    let data = problem.data();
    data.check()?;
    let inst = &problem.instance;
    let clock = Instant::now();
    let mut log = SolveLog::default();
    log.rounds.push(0);
    let tuples = TupleSet::all_exact(inst.num_scenarios(), inst.num_periods(), inst.num_lines());
    let sol = extensive_inner(&data, &tuples, opts, &mut log, &clock)?;
    let plan = finish(problem, sol, &tuples, Algorithm::Extensive, 0, 0, 0, &log, &clock)?;
    Ok((plan, log))
}

/// The line constraints active when `plan` was returned.
pub fn final_tuples(plan: &PlanSolution) -> TupleSet {
    let mut tuples = TupleSet::new();
    for &(s, t, l) in &plan.diagnostics.line_blocks {
        tuples.insert_default(LineTuple { s, t, l, k: 0 });
    }
    for &tuple in &plan.diagnostics.exact_directions {
        tuples.insert_exact(tuple);
    }
    tuples
}

/// Plain-text dump of the extensive model carrying the line constraints of
/// `plan`, for diffing against an external solver.
pub fn dump_model(problem: &Problem, plan: &PlanSolution) -> Result<String> {
    let model = assemble_extensive(&problem.data(), &final_tuples(plan))?;
    Ok(model.program.to_text())
}

pub fn solve(problem: &Problem, opts: &SolveOptions) -> Result<(PlanSolution, SolveLog)> {
    match opts.algorithm {
        Algorithm::Extensive => solve_extensive(problem, opts),
        Algorithm::Cg => constraint_generation(problem, InnerSolver::Extensive, opts),
        Algorithm::CgL => constraint_generation(problem, InnerSolver::LShaped, opts),
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fixtures::{heterogeneous_sites, tie_line};

    fn tie_problem(capacity: f64, n: usize, kappa: f64) -> Problem {
        let fx = tie_line(capacity).unwrap();
        let train = fx.samples(n, 11).unwrap();
        Problem::new(fx.instance, train, AmbiguitySpec::new(RadiusMode::FullCovariance, kappa)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [Algorithm::Extensive, Algorithm::Cg, Algorithm::CgL] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dc".parse::<Algorithm>().is_err());
    }

    #[test]
    fn two_sample_cut_by_hand() {
        let fx = tie_line(1e4).unwrap();
        let mut inst = fx.instance;
        inst.generators[0].da = 5.0;
        inst.generators[0].ua = 8.0;
        // forecast 4, errors +3 and -3 at x = 1
        let train = SampleTensor::new(1, 1, 1, 2, vec![7.0, 1.0]).unwrap();
        let pb = Problem::new(inst, train, AmbiguitySpec::empirical()).unwrap();
        let mut schedule = Schedule::zeros(1, 1, 1);
        schedule.up[0] = 10.0;
        schedule.down[0] = 10.0;
        let (cut, mean) = Cut::generate(&pb.data(), 0, 0, &[1.0], &schedule, 1);
        // gamma = -5 for the surplus, +8 for the deficit
        assert_eq!(cut.x, vec![-(3.0 * -5.0 + -3.0 * 8.0) / 2.0]);
        assert_eq!((cut.up[0], cut.down[0], cut.constant), (0.0, 0.0, 0.0));
        assert_eq!(mean, (15.0 + 24.0) / 2.0);
        assert_eq!(cut.value(&[1.0], &schedule.up, &schedule.down), mean);
    }

    #[test]
    fn cuts_are_tight_and_globally_valid() {
        let fx = heterogeneous_sites().unwrap();
        let train = fx.samples(12, 5).unwrap();
        let pb = Problem::new(fx.instance, train, AmbiguitySpec::empirical()).unwrap();
        let data = pb.data();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let random_point = |rng: &mut ChaCha8Rng| {
            let x: Vec<f64> = (0..5).map(|_| f64::from(rng.random_range(0..=20u32))).collect();
            let mut sch = Schedule::zeros(1, 1, 2);
            for g in 0..2 {
                sch.up[g] = rng.random_range(0.0..30.0);
                sch.down[g] = rng.random_range(0.0..30.0);
            }
            (x, sch)
        };
        for _ in 0..10 {
            let (x0, s0) = random_point(&mut rng);
            let (cut, mean) = Cut::generate(&data, 0, 0, &x0, &s0, 1);
            assert!((cut.value(&x0, &s0.up, &s0.down) - mean).abs() <= 1e-7 * (1.0 + mean.abs()));
            for _ in 0..100 {
                let (x, s) = random_point(&mut rng);
                let (_, truth) = Cut::generate(&data, 0, 0, &x, &s, 1);
                assert!(cut.value(&x, &s.up, &s.down) <= truth + 1e-6);
            }
        }
    }

    #[test]
    fn pool_drops_repeated_cuts() {
        let pb = tie_problem(1e4, 6, 0.0);
        let sch = Schedule::zeros(1, 1, 1);
        let mut pool = CutPool::new();
        let (a, _) = Cut::generate(&pb.data(), 0, 0, &[2.0], &sch, 1);
        let (b, _) = Cut::generate(&pb.data(), 0, 0, &[2.0], &sch, 2);
        assert!(pool.insert(a));
        assert!(!pool.insert(b));
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn loose_lines_finish_in_one_round() {
        let pb = tie_problem(1e9, 10, 0.3);
        for algo in [Algorithm::Cg, Algorithm::CgL] {
            let (plan, _) = solve(&pb, &SolveOptions::with_algorithm(algo)).unwrap();
            assert_eq!(plan.diagnostics.cg_iterations, 1);
            assert_eq!(plan.diagnostics.tuples, 0);
        }
    }

    #[test]
    fn pipelines_agree_on_a_binding_line() {
        let pb = tie_problem(12.0, 15, 0.05);
        let (ext, _) = solve(&pb, &SolveOptions::with_algorithm(Algorithm::Extensive)).unwrap();
        let (cg, _) = solve(&pb, &SolveOptions::with_algorithm(Algorithm::Cg)).unwrap();
        let (cgl, log) = solve(&pb, &SolveOptions::with_algorithm(Algorithm::CgL)).unwrap();
        assert!((1..40).contains(&ext.turbines[0]), "the line should bind");
        assert_eq!(ext.turbines, cg.turbines);
        assert_eq!(ext.turbines, cgl.turbines);
        assert!(rel(ext.objective, cg.objective) <= 1e-5);
        assert!(rel(ext.objective, cgl.objective) <= 1e-5);
        assert!((1..=2).contains(&cg.diagnostics.tuples));
        for plan in [&ext, &cg, &cgl] {
            assert!(plan.diagnostics.violations.is_empty());
            assert!(rel(plan.breakdown.total, plan.objective) <= 1e-7);
        }
        assert_eq!(log.lines().len(), log.entries.len());
        assert!(log.to_string().starts_with(SolveLog::HEADER));
    }

    #[test]
    fn bounds_sandwich_the_extensive_optimum() {
        let pb = tie_problem(12.0, 15, 0.05);
        let mut tuples = TupleSet::new();
        tuples.insert_default(LineTuple { s: 0, t: 0, l: 0, k: 0 });
        let model = assemble_extensive(&pb.data(), &tuples).unwrap();
        let opt = model
            .solve_integer(&SolverSettings::default(), &BnbSettings::default())
            .unwrap()
            .objective;
        let (plan, log) = l_shaped(&pb, &tuples, &SolveOptions::default()).unwrap();
        assert!(rel(plan.objective, opt) <= 1e-5);
        for pair in log.entries.windows(2) {
            assert!(pair[1].lb >= pair[0].lb);
            assert!(pair[1].ub <= pair[0].ub);
        }
        for e in &log.entries {
            assert!(e.lb <= opt + 1e-6 * opt.abs().max(1.0), "lb {} above {opt}", e.lb);
            assert!(e.ub >= opt - 1e-6 * opt.abs().max(1.0), "ub {} below {opt}", e.ub);
        }
    }

    #[test]
    fn round_objectives_never_decrease() {
        let pb = tie_problem(12.0, 15, 0.05);
        let (_, log) = solve(&pb, &SolveOptions::with_algorithm(Algorithm::Cg)).unwrap();
        let finals: Vec<f64> = log.round_entries().iter().map(|r| r.last().unwrap().ub).collect();
        assert!(finals.len() >= 2);
        for pair in finals.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-7 * pair[0].abs().max(1.0));
        }
    }

    #[test]
    fn free_recourse_needs_few_cut_rounds() {
        let fx = tie_line(1e4).unwrap();
        let mut inst = fx.instance;
        let g = &mut inst.generators[0];
        (g.ua, g.da, g.ur, g.dr) = (0.0, 0.0, 0.0, 0.0);
        let train = fx.wind.clone();
        let train = crate::sampling::sample_weibull_field(&train, 10, 2).unwrap();
        let pb = Problem::new(inst, train, AmbiguitySpec::empirical()).unwrap();
        let opts = SolveOptions {
            warm_start: false,
            ..SolveOptions::default()
        };
        let (plan, _) = l_shaped(&pb, &TupleSet::new(), &opts).unwrap();
        assert!(plan.diagnostics.lshaped_iterations <= 2);
        assert!(plan.breakdown.recourse.abs() <= 1e-6);
    }

    #[test]
    fn round_cap_is_reported() {
        let pb = tie_problem(12.0, 15, 0.05);
        let opts = SolveOptions {
            max_cg_iterations: 1,
            ..SolveOptions::with_algorithm(Algorithm::Cg)
        };
        assert!(matches!(solve(&pb, &opts), Err(Error::IterationLimit { .. })));
    }

    #[test]
    fn dump_lists_the_final_line_blocks() {
        let pb = tie_problem(12.0, 15, 0.05);
        let (plan, _) = solve(&pb, &SolveOptions::with_algorithm(Algorithm::Cg)).unwrap();
        let tuples = final_tuples(&plan);
        assert_eq!(tuples.len(), plan.diagnostics.tuples.max(tuples.len()));
        let text = dump_model(&pb, &plan).unwrap();
        let rows = assemble_extensive(&pb.data(), &tuples).unwrap().program.to_text();
        assert_eq!(text, rows);
    }
}
