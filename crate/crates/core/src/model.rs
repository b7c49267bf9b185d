//! Assembly of the planning programs.
//!
//! The extensive form carries one copy of the recourse problem per training
//! sample; the master replaces it by cut epigraphs `q_st`. Both share the
//! first stage (turbines, dispatch, reserves), the regularizer cones and the
//! line blocks selected by a [`TupleSet`].

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use windplan_conic::{
    branch_and_bound, lower_quadratic_objective, solve_conic, BnbSettings, ConicProgram, ConicRelaxation,
    IntegerSolution, LinExpr, PrimalDualSolution, Sense, SolverSettings, Status, VarId,
};

use crate::ambiguity::{dual_bound_phi, radius_factor, AmbiguitySpec, MomentTable, RadiusMode};
use crate::decomp::Cut;
use crate::error::{Error, Result};
use crate::instance::PlanningInstance;
use crate::recourse::line_offset_terms;
use crate::sampling::{ForecastTable, SampleTensor};
use crate::solution::{CostBreakdown, LineTuple, Schedule};

/// Reserves below this many MW are read off a solution as zero.
pub const RESERVE_SNAP: f64 = 1e-6;

/// Slack demanded of every exact tail row, in MW.
pub const CVAR_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvarForm {
    /// Piece-averaged rows shared by both directions.
    Default,
    /// Per-sample slacks, one block per direction.
    Exact,
}

/// Active line constraints: the tuples added so far, the `(s, t, l)` keys
/// carrying a default block and the directions upgraded to the exact form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TupleSet {
    members: BTreeSet<LineTuple>,
    defaults: BTreeSet<(usize, usize, usize)>,
    exact: BTreeSet<LineTuple>,
}

impl TupleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every tuple in exact form, without default blocks.
    pub fn all_exact(scenarios: usize, periods: usize, lines: usize) -> Self {
        let mut set = Self::new();
        for s in 0..scenarios {
            for t in 0..periods {
                for l in 0..lines {
                    for k in 0..2 {
                        let tuple = LineTuple { s, t, l, k };
                        set.members.insert(tuple);
                        set.exact.insert(tuple);
                    }
                }
            }
        }
        set
    }

    /// Number of `(s, t, l, k)` tuples added.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn has_block(&self, s: usize, t: usize, l: usize) -> bool {
        self.defaults.contains(&(s, t, l))
    }

    pub fn is_exact(&self, tuple: LineTuple) -> bool {
        self.exact.contains(&tuple)
    }

    /// Adds a tuple with the default block of its line; false if the block
    /// already exists.
    pub fn insert_default(&mut self, tuple: LineTuple) -> bool {
        self.members.insert(tuple);
        self.defaults.insert((tuple.s, tuple.t, tuple.l))
    }

    /// Marks a direction exact; false if it already was.
    pub fn insert_exact(&mut self, tuple: LineTuple) -> bool {
        self.members.insert(tuple);
        self.exact.insert(tuple)
    }

    pub fn members(&self) -> impl Iterator<Item = &LineTuple> {
        self.members.iter()
    }

    pub fn default_blocks(&self) -> impl Iterator<Item = &(usize, usize, usize)> {
        self.defaults.iter()
    }

    pub fn exact_directions(&self) -> impl Iterator<Item = &LineTuple> {
        self.exact.iter()
    }
}

/// Everything a model is built from.
#[derive(Debug, Clone, Copy)]
pub struct ModelData<'a> {
    pub inst: &'a PlanningInstance,
    pub train: &'a SampleTensor,
    pub forecast: &'a ForecastTable,
    /// Required by the covariance modes.
    pub moments: Option<&'a MomentTable>,
    pub spec: &'a AmbiguitySpec,
    /// Fixes `sum_w x_w` when set.
    pub total_capacity: Option<u32>,
}

impl ModelData<'_> {
    pub fn check(&self) -> Result<()> {
        let inst = self.inst;
        inst.check()?;
        let (s, t, w) = (inst.num_scenarios(), inst.num_periods(), inst.num_sites());
        self.train.check_shape(s, t, w)?;
        if (self.forecast.scenarios, self.forecast.periods, self.forecast.sites) != (s, t, w) {
            return Err(Error::Dimension(format!(
                "forecast is {}x{}x{}, instance needs {s}x{t}x{w}",
                self.forecast.scenarios, self.forecast.periods, self.forecast.sites
            )));
        }
        self.spec.validate(s * t, inst.num_lines())?;
        let n = self.train.samples();
        if n == 0 {
            return Err(Error::TooFewSamples { need: 1, got: 0 });
        }
        if matches!(self.spec.mode, RadiusMode::FullCovariance | RadiusMode::Diagonal) {
            let m = self
                .moments
                .ok_or_else(|| Error::Invalid("covariance radius modes need a moment table".into()))?;
            if (m.scenarios, m.periods) != (s, t) || m.covariance.iter().any(|c| c.nrows() != w) {
                return Err(Error::Dimension("moment table does not match the instance".into()));
            }
        }
        if let Some(cap) = self.total_capacity {
            let most: u64 = inst.wind_sites.iter().map(|w| u64::from(w.max_turbines)).sum();
            if u64::from(cap) > most {
                return Err(Error::Infeasible(format!(
                    "total capacity {cap} exceeds the {most} turbines the sites allow"
                )));
            }
        }
        Ok(())
    }

    fn factor(&self, s: usize, t: usize) -> DMatrix<f64> {
        let w = self.inst.num_sites();
        match self.spec.mode {
            RadiusMode::NormOnly => radius_factor(&DMatrix::zeros(w, w), RadiusMode::NormOnly),
            RadiusMode::Empirical => DMatrix::zeros(0, w),
            mode => radius_factor(self.moments.expect("checked").get(s, t), mode),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Extensive,
    Master,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactVars {
    pub eta: VarId,
    pub slack: Vec<VarId>,
}

/// Variables of one `(s, t, l)` line block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineBlock {
    /// Default-form `eta`.
    pub eta: Option<VarId>,
    /// Radius epigraph, absent when the radius vanishes.
    pub theta: Option<VarId>,
    pub exact: [Option<ExactVars>; 2],
    theta_ready: bool,
}

/// Per-sample recourse copies, indexed `((s * T + t) * N + i) * G + g` for
/// adjustments and `(s * T + t) * N + i` for curtailment and shedding.
#[derive(Debug, Clone, PartialEq)]
pub struct RecourseVars {
    pub alpha: Vec<VarId>,
    pub z: Vec<VarId>,
    pub curtail: Vec<VarId>,
    pub shed: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledModel {
    pub program: ConicProgram,
    pub kind: ModelKind,
    pub mode: RadiusMode,
    pub phi: f64,
    pub x: Vec<VarId>,
    /// Indexed like [`Schedule`].
    pub p: Vec<VarId>,
    pub up: Vec<VarId>,
    pub down: Vec<VarId>,
    /// Regularizer epigraphs per `s * T + t`.
    pub theta: Vec<Option<VarId>>,
    /// Epigraph variables of the lowered generation quadratics, keyed by the
    /// output variable.
    pub quadratic: Vec<(usize, VarId)>,
    pub lines: BTreeMap<(usize, usize, usize), LineBlock>,
    pub recourse: Option<RecourseVars>,
    /// Cut epigraphs per `s * T + t` (master only).
    pub q: Vec<VarId>,
    pub tuples: TupleSet,
    pub cuts: usize,
    scenarios: usize,
    periods: usize,
    generators: usize,
}

fn sum_x(x: &[VarId], coef: impl Fn(usize) -> f64) -> LinExpr {
    let mut e = LinExpr::new();
    for (w, &v) in x.iter().enumerate() {
        e.add(v, coef(w));
    }
    e
}

impl AssembledModel {
    pub fn assemble(data: &ModelData<'_>, kind: ModelKind, tuples: &TupleSet) -> Result<Self> {
        data.check()?;
        let inst = data.inst;
        let (sc, pe, gn, nw) = (inst.num_scenarios(), inst.num_periods(), inst.num_generators(), inst.num_sites());
        let n = data.train.samples();
        let phi = dual_bound_phi(&inst.generators, inst.costs.wc, inst.costs.ls)?;
        let mut p = ConicProgram::new();

        let x: Vec<VarId> = inst
            .wind_sites
            .iter()
            .map(|w| p.add_integer_var(0.0, f64::from(w.max_turbines), w.cost))
            .collect();
        if let Some(cap) = data.total_capacity {
            p.add_row(sum_x(&x, |_| 1.0).plus_constant(-f64::from(cap)), Sense::Eq);
        }

        let mut pv = Vec::with_capacity(sc * pe * gn);
        let mut up = Vec::with_capacity(sc * pe * gn);
        let mut down = Vec::with_capacity(sc * pe * gn);
        for s in 0..sc {
            let dur = inst.scenarios.duration[s];
            for _t in 0..pe {
                for g in &inst.generators {
                    let v = p.add_var(0.0, f64::INFINITY, dur * g.b);
                    p.objective_constant += dur * g.c;
                    if g.a != 0.0 {
                        p.quadratic.push((v.index(), dur * g.a));
                    }
                    pv.push(v);
                    up.push(p.add_var(0.0, f64::INFINITY, dur * g.ur));
                    down.push(p.add_var(0.0, f64::INFINITY, dur * g.dr));
                }
            }
        }
        let idx = |s: usize, t: usize, g: usize| (s * pe + t) * gn + g;

        for s in 0..sc {
            for t in 0..pe {
                // Balance against forecast wind.
                let mut bal = sum_x(&x, |w| data.forecast.get(s, t, w));
                for g in 0..gn {
                    bal.add(pv[idx(s, t, g)], 1.0);
                }
                bal.constant = -inst.scenarios.total_load(s, t);
                p.add_row(bal, Sense::Eq);
                for (g, gen) in inst.generators.iter().enumerate() {
                    let k = idx(s, t, g);
                    p.add_row(
                        LinExpr::var(pv[k]).with(down[k], -1.0).plus_constant(-gen.p_min),
                        Sense::Ge,
                    );
                    p.add_row(LinExpr::var(pv[k]).with(up[k], 1.0).plus_constant(-gen.p_max), Sense::Le);
                    if t > 0 {
                        let j = idx(s, t - 1, g);
                        p.add_row(
                            LinExpr::var(pv[k])
                                .with(up[k], 1.0)
                                .with(pv[j], -1.0)
                                .with(down[j], 1.0)
                                .plus_constant(-gen.ru),
                            Sense::Le,
                        );
                        p.add_row(
                            LinExpr::var(pv[j])
                                .with(up[j], 1.0)
                                .with(pv[k], -1.0)
                                .with(down[k], 1.0)
                                .plus_constant(-gen.rd),
                            Sense::Le,
                        );
                    }
                }
            }
        }

        let mut theta = vec![None; sc * pe];
        for s in 0..sc {
            for t in 0..pe {
                let kappa = data.spec.kappa_st(s * pe + t);
                if kappa == 0.0 {
                    continue;
                }
                let cone = radius_cone(&data.factor(s, t), &x, kappa, |_| 1.0);
                if cone.is_empty() {
                    continue;
                }
                let th = p.add_var(0.0, f64::INFINITY, inst.scenarios.duration[s] * phi);
                p.add_soc(LinExpr::var(th), cone);
                theta[s * pe + t] = Some(th);
            }
        }

        let mut recourse = None;
        let mut q = Vec::new();
        match kind {
            ModelKind::Extensive => {
                let mut rv = RecourseVars {
                    alpha: Vec::with_capacity(sc * pe * n * gn),
                    z: Vec::with_capacity(sc * pe * n * gn),
                    curtail: Vec::with_capacity(sc * pe * n),
                    shed: Vec::with_capacity(sc * pe * n),
                };
                for s in 0..sc {
                    let weight = inst.scenarios.duration[s] / n as f64;
                    for t in 0..pe {
                        for i in 0..n {
                            let w_var = p.add_var(0.0, f64::INFINITY, weight * inst.costs.wc);
                            let l_var = p.add_var(0.0, f64::INFINITY, weight * inst.costs.ls);
                            let mut bal = LinExpr::var(w_var).with(l_var, -1.0);
                            for w in 0..nw {
                                let d = data.train.get(s, t, w, i) - data.forecast.get(s, t, w);
                                bal.add(x[w], -d);
                            }
                            for (g, gen) in inst.generators.iter().enumerate() {
                                let k = idx(s, t, g);
                                let a = p.add_free_var(0.0);
                                let z = p.add_free_var(weight);
                                bal.add(a, 1.0);
                                p.add_row(LinExpr::var(a).with(up[k], 1.0), Sense::Ge);
                                p.add_row(LinExpr::var(down[k]).with(a, -1.0), Sense::Ge);
                                p.add_row(LinExpr::var(z).with(a, -gen.da), Sense::Ge);
                                p.add_row(LinExpr::var(z).with(a, gen.ua), Sense::Ge);
                                rv.alpha.push(a);
                                rv.z.push(z);
                            }
                            p.add_row(bal, Sense::Eq);
                            rv.curtail.push(w_var);
                            rv.shed.push(l_var);
                        }
                    }
                }
                recourse = Some(rv);
            }
            ModelKind::Master => {
                for s in 0..sc {
                    for _t in 0..pe {
                        q.push(p.add_var(0.0, f64::INFINITY, inst.scenarios.duration[s]));
                    }
                }
            }
        }

        let quadratic = lower_quadratic_objective(&mut p)?;
        let mut model = Self {
            program: p,
            kind,
            mode: data.spec.mode,
            phi,
            x,
            p: pv,
            up,
            down,
            theta,
            quadratic,
            lines: BTreeMap::new(),
            recourse,
            q,
            tuples: TupleSet::new(),
            cuts: 0,
            scenarios: sc,
            periods: pe,
            generators: gn,
        };
        for &(s, t, l) in tuples.default_blocks() {
            model.add_cvar_rows(data, (s, t, l), CvarForm::Default)?;
        }
        for &tuple in tuples.exact_directions() {
            model.add_exact_direction(data, tuple)?;
        }
        model.tuples = tuples.clone();
        Ok(model)
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn num_periods(&self) -> usize {
        self.periods
    }

    fn line_theta(&mut self, data: &ModelData<'_>, key: (usize, usize, usize)) -> Option<VarId> {
        let (s, t, l) = key;
        let block = self.lines.entry(key).or_default();
        if block.theta_ready {
            return block.theta;
        }
        block.theta_ready = true;
        let kappa = data.spec.kappa_stl(s * self.periods + t, l, data.inst.num_lines());
        let theta = if kappa == 0.0 {
            None
        } else {
            let pi = &data.inst.lines[l].ptdf_wind;
            let cone = radius_cone(&data.factor(s, t), &self.x, kappa, |w| pi[w]);
            if cone.is_empty() {
                None
            } else {
                let th = self.program.add_var(0.0, f64::INFINITY, 0.0);
                self.program.add_soc(LinExpr::var(th), cone);
                Some(th)
            }
        };
        self.lines.get_mut(&key).expect("inserted").theta = theta;
        theta
    }

    /// `sign * sum_w pi_wl x_w xi_w` for the given site values.
    fn wind_flow(&self, data: &ModelData<'_>, l: usize, sign: f64, xi: impl Fn(usize) -> f64) -> LinExpr {
        let pi = &data.inst.lines[l].ptdf_wind;
        sum_x(&self.x, |w| sign * pi[w] * xi(w))
    }

    fn offset(&self, data: &ModelData<'_>, s: usize, t: usize, l: usize, k: usize) -> LinExpr {
        let terms = line_offset_terms(data.inst, s, t, l, k);
        let mut e = LinExpr::constant(terms.constant);
        for g in 0..self.generators {
            let j = (s * self.periods + t) * self.generators + g;
            e.add(self.p[j], terms.p[g]);
            e.add(self.up[j], terms.up[g]);
            e.add(self.down[j], terms.down[g]);
        }
        e
    }

    /// Adds the line block for `(s, t, l)`: the default form shares one
    /// `eta` between the two directions and the zero piece; the exact form
    /// adds both directions with per-sample slacks.
    pub fn add_cvar_rows(&mut self, data: &ModelData<'_>, key: (usize, usize, usize), form: CvarForm) -> Result<()> {
        let (s, t, l) = key;
        if s >= self.scenarios || t >= self.periods || l >= data.inst.num_lines() {
            return Err(Error::Dimension(format!("line tuple {key:?} is out of range")));
        }
        match form {
            CvarForm::Exact => {
                for k in 0..2 {
                    self.add_exact_direction(data, LineTuple { s, t, l, k })?;
                }
                Ok(())
            }
            CvarForm::Default => {
                if self.lines.get(&key).is_some_and(|b| b.eta.is_some()) {
                    return Err(Error::Invalid(format!("line block {key:?} already has its default rows")));
                }
                let eps = data.inst.costs.eps_risk;
                let theta = self.line_theta(data, key);
                let eta = self.program.add_free_var(0.0);
                let n = data.train.samples() as f64;
                let means: Vec<f64> = (0..data.inst.num_sites())
                    .map(|w| data.train.series(s, t, w).iter().sum::<f64>() / n)
                    .collect();
                for k in 0..2 {
                    let sign = if k == 0 { 1.0 } else { -1.0 };
                    let mut row = self.offset(data, s, t, l, k);
                    row.add_expr(&self.wind_flow(data, l, sign, |w| means[w]), 1.0);
                    row.add(eta, eps - 1.0);
                    if let Some(th) = theta {
                        row.add(th, 1.0);
                    }
                    row.constant += eps * CVAR_MARGIN;
                    self.program.add_row(row, Sense::Le);
                }
                let mut zero = LinExpr::term(eta, eps);
                if let Some(th) = theta {
                    zero.add(th, 1.0);
                }
                self.program.add_row(zero, Sense::Le);
                self.lines.get_mut(&key).expect("created").eta = Some(eta);
                Ok(())
            }
        }
    }

    /// Rockafellar-Uryasev block for one direction:
    /// `eps eta + (1/N) sum s_i + theta <= -eps margin`, `s_i >= v_i - eta`.
    pub fn add_exact_direction(&mut self, data: &ModelData<'_>, tuple: LineTuple) -> Result<()> {
        let LineTuple { s, t, l, k } = tuple;
        if k > 1 || s >= self.scenarios || t >= self.periods || l >= data.inst.num_lines() {
            return Err(Error::Dimension(format!("line tuple {tuple:?} is out of range")));
        }
        let key = (s, t, l);
        if self.lines.get(&key).is_some_and(|b| b.exact[k].is_some()) {
            return Err(Error::Invalid(format!("line tuple {tuple:?} is already exact")));
        }
        let eps = data.inst.costs.eps_risk;
        let theta = self.line_theta(data, key);
        let n = data.train.samples();
        let sign = if k == 0 { 1.0 } else { -1.0 };
        let offset = self.offset(data, s, t, l, k);
        let eta = self.program.add_free_var(0.0);
        let mut tail = LinExpr::term(eta, eps);
        let mut slack = Vec::with_capacity(n);
        for i in 0..n {
            let si = self.program.add_var(0.0, f64::INFINITY, 0.0);
            let mut row = self.wind_flow(data, l, sign, |w| data.train.get(s, t, w, i));
            row.add_expr(&offset, 1.0);
            row.add(eta, -1.0);
            let mut epi = LinExpr::var(si);
            epi.add_expr(&row, -1.0);
            self.program.add_row(epi, Sense::Ge);
            tail.add(si, 1.0 / n as f64);
            slack.push(si);
        }
        if let Some(th) = theta {
            tail.add(th, 1.0);
        }
        tail.constant += eps * CVAR_MARGIN;
        self.program.add_row(tail, Sense::Le);
        self.lines.get_mut(&key).expect("created").exact[k] = Some(ExactVars { eta, slack });
        Ok(())
    }

    /// `q_st >= cut(x, up, down)`.
    pub fn add_cut(&mut self, cut: &Cut) -> Result<()> {
        if self.kind != ModelKind::Master {
            return Err(Error::Invalid("cuts belong to the master".into()));
        }
        let st = cut.s * self.periods + cut.t;
        let mut row = LinExpr::var(self.q[st]);
        for (w, &c) in cut.x.iter().enumerate() {
            row.add(self.x[w], -c);
        }
        for g in 0..self.generators {
            let j = st * self.generators + g;
            row.add(self.up[j], -cut.up[g]);
            row.add(self.down[j], -cut.down[g]);
        }
        row.constant = -cut.constant;
        self.program.add_row(row, Sense::Ge);
        self.cuts += 1;
        Ok(())
    }

    /// Turbine counts (rounded) and schedule read off a primal point.
    pub fn extract(&self, x: &[f64]) -> (Vec<u32>, Schedule) {
        let turbines = self.x.iter().map(|v| x[v.index()].round().max(0.0) as u32).collect();
        let mut schedule = Schedule::zeros(self.scenarios, self.periods, self.generators);
        for k in 0..self.p.len() {
            schedule.p[k] = x[self.p[k].index()];
            schedule.up[k] = snap(x[self.up[k].index()]);
            schedule.down[k] = snap(x[self.down[k].index()]);
        }
        (turbines, schedule)
    }

    /// Objective split as the model sees it: regularizer from the `theta`
    /// epigraphs, recourse from the sample copies or the cut epigraphs.
    pub fn breakdown(&self, data: &ModelData<'_>, x: &[f64]) -> CostBreakdown {
        let inst = data.inst;
        let mut b = CostBreakdown {
            investment: self.x.iter().zip(&inst.wind_sites).map(|(v, w)| w.cost * x[v.index()]).sum(),
            ..Default::default()
        };
        let val = |v: VarId| x[v.index()];
        for s in 0..self.scenarios {
            let dur = inst.scenarios.duration[s];
            for t in 0..self.periods {
                let st = s * self.periods + t;
                for (g, gen) in inst.generators.iter().enumerate() {
                    let j = st * self.generators + g;
                    let quad = self
                        .quadratic
                        .iter()
                        .find(|(var, _)| *var == self.p[j].index())
                        .map_or(0.0, |(_, e)| val(*e));
                    b.generation += dur * (gen.b * val(self.p[j]) + gen.c) + quad;
                    b.reserve += dur * (gen.ur * val(self.up[j]) + gen.dr * val(self.down[j]));
                }
                if let Some(th) = self.theta[st] {
                    b.regularizer += dur * self.phi * val(th);
                }
                match &self.recourse {
                    Some(rv) => {
                        let n = data.train.samples();
                        let weight = dur / n as f64;
                        for i in 0..n {
                            let si = st * n + i;
                            let z: f64 = (0..self.generators).map(|g| val(rv.z[si * self.generators + g])).sum();
                            b.recourse +=
                                weight * (z + inst.costs.wc * val(rv.curtail[si]) + inst.costs.ls * val(rv.shed[si]));
                        }
                    }
                    None => b.recourse += dur * val(self.q[st]),
                }
            }
        }
        b.summed()
    }

    /// Branch and bound over conic relaxations.
    pub fn solve_integer(&self, solver: &SolverSettings, bnb: &BnbSettings) -> Result<IntegerSolution> {
        let mut relax = ConicRelaxation { settings: *solver };
        branch_and_bound(&self.program, &mut relax, bnb).map_err(|e| match e {
            windplan_conic::Error::RootInfeasible => Error::Infeasible("the planning model has no feasible plan".into()),
            e => e.into(),
        })
    }

    /// Continuous relaxation.
    pub fn solve_relaxed(&self, solver: &SolverSettings) -> Result<PrimalDualSolution> {
        let sol = solve_conic(&self.program, solver)?;
        match sol.status {
            Status::Optimal => Ok(sol),
            Status::Infeasible => Err(Error::Infeasible("the relaxed planning model is infeasible".into())),
            s => Err(Error::Solver(format!(
                "relaxation ended with {s:?} after {} iterations (residuals {:?})",
                sol.iterations, sol.residuals
            ))),
        }
    }

    /// Re-solves with the turbine counts fixed.
    pub fn solve_fixed(&self, turbines: &[u32], solver: &SolverSettings) -> Result<PrimalDualSolution> {
        let mut program = self.program.clone();
        for (v, &n) in self.x.iter().zip(turbines) {
            program.vars[v.index()].lower = f64::from(n);
            program.vars[v.index()].upper = f64::from(n);
        }
        let sol = solve_conic(&program, solver)?;
        match sol.status {
            Status::Optimal => Ok(sol),
            Status::Infeasible => Err(Error::Infeasible("no schedule exists for the fixed plan".into())),
            s => Err(Error::Solver(format!("fixed-plan solve ended with {s:?}"))),
        }
    }
}

/// Reserves below [`RESERVE_SNAP`] are interior-point noise.
fn snap(v: f64) -> f64 {
    if v < RESERVE_SNAP {
        0.0
    } else {
        v
    }
}

/// Rows of `kappa R diag(a) x`, dropping rows that vanish.
fn radius_cone(factor: &DMatrix<f64>, x: &[VarId], kappa: f64, a: impl Fn(usize) -> f64) -> Vec<LinExpr> {
    (0..factor.nrows())
        .map(|j| sum_x(x, |w| kappa * factor[(j, w)] * a(w)))
        .filter(|e| !e.terms.is_empty())
        .collect()
}

/// Extensive form over the given line tuples.
pub fn assemble_extensive(data: &ModelData<'_>, tuples: &TupleSet) -> Result<AssembledModel> {
    AssembledModel::assemble(data, ModelKind::Extensive, tuples)
}

/// Decomposition master over the given line tuples, without cuts.
pub fn assemble_master(data: &ModelData<'_>, tuples: &TupleSet) -> Result<AssembledModel> {
    AssembledModel::assemble(data, ModelKind::Master, tuples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::Problem;
    use crate::fixtures::{one_generator, tie_line};
    use crate::sampling::MomentGrid;

    fn tight_line(capacity: f64, n: usize, spec: AmbiguitySpec) -> Problem {
        let fx = tie_line(capacity).unwrap();
        let train = fx.samples(n, 7).unwrap();
        Problem::new(fx.instance, train, spec).unwrap()
    }

    fn relaxed_objective(model: &AssembledModel) -> f64 {
        let sol = model.solve_relaxed(&SolverSettings::default()).unwrap();
        model.program.objective_value(&sol.x)
    }

    #[test]
    fn smallest_extensive_model_has_fourteen_variables() {
        let pb = tight_line(1e4, 2, AmbiguitySpec::new(RadiusMode::FullCovariance, 0.5));
        let model = assemble_extensive(&pb.data(), &TupleSet::new()).unwrap();
        // x, P, two reserves, theta, two samples of (alpha, z, w, l), one quadratic epigraph
        assert_eq!(model.program.num_vars(), 14);
        assert_eq!(model.program.integer_vars().collect::<Vec<_>>(), vec![model.x[0].index()]);
    }

    #[test]
    fn empirical_mode_has_no_cones() {
        let pb = tight_line(1e4, 5, AmbiguitySpec::empirical());
        let model = assemble_extensive(&pb.data(), &TupleSet::new()).unwrap();
        // the only cone left is the lowered generation quadratic
        assert_eq!(model.program.socs.len(), model.quadratic.len());
        assert!(model.theta.iter().all(Option::is_none));
    }

    #[test]
    fn default_block_adds_three_rows_one_cone_two_vars() {
        let pb = tight_line(10.0, 5, AmbiguitySpec::new(RadiusMode::FullCovariance, 0.5));
        let data = pb.data();
        let mut model = assemble_extensive(&data, &TupleSet::new()).unwrap();
        let before = (model.program.rows.len(), model.program.socs.len(), model.program.num_vars());
        model.add_cvar_rows(&data, (0, 0, 0), CvarForm::Default).unwrap();
        let after = (model.program.rows.len(), model.program.socs.len(), model.program.num_vars());
        assert_eq!(after, (before.0 + 3, before.1 + 1, before.2 + 2));
        assert!(model.add_cvar_rows(&data, (0, 0, 0), CvarForm::Default).is_err());
    }

    #[test]
    fn exact_direction_adds_per_sample_rows() {
        let n = 6;
        let pb = tight_line(10.0, n, AmbiguitySpec::new(RadiusMode::FullCovariance, 0.5));
        let data = pb.data();
        let mut model = assemble_extensive(&data, &TupleSet::new()).unwrap();
        let rows = model.program.rows.len();
        model.add_cvar_rows(&data, (0, 0, 0), CvarForm::Exact).unwrap();
        assert_eq!(model.program.rows.len(), rows + 2 * (n + 1));
        let dup = LineTuple { s: 0, t: 0, l: 0, k: 1 };
        assert!(model.add_exact_direction(&data, dup).is_err());
    }

    #[test]
    fn slack_line_block_leaves_objective_unchanged() {
        let pb = tight_line(1e9, 8, AmbiguitySpec::empirical());
        let data = pb.data();
        let bare = assemble_extensive(&data, &TupleSet::new()).unwrap();
        let mut tuples = TupleSet::new();
        tuples.insert_default(LineTuple { s: 0, t: 0, l: 0, k: 0 });
        let with_block = assemble_extensive(&data, &tuples).unwrap();
        let (a, b) = (relaxed_objective(&bare), relaxed_objective(&with_block));
        assert!((a - b).abs() <= 1e-7 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn exact_form_is_never_looser() {
        for kappa in [0.0, 0.3] {
            let pb = tight_line(10.0, 12, AmbiguitySpec::new(RadiusMode::FullCovariance, kappa));
            let data = pb.data();
            let mut default = TupleSet::new();
            default.insert_default(LineTuple { s: 0, t: 0, l: 0, k: 0 });
            let mut exact = default.clone();
            exact.insert_exact(LineTuple { s: 0, t: 0, l: 0, k: 0 });
            let d = relaxed_objective(&assemble_extensive(&data, &default).unwrap());
            let e = relaxed_objective(&assemble_extensive(&data, &exact).unwrap());
            assert!(e >= d - 1e-7 * (1.0 + d.abs()), "kappa {kappa}: exact {e} < default {d}");
        }
    }

    #[test]
    fn empirical_equals_zero_kappa() {
        let eo = tight_line(10.0, 6, AmbiguitySpec::empirical());
        let zero = tight_line(10.0, 6, AmbiguitySpec::new(RadiusMode::FullCovariance, 0.0));
        let mut tuples = TupleSet::new();
        tuples.insert_default(LineTuple { s: 0, t: 0, l: 0, k: 0 });
        let a = assemble_extensive(&eo.data(), &tuples).unwrap();
        let b = assemble_extensive(&zero.data(), &tuples).unwrap();
        assert_eq!(a.program.canonical().diff(&b.program.canonical(), 0.0), None);
    }

    #[test]
    fn norm_radius_matches_scaled_identity_covariance() {
        let (kappa, sigma) = (0.4, 0.3);
        let fx = one_generator().unwrap();
        let mut inst = fx.instance.clone();
        inst.wind_sites.push(inst.wind_sites[0].clone());
        inst.lines[0].ptdf_wind = vec![0.8, -0.3];
        let grid = MomentGrid::uniform(1, 1, &[1.2, 1.1], &[0.09, 0.04]);
        let train = crate::sampling::sample_weibull_field(&grid, 6, 3).unwrap();
        let known = MomentTable::known(
            1,
            1,
            nalgebra::DVector::from_vec(vec![1.2, 1.1]),
            DMatrix::identity(2, 2) * (sigma * sigma),
        )
        .unwrap();
        let ddrov = Problem::new(inst.clone(), train.clone(), AmbiguitySpec::new(RadiusMode::Diagonal, kappa))
            .unwrap()
            .with_moments(known);
        let ndro = Problem::new(inst, train, AmbiguitySpec::new(RadiusMode::NormOnly, kappa * sigma)).unwrap();
        let mut tuples = TupleSet::new();
        tuples.insert_default(LineTuple { s: 0, t: 0, l: 0, k: 0 });
        tuples.insert_exact(LineTuple { s: 0, t: 0, l: 0, k: 1 });
        let a = assemble_extensive(&ddrov.data(), &tuples).unwrap();
        let b = assemble_extensive(&ndro.data(), &tuples).unwrap();
        assert_eq!(a.program.canonical().diff(&b.program.canonical(), 1e-12), None);
        let (oa, ob) = (relaxed_objective(&a), relaxed_objective(&b));
        assert!((oa - ob).abs() <= 1e-8 * (1.0 + oa.abs()));
    }

    #[test]
    fn relaxation_bounds_the_integer_optimum() {
        let pb = tight_line(10.0, 10, AmbiguitySpec::new(RadiusMode::FullCovariance, 0.2));
        let mut tuples = TupleSet::new();
        tuples.insert_default(LineTuple { s: 0, t: 0, l: 0, k: 0 });
        let model = assemble_extensive(&pb.data(), &tuples).unwrap();
        let relaxed = relaxed_objective(&model);
        let int = model.solve_integer(&SolverSettings::default(), &BnbSettings::default()).unwrap();
        assert!(relaxed <= int.objective + 1e-7 * (1.0 + relaxed.abs()));
        let x = int.x[model.x[0].index()];
        assert!((x - x.round()).abs() < 1e-6);
    }

    #[test]
    fn breakdown_matches_the_objective_at_the_optimum() {
        let pb = tight_line(10.0, 10, AmbiguitySpec::new(RadiusMode::FullCovariance, 0.2));
        let model = assemble_extensive(&pb.data(), &TupleSet::new()).unwrap();
        let int = model.solve_integer(&SolverSettings::default(), &BnbSettings::default()).unwrap();
        let b = model.breakdown(&pb.data(), &int.x);
        assert!((b.total - int.objective).abs() <= 1e-7 * (1.0 + b.total.abs()));
    }

    #[test]
    fn cuts_only_go_into_the_master() {
        let pb = tight_line(10.0, 4, AmbiguitySpec::empirical());
        let data = pb.data();
        let mut ext = assemble_extensive(&data, &TupleSet::new()).unwrap();
        let schedule = Schedule::zeros(1, 1, 1);
        let (cut, _) = Cut::generate(&data, 0, 0, &[3.0], &schedule, 1);
        assert!(ext.add_cut(&cut).is_err());
        let mut master = assemble_master(&data, &TupleSet::new()).unwrap();
        master.add_cut(&cut).unwrap();
        assert_eq!(master.cuts, 1);
    }
}
