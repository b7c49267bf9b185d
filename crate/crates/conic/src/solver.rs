//! Continuous solve of a [`ConicProgram`].
//!
//! Fixed variables are substituted out and constraints left without
//! variables are checked and dropped; what remains is handed to the
//! `clarabel` interior-point solver (Nesterov-Todd scaling, Mehrotra
//! predictor-corrector, homogeneous embedding). Duals are mapped back to the
//! original rows and bounds, and the returned point is re-checked with
//! [`crate::residuals`] before it is reported optimal.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};
use crate::program::{ConicProgram, LinExpr};
use crate::residuals::{kkt, norm, ConeKind, Form, Residuals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative tolerance on every KKT residual.
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrimalDualSolution {
    pub status: Status,
    /// Primal point, or an unbounded ray when `status == Unbounded`.
    pub x: Vec<f64>,
    /// `c'x + c0`.
    pub objective: f64,
    /// `-h'z + c0`.
    pub dual_objective: f64,
    /// One multiplier per row, sign-adjusted so that `Le` and `Ge` rows have
    /// nonnegative duals. For an infeasible program these form the
    /// certificate.
    pub row_duals: Vec<f64>,
    pub lower_bound_duals: Vec<f64>,
    pub upper_bound_duals: Vec<f64>,
    /// Dual vector `(z_t, z_u)` per cone block.
    pub soc_duals: Vec<Vec<f64>>,
    pub residuals: Residuals,
    /// Certificate quality for infeasible programs, see
    /// [`crate::certificate_residual`].
    pub certificate: Option<f64>,
    pub iterations: u32,
}

impl PrimalDualSolution {
    pub fn empty(status: Status) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: 0.0,
            dual_objective: 0.0,
            row_duals: Vec::new(),
            lower_bound_duals: Vec::new(),
            upper_bound_duals: Vec::new(),
            soc_duals: Vec::new(),
            residuals: Residuals::default(),
            certificate: None,
            iterations: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

struct Reduced {
    /// Reduced column of each original variable, `None` if fixed.
    col: Vec<Option<usize>>,
    fixed_value: Vec<f64>,
    n: usize,
    /// Kept form rows in order together with their reduced expressions.
    kept: Vec<(usize, LinExpr)>,
    cones: Vec<SupportedConeT<f64>>,
    /// Form row whose constant value proves infeasibility, if any.
    infeasible: Option<Certificate>,
}

enum Certificate {
    Row(usize, f64),
    Cone(usize, Vec<f64>),
}

fn reduce(p: &ConicProgram, form: &Form, tol: f64) -> Reduced {
    let nv = p.num_vars();
    let mut col = vec![None; nv];
    let mut fixed_value = vec![0.0; nv];
    let mut n = 0;
    for (j, v) in p.vars.iter().enumerate() {
        if v.lower == v.upper {
            fixed_value[j] = v.lower;
        } else {
            col[j] = Some(n);
            n += 1;
        }
    }
    let sub = |e: &LinExpr| -> LinExpr {
        let mut out = LinExpr::constant(e.constant);
        for &(j, c) in &e.terms {
            match col[j] {
                Some(k) => out.terms.push((k, c)),
                None => out.constant += c * fixed_value[j],
            }
        }
        out
    };
    let mut kept = Vec::new();
    let mut cones = Vec::new();
    let mut infeasible = None;
    let mut fixed_bound = vec![false; form.g.len()];
    for (j, v) in p.vars.iter().enumerate() {
        if v.lower == v.upper {
            for k in [form.lower_at[j], form.upper_at[j]].into_iter().flatten() {
                fixed_bound[k] = true;
            }
        }
    }
    let is_fixed_bound = |k: usize| fixed_bound[k];
    for b in &form.blocks {
        match b.kind {
            ConeKind::Zero | ConeKind::Nonneg => {
                let mut count = 0;
                for k in b.start..b.start + b.len {
                    let e = sub(&form.g[k]);
                    if e.terms.is_empty() {
                        let bad = match b.kind {
                            ConeKind::Zero => e.constant.abs() > tol * (1.0 + e.constant.abs()),
                            _ => e.constant < -tol,
                        };
                        if bad && infeasible.is_none() && !is_fixed_bound(k) {
                            let sign = if b.kind == ConeKind::Zero {
                                -e.constant.signum()
                            } else {
                                1.0
                            };
                            infeasible = Some(Certificate::Row(k, sign));
                        }
                        continue;
                    }
                    kept.push((k, e));
                    count += 1;
                }
                if count > 0 {
                    cones.push(match b.kind {
                        ConeKind::Zero => SupportedConeT::ZeroConeT(count),
                        _ => SupportedConeT::NonnegativeConeT(count),
                    });
                }
            }
            ConeKind::Soc => {
                let exprs: Vec<LinExpr> = (b.start..b.start + b.len)
                    .map(|k| sub(&form.g[k]))
                    .collect();
                if exprs.iter().all(|e| e.terms.is_empty()) {
                    let vals: Vec<f64> = exprs.iter().map(|e| e.constant).collect();
                    let un = norm(&vals[1..]);
                    if un - vals[0] > tol && infeasible.is_none() {
                        let mut z = vec![1.0];
                        z.extend(vals[1..].iter().map(|v| -v / un));
                        infeasible = Some(Certificate::Cone(b.start, z));
                    }
                    continue;
                }
                for (i, e) in exprs.into_iter().enumerate() {
                    kept.push((b.start + i, e));
                }
                cones.push(SupportedConeT::SecondOrderConeT(b.len));
            }
        }
    }
    Reduced {
        col,
        fixed_value,
        n,
        kept,
        cones,
        infeasible,
    }
}

/// Backend configuration of one attempt. Interior-point stalls depend on
/// the iterate path, so retries change the path, not just the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Attempt {
    /// Backend tolerance as a fraction of ours.
    scale: f64,
    /// Tighter regularisation and iterative refinement.
    careful: bool,
    max_step: f64,
    equilibrate: bool,
}

const ATTEMPTS: [Attempt; 5] = [
    Attempt { scale: 0.1, careful: false, max_step: 0.99, equilibrate: true },
    Attempt { scale: 1e-3, careful: false, max_step: 0.99, equilibrate: true },
    Attempt { scale: 1e-3, careful: true, max_step: 0.9, equilibrate: true },
    Attempt { scale: 1e-3, careful: true, max_step: 0.8, equilibrate: false },
    Attempt { scale: 0.1, careful: false, max_step: 0.7, equilibrate: true },
];

fn settings(tol: f64, max_iter: u32, attempt: &Attempt) -> DefaultSettings<f64> {
    let mut b = DefaultSettingsBuilder::default();
    if attempt.careful {
        b.static_regularization_constant(1e-11)
            .iterative_refinement_reltol(1e-15)
            .iterative_refinement_abstol(1e-15)
            .iterative_refinement_max_iter(40)
            .min_terminate_step_length(1e-6);
    }
    b.verbose(false)
        .max_iter(max_iter)
        .max_step_fraction(attempt.max_step)
        .equilibrate_enable(attempt.equilibrate)
        .tol_feas(tol)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_infeas_abs(tol)
        .tol_infeas_rel(tol)
        .tol_ktratio(1e-7)
        .presolve_enable(false)
        .build()
        .expect("valid solver settings")
}

/// Solves the continuous relaxation of `program`; integrality marks are
/// ignored. Quadratic objective terms must have been lowered.
pub fn solve_conic(program: &ConicProgram, opts: &SolverSettings) -> Result<PrimalDualSolution> {
    program.validate()?;
    if !program.quadratic.is_empty() {
        return Err(Error::QuadraticNotLowered);
    }
    let form = Form::build(program);
    let red = reduce(program, &form, opts.tol);
    if let Some(cert) = &red.infeasible {
        let mut z = vec![0.0; form.g.len()];
        match cert {
            Certificate::Row(k, s) => z[*k] = *s,
            Certificate::Cone(k, v) => z[*k..*k + v.len()].copy_from_slice(v),
        }
        let z = absorb_fixed(program, &form, &red, z, false);
        let mut sol = scatter(program, &form, vec![0.0; program.num_vars()], &z, Status::Infeasible);
        sol.certificate = crate::residuals::certificate_residual(program, &sol);
        return Ok(sol);
    }

    if red.n == 0 {
        let z = absorb_fixed(program, &form, &red, vec![0.0; form.g.len()], true);
        let mut sol = scatter(program, &form, red.fixed_value.clone(), &z, Status::Optimal);
        sol.residuals = kkt(program, &form, &sol.x, &z);
        return Ok(sol);
    }

    // Later attempts tighten the backend tolerance and vary its path; the
    // most accurate optimal point is kept if none reaches `tol`.
    let mut best: Option<PrimalDualSolution> = None;
    for (k, attempt) in ATTEMPTS.iter().enumerate() {
        let max_iter = opts.max_iter * (1 + k.min(2) as u32);
        let mut sol = run_backend(program, &form, &red, opts.tol * attempt.scale, max_iter, attempt)?;
        // A stalled backend may still stop on a point that passes our own KKT check.
        if sol.status == Status::NumericalError && [sol.residuals.primal, sol.residuals.dual, sol.residuals.gap].iter().all(|r| *r <= opts.tol) {
            sol.status = Status::Optimal;
        }
        let done = match sol.status {
            Status::Optimal => sol.residuals.max() <= opts.tol,
            Status::Infeasible => sol.certificate.is_some_and(|c| c <= opts.tol),
            _ => false,
        };
        if done {
            return Ok(sol);
        }
        let better = match &best {
            None => true,
            Some(b) => {
                (sol.status == Status::Optimal && b.status != Status::Optimal)
                    || (sol.status == b.status && sol.residuals.max() < b.residuals.max())
            }
        };
        if better {
            best = Some(sol);
        }
    }
    let mut sol = best.expect("at least one attempt");
    if sol.status == Status::Optimal && sol.residuals.max() > opts.tol {
        sol.status = Status::NumericalError;
    }
    Ok(sol)
}

fn run_backend(
    p: &ConicProgram,
    form: &Form,
    red: &Reduced,
    tol: f64,
    max_iter: u32,
    attempt: &Attempt,
) -> Result<PrimalDualSolution> {
    let n = red.n;
    let m = red.kept.len();
    let mut q = vec![0.0; n];
    for (j, &c) in p.objective.iter().enumerate() {
        if let Some(k) = red.col[j] {
            q[k] = c;
        }
    }
    // A = -G in compressed columns, b = h.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = Vec::with_capacity(m);
    for (i, (_, e)) in red.kept.iter().enumerate() {
        let mut e = e.clone();
        e.compact();
        for &(k, c) in &e.terms {
            cols[k].push((i, -c));
        }
        b.push(e.constant);
    }
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for c in &cols {
        for &(i, v) in c {
            rowval.push(i);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(m, n, colptr, rowval, nzval);
    let pm = CscMatrix::<f64>::zeros((n, n));
    let mut solver = DefaultSolver::new(&pm, &q, &a, &b, &red.cones, settings(tol, max_iter, attempt))
        .map_err(|e| Error::Backend(format!("{e:?}")))?;
    solver.solve();
    let out = &solver.solution;
    let status = match out.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Status::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => Status::IterationLimit,
        _ => Status::NumericalError,
    };

    let mut x = red.fixed_value.clone();
    for (j, c) in red.col.iter().enumerate() {
        if let Some(k) = c {
            x[j] = out.x[*k];
        }
    }
    if status == Status::Unbounded {
        // The backend returns a ray; fixed variables do not move along it.
        for (j, c) in red.col.iter().enumerate() {
            if c.is_none() {
                x[j] = 0.0;
            }
        }
    }
    let mut z = vec![0.0; form.g.len()];
    for (i, (k, _)) in red.kept.iter().enumerate() {
        z[*k] = out.z[i];
    }
    let primal_dual = matches!(status, Status::Optimal | Status::NumericalError);
    let z = absorb_fixed(p, form, red, z, primal_dual);
    let mut sol = scatter(p, form, x, &z, status);
    sol.iterations = out.iterations;
    match status {
        Status::Optimal | Status::NumericalError => sol.residuals = kkt(p, form, &sol.x, &z),
        Status::Infeasible => sol.certificate = crate::residuals::certificate_residual(p, &sol),
        _ => {}
    }
    Ok(sol)
}

/// Sets the bound multipliers of fixed variables so that stationarity
/// (`c - G'z = 0`, or `G'z = 0` for a certificate) holds on their columns.
fn absorb_fixed(p: &ConicProgram, form: &Form, red: &Reduced, mut z: Vec<f64>, with_cost: bool) -> Vec<f64> {
    let gtz = form.gt_z(p.num_vars(), &z);
    for (j, c) in red.col.iter().enumerate() {
        if c.is_some() {
            continue;
        }
        let cost = if with_cost { p.objective[j] } else { 0.0 };
        let r = cost - gtz[j];
        if let (Some(lo), Some(hi)) = (form.lower_at[j], form.upper_at[j]) {
            z[lo] = r.max(0.0);
            z[hi] = (-r).max(0.0);
        }
    }
    z
}

fn scatter(p: &ConicProgram, form: &Form, x: Vec<f64>, z: &[f64], status: Status) -> PrimalDualSolution {
    let n = p.num_vars();
    let row_duals = form.row_at.iter().map(|&k| z[k]).collect();
    let lower_bound_duals = (0..n).map(|j| form.lower_at[j].map_or(0.0, |k| z[k])).collect();
    let upper_bound_duals = (0..n).map(|j| form.upper_at[j].map_or(0.0, |k| z[k])).collect();
    let soc_duals = form
        .soc_at
        .iter()
        .zip(&p.socs)
        .map(|(&k, s)| z[k..k + s.len()].to_vec())
        .collect();
    let objective = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() + p.objective_constant;
    let dual_objective = -form.h_dot(z) + p.objective_constant;
    PrimalDualSolution {
        status,
        x,
        objective,
        dual_objective,
        row_duals,
        lower_bound_duals,
        upper_bound_duals,
        soc_duals,
        residuals: Residuals::default(),
        certificate: None,
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Sense;

    #[test]
    fn single_bound_row_and_its_dual() {
        let mut p = ConicProgram::new();
        let x = p.add_free_var(1.0);
        p.add_row(LinExpr::var(x).plus_constant(-1.0), Sense::Ge);
        let sol = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
        assert!((sol.row_duals[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = ConicProgram::new();
        let x = p.add_free_var(1.0);
        p.add_row(LinExpr::var(x).plus_constant(-1.0), Sense::Ge);
        p.add_row(LinExpr::var(x), Sense::Le);
        let sol = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        assert!(sol.certificate.unwrap() <= 1e-8);
    }

    #[test]
    fn fixed_variables_are_substituted() {
        let mut p = ConicProgram::new();
        let x = p.add_var(2.0, 2.0, 3.0);
        let y = p.add_var(0.0, 10.0, 1.0);
        p.add_row(LinExpr::var(x).with(y, 1.0).plus_constant(-5.0), Sense::Ge);
        let sol = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 9.0).abs() < 1e-7);
        assert!(sol.residuals.max() <= 1e-8);
        assert!(crate::residuals(&p, &sol).max() <= 1e-8);
    }

    #[test]
    fn fixed_variables_can_prove_infeasibility() {
        let mut p = ConicProgram::new();
        let x = p.add_var(2.0, 2.0, 0.0);
        p.add_row(LinExpr::var(x).plus_constant(-3.0), Sense::Ge);
        let sol = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        assert!(sol.certificate.unwrap() <= 1e-12);
    }

    #[test]
    fn unbounded_direction_is_reported() {
        let mut p = ConicProgram::new();
        let x = p.add_free_var(-1.0);
        p.add_row(LinExpr::var(x), Sense::Ge);
        let sol = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Unbounded);
    }

    #[test]
    fn unlowered_quadratic_is_rejected() {
        let mut p = ConicProgram::new();
        let x = p.add_free_var(0.0);
        p.quadratic.push((x.0, 1.0));
        assert!(matches!(
            solve_conic(&p, &SolverSettings::default()),
            Err(Error::QuadraticNotLowered)
        ));
    }
}
