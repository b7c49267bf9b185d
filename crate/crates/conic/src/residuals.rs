//! Independent KKT evaluation.
//!
//! Every constraint of a program is written as `g(x) = G x + h` belonging to a
//! cone: equality rows to the zero cone, inequality rows and finite variable
//! bounds to the nonnegative orthant, cone blocks to the second-order cone.
//! A dual point `z` lives in the dual cone and the program is solved when
//!
//! * `g(x)` lies in its cone (primal feasibility),
//! * `c - G'z = 0` and `z` lies in the dual cone (dual feasibility),
//! * `c'x + h'z = 0` (zero duality gap, equivalently `z'g(x) = 0`).

use crate::program::{ConicProgram, LinExpr, Sense};
use crate::solver::PrimalDualSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ConeKind {
    Zero,
    Nonneg,
    Soc,
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub kind: ConeKind,
    pub start: usize,
    pub len: usize,
}

/// Full-space cone form of a program (no presolve).
#[derive(Debug, Clone)]
pub(crate) struct Form {
    pub g: Vec<LinExpr>,
    pub blocks: Vec<Block>,
    pub row_at: Vec<usize>,
    pub lower_at: Vec<Option<usize>>,
    pub upper_at: Vec<Option<usize>>,
    pub soc_at: Vec<usize>,
}

impl Form {
    pub fn build(p: &ConicProgram) -> Form {
        let n = p.num_vars();
        let mut g = Vec::new();
        let mut blocks = Vec::new();
        let mut row_at = vec![0; p.rows.len()];
        let mut lower_at = vec![None; n];
        let mut upper_at = vec![None; n];
        let mut soc_at = Vec::with_capacity(p.socs.len());

        let start = g.len();
        for (i, r) in p.rows.iter().enumerate() {
            if r.sense == Sense::Eq {
                row_at[i] = g.len();
                g.push(r.expr.clone());
            }
        }
        if g.len() > start {
            blocks.push(Block {
                kind: ConeKind::Zero,
                start,
                len: g.len() - start,
            });
        }
        let start = g.len();
        for (i, r) in p.rows.iter().enumerate() {
            match r.sense {
                Sense::Eq => {}
                Sense::Ge => {
                    row_at[i] = g.len();
                    g.push(r.expr.clone());
                }
                Sense::Le => {
                    row_at[i] = g.len();
                    g.push(r.expr.scaled(-1.0));
                }
            }
        }
        for (j, v) in p.vars.iter().enumerate() {
            if v.lower.is_finite() {
                lower_at[j] = Some(g.len());
                g.push(LinExpr::term(crate::VarId(j), 1.0).plus_constant(-v.lower));
            }
        }
        for (j, v) in p.vars.iter().enumerate() {
            if v.upper.is_finite() {
                upper_at[j] = Some(g.len());
                g.push(LinExpr::term(crate::VarId(j), -1.0).plus_constant(v.upper));
            }
        }
        if g.len() > start {
            blocks.push(Block {
                kind: ConeKind::Nonneg,
                start,
                len: g.len() - start,
            });
        }
        for s in &p.socs {
            let start = g.len();
            soc_at.push(start);
            g.push(s.t.clone());
            g.extend(s.u.iter().cloned());
            blocks.push(Block {
                kind: ConeKind::Soc,
                start,
                len: s.len(),
            });
        }
        Form {
            g,
            blocks,
            row_at,
            lower_at,
            upper_at,
            soc_at,
        }
    }

    /// Dual vector in form order assembled from the structured duals.
    pub fn gather_z(&self, p: &ConicProgram, sol: &PrimalDualSolution) -> Vec<f64> {
        let mut z = vec![0.0; self.g.len()];
        for (i, &k) in self.row_at.iter().enumerate() {
            z[k] = sol.row_duals.get(i).copied().unwrap_or(0.0);
        }
        for j in 0..p.num_vars() {
            if let Some(k) = self.lower_at[j] {
                z[k] = sol.lower_bound_duals.get(j).copied().unwrap_or(0.0);
            }
            if let Some(k) = self.upper_at[j] {
                z[k] = sol.upper_bound_duals.get(j).copied().unwrap_or(0.0);
            }
        }
        for (b, &k) in self.soc_at.iter().enumerate() {
            if let Some(d) = sol.soc_duals.get(b) {
                z[k..k + d.len()].copy_from_slice(d);
            }
        }
        z
    }

    /// `G' z` as a dense vector of length `n`.
    pub fn gt_z(&self, n: usize, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (e, &zk) in self.g.iter().zip(z) {
            if zk != 0.0 {
                for &(j, c) in &e.terms {
                    out[j] += c * zk;
                }
            }
        }
        out
    }

    pub fn h_dot(&self, z: &[f64]) -> f64 {
        self.g.iter().zip(z).map(|(e, zk)| e.constant * zk).sum()
    }

    pub fn h_norm(&self) -> f64 {
        self.g.iter().map(|e| e.constant.abs()).fold(0.0, f64::max)
    }

    /// Largest cone violation of `v` (primal cone membership).
    pub fn primal_violation(&self, v: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let s = &v[b.start..b.start + b.len];
            let viol = match b.kind {
                ConeKind::Zero => s.iter().map(|x| x.abs()).fold(0.0, f64::max),
                ConeKind::Nonneg => s.iter().map(|&x| (-x).max(0.0)).fold(0.0, f64::max),
                ConeKind::Soc => (norm(&s[1..]) - s[0]).max(0.0),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Largest dual cone violation of `z`; the zero cone's dual is free.
    pub fn dual_violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let s = &z[b.start..b.start + b.len];
            let viol = match b.kind {
                ConeKind::Zero => 0.0,
                ConeKind::Nonneg => s.iter().map(|&x| (-x).max(0.0)).fold(0.0, f64::max),
                ConeKind::Soc => (norm(&s[1..]) - s[0]).max(0.0),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Relative KKT residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    /// Largest cone violation of `g(x)` over `1 + max(|h|, |x|)`.
    pub primal: f64,
    /// `max(|c - G'z| / (1 + |c|), dual cone violation / (1 + |z|))`.
    pub dual: f64,
    /// `|c'x + h'z| / (1 + |c'x| + |h'z|)`.
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// Evaluates the KKT residuals of `(x, z)` in `solution` for `program` from
/// scratch. The quadratic part of the objective must already be lowered.
pub fn residuals(program: &ConicProgram, solution: &PrimalDualSolution) -> Residuals {
    let form = Form::build(program);
    kkt(program, &form, &solution.x, &form.gather_z(program, solution))
}

pub(crate) fn kkt(p: &ConicProgram, form: &Form, x: &[f64], z: &[f64]) -> Residuals {
    let n = p.num_vars();
    if form.g.is_empty() && n == 0 {
        return Residuals::default();
    }
    let gx: Vec<f64> = form.g.iter().map(|e| e.eval(x)).collect();
    let primal = form.primal_violation(&gx) / (1.0 + form.h_norm().max(inf_norm(x)));

    let gtz = form.gt_z(n, z);
    let stat = p
        .objective
        .iter()
        .zip(&gtz)
        .map(|(c, g)| (c - g).abs())
        .fold(0.0, f64::max);
    let dual = (stat / (1.0 + inf_norm(&p.objective)))
        .max(form.dual_violation(z) / (1.0 + inf_norm(z)));

    let cx: f64 = p.objective.iter().zip(x).map(|(c, v)| c * v).sum();
    let hz = form.h_dot(z);
    let gap = (cx + hz).abs() / (1.0 + cx.abs() + hz.abs());
    Residuals { primal, dual, gap }
}

/// Quality of a primal infeasibility certificate `z`: `G'z = 0`, `z` in the
/// dual cone and `h'z < 0`. Returns `max(|G'z|, cone violation) / (-h'z)`, or
/// `None` when `h'z >= 0` so that `z` certifies nothing.
pub fn certificate_residual(program: &ConicProgram, solution: &PrimalDualSolution) -> Option<f64> {
    let form = Form::build(program);
    let z = form.gather_z(program, solution);
    let hz = form.h_dot(&z);
    if hz >= 0.0 {
        return None;
    }
    let gtz = inf_norm(&form.gt_z(program.num_vars(), &z));
    Some(gtz.max(form.dual_violation(&z)) / -hz)
}
