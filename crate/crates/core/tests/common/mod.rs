//! Oracles shared by the integration tests. None of them reuse the code
//! paths they check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use windplan::instance::Branch;
use windplan::recourse::RecourseUnit;
use windplan_conic::simplex::{solve_lp, LpStatus};
use windplan_conic::{ConicProgram, LinExpr, Sense};

/// Optimal value of the recourse LP `min sum z + wc w + ls l` subject to
/// `sum alpha + w - l = e`, `-up <= alpha <= down`, `z >= da alpha`,
/// `z >= -ua alpha`, solved by the dense simplex.
pub fn recourse_lp(e: f64, units: &[RecourseUnit], wc: f64, ls: f64) -> f64 {
    let mut p = ConicProgram::new();
    let w = p.add_var(0.0, f64::INFINITY, wc);
    let l = p.add_var(0.0, f64::INFINITY, ls);
    let mut bal = LinExpr::var(w).with(l, -1.0).plus_constant(-e);
    for u in units {
        let a = p.add_var(-u.up, u.down, 0.0);
        let z = p.add_free_var(1.0);
        p.add_row(LinExpr::var(z).with(a, -u.da), Sense::Ge);
        p.add_row(LinExpr::var(z).with(a, u.ua), Sense::Ge);
        bal.add(a, 1.0);
    }
    p.add_row(bal, Sense::Eq);
    let sol = solve_lp(&p).expect("valid LP");
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective
}

pub fn random_units(rng: &mut impl Rng, g: usize) -> Vec<RecourseUnit> {
    (0..g)
        .map(|_| RecourseUnit {
            ua: rng.random_range(0.0..60.0),
            da: rng.random_range(0.0..60.0),
            up: if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..30.0) },
            down: if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..30.0) },
        })
        .collect()
}

/// `min_eta eta + (1/eps) mean[(v - eta)_+]`, evaluated at every sample
/// value; the objective is piecewise linear with kinks only there.
pub fn cvar_oracle(values: &[f64], eps: f64) -> f64 {
    let n = values.len() as f64;
    values
        .iter()
        .map(|&eta| eta + values.iter().map(|v| (v - eta).max(0.0)).sum::<f64>() / (eps * n))
        .fold(f64::INFINITY, f64::min)
}

/// Branch flows for nodal injections by solving the reduced susceptance
/// system densely; the slack absorbs the imbalance.
pub fn dense_dc_flows(buses: usize, branches: &[Branch], slack: usize, injection: &[f64]) -> Vec<f64> {
    let mut b = DMatrix::zeros(buses, buses);
    for br in branches {
        b[(br.from, br.from)] += br.susceptance;
        b[(br.to, br.to)] += br.susceptance;
        b[(br.from, br.to)] -= br.susceptance;
        b[(br.to, br.from)] -= br.susceptance;
    }
    let keep: Vec<usize> = (0..buses).filter(|&k| k != slack).collect();
    let reduced = DMatrix::from_fn(keep.len(), keep.len(), |i, j| b[(keep[i], keep[j])]);
    let rhs = DVector::from_iterator(keep.len(), keep.iter().map(|&k| injection[k]));
    let theta_r = reduced.lu().solve(&rhs).expect("connected network");
    let mut theta = vec![0.0; buses];
    for (i, &k) in keep.iter().enumerate() {
        theta[k] = theta_r[i];
    }
    branches.iter().map(|br| br.susceptance * (theta[br.from] - theta[br.to])).collect()
}

/// Random connected network: a random spanning tree plus extra branches.
pub fn random_network(rng: &mut impl Rng, buses: usize, extra: usize) -> Vec<Branch> {
    let mut branches: Vec<Branch> = (1..buses)
        .map(|b| Branch {
            from: rng.random_range(0..b),
            to: b,
            susceptance: rng.random_range(1.0..20.0),
        })
        .collect();
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..buses), rng.random_range(0..buses));
        if a != b {
            branches.push(Branch {
                from: a.min(b),
                to: a.max(b),
                susceptance: rng.random_range(1.0..20.0),
            });
        }
    }
    branches
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
