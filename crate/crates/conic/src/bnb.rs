//! Best-first branch-and-bound over continuous relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::program::ConicProgram;
use crate::solver::{solve_conic, PrimalDualSolution, SolverSettings, Status};

/// Anything that can solve the continuous relaxation of a program.
pub trait RelaxationSolver {
    fn solve_relaxation(&mut self, program: &ConicProgram) -> Result<PrimalDualSolution>;
}

/// The default relaxation solver: [`solve_conic`] with fixed settings.
#[derive(Debug, Clone, Default)]
pub struct ConicRelaxation {
    pub settings: SolverSettings,
}

impl RelaxationSolver for ConicRelaxation {
    fn solve_relaxation(&mut self, program: &ConicProgram) -> Result<PrimalDualSolution> {
        solve_conic(program, &self.settings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbSettings {
    pub int_tol: f64,
    /// Relative gap `(incumbent - bound) / max(1, |incumbent|)` at which the
    /// search stops.
    pub gap_tol: f64,
    pub max_nodes: usize,
}

impl Default for BnbSettings {
    fn default() -> Self {
        Self {
            int_tol: 1e-6,
            gap_tol: 1e-6,
            max_nodes: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegerSolution {
    /// Incumbent with integer-marked entries rounded to exact integers.
    pub x: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    /// Relaxations solved, the root included and the rounding probe excluded.
    pub nodes: usize,
    /// The relaxation solution the incumbent came from.
    pub relaxation: PrimalDualSolution,
}

struct Node {
    bound: f64,
    seq: usize,
    bounds: Vec<(f64, f64)>,
    sol: PrimalDualSolution,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so the max-heap pops the smallest (bound, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn most_fractional(x: &[f64], ints: &[usize], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in ints {
        let f = x[j] - x[j].floor();
        let dist = f.min(1.0 - f);
        if dist > tol && best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|b| b.0)
}

fn with_bounds(base: &ConicProgram, ints: &[usize], bounds: &[(f64, f64)]) -> ConicProgram {
    let mut p = base.clone();
    for (&j, &(lo, hi)) in ints.iter().zip(bounds) {
        p.vars[j].lower = lo;
        p.vars[j].upper = hi;
    }
    p
}

fn snap(mut sol: PrimalDualSolution, ints: &[usize]) -> PrimalDualSolution {
    for &j in ints {
        sol.x[j] = sol.x[j].round();
    }
    sol
}

/// Minimises `program` with its integrality marks enforced.
///
/// Nodes are explored best-first by relaxation bound with creation order as
/// the tie-break; the branching variable is the most fractional one, lowest
/// index first. An initial incumbent comes from rounding the root relaxation
/// and re-solving with the integer variables fixed.
pub fn branch_and_bound<S: RelaxationSolver>(
    program: &ConicProgram,
    solver: &mut S,
    settings: &BnbSettings,
) -> Result<IntegerSolution> {
    let ints: Vec<usize> = program.integer_vars().collect();
    let root_bounds: Vec<(f64, f64)> = ints
        .iter()
        .map(|&j| (program.vars[j].lower.ceil(), program.vars[j].upper.floor()))
        .collect();
    if root_bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Err(Error::RootInfeasible);
    }
    let root = solver.solve_relaxation(&with_bounds(program, &ints, &root_bounds))?;
    match root.status {
        Status::Optimal => {}
        Status::Infeasible => return Err(Error::RootInfeasible),
        Status::Unbounded => return Err(Error::RootUnbounded),
        s => return Err(Error::Relaxation(s)),
    }
    let mut nodes = 1;
    if most_fractional(&root.x, &ints, settings.int_tol).is_none() {
        let bound = root.objective;
        return Ok(IntegerSolution {
            x: snap(root.clone(), &ints).x,
            objective: bound,
            best_bound: bound,
            gap: 0.0,
            nodes,
            relaxation: snap(root, &ints),
        });
    }

    let mut incumbent: Option<PrimalDualSolution> = None;
    let rounded: Vec<(f64, f64)> = ints
        .iter()
        .zip(&root_bounds)
        .map(|(&j, &(lo, hi))| {
            let v = root.x[j].round().clamp(lo, hi);
            (v, v)
        })
        .collect();
    let probe = solver.solve_relaxation(&with_bounds(program, &ints, &rounded))?;
    if probe.status == Status::Optimal {
        incumbent = Some(snap(probe, &ints));
    }

    let gap_of = |inc: f64, bound: f64| (inc - bound) / inc.abs().max(1.0);
    let mut seq = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: root.objective,
        seq,
        bounds: root_bounds,
        sol: root,
    });
    let mut best_bound;
    loop {
        let Some(node) = heap.pop() else {
            best_bound = incumbent.as_ref().map_or(f64::INFINITY, |s| s.objective);
            break;
        };
        best_bound = node.bound;
        if let Some(inc) = &incumbent {
            if gap_of(inc.objective, node.bound) <= settings.gap_tol {
                break;
            }
        }
        let Some(j) = most_fractional(&node.sol.x, &ints, settings.int_tol) else {
            continue;
        };
        let k = ints.iter().position(|&i| i == j).expect("integer variable");
        let v = node.sol.x[j];
        let (lo, hi) = node.bounds[k];
        for child in [(lo, v.floor()), (v.ceil(), hi)] {
            if child.0 > child.1 {
                continue;
            }
            if nodes >= settings.max_nodes {
                return Err(Error::NodeLimit(settings.max_nodes));
            }
            let mut bounds = node.bounds.clone();
            bounds[k] = child;
            let sol = solver.solve_relaxation(&with_bounds(program, &ints, &bounds))?;
            nodes += 1;
            match sol.status {
                Status::Optimal => {}
                Status::Infeasible => continue,
                s => return Err(Error::Relaxation(s)),
            }
            if incumbent
                .as_ref()
                .is_some_and(|inc| gap_of(inc.objective, sol.objective) <= settings.gap_tol)
            {
                continue;
            }
            if most_fractional(&sol.x, &ints, settings.int_tol).is_none() {
                incumbent = Some(snap(sol, &ints));
                continue;
            }
            seq += 1;
            heap.push(Node {
                bound: sol.objective,
                seq,
                bounds,
                sol,
            });
        }
    }
    let inc = incumbent.ok_or(Error::RootInfeasible)?;
    let best_bound = best_bound.min(inc.objective);
    Ok(IntegerSolution {
        x: inc.x.clone(),
        objective: inc.objective,
        best_bound,
        gap: gap_of(inc.objective, best_bound).max(0.0),
        nodes,
        relaxation: inc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{LinExpr, Sense};

    #[test]
    fn integral_root_is_returned_after_one_node() {
        let mut p = ConicProgram::new();
        let x = p.add_integer_var(0.0, 3.0, 1.0);
        p.add_row(LinExpr::var(x).plus_constant(-2.0), Sense::Ge);
        let s = branch_and_bound(&p, &mut ConicRelaxation::default(), &BnbSettings::default()).unwrap();
        assert_eq!(s.nodes, 1);
        assert_eq!(s.x[0], 2.0);
    }

    #[test]
    fn half_integer_bound_rounds_up() {
        let mut p = ConicProgram::new();
        let x = p.add_integer_var(0.0, 3.0, 1.0);
        p.add_row(LinExpr::var(x).plus_constant(-1.5), Sense::Ge);
        let s = branch_and_bound(&p, &mut ConicRelaxation::default(), &BnbSettings::default()).unwrap();
        assert_eq!(s.x[0], 2.0);
        assert!((s.objective - 2.0).abs() < 1e-7);
        assert!(s.nodes <= 3);
    }

    #[test]
    fn infeasible_root_is_an_error() {
        let mut p = ConicProgram::new();
        let x = p.add_integer_var(0.0, 3.0, 1.0);
        p.add_row(LinExpr::var(x).plus_constant(-4.0), Sense::Ge);
        assert!(matches!(
            branch_and_bound(&p, &mut ConicRelaxation::default(), &BnbSettings::default()),
            Err(Error::RootInfeasible)
        ));
    }

    #[test]
    fn small_knapsack_matches_enumeration() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8, a,b,c in 0..=3
        let w = [[2.0, 3.0, 1.0], [4.0, 1.0, 2.0], [3.0, 4.0, 2.0]];
        let cap = [5.0, 11.0, 8.0];
        let val = [5.0, 4.0, 3.0];
        let mut p = ConicProgram::new();
        let v: Vec<_> = val.iter().map(|c| p.add_integer_var(0.0, 3.0, -c)).collect();
        for (row, c) in w.iter().zip(cap) {
            let mut e = LinExpr::constant(-c);
            for (k, a) in row.iter().enumerate() {
                e.add(v[k], *a);
            }
            p.add_row(e, Sense::Le);
        }
        let s = branch_and_bound(&p, &mut ConicRelaxation::default(), &BnbSettings::default()).unwrap();
        let mut best = 0.0f64;
        for a in 0..=3 {
            for b in 0..=3 {
                for c in 0..=3 {
                    let x = [a as f64, b as f64, c as f64];
                    let ok = w
                        .iter()
                        .zip(cap)
                        .all(|(r, c)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= c);
                    if ok {
                        best = best.max(val.iter().zip(&x).map(|(p, q)| p * q).sum());
                    }
                }
            }
        }
        assert!((s.objective + best).abs() < 1e-6, "{} vs {}", s.objective, best);
    }
}
