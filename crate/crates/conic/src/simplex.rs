//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Small and slow on purpose: it shares no code with the interior-point path
//! and serves as a reference for linear programs.

use crate::error::{Error, Result};
use crate::program::{ConicProgram, Sense};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

/// How an original variable is expressed through nonnegative columns.
enum Map {
    Shift { col: usize, lower: f64 },
    Mirror { col: usize, upper: f64 },
    Split { pos: usize, neg: usize },
}

/// Solves a program without cone blocks or quadratic terms; integrality
/// marks are ignored.
pub fn solve_lp(p: &ConicProgram) -> Result<LpSolution> {
    p.validate()?;
    if !p.socs.is_empty() || !p.quadratic.is_empty() {
        return Err(Error::NotLinear);
    }
    let mut ncols = 0;
    let mut maps = Vec::with_capacity(p.num_vars());
    // Constant offset and column coefficients of each original variable.
    let mut extra_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for v in &p.vars {
        if v.lower.is_finite() {
            maps.push(Map::Shift { col: ncols, lower: v.lower });
            if v.upper.is_finite() {
                extra_rows.push((vec![(ncols, 1.0)], v.upper - v.lower));
            }
            ncols += 1;
        } else if v.upper.is_finite() {
            maps.push(Map::Mirror { col: ncols, upper: v.upper });
            ncols += 1;
        } else {
            maps.push(Map::Split { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }
    let expand = |terms: &[(usize, f64)]| -> (Vec<(usize, f64)>, f64) {
        let mut out = Vec::new();
        let mut offset = 0.0;
        for &(j, c) in terms {
            match maps[j] {
                Map::Shift { col, lower } => {
                    out.push((col, c));
                    offset += c * lower;
                }
                Map::Mirror { col, upper } => {
                    out.push((col, -c));
                    offset += c * upper;
                }
                Map::Split { pos, neg } => {
                    out.push((pos, c));
                    out.push((neg, -c));
                }
            }
        }
        (out, offset)
    };

    // Rows as (coefficients, sense, rhs) meaning `coef . y  sense  rhs`.
    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    for r in &p.rows {
        let (coef, offset) = expand(&r.expr.terms);
        rows.push((coef, r.sense, -(r.expr.constant + offset)));
    }
    for (coef, rhs) in extra_rows {
        rows.push((coef, Sense::Le, rhs));
    }
    let (cost, cost_offset) = {
        let terms: Vec<(usize, f64)> = p.objective.iter().copied().enumerate().collect();
        expand(&terms)
    };

    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let nstruct = ncols + nslack;
    let width = nstruct + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0; m];
    let mut s = ncols;
    for (i, (coef, sense, rhs)) in rows.iter().enumerate() {
        for &(j, c) in coef {
            t[i][j] += c;
        }
        match sense {
            Sense::Le => {
                t[i][s] = 1.0;
                s += 1;
            }
            Sense::Ge => {
                t[i][s] = -1.0;
                s += 1;
            }
            Sense::Eq => {}
        }
        t[i][width - 1] = *rhs;
        if *rhs < 0.0 {
            t[i].iter_mut().for_each(|v| *v = -*v);
        }
        t[i][nstruct + i] = 1.0;
        basis[i] = nstruct + i;
    }

    // Phase one: minimise the sum of artificials.
    for i in 0..m {
        for j in 0..width {
            t[m][j] -= t[i][j];
        }
    }
    for i in 0..m {
        t[m][nstruct + i] = 0.0;
    }
    if !run(&mut t, &mut basis, width - 1) {
        unreachable!("phase one is bounded");
    }
    let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    if -t[m][width - 1] > 1e-9 * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; p.num_vars()],
            objective: f64::NAN,
        });
    }
    // Drive artificials out of the basis; rows that cannot be cleared are redundant.
    let mut redundant = Vec::new();
    for i in 0..m {
        if basis[i] >= nstruct {
            match (0..nstruct).find(|&j| t[i][j].abs() > 1e-9) {
                Some(j) => pivot(&mut t, &mut basis, i, j),
                None => redundant.push(i),
            }
        }
    }
    for &i in redundant.iter().rev() {
        t.remove(i);
        basis.remove(i);
    }
    let m = basis.len();
    // Phase two: drop artificial columns and install the real cost row.
    for row in t.iter_mut() {
        let rhs = row[width - 1];
        row.truncate(nstruct);
        row.push(rhs);
    }
    let width = nstruct + 1;
    t[m] = vec![0.0; width];
    for &(j, c) in &cost {
        t[m][j] += c;
    }
    for i in 0..m {
        let cb = t[m][basis[i]];
        if cb != 0.0 {
            for j in 0..width {
                t[m][j] -= cb * t[i][j];
            }
        }
    }
    if !run(&mut t, &mut basis, nstruct) {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![0.0; p.num_vars()],
            objective: f64::NEG_INFINITY,
        });
    }
    let mut y = vec![0.0; nstruct];
    for (i, &b) in basis.iter().enumerate() {
        y[b] = t[i][width - 1];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| match *mp {
            Map::Shift { col, lower } => lower + y[col],
            Map::Mirror { col, upper } => upper - y[col],
            Map::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective = cost.iter().map(|&(j, c)| c * y[j]).sum::<f64>()
        + cost_offset
        + p.objective_constant;
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

/// Bland-rule iterations on the tableau whose last row holds reduced costs
/// and whose entering candidates are columns `0..ncand`. Returns false when
/// the objective is unbounded.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], ncand: usize) -> bool {
    let m = basis.len();
    let rhs = t[0].len() - 1;
    loop {
        let Some(enter) = (0..ncand).find(|&j| t[m][j] < -COST_TOL) else {
            return true;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = t[i][enter];
            if a > PIVOT_TOL {
                let ratio = t[i][rhs] / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[l])
                    }
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        match leave {
            None => return false,
            Some(i) => pivot(t, basis, i, enter),
        }
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let pv = t[r][c];
    t[r].iter_mut().for_each(|v| *v /= pv);
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let f = row[c];
        if f != 0.0 {
            for (v, p) in row.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            row[c] = 0.0;
        }
    }
    basis[r] = c;
}
