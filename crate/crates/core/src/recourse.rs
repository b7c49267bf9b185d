//! The second-stage adjustment problem for one period.
//!
//! Given an aggregate forecast error `e` (positive = more wind than
//! forecast) the operator picks adjustments `alpha_g` within
//! `[-up_g, down_g]`, curtailment `w >= 0` and shedding `l >= 0` with
//! `sum(alpha) + w - l = e`, paying `DA_g alpha_g` for positive and
//! `-UA_g alpha_g` for negative adjustments, `WC w` and `LS l`.
//!
//! The problem is solved in closed form by merit order. Its dual has
//! multipliers `gamma` (balance), `mu_up_g` on `alpha_g >= -up_g` and
//! `mu_down_g` on `alpha_g <= down_g`; strong duality reads
//! `value = -e gamma - sum(up_g mu_up_g + down_g mu_down_g)`.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{period_radius, AmbiguitySpec, MomentTable};
use crate::error::{Error, Result};
use crate::instance::PlanningInstance;
use crate::sampling::SampleTensor;
use crate::solution::{LineTuple, Schedule};

/// A generator as seen by the recourse problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecourseUnit {
    pub ua: f64,
    pub da: f64,
    /// Up reserve, bounding negative adjustments.
    pub up: f64,
    /// Down reserve, bounding positive adjustments.
    pub down: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseSolution {
    pub value: f64,
    pub alpha: Vec<f64>,
    pub curtail: f64,
    pub shed: f64,
    pub gamma: f64,
    pub mu_up: Vec<f64>,
    pub mu_down: Vec<f64>,
}

impl RecourseSolution {
    /// `-e gamma - sum(up mu_up + down mu_down)`.
    pub fn dual_value(&self, e: f64, units: &[RecourseUnit]) -> f64 {
        -e * self.gamma
            - units
                .iter()
                .zip(self.mu_up.iter().zip(&self.mu_down))
                .map(|(u, (a, b))| u.up * a + u.down * b)
                .sum::<f64>()
    }
}

/// Merit-order solution with duals.
///
/// Surplus is absorbed by positive adjustments in ascending `DA` order (ties
/// by index), units dearer than `WC` being skipped for curtailment; deficits
/// symmetrically with `UA`, up reserves and `LS`. `gamma` is minus (surplus)
/// or plus (deficit) the price of the last unit actually used, and zero at
/// `e = 0`.
pub fn solve_recourse(e: f64, units: &[RecourseUnit], wc: f64, ls: f64) -> RecourseSolution {
    let g = units.len();
    let mut sol = RecourseSolution {
        value: 0.0,
        alpha: vec![0.0; g],
        curtail: 0.0,
        shed: 0.0,
        gamma: 0.0,
        mu_up: vec![0.0; g],
        mu_down: vec![0.0; g],
    };
    if e == 0.0 {
        return sol;
    }
    let surplus = e > 0.0;
    let price = |u: &RecourseUnit| if surplus { u.da } else { u.ua };
    let cap = |u: &RecourseUnit| if surplus { u.down } else { u.up };
    let slack_price = if surplus { wc } else { ls };
    let mut order: Vec<usize> = (0..g).filter(|&k| price(&units[k]) <= slack_price).collect();
    order.sort_by(|&a, &b| price(&units[a]).total_cmp(&price(&units[b])).then(a.cmp(&b)));

    let mut left = e.abs();
    let mut marginal = 0.0;
    for &k in &order {
        if left <= 0.0 {
            break;
        }
        let take = cap(&units[k]).min(left);
        if take > 0.0 {
            sol.alpha[k] = if surplus { take } else { -take };
            sol.value += price(&units[k]) * take;
            marginal = price(&units[k]);
            left -= take;
        }
    }
    if left > 0.0 {
        if surplus {
            sol.curtail = left;
        } else {
            sol.shed = left;
        }
        sol.value += slack_price * left;
        marginal = slack_price;
    }
    sol.gamma = if surplus { -marginal } else { marginal };
    for (k, u) in units.iter().enumerate() {
        sol.mu_down[k] = (-sol.gamma - u.da).max(0.0);
        sol.mu_up[k] = (sol.gamma - u.ua).max(0.0);
    }
    sol
}

/// Sample-average recourse at a plan with per-sample solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct RecourseExpectation {
    pub mean: f64,
    pub errors: Vec<f64>,
    pub solutions: Vec<RecourseSolution>,
}

/// `e_i = sum_w x_w (xi_iw - xi_bar_w)` for every observation.
pub fn aggregate_errors(x: &[f64], observations: &[Vec<f64>], forecast: &[f64]) -> Vec<f64> {
    observations
        .iter()
        .map(|obs| x.iter().zip(obs).zip(forecast).map(|((x, o), f)| x * (o - f)).sum())
        .collect()
}

/// `(1/N) sum_i h(e_i)` together with every per-sample solution. The sum is
/// accumulated in sample order.
pub fn empirical_recourse_expectation(
    x: &[f64],
    observations: &[Vec<f64>],
    forecast: &[f64],
    units: &[RecourseUnit],
    wc: f64,
    ls: f64,
) -> RecourseExpectation {
    let errors = aggregate_errors(x, observations, forecast);
    let solutions: Vec<RecourseSolution> = errors.iter().map(|&e| solve_recourse(e, units, wc, ls)).collect();
    let mean = if solutions.is_empty() {
        0.0
    } else {
        solutions.iter().map(|s| s.value).sum::<f64>() / solutions.len() as f64
    };
    RecourseExpectation { mean, errors, solutions }
}

/// Tail expectation `min_eta eta + (1/eps) mean[(v - eta)_+]`: the mean of
/// the largest `eps N` values, the boundary value weighted fractionally.
pub fn empirical_cvar(values: &[f64], eps: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Invalid("cannot take the tail expectation of no values".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Invalid(format!("tail mass {eps} must lie in (0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let mass = eps * v.len() as f64;
    let k = (mass.floor() as usize).min(v.len());
    let mut total: f64 = v[..k].iter().sum();
    let rest = mass - k as f64;
    if rest > 0.0 && k < v.len() {
        total += rest * v[k];
    }
    Ok(total / mass)
}

/// Feasibility tolerance of the line check, in MW.
pub const LINE_TOL: f64 = 1e-6;

/// First-stage part of a line constraint, `l0 = p.P + up.r_up + down.r_down
/// + constant`, with the reserve coefficients covering the worst adjustment
/// in either direction.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTerms {
    pub p: Vec<f64>,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub constant: f64,
}

impl OffsetTerms {
    pub fn eval(&self, schedule: &Schedule, s: usize, t: usize) -> f64 {
        let mut v = self.constant;
        for g in 0..self.p.len() {
            let k = schedule.index(s, t, g);
            v += self.p[g] * schedule.p[k] + self.up[g] * schedule.up[k] + self.down[g] * schedule.down[k];
        }
        v
    }
}

/// Offset of line `l` in direction `k` (0 bounds the flow from above, 1 from
/// below). Generation enters as `P + alpha` with `alpha` in `[-up, down]`.
pub fn line_offset_terms(inst: &PlanningInstance, s: usize, t: usize, l: usize, k: usize) -> OffsetTerms {
    let line = &inst.lines[l];
    let sign = if k == 0 { 1.0 } else { -1.0 };
    let load: f64 = line
        .ptdf_load
        .iter()
        .zip(&inst.scenarios.loads[s][t])
        .map(|(pi, d)| pi * d)
        .sum();
    OffsetTerms {
        p: line.ptdf_gen.iter().map(|pi| sign * pi).collect(),
        up: line.ptdf_gen.iter().map(|pi| (-sign * pi).max(0.0)).collect(),
        down: line.ptdf_gen.iter().map(|pi| (sign * pi).max(0.0)).collect(),
        constant: -sign * load - line.capacity,
    }
}

/// Worst-case tail value of every line constraint at a plan:
/// `CVaR_eps(+-sum_w pi_wl x_w xi_i + l0) + radius_stl / eps`.
pub fn line_cvar_values(
    inst: &PlanningInstance,
    x: &[f64],
    schedule: &Schedule,
    train: &SampleTensor,
    moments: Option<&MomentTable>,
    spec: &AmbiguitySpec,
) -> Result<Vec<(LineTuple, f64)>> {
    let eps = inst.costs.eps_risk;
    let lines = inst.num_lines();
    let periods = inst.num_periods();
    let mut out = Vec::with_capacity(2 * lines * periods * inst.num_scenarios());
    for s in 0..inst.num_scenarios() {
        for t in 0..periods {
            let rows = train.rows(s, t);
            for (l, line) in inst.lines.iter().enumerate() {
                let flows: Vec<f64> = rows
                    .iter()
                    .map(|obs| line.ptdf_wind.iter().zip(x).zip(obs).map(|((pi, x), xi)| pi * x * xi).sum())
                    .collect();
                let kappa = spec.kappa_stl(s * periods + t, l, lines);
                let rho = period_radius(x, &line.ptdf_wind, moments, s, t, kappa, spec.mode)?;
                for k in 0..2 {
                    let sign = if k == 0 { 1.0 } else { -1.0 };
                    let l0 = line_offset_terms(inst, s, t, l, k).eval(schedule, s, t);
                    let values: Vec<f64> = flows.iter().map(|f| sign * f + l0).collect();
                    let v = empirical_cvar(&values, eps)? + rho / eps;
                    out.push((LineTuple { s, t, l, k }, v));
                }
            }
        }
    }
    Ok(out)
}

/// Line tuples whose worst-case tail value exceeds [`LINE_TOL`].
pub fn line_flow_check(
    inst: &PlanningInstance,
    x: &[f64],
    schedule: &Schedule,
    train: &SampleTensor,
    moments: Option<&MomentTable>,
    spec: &AmbiguitySpec,
) -> Result<Vec<LineTuple>> {
    Ok(line_cvar_values(inst, x, schedule, train, moments, spec)?
        .into_iter()
        .filter(|(_, v)| *v > LINE_TOL)
        .map(|(tuple, _)| tuple)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: RecourseUnit = RecourseUnit { ua: 8.0, da: 5.0, up: 10.0, down: 10.0 };

    #[test]
    fn small_surplus_uses_the_generator() {
        let s = solve_recourse(4.0, &[UNIT], 100.0, 200.0);
        assert_eq!(s.value, 20.0);
        assert_eq!(s.alpha, vec![4.0]);
        assert_eq!(s.gamma, -5.0);
        assert_eq!(s.mu_down, vec![0.0]);
        assert_eq!(s.mu_up, vec![0.0]);
    }

    #[test]
    fn large_surplus_curtails() {
        let s = solve_recourse(15.0, &[UNIT], 100.0, 200.0);
        assert_eq!(s.value, 550.0);
        assert_eq!(s.curtail, 5.0);
        assert_eq!(s.gamma, -100.0);
        assert_eq!(s.mu_down, vec![95.0]);
        assert_eq!(s.dual_value(15.0, &[UNIT]), 550.0);
    }

    #[test]
    fn zero_error_needs_nothing() {
        let s = solve_recourse(0.0, &[UNIT], 100.0, 200.0);
        assert_eq!(s.value, 0.0);
        assert_eq!(s.gamma, 0.0);
        assert_eq!(s.alpha, vec![0.0]);
    }

    #[test]
    fn deficit_uses_up_adjustment() {
        let s = solve_recourse(-3.0, &[UNIT], 100.0, 200.0);
        assert_eq!(s.value, 24.0);
        assert_eq!(s.gamma, 8.0);
    }

    #[test]
    fn two_sample_expectation() {
        let obs = vec![vec![5.0], vec![1.0]];
        let r = empirical_recourse_expectation(&[1.0], &obs, &[1.0], &[UNIT], 100.0, 200.0);
        assert_eq!(r.errors, vec![4.0, 0.0]);
        let obs = vec![vec![5.0], vec![0.0]];
        let r = empirical_recourse_expectation(&[1.0], &obs, &[1.0], &[UNIT], 100.0, 200.0);
        // errors 4 and -1
        assert_eq!(r.mean, (20.0 + 8.0) / 2.0);
        let obs = vec![vec![7.0], vec![0.0]];
        let r = empirical_recourse_expectation(&[1.0], &obs, &[3.0], &[UNIT], 100.0, 200.0);
        assert_eq!(r.errors, vec![4.0, -3.0]);
        assert_eq!(r.mean, 22.0);
    }

    #[test]
    fn zero_plan_costs_nothing() {
        let obs = vec![vec![5.0, 1.0], vec![0.0, 3.0]];
        let r = empirical_recourse_expectation(&[0.0, 0.0], &obs, &[1.0, 2.0], &[UNIT], 100.0, 200.0);
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn cvar_levels() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_cvar(&v, 1.0).unwrap(), 2.5);
        assert_eq!(empirical_cvar(&v, 0.5).unwrap(), 3.5);
        assert_eq!(empirical_cvar(&v, 0.25).unwrap(), 4.0);
        assert!(empirical_cvar(&[], 0.5).is_err());
    }
}
