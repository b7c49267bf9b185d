//! Plan solutions: turbine counts, day-ahead schedule and cost breakdown.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ambiguity::{period_radius, AmbiguitySpec, MomentTable, RadiusMode};
use crate::error::Result;
use crate::instance::PlanningInstance;
use crate::recourse::{empirical_recourse_expectation, RecourseUnit};
use crate::sampling::{ForecastTable, SampleTensor};

/// Generator outputs and reserves indexed `(s * T + t) * G + g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub scenarios: usize,
    pub periods: usize,
    pub generators: usize,
    pub p: Vec<f64>,
    /// Up reserve.
    pub up: Vec<f64>,
    /// Down reserve.
    pub down: Vec<f64>,
}

impl Schedule {
    pub fn zeros(scenarios: usize, periods: usize, generators: usize) -> Self {
        let n = scenarios * periods * generators;
        Self {
            scenarios,
            periods,
            generators,
            p: vec![0.0; n],
            up: vec![0.0; n],
            down: vec![0.0; n],
        }
    }

    pub fn index(&self, s: usize, t: usize, g: usize) -> usize {
        (s * self.periods + t) * self.generators + g
    }

    /// Recourse view of the generators in period `(s, t)`.
    pub fn units(&self, inst: &PlanningInstance, s: usize, t: usize) -> Vec<RecourseUnit> {
        inst.generators
            .iter()
            .enumerate()
            .map(|(g, gen)| {
                let k = self.index(s, t, g);
                RecourseUnit {
                    ua: gen.ua,
                    da: gen.da,
                    up: self.up[k].max(0.0),
                    down: self.down[k].max(0.0),
                }
            })
            .collect()
    }
}

/// Objective split; every term is already weighted by scenario durations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub investment: f64,
    pub generation: f64,
    pub reserve: f64,
    /// `sum phi * radius` over periods.
    pub regularizer: f64,
    /// Sample-average recourse cost.
    pub recourse: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn summed(mut self) -> Self {
        self.total = self.investment + self.generation + self.reserve + self.regularizer + self.recourse;
        self
    }
}

/// A line constraint `(s, t, l, k)`; `k = 0` bounds the flow from above,
/// `k = 1` from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineTuple {
    pub s: usize,
    pub t: usize,
    pub l: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub algorithm: String,
    pub mode: Option<RadiusMode>,
    pub model_objective: f64,
    pub lower_bound: f64,
    pub cg_iterations: usize,
    pub lshaped_iterations: usize,
    pub cuts: usize,
    pub nodes: usize,
    /// Line tuples added.
    pub tuples: usize,
    /// Line blocks present at termination, with exact directions marked.
    pub line_blocks: Vec<(usize, usize, usize)>,
    pub exact_directions: Vec<LineTuple>,
    /// Tuples failing the final line check (empty for a clean solve).
    pub violations: Vec<LineTuple>,
    pub wall_ms: u128,
    pub log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    pub turbines: Vec<u32>,
    pub schedule: Schedule,
    pub forecast: ForecastTable,
    pub objective: f64,
    pub breakdown: CostBreakdown,
    pub diagnostics: Diagnostics,
}

impl PlanSolution {
    pub fn x(&self) -> Vec<f64> {
        self.turbines.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Recomputes the objective of a plan from scratch: investment, generation
/// and reserve costs, the regularizer `phi * kappa_st * radius(x)` and the
/// merit-order recourse averaged over the training samples.
pub fn evaluate_objective(
    inst: &PlanningInstance,
    train: &SampleTensor,
    forecast: &ForecastTable,
    moments: Option<&MomentTable>,
    spec: &AmbiguitySpec,
    phi: f64,
    x: &[f64],
    schedule: &Schedule,
) -> Result<CostBreakdown> {
    let mut b = CostBreakdown {
        investment: inst.wind_sites.iter().zip(x).map(|(w, x)| w.cost * x).sum(),
        ..Default::default()
    };
    let t_count = inst.num_periods();
    let ones = vec![1.0; x.len()];
    for s in 0..inst.num_scenarios() {
        let dur = inst.scenarios.duration[s];
        for t in 0..t_count {
            for (g, gen) in inst.generators.iter().enumerate() {
                let k = schedule.index(s, t, g);
                let p = schedule.p[k];
                b.generation += dur * (gen.a * p * p + gen.b * p + gen.c);
                b.reserve += dur * (gen.ur * schedule.up[k] + gen.dr * schedule.down[k]);
            }
            let kappa = spec.kappa_st(s * t_count + t);
            if kappa > 0.0 {
                b.regularizer += dur * phi * period_radius(x, &ones, moments, s, t, kappa, spec.mode)?;
            }
            let rec = empirical_recourse_expectation(
                x,
                &train.rows(s, t),
                forecast.period(s, t),
                &schedule.units(inst, s, t),
                inst.costs.wc,
                inst.costs.ls,
            );
            b.recourse += dur * rec.mean;
        }
    }
    Ok(b.summed())
}
