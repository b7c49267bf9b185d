//! Power system and planning problem description.
//!
//! Units: power in MW, energy prices in money/MWh, durations in hours.
//! Generator cost is `F(P) = a P^2 + b P + c` per hour. Line flows are
//! computed from shift factors (PTDF): one entry per generator, wind site and
//! load node on every line.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalGenerator {
    pub id: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Ramp-up limit per period.
    pub ru: f64,
    pub rd: f64,
    /// Up/down reserve capacity prices.
    pub ur: f64,
    pub dr: f64,
    /// Up/down real-time adjustment prices.
    pub ua: f64,
    pub da: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionLine {
    pub id: String,
    pub capacity: f64,
    pub ptdf_gen: Vec<f64>,
    pub ptdf_wind: Vec<f64>,
    pub ptdf_load: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindSite {
    pub id: String,
    /// Investment cost per turbine.
    pub cost: f64,
    pub max_turbines: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    /// Number of scenarios S.
    pub count: usize,
    /// Periods per scenario T.
    pub periods: usize,
    /// Hours represented by one period of each scenario.
    pub duration: Vec<f64>,
    /// `loads[s][t][d]`.
    pub loads: Vec<Vec<Vec<f64>>>,
}

impl ScenarioGrid {
    pub fn load_nodes(&self) -> usize {
        self.loads
            .first()
            .and_then(|s| s.first())
            .map_or(0, Vec::len)
    }

    pub fn total_load(&self, s: usize, t: usize) -> f64 {
        self.loads[s][t].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParameters {
    /// Wind curtailment price.
    pub wc: f64,
    /// Load shedding price.
    pub ls: f64,
    /// Tail mass of the line-flow chance constraints.
    pub eps_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningInstance {
    pub generators: Vec<ThermalGenerator>,
    pub lines: Vec<TransmissionLine>,
    pub wind_sites: Vec<WindSite>,
    pub scenarios: ScenarioGrid,
    pub costs: CostParameters,
}

impl PlanningInstance {
    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn num_sites(&self) -> usize {
        self.wind_sites.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.count
    }

    pub fn num_periods(&self) -> usize {
        self.scenarios.periods
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Validates and turns any violation into an error.
    pub fn check(&self) -> Result<()> {
        let report = validate_instance(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::Invalid(report.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            subject: subject.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.subject, v.message)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of the instance plus the sanity
/// condition that total generator capacity covers the peak load.
pub fn validate_instance(inst: &PlanningInstance) -> ValidationReport {
    let mut r = ValidationReport::default();
    let nonneg = |v: f64| v.is_finite() && v >= 0.0;

    if inst.generators.is_empty() {
        r.push("generators", "at least one generator is required");
    }
    for g in &inst.generators {
        let subject = format!("generator {}", g.id);
        if !(g.p_min <= g.p_max) {
            r.push(&subject, format!("p_min {} exceeds p_max {}", g.p_min, g.p_max));
        }
        for (name, v) in [
            ("a", g.a),
            ("ru", g.ru),
            ("rd", g.rd),
            ("ur", g.ur),
            ("dr", g.dr),
            ("ua", g.ua),
            ("da", g.da),
        ] {
            if !nonneg(v) {
                r.push(&subject, format!("{name} = {v} must be nonnegative"));
            }
        }
        if !g.b.is_finite() || !g.c.is_finite() {
            r.push(&subject, "cost coefficients must be finite");
        }
    }

    let ng = inst.generators.len();
    let nw = inst.wind_sites.len();
    let sc = &inst.scenarios;
    let nd = sc.load_nodes();
    for l in &inst.lines {
        let subject = format!("line {}", l.id);
        if !(l.capacity > 0.0) {
            r.push(&subject, format!("capacity {} must be positive", l.capacity));
        }
        for (name, row, want) in [
            ("ptdf_gen", &l.ptdf_gen, ng),
            ("ptdf_wind", &l.ptdf_wind, nw),
            ("ptdf_load", &l.ptdf_load, nd),
        ] {
            if row.len() != want {
                r.push(
                    &subject,
                    format!("{name} has {} entries, expected {want}", row.len()),
                );
            }
            if row.iter().any(|v| !v.is_finite()) {
                r.push(&subject, format!("{name} has non-finite entries"));
            }
        }
    }

    for w in &inst.wind_sites {
        if !nonneg(w.cost) {
            r.push(format!("wind site {}", w.id), format!("cost {} must be nonnegative", w.cost));
        }
    }

    if sc.count < 1 || sc.periods < 1 {
        r.push("scenarios", "need at least one scenario and one period");
    }
    if sc.duration.len() != sc.count {
        r.push(
            "scenarios",
            format!("duration has {} entries for {} scenarios", sc.duration.len(), sc.count),
        );
    }
    if sc.duration.iter().any(|d| !(*d > 0.0)) {
        r.push("scenarios", "durations must be positive");
    }
    if sc.loads.len() != sc.count || sc.loads.iter().any(|s| s.len() != sc.periods) {
        r.push("scenarios", "loads must be indexed [scenario][period][node]");
    } else if sc.loads.iter().flatten().any(|d| d.len() != nd) {
        r.push("scenarios", "every period must list the same load nodes");
    }
    if sc.loads.iter().flatten().flatten().any(|v| !nonneg(*v)) {
        r.push("scenarios", "loads must be nonnegative");
    }

    let c = &inst.costs;
    if !nonneg(c.wc) || !nonneg(c.ls) {
        r.push("costs", "wc and ls must be nonnegative");
    }
    if !(c.eps_risk > 0.0 && c.eps_risk < 1.0) {
        r.push("costs", format!("eps_risk {} must lie in (0, 1)", c.eps_risk));
    }

    let capacity: f64 = inst.generators.iter().map(|g| g.p_max).sum();
    let peak = sc
        .loads
        .iter()
        .flatten()
        .map(|d| d.iter().sum::<f64>())
        .fold(0.0, f64::max);
    if !inst.generators.is_empty() && capacity < peak {
        r.push(
            "generators",
            format!("total p_max {capacity} is below the peak load {peak}"),
        );
    }
    r
}

/// A network branch between two buses (0-based) with series susceptance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
}

/// DC power transfer distribution factors: `ptdf[l][k]` is the flow on
/// branch `l` (positive in the `from -> to` direction) caused by one MW
/// injected at bus `k` and withdrawn at the slack bus. The slack column is
/// zero.
pub fn compute_ptdf(buses: usize, branches: &[Branch], slack: usize) -> Result<Vec<Vec<f64>>> {
    if slack >= buses {
        return Err(Error::Network(format!("slack bus {slack} does not exist")));
    }
    let mut adj = vec![Vec::new(); buses];
    for (l, b) in branches.iter().enumerate() {
        if b.from >= buses || b.to >= buses || b.from == b.to {
            return Err(Error::Network(format!("branch {l} has invalid endpoints")));
        }
        if !(b.susceptance > 0.0) {
            return Err(Error::Network(format!("branch {l} needs positive susceptance")));
        }
        adj[b.from].push(b.to);
        adj[b.to].push(b.from);
    }
    let mut seen = vec![false; buses];
    let mut queue = VecDeque::from([slack]);
    seen[slack] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Network(format!("bus {k} is not connected to the slack")));
    }

    // Reduced susceptance matrix without the slack row and column.
    let reduced = |k: usize| if k < slack { Some(k) } else if k > slack { Some(k - 1) } else { None };
    let m = buses - 1;
    let mut bmat = DMatrix::<f64>::zeros(m, m);
    for br in branches {
        let (i, j) = (reduced(br.from), reduced(br.to));
        if let Some(i) = i {
            bmat[(i, i)] += br.susceptance;
        }
        if let Some(j) = j {
            bmat[(j, j)] += br.susceptance;
        }
        if let (Some(i), Some(j)) = (i, j) {
            bmat[(i, j)] -= br.susceptance;
            bmat[(j, i)] -= br.susceptance;
        }
    }
    let lu = bmat.lu();
    let inv = if m == 0 {
        DMatrix::zeros(0, 0)
    } else {
        lu.try_inverse()
            .ok_or_else(|| Error::Network("reduced susceptance matrix is singular".into()))?
    };
    let angle = |k: usize, inj: usize| -> f64 {
        match (reduced(k), reduced(inj)) {
            (Some(a), Some(b)) => inv[(a, b)],
            _ => 0.0,
        }
    };
    Ok(branches
        .iter()
        .map(|br| {
            (0..buses)
                .map(|k| br.susceptance * (angle(br.from, k) - angle(br.to, k)))
                .collect()
        })
        .collect())
}

/// DC flows for a vector of net bus injections that sums to zero.
pub fn dc_flows(buses: usize, branches: &[Branch], slack: usize, injection: &[f64]) -> Result<Vec<f64>> {
    let ptdf = compute_ptdf(buses, branches, slack)?;
    let inj = DVector::from_column_slice(injection);
    Ok(ptdf
        .iter()
        .map(|row| DVector::from_column_slice(row).dot(&inj))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus() -> PlanningInstance {
        PlanningInstance {
            generators: vec![ThermalGenerator {
                id: "g1".into(),
                a: 0.01,
                b: 10.0,
                c: 0.0,
                p_min: 0.0,
                p_max: 100.0,
                ru: 50.0,
                rd: 50.0,
                ur: 1.0,
                dr: 1.0,
                ua: 8.0,
                da: 5.0,
            }],
            lines: vec![TransmissionLine {
                id: "l1".into(),
                capacity: 80.0,
                ptdf_gen: vec![0.0],
                ptdf_wind: vec![-1.0],
                ptdf_load: vec![-1.0],
            }],
            wind_sites: vec![WindSite {
                id: "w1".into(),
                cost: 5.0,
                max_turbines: 4,
            }],
            scenarios: ScenarioGrid {
                count: 1,
                periods: 1,
                duration: vec![1.0],
                loads: vec![vec![vec![50.0]]],
            },
            costs: CostParameters {
                wc: 100.0,
                ls: 200.0,
                eps_risk: 0.1,
            },
        }
    }

    #[test]
    fn well_formed_instance_is_valid() {
        let inst = two_bus();
        assert!(validate_instance(&inst).is_valid());
        assert_eq!(validate_instance(&inst), validate_instance(&inst));
    }

    #[test]
    fn inverted_bounds_name_the_generator() {
        let mut inst = two_bus();
        inst.generators[0].p_min = 200.0;
        let r = validate_instance(&inst);
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].subject.contains("g1"));
    }

    #[test]
    fn ptdf_length_mismatch_is_reported() {
        let mut inst = two_bus();
        inst.lines[0].ptdf_gen.push(0.5);
        let r = validate_instance(&inst);
        assert!(r.violations.iter().any(|v| v.message.contains("ptdf_gen")));
    }

    #[test]
    fn json_round_trip() {
        let inst = two_bus();
        assert_eq!(PlanningInstance::from_json(&inst.to_json().unwrap()).unwrap(), inst);
    }

    #[test]
    fn two_bus_ptdf() {
        let p = compute_ptdf(2, &[Branch { from: 0, to: 1, susceptance: 10.0 }], 0).unwrap();
        assert_eq!(p[0][0], 0.0);
        assert!((p[0][1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_bus_ring() {
        let br = [
            Branch { from: 0, to: 1, susceptance: 1.0 },
            Branch { from: 1, to: 2, susceptance: 1.0 },
            Branch { from: 2, to: 0, susceptance: 1.0 },
        ];
        let p = compute_ptdf(3, &br, 0).unwrap();
        assert!((p[0][1].abs() - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1][1].abs() - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[2][1].abs() - 1.0 / 3.0).abs() < 1e-12);
        assert!(p.iter().all(|row| row[0] == 0.0));
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let br = [Branch { from: 0, to: 1, susceptance: 1.0 }];
        assert!(matches!(compute_ptdf(3, &br, 0), Err(Error::Network(_))));
    }
}
