//! Out-of-sample metrics and the experiments built on them: method
//! comparison at fixed capacity, cross-validation of kappa, and coverage of
//! the finite-sample certificate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ambiguity::{period_radius, AmbiguitySpec, MomentTable, RadiusMode};
use crate::decomp::{solve, Problem, SolveOptions};
use crate::error::{Error, Result};
use crate::instance::PlanningInstance;
use crate::recourse::empirical_recourse_expectation;
use crate::sampling::{substream, ForecastTable, SampleTensor};
use crate::solution::{CostBreakdown, PlanSolution, Schedule};

/// The four planning variants compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Decision-dependent radius from the full covariance.
    DdroC,
    /// Decision-dependent radius from the variances only.
    DdroV,
    /// Radius proportional to the plan's norm.
    Ndro,
    /// Empirical distribution, no radius.
    Eo,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::DdroC, Method::DdroV, Method::Ndro, Method::Eo];

    pub fn mode(self) -> RadiusMode {
        match self {
            Method::DdroC => RadiusMode::FullCovariance,
            Method::DdroV => RadiusMode::Diagonal,
            Method::Ndro => RadiusMode::NormOnly,
            Method::Eo => RadiusMode::Empirical,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::DdroC => "ddroc",
            Method::DdroV => "ddrov",
            Method::Ndro => "ndro",
            Method::Eo => "eo",
        }
    }

    pub fn spec(self, kappa: f64) -> AmbiguitySpec {
        match self {
            Method::Eo => AmbiguitySpec::empirical(),
            m => AmbiguitySpec::new(m.mode(), kappa),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddroc" | "ddro" => Ok(Method::DdroC),
            "ddrov" => Ok(Method::DdroV),
            "ndro" => Ok(Method::Ndro),
            "eo" => Ok(Method::Eo),
            _ => Err(Error::Invalid(format!("unknown method {s:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Reserve cost plus mean recourse over the test samples, weighted by
/// scenario duration. Generation and investment are left out.
pub fn risk_management_cost_with(
    inst: &PlanningInstance,
    x: &[f64],
    schedule: &Schedule,
    forecast: &ForecastTable,
    test: &SampleTensor,
) -> Result<f64> {
    test.check_shape(inst.num_scenarios(), inst.num_periods(), inst.num_sites())?;
    let mut total = 0.0;
    for s in 0..inst.num_scenarios() {
        let dur = inst.scenarios.duration[s];
        for t in 0..inst.num_periods() {
            let mut reserve = 0.0;
            for (g, gen) in inst.generators.iter().enumerate() {
                let k = schedule.index(s, t, g);
                reserve += gen.ur * schedule.up[k] + gen.dr * schedule.down[k];
            }
            let rec = empirical_recourse_expectation(
                x,
                &test.rows(s, t),
                forecast.period(s, t),
                &schedule.units(inst, s, t),
                inst.costs.wc,
                inst.costs.ls,
            );
            total += dur * (reserve + rec.mean);
        }
    }
    Ok(total)
}

/// [`risk_management_cost_with`] at a solved plan and its own forecast.
pub fn risk_management_cost(inst: &PlanningInstance, plan: &PlanSolution, test: &SampleTensor) -> Result<f64> {
    risk_management_cost_with(inst, &plan.x(), &plan.schedule, &plan.forecast, test)
}

/// Sample variance (divisor N-1) of the aggregate output `sum_w x_w xi_w`.
pub fn smoothing_variance(x: &[f64], test: &SampleTensor, s: usize, t: usize) -> Result<f64> {
    let n = test.samples();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    if x.len() != test.sites() {
        return Err(Error::Dimension(format!("x has {} entries for {} sites", x.len(), test.sites())));
    }
    let agg: Vec<f64> = (0..n)
        .map(|i| x.iter().enumerate().map(|(w, xw)| xw * test.get(s, t, w, i)).sum())
        .collect();
    let mean = agg.iter().sum::<f64>() / n as f64;
    Ok(agg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
}

/// Smoothing variance averaged over every period.
pub fn mean_smoothing_variance(x: &[f64], test: &SampleTensor) -> Result<f64> {
    let mut total = 0.0;
    for s in 0..test.scenarios() {
        for t in 0..test.periods() {
            total += smoothing_variance(x, test, s, t)?;
        }
    }
    Ok(total / (test.scenarios() * test.periods()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RiskCost,
    SmoothingVariance,
}

impl Metric {
    pub fn evaluate(self, inst: &PlanningInstance, plan: &PlanSolution, test: &SampleTensor) -> Result<f64> {
        match self {
            Metric::RiskCost => risk_management_cost(inst, plan, test),
            Metric::SmoothingVariance => mean_smoothing_variance(&plan.x(), test),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub metric: Metric,
    /// `(kappa, score)` in ascending kappa.
    pub scores: Vec<(f64, f64)>,
    pub best: f64,
}

/// Score difference, relative to the largest score on the grid, below which
/// two grid points tie.
pub const CV_TIE_TOL: f64 = 1e-6;

/// Solves `problem` once per distinct grid value (with the problem's mode)
/// and scores each plan on `validation`. The lowest score wins, ties (within
/// [`CV_TIE_TOL`]) going to the smaller kappa.
pub fn cross_validate_kappa(
    problem: &Problem,
    validation: &SampleTensor,
    grid: &[f64],
    metric: Metric,
    opts: &SolveOptions,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::Invalid("the kappa grid is empty".into()));
    }
    if let Some(k) = grid.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
        return Err(Error::NegativeKappa(*k));
    }
    let mut kappas = grid.to_vec();
    kappas.sort_by(f64::total_cmp);
    kappas.dedup();
    let mut scores = Vec::with_capacity(kappas.len());
    for &kappa in &kappas {
        let mut p = problem.clone();
        p.spec = AmbiguitySpec {
            kappa: crate::ambiguity::KappaTable::Scalar(kappa),
            ..problem.spec.clone()
        };
        let plan = match solve(&p, opts) {
            Ok((plan, _)) => plan,
            Err(e) => {
                return Err(Error::CrossValidation {
                    kappa,
                    message: e.to_string(),
                    partial: scores,
                })
            }
        };
        scores.push((kappa, metric.evaluate(&p.instance, &plan, validation)?));
    }
    let min = scores.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    let scale = scores.iter().map(|&(_, v)| v.abs()).fold(1.0, f64::max);
    let best = scores
        .iter()
        .find(|&&(_, v)| v <= min + CV_TIE_TOL * scale)
        .map_or(kappas[0], |&(k, _)| k);
    Ok(CvReport { metric, scores, best })
}

/// Training and test samples of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedCase {
    pub seed: u64,
    pub train: SampleTensor,
    pub test: SampleTensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub seed: u64,
    pub kappa: f64,
    pub turbines: Vec<u32>,
    pub risk_cost: f64,
    pub smoothing_variance: f64,
    pub breakdown: CostBreakdown,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn value(row: &ReportRow, metric: Metric) -> f64 {
        match metric {
            Metric::RiskCost => row.risk_cost,
            Metric::SmoothingVariance => row.smoothing_variance,
        }
    }

    /// Metric values of one method in seed order.
    pub fn values(&self, method: Method, metric: Metric) -> Vec<f64> {
        self.rows.iter().filter(|r| r.method == method).map(|r| Self::value(r, metric)).collect()
    }

    pub fn mean(&self, method: Method, metric: Metric) -> f64 {
        let v = self.values(method, metric);
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    /// Fraction of seeds on which `a`'s metric is at most `b`'s.
    pub fn win_fraction(&self, a: Method, b: Method, metric: Metric) -> f64 {
        let by_seed = |m: Method| -> BTreeMap<u64, f64> {
            self.rows
                .iter()
                .filter(|r| r.method == m)
                .map(|r| (r.seed, Self::value(r, metric)))
                .collect()
        };
        let (va, vb) = (by_seed(a), by_seed(b));
        let shared: Vec<(f64, f64)> = va.iter().filter_map(|(s, x)| vb.get(s).map(|y| (*x, *y))).collect();
        if shared.is_empty() {
            return 0.0;
        }
        shared.iter().filter(|(x, y)| x <= y).count() as f64 / shared.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,seed,kappa,turbines,risk_cost,smoothing_variance,investment,generation,reserve,regularizer,recourse,total,n_train,n_test\n",
        );
        for r in &self.rows {
            let turbines: Vec<String> = r.turbines.iter().map(ToString::to_string).collect();
            let b = &r.breakdown;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.method,
                r.seed,
                r.kappa,
                turbines.join(" "),
                r.risk_cost,
                r.smoothing_variance,
                b.investment,
                b.generation,
                b.reserve,
                b.regularizer,
                b.recourse,
                b.total,
                r.n_train,
                r.n_test
            );
        }
        out
    }

    /// One line per method with the mean of both metrics.
    pub fn summary(&self) -> String {
        let mut out = String::from("method,mean_risk_cost,mean_smoothing_variance\n");
        for m in self.methods() {
            let _ = writeln!(
                out,
                "{},{},{}",
                m,
                self.mean(m, Metric::RiskCost),
                self.mean(m, Metric::SmoothingVariance)
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Box plot of one metric grouped by method.
    pub fn boxplot_svg(&self, metric: Metric) -> String {
        let groups: Vec<(String, Vec<f64>)> =
            self.methods().into_iter().map(|m| (m.name().to_string(), self.values(m, metric))).collect();
        let title = match metric {
            Metric::RiskCost => "risk management cost",
            Metric::SmoothingVariance => "smoothing variance",
        };
        boxplot_svg(&groups, title)
    }

    /// Writes `report.csv`, `summary.csv`, `report.json` and one box plot per
    /// metric into `dir`.
    /// Report files by name: the per-seed table, the summary, the JSON
    /// document and one box plot per metric.
    pub fn files(&self) -> Result<Vec<(&'static str, String)>> {
        Ok(vec![
            ("report.csv", self.to_csv()),
            ("summary.csv", self.summary()),
            ("report.json", self.to_json()?),
            ("risk_cost.svg", self.boxplot_svg(Metric::RiskCost)),
            ("smoothing_variance.svg", self.boxplot_svg(Metric::SmoothingVariance)),
        ])
    }

    pub fn write_all(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, text) in self.files()? {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Minimal SVG box plot: quartile boxes, median lines, whiskers at the
/// extremes.
pub fn boxplot_svg(groups: &[(String, Vec<f64>)], title: &str) -> String {
    let (w, h, pad) = (120.0 * groups.len().max(1) as f64 + 80.0, 320.0, 40.0);
    let all: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let y = |v: f64| h - pad - (v - lo) / span * (h - 2.0 * pad);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    );
    for (k, (name, values)) in groups.iter().enumerate() {
        if values.is_empty() {
            continue;
        }
        let mut v = values.clone();
        v.sort_by(f64::total_cmp);
        let cx = 80.0 + 120.0 * k as f64;
        let (q1, q2, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let (vmin, vmax) = (v[0], v[v.len() - 1]);
        let _ = writeln!(
            out,
            "<line x1=\"{cx}\" y1=\"{:.2}\" x2=\"{cx}\" y2=\"{:.2}\" stroke=\"black\"/>",
            y(vmin),
            y(vmax)
        );
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"60\" height=\"{:.2}\" fill=\"#cfe0f3\" stroke=\"black\"/>",
            cx - 30.0,
            y(q3),
            (y(q1) - y(q3)).max(0.5)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
            cx - 30.0,
            y(q2),
            cx + 30.0,
            y(q2)
        );
        let _ = writeln!(out, "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\">{name}</text>", h - 10.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Solves every `(method, kappa)` on every case with the optional total
/// capacity and scores the plans on the case's test samples. With
/// `true_moments` the covariance-based methods use it instead of the
/// training estimate.
pub fn compare_methods(
    inst: &PlanningInstance,
    cases: &[SeedCase],
    methods: &[(Method, f64)],
    capacity: Option<u32>,
    true_moments: Option<&MomentTable>,
    opts: &SolveOptions,
) -> Result<EvaluationReport> {
    let mut report = EvaluationReport::default();
    for case in cases {
        for &(method, kappa) in methods {
            let mut problem = Problem::new(inst.clone(), case.train.clone(), method.spec(kappa))?;
            if let Some(cap) = capacity {
                problem = problem.with_capacity(cap);
            }
            if let (Some(m), RadiusMode::FullCovariance | RadiusMode::Diagonal) = (true_moments, method.mode()) {
                problem = problem.with_moments(m.clone());
            }
            let (plan, _) = solve(&problem, opts)?;
            report.rows.push(ReportRow {
                method,
                seed: case.seed,
                kappa: if method == Method::Eo { 0.0 } else { kappa },
                turbines: plan.turbines.clone(),
                risk_cost: risk_management_cost(inst, &plan, &case.test)?,
                smoothing_variance: mean_smoothing_variance(&plan.x(), &case.test)?,
                breakdown: plan.breakdown,
                n_train: case.train.samples(),
                n_test: case.test.samples(),
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub trials: usize,
    pub hits: usize,
    pub fraction: f64,
    /// Certificate and simulated true expectation per trial.
    pub certificates: Vec<f64>,
    pub truths: Vec<f64>,
}

/// Monte-Carlo settings of [`guarantee_coverage`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub trials: usize,
    /// Training samples per trial.
    pub n: usize,
    /// Samples used to estimate the true expectation.
    pub mc_samples: usize,
    pub seed: u64,
    /// Optional fixed total number of turbines.
    pub capacity: Option<u32>,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            n: 30,
            mc_samples: 100_000,
            seed: 0,
            capacity: None,
        }
    }
}

/// Repeats: draw `n` training samples, solve, and compare the certificate
/// `phi * radius + mean recourse` of every period with a Monte-Carlo
/// estimate of the true expected recourse at the same plan. A trial is a hit
/// when the certificate covers the truth in every period.
pub fn guarantee_coverage<F>(
    inst: &PlanningInstance,
    sampler: F,
    spec: &AmbiguitySpec,
    cfg: &CoverageConfig,
    opts: &SolveOptions,
) -> Result<CoverageReport>
where
    F: Fn(usize, u64) -> Result<SampleTensor>,
{
    let CoverageConfig {
        trials,
        n,
        mc_samples,
        seed,
        capacity,
    } = *cfg;
    if trials == 0 {
        return Err(Error::Invalid("coverage needs at least one trial".into()));
    }
    let mut hits = 0;
    let mut certificates = Vec::with_capacity(trials);
    let mut truths = Vec::with_capacity(trials);
    for trial in 0..trials {
        let tag = format!("coverage-{trial}");
        let train = sampler(n, substream(seed, &format!("{tag}-train")))?;
        let mut problem = Problem::new(inst.clone(), train, spec.clone())?;
        if let Some(cap) = capacity {
            problem = problem.with_capacity(cap);
        }
        let (plan, _) = solve(&problem, opts)?;
        let truth_samples = sampler(mc_samples, substream(seed, &format!("{tag}-truth")))?;
        let x = plan.x();
        let periods = inst.num_periods();
        let ones = vec![1.0; x.len()];
        let phi = crate::ambiguity::dual_bound_phi(&inst.generators, inst.costs.wc, inst.costs.ls)?;
        let (mut cert_total, mut truth_total) = (0.0, 0.0);
        let mut covered = true;
        for s in 0..inst.num_scenarios() {
            for t in 0..periods {
                let units = plan.schedule.units(inst, s, t);
                let forecast = plan.forecast.period(s, t);
                let kappa = spec.kappa_st(s * periods + t);
                let rho = period_radius(&x, &ones, problem.moments.as_ref(), s, t, kappa, spec.mode)?;
                let train_rec = empirical_recourse_expectation(
                    &x,
                    &problem.train.rows(s, t),
                    forecast,
                    &units,
                    inst.costs.wc,
                    inst.costs.ls,
                );
                let true_rec = empirical_recourse_expectation(
                    &x,
                    &truth_samples.rows(s, t),
                    forecast,
                    &units,
                    inst.costs.wc,
                    inst.costs.ls,
                );
                let cert = phi * rho + train_rec.mean;
                covered &= cert >= true_rec.mean;
                cert_total += cert;
                truth_total += true_rec.mean;
            }
        }
        hits += usize::from(covered);
        certificates.push(cert_total);
        truths.push(truth_total);
    }
    Ok(CoverageReport {
        trials,
        hits,
        fraction: hits as f64 / trials as f64,
        certificates,
        truths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_of_single_site() {
        let t = SampleTensor::new(1, 1, 2, 3, vec![1.0, 2.0, 3.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(smoothing_variance(&[1.0, 0.0], &t, 0, 0).unwrap(), 1.0);
        assert_eq!(smoothing_variance(&[0.0, 4.0], &t, 0, 0).unwrap(), 0.0);
        assert!(smoothing_variance(&[1.0], &t, 0, 0).is_err());
    }

    #[test]
    fn anti_correlated_sites_cancel() {
        let t = SampleTensor::new(1, 1, 2, 4, vec![1.0, 2.0, 0.5, 1.5, 2.0, 1.0, 2.5, 1.5]).unwrap();
        assert_eq!(smoothing_variance(&[1.0, 1.0], &t, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("ddro".parse::<Method>().unwrap(), Method::DdroC);
        assert!("foo".parse::<Method>().is_err());
    }

    #[test]
    fn boxplot_is_svg() {
        let svg = boxplot_svg(&[("a".into(), vec![1.0, 2.0, 3.0])], "t");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 1);
    }

    fn one_unit_system() -> PlanningInstance {
        let mut inst = crate::fixtures::one_generator().unwrap().instance;
        let g = &mut inst.generators[0];
        (g.ua, g.da, g.ur, g.dr) = (8.0, 5.0, 1.0, 1.0);
        inst
    }

    #[test]
    fn risk_cost_of_two_test_errors() {
        let inst = one_unit_system();
        let mut schedule = Schedule::zeros(1, 1, 1);
        schedule.up[0] = 10.0;
        schedule.down[0] = 10.0;
        let forecast = ForecastTable {
            scenarios: 1,
            periods: 1,
            sites: 1,
            values: vec![3.0],
        };
        let test = SampleTensor::new(1, 1, 1, 2, vec![7.0, 0.0]).unwrap();
        let cost = risk_management_cost_with(&inst, &[1.0], &schedule, &forecast, &test).unwrap();
        assert_eq!(cost, 20.0 + 22.0);
        let same = SampleTensor::new(1, 1, 1, 2, vec![3.0, 3.0]).unwrap();
        let idle = Schedule::zeros(1, 1, 1);
        assert_eq!(risk_management_cost_with(&inst, &[1.0], &idle, &forecast, &same).unwrap(), 0.0);
    }

    #[test]
    fn smoothing_scales_quadratically() {
        let t = SampleTensor::new(1, 1, 2, 4, vec![1.0, 2.0, 0.5, 1.7, 0.3, 1.1, 2.5, 0.9]).unwrap();
        let base = smoothing_variance(&[3.0, 1.0], &t, 0, 0).unwrap();
        assert_eq!(smoothing_variance(&[6.0, 2.0], &t, 0, 0).unwrap(), 4.0 * base);
        assert_eq!(smoothing_variance(&[1.5, 0.5], &t, 0, 0).unwrap(), 0.25 * base);
    }

    #[test]
    fn smoothing_matches_the_quadratic_form() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        // covariance [[0.04, 0.01], [0.01, 0.09]] via its Cholesky factor
        let (l11, l21) = (0.2, 0.05);
        let l22 = (0.09f64 - l21 * l21).sqrt();
        let n = 20_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut values = vec![0.0; 2 * n];
        for i in 0..n {
            let (z1, z2): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            values[i] = 3.0 + l11 * z1;
            values[n + i] = 3.0 + l21 * z1 + l22 * z2;
        }
        let t = SampleTensor::new(1, 1, 2, n, values).unwrap();
        let v = smoothing_variance(&[2.0, 1.0], &t, 0, 0).unwrap();
        let se = 0.29 * (2.0 / (n - 1) as f64).sqrt();
        assert!((v - 0.29).abs() <= 3.0 * se, "{v}");
    }

    fn cv_problem() -> (Problem, SampleTensor) {
        let fx = crate::fixtures::one_generator().unwrap();
        let train = fx.samples(30, 1).unwrap();
        let noisy = crate::sampling::MomentGrid::uniform(1, 1, &[1.2], &[0.81]);
        let validation = crate::sampling::sample_weibull_field(&noisy, 2000, 2).unwrap();
        let pb = Problem::new(fx.instance, train, AmbiguitySpec::new(RadiusMode::Diagonal, 0.0)).unwrap();
        (pb, validation)
    }

    #[test]
    fn single_zero_grid_returns_zero() {
        let (pb, validation) = cv_problem();
        let r = cross_validate_kappa(&pb, &validation, &[0.0], Metric::RiskCost, &SolveOptions::default()).unwrap();
        assert_eq!(r.best, 0.0);
        assert_eq!(r.scores.len(), 1);
        assert!(cross_validate_kappa(&pb, &validation, &[], Metric::RiskCost, &SolveOptions::default()).is_err());
        assert!(cross_validate_kappa(&pb, &validation, &[-1.0], Metric::RiskCost, &SolveOptions::default()).is_err());
    }

    #[test]
    fn robust_kappa_wins_on_noisy_validation() {
        let (pb, validation) = cv_problem();
        let opts = SolveOptions::default();
        let r = cross_validate_kappa(&pb, &validation, &[0.0, 0.5], Metric::RiskCost, &opts).unwrap();
        assert!(r.scores[1].1 < r.scores[0].1, "{:?}", r.scores);
        assert_eq!(r.best, 0.5);
        let flipped = cross_validate_kappa(&pb, &validation, &[0.5, 0.0], Metric::RiskCost, &opts).unwrap();
        assert_eq!(flipped, r);
    }

    fn cases(fx: &crate::fixtures::Fixture, seeds: u64) -> Vec<SeedCase> {
        (0..seeds)
            .map(|seed| SeedCase {
                seed,
                train: fx.samples(20, substream(seed, "train")).unwrap(),
                test: fx.samples(200, substream(seed, "test")).unwrap(),
            })
            .collect()
    }

    #[test]
    fn zero_capacity_plans_nothing() {
        let fx = crate::fixtures::heterogeneous_sites().unwrap();
        let methods: Vec<(Method, f64)> = Method::ALL.iter().map(|&m| (m, 1.0)).collect();
        let r = compare_methods(&fx.instance, &cases(&fx, 2), &methods, Some(0), None, &SolveOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 8);
        for row in &r.rows {
            assert!(row.turbines.iter().all(|&x| x == 0));
            assert_eq!(row.smoothing_variance, 0.0);
            assert!(row.risk_cost.abs() <= 1e-6, "{}", row.risk_cost);
        }
    }

    #[test]
    fn empirical_comparison_is_reproducible() {
        let fx = crate::fixtures::heterogeneous_sites().unwrap();
        let run = || {
            compare_methods(&fx.instance, &cases(&fx, 2), &[(Method::Eo, 0.0)], Some(40), None, &SolveOptions::default())
                .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(cases(&fx, 1)[0].train.samples() == 20);
    }

    #[test]
    fn equal_variances_make_ddrov_and_ndro_agree() {
        let fx = crate::fixtures::heterogeneous_sites().unwrap();
        let sigma = 0.3;
        let wind = crate::sampling::MomentGrid::uniform(1, 1, &[1.2; 5], &[sigma * sigma; 5]);
        let fx = crate::fixtures::Fixture { wind, ..fx };
        let known = MomentTable::known(
            1,
            1,
            nalgebra::DVector::from_element(5, 1.2),
            nalgebra::DMatrix::identity(5, 5) * (sigma * sigma),
        )
        .unwrap();
        let kappa = 2.0;
        let r = compare_methods(
            &fx.instance,
            &cases(&fx, 3),
            &[(Method::DdroV, kappa), (Method::Ndro, kappa * sigma)],
            Some(40),
            Some(&known),
            &SolveOptions::default(),
        )
        .unwrap();
        for pair in r.rows.chunks(2) {
            assert_eq!(pair[0].turbines, pair[1].turbines);
        }
    }

    #[test]
    fn risk_cost_survives_a_solution_round_trip() {
        let fx = crate::fixtures::one_generator().unwrap();
        let train = fx.samples(20, 3).unwrap();
        let test = fx.samples(500, 4).unwrap();
        let pb = Problem::new(fx.instance.clone(), train, AmbiguitySpec::new(RadiusMode::Diagonal, 0.1)).unwrap();
        let (plan, _) = solve(&pb, &SolveOptions::default()).unwrap();
        let back = PlanSolution::from_json(&plan.to_json().unwrap()).unwrap();
        assert_eq!(back, plan);
        assert_eq!(
            risk_management_cost(&fx.instance, &back, &test).unwrap(),
            risk_management_cost(&fx.instance, &plan, &test).unwrap()
        );
    }

}
