//! Sample moments, decision-dependent radii and the dual bound phi.
//!
//! The ambiguity set around the empirical distribution of the aggregate
//! error `sum_w a_w x_w xi_w` has radius `kappa * sqrt((a.x)' S (a.x))`,
//! where `S` is the sample covariance. Variants replace `S` by its diagonal
//! (`Diagonal`), by the identity (`NormOnly`, the decision-independent
//! benchmark) or drop the radius (`Empirical`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use windplan_conic::simplex::{solve_lp, LpStatus};
use windplan_conic::{ConicProgram, LinExpr, Sense};

use crate::error::{Error, Result};
use crate::instance::ThermalGenerator;
use crate::linalg::{mean_covariance, psd_cholesky, psd_clip};
use crate::sampling::SampleTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    FullCovariance,
    Diagonal,
    NormOnly,
    Empirical,
}

/// Multipliers broadcast over `(s, t)` or `(s, t, l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaTable {
    Scalar(f64),
    /// Indexed `s * T + t`.
    PerPeriod(Vec<f64>),
    /// Indexed `(s * T + t) * L + l`.
    PerLine(Vec<f64>),
}

impl KappaTable {
    fn values(&self) -> &[f64] {
        match self {
            KappaTable::Scalar(v) => std::slice::from_ref(v),
            KappaTable::PerPeriod(v) | KappaTable::PerLine(v) => v,
        }
    }

    fn at(&self, st: usize, l: usize, lines: usize) -> f64 {
        match self {
            KappaTable::Scalar(v) => *v,
            KappaTable::PerPeriod(v) => v[st],
            KappaTable::PerLine(v) => v[st * lines + l],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    pub mode: RadiusMode,
    /// Objective multipliers kappa_st.
    pub kappa: KappaTable,
    /// Line multipliers kappa_stl; `None` reuses `kappa`.
    pub line_kappa: Option<KappaTable>,
    /// Wasserstein order, carried as metadata.
    pub order: f64,
}

impl AmbiguitySpec {
    pub fn new(mode: RadiusMode, kappa: f64) -> Self {
        Self {
            mode,
            kappa: KappaTable::Scalar(kappa),
            line_kappa: None,
            order: 1.0,
        }
    }

    pub fn empirical() -> Self {
        Self::new(RadiusMode::Empirical, 0.0)
    }

    pub fn validate(&self, periods: usize, lines: usize) -> Result<()> {
        for table in std::iter::once(&self.kappa).chain(self.line_kappa.as_ref()) {
            if let Some(k) = table.values().iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
                return Err(Error::NegativeKappa(*k));
            }
            let want = match table {
                KappaTable::Scalar(_) => 1,
                KappaTable::PerPeriod(_) => periods,
                KappaTable::PerLine(_) => periods * lines,
            };
            if table.values().len() != want {
                return Err(Error::Dimension(format!(
                    "kappa table has {} entries, expected {want}",
                    table.values().len()
                )));
            }
        }
        if !(1.0..2.0).contains(&self.order) {
            return Err(Error::RadiusOrder(self.order));
        }
        Ok(())
    }

    /// Effective objective multiplier; zero in empirical mode.
    pub fn kappa_st(&self, st: usize) -> f64 {
        if self.mode == RadiusMode::Empirical {
            return 0.0;
        }
        match &self.kappa {
            KappaTable::PerLine(_) => 0.0,
            k => k.at(st, 0, 0),
        }
    }

    /// Effective line multiplier; zero in empirical mode.
    pub fn kappa_stl(&self, st: usize, l: usize, lines: usize) -> f64 {
        if self.mode == RadiusMode::Empirical {
            return 0.0;
        }
        self.line_kappa.as_ref().unwrap_or(&self.kappa).at(st, l, lines)
    }
}

/// Per-period mean vectors and PSD covariance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub scenarios: usize,
    pub periods: usize,
    pub mean: Vec<DVector<f64>>,
    pub covariance: Vec<DMatrix<f64>>,
}

impl MomentTable {
    pub fn from_samples(train: &SampleTensor) -> Result<Self> {
        let mut mean = Vec::new();
        let mut covariance = Vec::new();
        for s in 0..train.scenarios() {
            for t in 0..train.periods() {
                let (m, c) = sample_covariance(train, s, t)?;
                mean.push(m);
                covariance.push(psd_clip(&c)?);
            }
        }
        Ok(Self {
            scenarios: train.scenarios(),
            periods: train.periods(),
            mean,
            covariance,
        })
    }

    /// The same known covariance in every period.
    pub fn known(scenarios: usize, periods: usize, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let cov = psd_clip(&covariance)?;
        Ok(Self {
            scenarios,
            periods,
            mean: vec![mean; scenarios * periods],
            covariance: vec![cov; scenarios * periods],
        })
    }

    pub fn get(&self, s: usize, t: usize) -> &DMatrix<f64> {
        &self.covariance[s * self.periods + t]
    }
}

/// Mean vector and unbiased (divisor N-1) covariance of period `(s, t)`.
pub fn sample_covariance(train: &SampleTensor, s: usize, t: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    mean_covariance(&train.rows(s, t))
}

fn weighted(x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.len() {
        return Err(Error::Dimension(format!("x has {} entries, a has {}", x.len(), a.len())));
    }
    Ok(x.iter().zip(a).map(|(x, a)| a * x).collect())
}

/// `kappa * sqrt(v' S v)` with `v = a .* x` under the given mode.
pub fn radius(x: &[f64], a: &[f64], cov: &DMatrix<f64>, kappa: f64, mode: RadiusMode) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(Error::NegativeKappa(kappa));
    }
    let v = weighted(x, a)?;
    if mode != RadiusMode::NormOnly && cov.nrows() != v.len() {
        return Err(Error::Dimension(format!("covariance is {}x{}, x has {}", cov.nrows(), cov.ncols(), v.len())));
    }
    let q = match mode {
        RadiusMode::Empirical => return Ok(0.0),
        RadiusMode::NormOnly => return Ok(kappa * v.iter().map(|u| u * u).sum::<f64>().sqrt()),
        RadiusMode::Diagonal => (0..v.len()).map(|i| v[i] * cov[(i, i)] * v[i]).sum::<f64>(),
        RadiusMode::FullCovariance => {
            let mut q = 0.0;
            for i in 0..v.len() {
                for j in 0..v.len() {
                    q += v[i] * cov[(i, j)] * v[j];
                }
            }
            q
        }
    };
    Ok(kappa * q.max(0.0).sqrt())
}

/// [`radius`] for period `(s, t)`, taking the covariance from `moments`
/// when the mode needs one.
pub fn period_radius(
    x: &[f64],
    a: &[f64],
    moments: Option<&MomentTable>,
    s: usize,
    t: usize,
    kappa: f64,
    mode: RadiusMode,
) -> Result<f64> {
    match mode {
        RadiusMode::Empirical => Ok(0.0),
        RadiusMode::NormOnly => radius(x, a, &DMatrix::zeros(0, 0), kappa, mode),
        _ => {
            let m = moments.ok_or_else(|| Error::Invalid("covariance radius modes need moments".into()))?;
            radius(x, a, m.get(s, t), kappa, mode)
        }
    }
}

/// Upper-triangular `R` with `||R v|| = sqrt(v' S v)` under the mode:
/// the transposed PSD Cholesky factor, the diagonal standard deviations, the
/// identity, or an empty matrix in empirical mode.
pub fn radius_factor(cov: &DMatrix<f64>, mode: RadiusMode) -> DMatrix<f64> {
    let w = cov.nrows();
    match mode {
        RadiusMode::FullCovariance => psd_cholesky(cov).transpose(),
        RadiusMode::Diagonal => DMatrix::from_fn(w, w, |i, j| if i == j { cov[(i, i)].max(0.0).sqrt() } else { 0.0 }),
        RadiusMode::NormOnly => DMatrix::identity(w, w),
        RadiusMode::Empirical => DMatrix::zeros(0, w),
    }
}

/// Finite-sample radius `sqrt(3q/N) log(C1/beta) + (C2/(2-p))^(1/p) sqrt(q/N)`
/// with `q = (a.x)' S (a.x)`.
#[allow(clippy::too_many_arguments)]
pub fn theoretical_radius(
    x: &[f64],
    a: &[f64],
    cov: &DMatrix<f64>,
    n: usize,
    beta: f64,
    p: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::RadiusOrder(p));
    }
    if !(beta > 0.0 && beta < 1.0) || !(c1 > 0.0) || !(c2 > 0.0) || n == 0 {
        return Err(Error::Invalid("need 0 < beta < 1, C1, C2 > 0 and N >= 1".into()));
    }
    let q = radius(x, a, cov, 1.0, RadiusMode::FullCovariance)?.powi(2);
    let n = n as f64;
    Ok((3.0 * q / n).sqrt() * (c1 / beta).ln() + (c2 / (2.0 - p)).powf(1.0 / p) * (q / n).sqrt())
}

/// Largest `|gamma|` over the dual feasible region of the recourse problem,
/// computed by two linear programs (max gamma, max -gamma).
pub fn dual_bound_phi(generators: &[ThermalGenerator], wc: f64, ls: f64) -> Result<f64> {
    if !(wc >= 0.0 && ls >= 0.0) {
        return Err(Error::Invalid(format!("wc = {wc} and ls = {ls} must be nonnegative")));
    }
    let mut best: f64 = 0.0;
    for sign in [1.0, -1.0] {
        let mut p = ConicProgram::new();
        let gamma = p.add_free_var(-sign);
        for g in generators {
            let t1 = p.add_var(0.0, f64::INFINITY, 0.0);
            let t2 = p.add_var(0.0, f64::INFINITY, 0.0);
            let m1 = p.add_var(0.0, f64::INFINITY, 0.0);
            let m2 = p.add_var(0.0, f64::INFINITY, 0.0);
            p.add_row(LinExpr::var(t1).with(t2, 1.0).plus_constant(-1.0), Sense::Eq);
            p.add_row(
                LinExpr::var(gamma).with(t1, g.da).with(t2, -g.ua).with(m1, -1.0).with(m2, 1.0),
                Sense::Eq,
            );
        }
        p.add_row(LinExpr::var(gamma).plus_constant(wc), Sense::Ge);
        p.add_row(LinExpr::term(gamma, -1.0).plus_constant(ls), Sense::Ge);
        let sol = solve_lp(&p)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Solver(format!("dual region LP ended with {:?}", sol.status)));
        }
        // The optimum sits on a bound row; read its right-hand side exactly.
        let g = sign * sol.x[gamma.index()];
        let bound = if sign > 0.0 { ls } else { wc };
        best = best.max(if (g - bound).abs() <= 1e-9 * bound.max(1.0) { bound } else { g });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(ua: f64, da: f64) -> ThermalGenerator {
        ThermalGenerator {
            id: "g".into(),
            a: 0.0,
            b: 0.0,
            c: 0.0,
            p_min: 0.0,
            p_max: 1.0,
            ru: 1.0,
            rd: 1.0,
            ur: 0.0,
            dr: 0.0,
            ua,
            da,
        }
    }

    #[test]
    fn identity_covariance_radius() {
        let r = radius(&[1.0, 1.0], &[1.0, 1.0], &DMatrix::identity(2, 2), 1.0, RadiusMode::FullCovariance).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn correlated_radius() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let r = radius(&[2.0, 1.0], &[1.0, 1.0], &cov, 0.5, RadiusMode::FullCovariance).unwrap();
        assert!((r - 0.5 * 0.29f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_plan_has_zero_radius() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        for mode in [RadiusMode::FullCovariance, RadiusMode::Diagonal, RadiusMode::NormOnly, RadiusMode::Empirical] {
            assert_eq!(radius(&[0.0, 0.0], &[1.0, 1.0], &cov, 2.0, mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_kappa_is_rejected() {
        assert!(radius(&[1.0], &[1.0], &DMatrix::identity(1, 1), -1.0, RadiusMode::NormOnly).is_err());
    }

    #[test]
    fn theoretical_radius_cases() {
        let cov = DMatrix::identity(1, 1);
        assert_eq!(theoretical_radius(&[0.0], &[1.0], &cov, 10, 0.05, 1.0, 1.0, 1.0).unwrap(), 0.0);
        let a = theoretical_radius(&[2.0], &[1.0], &cov, 10, 0.05, 1.5, 3.0, 2.0).unwrap();
        let b = theoretical_radius(&[2.0], &[1.0], &cov, 40, 0.05, 1.5, 3.0, 2.0).unwrap();
        assert!((b - a / 2.0).abs() < 1e-14);
        // log(C1/beta) = 1 leaves sqrt(3q/N) as the first term.
        let beta = 0.1;
        let c1 = std::f64::consts::E * beta;
        let full = theoretical_radius(&[2.0], &[1.0], &cov, 10, beta, 1.0, c1, 1.0).unwrap();
        let second = (1.0f64 / 1.0).powf(1.0) * (4.0f64 / 10.0).sqrt();
        assert!((full - second - (12.0f64 / 10.0).sqrt()).abs() < 1e-14);
        assert!(theoretical_radius(&[2.0], &[1.0], &cov, 10, 0.05, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn phi_cases() {
        let gens = [gen(8.0, 5.0), gen(3.0, 4.0)];
        assert_eq!(dual_bound_phi(&gens, 100.0, 200.0).unwrap(), 200.0);
        assert_eq!(dual_bound_phi(&gens, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(dual_bound_phi(&gens, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn covariance_of_two_samples() {
        let t = SampleTensor::new(1, 1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (m, c) = sample_covariance(&t, 0, 0).unwrap();
        assert_eq!(m.as_slice(), &[0.5, 0.5]);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
    }

    #[test]
    fn factor_reproduces_quadratic_form() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let r = radius_factor(&cov, RadiusMode::FullCovariance);
        let v = DVector::from_vec(vec![2.0, 1.0]);
        assert!(((&r * &v).norm() - 0.29f64.sqrt()).abs() < 1e-14);
    }
}
