//! Wind-resource samples: containers, file formats, Weibull and Gaussian
//! copula synthesis, forecasts and train/test splits.
//!
//! Sample file: header `s,t,w,i,value`, one row per observation.
//! Forecast file: header `s,t,w,value`. Indices are 0-based.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Weibull};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{mean_covariance, psd_cholesky, psd_clip};

/// Derives an independent seed for a named purpose from a master seed.
pub fn substream(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Observations `xi[s][t][w][i]` stored flat at `((s*T + t)*W + w)*N + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTensor {
    scenarios: usize,
    periods: usize,
    sites: usize,
    samples: usize,
    values: Vec<f64>,
}

impl SampleTensor {
    pub fn new(scenarios: usize, periods: usize, sites: usize, samples: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != scenarios * periods * sites * samples {
            return Err(Error::Dimension(format!(
                "{} values for shape {scenarios}x{periods}x{sites}x{samples}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Invalid(format!("sample value {v} is not a finite nonnegative number")));
        }
        Ok(Self {
            scenarios,
            periods,
            sites,
            samples,
            values,
        })
    }

    /// Builds a tensor from a function of `(s, t, w, i)`.
    pub fn from_fn(
        scenarios: usize,
        periods: usize,
        sites: usize,
        samples: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(scenarios * periods * sites * samples);
        for s in 0..scenarios {
            for t in 0..periods {
                for w in 0..sites {
                    for i in 0..samples {
                        values.push(f(s, t, w, i));
                    }
                }
            }
        }
        Self::new(scenarios, periods, sites, samples, values)
    }

    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, s: usize, t: usize, w: usize) -> usize {
        ((s * self.periods + t) * self.sites + w) * self.samples
    }

    pub fn get(&self, s: usize, t: usize, w: usize, i: usize) -> f64 {
        self.values[self.offset(s, t, w) + i]
    }

    /// All samples of one site in one period.
    pub fn series(&self, s: usize, t: usize, w: usize) -> &[f64] {
        let o = self.offset(s, t, w);
        &self.values[o..o + self.samples]
    }

    /// Observation `i` of period `(s, t)` across sites.
    pub fn observation(&self, s: usize, t: usize, i: usize) -> Vec<f64> {
        (0..self.sites).map(|w| self.get(s, t, w, i)).collect()
    }

    /// All observations of period `(s, t)` as rows.
    pub fn rows(&self, s: usize, t: usize) -> Vec<Vec<f64>> {
        (0..self.samples).map(|i| self.observation(s, t, i)).collect()
    }

    pub fn check_shape(&self, scenarios: usize, periods: usize, sites: usize) -> Result<()> {
        if (self.scenarios, self.periods, self.sites) != (scenarios, periods, sites) {
            return Err(Error::Dimension(format!(
                "samples have shape {}x{}x{}, instance needs {scenarios}x{periods}x{sites}",
                self.scenarios, self.periods, self.sites
            )));
        }
        Ok(())
    }

    /// Keeps samples `keep[s][t]` (indices into `0..N`, same count for every period).
    fn select(&self, keep: &[Vec<usize>]) -> Result<SampleTensor> {
        let n = keep.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(self.scenarios * self.periods * self.sites * n);
        for s in 0..self.scenarios {
            for t in 0..self.periods {
                let idx = &keep[s * self.periods + t];
                for w in 0..self.sites {
                    let series = self.series(s, t, w);
                    values.extend(idx.iter().map(|&i| series[i]));
                }
            }
        }
        SampleTensor::new(self.scenarios, self.periods, self.sites, n, values)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["s", "t", "w", "i", "value"])?;
        for s in 0..self.scenarios {
            for t in 0..self.periods {
                for w in 0..self.sites {
                    for (i, v) in self.series(s, t, w).iter().enumerate() {
                        wr.write_record(&[s.to_string(), t.to_string(), w.to_string(), i.to_string(), v.to_string()])?;
                    }
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Rec {
            s: usize,
            t: usize,
            w: usize,
            i: usize,
            value: f64,
        }
        let mut recs = Vec::new();
        for r in csv::Reader::from_reader(input).deserialize() {
            let r: Rec = r?;
            recs.push(r);
        }
        let dim = |f: fn(&Rec) -> usize| recs.iter().map(f).max().map_or(0, |m| m + 1);
        let (ns, nt, nw, ni) = (dim(|r| r.s), dim(|r| r.t), dim(|r| r.w), dim(|r| r.i));
        let total = ns * nt * nw * ni;
        if recs.len() != total {
            return Err(Error::Invalid(format!(
                "sample file has {} rows, a complete {ns}x{nt}x{nw}x{ni} grid needs {total}",
                recs.len()
            )));
        }
        let mut values = vec![f64::NAN; total];
        for r in recs {
            values[((r.s * nt + r.t) * nw + r.w) * ni + r.i] = r.value;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Invalid("sample file has duplicate rows".into()));
        }
        SampleTensor::new(ns, nt, nw, ni, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Point forecasts `xi_bar[s][t][w]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTable {
    pub scenarios: usize,
    pub periods: usize,
    pub sites: usize,
    pub values: Vec<f64>,
}

impl ForecastTable {
    pub fn get(&self, s: usize, t: usize, w: usize) -> f64 {
        self.values[(s * self.periods + t) * self.sites + w]
    }

    pub fn period(&self, s: usize, t: usize) -> &[f64] {
        let o = (s * self.periods + t) * self.sites;
        &self.values[o..o + self.sites]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["s", "t", "w", "value"])?;
        for s in 0..self.scenarios {
            for t in 0..self.periods {
                for w in 0..self.sites {
                    wr.write_record(&[s.to_string(), t.to_string(), w.to_string(), self.get(s, t, w).to_string()])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut recs: Vec<(usize, usize, usize, f64)> = Vec::new();
        for r in csv::Reader::from_reader(input).deserialize() {
            recs.push(r?);
        }
        let ns = recs.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let nt = recs.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let nw = recs.iter().map(|r| r.2 + 1).max().unwrap_or(0);
        if recs.len() != ns * nt * nw {
            return Err(Error::Invalid("forecast file is not a complete grid".into()));
        }
        let mut values = vec![f64::NAN; ns * nt * nw];
        for (s, t, w, v) in recs {
            if !(v >= 0.0) {
                return Err(Error::Invalid(format!("forecast {v} must be nonnegative")));
            }
            values[(s * nt + t) * nw + w] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Invalid("forecast file has duplicate rows".into()));
        }
        Ok(Self {
            scenarios: ns,
            periods: nt,
            sites: nw,
            values,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Sample mean of every `(s, t, w)` series.
pub fn forecast_from_samples(train: &SampleTensor) -> ForecastTable {
    let mut values = Vec::with_capacity(train.scenarios * train.periods * train.sites);
    for s in 0..train.scenarios {
        for t in 0..train.periods {
            for w in 0..train.sites {
                let series = train.series(s, t, w);
                values.push(series.iter().sum::<f64>() / series.len().max(1) as f64);
            }
        }
    }
    ForecastTable {
        scenarios: train.scenarios,
        periods: train.periods,
        sites: train.sites,
        values,
    }
}

/// Splits every period's samples into disjoint train and test sets. The same
/// permutation is applied to all sites of a period so joint observations stay
/// together.
pub fn split_samples(tensor: &SampleTensor, train_fraction: f64, seed: u64) -> Result<(SampleTensor, SampleTensor)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Invalid(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let n = tensor.samples;
    let n_train = ((train_fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    if n_train < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n_train });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for _ in 0..tensor.scenarios * tensor.periods {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (a, b) = perm.split_at(n_train);
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        a.sort_unstable();
        b.sort_unstable();
        train_idx.push(a);
        test_idx.push(b);
    }
    Ok((tensor.select(&train_idx)?, tensor.select(&test_idx)?))
}

/// Two-parameter Weibull distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
}

impl WeibullParams {
    pub fn mean(&self) -> f64 {
        self.scale * ln_gamma(1.0 + 1.0 / self.shape).exp()
    }

    pub fn variance(&self) -> f64 {
        let g1 = ln_gamma(1.0 + 1.0 / self.shape);
        let g2 = ln_gamma(1.0 + 2.0 / self.shape);
        self.scale * self.scale * (2.0 * g1).exp() * (g2 - 2.0 * g1).exp_m1()
    }
}

const SHAPE_BRACKET: (f64, f64) = (0.05, 1000.0);

/// Squared coefficient of variation of a Weibull law with shape `k`.
fn cv2(k: f64) -> f64 {
    (ln_gamma(1.0 + 2.0 / k) - 2.0 * ln_gamma(1.0 + 1.0 / k)).exp_m1()
}

/// Shape and scale matching a mean and variance. The shape solves
/// `Gamma(1+2/k) / Gamma(1+1/k)^2 - 1 = variance / mean^2` by bisection in
/// `ln k` over `[0.05, 1000]`.
pub fn weibull_params_from_moments(mean: f64, variance: f64) -> Result<WeibullParams> {
    if !(mean > 0.0 && variance > 0.0) || !mean.is_finite() || !variance.is_finite() {
        return Err(Error::BadMoments { mean, variance });
    }
    let target = variance / (mean * mean);
    let (lo_k, hi_k) = SHAPE_BRACKET;
    let (cv_hi, cv_lo) = (cv2(lo_k), cv2(hi_k));
    if !(target <= cv_hi && target >= cv_lo) {
        return Err(Error::WeibullRange {
            cv: target.sqrt(),
            lo: cv_lo.sqrt(),
            hi: cv_hi.sqrt(),
        });
    }
    // cv2 is decreasing in k.
    let f = |u: f64| cv2(u.exp()).ln() - target.ln();
    let (mut a, mut b) = (lo_k.ln(), hi_k.ln());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * (1.0 + m.abs()) {
            break;
        }
    }
    let shape = (0.5 * (a + b)).exp();
    let scale = mean / ln_gamma(1.0 + 1.0 / shape).exp();
    Ok(WeibullParams { shape, scale })
}

/// Mean and variance for every `(s, t, w)`, laid out like [`ForecastTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentGrid {
    pub scenarios: usize,
    pub periods: usize,
    pub sites: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl MomentGrid {
    /// Same moments in every period.
    pub fn uniform(scenarios: usize, periods: usize, mean: &[f64], variance: &[f64]) -> Self {
        let reps = scenarios * periods;
        Self {
            scenarios,
            periods,
            sites: mean.len(),
            mean: mean.repeat(reps),
            variance: variance.repeat(reps),
        }
    }

    fn index(&self, s: usize, t: usize, w: usize) -> usize {
        (s * self.periods + t) * self.sites + w
    }

    pub fn forecast(&self) -> ForecastTable {
        ForecastTable {
            scenarios: self.scenarios,
            periods: self.periods,
            sites: self.sites,
            values: self.mean.clone(),
        }
    }
}

/// Independent Weibull draws matching each cell's mean and variance.
pub fn sample_weibull_field(grid: &MomentGrid, n: usize, seed: u64) -> Result<SampleTensor> {
    if n < 1 {
        return Err(Error::TooFewSamples { need: 1, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(grid.mean.len() * n);
    for s in 0..grid.scenarios {
        for t in 0..grid.periods {
            for w in 0..grid.sites {
                let k = grid.index(s, t, w);
                let p = weibull_params_from_moments(grid.mean[k], grid.variance[k])?;
                let dist = Weibull::new(p.scale, p.shape)
                    .map_err(|e| Error::Invalid(format!("weibull parameters: {e}")))?;
                values.extend((0..n).map(|_| dist.sample(&mut rng)));
            }
        }
    }
    SampleTensor::new(grid.scenarios, grid.periods, grid.sites, n, values)
}

/// Piecewise-linear interpolation with constant extrapolation; `xp` must be
/// non-decreasing. Among repeated `xp` values the last one wins.
fn interp(x: f64, xp: &[f64], fp: &[f64]) -> f64 {
    let n = xp.len();
    if x <= xp[0] {
        return fp[0];
    }
    if x >= xp[n - 1] {
        return fp[n - 1];
    }
    let j = xp.partition_point(|v| *v <= x) - 1;
    let (x0, x1) = (xp[j], xp[j + 1]);
    if x1 == x0 {
        return fp[j];
    }
    fp[j] + (x - x0) / (x1 - x0) * (fp[j + 1] - fp[j])
}

/// Empirical quantile function of one site on a uniform probability grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    /// Quantile values at probabilities `k / (len - 1)`.
    pub knots: Vec<f64>,
}

impl QuantileMap {
    pub fn fit(data: &[f64], n_knots: usize) -> Self {
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let knots = (0..n_knots)
            .map(|k| {
                let h = (n - 1) as f64 * k as f64 / (n_knots - 1) as f64;
                let lo = h.floor() as usize;
                let hi = (lo + 1).min(n - 1);
                sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
            })
            .collect();
        Self { knots }
    }

    fn references(&self) -> Vec<f64> {
        let m = self.knots.len();
        (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
    }

    /// Empirical CDF value in `[0, 1]`, averaging the left- and right-continuous
    /// interpolants so repeated quantiles map to the middle of their range.
    pub fn forward(&self, x: f64) -> f64 {
        let refs = self.references();
        let up = interp(x, &self.knots, &refs);
        let neg_knots: Vec<f64> = self.knots.iter().rev().map(|v| -v).collect();
        let neg_refs: Vec<f64> = refs.iter().rev().map(|v| -v).collect();
        let down = -interp(-x, &neg_knots, &neg_refs);
        0.5 * (up + down)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        interp(u, &self.references(), &self.knots)
    }
}

/// Gaussian copula with empirical marginals and moment targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub marginals: Vec<QuantileMap>,
    /// Correlation of the Gaussianised data, row-major `W x W`.
    pub correlation: Vec<f64>,
    pub target_mean: Vec<f64>,
    /// Raw-data covariance, row-major `W x W`.
    pub target_covariance: Vec<f64>,
}

impl CopulaModel {
    pub fn sites(&self) -> usize {
        self.marginals.len()
    }

    pub fn correlation_matrix(&self) -> DMatrix<f64> {
        let w = self.sites();
        DMatrix::from_row_slice(w, w, &self.correlation)
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let w = self.sites();
        DMatrix::from_row_slice(w, w, &self.target_covariance)
    }
}

pub const DEFAULT_KNOTS: usize = 1000;
pub const DEFAULT_COPULA_ITERATIONS: usize = 5;
const U_CLIP: f64 = 1e-7;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Fits marginal quantile maps, the correlation of the Gaussianised data and
/// the raw mean/covariance targets. `columns[w]` holds all samples of site `w`.
pub fn fit_copula_generator(columns: &[Vec<f64>]) -> Result<CopulaModel> {
    fit_copula_generator_with(columns, DEFAULT_KNOTS)
}

pub fn fit_copula_generator_with(columns: &[Vec<f64>], n_knots: usize) -> Result<CopulaModel> {
    let w = columns.len();
    if w == 0 {
        return Err(Error::Invalid("no sites to fit".into()));
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("all sites need the same number of samples".into()));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    if n_knots < 2 {
        return Err(Error::Invalid("need at least two quantile knots".into()));
    }
    let columns: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            if lo < hi {
                c.clone()
            } else {
                c.iter()
                    .enumerate()
                    .map(|(i, v)| v + 1e-9 * (1.0 + v.abs()) * (2.0 * i as f64 / (n - 1) as f64 - 1.0))
                    .collect()
            }
        })
        .collect();
    let marginals: Vec<QuantileMap> = columns.iter().map(|c| QuantileMap::fit(c, n_knots)).collect();
    let normal = std_normal();
    let gauss: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..w)
                .map(|k| normal.inverse_cdf(marginals[k].forward(columns[k][i]).clamp(U_CLIP, 1.0 - U_CLIP)))
                .collect()
        })
        .collect();
    let (_, gcov) = mean_covariance(&gauss)?;
    let sd: Vec<f64> = (0..w).map(|k| gcov[(k, k)].sqrt()).collect();
    let corr = DMatrix::from_fn(w, w, |a, b| {
        if a == b {
            1.0
        } else {
            gcov[(a, b)] / (sd[a] * sd[b])
        }
    });
    let corr = psd_clip(&corr)?;
    let d: Vec<f64> = (0..w).map(|k| corr[(k, k)].sqrt()).collect();
    let corr = DMatrix::from_fn(w, w, |a, b| if a == b { 1.0 } else { corr[(a, b)] / (d[a] * d[b]) });

    let raw: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let (mean, cov) = mean_covariance(&raw)?;
    Ok(CopulaModel {
        marginals,
        correlation: corr.transpose().as_slice().to_vec(),
        target_mean: mean.as_slice().to_vec(),
        target_covariance: cov.transpose().as_slice().to_vec(),
    })
}

/// Draws `n` joint samples: Gaussian copula draw, marginal inverse
/// transform, then `iterations` rounds of truncation at zero followed by an
/// affine map onto the target mean and covariance, and a final truncation.
/// Returns rows of `W` values.
pub fn generate_copula_samples(model: &CopulaModel, n: usize, iterations: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(generate_copula_trace(model, n, iterations, seed)?.0)
}

/// Like [`generate_copula_samples`] and also reports, after every iteration,
/// the Frobenius distance between the covariance of the truncated samples and
/// the target.
pub fn generate_copula_trace(model: &CopulaModel, n: usize, iterations: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    if iterations < 1 {
        return Err(Error::Invalid("need at least one adjustment iteration".into()));
    }
    let w = model.sites();
    let normal = std_normal();
    let lcorr = psd_cholesky(&model.correlation_matrix());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let g = DVector::from_fn(w, |_, _| rng.sample::<f64, _>(StandardNormal));
            let z = &lcorr * g;
            (0..w).map(|k| model.marginals[k].inverse(normal.cdf(z[k]))).collect()
        })
        .collect();

    let target_cov = model.covariance_matrix();
    let target_mean = DVector::from_column_slice(&model.target_mean);
    let ltgt = psd_cholesky(&psd_clip(&target_cov)?);
    let truncate = |rows: &mut Vec<Vec<f64>>| rows.iter_mut().flatten().for_each(|v| *v = v.max(0.0));
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        truncate(&mut rows);
        let (m, c) = mean_covariance(&rows)?;
        let lcur = match c.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                let ridge = 1e-10 * c.trace() / w as f64;
                let cr = &c + DMatrix::identity(w, w) * ridge.max(f64::MIN_POSITIVE);
                cr.cholesky()
                    .map(|ch| ch.l())
                    .ok_or(Error::NotPsd { eigenvalue: c.symmetric_eigenvalues().min() })?
            }
        };
        let map = &ltgt * lcur
            .solve_lower_triangular(&DMatrix::identity(w, w))
            .ok_or_else(|| Error::Invalid("singular whitening factor".into()))?;
        for r in rows.iter_mut() {
            let y = &target_mean + &map * (DVector::from_column_slice(r) - &m);
            r.copy_from_slice(y.as_slice());
        }
        let mut probe = rows.clone();
        truncate(&mut probe);
        let (_, pc) = mean_covariance(&probe)?;
        trace.push((pc - &target_cov).norm());
    }
    truncate(&mut rows);
    Ok((rows, trace))
}

/// A wide table of historical observations: one named column per site, one
/// row per time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteHistory {
    pub names: Vec<String>,
    /// `columns[w][i]`.
    pub columns: Vec<Vec<f64>>,
}

impl SiteHistory {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let names: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for rec in rd.records() {
            let rec = rec?;
            for (col, field) in columns.iter_mut().zip(rec.iter()) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("not a number: {field:?}")))?;
                if !(v >= 0.0) {
                    return Err(Error::Invalid(format!("wind output must be nonnegative, got {v}")));
                }
                col.push(v);
            }
        }
        Ok(Self { names, columns })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(&self.names)?;
        for i in 0..self.rows() {
            wr.write_record(self.columns.iter().map(|c| format!("{:.6}", c[i])))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Wraps joint rows as a single-scenario, single-period tensor.
pub fn rows_to_tensor(rows: &[Vec<f64>]) -> Result<SampleTensor> {
    let n = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    SampleTensor::from_fn(1, 1, w, n, |_, _, k, i| rows[i][k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_special_cases() {
        let p = weibull_params_from_moments(1.0, 1.0).unwrap();
        assert!((p.shape - 1.0).abs() < 1e-9 && (p.scale - 1.0).abs() < 1e-9);
        let p = weibull_params_from_moments(2.0, 4.0).unwrap();
        assert!((p.shape - 1.0).abs() < 1e-9 && (p.scale - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_is_rejected() {
        assert!(matches!(weibull_params_from_moments(1.0, 0.0), Err(Error::BadMoments { .. })));
    }

    #[test]
    fn forecast_is_the_mean() {
        let t = SampleTensor::new(1, 1, 1, 2, vec![0.0, 2.0]).unwrap();
        assert_eq!(forecast_from_samples(&t).values, vec![1.0]);
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let t = SampleTensor::from_fn(1, 1, 2, 10, |_, _, w, i| (i * 10 + w) as f64).unwrap();
        let (a, b) = split_samples(&t, 0.6, 7).unwrap();
        assert_eq!((a.samples(), b.samples()), (6, 4));
        let mut all: Vec<f64> = a.series(0, 0, 0).iter().chain(b.series(0, 0, 0)).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| (i * 10) as f64).collect::<Vec<_>>());
        // Joint observations stay aligned across sites.
        for i in 0..6 {
            assert_eq!(a.get(0, 0, 1, i), a.get(0, 0, 0, i) + 1.0);
        }
        let (c, _) = split_samples(&t, 0.6, 7).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn csv_round_trip() {
        let t = SampleTensor::from_fn(2, 2, 2, 3, |s, tt, w, i| (s + tt + w) as f64 + i as f64 * 0.125).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(SampleTensor::read_csv(buf.as_slice()).unwrap(), t);
        let f = forecast_from_samples(&t);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(ForecastTable::read_csv(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn negative_samples_are_rejected() {
        assert!(SampleTensor::new(1, 1, 1, 1, vec![-0.5]).is_err());
    }

    #[test]
    fn quantile_map_round_trip() {
        let data: Vec<f64> = (0..101).map(|i| (i as f64 / 10.0).powi(2)).collect();
        let q = QuantileMap::fit(&data, 101);
        for &x in &[0.0, 4.0, 50.0, 100.0] {
            assert!((q.inverse(q.forward(x)) - x).abs() < 1e-9);
        }
    }

    #[test]
    fn comonotone_pair_has_unit_correlation() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let m = fit_copula_generator(&[x, y]).unwrap();
        assert!((m.correlation[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_column_is_jittered() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let m = fit_copula_generator(&[x, vec![3.0; 50]]).unwrap();
        assert!(m.correlation.iter().all(|v| v.is_finite()));
    }

    /// Mean and variance of a Weibull law by composite Simpson integration.
    fn integrated_moments(p: WeibullParams) -> (f64, f64) {
        let (k, l) = (p.shape, p.scale);
        let pdf = |x: f64| if x <= 0.0 { 0.0 } else { k / l * (x / l).powf(k - 1.0) * (-(x / l).powf(k)).exp() };
        let (hi, m) = (8.0 * l, 20_000);
        let h = hi / m as f64;
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let mut acc = f(0.0) + f(hi);
            for j in 1..m {
                acc += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
            }
            acc * h / 3.0
        };
        let mean = simpson(&|x| x * pdf(x));
        let second = simpson(&|x| x * x * pdf(x));
        (mean, second - mean * mean)
    }

    #[test]
    fn quarter_cv_shape_matches_integrated_moments() {
        let p = weibull_params_from_moments(1.2, 0.09).unwrap();
        assert!((p.shape - 4.54).abs() < 0.01, "{}", p.shape);
        let (m, v) = integrated_moments(p);
        assert!((m - 1.2).abs() < 1e-8 && (v - 0.09).abs() < 1e-8, "{m} {v}");
        assert!((p.mean() - 1.2).abs() < 1e-12 && (p.variance() - 0.09).abs() < 1e-12);
    }

    #[test]
    fn weibull_draws_obey_the_law_of_large_numbers() {
        let grid = MomentGrid::uniform(1, 1, &[1.2], &[0.09]);
        let t = sample_weibull_field(&grid, 10_000, 8).unwrap();
        let x = t.series(0, 0, 0);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (x.len() - 1) as f64;
        assert!((mean - 1.2).abs() < 0.02 && (var - 0.09).abs() < 0.01, "{mean} {var}");
        assert_eq!(sample_weibull_field(&grid, 10_000, 8).unwrap(), t);
        assert!(sample_weibull_field(&MomentGrid::uniform(1, 1, &[1.2], &[0.0]), 5, 1).is_err());
    }

    #[test]
    fn independent_uniform_columns_fit_identity_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 4000;
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        let m = fit_copula_generator(&cols).unwrap();
        let se = 1.0 / (n as f64).sqrt();
        let c = m.correlation_matrix();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert!(c[(a, b)].abs() < 3.0 * se, "{}", c[(a, b)]);
                }
            }
        }
    }

    #[test]
    fn one_iteration_hits_the_target_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 3000;
        // symmetric positive marginals around 2 and 3
        let cols: Vec<Vec<f64>> = [2.0, 3.0]
            .iter()
            .map(|c| (0..n).map(|_| c + rng.random_range(-1.0..1.0)).collect())
            .collect();
        let model = fit_copula_generator(&cols).unwrap();
        let rows = generate_copula_samples(&model, n, 1, 3).unwrap();
        for (w, target) in model.target_mean.iter().enumerate() {
            let x: Vec<f64> = rows.iter().map(|r| r[w]).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
            assert!((mean - target).abs() <= 3.0 * sd / (n as f64).sqrt());
        }
        assert_eq!(generate_copula_samples(&model, n, 1, 3).unwrap(), rows);
        assert!(rows.iter().flatten().all(|v| *v >= 0.0));
    }

    #[test]
    fn forecast_of_constant_and_two_point_samples() {
        let c = SampleTensor::new(1, 1, 1, 3, vec![0.7; 3]).unwrap();
        assert!((forecast_from_samples(&c).values[0] - 0.7).abs() <= 1e-15);
        let two = SampleTensor::new(1, 1, 1, 2, vec![0.0, 2.0]).unwrap();
        assert_eq!(forecast_from_samples(&two).values, vec![1.0]);
    }

}
