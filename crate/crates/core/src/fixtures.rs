//! Test systems used by the examples, the experiments and the test suites.
//!
//! The 14-bus system takes its topology, reactances, loads and quadratic
//! costs from the standard IEEE 14-bus case; reserve and adjustment prices,
//! ramp limits, line ratings and wind sites are our own choices and are
//! listed in `docs/fixtures.md`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ambiguity::MomentTable;
use crate::error::Result;
use crate::instance::{
    compute_ptdf, Branch, CostParameters, PlanningInstance, ScenarioGrid, ThermalGenerator, TransmissionLine,
    WindSite,
};
use crate::sampling::{sample_weibull_field, substream, weibull_params_from_moments, MomentGrid, SampleTensor, SiteHistory};

/// Cost settings shared by every fixture.
pub const COSTS: CostParameters = CostParameters {
    wc: 100.0,
    ls: 200.0,
    eps_risk: 0.1,
};

/// Correlation of the four-site dataset.
pub const SITE_CORRELATION: [[f64; 4]; 4] = [
    [1.0, 0.3125, 0.2991, 0.4763],
    [0.3125, 1.0, 0.2688, 0.3865],
    [0.2991, 0.2688, 1.0, 0.4822],
    [0.4763, 0.3865, 0.4822, 1.0],
];

/// Network layout from which an instance is built: buses hosting the
/// generators, wind sites and loads, plus per-line ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub buses: usize,
    pub slack: usize,
    pub branches: Vec<Branch>,
    pub ratings: Vec<f64>,
    pub generator_buses: Vec<usize>,
    pub wind_buses: Vec<usize>,
    pub load_buses: Vec<usize>,
}

impl NetworkLayout {
    /// Assembles an instance with shift factors computed from the layout.
    pub fn build(
        &self,
        generators: Vec<ThermalGenerator>,
        wind_sites: Vec<WindSite>,
        scenarios: ScenarioGrid,
        costs: CostParameters,
    ) -> Result<PlanningInstance> {
        let ptdf = compute_ptdf(self.buses, &self.branches, self.slack)?;
        let pick = |row: &Vec<f64>, buses: &[usize]| buses.iter().map(|&b| row[b]).collect::<Vec<f64>>();
        let lines = ptdf
            .iter()
            .zip(&self.ratings)
            .enumerate()
            .map(|(l, (row, &capacity))| TransmissionLine {
                id: format!("{}-{}", self.branches[l].from + 1, self.branches[l].to + 1),
                capacity,
                ptdf_gen: pick(row, &self.generator_buses),
                ptdf_wind: pick(row, &self.wind_buses),
                ptdf_load: pick(row, &self.load_buses),
            })
            .collect();
        let inst = PlanningInstance {
            generators,
            lines,
            wind_sites,
            scenarios,
            costs,
        };
        inst.check()?;
        Ok(inst)
    }
}

#[allow(clippy::too_many_arguments)]
fn generator(id: &str, a: f64, b: f64, p_min: f64, p_max: f64, reserve_price: f64, ua: f64, da: f64) -> ThermalGenerator {
    ThermalGenerator {
        id: id.into(),
        a,
        b,
        c: 0.0,
        p_min,
        p_max,
        ru: 0.5 * p_max,
        rd: 0.5 * p_max,
        ur: reserve_price,
        dr: reserve_price,
        ua,
        da,
    }
}

const IEEE14_BRANCHES: [(usize, usize, f64); 20] = [
    (1, 2, 0.05917),
    (1, 5, 0.22304),
    (2, 3, 0.19797),
    (2, 4, 0.17632),
    (2, 5, 0.17388),
    (3, 4, 0.17103),
    (4, 5, 0.04211),
    (4, 7, 0.20912),
    (4, 9, 0.55618),
    (5, 6, 0.25202),
    (6, 11, 0.19890),
    (6, 12, 0.25581),
    (6, 13, 0.13027),
    (7, 8, 0.17615),
    (7, 9, 0.11001),
    (9, 10, 0.08450),
    (9, 14, 0.27038),
    (10, 11, 0.19207),
    (12, 13, 0.19988),
    (13, 14, 0.34802),
];

const IEEE14_LOADS: [(usize, f64); 11] = [
    (2, 21.7),
    (3, 94.2),
    (4, 47.8),
    (5, 7.6),
    (6, 11.2),
    (9, 29.5),
    (10, 9.0),
    (11, 3.5),
    (12, 6.1),
    (13, 13.5),
    (14, 14.9),
];

/// Ratings of the 14-bus lines: loose everywhere except the two feeders
/// out of the slack bus.
const IEEE14_RATINGS: [f64; 20] = [
    160.0, 70.0, 120.0, 120.0, 120.0, 120.0, 150.0, 120.0, 120.0, 120.0, 120.0, 120.0, 120.0, 120.0, 120.0, 120.0,
    120.0, 120.0, 120.0, 120.0,
];

/// Load multipliers of the periods used by [`ieee14`].
pub const IEEE14_PROFILE: [f64; 4] = [0.85, 1.0, 1.1, 0.95];

/// Per-turbine output moments of the three 14-bus wind sites.
pub const IEEE14_WIND_MEAN: [f64; 3] = [1.2, 1.0, 1.4];
pub const IEEE14_WIND_VARIANCE: [f64; 3] = [0.09, 0.06, 0.12];

pub fn ieee14_layout() -> NetworkLayout {
    NetworkLayout {
        buses: 14,
        slack: 0,
        branches: IEEE14_BRANCHES
            .iter()
            .map(|&(f, t, x)| Branch {
                from: f - 1,
                to: t - 1,
                susceptance: 1.0 / x,
            })
            .collect(),
        ratings: IEEE14_RATINGS.to_vec(),
        generator_buses: vec![0, 1, 2, 5, 7],
        wind_buses: vec![3, 8, 12],
        load_buses: IEEE14_LOADS.iter().map(|&(b, _)| b - 1).collect(),
    }
}

/// The 14-bus planning instance over `periods` hours (at most four), one
/// scenario, three candidate wind sites of up to 30 turbines.
pub fn ieee14(periods: usize) -> Result<PlanningInstance> {
    let periods = periods.clamp(1, IEEE14_PROFILE.len());
    let generators = vec![
        generator("g1", 0.0430293, 20.0, 20.0, 332.4, 4.0, 12.0, 10.0),
        generator("g2", 0.25, 20.0, 0.0, 140.0, 5.0, 14.0, 11.0),
        generator("g3", 0.01, 40.0, 0.0, 100.0, 6.0, 16.0, 12.0),
        generator("g6", 0.01, 40.0, 0.0, 100.0, 6.0, 17.0, 13.0),
        generator("g8", 0.01, 40.0, 0.0, 100.0, 7.0, 18.0, 14.0),
    ];
    let wind_sites = ["w4", "w9", "w13"]
        .iter()
        .map(|id| WindSite {
            id: (*id).into(),
            cost: 150.0,
            max_turbines: 30,
        })
        .collect();
    let loads = vec![IEEE14_PROFILE[..periods]
        .iter()
        .map(|f| IEEE14_LOADS.iter().map(|&(_, d)| f * d).collect())
        .collect()];
    let scenarios = ScenarioGrid {
        count: 1,
        periods,
        duration: vec![1.0],
        loads,
    };
    ieee14_layout().build(generators, wind_sites, scenarios, COSTS)
}

/// Moments of the 14-bus wind sites, identical across periods.
pub fn ieee14_wind(periods: usize) -> MomentGrid {
    MomentGrid::uniform(1, periods.clamp(1, IEEE14_PROFILE.len()), &IEEE14_WIND_MEAN, &IEEE14_WIND_VARIANCE)
}

/// The 14-bus instance over four periods with its wind moments.
pub fn ieee14_fixture() -> Result<Fixture> {
    Ok(Fixture {
        instance: ieee14(IEEE14_PROFILE.len())?,
        wind: ieee14_wind(IEEE14_PROFILE.len()),
    })
}

/// An instance together with the distribution its samples come from.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub instance: PlanningInstance,
    pub wind: MomentGrid,
}

impl Fixture {
    pub fn samples(&self, n: usize, seed: u64) -> Result<SampleTensor> {
        sample_weibull_field(&self.wind, n, seed)
    }
}

/// Random system of the 14-bus scale: at most 14 buses and 20 lines, 2 to 5
/// generators, 1 to 3 wind sites with at most 8 turbines each.
pub fn random_fixture(seed: u64) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, "fixture"));
    let buses = rng.random_range(4..=14usize);
    let mut branches = Vec::new();
    for b in 1..buses {
        let to = rng.random_range(0..b);
        branches.push(Branch {
            from: to,
            to: b,
            susceptance: 1.0 / rng.random_range(0.05..0.3),
        });
    }
    let extra = rng.random_range(0..=(20 - branches.len()).min(buses));
    for _ in 0..extra {
        let a = rng.random_range(0..buses);
        let b = rng.random_range(0..buses);
        if a != b {
            branches.push(Branch {
                from: a.min(b),
                to: a.max(b),
                susceptance: 1.0 / rng.random_range(0.05..0.3),
            });
        }
    }
    let ng = rng.random_range(2..=5usize);
    let nw = rng.random_range(1..=3usize);
    let periods = 2;
    let generators: Vec<ThermalGenerator> = (0..ng)
        .map(|g| {
            let p_max = rng.random_range(40.0..120.0);
            let ua = rng.random_range(10.0..20.0);
            let da = rng.random_range(8.0..18.0);
            generator(
                &format!("g{}", g + 1),
                rng.random_range(0.005..0.05),
                rng.random_range(15.0..40.0),
                0.0,
                p_max,
                rng.random_range(2.0..8.0),
                ua,
                da,
            )
        })
        .collect();
    let capacity: f64 = generators.iter().map(|g| g.p_max).sum();
    let load_buses: Vec<usize> = (0..buses).filter(|_| rng.random_bool(0.6)).collect();
    let load_buses = if load_buses.is_empty() { vec![buses - 1] } else { load_buses };
    let base: Vec<f64> = load_buses.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let scale = 0.5 * capacity / base.iter().sum::<f64>();
    let loads = vec![(0..periods)
        .map(|t| base.iter().map(|d| d * scale * (0.9 + 0.15 * t as f64)).collect())
        .collect()];
    let wind_sites: Vec<WindSite> = (0..nw)
        .map(|w| WindSite {
            id: format!("w{}", w + 1),
            cost: rng.random_range(20.0..60.0),
            max_turbines: rng.random_range(3..=8),
        })
        .collect();
    let mean: Vec<f64> = (0..nw).map(|_| rng.random_range(0.96..1.44)).collect();
    let variance: Vec<f64> = (0..nw).map(|_| rng.random_range(0.0576..0.1210)).collect();
    let ratings: Vec<f64> = branches.iter().map(|_| rng.random_range(0.3..1.0) * capacity).collect();
    let layout = NetworkLayout {
        buses,
        slack: 0,
        ratings,
        generator_buses: (0..ng).map(|_| rng.random_range(0..buses)).collect(),
        wind_buses: (0..nw).map(|_| rng.random_range(0..buses)).collect(),
        load_buses,
        branches,
    };
    let scenarios = ScenarioGrid {
        count: 1,
        periods,
        duration: vec![1.0],
        loads,
    };
    let instance = layout.build(generators, wind_sites, scenarios, COSTS)?;
    Ok(Fixture {
        instance,
        wind: MomentGrid::uniform(1, periods, &mean, &variance),
    })
}

/// Copper-plate system: one bus, one loose line, the given generators.
fn single_bus(
    generators: Vec<ThermalGenerator>,
    wind_sites: Vec<WindSite>,
    loads: Vec<Vec<Vec<f64>>>,
    duration: Vec<f64>,
) -> Result<PlanningInstance> {
    let ng = generators.len();
    let nw = wind_sites.len();
    let nd = loads[0][0].len();
    let scenarios = ScenarioGrid {
        count: loads.len(),
        periods: loads[0].len(),
        duration,
        loads,
    };
    let inst = PlanningInstance {
        generators,
        lines: vec![TransmissionLine {
            id: "tie".into(),
            capacity: 1e4,
            ptdf_gen: vec![0.0; ng],
            ptdf_wind: vec![0.0; nw],
            ptdf_load: vec![0.0; nd],
        }],
        wind_sites,
        scenarios,
        costs: COSTS,
    };
    inst.check()?;
    Ok(inst)
}

/// One generator serving one load from one wind site: the smallest system
/// on which the finite-sample certificate can be checked by simulation.
pub fn one_generator() -> Result<Fixture> {
    let instance = single_bus(
        vec![generator("g1", 0.01, 30.0, 0.0, 200.0, 3.0, 20.0, 15.0)],
        vec![WindSite {
            id: "w1".into(),
            cost: 10.0,
            max_turbines: 40,
        }],
        vec![vec![vec![100.0]]],
        vec![1.0],
    )?;
    Ok(Fixture {
        instance,
        wind: MomentGrid::uniform(1, 1, &[1.2], &[0.09]),
    })
}

/// [`one_generator`] with the tie line carrying 0.8 of the wind output, so
/// that `capacity` limits the plan.
pub fn tie_line(capacity: f64) -> Result<Fixture> {
    let mut fx = one_generator()?;
    fx.instance.lines[0].ptdf_wind = vec![0.8];
    fx.instance.lines[0].capacity = capacity;
    fx.instance.check()?;
    Ok(fx)
}

/// Five equally priced sites whose output variances differ, one period.
/// Used with a fixed total capacity so that only the split between sites
/// is decided.
pub fn heterogeneous_sites() -> Result<Fixture> {
    let mean = [1.2; 5];
    let variance = [0.0576, 0.07, 0.085, 0.1, 0.121];
    let instance = single_bus(
        vec![
            generator("g1", 0.01, 25.0, 0.0, 150.0, 4.0, 14.0, 12.0),
            generator("g2", 0.02, 30.0, 0.0, 100.0, 6.0, 18.0, 15.0),
        ],
        (0..5)
            .map(|w| WindSite {
                id: format!("w{}", w + 1),
                cost: 10.0,
                max_turbines: 20,
            })
            .collect(),
        vec![vec![vec![150.0]]],
        vec![1.0],
    )?;
    Ok(Fixture {
        instance,
        wind: MomentGrid::uniform(1, 1, &mean, &variance),
    })
}

/// Moments of the four correlated sites.
pub const CORRELATED_MEAN: [f64; 4] = [1.2, 1.1, 1.3, 1.0];
pub const CORRELATED_STD: [f64; 4] = [0.24, 0.3, 0.33, 0.27];

/// Four sites with the correlation of [`SITE_CORRELATION`], one period.
pub fn correlated_sites() -> Result<PlanningInstance> {
    single_bus(
        vec![
            generator("g1", 0.01, 25.0, 0.0, 150.0, 4.0, 14.0, 12.0),
            generator("g2", 0.02, 30.0, 0.0, 100.0, 6.0, 18.0, 15.0),
        ],
        (0..4)
            .map(|w| WindSite {
                id: format!("w{}", w + 1),
                cost: 10.0,
                max_turbines: 20,
            })
            .collect(),
        vec![vec![vec![150.0]]],
        vec![1.0],
    )
}

/// True covariance of the four correlated sites.
pub fn correlated_covariance() -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |i, j| SITE_CORRELATION[i][j] * CORRELATED_STD[i] * CORRELATED_STD[j])
}

/// The true moments of [`correlated_sites`] as a moment table.
pub fn correlated_moments() -> Result<MomentTable> {
    MomentTable::known(1, 1, DVector::from_row_slice(&CORRELATED_MEAN), correlated_covariance())
}

/// Gaussian draws with the true moments of [`correlated_sites`], clipped at
/// zero. Clipping is rare at these moments and only slightly perturbs them.
pub fn correlated_samples(n: usize, seed: u64) -> Result<SampleTensor> {
    use rand_distr::{Distribution, StandardNormal};
    let l = crate::linalg::psd_cholesky(&correlated_covariance());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); 4];
    for _ in 0..n {
        let z = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
        let v = &l * z;
        for w in 0..4 {
            cols[w].push((CORRELATED_MEAN[w] + v[w]).max(0.0));
        }
    }
    SampleTensor::new(1, 1, 4, n, cols.concat())
}

/// Synthetic four-site history: a Gaussian copula with correlation
/// [`SITE_CORRELATION`] and Weibull marginals with the moments of
/// [`correlated_sites`]. The shipped `fixtures/site_history.csv` is
/// `site_history(2000, 2024)`.
pub fn site_history(n: usize, seed: u64) -> Result<SiteHistory> {
    use statrs::distribution::{ContinuousCDF, Normal};
    let corr = DMatrix::from_fn(4, 4, |i, j| SITE_CORRELATION[i][j]);
    let l = crate::linalg::psd_cholesky(&corr);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let params = CORRELATED_MEAN
        .iter()
        .zip(CORRELATED_STD)
        .map(|(&m, sd)| weibull_params_from_moments(m, sd * sd))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); 4];
    for _ in 0..n {
        let z = &l * DVector::from_fn(4, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        for (w, p) in params.iter().enumerate() {
            // Weibull quantile of the Gaussian's probability.
            let u = normal.cdf(z[w]).clamp(1e-12, 1.0 - 1e-12);
            columns[w].push(p.scale * (-(1.0 - u).ln()).powf(1.0 / p.shape));
        }
    }
    Ok(SiteHistory {
        names: (1..=4).map(|w| format!("site{w}")).collect(),
        columns,
    })
}
