//! Picks kappa on a held-out validation set of the 14-bus system.

use windplan::ambiguity::{AmbiguitySpec, RadiusMode};
use windplan::decomp::{Problem, SolveOptions};
use windplan::evaluate::{cross_validate_kappa, Metric};
use windplan::fixtures;

fn main() -> windplan::Result<()> {
    let fx = fixtures::ieee14_fixture()?;
    let problem = Problem::new(fx.instance.clone(), fx.samples(30, 1)?, AmbiguitySpec::new(RadiusMode::FullCovariance, 0.0))?;
    let validation = fx.samples(500, 2)?;
    let grid = [0.0, 0.05, 0.1, 0.25, 0.5];
    for metric in [Metric::RiskCost, Metric::SmoothingVariance] {
        let cv = cross_validate_kappa(&problem, &validation, &grid, metric, &SolveOptions::default())?;
        println!("{metric:?}");
        for (k, v) in &cv.scores {
            println!("  kappa {k:<5} score {v:.6}");
        }
        println!("  best kappa {}", cv.best);
    }
    Ok(())
}
