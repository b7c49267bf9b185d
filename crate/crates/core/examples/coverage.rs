//! How often the in-sample certificate covers the true expected recourse,
//! for kappa = 0, the cross-validated value, and ten times that.

use windplan::ambiguity::{AmbiguitySpec, RadiusMode};
use windplan::decomp::{Problem, SolveOptions};
use windplan::evaluate::{cross_validate_kappa, guarantee_coverage, CoverageConfig, Metric};
use windplan::fixtures;

fn main() -> windplan::Result<()> {
    let fx = fixtures::one_generator()?;
    let opts = SolveOptions::default();
    let cap = 40;
    let problem = Problem::new(fx.instance.clone(), fx.samples(30, 11)?, AmbiguitySpec::new(RadiusMode::Diagonal, 0.0))?
        .with_capacity(cap);
    let grid = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];
    let cv = cross_validate_kappa(&problem, &fx.samples(500, 12)?, &grid, Metric::RiskCost, &opts)?;
    println!("cross-validated kappa {}", cv.best);
    let cfg = CoverageConfig {
        seed: 7,
        capacity: Some(cap),
        ..CoverageConfig::default()
    };
    for kappa in [0.0, cv.best, 10.0 * cv.best] {
        let rep = guarantee_coverage(&fx.instance, |n, s| fx.samples(n, s), &AmbiguitySpec::new(RadiusMode::Diagonal, kappa), &cfg, &opts)?;
        println!("kappa {kappa:<5} coverage {:.2} ({} of {})", rep.fraction, rep.hits, rep.trials);
    }
    Ok(())
}
