//! Solves the 14-bus planning problem with the extensive form, constraint
//! generation, and constraint generation over the L-shaped master, and
//! prints what each one returns.

use windplan::ambiguity::{AmbiguitySpec, RadiusMode};
use windplan::decomp::{solve, Algorithm, Problem, SolveOptions};
use windplan::fixtures;

fn main() -> windplan::Result<()> {
    let fx = fixtures::ieee14_fixture()?;
    let train = fx.samples(30, 7)?;
    let problem = Problem::new(fx.instance.clone(), train, AmbiguitySpec::new(RadiusMode::FullCovariance, 0.1))?;
    let all = 2 * fx.instance.num_scenarios() * fx.instance.num_periods() * fx.instance.num_lines();
    for algo in [Algorithm::Extensive, Algorithm::Cg, Algorithm::CgL] {
        let (plan, _) = solve(&problem, &SolveOptions::with_algorithm(algo))?;
        let d = &plan.diagnostics;
        println!(
            "{:<9} x = {:?}  objective {:.6}  line tuples {}/{all}  rounds {}  cuts {}  {} ms",
            algo.name(),
            plan.turbines,
            plan.objective,
            d.tuples,
            d.cg_iterations,
            d.cuts,
            d.wall_ms
        );
    }
    Ok(())
}
