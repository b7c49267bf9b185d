//! Prints the bound history of the L-shaped loop inside constraint
//! generation: one block per round, one line per master solve.

use windplan::ambiguity::{AmbiguitySpec, RadiusMode};
use windplan::decomp::{solve, Algorithm, Problem, SolveLog, SolveOptions};
use windplan::fixtures;

fn main() -> windplan::Result<()> {
    let fx = fixtures::ieee14_fixture()?;
    let train = fx.samples(30, 7)?;
    let problem = Problem::new(fx.instance, train, AmbiguitySpec::new(RadiusMode::Diagonal, 0.1))?;
    let (plan, log) = solve(&problem, &SolveOptions::with_algorithm(Algorithm::CgL))?;
    for (round, entries) in log.round_entries().iter().enumerate() {
        println!("round {}", round + 1);
        println!("  {}", SolveLog::HEADER);
        for e in *entries {
            println!("  {e}");
        }
    }
    println!("final x = {:?}, objective {:.6}", plan.turbines, plan.objective);
    let b = &plan.breakdown;
    println!(
        "investment {:.3} generation {:.3} reserve {:.3} regularizer {:.3} recourse {:.3}",
        b.investment, b.generation, b.reserve, b.regularizer, b.recourse
    );
    Ok(())
}
