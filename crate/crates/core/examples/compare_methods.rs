//! Fixed-capacity comparison on five sites of unequal variance: where each
//! method puts 40 turbines, and what that does to reserve cost and to the
//! variance of the total wind output.

use windplan::decomp::SolveOptions;
use windplan::evaluate::{compare_methods, Method, Metric, SeedCase};
use windplan::fixtures;
use windplan::sampling::substream;

fn main() -> windplan::Result<()> {
    let seeds: usize = std::env::args().nth(1).map_or(10, |s| s.parse().expect("seed count"));
    let fx = fixtures::heterogeneous_sites()?;
    let cases = (0..seeds)
        .map(|i| {
            Ok(SeedCase {
                seed: i as u64,
                train: fx.samples(60, substream(i as u64, "train"))?,
                test: fx.samples(3000, substream(i as u64, "test"))?,
            })
        })
        .collect::<windplan::Result<Vec<_>>>()?;
    let methods = [(Method::DdroV, 3.0), (Method::Ndro, 0.9), (Method::Eo, 0.0)];
    let report = compare_methods(&fx.instance, &cases, &methods, Some(40), None, &SolveOptions::default())?;
    for row in report.rows.iter().filter(|r| r.seed == 0) {
        println!("seed 0 {:<6} x = {:?}", row.method.to_string(), row.turbines);
    }
    print!("{}", report.summary());
    for (a, b) in [(Method::DdroV, Method::Eo), (Method::DdroV, Method::Ndro)] {
        println!(
            "{a} <= {b}: risk cost {:.2}, smoothing variance {:.2}",
            report.win_fraction(a, b, Metric::RiskCost),
            report.win_fraction(a, b, Metric::SmoothingVariance)
        );
    }
    Ok(())
}
