//! With the true covariance of four correlated sites, the full-covariance
//! radius rewards pairs that cancel; the variance-only and norm radii
//! cannot see that.

use windplan::decomp::SolveOptions;
use windplan::evaluate::{compare_methods, Method, SeedCase};
use windplan::fixtures;

fn main() -> windplan::Result<()> {
    let inst = fixtures::correlated_sites()?;
    let truth = fixtures::correlated_moments()?;
    let cases = (0..5)
        .map(|i| {
            Ok(SeedCase {
                seed: i,
                train: fixtures::correlated_samples(60, 100 + i)?,
                test: fixtures::correlated_samples(3000, 200 + i)?,
            })
        })
        .collect::<windplan::Result<Vec<_>>>()?;
    let methods = [(Method::DdroC, 3.0), (Method::DdroV, 3.0), (Method::Ndro, 0.9)];
    let report = compare_methods(&inst, &cases, &methods, Some(40), Some(&truth), &SolveOptions::default())?;
    for row in &report.rows {
        println!(
            "seed {} {:<6} x = {:?} smoothing variance {:.3}",
            row.seed,
            row.method.to_string(),
            row.turbines,
            row.smoothing_variance
        );
    }
    print!("{}", report.summary());
    Ok(())
}
