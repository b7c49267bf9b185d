//! Fits the Gaussian-copula generator to the shipped four-site history and
//! draws 3000 new joint samples.

use windplan::linalg::mean_covariance;
use windplan::sampling::{fit_copula_generator, generate_copula_trace, SiteHistory, DEFAULT_COPULA_ITERATIONS};

fn main() -> windplan::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/site_history.csv");
    let history = SiteHistory::load(path)?;
    let model = fit_copula_generator(&history.columns)?;
    println!("correlation of the Gaussianised history:\n{:.4}", model.correlation_matrix());

    let (rows, trace) = generate_copula_trace(&model, 3000, DEFAULT_COPULA_ITERATIONS, 11)?;
    let target = model.covariance_matrix();
    let (_, cov) = mean_covariance(&rows)?;
    println!("covariance distance per iteration: {trace:.5?}");
    println!(
        "relative Frobenius distance {:.4}, smallest value {:.4}",
        (&cov - &target).norm() / target.norm(),
        rows.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    );
    Ok(())
}
