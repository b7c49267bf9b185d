//! Weibull parameters from a mean and variance, and a sampled wind field.

use windplan::sampling::{sample_weibull_field, weibull_params_from_moments, MomentGrid};

fn main() -> windplan::Result<()> {
    for (mean, var) in [(1.2, 0.09), (0.96, 0.0576), (1.44, 0.121), (1.0, 1.0)] {
        let p = weibull_params_from_moments(mean, var)?;
        println!("mean {mean:<5} var {var:<7} -> shape {:.6} scale {:.6}", p.shape, p.scale);
    }
    let grid = MomentGrid::uniform(1, 1, &[1.2, 1.0], &[0.09, 0.06]);
    let field = sample_weibull_field(&grid, 10_000, 1)?;
    for w in 0..field.sites() {
        let xs = field.series(0, 0, w);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        println!("site {w}: sample mean {m:.4}, sample variance {v:.4}");
    }
    Ok(())
}
