//! The decision-dependent radius under each mode, and the dual bound that
//! multiplies it.

use nalgebra::DMatrix;
use windplan::ambiguity::{dual_bound_phi, radius, RadiusMode};
use windplan::fixtures;

fn main() -> windplan::Result<()> {
    let cov = DMatrix::from_row_slice(2, 2, &[0.04, -0.01, -0.01, 0.09]);
    let x = [2.0, 1.0];
    let ones = [1.0; 2];
    for mode in [RadiusMode::FullCovariance, RadiusMode::Diagonal, RadiusMode::NormOnly, RadiusMode::Empirical] {
        println!("{mode:?}: {:.6}", radius(&x, &ones, &cov, 0.5, mode)?);
    }
    let inst = fixtures::ieee14(4)?;
    let phi = dual_bound_phi(&inst.generators, inst.costs.wc, inst.costs.ls)?;
    println!("phi = {phi} (WC {}, LS {})", inst.costs.wc, inst.costs.ls);
    Ok(())
}
