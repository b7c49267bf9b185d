use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::program::{ConicProgram, LinExpr, VarId};

/// Replaces every quadratic objective term `a * x^2` by an epigraph variable
/// `t >= a x^2`, written as `||(2 sqrt(a) x, t - 1)|| <= t + 1`, and returns
/// the epigraph variable created for each original variable.
///
/// Terms with `a == 0` are dropped without adding a cone. Repeated terms on
/// the same variable are merged first.
pub fn lower_quadratic_objective(program: &mut ConicProgram) -> Result<Vec<(usize, VarId)>> {
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    for &(j, a) in &program.quadratic {
        if !a.is_finite() || a < 0.0 {
            return Err(Error::NegativeQuadratic { var: j, coef: a });
        }
        if j >= program.num_vars() {
            return Err(Error::Malformed(format!(
                "quadratic term references variable {j} of {}",
                program.num_vars()
            )));
        }
        *merged.entry(j).or_default() += a;
    }
    program.quadratic.clear();
    let mut created = Vec::new();
    for (j, a) in merged {
        if a == 0.0 {
            continue;
        }
        let t = program.add_var(0.0, f64::INFINITY, 1.0);
        program.add_soc(
            LinExpr::var(t).plus_constant(1.0),
            vec![
                LinExpr::term(VarId(j), 2.0 * a.sqrt()),
                LinExpr::var(t).plus_constant(-1.0),
            ],
        );
        created.push((j, t));
    }
    Ok(created)
}
