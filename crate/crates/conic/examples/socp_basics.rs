//! Two small cone programs: minimise t with ||(3, 4)|| <= t, and an
//! infeasible LP with its certificate.

use windplan_conic::{residuals, solve_conic, ConicProgram, LinExpr, Sense, SolverSettings};

fn main() -> windplan_conic::Result<()> {
    let mut p = ConicProgram::new();
    let t = p.add_free_var(1.0);
    p.add_soc(LinExpr::var(t), vec![LinExpr::constant(3.0), LinExpr::constant(4.0)]);
    let sol = solve_conic(&p, &SolverSettings::default())?;
    println!("norm: {:?} t = {:.9}, residuals {:?}", sol.status, sol.x[0], residuals(&p, &sol));

    let mut q = ConicProgram::new();
    let x = q.add_free_var(1.0);
    q.add_row(LinExpr::var(x).plus_constant(-1.0), Sense::Ge);
    q.add_row(LinExpr::var(x), Sense::Le);
    let sol = solve_conic(&q, &SolverSettings::default())?;
    println!("x >= 1, x <= 0: {:?}, row multipliers {:?}, certificate residual {:?}", sol.status, sol.row_duals, sol.certificate);
    Ok(())
}
