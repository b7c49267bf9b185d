//! Real-time recourse by merit order, checked against the dense simplex.

use windplan::recourse::{solve_recourse, RecourseUnit};
use windplan_conic::simplex::solve_lp;
use windplan_conic::{ConicProgram, LinExpr, Sense};

fn lp_value(e: f64, units: &[RecourseUnit], wc: f64, ls: f64) -> f64 {
    let mut p = ConicProgram::new();
    let mut balance = LinExpr::constant(-e);
    for u in units {
        let pos = p.add_var(0.0, u.down, u.da);
        let neg = p.add_var(0.0, u.up, u.ua);
        balance.add(pos, 1.0).add(neg, -1.0);
    }
    let curtail = p.add_var(0.0, f64::INFINITY, wc);
    let shed = p.add_var(0.0, f64::INFINITY, ls);
    balance.add(curtail, 1.0).add(shed, -1.0);
    p.add_row(balance, Sense::Eq);
    solve_lp(&p).expect("small LP").objective
}

fn main() {
    let units = [
        RecourseUnit { ua: 20.0, da: 15.0, up: 10.0, down: 10.0 },
        RecourseUnit { ua: 25.0, da: 12.0, up: 5.0, down: 8.0 },
    ];
    for e in [-30.0, -12.0, -4.0, 0.0, 3.0, 9.0, 25.0] {
        let r = solve_recourse(e, &units, 100.0, 200.0);
        println!(
            "e = {e:>6}: value {:>8.3} (simplex {:>8.3}) alpha {:?} curtail {} shed {} gamma {}",
            r.value,
            lp_value(e, &units, 100.0, 200.0),
            r.alpha,
            r.curtail,
            r.shed,
            r.gamma
        );
    }
}
