use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windplan_conic::simplex::{solve_lp, LpStatus};
use windplan_conic::{
    certificate_residual, residuals, solve_conic, ConicProgram, LinExpr, Sense, SolverSettings,
    Status,
};

/// Random bounded LP with `m` inequality rows over `n` boxed variables,
/// feasible by construction around a random interior point.
fn random_lp(seed: u64, m: usize, n: usize) -> ConicProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ConicProgram::new();
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let vars: Vec<_> = (0..n)
        .map(|_| p.add_var(0.0, 10.0, rng.random_range(-1.0..1.0)))
        .collect();
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax: f64 = a.iter().zip(&x0).map(|(p, q)| p * q).sum();
        let mut e = LinExpr::constant(-(ax + rng.random_range(0.1..1.0)));
        for (v, c) in vars.iter().zip(&a) {
            e.add(*v, *c);
        }
        p.add_row(e, Sense::Le);
    }
    p
}

fn random_socp(seed: u64) -> ConicProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ConicProgram::new();
    let n = rng.random_range(2..6);
    let vars: Vec<_> = (0..n)
        .map(|_| p.add_var(-5.0, 5.0, rng.random_range(-1.0..1.0)))
        .collect();
    let t = p.add_var(0.0, f64::INFINITY, 1.0);
    let u: Vec<LinExpr> = vars
        .iter()
        .map(|&v| LinExpr::var(v).plus_constant(rng.random_range(-1.0..1.0)))
        .collect();
    p.add_soc(LinExpr::var(t), u);
    p
}

#[test]
fn lp_optima_match_simplex() {
    for seed in 0..20 {
        let p = random_lp(seed, 5, 8);
        let ipm = solve_conic(&p, &SolverSettings::default()).unwrap();
        let spx = solve_lp(&p).unwrap();
        assert_eq!(ipm.status, Status::Optimal);
        assert_eq!(spx.status, LpStatus::Optimal);
        let rel = (ipm.objective - spx.objective).abs() / (1.0 + spx.objective.abs());
        assert!(rel <= 1e-7, "seed {seed}: {} vs {}", ipm.objective, spx.objective);
        assert!(residuals(&p, &ipm).max() <= 1e-8);
    }
}

#[test]
fn trivially_infeasible_lp_is_classified() {
    let mut p = ConicProgram::new();
    let x = p.add_free_var(0.0);
    p.add_row(LinExpr::var(x).plus_constant(-1.0), Sense::Ge);
    p.add_row(LinExpr::var(x), Sense::Le);
    let sol = solve_conic(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
    assert!(certificate_residual(&p, &sol).unwrap() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weak_duality(seed in 0u64..10_000, conic in any::<bool>()) {
        let p = if conic { random_socp(seed) } else { random_lp(seed, 4, 6) };
        let sol = solve_conic(&p, &SolverSettings::default()).unwrap();
        prop_assume!(sol.status == Status::Optimal);
        prop_assert!(sol.objective >= sol.dual_objective - 1e-6);
    }

    #[test]
    fn objective_scaling_keeps_argmin(seed in 0u64..10_000) {
        let p = random_lp(seed, 5, 8);
        let mut q = p.clone();
        q.objective.iter_mut().for_each(|c| *c *= 10.0);
        let a = solve_conic(&p, &SolverSettings::default()).unwrap();
        let b = solve_conic(&q, &SolverSettings::default()).unwrap();
        prop_assume!(a.status == Status::Optimal && b.status == Status::Optimal);
        // Random costs give a unique vertex; compare against the simplex vertex too.
        let v = solve_lp(&p).unwrap();
        for j in 0..p.num_vars() {
            prop_assert!((a.x[j] - b.x[j]).abs() <= 1e-6, "{} vs {}", a.x[j], b.x[j]);
            prop_assert!((a.x[j] - v.x[j]).abs() <= 1e-6);
        }
    }

    #[test]
    fn socp_residuals_within_tolerance(seed in 0u64..10_000) {
        let p = random_socp(seed);
        let sol = solve_conic(&p, &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(residuals(&p, &sol).max() <= 1e-8);
    }
}
