//! Invariants checked over generated instances.

mod common;

use adaptive_ot::analysis::{
    active_regions, check_mass_allocation, dual_report, mass_shift_curve, transform, Side,
};
use adaptive_ot::baselines::pot_lambda_sweep;
use adaptive_ot::entropic::{solve_aot_sinkhorn, SinkhornConfig};
use adaptive_ot::exact::{augment, solve_balanced};
use adaptive_ot::io::{load_problem, round_sig, write_cost, write_measure, ProblemFile};
use adaptive_ot::{solve_aot_exact, summarize_plan, TransportPlan, DEFAULT_TOL};
use common::{instance_strategy, max_violation, Instance};
use ndarray::Array2;
use proptest::prelude::*;

fn product_plan(inst: &Instance) -> TransportPlan {
    // mu nu^T / max(total) keeps both marginals feasible
    let scale = inst.mu.total().max(inst.nu.total()).max(1e-300);
    let mass = Array2::from_shape_fn(inst.cost.shape(), |(i, j)| {
        inst.mu.weights()[i] * inst.nu.weights()[j] / scale
    });
    TransportPlan::new(mass).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_plan_is_feasible(inst in instance_strategy(7)) {
        let r = solve_aot_exact(&inst.mu, &inst.nu, &inst.cost).unwrap();
        prop_assert!(max_violation(r.plan.mass(), inst.mu.weights(), inst.nu.weights()) <= DEFAULT_TOL);
        prop_assert!(r.mass() <= inst.mu.total().min(inst.nu.total()) + DEFAULT_TOL);
    }

    #[test]
    fn exact_equals_augmented_value(inst in instance_strategy(7)) {
        let r = solve_aot_exact(&inst.mu, &inst.nu, &inst.cost).unwrap();
        let balanced = solve_balanced(augment(&inst.mu, &inst.nu, &inst.cost).unwrap()).unwrap();
        prop_assert!((r.objective() - balanced.objective()).abs() < 1e-9);
    }

    #[test]
    fn strong_duality_and_certificate(inst in instance_strategy(7)) {
        let r = solve_aot_exact(&inst.mu, &inst.nu, &inst.cost).unwrap();
        let d = r.duals.as_ref().unwrap();
        let rep = dual_report(&d.phi, &d.psi, &inst.cost, &inst.mu, &inst.nu, r.objective(), 1e-9).unwrap();
        prop_assert!(rep.feasible);
        prop_assert!(rep.gap.abs() <= 1e-7);
        prop_assert!(d.phi.iter().chain(&d.psi).all(|&p| p <= 0.0));
    }

    #[test]
    fn weak_duality(inst in instance_strategy(6), raw in proptest::collection::vec(0.0..2.0f64, 6)) {
        let n = inst.mu.len();
        let phi: Vec<f64> = (0..n).map(|i| -raw[i % raw.len()]).collect();
        // best partner for phi is feasible by construction
        let psi: Vec<f64> = transform(&phi, &inst.cost, Side::RowToCol).unwrap().into_iter().map(|v| v.min(0.0)).collect();
        for plan in [product_plan(&inst), solve_aot_exact(&inst.mu, &inst.nu, &inst.cost).unwrap().plan] {
            let primal = plan.cost_against(&inst.cost).unwrap();
            let rep = dual_report(&phi, &psi, &inst.cost, &inst.mu, &inst.nu, primal, 1e-9).unwrap();
            prop_assert!(rep.feasible);
            prop_assert!(rep.gap >= -1e-9, "gap {}", rep.gap);
        }
    }

    #[test]
    fn mass_allocation_and_active_regions(inst in instance_strategy(8)) {
        let r = solve_aot_exact(&inst.mu, &inst.nu, &inst.cost).unwrap();
        let t1 = check_mass_allocation(&r.plan, &inst.cost, &inst.mu, &inst.nu, DEFAULT_TOL).unwrap();
        prop_assert!(t1.passed, "{t1:?}");
        let regions = active_regions(&r.plan, 0.0);
        let inactive: f64 = regions.inactive_rows.iter()
            .flat_map(|&i| regions.inactive_cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| r.plan.get(i, j))
            .sum();
        prop_assert_eq!(inactive, 0.0);
        prop_assert!((regions.active_mass - r.mass()).abs() <= 1e-12);
    }

    #[test]
    fn objective_is_linear_in_the_plan(inst in instance_strategy(6), a in 0.0..1.0f64) {
        let p = product_plan(&inst);
        let q = solve_aot_exact(&inst.mu, &inst.nu, &inst.cost).unwrap().plan;
        let mix = TransportPlan::new(p.mass() * a + q.mass() * (1.0 - a)).unwrap();
        let obj = |plan: &TransportPlan| summarize_plan(plan, &inst.cost, &inst.mu, &inst.nu, DEFAULT_TOL).unwrap().objective;
        prop_assert!((obj(&mix) - (a * obj(&p) + (1.0 - a) * obj(&q))).abs() < 1e-12);
        prop_assert!(summarize_plan(&mix, &inst.cost, &inst.mu, &inst.nu, DEFAULT_TOL).unwrap().is_feasible());
    }

    #[test]
    fn transform_reverses_order(inst in instance_strategy(6), base in proptest::collection::vec(-2.0..0.0f64, 6),
                                bump in proptest::collection::vec(0.0..1.0f64, 6)) {
        let n = inst.mu.len();
        let lo: Vec<f64> = (0..n).map(|i| base[i % 6]).collect();
        let hi: Vec<f64> = (0..n).map(|i| base[i % 6] + bump[i % 6]).collect();
        let t_lo = transform(&lo, &inst.cost, Side::RowToCol).unwrap();
        let t_hi = transform(&hi, &inst.cost, Side::RowToCol).unwrap();
        prop_assert!(t_lo.iter().zip(&t_hi).all(|(a, b)| a >= b));
    }

    #[test]
    fn shift_curve_is_monotone(inst in instance_strategy(5)) {
        let grid: Vec<f64> = (0..9).map(|k| -1.5 + 0.375 * k as f64).collect();
        let pts = mass_shift_curve(&inst.mu, &inst.nu, &inst.cost, &grid).unwrap();
        for w in pts.windows(2) {
            prop_assert!(w[1].mass >= w[0].mass - 1e-12);
        }
        prop_assert!(pts[0].mass <= 1e-12);
        prop_assert!((pts[8].mass - inst.mu.total().min(inst.nu.total())).abs() <= 1e-9);
    }

    #[test]
    fn lambda_sweep_is_monotone(inst in instance_strategy(5)) {
        let c_plus = inst.cost.shifted(1.0);
        let grid: Vec<f64> = (0..9).map(|k| 0.375 * k as f64).collect();
        let pts = pot_lambda_sweep(&inst.mu, &inst.nu, &c_plus, &grid).unwrap();
        for w in pts.windows(2) {
            prop_assert!(w[1].mass >= w[0].mass - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn sinkhorn_plan_and_potentials(inst in instance_strategy(5), eps in prop_oneof![Just(0.05), Just(0.1), Just(0.5)]) {
        prop_assume!(inst.mu.total() > 0.0 && inst.nu.total() > 0.0);
        let cfg = SinkhornConfig { max_iter: 200_000, ..SinkhornConfig::with_epsilon(eps) };
        let r = solve_aot_sinkhorn(&inst.mu, &inst.nu, &inst.cost, &cfg).unwrap();
        prop_assert!(max_violation(r.plan.mass(), inst.mu.weights(), inst.nu.weights()) <= cfg.tol);
        let d = r.duals.as_ref().unwrap();
        prop_assert!(d.phi.iter().chain(&d.psi).all(|&p| p <= 0.0));
        // a row with phi < 0 was saturated by its last update; the column
        // sweep after it moves each psi by at most tol
        for (i, &p) in d.phi.iter().enumerate() {
            if p.is_finite() && p < -cfg.tol {
                let w = inst.mu.weights()[i];
                let slack = w * ((cfg.tol / eps).exp() - 1.0) + 1e-12;
                prop_assert!((r.plan.row_marginals()[i] - w).abs() <= slack);
            }
        }
    }

    #[test]
    fn problem_files_round_trip(inst in instance_strategy(6)) {
        let dir = tempfile::tempdir().unwrap();
        let files = ProblemFile {
            mu: dir.path().join("mu.txt"),
            nu: dir.path().join("nu.txt"),
            cost: dir.path().join("cost.csv"),
        };
        write_measure(&inst.mu, &files.mu).unwrap();
        write_measure(&inst.nu, &files.nu).unwrap();
        write_cost(&inst.cost, &files.cost).unwrap();
        let (mu, nu, cost) = load_problem(&files).unwrap();
        for (a, b) in mu.weights().iter().chain(nu.weights()).zip(inst.mu.weights().iter().chain(inst.nu.weights())) {
            prop_assert_eq!(*a, round_sig(*b));
        }
        for (a, b) in cost.entries().iter().zip(inst.cost.entries()) {
            prop_assert_eq!(*a, round_sig(*b));
        }
    }
}
