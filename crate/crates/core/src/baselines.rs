//! Classical comparators: full-mass transport, fixed-mass partial transport,
//! and the Lagrangian mass sweep that links partial transport to the
//! adaptive problem.

use ndarray::{s, Array2};

use crate::error::{AotError, Result};
use crate::exact::solve_aot_exact;
use crate::measures::{
    check_problem_shape, summarize_plan, CostMatrix, DiscreteMeasure, DualPotentials, SolveReport, TransportPlan,
    DEFAULT_TOL,
};
use crate::simplex::solve_transportation;

/// Fixed-mass partial transport problem with a nonnegative cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PotSpec {
    pub mass_budget: f64,
    pub cost: CostMatrix,
}

impl PotSpec {
    pub fn new(mass_budget: f64, cost: CostMatrix) -> Result<Self> {
        if !cost.is_nonnegative() {
            return Err(AotError::Validation("partial transport needs a nonnegative cost".into()));
        }
        if !(mass_budget >= 0.0 && mass_budget.is_finite()) {
            return Err(AotError::Validation(format!("mass budget must be >= 0, got {mass_budget}")));
        }
        Ok(Self { mass_budget, cost })
    }
}

/// One point of a mass curve: the shift or multiplier, the transported
/// mass and the objective of the shifted problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub parameter: f64,
    pub mass: f64,
    pub objective: f64,
}

fn balance_check(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    let (a, b) = (mu.total(), nu.total());
    if (a - b).abs() > DEFAULT_TOL * a.max(b).max(1.0) {
        return Err(AotError::Balance {
            source_total: a,
            target_total: b,
        });
    }
    Ok(())
}

/// Full-mass transport with equality marginals.
pub fn solve_kantorovich(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> Result<SolveReport> {
    check_problem_shape(mu, nu, cost)?;
    balance_check(mu, nu)?;
    let sol = solve_transportation(mu.weights(), nu.weights(), cost.entries())?;
    let plan = TransportPlan::from_nonnegative(sol.flow);
    let summary = summarize_plan(&plan, cost, mu, nu, DEFAULT_TOL)?;
    let duals = DualPotentials::new(sol.u, sol.v);
    let gap = summary.objective - duals.value(mu, nu);
    Ok(SolveReport {
        plan,
        summary,
        duals: Some(duals),
        duality_gap: Some(gap),
        iterations: sol.pivots,
        entropic_objective: None,
    })
}

/// Fixed-mass partial transport via dummy atoms: the dummy source holds
/// `total(nu) - m`, the dummy target holds `total(mu) - m`, dummy arcs are
/// free and the dummy-dummy corner is penalized so it never ships.
pub fn solve_pot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, spec: &PotSpec) -> Result<SolveReport> {
    let cost = &spec.cost;
    check_problem_shape(mu, nu, cost)?;
    let m = spec.mass_budget;
    let cap = mu.total().min(nu.total());
    if m > cap * (1.0 + 1e-12) {
        return Err(AotError::Validation(format!(
            "mass budget {m} exceeds min(total mu, total nu) = {cap}"
        )));
    }
    let (n, k) = cost.shape();
    let mut c_hat = Array2::zeros((n + 1, k + 1));
    c_hat.slice_mut(s![..n, ..k]).assign(cost.entries());
    c_hat[[n, k]] = 2.0 * cost.max_abs() + 1.0;
    let mut supply = mu.weights().to_vec();
    supply.push((nu.total() - m).max(0.0));
    let mut demand = nu.weights().to_vec();
    demand.push((mu.total() - m).max(0.0));

    let sol = solve_transportation(&supply, &demand, &c_hat)?;
    let plan = TransportPlan::from_nonnegative(sol.flow.slice(s![..n, ..k]).to_owned());
    let summary = summarize_plan(&plan, cost, mu, nu, DEFAULT_TOL)?;
    Ok(SolveReport {
        plan,
        summary,
        duals: None,
        duality_gap: None,
        iterations: sol.pivots,
        entropic_objective: None,
    })
}

/// For each multiplier `lambda`, solves the unconstrained-mass problem with
/// cost `c_plus - lambda` exactly.
pub fn pot_lambda_sweep(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c_plus: &CostMatrix,
    lambda_grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    if !c_plus.is_nonnegative() {
        return Err(AotError::Validation("lambda sweep needs a nonnegative cost".into()));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(AotError::Validation(format!("lambda must be finite and >= 0, got {l}")));
    }
    lambda_grid
        .iter()
        .map(|&lambda| {
            let r = solve_aot_exact(mu, nu, &c_plus.shifted(-lambda))?;
            Ok(SweepPoint {
                parameter: lambda,
                mass: r.mass(),
                objective: r.objective(),
            })
        })
        .collect()
}
