//! Exact adaptive transport through the augmented balanced problem.
//!
//! One dummy atom is appended to each side. The dummy source carries the
//! whole target mass and the dummy target carries the whole source mass;
//! every arc touching a dummy costs zero. Untransported mass then flows to
//! or from the dummies, and the balanced optimum restricted to the real
//! block is an optimal plan for the inequality-constrained problem.

use ndarray::{s, Array2};

use crate::error::{AotError, Result};
use crate::measures::{
    check_problem_shape, summarize_plan, CostMatrix, DiscreteMeasure, DualPotentials, SolveReport,
    TransportPlan, DEFAULT_TOL,
};
use crate::simplex::solve_transportation;

/// Absolute duality-gap budget for recovered potentials, per unit of
/// `max(1, max|C|) * (total mu + total nu)`.
pub const CERTIFICATE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedProblem {
    pub mu_hat: DiscreteMeasure,
    pub nu_hat: DiscreteMeasure,
    pub c_hat: CostMatrix,
}

impl AugmentedProblem {
    /// Number of real source atoms (the dummy row is index `n`).
    pub fn n(&self) -> usize {
        self.mu_hat.len() - 1
    }

    /// Number of real target atoms (the dummy column is index `m`).
    pub fn m(&self) -> usize {
        self.nu_hat.len() - 1
    }

    fn real_mu(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(self.mu_hat.weights()[..self.n()].to_vec()).expect("validated on augment")
    }

    fn real_nu(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(self.nu_hat.weights()[..self.m()].to_vec()).expect("validated on augment")
    }

    fn real_cost(&self) -> CostMatrix {
        let block = self.c_hat.entries().slice(s![..self.n(), ..self.m()]).to_owned();
        CostMatrix::new(block).expect("validated on augment")
    }
}

#[derive(Debug, Clone)]
pub struct BalancedSolution {
    pub problem: AugmentedProblem,
    pub plan_hat: TransportPlan,
    pub node_potentials_u: Vec<f64>,
    pub node_potentials_v: Vec<f64>,
    pub pivots: usize,
}

impl BalancedSolution {
    pub fn objective(&self) -> f64 {
        self.plan_hat
            .cost_against(&self.problem.c_hat)
            .expect("plan_hat shares the augmented shape")
    }
}

pub fn augment(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> Result<AugmentedProblem> {
    check_problem_shape(mu, nu, cost)?;
    let (n, m) = cost.shape();
    let mut c_hat = Array2::zeros((n + 1, m + 1));
    c_hat.slice_mut(s![..n, ..m]).assign(cost.entries());
    Ok(AugmentedProblem {
        mu_hat: mu.with_extra_atom(nu.total())?,
        nu_hat: nu.with_extra_atom(mu.total())?,
        c_hat: CostMatrix::new(c_hat)?,
    })
}

/// Network simplex on the augmented (or any balanced) problem.
pub fn solve_balanced(problem: AugmentedProblem) -> Result<BalancedSolution> {
    let (source_total, target_total) = (problem.mu_hat.total(), problem.nu_hat.total());
    if (source_total - target_total).abs() > DEFAULT_TOL * source_total.max(1.0) {
        return Err(AotError::Balance {
            source_total,
            target_total,
        });
    }
    let sol = solve_transportation(problem.mu_hat.weights(), problem.nu_hat.weights(), problem.c_hat.entries())?;
    Ok(BalancedSolution {
        problem,
        plan_hat: TransportPlan::from_nonnegative(sol.flow),
        node_potentials_u: sol.u,
        node_potentials_v: sol.v,
        pivots: sol.pivots,
    })
}

/// Drops the dummy row and column.
pub fn restrict(balanced: &BalancedSolution) -> TransportPlan {
    let (n, m) = (balanced.problem.n(), balanced.problem.m());
    TransportPlan::from_nonnegative(balanced.plan_hat.mass().slice(s![..n, ..m]).to_owned())
}

/// Shifts the simplex duals so the dummy source potential is zero, keeps
/// the real atoms and clips both potentials at zero.
///
/// At an optimum the dummy arcs force every real column potential to be
/// nonpositive and bound each row potential by minus the dummy column
/// potential, so the clip cannot lower the dual value. The returned pair is
/// checked against the restricted primal objective.
pub fn recover_duals(balanced: &BalancedSolution) -> Result<DualPotentials> {
    let problem = &balanced.problem;
    let (n, m) = (problem.n(), problem.m());
    let shift = balanced.node_potentials_u[n];
    let phi: Vec<f64> = balanced.node_potentials_u[..n].iter().map(|u| (u - shift).min(0.0)).collect();
    let psi: Vec<f64> = balanced.node_potentials_v[..m].iter().map(|v| (v + shift).min(0.0)).collect();
    let duals = DualPotentials::new(phi, psi);

    let (mu, nu, cost) = (problem.real_mu(), problem.real_nu(), problem.real_cost());
    let primal = restrict(balanced).cost_against(&cost)?;
    let dual = duals.value(&mu, &nu);
    let scale = cost.max_abs().max(1.0) * (mu.total() + nu.total()).max(1.0);
    let gap = primal - dual;
    if gap.abs() > CERTIFICATE_TOL * scale {
        return Err(AotError::Certification(format!(
            "duality gap {gap:e} exceeds tolerance (primal {primal}, dual {dual})"
        )));
    }
    let slack_tol = DEFAULT_TOL * cost.max_abs().max(1.0);
    for ((i, j), &c) in cost.entries().indexed_iter() {
        let excess = duals.phi[i] + duals.psi[j] - c;
        if excess > slack_tol {
            return Err(AotError::Certification(format!(
                "recovered potentials violate phi + psi <= C at ({i}, {j}) by {excess:e}"
            )));
        }
    }
    Ok(duals)
}

/// `augment -> solve_balanced -> restrict -> summarize_plan`, with
/// certified dual potentials.
pub fn solve_aot_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> Result<SolveReport> {
    solve_aot_exact_with_tol(mu, nu, cost, DEFAULT_TOL)
}

pub fn solve_aot_exact_with_tol(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    tol: f64,
) -> Result<SolveReport> {
    let balanced = solve_balanced(augment(mu, nu, cost)?)?;
    let plan = restrict(&balanced);
    let duals = recover_duals(&balanced)?;
    let summary = summarize_plan(&plan, cost, mu, nu, tol)?;
    let gap = summary.objective - duals.value(mu, nu);
    Ok(SolveReport {
        plan,
        summary,
        duals: Some(duals),
        duality_gap: Some(gap),
        iterations: balanced.pivots,
        entropic_objective: None,
    })
}
