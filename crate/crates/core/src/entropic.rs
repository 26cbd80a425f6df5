//! Entropy-regularized adaptive transport.
//!
//! Solves
//!
//! ```text
//! min <P, C> + eps * sum P_ij (log P_ij - 1)   s.t.  P 1 <= mu,  P^T 1 <= nu
//! ```
//!
//! by block coordinate ascent on its dual. With `P_ij = exp((phi_i + psi_j -
//! C_ij) / eps)` the exact maximizer in `phi_i` is the usual Sinkhorn row
//! update clipped at zero, because the multipliers of `<=` constraints are
//! sign-restricted. Columns are symmetric. Everything stays in the log
//! domain so small `eps` does not underflow.

use crate::error::{AotError, Result};
use crate::measures::{
    check_problem_shape, summarize_plan, weighted_sum, CostMatrix, DiscreteMeasure, DualPotentials, SolveReport,
    TransportPlan,
};
use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    /// Bound on marginal overflow and on the sup-norm potential change
    /// between sweeps.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

impl SinkhornConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AotError::Validation(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.tol > 0.0) {
            return Err(AotError::Validation(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(AotError::Validation("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Clipped log-domain update of one potential against its partner.
/// `costs` yields the cost entries of the row (or column) being updated.
fn clipped_update<'a>(
    weight: f64,
    partner: &'a [f64],
    costs: impl Iterator<Item = f64> + Clone + 'a,
    eps: f64,
) -> f64 {
    if weight == 0.0 {
        return f64::NEG_INFINITY;
    }
    let lse = log_sum_exp(partner.iter().zip(costs).map(move |(p, c)| (p - c) / eps));
    (eps * weight.ln() - eps * lse).min(0.0)
}

// zero-weight atoms sit at -inf and are ignored
fn sup_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .filter(|(_, b)| b.is_finite())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn plan_from_potentials(phi: &[f64], psi: &[f64], cost: &CostMatrix, eps: f64) -> Array2<f64> {
    Array2::from_shape_fn(cost.shape(), |(i, j)| ((phi[i] + psi[j] - cost.get(i, j)) / eps).exp())
}

fn max_overflow(plan: &Array2<f64>, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let rows = plan.rows().into_iter().zip(mu.weights()).map(|(r, w)| r.sum() - w);
    let cols = plan.columns().into_iter().zip(nu.weights()).map(|(c, w)| c.sum() - w);
    rows.chain(cols).fold(0.0, f64::max)
}

pub fn solve_aot_sinkhorn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    config: &SinkhornConfig,
) -> Result<SolveReport> {
    sinkhorn_with_trace(mu, nu, cost, config).map(|(report, _)| report)
}

/// Same as [`solve_aot_sinkhorn`], also returning the marginal overflow
/// after every sweep.
pub fn sinkhorn_with_trace(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    config: &SinkhornConfig,
) -> Result<(SolveReport, Vec<f64>)> {
    config.validate()?;
    check_problem_shape(mu, nu, cost)?;
    if !(mu.total() > 0.0 && nu.total() > 0.0) {
        return Err(AotError::Validation("entropic solver needs strictly positive total masses".into()));
    }
    let eps = config.epsilon;
    let (n, m) = cost.shape();
    let c = cost.entries();
    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; m];
    let mut residuals = Vec::new();

    for iteration in 1..=config.max_iter {
        let (phi_prev, psi_prev) = (phi.clone(), psi.clone());
        for (i, p) in phi.iter_mut().enumerate() {
            *p = clipped_update(mu.weights()[i], &psi, c.row(i).into_iter().copied(), eps);
        }
        for (j, p) in psi.iter_mut().enumerate() {
            *p = clipped_update(nu.weights()[j], &phi, c.column(j).into_iter().copied(), eps);
        }

        let plan = plan_from_potentials(&phi, &psi, cost, eps);
        let overflow = max_overflow(&plan, mu, nu);
        let change = sup_change(&phi_prev, &phi).max(sup_change(&psi_prev, &psi));
        residuals.push(overflow);
        if !overflow.is_finite() || !change.is_finite() {
            return Err(AotError::Convergence {
                iterations: iteration,
                residual: f64::NAN,
            });
        }
        if overflow <= config.tol && change <= config.tol {
            return Ok((finish(plan, phi, psi, mu, nu, cost, config, iteration)?, residuals));
        }
        if iteration == config.max_iter {
            return Err(AotError::Convergence {
                iterations: iteration,
                residual: overflow.max(change),
            });
        }
    }
    unreachable!("max_iter >= 1 is validated")
}

#[allow(clippy::too_many_arguments)]
fn finish(
    plan: Array2<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    config: &SinkhornConfig,
    iterations: usize,
) -> Result<SolveReport> {
    let eps = config.epsilon;
    let mut entropy_term = 0.0;
    for ((i, j), &p) in plan.indexed_iter() {
        if p > 0.0 {
            let log_p = (phi[i] + psi[j] - cost.get(i, j)) / eps;
            entropy_term += p * (log_p - 1.0);
        }
    }
    let plan = TransportPlan::from_nonnegative(plan);
    let summary = summarize_plan(&plan, cost, mu, nu, config.tol)?;
    let entropic_objective = summary.objective + eps * entropy_term;
    // dual of the regularized problem: <phi, mu> + <psi, nu> - eps * sum P
    let dual = weighted_sum(&phi, mu.weights()) + weighted_sum(&psi, nu.weights()) - eps * plan.total_mass();
    Ok(SolveReport {
        duality_gap: Some(entropic_objective - dual),
        plan,
        summary,
        duals: Some(DualPotentials::new(phi, psi)),
        iterations,
        entropic_objective: Some(entropic_objective),
    })
}
