//! Certificates for adaptive transport plans: mass-allocation conditions,
//! active regions, c-transforms, dual and semi-dual values, and the
//! cost-shift mass curve.

use crate::baselines::SweepPoint;
use crate::error::{AotError, Result};
use crate::exact::solve_aot_exact;
use crate::measures::{
    check_problem_shape, summarize_plan, weighted_sum, CostMatrix, DiscreteMeasure, TransportPlan,
};

/// Outcome of the sign/saturation check on every plan entry.
///
/// Entries of exactly zero cost are exempt: shipping and not shipping on
/// them are both optimal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoremOneReport {
    /// `(i, j, mass)` with `C_ij > 0` and `mass > tol`.
    pub positive_violations: Vec<(usize, usize, f64)>,
    /// `(i, j)` with `C_ij < 0` while neither row `i` nor column `j` is
    /// saturated.
    pub negative_unsaturated: Vec<(usize, usize)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveRegions {
    pub active_rows: Vec<usize>,
    pub active_cols: Vec<usize>,
    pub inactive_rows: Vec<usize>,
    pub inactive_cols: Vec<usize>,
    pub active_mass: f64,
}

/// Direction of a c-transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `phi^c(j) = min_i C_ij - phi_i`
    RowToCol,
    /// `psi^cbar(i) = min_j C_ij - psi_j`
    ColToRow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualReport {
    pub feasible: bool,
    pub dual_value: f64,
    pub gap: f64,
}

/// Row `i` is active iff some entry of row `i` exceeds `tol`; same for
/// columns.
pub fn active_regions(plan: &TransportPlan, tol: f64) -> ActiveRegions {
    let (n, m) = plan.shape();
    let mass = plan.mass();
    let row_active: Vec<bool> = (0..n).map(|i| mass.row(i).iter().any(|&v| v > tol)).collect();
    let col_active: Vec<bool> = (0..m).map(|j| mass.column(j).iter().any(|&v| v > tol)).collect();
    let split = |flags: &[bool]| -> (Vec<usize>, Vec<usize>) { (0..flags.len()).partition(|&k| flags[k]) };
    let (active_rows, inactive_rows) = split(&row_active);
    let (active_cols, inactive_cols) = split(&col_active);
    let active_mass = active_rows
        .iter()
        .flat_map(|&i| active_cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| mass[[i, j]])
        .sum();
    ActiveRegions {
        active_rows,
        active_cols,
        inactive_rows,
        inactive_cols,
        active_mass,
    }
}

pub fn check_mass_allocation(
    plan: &TransportPlan,
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<TheoremOneReport> {
    let summary = summarize_plan(plan, cost, mu, nu, tol)?;
    if !summary.is_feasible() {
        return Err(AotError::Validation(format!(
            "plan violates the marginal constraints by {:e}",
            summary.max_violation
        )));
    }
    let mut report = TheoremOneReport::default();
    for ((i, j), &c) in cost.entries().indexed_iter() {
        let x = plan.get(i, j);
        if c > 0.0 && x > tol {
            report.positive_violations.push((i, j, x));
        } else if c < 0.0 && summary.row_slack[i] > tol && summary.col_slack[j] > tol {
            report.negative_unsaturated.push((i, j));
        }
    }
    report.passed = report.positive_violations.is_empty() && report.negative_unsaturated.is_empty();
    Ok(report)
}

pub fn transform(potential: &[f64], cost: &CostMatrix, side: Side) -> Result<Vec<f64>> {
    let c = cost.entries();
    match side {
        Side::RowToCol => {
            if potential.len() != cost.nrows() {
                return Err(AotError::Shape(format!(
                    "row potential has {} entries, cost has {} rows",
                    potential.len(),
                    cost.nrows()
                )));
            }
            Ok(c.columns()
                .into_iter()
                .map(|col| col.iter().zip(potential).map(|(c, p)| c - p).fold(f64::INFINITY, f64::min))
                .collect())
        }
        Side::ColToRow => {
            if potential.len() != cost.ncols() {
                return Err(AotError::Shape(format!(
                    "column potential has {} entries, cost has {} columns",
                    potential.len(),
                    cost.ncols()
                )));
            }
            Ok(c.rows()
                .into_iter()
                .map(|row| row.iter().zip(potential).map(|(c, p)| c - p).fold(f64::INFINITY, f64::min))
                .collect())
        }
    }
}

/// Feasibility of `(phi, psi)` for the nonpositive dual, its value and the
/// gap to a primal objective.
pub fn dual_report(
    phi: &[f64],
    psi: &[f64],
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    primal_objective: f64,
    tol: f64,
) -> Result<DualReport> {
    check_problem_shape(mu, nu, cost)?;
    if phi.len() != mu.len() || psi.len() != nu.len() {
        return Err(AotError::Shape(format!(
            "potentials have lengths ({}, {}), measures ({}, {})",
            phi.len(),
            psi.len(),
            mu.len(),
            nu.len()
        )));
    }
    let signs_ok = phi.iter().chain(psi).all(|&p| p <= tol);
    let pairs_ok = cost
        .entries()
        .indexed_iter()
        .all(|((i, j), &c)| !(phi[i] + psi[j] > c + tol));
    let dual_value = weighted_sum(phi, mu.weights()) + weighted_sum(psi, nu.weights());
    Ok(DualReport {
        feasible: signs_ok && pairs_ok,
        dual_value,
        gap: primal_objective - dual_value,
    })
}

/// `sum phi mu + sum min(phi^c, 0) nu` for a nonpositive `phi`.
pub fn semidual_value(phi: &[f64], cost: &CostMatrix, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_problem_shape(mu, nu, cost)?;
    if let Some((i, p)) = phi.iter().enumerate().find(|(_, p)| **p > 0.0) {
        return Err(AotError::Validation(format!("semi-dual potential must be <= 0, phi[{i}] = {p}")));
    }
    let partner: Vec<f64> = transform(phi, cost, Side::RowToCol)?.into_iter().map(|v| v.min(0.0)).collect();
    Ok(weighted_sum(phi, mu.weights()) + weighted_sum(&partner, nu.weights()))
}

/// Exact adaptive mass and objective for the cost `C - t` at each grid
/// point. Each point is solved from scratch.
pub fn mass_shift_curve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    t_grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite()) {
        return Err(AotError::Validation(format!("shift grid value {t} is not finite")));
    }
    t_grid
        .iter()
        .map(|&t| {
            let r = solve_aot_exact(mu, nu, &cost.shifted(-t))?;
            Ok(SweepPoint {
                parameter: t,
                mass: r.mass(),
                objective: r.objective(),
            })
        })
        .collect()
}
