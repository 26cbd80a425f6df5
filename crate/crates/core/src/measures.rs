//! Value types shared by every solver: discrete measures, cost matrices,
//! transport plans and dual potentials, plus plan summarization against the
//! inequality marginal constraints `row_sum <= mu`, `col_sum <= nu`.
//!
//! Indices are 0-based everywhere in the library. Human-facing reports add 1.

use ndarray::{Array2, Axis};

use crate::error::{AotError, Result};

/// Default tolerance (mass units) for feasibility and saturation tests.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Nonnegative weights over indexed atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    total: f64,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(AotError::Validation("measure must have at least one atom".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(AotError::Validation(format!("weight {i} is not finite ({w})")));
            }
            if w < 0.0 {
                return Err(AotError::Validation(format!("weight {i} is negative ({w})")));
            }
        }
        let total = weights.iter().sum();
        Ok(Self { weights, total })
    }

    /// `n` atoms of mass `1/n` each.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(AotError::Validation("measure must have at least one atom".into()));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Same atoms with one extra atom of mass `extra` appended.
    pub fn with_extra_atom(&self, extra: f64) -> Result<Self> {
        let mut weights = self.weights.clone();
        weights.push(extra);
        Self::new(weights)
    }
}

/// Alias of [`DiscreteMeasure::new`].
pub fn make_measure(weights: Vec<f64>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(weights)
}

/// Dense per-unit transport costs. Entries may have either sign.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(AotError::Validation("cost matrix must be nonempty".into()));
        }
        if let Some(((i, j), v)) = entries.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(AotError::Validation(format!("cost entry ({i}, {j}) is not finite ({v})")));
        }
        Ok(Self { entries })
    }

    /// Builds a cost from row vectors; ragged input is rejected.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(AotError::Validation(format!(
                "ragged cost matrix: row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let entries = Array2::from_shape_vec((rows.len(), ncols), flat)
            .map_err(|e| AotError::Validation(e.to_string()))?;
        Self::new(entries)
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// `max(-C)` clamped below at zero: the smallest shift making the cost
    /// nonnegative.
    pub fn lambda_c(&self) -> f64 {
        (-self.min()).max(0.0)
    }

    /// `C + shift` entrywise.
    pub fn shifted(&self, shift: f64) -> CostMatrix {
        CostMatrix {
            entries: self.entries.mapv(|v| v + shift),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|&v| v >= 0.0)
    }
}

/// Alias of [`CostMatrix::from_rows`].
pub fn make_cost(rows: &[Vec<f64>]) -> Result<CostMatrix> {
    CostMatrix::from_rows(rows)
}

/// Nonnegative coupling together with its marginals and total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    mass: Array2<f64>,
    row_marginals: Vec<f64>,
    col_marginals: Vec<f64>,
    total_mass: f64,
}

impl TransportPlan {
    pub fn new(mass: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), v)) = mass.indexed_iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(AotError::Validation(format!(
                "plan entry ({i}, {j}) must be finite and nonnegative, got {v}"
            )));
        }
        Ok(Self::from_nonnegative(mass))
    }

    /// Solvers clamp their own round-off before calling this.
    pub(crate) fn from_nonnegative(mass: Array2<f64>) -> Self {
        let row_marginals = mass.sum_axis(Axis(1)).to_vec();
        let col_marginals = mass.sum_axis(Axis(0)).to_vec();
        let total_mass = row_marginals.iter().sum();
        Self {
            mass,
            row_marginals,
            col_marginals,
            total_mass,
        }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self::from_nonnegative(Array2::zeros((n, m)))
    }

    pub fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    pub fn into_mass(self) -> Array2<f64> {
        self.mass
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mass[[i, j]]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mass.dim()
    }

    pub fn row_marginals(&self) -> &[f64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[f64] {
        &self.col_marginals
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Frobenius inner product with a cost of the same shape.
    pub fn cost_against(&self, cost: &CostMatrix) -> Result<f64> {
        if self.shape() != cost.shape() {
            return Err(shape_mismatch("plan", self.shape(), "cost", cost.shape()));
        }
        Ok((&self.mass * cost.entries()).sum())
    }
}

/// Per-atom dual variables. Feasibility for the adaptive problem
/// (`phi <= 0`, `psi <= 0`, `phi_i + psi_j <= C_ij`) is checked by
/// [`crate::analysis::dual_report`], never enforced here.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl DualPotentials {
    pub fn new(phi: Vec<f64>, psi: Vec<f64>) -> Self {
        Self { phi, psi }
    }

    /// `sum phi_i mu_i + sum psi_j nu_j`. Atoms of zero weight contribute
    /// nothing even when their potential is `-inf`.
    pub fn value(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        weighted_sum(&self.phi, mu.weights()) + weighted_sum(&self.psi, nu.weights())
    }
}

pub(crate) fn weighted_sum(potential: &[f64], weights: &[f64]) -> f64 {
    potential
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(p, w)| p * w)
        .sum()
}

/// Objective, mass and marginal slack of a plan against `(mu, nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalReport {
    pub objective: f64,
    pub mass: f64,
    /// `mu_i - row_sum_i`
    pub row_slack: Vec<f64>,
    /// `nu_j - col_sum_j`
    pub col_slack: Vec<f64>,
    pub saturated_rows: Vec<usize>,
    pub saturated_cols: Vec<usize>,
    pub max_violation: f64,
    pub tol: f64,
}

impl MarginalReport {
    pub fn is_feasible(&self) -> bool {
        self.max_violation <= self.tol
    }
}

pub fn summarize_plan(
    plan: &TransportPlan,
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<MarginalReport> {
    check_problem_shape(mu, nu, cost)?;
    let objective = plan.cost_against(cost)?;

    let row_slack: Vec<f64> = mu
        .weights()
        .iter()
        .zip(plan.row_marginals())
        .map(|(w, r)| w - r)
        .collect();
    let col_slack: Vec<f64> = nu
        .weights()
        .iter()
        .zip(plan.col_marginals())
        .map(|(w, c)| w - c)
        .collect();
    let saturated = |slack: &[f64]| -> Vec<usize> {
        slack
            .iter()
            .enumerate()
            .filter(|(_, s)| s.abs() <= tol)
            .map(|(i, _)| i)
            .collect()
    };

    let max_violation = row_slack
        .iter()
        .chain(&col_slack)
        .map(|s| -s)
        .chain(plan.mass().iter().map(|v| -v))
        .fold(0.0, f64::max);

    Ok(MarginalReport {
        objective,
        mass: plan.total_mass(),
        saturated_rows: saturated(&row_slack),
        saturated_cols: saturated(&col_slack),
        row_slack,
        col_slack,
        max_violation,
        tol,
    })
}

/// Output of every solver in the crate.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub plan: TransportPlan,
    pub summary: MarginalReport,
    pub duals: Option<DualPotentials>,
    pub duality_gap: Option<f64>,
    /// Simplex pivots or Sinkhorn sweeps.
    pub iterations: usize,
    /// `<plan, C> + eps * sum plan (log plan - 1)`, entropic solver only.
    pub entropic_objective: Option<f64>,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        self.summary.objective
    }

    pub fn mass(&self) -> f64 {
        self.summary.mass
    }
}

pub(crate) fn shape_mismatch(
    a: &str,
    a_shape: (usize, usize),
    b: &str,
    b_shape: (usize, usize),
) -> AotError {
    AotError::Shape(format!("{a} is {}x{} but {b} is {}x{}", a_shape.0, a_shape.1, b_shape.0, b_shape.1))
}

pub(crate) fn check_problem_shape(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
) -> Result<()> {
    if cost.shape() != (mu.len(), nu.len()) {
        return Err(shape_mismatch("cost", cost.shape(), "(mu, nu)", (mu.len(), nu.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;
    use ndarray::array;

    #[test]
    fn uniform_sixths_total_one() {
        let mu = make_measure(vec![1.0 / 6.0; 6]).unwrap();
        assert!((mu.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_atoms_retained() {
        let mu = make_measure(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(mu.len(), 3);
        assert_eq!(mu.total(), 1.0);
    }

    #[test]
    fn negative_or_nonfinite_weight_rejected() {
        assert!(matches!(make_measure(vec![1.0, -1.0]), Err(AotError::Validation(_))));
        assert!(matches!(make_measure(vec![f64::NAN]), Err(AotError::Validation(_))));
        assert!(matches!(make_measure(vec![]), Err(AotError::Validation(_))));
    }

    #[test]
    fn lambda_c_values() {
        assert_eq!(toy::cost().lambda_c(), 1.0);
        let pos = make_cost(&[vec![1.0, 2.0], vec![0.5, 3.0]]).unwrap();
        assert_eq!(pos.lambda_c(), 0.0);
        assert_eq!(make_cost(&[vec![-3.0]]).unwrap().lambda_c(), 3.0);
    }

    #[test]
    fn ragged_or_nonfinite_cost_rejected() {
        assert!(matches!(
            make_cost(&[vec![1.0, 2.0], vec![3.0]]),
            Err(AotError::Validation(_))
        ));
        assert!(matches!(make_cost(&[vec![f64::INFINITY]]), Err(AotError::Validation(_))));
    }

    #[test]
    fn printed_plan_summary() {
        let r = summarize_plan(&toy::printed_plan(), &toy::cost(), &toy::mu(), &toy::nu(), DEFAULT_TOL)
            .unwrap();
        assert!((r.mass - 11.0 / 15.0).abs() < 1e-12);
        assert!((r.objective + 11.0 / 15.0).abs() < 1e-12);
        assert_eq!(r.saturated_cols, vec![0, 1]);
        assert_eq!(r.saturated_rows, vec![3, 4]);
        assert!(r.is_feasible());
    }

    #[test]
    fn zero_plan_summary() {
        let r = summarize_plan(&TransportPlan::zeros(6, 5), &toy::cost(), &toy::mu(), &toy::nu(), DEFAULT_TOL)
            .unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.mass, 0.0);
        assert!(r.saturated_rows.is_empty() && r.saturated_cols.is_empty());
    }

    #[test]
    fn summary_shape_mismatch() {
        let plan = TransportPlan::zeros(2, 2);
        let err = summarize_plan(&plan, &toy::cost(), &toy::mu(), &toy::nu(), DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, AotError::Shape(_)));
    }

    #[test]
    fn overfull_plan_reports_violation() {
        let mu = make_measure(vec![0.5]).unwrap();
        let nu = make_measure(vec![1.0]).unwrap();
        let cost = make_cost(&[vec![-1.0]]).unwrap();
        let plan = TransportPlan::new(array![[0.75]]).unwrap();
        let r = summarize_plan(&plan, &cost, &mu, &nu, DEFAULT_TOL).unwrap();
        assert!((r.max_violation - 0.25).abs() < 1e-15);
        assert!(!r.is_feasible());
    }

    #[test]
    fn negative_plan_entry_rejected() {
        assert!(TransportPlan::new(array![[0.1, -0.1]]).is_err());
    }
}
