use ndarray::{Array2, Axis};

use crate::error::{AotError, Result};
use crate::measures::TransportPlan;

/// Plan mass aggregated by class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelwisePlan {
    /// Entry `(a, b)` is the mass moved from source class `a` to target class `b`.
    pub matrix: Array2<f64>,
    pub source_marginals: Vec<f64>,
    pub target_marginals: Vec<f64>,
    pub source_mean: f64,
    pub target_mean: f64,
}

fn check_labels(labels: &[usize], expected: usize, k: usize, side: &str) -> Result<()> {
    if labels.len() != expected {
        return Err(AotError::Shape(format!(
            "{side} labels have length {}, plan has {expected}",
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= k) {
        return Err(AotError::Validation(format!("{side} label {l} out of range for K = {k}")));
    }
    Ok(())
}

pub fn labelwise_aggregate(
    plan: &TransportPlan,
    source_labels: &[usize],
    target_labels: &[usize],
    num_classes: usize,
) -> Result<LabelwisePlan> {
    if num_classes == 0 {
        return Err(AotError::Validation("K must be >= 1".into()));
    }
    let (n, m) = plan.shape();
    check_labels(source_labels, n, num_classes, "source")?;
    check_labels(target_labels, m, num_classes, "target")?;
    let mut matrix = Array2::zeros((num_classes, num_classes));
    for ((i, j), &g) in plan.mass().indexed_iter() {
        matrix[[source_labels[i], target_labels[j]]] += g;
    }
    let source_marginals = matrix.sum_axis(Axis(1)).to_vec();
    let target_marginals = matrix.sum_axis(Axis(0)).to_vec();
    let k = num_classes as f64;
    Ok(LabelwisePlan {
        source_mean: source_marginals.iter().sum::<f64>() / k,
        target_mean: target_marginals.iter().sum::<f64>() / k,
        matrix,
        source_marginals,
        target_marginals,
    })
}
