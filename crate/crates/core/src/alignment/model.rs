use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::alignment::data::LabeledDataset;
use crate::error::{AotError, Result};
use crate::measures::CostMatrix;

/// Multinomial logistic regression: `q(x) = softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    /// `K x d`
    pub weights: Array2<f64>,
    /// length `K`
    pub bias: Array1<f64>,
}

impl LinearClassifier {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        Self {
            weights: Array2::zeros((num_classes, dim)),
            bias: Array1::zeros(num_classes),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn logits(&self, features: ArrayView2<f64>) -> Array2<f64> {
        features.dot(&self.weights.t()) + &self.bias
    }

    /// Row-wise class probabilities, `n x K`.
    pub fn probabilities(&self, features: ArrayView2<f64>) -> Array2<f64> {
        let mut s = self.logits(features);
        for mut row in s.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - max).exp());
            let z = row.sum();
            row /= z;
        }
        s
    }

    pub fn predict(&self, features: ArrayView2<f64>) -> Vec<usize> {
        self.logits(features)
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> Array2<f64> {
    let mut p = Array2::zeros((labels.len(), num_classes));
    for (i, &l) in labels.iter().enumerate() {
        p[[i, l]] = 1.0;
    }
    p
}

fn squared_distances(xs: ArrayView2<f64>, zs: ArrayView2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((xs.nrows(), zs.nrows()), |(i, j)| {
        xs.row(i).iter().zip(zs.row(j)).map(|(a, b)| (a - b).powi(2)).sum()
    })
}

/// `C_ij = alpha * |x_i - z_j|^2 - beta * <p_i, q_j>`.
pub fn build_alignment_cost(
    xs: ArrayView2<f64>,
    zs: ArrayView2<f64>,
    p: ArrayView2<f64>,
    q: ArrayView2<f64>,
    alpha: f64,
    beta: f64,
) -> Result<CostMatrix> {
    if xs.ncols() != zs.ncols() {
        return Err(AotError::Shape(format!(
            "source features have dimension {}, target {}",
            xs.ncols(),
            zs.ncols()
        )));
    }
    if p.nrows() != xs.nrows() || q.nrows() != zs.nrows() || p.ncols() != q.ncols() {
        return Err(AotError::Shape(format!(
            "label matrices {:?} / {:?} do not match batches of {} and {}",
            p.dim(),
            q.dim(),
            xs.nrows(),
            zs.nrows()
        )));
    }
    if let Some((j, s)) = q.sum_axis(Axis(1)).iter().enumerate().find(|(_, s)| (**s - 1.0).abs() > 1e-6) {
        return Err(AotError::Validation(format!("q row {j} sums to {s}, expected 1")));
    }
    let cost = alpha * squared_distances(xs, zs) - beta * p.dot(&q.t());
    CostMatrix::new(cost)
}

/// Training objective with the plan held fixed:
/// `sum_ij plan_ij * C_ij(theta) + mean_i CE(p_i, q(x_i))`.
pub struct FixedPlanObjective<'a> {
    pub xs: ArrayView2<'a, f64>,
    pub p: ArrayView2<'a, f64>,
    pub zs: ArrayView2<'a, f64>,
    pub plan: ArrayView2<'a, f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl FixedPlanObjective<'_> {
    /// Returns `(total, transport term, source cross-entropy)`.
    pub fn loss(&self, model: &LinearClassifier) -> (f64, f64, f64) {
        let qs = model.probabilities(self.xs);
        let qt = model.probabilities(self.zs);
        let ce = -(&self.p * &qs.mapv(f64::ln)).sum() / self.xs.nrows() as f64;
        let cost = self.alpha * squared_distances(self.xs, self.zs) - self.beta * self.p.dot(&qt.t());
        let transport = (&self.plan * &cost).sum();
        (transport + ce, transport, ce)
    }

    /// Gradient of [`Self::loss`] with respect to `(weights, bias)`.
    pub fn gradient(&self, model: &LinearClassifier) -> (Array2<f64>, Array1<f64>) {
        let qs = model.probabilities(self.xs);
        let qt = model.probabilities(self.zs);
        // d CE / d logits = (q - p) / n
        let g_source = (&qs - &self.p) / self.xs.nrows() as f64;
        // d(-beta w^T softmax(s)) / ds = -beta q (w - <w, q>) with w_j = sum_i plan_ij p_i
        let w = self.plan.t().dot(&self.p);
        let wq = (&w * &qt).sum_axis(Axis(1)).insert_axis(Axis(1));
        let g_target = -self.beta * &qt * &(&w - &wq);
        let grad_w = g_source.t().dot(&self.xs) + g_target.t().dot(&self.zs);
        let grad_b = g_source.sum_axis(Axis(0)) + g_target.sum_axis(Axis(0));
        (grad_w, grad_b)
    }
}

/// Fraction of rows whose argmax prediction equals the label.
pub fn evaluate_accuracy(model: &LinearClassifier, dataset: &LabeledDataset) -> Result<f64> {
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| AotError::Validation("accuracy needs a labeled dataset".into()))?;
    if labels.is_empty() {
        return Err(AotError::Validation("accuracy needs a nonempty dataset".into()));
    }
    let correct = model
        .predict(dataset.features.view())
        .iter()
        .zip(labels)
        .filter(|(a, b)| a == b)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pure_label_cost() {
        let xs = array![[0.0, 0.0], [5.0, 5.0]];
        let zs = array![[1.0, 1.0], [9.0, 0.0], [3.0, 3.0]];
        let p = one_hot(&[0, 1], 2);
        let q = one_hot(&[1, 0, 1], 2);
        let c = build_alignment_cost(xs.view(), zs.view(), p.view(), q.view(), 0.0, 1.0).unwrap();
        assert_eq!(c.entries(), &array![[0.0, -1.0, 0.0], [-1.0, 0.0, -1.0]]);
    }

    #[test]
    fn pure_feature_cost() {
        let xs = array![[0.0, 0.0]];
        let zs = array![[3.0, 4.0]];
        let p = one_hot(&[0], 2);
        let q = array![[0.5, 0.5]];
        let c = build_alignment_cost(xs.view(), zs.view(), p.view(), q.view(), 1.0, 0.0).unwrap();
        assert_eq!(c.get(0, 0), 25.0);
    }

    #[test]
    fn default_weights_bound_entries() {
        let xs = array![[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]];
        let zs = array![[1.0, 1.0], [0.0, -2.0]];
        let p = one_hot(&[0, 1, 2], 3);
        let q = array![[0.2, 0.5, 0.3], [0.9, 0.05, 0.05]];
        let c = build_alignment_cost(xs.view(), zs.view(), p.view(), q.view(), 0.01, 1.8).unwrap();
        let max_d2 = 3.0f64.powi(2) + 2.5f64.powi(2);
        assert!(c.entries().iter().all(|&v| (-1.8..=0.01 * max_d2).contains(&v)));
    }

    #[test]
    fn cost_rejects_bad_shapes() {
        let xs = array![[0.0, 0.0]];
        let zs = array![[0.0]];
        let p = one_hot(&[0], 2);
        let q = array![[0.5, 0.5]];
        assert!(build_alignment_cost(xs.view(), zs.view(), p.view(), q.view(), 1.0, 1.0).is_err());
        let zs = array![[0.0, 1.0]];
        let bad_q = array![[0.7, 0.7]];
        assert!(build_alignment_cost(xs.view(), zs.view(), p.view(), bad_q.view(), 1.0, 1.0).is_err());
    }

    #[test]
    fn probabilities_sum_to_one() {
        let model = LinearClassifier {
            weights: array![[1.0, -2.0], [0.5, 0.5], [30.0, 1.0]],
            bias: array![0.1, 0.0, -3.0],
        };
        let q = model.probabilities(array![[1.0, 2.0], [-40.0, 3.0]].view());
        for s in q.sum_axis(Axis(1)) {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_cases() {
        let features = array![[-1.0], [1.0], [-2.0], [2.0]];
        let labels = vec![0, 1, 0, 1];
        let ds = LabeledDataset::new(features, Some(labels), 2).unwrap();
        let perfect = LinearClassifier {
            weights: array![[-1.0], [1.0]],
            bias: array![0.0, 0.0],
        };
        assert_eq!(evaluate_accuracy(&perfect, &ds).unwrap(), 1.0);
        let constant = LinearClassifier {
            weights: array![[0.0], [0.0]],
            bias: array![1.0, 0.0],
        };
        assert_eq!(evaluate_accuracy(&constant, &ds).unwrap(), 0.5);
        assert!(evaluate_accuracy(&perfect, &ds.unlabeled()).is_err());
    }
}
