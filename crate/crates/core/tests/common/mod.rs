//! Shared test helpers: an independent dense LP oracle, instance
//! generators and a finite-difference gradient check. The oracles never
//! call into the solvers under test.

#![allow(dead_code)]

use adaptive_ot::{CostMatrix, DiscreteMeasure};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PIVOT_EPS: f64 = 1e-12;

/// Solves `min c^T x  s.t.  A x <= b, x >= 0` with `b >= 0` by the textbook
/// dense tableau and Bland's rule, starting from the slack basis.
/// Returns `(value, x)`.
pub fn minimize_leq(c: &[f64], a: &Array2<f64>, b: &[f64]) -> (f64, Vec<f64>) {
    let (rows, vars) = a.dim();
    assert_eq!(c.len(), vars);
    assert_eq!(b.len(), rows);
    assert!(b.iter().all(|&v| v >= 0.0), "slack basis needs b >= 0");
    let width = vars + rows + 1;
    // rows 0..rows are constraints, the last row holds reduced costs
    let mut t = Array2::<f64>::zeros((rows + 1, width));
    for i in 0..rows {
        for j in 0..vars {
            t[[i, j]] = a[[i, j]];
        }
        t[[i, vars + i]] = 1.0;
        t[[i, width - 1]] = b[i];
    }
    for j in 0..vars {
        t[[rows, j]] = c[j];
    }
    let mut basis: Vec<usize> = (vars..vars + rows).collect();

    for _ in 0..100_000 {
        let Some(enter) = (0..vars + rows).find(|&j| t[[rows, j]] < -PIVOT_EPS) else {
            let mut x = vec![0.0; vars];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < vars {
                    x[bv] = t[[i, width - 1]];
                }
            }
            let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
            return (value, x);
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let coef = t[[i, enter]];
            if coef > PIVOT_EPS {
                let ratio = t[[i, width - 1]] / coef;
                let better = match leave {
                    None => true,
                    Some((k, r)) => ratio < r - PIVOT_EPS || (ratio <= r + PIVOT_EPS && basis[i] < basis[k]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (pr, _) = leave.expect("bounded: every variable sits in some <= row");
        let pivot = t[[pr, enter]];
        for j in 0..width {
            t[[pr, j]] /= pivot;
        }
        for i in 0..=rows {
            if i != pr {
                let f = t[[i, enter]];
                if f != 0.0 {
                    for j in 0..width {
                        t[[i, j]] -= f * t[[pr, j]];
                    }
                }
            }
        }
        basis[pr] = enter;
    }
    panic!("oracle simplex did not terminate");
}

/// Explicit inequality LP of the adaptive problem.
pub fn oracle_aot(mu: &[f64], nu: &[f64], cost: &Array2<f64>) -> (f64, Array2<f64>) {
    let (n, m) = cost.dim();
    let mut a = Array2::zeros((n + m, n * m));
    for i in 0..n {
        for j in 0..m {
            a[[i, i * m + j]] = 1.0;
            a[[n + j, i * m + j]] = 1.0;
        }
    }
    let b: Vec<f64> = mu.iter().chain(nu).copied().collect();
    let c: Vec<f64> = cost.iter().copied().collect();
    let (value, x) = minimize_leq(&c, &a, &b);
    (value, Array2::from_shape_vec((n, m), x).unwrap())
}

/// Balanced full-mass transport through the adaptive LP: with every cost
/// lowered below zero by more than its spread, any plan short of full mass
/// can be extended at a profit, so `OT(C) = AOT(C - K) + K * total`.
pub fn oracle_kantorovich(mu: &[f64], nu: &[f64], cost: &Array2<f64>) -> f64 {
    let spread = cost.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let k = 2.0 * spread + 1.0;
    let total: f64 = mu.iter().sum();
    oracle_aot(mu, nu, &cost.mapv(|v| v - k)).0 + k * total
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub cost: CostMatrix,
}

/// Sizes uniform in `lo..=hi`, costs uniform in `[-1, 1]`, weights uniform
/// in `[0, 1)` with roughly one in ten set to zero.
pub fn random_instance(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Instance {
    let n = rng.random_range(lo..=hi);
    let m = rng.random_range(lo..=hi);
    let mut weights = |k: usize| -> Vec<f64> {
        (0..k)
            .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() })
            .collect()
    };
    let mu = weights(n);
    let nu = weights(m);
    let cost = Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..=1.0));
    Instance {
        mu: DiscreteMeasure::new(mu).unwrap(),
        nu: DiscreteMeasure::new(nu).unwrap(),
        cost: CostMatrix::new(cost).unwrap(),
    }
}

pub fn instances(seed: u64, count: usize, lo: usize, hi: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng, lo, hi)).collect()
}

/// Proptest strategy over instances with `n, m` in `1..=max`.
pub fn instance_strategy(max: usize) -> impl Strategy<Value = Instance> {
    (1..=max, 1..=max).prop_flat_map(|(n, m)| {
        let weight = prop_oneof![1 => Just(0.0), 9 => 0.0..1.0f64];
        (
            proptest::collection::vec(weight.clone(), n),
            proptest::collection::vec(weight, m),
            proptest::collection::vec(-1.0..=1.0f64, n * m),
        )
            .prop_map(move |(mu, nu, c)| Instance {
                mu: DiscreteMeasure::new(mu).unwrap(),
                nu: DiscreteMeasure::new(nu).unwrap(),
                cost: CostMatrix::new(Array2::from_shape_vec((n, m), c).unwrap()).unwrap(),
            })
    })
}

/// Maximum violation of `plan >= 0`, row sums `<= mu`, column sums `<= nu`.
pub fn max_violation(plan: &Array2<f64>, mu: &[f64], nu: &[f64]) -> f64 {
    let neg = plan.iter().fold(0.0f64, |a, &v| a.max(-v));
    let rows = plan.rows().into_iter().zip(mu).map(|(r, w)| r.sum() - w);
    let cols = plan.columns().into_iter().zip(nu).map(|(c, w)| c.sum() - w);
    rows.chain(cols).fold(neg, f64::max)
}

/// Adds `sum(x) <= cap` to the adaptive LP. With every cost lowered by
/// `K` larger than the cost spread, the optimum fills the cap, so
/// `POT(C, cap) = value + K * cap`.
pub fn oracle_pot(mu: &[f64], nu: &[f64], cost: &Array2<f64>, cap: f64) -> f64 {
    let (n, m) = cost.dim();
    let spread = cost.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let k = 2.0 * spread + 1.0;
    let mut a = Array2::zeros((n + m + 1, n * m));
    for i in 0..n {
        for j in 0..m {
            a[[i, i * m + j]] = 1.0;
            a[[n + j, i * m + j]] = 1.0;
            a[[n + m, i * m + j]] = 1.0;
        }
    }
    let b: Vec<f64> = mu.iter().chain(nu).copied().chain([cap]).collect();
    let c: Vec<f64> = cost.iter().map(|v| v - k).collect();
    minimize_leq(&c, &a, &b).0 + k * cap
}

/// Central finite differences of the fixed-plan loss against its analytic
/// gradient on a random three-class batch. Returns the largest
/// componentwise error relative to the largest finite-difference component.
pub fn gradient_relative_error(seed: u64) -> f64 {
    use adaptive_ot::alignment::{one_hot, FixedPlanObjective, LinearClassifier};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, d, ns, nt) = (3, 2, 6, 5);
    let xs = Array2::from_shape_fn((ns, d), |_| rng.random_range(-2.0..2.0));
    let zs = Array2::from_shape_fn((nt, d), |_| rng.random_range(-2.0..2.0));
    let labels: Vec<usize> = (0..ns).map(|i| i % k).collect();
    let p = one_hot(&labels, k);
    // entries below 1/(ns*nt) keep every marginal under the uniform weights
    let plan = Array2::from_shape_fn((ns, nt), |_| rng.random_range(0.0..1.0) / (ns * nt) as f64);
    let model = LinearClassifier {
        weights: Array2::from_shape_fn((k, d), |_| rng.random_range(-1.0..1.0)),
        bias: ndarray::Array1::from_shape_fn(k, |_| rng.random_range(-1.0..1.0)),
    };
    let objective = FixedPlanObjective {
        xs: xs.view(),
        p: p.view(),
        zs: zs.view(),
        plan: plan.view(),
        alpha: 0.01,
        beta: 1.8,
    };
    let (gw, gb) = objective.gradient(&model);
    let h = 1e-5;
    let loss = |m: &LinearClassifier| objective.loss(m).0;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for idx in 0..k * d {
        let (r, c) = (idx / d, idx % d);
        let (mut plus, mut minus) = (model.clone(), model.clone());
        plus.weights[[r, c]] += h;
        minus.weights[[r, c]] -= h;
        numeric.push((loss(&plus) - loss(&minus)) / (2.0 * h));
        analytic.push(gw[[r, c]]);
    }
    for r in 0..k {
        let (mut plus, mut minus) = (model.clone(), model.clone());
        plus.bias[r] += h;
        minus.bias[r] -= h;
        numeric.push((loss(&plus) - loss(&minus)) / (2.0 * h));
        analytic.push(gb[r]);
    }
    let scale = numeric.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / scale)
        .fold(0.0, f64::max)
}
