use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::data::{stratified_batch, LabeledDataset};
use crate::alignment::labelwise::labelwise_aggregate;
use crate::alignment::model::{build_alignment_cost, one_hot, FixedPlanObjective, LinearClassifier};
use crate::entropic::{solve_aot_sinkhorn, SinkhornConfig};
use crate::error::{AotError, Result};
use crate::exact::solve_aot_exact;
use crate::measures::{CostMatrix, DiscreteMeasure, SolveReport, TransportPlan};

/// Alternating training hyperparameters. Field names double as the JSON
/// schema; `epsilon = 0` switches the plan solver to the exact one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub batch_source: usize,
    pub batch_target: usize,
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 1.8,
            epsilon: 0.1,
            batch_source: 30,
            batch_target: 30,
            lr: 0.5,
            iterations: 400,
            seed: 11,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("epsilon", self.epsilon)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(AotError::Validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(AotError::Validation(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.batch_source < num_classes || !self.batch_source.is_multiple_of(num_classes) {
            return Err(AotError::Validation(format!(
                "batch_source {} must be a positive multiple of K = {num_classes}",
                self.batch_source
            )));
        }
        if self.batch_target < 1 {
            return Err(AotError::Validation("batch_target must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Total mass of the batch plan.
    pub mass: f64,
    /// `<plan, C>` of the batch.
    pub transport_cost: f64,
    /// Mean source cross-entropy before the step.
    pub source_loss: f64,
    /// Plan mass leaving each source class.
    pub source_class_mass: Vec<f64>,
    /// Sweeps (entropic) or pivots (exact) spent on the batch plan.
    pub solver_iterations: usize,
}

/// Plan and labels of the last batch, kept for heatmaps.
#[derive(Debug, Clone)]
pub struct BatchSnapshot {
    pub plan: TransportPlan,
    pub source_labels: Vec<usize>,
    pub target_predicted: Vec<usize>,
    /// Ground truth of the target batch, evaluation only.
    pub target_true: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingHistory {
    pub records: Vec<IterationRecord>,
    pub last_batch: Option<BatchSnapshot>,
}

impl TrainingHistory {
    /// Mean batch mass over the last `window` iterations.
    pub fn mean_mass_tail(&self, window: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(window)..];
        tail.iter().map(|r| r.mass).sum::<f64>() / tail.len().max(1) as f64
    }

    /// Per-class source marginal averaged over the last `window` iterations.
    pub fn mean_source_class_mass_tail(&self, window: usize) -> Vec<f64> {
        let tail = &self.records[self.records.len().saturating_sub(window)..];
        let k = tail.first().map_or(0, |r| r.source_class_mass.len());
        (0..k)
            .map(|c| tail.iter().map(|r| r.source_class_mass[c]).sum::<f64>() / tail.len() as f64)
            .collect()
    }
}

const BATCH_TOL: f64 = 1e-4;
const BATCH_MAX_ITER: usize = 100_000;

fn solve_batch_plan(cost: &CostMatrix, ns: usize, nt: usize, epsilon: f64) -> Result<SolveReport> {
    let mu = DiscreteMeasure::uniform(ns)?;
    let nu = DiscreteMeasure::uniform(nt)?;
    let report = if epsilon == 0.0 {
        solve_aot_exact(&mu, &nu, cost)?
    } else {
        solve_aot_sinkhorn(&mu, &nu, cost, &SinkhornConfig { epsilon, tol: BATCH_TOL, max_iter: BATCH_MAX_ITER })?
    };
    Ok(report)
}

fn check_inputs(source: &LabeledDataset, target: &LabeledDataset, config: &TrainConfig) -> Result<Vec<usize>> {
    let labels = source
        .labels
        .clone()
        .ok_or_else(|| AotError::Validation("source dataset must be labeled".into()))?;
    if source.dim() != target.dim() {
        return Err(AotError::Shape(format!(
            "source dimension {} != target dimension {}",
            source.dim(),
            target.dim()
        )));
    }
    config.validate(source.num_classes)?;
    if config.batch_target > target.len() {
        return Err(AotError::Sampling(format!(
            "target batch {} exceeds target size {}",
            config.batch_target,
            target.len()
        )));
    }
    Ok(labels)
}

/// Alternates an adaptive-transport plan solve on each mini-batch with one
/// gradient step on the classifier while that plan is held fixed. Target
/// labels, if any, are never read except to record the last batch.
pub fn train_aot_classifier(
    source: &LabeledDataset,
    target: &LabeledDataset,
    config: &TrainConfig,
) -> Result<(LinearClassifier, TrainingHistory)> {
    let source_labels = check_inputs(source, target, config)?;
    let k = source.num_classes;
    let per_class = config.batch_source / k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = LinearClassifier::zeros(k, source.dim());
    let mut history = TrainingHistory::default();

    for iteration in 0..config.iterations {
        let s_idx = stratified_batch(&source_labels, k, per_class, &mut rng)?;
        let t_idx = sample(&mut rng, target.len(), config.batch_target).into_vec();
        let batch_s = source.select(&s_idx);
        let batch_t = target.select(&t_idx);
        let ys = batch_s.labels.clone().expect("source is labeled");
        let p = one_hot(&ys, k);

        let q_t = model.probabilities(batch_t.features.view());
        if q_t.iter().any(|v| !v.is_finite()) {
            return Err(AotError::Divergence { iteration });
        }
        let cost = build_alignment_cost(
            batch_s.features.view(),
            batch_t.features.view(),
            p.view(),
            q_t.view(),
            config.alpha,
            config.beta,
        )?;
        let report = solve_batch_plan(&cost, s_idx.len(), t_idx.len(), config.epsilon)?;
        let solver_iterations = report.iterations;
        let plan = report.plan;

        let objective = FixedPlanObjective {
            xs: batch_s.features.view(),
            p: p.view(),
            zs: batch_t.features.view(),
            plan: plan.mass().view(),
            alpha: config.alpha,
            beta: config.beta,
        };
        let (total, transport, ce) = objective.loss(&model);
        if !total.is_finite() {
            return Err(AotError::Divergence { iteration });
        }
        let (gw, gb) = objective.gradient(&model);
        model.weights.scaled_add(-config.lr, &gw);
        model.bias.scaled_add(-config.lr, &gb);
        if !model.is_finite() {
            return Err(AotError::Divergence { iteration });
        }

        let predicted = model_predictions(&q_t);
        let agg = labelwise_aggregate(&plan, &ys, &predicted, k)?;
        history.records.push(IterationRecord {
            iteration,
            mass: plan.total_mass(),
            transport_cost: transport,
            source_loss: ce,
            source_class_mass: agg.source_marginals,
            solver_iterations,
        });
        if iteration + 1 == config.iterations {
            history.last_batch = Some(BatchSnapshot {
                plan,
                source_labels: ys,
                target_predicted: predicted,
                target_true: batch_t.labels,
            });
        }
    }
    Ok((model, history))
}

fn model_predictions(q: &Array2<f64>) -> Vec<usize> {
    q.rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 { (c, v) } else { best })
                .0
        })
        .collect()
}

/// Source-only baseline: the same stratified batches and step rule with
/// the transport term removed.
pub fn train_source_only(source: &LabeledDataset, config: &TrainConfig) -> Result<LinearClassifier> {
    let labels = source
        .labels
        .clone()
        .ok_or_else(|| AotError::Validation("source dataset must be labeled".into()))?;
    config.validate(source.num_classes)?;
    let k = source.num_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = LinearClassifier::zeros(k, source.dim());
    let empty = Array2::zeros((0, source.dim()));
    let no_plan = Array2::zeros((config.batch_source, 0));
    for iteration in 0..config.iterations {
        let s_idx = stratified_batch(&labels, k, config.batch_source / k, &mut rng)?;
        let batch = source.select(&s_idx);
        let p = one_hot(batch.labels.as_ref().expect("labeled"), k);
        let objective = FixedPlanObjective {
            xs: batch.features.view(),
            p: p.view(),
            zs: empty.view(),
            plan: no_plan.view(),
            alpha: 0.0,
            beta: 0.0,
        };
        let (gw, gb) = objective.gradient(&model);
        model.weights.scaled_add(-config.lr, &gw);
        model.bias.scaled_add(-config.lr, &gb);
        if !model.is_finite() {
            return Err(AotError::Divergence { iteration });
        }
    }
    Ok(model)
}
