use std::collections::BTreeSet;
use std::f64::consts::TAU;

use ndarray::{Array2, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AotError, Result};

/// Feature rows with optional class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Option<Vec<usize>>, num_classes: usize) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(AotError::Validation("dataset features must be finite".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != features.nrows() {
                return Err(AotError::Shape(format!(
                    "{} labels for {} feature rows",
                    labels.len(),
                    features.nrows()
                )));
            }
            if let Some(l) = labels.iter().find(|&&l| l >= num_classes) {
                return Err(AotError::Validation(format!("label {l} out of range 0..{num_classes}")));
            }
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), indices),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            num_classes: self.num_classes,
        }
    }

    /// Same rows with the labels hidden.
    pub fn unlabeled(&self) -> LabeledDataset {
        LabeledDataset {
            labels: None,
            ..self.clone()
        }
    }
}

/// Synthetic shifted-blob scenario. Field names double as the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    #[serde(rename = "K")]
    pub num_classes: usize,
    #[serde(rename = "d")]
    pub dim: usize,
    /// Samples per class, both domains.
    pub per_class: usize,
    pub shift_vector: Vec<f64>,
    /// Rotation of the first two coordinates, radians.
    pub rotation_angle: f64,
    pub outlier_fraction: f64,
    pub missing_target_classes: BTreeSet<usize>,
    pub seed: u64,
    /// Distance of blob centers from the origin.
    pub center_radius: f64,
    /// Isotropic blob standard deviation.
    pub noise_std: f64,
    /// Angle between consecutive blob centers, radians. `null` spaces
    /// them evenly around the circle.
    pub center_spacing: Option<f64>,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            num_classes: 3,
            dim: 2,
            per_class: 100,
            shift_vector: vec![2.0, 0.0],
            rotation_angle: 30f64.to_radians(),
            outlier_fraction: 0.1,
            missing_target_classes: BTreeSet::new(),
            seed: 7,
            center_radius: 10.0,
            noise_std: 1.0,
            // uneven spacing lets the rotation carry blobs across the
            // source decision boundaries
            center_spacing: Some(50f64.to_radians()),
        }
    }
}

impl ShiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 1 || self.dim < 1 {
            return Err(AotError::Validation("K and d must be >= 1".into()));
        }
        if self.per_class < 1 {
            return Err(AotError::Validation("per_class must be >= 1".into()));
        }
        if self.shift_vector.len() != self.dim {
            return Err(AotError::Validation(format!(
                "shift_vector has {} entries, d = {}",
                self.shift_vector.len(),
                self.dim
            )));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(AotError::Validation(format!(
                "outlier_fraction must lie in [0, 1], got {}",
                self.outlier_fraction
            )));
        }
        if let Some(k) = self.missing_target_classes.iter().find(|&&k| k >= self.num_classes) {
            return Err(AotError::Validation(format!("missing class {k} out of range")));
        }
        if self.missing_target_classes.len() == self.num_classes {
            return Err(AotError::Validation("every target class is missing".into()));
        }
        if !(self.noise_std >= 0.0) || !self.center_radius.is_finite() || !self.rotation_angle.is_finite() {
            return Err(AotError::Validation("noise_std, center_radius and rotation_angle must be finite".into()));
        }
        if self.center_spacing.is_some_and(|a| !a.is_finite()) {
            return Err(AotError::Validation("center_spacing must be finite".into()));
        }
        Ok(())
    }

    /// Source blob centers: `center_spacing` apart on a circle in the first two
    /// coordinates (on a line when `d = 1`).
    pub fn source_centers(&self) -> Array2<f64> {
        let (k, d, r) = (self.num_classes, self.dim, self.center_radius);
        Array2::from_shape_fn((k, d), |(c, axis)| {
            if d == 1 {
                r * (c as f64 - (k as f64 - 1.0) / 2.0)
            } else {
                let angle = c as f64 * self.center_spacing.unwrap_or(TAU / k as f64);
                match axis {
                    0 => r * angle.cos(),
                    1 => r * angle.sin(),
                    _ => 0.0,
                }
            }
        })
    }

    /// Rotation of the first two coordinates followed by the shift.
    pub fn transform_point(&self, point: &mut [f64]) {
        if point.len() >= 2 {
            let (s, c) = self.rotation_angle.sin_cos();
            let (x, y) = (point[0], point[1]);
            point[0] = c * x - s * y;
            point[1] = s * x + c * y;
        }
        for (p, s) in point.iter_mut().zip(&self.shift_vector) {
            *p += s;
        }
    }

    pub fn target_centers(&self) -> Array2<f64> {
        let mut centers = self.source_centers();
        for mut row in centers.rows_mut() {
            self.transform_point(row.as_slice_mut().expect("standard layout"));
        }
        centers
    }
}

/// Output of [`generate_synthetic_shift`]. `target_outliers[i]` marks target
/// rows that were resampled uniformly over the bounding box; their labels
/// are the nearest transformed blob and serve evaluation only.
#[derive(Debug, Clone)]
pub struct ShiftedPair {
    pub source: LabeledDataset,
    pub target: LabeledDataset,
    pub target_outliers: Vec<bool>,
}

fn blob_samples(
    config: &ShiftConfig,
    classes: &[usize],
    rng: &mut ChaCha8Rng,
    transform: bool,
) -> (Array2<f64>, Vec<usize>) {
    let centers = config.source_centers();
    let d = config.dim;
    let mut features = Array2::zeros((classes.len() * config.per_class, d));
    let mut labels = Vec::with_capacity(features.nrows());
    let mut row = 0;
    for &k in classes {
        for _ in 0..config.per_class {
            let mut point: Vec<f64> = (0..d)
                .map(|a| {
                    let z: f64 = StandardNormal.sample(rng);
                    centers[[k, a]] + config.noise_std * z
                })
                .collect();
            if transform {
                config.transform_point(&mut point);
            }
            features.row_mut(row).assign(&ndarray::ArrayView1::from(&point));
            labels.push(k);
            row += 1;
        }
    }
    (features, labels)
}

pub fn generate_synthetic_shift(config: &ShiftConfig) -> Result<ShiftedPair> {
    config.validate()?;
    let all: Vec<usize> = (0..config.num_classes).collect();
    let present: Vec<usize> = all
        .iter()
        .copied()
        .filter(|k| !config.missing_target_classes.contains(k))
        .collect();

    let mut source_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut target_rng = ChaCha8Rng::seed_from_u64(config.seed);
    target_rng.set_stream(1);

    let (xs, ys) = blob_samples(config, &all, &mut source_rng, false);
    let (mut xt, mut yt) = blob_samples(config, &present, &mut target_rng, true);

    let n_target = xt.nrows();
    let n_outliers = (config.outlier_fraction * n_target as f64).round() as usize;
    let mut outliers = vec![false; n_target];
    if n_outliers > 0 {
        let lo: Vec<f64> = xt.columns().into_iter().map(|c| c.fold(f64::INFINITY, |a, &b| a.min(b))).collect();
        let hi: Vec<f64> = xt.columns().into_iter().map(|c| c.fold(f64::NEG_INFINITY, |a, &b| a.max(b))).collect();
        let centers = config.target_centers();
        let mut order: Vec<usize> = (0..n_target).collect();
        order.shuffle(&mut target_rng);
        for &i in &order[..n_outliers] {
            for a in 0..config.dim {
                xt[[i, a]] = if hi[a] > lo[a] { target_rng.random_range(lo[a]..hi[a]) } else { lo[a] };
            }
            yt[i] = nearest_center(xt.row(i).as_slice().expect("standard layout"), &centers, &present);
            outliers[i] = true;
        }
    }

    Ok(ShiftedPair {
        source: LabeledDataset::new(xs, Some(ys), config.num_classes)?,
        target: LabeledDataset::new(xt, Some(yt), config.num_classes)?,
        target_outliers: outliers,
    })
}

fn nearest_center(point: &[f64], centers: &Array2<f64>, classes: &[usize]) -> usize {
    let dist = |k: usize| -> f64 { point.iter().zip(centers.row(k)).map(|(p, c)| (p - c).powi(2)).sum() };
    *classes
        .iter()
        .min_by(|&&a, &&b| dist(a).total_cmp(&dist(b)))
        .expect("at least one class present")
}

/// `per_class` indices drawn without replacement from each class, shuffled.
pub fn stratified_batch<R: Rng + ?Sized>(
    labels: &[usize],
    num_classes: usize,
    per_class: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(AotError::Validation(format!("label {l} out of range 0..{num_classes}")));
        }
        by_class[l].push(i);
    }
    let mut batch = Vec::with_capacity(num_classes * per_class);
    for (k, members) in by_class.iter().enumerate() {
        if members.len() < per_class {
            return Err(AotError::Sampling(format!(
                "class {k} has {} samples, {per_class} requested",
                members.len()
            )));
        }
        batch.extend(members.choose_multiple(rng, per_class).copied());
    }
    batch.shuffle(rng);
    Ok(batch)
}
