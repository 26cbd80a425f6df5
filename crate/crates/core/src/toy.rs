//! The six-by-five worked instance: uniform marginals, two negative-cost
//! clusters, and one outlier atom on each side.

use ndarray::Array2;

use crate::measures::{CostMatrix, DiscreteMeasure, TransportPlan};

pub const COST: [[f64; 5]; 6] = [
    [-1.0, -1.0, 1.0, 1.0, 3.0],
    [-1.0, -1.0, 2.0, 1.0, 1.0],
    [-1.0, -1.0, 1.0, 1.0, 2.0],
    [2.0, 3.0, -1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0, -1.0, 3.0],
    [1.0, 3.0, 2.0, 1.0, 2.0],
];

/// Optimal transported mass of the instance.
pub const OPTIMAL_MASS: f64 = 11.0 / 15.0;

pub fn mu() -> DiscreteMeasure {
    DiscreteMeasure::uniform(6).expect("nonempty")
}

pub fn nu() -> DiscreteMeasure {
    DiscreteMeasure::uniform(5).expect("nonempty")
}

pub fn cost() -> CostMatrix {
    CostMatrix::new(Array2::from_shape_fn((6, 5), |(i, j)| COST[i][j])).expect("finite")
}

/// One optimal plan: `1/15` on the first cluster block, `1/12` on the second.
pub fn printed_plan() -> TransportPlan {
    let plan = Array2::from_shape_fn((6, 5), |(i, j)| match (i, j) {
        (0..=2, 0..=1) => 1.0 / 15.0,
        (3..=4, 2..=3) => 1.0 / 12.0,
        _ => 0.0,
    });
    TransportPlan::new(plan).expect("nonnegative")
}
