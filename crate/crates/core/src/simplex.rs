//! Network simplex for the balanced transportation problem
//!
//! ```text
//! min <x, c>  s.t.  sum_j x_ij = supply_i,  sum_i x_ij = demand_j,  x >= 0
//! ```
//!
//! A basis is a spanning tree of `n + m - 1` cells of the bipartite graph
//! (rows are nodes `0..n`, columns are nodes `n..n+m`). The initial basis
//! is the north-west corner staircase, which is a spanning tree even when
//! some supplies or demands are zero (degenerate cells carry flow 0).
//!
//! Pricing and ratio test both follow Bland's rule over the lexicographic
//! `(row, column)` order: the first cell with negative reduced cost enters,
//! and among blocking cells the lowest-indexed one leaves. This terminates
//! in exact arithmetic; the pivot cap turns float cycling into an error.

use ndarray::Array2;

use crate::error::{AotError, Result};

/// Pivot cap per basis cell.
pub const PIVOT_LIMIT_FACTOR: usize = 50;

#[derive(Debug, Clone)]
pub(crate) struct TransportationSolution {
    pub flow: Array2<f64>,
    /// Row potentials, `u[0] = 0`.
    pub u: Vec<f64>,
    /// Column potentials.
    pub v: Vec<f64>,
    pub pivots: usize,
}

struct Basis {
    n: usize,
    m: usize,
    cells: Vec<(usize, usize)>,
    in_basis: Array2<bool>,
    flow: Array2<f64>,
}

impl Basis {
    fn north_west_corner(supply: &[f64], demand: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut flow = Array2::zeros((n, m));
        let mut in_basis = Array2::from_elem((n, m), false);
        let mut cells = Vec::with_capacity(n + m - 1);
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = a[i].min(b[j]).max(0.0);
            flow[[i, j]] = x;
            in_basis[[i, j]] = true;
            cells.push((i, j));
            a[i] -= x;
            b[j] -= x;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if j == m - 1 || (i < n - 1 && a[i] <= b[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(cells.len(), n + m - 1);
        Self {
            n,
            m,
            cells,
            in_basis,
            flow,
        }
    }

    /// Adjacency of the basis tree: node -> list of (neighbour, cell index).
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.n + j, k));
            adj[self.n + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, cost: &Array2<f64>, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; self.n + self.m];
        let mut seen = vec![false; self.n + self.m];
        let mut stack = vec![0usize];
        pot[0] = 0.0;
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for &(next, k) in &adj[node] {
                if seen[next] {
                    continue;
                }
                let (i, j) = self.cells[k];
                // u_i + v_j = c_ij on every basic cell
                pot[next] = cost[[i, j]] - pot[node];
                seen[next] = true;
                stack.push(next);
            }
        }
        let v = pot.split_off(self.n);
        (pot, v)
    }

    /// Tree path from row `i` to column `j` as cell indices, ordered from
    /// the column end.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let total = self.n + self.m;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut seen = vec![false; total];
        let mut queue = std::collections::VecDeque::from([i]);
        seen[i] = true;
        let target = self.n + j;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, k) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != i {
            let (prev, k) = parent[node].expect("basis is a spanning tree");
            path.push(k);
            node = prev;
        }
        path
    }
}

pub(crate) fn solve_transportation(
    supply: &[f64],
    demand: &[f64],
    cost: &Array2<f64>,
) -> Result<TransportationSolution> {
    let (n, m) = cost.dim();
    debug_assert_eq!((supply.len(), demand.len()), (n, m));

    let scale = cost.iter().fold(1.0_f64, |acc, c| acc.max(c.abs()));
    let eps = 1e-11 * scale;
    let limit = PIVOT_LIMIT_FACTOR * n * m;

    let mut basis = Basis::north_west_corner(supply, demand);
    let mut pivots = 0;
    loop {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(cost, &adj);

        let entering = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .find(|&(i, j)| !basis.in_basis[[i, j]] && cost[[i, j]] - u[i] - v[j] < -eps);
        let Some((ei, ej)) = entering else {
            return Ok(TransportationSolution {
                flow: basis.flow,
                u,
                v,
                pivots,
            });
        };
        if pivots >= limit {
            return Err(AotError::Convergence {
                iterations: pivots,
                residual: -(cost[[ei, ej]] - u[ei] - v[ej]),
            });
        }

        // Cells on the path alternate -, +, -, ... starting at the column end;
        // the entering cell closes the cycle with a +.
        let path = basis.path(&adj, ei, ej);
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for &k in path.iter().step_by(2) {
            let cell = basis.cells[k];
            let f = basis.flow[[cell.0, cell.1]];
            let better = match leaving {
                None => true,
                Some(l) => f < theta || (f == theta && cell < basis.cells[l]),
            };
            if better {
                theta = f;
                leaving = Some(k);
            }
        }
        let leaving = leaving.expect("cycle has a blocking cell");

        for (pos, &k) in path.iter().enumerate() {
            let (i, j) = basis.cells[k];
            if pos % 2 == 0 {
                basis.flow[[i, j]] -= theta;
            } else {
                basis.flow[[i, j]] += theta;
            }
        }
        let (li, lj) = basis.cells[leaving];
        basis.flow[[li, lj]] = 0.0;
        basis.in_basis[[li, lj]] = false;
        basis.flow[[ei, ej]] = theta;
        basis.in_basis[[ei, ej]] = true;
        basis.cells[leaving] = (ei, ej);
        pivots += 1;
    }
}
