//! Exact minibatch optimal-transport pairing by the Hungarian method.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Largest batch accepted by [`minibatch_ot_assign`]; the solver is cubic in the batch size.
pub const MAX_OT_BATCH: usize = 512;

/// `perm[i]` is the target item paired with latent item `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OtPlan {
    perm: Vec<usize>,
}

impl OtPlan {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &j in &perm {
            if j >= perm.len() || seen[j] {
                return Err(Error::Invalid(format!("{perm:?} is not a permutation")));
            }
            seen[j] = true;
        }
        Ok(OtPlan { perm })
    }

    pub fn identity(n: usize) -> Self {
        OtPlan { perm: (0..n).collect() }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    /// `sum_i cost[i][perm[i]]`, accumulated in row order.
    pub fn cost(&self, cost: &[Vec<f64>]) -> f64 {
        self.perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
    }
}

/// Squared Euclidean distances `||x0_i - x1_j||^2`.
pub fn squared_distance_matrix(x0: &[Grid], x1: &[Grid]) -> Vec<Vec<f64>> {
    x0.iter()
        .map(|a| x1.iter().map(|b| a.data().iter().zip(b.data()).map(|(p, q)| (p - q) * (p - q)).sum()).collect())
        .collect()
}

/// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
/// paths with row/column potentials, `O(n^3)`).
pub fn hungarian(cost: &[Vec<f64>]) -> Result<OtPlan> {
    let n = cost.len();
    if cost.iter().any(|row| row.len() != n) {
        return Err(Error::Invalid("cost matrix must be square".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Invalid("cost matrix must be finite".into()));
    }
    // 1-based columns; column 0 is a virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < min_v[j] {
                    min_v[j] = reduced;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    OtPlan::new(perm)
}

/// Pairing of latent and target batch items minimizing total squared distance.
pub fn minibatch_ot_assign(x0: &[Grid], x1: &[Grid]) -> Result<OtPlan> {
    if x0.len() != x1.len() {
        return Err(Error::Invalid(format!("batch sizes differ: {} vs {}", x0.len(), x1.len())));
    }
    if x0.len() > MAX_OT_BATCH {
        return Err(Error::Invalid(format!("minibatch OT supports at most {MAX_OT_BATCH} items, got {}", x0.len())));
    }
    hungarian(&squared_distance_matrix(x0, x1))
}
