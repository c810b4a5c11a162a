//! Quality measures used by tests and reports.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::DenseMatrix;
use crate::math;
use crate::neighbors::NeighborLists;
use crate::project2d::Point;

/// Mean fraction of each exact list recovered by the approximate one.
pub fn recall(approx: &NeighborLists, exact: &NeighborLists) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for (a, e) in approx.lists.iter().zip(&exact.lists) {
        total += e.len();
        hit += e.iter().filter(|x| a.iter().any(|y| y.id == x.id)).count();
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

/// Fraction of points whose cluster's majority label equals their own.
pub fn purity(assignment: &[u32], truth: &[u32]) -> f64 {
    if assignment.is_empty() {
        return 1.0;
    }
    let k = *assignment.iter().max().unwrap() as usize + 1;
    let t = *truth.iter().max().unwrap_or(&0) as usize + 1;
    let mut table = vec![0usize; k * t];
    for (&a, &g) in assignment.iter().zip(truth) {
        table[a as usize * t + g as usize] += 1;
    }
    let majority: usize = (0..k).map(|c| *table[c * t..(c + 1) * t].iter().max().unwrap()).sum();
    majority as f64 / assignment.len() as f64
}

/// Trustworthiness of a 2D embedding: penalizes low-dimensional neighbors
/// that are far in the original space, weighted by how far down the
/// original ranking they sit. 1 is perfect. Quadratic in `n`.
pub fn trustworthiness(high: &DenseMatrix, low: &[Point], k: usize) -> f64 {
    let n = high.rows();
    assert_eq!(n, low.len());
    assert!(k >= 1 && 2 * n > 3 * k + 1, "k too large for n");
    let mut penalty = 0.0f64;
    let mut rank = vec![0usize; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let dh: Vec<f64> = (0..n).map(|j| math::sq_dist(high.row(i), high.row(j))).collect();
        order.sort_by(|&a, &b| dh[a].total_cmp(&dh[b]).then(a.cmp(&b)));
        for (r, &j) in order.iter().enumerate() {
            rank[j] = r + 1;
        }
        let dl = |j: usize| {
            let dx = low[i][0] - low[j][0];
            let dy = low[i][1] - low[j][1];
            dx * dx + dy * dy
        };
        order.sort_by(|&a, &b| dl(a).total_cmp(&dl(b)).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}
