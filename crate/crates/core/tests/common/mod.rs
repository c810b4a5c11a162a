#![allow(dead_code)]

use cartomap_core::embed::LatentEmbedding;
use cartomap_core::linalg::DenseMatrix;
use cartomap_core::vectorize::SparseMatrix;
use cartomap_core::EntityType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller).
pub fn normal(r: &mut impl Rng) -> f64 {
    let u: f64 = 1.0 - r.gen::<f64>();
    let v: f64 = r.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn gaussian_embedding(kind: EntityType, n: usize, d: usize, seed: u64) -> LatentEmbedding {
    let mut r = rng(seed);
    let data = (0..n * d).map(|_| normal(&mut r)).collect();
    LatentEmbedding::new(kind, DenseMatrix::from_vec(n, d, data)).unwrap()
}

/// `blobs` isotropic clusters with unit spread around centers drawn at scale `sep`.
/// Returns the embedding and each row's blob.
pub fn blobs(n_per: usize, blobs: usize, d: usize, sep: f64, seed: u64) -> (LatentEmbedding, Vec<u32>) {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..blobs).map(|_| (0..d).map(|_| sep * normal(&mut r)).collect()).collect();
    let mut data = Vec::with_capacity(n_per * blobs * d);
    let mut truth = Vec::new();
    for i in 0..n_per * blobs {
        let b = i % blobs;
        truth.push(b as u32);
        data.extend(centers[b].iter().map(|c| c + normal(&mut r)));
    }
    let m = DenseMatrix::from_vec(n_per * blobs, d, data);
    (LatentEmbedding::new(EntityType::Article, m).unwrap(), truth)
}

/// Random sparse matrix with positive entries at the given density.
pub fn random_sparse(rows: usize, cols: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::new();
        for j in 0..cols as u32 {
            if r.gen::<f64>() < density {
                row.push((j, r.gen::<f64>() + 0.1));
            }
        }
        out.push(row);
    }
    let rows = out;
    SparseMatrix::from_rows(cols, rows).unwrap()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Quadratic scan ordered by (distance, id).
pub fn scan(q: &[f64], targets: &LatentEmbedding, k: usize, skip: Option<usize>) -> Vec<(u32, f64)> {
    let mut all: Vec<(u32, f64)> = (0..targets.len())
        .filter(|&j| Some(j) != skip)
        .map(|j| (j as u32, euclid(q, targets.row(j))))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn recall(approx: &cartomap_core::neighbors::NeighborLists, exact: &cartomap_core::neighbors::NeighborLists) -> f64 {
    let mut hit = 0;
    let mut total = 0;
    for (a, e) in approx.lists.iter().zip(&exact.lists) {
        let ids: std::collections::HashSet<u32> = a.iter().map(|n| n.id).collect();
        total += e.len();
        hit += e.iter().filter(|n| ids.contains(&n.id)).count();
    }
    hit as f64 / total as f64
}

/// Dense copy of a sparse matrix.
pub fn dense(m: &SparseMatrix) -> nalgebra::DMatrix<f64> {
    let mut a = nalgebra::DMatrix::zeros(m.n_rows(), m.n_cols());
    for i in 0..m.n_rows() {
        let (idx, vals) = m.row(i);
        for (&j, &v) in idx.iter().zip(vals) {
            a[(i, j as usize)] = v;
        }
    }
    a
}

/// Trustworthiness(k) from its definition over full rank tables.
pub fn trustworthiness(high: &DenseMatrix, low: &[[f64; 2]], k: usize) -> f64 {
    let n = high.rows();
    let mut sum = 0.0;
    for i in 0..n {
        let mut hi: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (euclid(high.row(i), high.row(j)), j)).collect();
        hi.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut rank = vec![0usize; n];
        for (r, &(_, j)) in hi.iter().enumerate() {
            rank[j] = r + 1;
        }
        let mut lo: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (euclid(&low[i], &low[j]), j)).collect();
        lo.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &lo[..k] {
            if rank[j] > k {
                sum += (rank[j] - k) as f64;
            }
        }
    }
    1.0 - 2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0)) * sum
}
