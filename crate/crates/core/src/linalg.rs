//! Small dense linear algebra kit: row-major matrices, Householder thin QR
//! and one-sided Jacobi SVD. Sized for the (d + p)-column panels of a
//! randomized SVD, not for general-purpose use.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::vectorize::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let orow = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let arow = self.row(r);
            let brow = other.row(r);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Largest absolute entry of `selfᵀ·self − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.t_matmul(self);
        let mut worst: f64 = 0.0;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(math::abs(g.get(i, j) - target));
            }
        }
        worst
    }
}

/// `a · b` for sparse `a`.
pub fn sparse_matmul(a: &SparseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.n_cols(), b.rows());
    let mut out = DenseMatrix::zeros(a.n_rows(), b.cols());
    for r in 0..a.n_rows() {
        let (cols, vals) = a.row(r);
        let orow = out.row_mut(r);
        for (&c, &v) in cols.iter().zip(vals) {
            for (o, &x) in orow.iter_mut().zip(b.row(c as usize)) {
                *o += v * x;
            }
        }
    }
    out
}

/// `aᵀ · b` for sparse `a`, without materializing the transpose.
pub fn sparse_t_matmul(a: &SparseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.n_rows(), b.rows());
    let mut out = DenseMatrix::zeros(a.n_cols(), b.cols());
    for r in 0..a.n_rows() {
        let (cols, vals) = a.row(r);
        let brow = b.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            for (o, &x) in out.row_mut(c as usize).iter_mut().zip(brow) {
                *o += v * x;
            }
        }
    }
    out
}

/// Householder thin QR of an m × n matrix with m ≥ n. Returns (Q: m × n, R: n × n).
pub fn thin_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n, "thin_qr needs rows >= cols");
    let mut work = a.clone();
    // reflector k is stored in column k below the diagonal (v[k] kept separately)
    let mut heads = vec![0.0; n];
    let mut betas = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n {
        let mut norm_sq = 0.0;
        for i in k..m {
            let v = work.get(i, k);
            norm_sq += v * v;
        }
        let norm = math::sqrt(norm_sq);
        if norm == 0.0 {
            betas[k] = 0.0;
            heads[k] = 0.0;
            continue;
        }
        let x0 = work.get(k, k);
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let v0 = x0 - alpha;
        // vᵀv = norm² - 2·x0·alpha + alpha² = 2·norm² - 2·x0·alpha
        let vtv = norm_sq - x0 * x0 + v0 * v0;
        heads[k] = v0;
        betas[k] = 2.0 / vtv;
        work.set(k, k, alpha);
        // apply to the trailing columns
        let tail = n - k - 1;
        if tail > 0 {
            w[..tail].iter_mut().for_each(|x| *x = 0.0);
            for i in k..m {
                let vi = if i == k { v0 } else { work.get(i, k) };
                let row = &work.data[i * n + k + 1..(i + 1) * n];
                for (wj, &x) in w[..tail].iter_mut().zip(row) {
                    *wj += vi * x;
                }
            }
            let beta = betas[k];
            for i in k..m {
                let vi = if i == k { v0 } else { work.get(i, k) };
                let f = beta * vi;
                let row = &mut work.data[i * n + k + 1..(i + 1) * n];
                for (x, &wj) in row.iter_mut().zip(&w[..tail]) {
                    *x -= f * wj;
                }
            }
        }
    }
    let mut r = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r.set(i, j, work.get(i, j));
        }
    }
    // accumulate Q = H_0 ... H_{n-1} applied to the first n identity columns
    let mut q = DenseMatrix::zeros(m, n);
    for i in 0..n {
        q.set(i, i, 1.0);
    }
    for k in (0..n).rev() {
        let beta = betas[k];
        if beta == 0.0 {
            continue;
        }
        let v0 = heads[k];
        let cols = n - k;
        w[..cols].iter_mut().for_each(|x| *x = 0.0);
        for i in k..m {
            let vi = if i == k { v0 } else { work.get(i, k) };
            let row = &q.data[i * n + k..(i + 1) * n];
            for (wj, &x) in w[..cols].iter_mut().zip(row) {
                *wj += vi * x;
            }
        }
        for i in k..m {
            let vi = if i == k { v0 } else { work.get(i, k) };
            let f = beta * vi;
            let row = &mut q.data[i * n + k..(i + 1) * n];
            for (x, &wj) in row.iter_mut().zip(&w[..cols]) {
                *x -= f * wj;
            }
        }
    }
    (q, r)
}

/// Singular value decomposition `a = u · diag(s) · vᵀ` of a square or tall
/// matrix by one-sided Jacobi rotations. Values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

pub fn jacobi_svd(a: &DenseMatrix) -> Svd {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n, "jacobi_svd needs rows >= cols");
    // column-major working copies so rotations touch contiguous memory
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = vec![0.0; n];
            c[j] = 1.0;
            c
        })
        .collect();
    let tol = 1e-15 * (n.max(1) as f64);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = math::dot(&cols[p], &cols[p]);
                let beta = math::dot(&cols[q], &cols[q]);
                let gamma = math::dot(&cols[p], &cols[q]);
                if gamma == 0.0 || math::abs(gamma) <= tol * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (math::abs(zeta) + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                let (lo, hi) = vcols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(usize, f64)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (j, math::sqrt(math::dot(c, c))))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let smax = order.first().map(|o| o.1).unwrap_or(0.0);

    let mut u = DenseMatrix::zeros(m, n);
    let mut v = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (out_j, &(j, sigma)) in order.iter().enumerate() {
        let ucol = if sigma > smax * 1e-13 && sigma > 0.0 {
            s.push(sigma);
            cols[j].iter().map(|x| x / sigma).collect()
        } else {
            s.push(0.0);
            complete_basis(&u_cols, m)
        };
        for i in 0..m {
            u.set(i, out_j, ucol[i]);
        }
        for i in 0..n {
            v.set(i, out_j, vcols[j][i]);
        }
        u_cols.push(ucol);
    }
    Svd { u, s, v }
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// A unit vector orthogonal to every column in `basis` (Gram-Schmidt on
/// the standard basis, twice for stability).
fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    for e in 0..m {
        let mut cand = vec![0.0; m];
        cand[e] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let proj = math::dot(&cand, b);
                for (c, &x) in cand.iter_mut().zip(b) {
                    *c -= proj * x;
                }
            }
        }
        let norm = math::sqrt(math::dot(&cand, &cand));
        if norm > 1e-6 {
            cand.iter_mut().for_each(|c| *c /= norm);
            return cand;
        }
    }
    vec![0.0; m]
}
