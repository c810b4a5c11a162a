//! Latent semantic analysis: randomized truncated SVD of the tf-idf matrix,
//! and latent vectors for articles, words and aggregate entities.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::EntityType;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::math;
use crate::vectorize::SparseMatrix;

pub const DEFAULT_DIM: usize = 300;
pub const OVERSAMPLING: usize = 10;
pub const POWER_ITERATIONS: usize = 4;

/// Fitted LSA model.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub d: usize,
    /// V × d, orthonormal columns (right singular vectors of the tf-idf matrix).
    pub term_components: DenseMatrix,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub fitted_t: usize,
    pub seed: u64,
}

/// Dense per-entity vectors in latent space; row `i` belongs to entity `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEmbedding {
    pub kind: EntityType,
    pub matrix: DenseMatrix,
}

impl LatentEmbedding {
    pub fn new(kind: EntityType, matrix: DenseMatrix) -> Result<Self> {
        if matrix.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent embedding"));
        }
        Ok(Self { kind, matrix })
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }
}

/// Randomized truncated SVD with `OVERSAMPLING` extra columns and
/// `POWER_ITERATIONS` subspace iterations. Deterministic for a given seed.
pub fn fit_lsa(m: &SparseMatrix, d: usize, seed: u64) -> Result<LatentModel> {
    let (t, v) = (m.n_rows(), m.n_cols());
    if d == 0 {
        return Err(Error::InvalidParameter("latent dimension must be at least 1".into()));
    }
    if d > t.min(v) {
        return Err(Error::InvalidParameter(format!(
            "latent dimension {d} exceeds min(T, V) = {}",
            t.min(v)
        )));
    }
    if m.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("tf-idf matrix"));
    }
    let l = (d + OVERSAMPLING).min(t).min(v);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DenseMatrix::from_vec(v, l, (0..v * l).map(|_| math::gaussian(&mut rng)).collect());

    let mut q = linalg::thin_qr(&linalg::sparse_matmul(m, &omega)).0;
    for _ in 0..POWER_ITERATIONS {
        let z = linalg::thin_qr(&linalg::sparse_t_matmul(m, &q)).0;
        q = linalg::thin_qr(&linalg::sparse_matmul(m, &z)).0;
    }
    // Bᵀ = Aᵀ Q (V × l); Bᵀ = Qb R; R = Ur Σ Jᵀ  =>  right singular vectors of A ≈ Qb Ur
    let bt = linalg::sparse_t_matmul(m, &q);
    let (qb, r) = linalg::thin_qr(&bt);
    let svd = linalg::jacobi_svd(&r);
    let full = qb.matmul(&svd.u);

    let mut comps = DenseMatrix::zeros(v, d);
    for j in 0..d {
        // sign: largest-magnitude loading positive
        let mut best = 0.0f64;
        for i in 0..v {
            let x = full.get(i, j);
            if math::abs(x) > math::abs(best) {
                best = x;
            }
        }
        let sign = if best < 0.0 { -1.0 } else { 1.0 };
        for i in 0..v {
            comps.set(i, j, sign * full.get(i, j));
        }
    }
    Ok(LatentModel {
        d,
        term_components: comps,
        singular_values: svd.s[..d].to_vec(),
        fitted_t: t,
        seed,
    })
}

/// Article vectors `M · term_components` (equivalently `U_d Σ_d` on the training rows).
pub fn embed_articles(model: &LatentModel, m: &SparseMatrix) -> Result<LatentEmbedding> {
    if m.n_cols() != model.term_components.rows() {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {} columns, model expects {}",
            m.n_cols(),
            model.term_components.rows()
        )));
    }
    LatentEmbedding::new(
        EntityType::Article,
        linalg::sparse_matmul(m, &model.term_components),
    )
}

/// Word vectors: rows of `term_components` scaled by the singular values.
pub fn embed_terms(model: &LatentModel) -> LatentEmbedding {
    let mut out = model.term_components.clone();
    for i in 0..out.rows() {
        for (x, s) in out.row_mut(i).iter_mut().zip(&model.singular_values) {
            *x *= s;
        }
    }
    LatentEmbedding {
        kind: EntityType::Word,
        matrix: out,
    }
}

/// Mean of article vectors per incidence column (authors or labs as bags of articles).
pub fn embed_aggregates(
    kind: EntityType,
    incidence: &SparseMatrix,
    articles: &LatentEmbedding,
) -> Result<LatentEmbedding> {
    if incidence.n_rows() != articles.len() {
        return Err(Error::ShapeMismatch(format!(
            "incidence has {} rows, embedding has {} articles",
            incidence.n_rows(),
            articles.len()
        )));
    }
    let members = incidence.transpose();
    let d = articles.dim();
    let mut out = DenseMatrix::zeros(members.n_rows(), d);
    let mut acc = vec![0.0; d];
    for k in 0..members.n_rows() {
        let (docs, weights) = members.row(k);
        if docs.is_empty() {
            return Err(Error::OrphanEntity(k as u32));
        }
        acc.iter_mut().for_each(|x| *x = 0.0);
        let total: f64 = weights.iter().sum();
        for (&doc, &w) in docs.iter().zip(weights) {
            for (a, &x) in acc.iter_mut().zip(articles.row(doc as usize)) {
                *a += w * x;
            }
        }
        for (o, a) in out.row_mut(k).iter_mut().zip(&acc) {
            *o = a / total;
        }
    }
    LatentEmbedding::new(kind, out)
}

/// ‖A − A·V·Vᵀ‖_F / ‖A‖_F for the model's term components.
pub fn relative_reconstruction_error(m: &SparseMatrix, model: &LatentModel) -> f64 {
    let av = linalg::sparse_matmul(m, &model.term_components);
    let recon = av.matmul(&model.term_components.transpose());
    let mut num = 0.0;
    let mut den = 0.0;
    for r in 0..m.n_rows() {
        let (cols, vals) = m.row(r);
        let rrow = recon.row(r);
        let mut p = 0;
        for (c, &x) in rrow.iter().enumerate() {
            let a = if p < cols.len() && cols[p] as usize == c {
                p += 1;
                vals[p - 1]
            } else {
                0.0
            };
            num += (a - x) * (a - x);
            den += a * a;
        }
    }
    math::sqrt(num / den)
}
