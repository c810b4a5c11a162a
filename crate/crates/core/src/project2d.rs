//! Neighbor-embedding projection of latent vectors onto the plane.
//!
//! The layout follows the fuzzy-simplicial-set recipe: per-node bandwidths
//! from the kNN distances, a symmetrized membership graph, then stochastic
//! gradient descent with edge sampling proportional to weight and uniform
//! negative sampling. The model can be fitted on a subset and applied to
//! the remaining points (and to other entity types) afterwards.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::LatentEmbedding;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::math;
use crate::neighbors::{self, AnnIndex, AnnParams, Neighbor, NeighborLists, SearchScratch};

pub type Point = [f64; 2];

/// Symmetric membership graph; each undirected edge is stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub n: usize,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub edges: Vec<(u32, u32, f64)>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: u32, j: u32) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|p| self.edges[p].2)
            .unwrap_or(0.0)
    }
}

const BANDWIDTH_TOL: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;

/// (ρ, σ) for one node: ρ is the nearest distance, σ solves
/// Σ exp(−max(0, d − ρ)/σ) = log₂(k) by bisection.
pub fn smooth_knn(distances: &[f64]) -> (f64, f64) {
    if distances.is_empty() {
        return (0.0, 1.0);
    }
    let rho = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let target = math::log2(distances.len() as f64);
    let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
    for _ in 0..200 {
        let psum: f64 = distances
            .iter()
            .map(|&d| {
                let gap = d - rho;
                if gap > 0.0 {
                    math::exp(-gap / mid)
                } else {
                    1.0
                }
            })
            .sum();
        if math::abs(psum - target) < BANDWIDTH_TOL {
            break;
        }
        if psum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    let floor = MIN_K_DIST_SCALE * mean;
    if mean > 0.0 && mid < floor {
        mid = floor;
    }
    if mid <= 0.0 {
        mid = f64::MIN_POSITIVE;
    }
    (rho, mid)
}

/// Membership weight of a neighbor at distance `d` given (ρ, σ).
#[inline]
pub fn membership(d: f64, rho: f64, sigma: f64) -> f64 {
    let gap = d - rho;
    if gap <= 0.0 {
        1.0
    } else {
        math::exp(-gap / sigma)
    }
}

/// Builds the fuzzy graph from same-type kNN lists (query set = target set).
pub fn fuzzy_graph(knn: &NeighborLists) -> Result<FuzzyGraph> {
    let n = knn.lists.len();
    let mut rho = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut directed: Vec<((u32, u32), f64, bool)> = Vec::new();
    for (i, list) in knn.lists.iter().enumerate() {
        if list.is_empty() {
            return Err(Error::InvalidParameter(format!("node {i} has no neighbors")));
        }
        let dists: Vec<f64> = list.iter().map(|nb| nb.distance).collect();
        let (r, s) = smooth_knn(&dists);
        rho.push(r);
        sigma.push(s);
        for nb in list {
            let j = nb.id;
            if j as usize == i {
                continue;
            }
            if j as usize >= n {
                return Err(Error::ShapeMismatch(format!("neighbor id {j} out of range")));
            }
            let w = membership(nb.distance, r, s);
            let i = i as u32;
            // flag says which direction of the unordered pair this is
            directed.push(((i.min(j), i.max(j)), w, i < j));
        }
    }
    directed.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
    let mut edges = Vec::new();
    let mut p = 0;
    while p < directed.len() {
        let key = directed[p].0;
        let (mut a, mut b) = (0.0, 0.0);
        while p < directed.len() && directed[p].0 == key {
            if directed[p].2 {
                a = directed[p].1;
            } else {
                b = directed[p].1;
            }
            p += 1;
        }
        let w = symmetrize(a, b);
        if w > 0.0 {
            edges.push((key.0, key.1, w.min(1.0)));
        }
    }
    Ok(FuzzyGraph { n, rho, sigma, edges })
}

/// Fuzzy union of the two directed memberships.
#[inline]
pub fn symmetrize(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Fits (a, b) of 1/(1 + a·r^{2b}) to the target curve given by
/// `min_dist` and `spread`, least squares on 300 points over [0, 3·spread].
pub fn fit_ab(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { math::exp(-(x - min_dist) / spread) })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = 1.0 / (1.0 + a * math::powf(x, 2.0 * b)) - y;
                r * r
            })
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        // normal equations for the 2-parameter Gauss-Newton step
        let (mut jtj00, mut jtj01, mut jtj11, mut jtr0, mut jtr1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let u = if x > 0.0 { math::powf(x, 2.0 * b) } else { 0.0 };
            let f = 1.0 / (1.0 + a * u);
            let r = f - y;
            let da = -u * f * f;
            let db = if x > 0.0 { -a * u * 2.0 * math::ln(x) * f * f } else { 0.0 };
            jtj00 += da * da;
            jtj01 += da * db;
            jtj11 += db * db;
            jtr0 += da * r;
            jtr1 += db * r;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let m00 = jtj00 * (1.0 + lambda);
            let m11 = jtj11 * (1.0 + lambda);
            let det = m00 * m11 - jtj01 * jtj01;
            if det == 0.0 {
                lambda *= 10.0;
                continue;
            }
            let sa = -(m11 * jtr0 - jtj01 * jtr1) / det;
            let sb = -(m00 * jtr1 - jtj01 * jtr0) / det;
            let (na, nb) = (a + sa, b + sb);
            if na > 0.0 && nb > 0.0 {
                let nc = sse(na, nb);
                if nc < cost {
                    let converged = math::abs(cost - nc) < 1e-15;
                    a = na;
                    b = nb;
                    cost = nc;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if converged {
                        return (a, b);
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (a, b)
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutParams {
    pub epochs: usize,
    pub negative_rate: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            epochs: 200,
            negative_rate: 5,
            min_dist: 0.1,
            spread: 1.0,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

/// 2D coordinates for a point set plus how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    pub coords: Vec<Point>,
    pub fitted_subset: Vec<u32>,
    pub epochs: usize,
    pub seed: u64,
}

const GRAD_CLIP: f64 = 4.0;

#[inline]
fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

struct Sgd {
    a: f64,
    b: f64,
}

impl Sgd {
    #[inline]
    fn attract(&self, head: &mut Point, tail: &mut Point, alpha: f64, move_tail: bool) {
        let dx = head[0] - tail[0];
        let dy = head[1] - tail[1];
        let d2 = dx * dx + dy * dy;
        if d2 <= 0.0 {
            return;
        }
        let coeff = -2.0 * self.a * self.b * math::powf(d2, self.b - 1.0)
            / (self.a * math::powf(d2, self.b) + 1.0);
        let gx = clip(coeff * dx) * alpha;
        let gy = clip(coeff * dy) * alpha;
        head[0] += gx;
        head[1] += gy;
        if move_tail {
            tail[0] -= gx;
            tail[1] -= gy;
        }
    }

    #[inline]
    fn repel(&self, head: &mut Point, other: &Point, alpha: f64) {
        let dx = head[0] - other[0];
        let dy = head[1] - other[1];
        let d2 = dx * dx + dy * dy;
        if d2 <= 0.0 {
            return;
        }
        let coeff = 2.0 * self.b / ((0.001 + d2) * (self.a * math::powf(d2, self.b) + 1.0));
        head[0] += clip(coeff * dx) * alpha;
        head[1] += clip(coeff * dy) * alpha;
    }
}

/// Directed edges with their sampling schedule.
struct Schedule {
    edges: Vec<(u32, u32)>,
    every: Vec<f64>,
    next: Vec<f64>,
    neg_every: Vec<f64>,
    neg_next: Vec<f64>,
}

impl Schedule {
    fn new(directed: Vec<(u32, u32, f64)>, epochs: usize, negative_rate: usize) -> Self {
        let wmax = directed.iter().map(|e| e.2).fold(0.0, f64::max);
        let floor = wmax / epochs as f64;
        let kept: Vec<_> = directed.into_iter().filter(|e| e.2 >= floor && e.2 > 0.0).collect();
        let every: Vec<f64> = kept.iter().map(|e| wmax / e.2).collect();
        let neg_every: Vec<f64> = every.iter().map(|e| e / negative_rate.max(1) as f64).collect();
        Self {
            edges: kept.iter().map(|e| (e.0, e.1)).collect(),
            next: every.clone(),
            neg_next: neg_every.clone(),
            every,
            neg_every,
        }
    }
}

fn check_finite(coords: &[Point], epoch: usize) -> Result<()> {
    if coords.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Divergent(format!("non-finite position after epoch {epoch}")));
    }
    Ok(())
}

/// Stochastic layout of a fuzzy graph from `init`.
pub fn fit_layout(graph: &FuzzyGraph, init: &[Point], params: &LayoutParams) -> Result<Projection2D> {
    if params.epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be at least 1".into()));
    }
    if init.len() != graph.n {
        return Err(Error::ShapeMismatch(format!(
            "init has {} rows, graph has {} nodes",
            init.len(),
            graph.n
        )));
    }
    check_finite(init, 0)?;
    let (a, b) = fit_ab(params.spread, params.min_dist);
    let sgd = Sgd { a, b };
    let mut coords = init.to_vec();
    let directed: Vec<(u32, u32, f64)> = graph
        .edges
        .iter()
        .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)])
        .collect();
    let mut sched = Schedule::new(directed, params.epochs, params.negative_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = graph.n as u32;
    for epoch in 0..params.epochs {
        let alpha = params.learning_rate * (1.0 - epoch as f64 / params.epochs as f64);
        let now = epoch as f64;
        for e in 0..sched.edges.len() {
            if sched.next[e] > now {
                continue;
            }
            let (h, t) = sched.edges[e];
            let (h, t) = (h as usize, t as usize);
            if h != t {
                let mut head = coords[h];
                let mut tail = coords[t];
                sgd.attract(&mut head, &mut tail, alpha, true);
                coords[h] = head;
                coords[t] = tail;
            }
            sched.next[e] += sched.every[e];
            let n_neg = math::floor((now - sched.neg_next[e]) / sched.neg_every[e]).max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.gen_range(0..n) as usize;
                if k == h {
                    continue;
                }
                let other = coords[k];
                sgd.repel(&mut coords[h], &other, alpha);
            }
            sched.neg_next[e] += n_neg as f64 * sched.neg_every[e];
        }
        check_finite(&coords, epoch + 1)?;
    }
    Ok(Projection2D {
        coords,
        fitted_subset: (0..graph.n as u32).collect(),
        epochs: params.epochs,
        seed: params.seed,
    })
}

/// Places new points from their neighbors among fitted points: start at the
/// membership-weighted mean of the neighbors' positions (or exactly on a
/// zero-distance neighbor), then `refine_epochs` of SGD moving only the new
/// points. Points sitting on a fitted point are not refined.
pub fn transform(
    knn_to_fitted: &[Vec<Neighbor>],
    fitted: &[Point],
    refine_epochs: usize,
    params: &LayoutParams,
) -> Result<Vec<Point>> {
    let mut coords = Vec::with_capacity(knn_to_fitted.len());
    let mut pinned = Vec::with_capacity(knn_to_fitted.len());
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    for (i, list) in knn_to_fitted.iter().enumerate() {
        if list.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "new point {i} has no neighbor among fitted points"
            )));
        }
        if list.iter().any(|nb| nb.id as usize >= fitted.len()) {
            return Err(Error::ShapeMismatch(format!("new point {i}: neighbor id out of range")));
        }
        let zero: Vec<&Neighbor> = list.iter().filter(|nb| nb.distance == 0.0).collect();
        if !zero.is_empty() {
            let mut p = [0.0, 0.0];
            for nb in &zero {
                p[0] += fitted[nb.id as usize][0];
                p[1] += fitted[nb.id as usize][1];
            }
            coords.push([p[0] / zero.len() as f64, p[1] / zero.len() as f64]);
            pinned.push(true);
            continue;
        }
        let dists: Vec<f64> = list.iter().map(|nb| nb.distance).collect();
        let (rho, sigma) = smooth_knn(&dists);
        let mut p = [0.0, 0.0];
        let mut total = 0.0;
        for nb in list {
            let w = membership(nb.distance, rho, sigma);
            p[0] += w * fitted[nb.id as usize][0];
            p[1] += w * fitted[nb.id as usize][1];
            total += w;
            edges.push((i as u32, nb.id, w));
        }
        coords.push([p[0] / total, p[1] / total]);
        pinned.push(false);
    }
    if refine_epochs == 0 || edges.is_empty() || fitted.len() < 2 {
        return Ok(coords);
    }
    let (a, b) = fit_ab(params.spread, params.min_dist);
    let sgd = Sgd { a, b };
    let mut sched = Schedule::new(edges, refine_epochs, params.negative_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x7f4a_7c15);
    let initial_alpha = params.learning_rate / 4.0;
    for epoch in 0..refine_epochs {
        let alpha = initial_alpha * (1.0 - epoch as f64 / refine_epochs as f64);
        let now = epoch as f64;
        for e in 0..sched.edges.len() {
            if sched.next[e] > now {
                continue;
            }
            let (h, t) = sched.edges[e];
            let h = h as usize;
            if pinned[h] {
                continue;
            }
            let mut tail = fitted[t as usize];
            sgd.attract(&mut coords[h], &mut tail, alpha, false);
            sched.next[e] += sched.every[e];
            let n_neg = math::floor((now - sched.neg_next[e]) / sched.neg_every[e]).max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.gen_range(0..fitted.len());
                sgd.repel(&mut coords[h], &fitted[k], alpha);
            }
            sched.neg_next[e] += n_neg as f64 * sched.neg_every[e];
        }
        check_finite(&coords, epoch + 1)?;
    }
    Ok(coords)
}

/// Affine map of the bounding box onto [0.02, 0.98]², preserving aspect
/// ratio by centering the short axis. A degenerate box maps to (0.5, 0.5).
pub fn normalize_coords(coords: &[Point]) -> Vec<Point> {
    if coords.is_empty() {
        return Vec::new();
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in coords {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = (x1 - x0).max(y1 - y0);
    if span <= 0.0 {
        return vec![[0.5, 0.5]; coords.len()];
    }
    let scale = 0.96 / span;
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    coords
        .iter()
        .map(|p| {
            [
                (0.5 + (p[0] - cx) * scale).clamp(0.0, 1.0),
                (0.5 + (p[1] - cy) * scale).clamp(0.0, 1.0),
            ]
        })
        .collect()
}

/// End-to-end projection settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionParams {
    pub n_neighbors: usize,
    pub layout: LayoutParams,
    /// Fraction of (distinct) points the layout is fitted on.
    pub subset_fraction: f64,
    pub subset_cap: usize,
    pub refine_epochs: usize,
    /// Above this many fitted points the kNN graph comes from the ANN index.
    pub exact_knn_limit: usize,
    pub ann: AnnParams,
    pub ef: usize,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            layout: LayoutParams::default(),
            subset_fraction: 1.0,
            subset_cap: 200_000,
            refine_epochs: 30,
            exact_knn_limit: 4096,
            ann: AnnParams::default(),
            ef: neighbors::DEFAULT_EF,
        }
    }
}

/// Groups bit-identical rows: returns (distinct row per group, group of each row).
fn dedupe_rows(m: &DenseMatrix) -> (Vec<usize>, Vec<u32>) {
    let mut seen: HashMap<Vec<u64>, u32> = HashMap::new();
    let mut reps = Vec::new();
    let mut group = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        // +0.0 and -0.0 are the same point
        let key: Vec<u64> = m.row(i).iter().map(|v| (v + 0.0).to_bits()).collect();
        let g = *seen.entry(key).or_insert_with(|| {
            reps.push(i);
            (reps.len() - 1) as u32
        });
        group.push(g);
    }
    (reps, group)
}

fn select_rows(m: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    let d = m.cols();
    let mut out = Vec::with_capacity(rows.len() * d);
    for &r in rows {
        out.extend_from_slice(m.row(r));
    }
    DenseMatrix::from_vec(rows.len(), d, out)
}

/// A fitted layout that can place further points.
#[derive(Debug, Clone)]
pub struct LayoutModel {
    fitted_latent: DenseMatrix,
    fitted_coords: Vec<Point>,
    index: Option<AnnIndex>,
    params: ProjectionParams,
}

impl LayoutModel {
    /// Fits on a uniform sample of the distinct rows of `latent` and places
    /// the rest by [`transform`]. Identical rows share coordinates exactly.
    pub fn fit(latent: &LatentEmbedding, params: &ProjectionParams) -> Result<(Self, Projection2D)> {
        if latent.is_empty() {
            return Err(Error::Empty("latent embedding"));
        }
        if params.n_neighbors < 2 {
            return Err(Error::InvalidParameter("n_neighbors must be at least 2".into()));
        }
        let (reps, group) = dedupe_rows(&latent.matrix);
        let distinct = select_rows(&latent.matrix, &reps);
        let n = reps.len();
        let mut rng = ChaCha8Rng::seed_from_u64(params.layout.seed);
        let want = math::ceil(params.subset_fraction.clamp(0.0, 1.0) * n as f64) as usize;
        let n_fit = want.clamp(1, n).min(params.subset_cap.max(1));
        let mut order: Vec<usize> = (0..n).collect();
        if n_fit < n {
            order.shuffle(&mut rng);
        }
        let mut fit_ids: Vec<usize> = order[..n_fit].to_vec();
        fit_ids.sort_unstable();
        let mut rest_ids: Vec<usize> = order[n_fit..].to_vec();
        rest_ids.sort_unstable();

        let fit_latent = select_rows(&distinct, &fit_ids);
        let fit_coords = if n_fit == 1 {
            vec![[0.0, 0.0]]
        } else {
            let k = params.n_neighbors.min(n_fit - 1);
            let emb = LatentEmbedding::new(latent.kind, fit_latent.clone())?;
            let knn = if n_fit <= params.exact_knn_limit {
                neighbors::knn_exact(&emb, &emb, k)?
            } else {
                let idx = neighbors::build_ann_index(&emb, params.ann)?;
                neighbors::knn_approx(&idx, &emb, k, params.ef.max(k))?
            };
            let graph = fuzzy_graph(&knn)?;
            let init = spectral_free_init(&fit_latent, params.layout.seed);
            fit_layout(&graph, &init, &params.layout)?.coords
        };
        let index = if n_fit > params.exact_knn_limit {
            let emb = LatentEmbedding::new(latent.kind, fit_latent.clone())?;
            Some(neighbors::build_ann_index(&emb, params.ann)?)
        } else {
            None
        };
        let model = LayoutModel {
            fitted_latent: fit_latent,
            fitted_coords: fit_coords,
            index,
            params: *params,
        };

        let mut distinct_coords = vec![[0.0, 0.0]; n];
        for (slot, &id) in fit_ids.iter().enumerate() {
            distinct_coords[id] = model.fitted_coords[slot];
        }
        if !rest_ids.is_empty() {
            let rest = select_rows(&distinct, &rest_ids);
            let placed = model.place_distinct(&rest)?;
            for (p, &id) in placed.into_iter().zip(&rest_ids) {
                distinct_coords[id] = p;
            }
        }
        let coords = group.iter().map(|&g| distinct_coords[g as usize]).collect();
        // fitted subset reported in terms of original row ids (first row of each group)
        let fitted_subset = fit_ids.iter().map(|&g| reps[g] as u32).collect();
        Ok((
            model,
            Projection2D {
                coords,
                fitted_subset,
                epochs: params.layout.epochs,
                seed: params.layout.seed,
            },
        ))
    }

    pub fn fitted_coords(&self) -> &[Point] {
        &self.fitted_coords
    }

    /// kNN among fitted points for each row of `rows`.
    pub fn neighbors_to_fitted(&self, rows: &DenseMatrix) -> Vec<Vec<Neighbor>> {
        let k = self.params.n_neighbors.min(self.fitted_coords.len());
        let mut scratch = SearchScratch::default();
        (0..rows.rows())
            .map(|i| match &self.index {
                Some(idx) => idx.search(rows.row(i), k, self.params.ef.max(k), None, &mut scratch),
                None => neighbors::exact_search(rows.row(i), &self.fitted_latent, k, None),
            })
            .collect()
    }

    fn place_distinct(&self, rows: &DenseMatrix) -> Result<Vec<Point>> {
        let knn = self.neighbors_to_fitted(rows);
        transform(&knn, &self.fitted_coords, self.params.refine_epochs, &self.params.layout)
    }

    /// Places arbitrary latent vectors (any entity type) on the fitted map.
    pub fn transform(&self, latent: &LatentEmbedding) -> Result<Vec<Point>> {
        if latent.dim() != self.fitted_latent.cols() {
            return Err(Error::ShapeMismatch(format!(
                "latent dimension {} differs from fitted dimension {}",
                latent.dim(),
                self.fitted_latent.cols()
            )));
        }
        if latent.is_empty() {
            return Ok(Vec::new());
        }
        let (reps, group) = dedupe_rows(&latent.matrix);
        let placed = self.place_distinct(&select_rows(&latent.matrix, &reps))?;
        Ok(group.iter().map(|&g| placed[g as usize]).collect())
    }
}

/// Initial layout: first two latent coordinates, centered and scaled to unit
/// variance, plus a tiny seeded jitter so coincident starts can separate.
pub fn spectral_free_init(latent: &DenseMatrix, seed: u64) -> Vec<Point> {
    let n = latent.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let mut axes = [vec![0.0; n], vec![0.0; n]];
    for (c, axis) in axes.iter_mut().enumerate() {
        if c < latent.cols() {
            for (i, v) in axis.iter_mut().enumerate() {
                *v = latent.get(i, c);
            }
        }
        let mean = axis.iter().sum::<f64>() / n as f64;
        let var = axis.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if var > 0.0 {
            let sd = math::sqrt(var);
            axis.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        } else {
            axis.iter_mut().for_each(|v| *v = math::gaussian(&mut rng));
        }
    }
    (0..n)
        .map(|i| {
            [
                axes[0][i] + 1e-4 * math::gaussian(&mut rng),
                axes[1][i] + 1e-4 * math::gaussian(&mut rng),
            ]
        })
        .collect()
}
