//! k-nearest neighbors in latent space.
//!
//! [`knn_exact`] is a brute-force scan used as the reference; [`AnnIndex`]
//! is a layered navigable proximity graph giving quasi-linear build and
//! logarithmic-ish queries. Both order results by (distance, id) and report
//! true Euclidean distances.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::EntityType;
use crate::embed::LatentEmbedding;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::math;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_M: usize = 16;
pub const DEFAULT_EF_CONSTRUCTION: usize = 200;
pub const DEFAULT_EF: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub distance: f64,
}

/// k nearest targets of each query entity.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLists {
    pub query_kind: EntityType,
    pub target_kind: EntityType,
    pub k: usize,
    pub lists: Vec<Vec<Neighbor>>,
}

impl NeighborLists {
    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }
}

/// Candidate ordered by (squared distance, id).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    dist: f64,
    id: u32,
}

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

fn finish(mut cands: Vec<Cand>, k: usize) -> Vec<Neighbor> {
    cands.sort_unstable();
    cands.truncate(k);
    cands
        .into_iter()
        .map(|c| Neighbor {
            id: c.id,
            distance: math::sqrt(c.dist),
        })
        .collect()
}

/// Brute-force k nearest rows of `targets` to `query`, skipping `exclude`.
pub fn exact_search(query: &[f64], targets: &DenseMatrix, k: usize, exclude: Option<u32>) -> Vec<Neighbor> {
    let mut cands: Vec<Cand> = (0..targets.rows())
        .filter(|&j| Some(j as u32) != exclude)
        .map(|j| Cand {
            dist: math::sq_dist(query, targets.row(j)),
            id: j as u32,
        })
        .collect();
    if cands.len() > k && k > 0 {
        cands.select_nth_unstable(k - 1);
        cands.truncate(k);
    }
    finish(cands, k)
}

/// Exact Euclidean k-NN. When both sides have the same entity type the query
/// set is the target set and each entity is excluded from its own list.
pub fn knn_exact(queries: &LatentEmbedding, targets: &LatentEmbedding, k: usize) -> Result<NeighborLists> {
    check_k_and_dims(k, queries, targets)?;
    let same = queries.kind == targets.kind;
    let lists = (0..queries.len())
        .map(|i| exact_search(queries.row(i), &targets.matrix, k, same.then_some(i as u32)))
        .collect();
    Ok(NeighborLists {
        query_kind: queries.kind,
        target_kind: targets.kind,
        k,
        lists,
    })
}

fn check_k_and_dims(k: usize, q: &LatentEmbedding, t: &LatentEmbedding) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if q.dim() != t.dim() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "query dimension {} differs from target dimension {}",
            q.dim(),
            t.dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnParams {
    /// Graph degree on upper layers; layer 0 allows twice as many links.
    pub m: usize,
    pub ef_construction: usize,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            ef_construction: DEFAULT_EF_CONSTRUCTION,
            seed: 0,
        }
    }
}

/// Reusable visited-set for graph searches.
#[derive(Debug, Clone, Default)]
pub struct SearchScratch {
    stamps: Vec<u32>,
    epoch: u32,
}

impl SearchScratch {
    fn reset(&mut self, n: usize) {
        if self.stamps.len() < n {
            self.stamps.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    #[inline]
    fn visit(&mut self, id: u32) -> bool {
        let s = &mut self.stamps[id as usize];
        if *s == self.epoch {
            false
        } else {
            *s = self.epoch;
            true
        }
    }
}

/// Layered navigable proximity graph over a fixed point set.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnIndex {
    kind: EntityType,
    points: DenseMatrix,
    params: AnnParams,
    /// `links[node][layer]`, present for layers 0..=level(node).
    links: Vec<Vec<Vec<u32>>>,
    entry: u32,
    max_level: usize,
}

impl AnnIndex {
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn kind(&self) -> EntityType {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Adjacency of `node` at `layer` (empty above the node's level).
    pub fn adjacency(&self, node: u32, layer: usize) -> &[u32] {
        self.links[node as usize]
            .get(layer)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Number of stored directed links, all layers.
    pub fn link_count(&self) -> usize {
        self.links.iter().flatten().map(|l| l.len()).sum()
    }

    #[inline]
    fn dist(&self, q: &[f64], id: u32) -> f64 {
        math::sq_dist(q, self.points.row(id as usize))
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            self.params.m * 2
        } else {
            self.params.m
        }
    }

    fn greedy(&self, q: &[f64], mut ep: Cand, layer: usize) -> Cand {
        loop {
            let mut improved = false;
            for &nb in self.adjacency(ep.id, layer) {
                let c = Cand {
                    dist: self.dist(q, nb),
                    id: nb,
                };
                if c < ep {
                    ep = c;
                    improved = true;
                }
            }
            if !improved {
                return ep;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` candidates ascending.
    fn search_layer(
        &self,
        q: &[f64],
        entries: &[Cand],
        ef: usize,
        layer: usize,
        scratch: &mut SearchScratch,
    ) -> Vec<Cand> {
        scratch.reset(self.len());
        let mut frontier: BinaryHeap<Reverse<Cand>> = BinaryHeap::new();
        let mut best: BinaryHeap<Cand> = BinaryHeap::new();
        for &e in entries {
            if scratch.visit(e.id) {
                frontier.push(Reverse(e));
                best.push(e);
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(Reverse(c)) = frontier.pop() {
            let worst = *best.peek().expect("non-empty result set");
            if c > worst && best.len() >= ef {
                break;
            }
            for &nb in self.adjacency(c.id, layer) {
                if !scratch.visit(nb) {
                    continue;
                }
                let cand = Cand {
                    dist: self.dist(q, nb),
                    id: nb,
                };
                if best.len() < ef || cand < *best.peek().unwrap() {
                    frontier.push(Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        let mut out = best.into_vec();
        out.sort_unstable();
        out
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the base
    /// point than to every already-kept neighbor; top up with the pruned ones.
    fn select(&self, sorted: &[Cand], m: usize) -> Vec<u32> {
        let mut kept: Vec<Cand> = Vec::with_capacity(m);
        let mut pruned: Vec<Cand> = Vec::new();
        for &c in sorted {
            if kept.len() >= m {
                break;
            }
            let row = self.points.row(c.id as usize);
            let diverse = kept
                .iter()
                .all(|k| math::sq_dist(row, self.points.row(k.id as usize)) > c.dist);
            if diverse {
                kept.push(c);
            } else {
                pruned.push(c);
            }
        }
        for c in pruned {
            if kept.len() >= m {
                break;
            }
            kept.push(c);
        }
        kept.into_iter().map(|c| c.id).collect()
    }

    fn insert(&mut self, node: u32, level: usize, scratch: &mut SearchScratch) {
        let q = self.points.row(node as usize).to_vec();
        self.links[node as usize] = vec![Vec::new(); level + 1];
        if node == self.entry && self.max_level == usize::MAX {
            self.max_level = level;
            return;
        }
        let mut ep = Cand {
            dist: self.dist(&q, self.entry),
            id: self.entry,
        };
        for layer in (level + 1..=self.max_level).rev() {
            ep = self.greedy(&q, ep, layer);
        }
        let mut entries = vec![ep];
        for layer in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&q, &entries, self.params.ef_construction, layer, scratch);
            // a new node fills its layer's full capacity, 2M links on layer 0
            let chosen = self.select(&found, self.max_links(layer));
            for &nb in &chosen {
                self.connect(nb, node, layer);
            }
            self.links[node as usize][layer] = chosen;
            entries = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = node;
        }
    }

    fn connect(&mut self, from: u32, to: u32, layer: usize) {
        let cap = self.max_links(layer);
        let list = &mut self.links[from as usize][layer];
        list.push(to);
        if list.len() <= cap {
            return;
        }
        let base = self.points.row(from as usize);
        let mut cands: Vec<Cand> = self.links[from as usize][layer]
            .iter()
            .map(|&id| Cand {
                dist: math::sq_dist(base, self.points.row(id as usize)),
                id,
            })
            .collect();
        cands.sort_unstable();
        let kept = self.select(&cands, cap);
        self.links[from as usize][layer] = kept;
    }

    /// Up to `k` approximate nearest neighbors of `query`, skipping `exclude`.
    /// `ef >= len()` falls back to an exhaustive scan.
    pub fn search(
        &self,
        query: &[f64],
        k: usize,
        ef: usize,
        exclude: Option<u32>,
        scratch: &mut SearchScratch,
    ) -> Vec<Neighbor> {
        if ef >= self.len() {
            return exact_search(query, &self.points, k, exclude);
        }
        let want = k + exclude.is_some() as usize;
        let mut ep = Cand {
            dist: self.dist(query, self.entry),
            id: self.entry,
        };
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy(query, ep, layer);
        }
        let found = self.search_layer(query, &[ep], ef.max(want), 0, scratch);
        finish(found.into_iter().filter(|c| Some(c.id) != exclude).collect(), k)
    }
}

/// Builds the graph by sequential insertion in id order; deterministic for a seed.
pub fn build_ann_index(targets: &LatentEmbedding, params: AnnParams) -> Result<AnnIndex> {
    if targets.is_empty() {
        return Err(Error::Empty("ANN target set"));
    }
    if params.m < 2 || params.ef_construction < 1 {
        return Err(Error::InvalidParameter("ANN degree must be >= 2 and ef_construction >= 1".into()));
    }
    let n = targets.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let ml = 1.0 / math::ln(params.m as f64);
    let levels: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = 1.0 - rng.gen::<f64>();
            (math::floor(-math::ln(u) * ml) as usize).min(16)
        })
        .collect();
    let mut index = AnnIndex {
        kind: targets.kind,
        points: targets.matrix.clone(),
        params,
        links: vec![Vec::new(); n],
        entry: 0,
        max_level: usize::MAX,
    };
    let mut scratch = SearchScratch::default();
    for (node, &level) in levels.iter().enumerate() {
        index.insert(node as u32, level, &mut scratch);
    }
    Ok(index)
}

/// Approximate k-NN of every query row. Self matches are excluded when the
/// queries have the index's entity type (the query set is the target set).
pub fn knn_approx(index: &AnnIndex, queries: &LatentEmbedding, k: usize, ef: usize) -> Result<NeighborLists> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if queries.dim() != index.dim() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "query dimension {} differs from index dimension {}",
            queries.dim(),
            index.dim()
        )));
    }
    let same = queries.kind == index.kind;
    let mut scratch = SearchScratch::default();
    let lists = (0..queries.len())
        .map(|i| index.search(queries.row(i), k, ef, same.then_some(i as u32), &mut scratch))
        .collect();
    Ok(NeighborLists {
        query_kind: queries.kind,
        target_kind: index.kind,
        k,
        lists,
    })
}
