#![allow(dead_code)]

use std::collections::BTreeMap;

use cartomap_core::snapshot::{MapSnapshot, SnapshotCluster, SnapshotEntity, SnapshotLevel, StoredNeighbor, FORMAT_VERSION};
use cartomap_core::EntityType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut impl Rng) -> f64 {
    let u: f64 = 1.0 - r.gen::<f64>();
    let v: f64 = r.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Sizes of a synthetic snapshot.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub articles: usize,
    pub words: usize,
    pub authors: usize,
    pub labs: usize,
    pub years: u32,
    pub words_per_article: usize,
    pub neighbors: usize,
}

impl Shape {
    /// Roughly corpus-like proportions for `n` entities in total.
    pub fn scaled(n: usize) -> Self {
        Self {
            articles: n * 80 / 100,
            words: n * 10 / 100,
            authors: n * 9 / 100,
            labs: n - n * 80 / 100 - n * 10 / 100 - n * 9 / 100,
            years: 20,
            words_per_article: 3,
            neighbors: 0,
        }
    }
}

/// Clustered point cloud in the unit square.
fn point(r: &mut impl Rng, centers: &[[f64; 3]]) -> [f64; 2] {
    if r.gen::<f64>() < 0.1 {
        return [r.gen(), r.gen()];
    }
    let c = centers[r.gen_range(0..centers.len())];
    [
        (c[0] + c[2] * normal(r)).clamp(0.0, 1.0),
        (c[1] + c[2] * normal(r)).clamp(0.0, 1.0),
    ]
}

/// A valid snapshot with random coordinates, scores, labels, years and
/// relations: every article has one lab, one or two authors and
/// `words_per_article` words.
pub fn snapshot(shape: Shape, seed: u64) -> MapSnapshot {
    let mut r = rng(seed);
    let centers: Vec<[f64; 3]> = (0..24).map(|_| [r.gen(), r.gen(), 0.01 + 0.06 * r.gen::<f64>()]).collect();
    let counts = [shape.articles, shape.words, shape.authors, shape.labs];
    let mut off = [0usize; 4];
    for t in 1..4 {
        off[t] = off[t - 1] + counts[t - 1];
    }
    let n = off[3] + counts[3];

    let mut related: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut article_lab = Vec::with_capacity(shape.articles);
    for a in 0..shape.articles {
        let mut rel = Vec::new();
        if shape.labs > 0 {
            let lab = off[3] + r.gen_range(0..shape.labs);
            rel.push(lab as u32);
            related[lab].push(a as u32);
            article_lab.push(Some(lab));
        } else {
            article_lab.push(None);
        }
        if shape.authors > 0 {
            for _ in 0..r.gen_range(1..=2) {
                let au = off[2] + r.gen_range(0..shape.authors);
                rel.push(au as u32);
                related[au].push(a as u32);
                if let Some(lab) = article_lab[a] {
                    related[lab].push(au as u32);
                }
            }
        }
        if shape.words > 0 {
            for _ in 0..shape.words_per_article {
                // skewed so some terms are common
                let w = off[1] + ((r.gen::<f64>().powi(3)) * shape.words as f64) as usize;
                related[w].push(a as u32);
            }
        }
        related[a] = rel;
    }
    for rel in &mut related {
        rel.sort_unstable();
        rel.dedup();
    }

    let mut entities = Vec::with_capacity(n);
    for (t, kind) in EntityType::ALL.into_iter().enumerate() {
        for i in 0..counts[t] {
            let id = (off[t] + i) as u32;
            let [x, y] = point(&mut r, &centers);
            let mut metadata = BTreeMap::new();
            if kind == EntityType::Article {
                metadata.insert("year".to_string(), (2000 + r.gen_range(0..shape.years.max(1))).to_string());
            }
            let neighbors: [Vec<StoredNeighbor>; 4] = std::array::from_fn(|tt| {
                let m = shape.neighbors.min(counts[tt]);
                let mut d = 0.0f32;
                (0..m)
                    .map(|_| {
                        d += r.gen::<f32>();
                        StoredNeighbor { id: (off[tt] + r.gen_range(0..counts[tt])) as u32, distance: d }
                    })
                    .collect()
            });
            entities.push(SnapshotEntity {
                id,
                kind,
                label: format!("{} {i}", kind.as_str()),
                score: (r.gen::<f64>() * 1000.0).floor(),
                x,
                y,
                neighbors,
                metadata,
                related: std::mem::take(&mut related[id as usize]),
            });
        }
    }
    let levels = [3u32, 9]
        .iter()
        .enumerate()
        .map(|(level, &k)| SnapshotLevel {
            level: level as u32,
            k,
            clusters: (0..k)
                .map(|c| SnapshotCluster {
                    label: format!("cluster {level}.{c}"),
                    terms: vec![format!("term{c}")],
                    x: r.gen(),
                    y: r.gen(),
                    size: 1 + c,
                    coverage: 0.5,
                })
                .collect(),
        })
        .collect();
    let snap = MapSnapshot {
        format_version: FORMAT_VERSION.to_string(),
        entities,
        levels,
    };
    snap.validate().expect("synthetic snapshot is valid");
    snap
}
