//! Multi-level k-means over the 2D article layout and cluster naming.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::project2d::Point;

pub const DEFAULT_LEVELS: [usize; 4] = [8, 24, 72, 216];
pub const MAX_ITERATIONS: usize = 300;
pub const SHIFT_TOLERANCE: f64 = 1e-6;
/// Centroids are adjacent when each is among the other's this-many nearest.
pub const ADJACENCY_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Point>,
    pub assignment: Vec<u32>,
    pub iterations: usize,
}

impl KMeans {
    pub fn inertia(&self, points: &[Point]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| d2(p, &self.centroids[c as usize]))
            .sum()
    }
}

#[inline]
fn d2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest_centroid(p: &Point, centroids: &[Point]) -> u32 {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, q) in centroids.iter().enumerate() {
        let d = d2(p, q);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best as u32
}

fn plus_plus_init(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first]];
    let mut dist: Vec<f64> = points.iter().map(|p| d2(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if r < d {
                        break;
                    }
                    r -= d;
                }
            }
            pick.unwrap()
        } else {
            // every point coincides with a centroid already
            (0..n).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.push(points[pick]);
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(d2(p, &points[pick]));
        }
    }
    centroids
}

/// Seeded k-means++ followed by Lloyd iterations.
pub fn kmeans(points: &[Point], k: usize, seed: u64) -> Result<KMeans> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::NonFinite("cluster input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignment = vec![0u32; points.len()];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = nearest_centroid(p, &centroids);
        }
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a as usize][0] += p[0];
            sums[a as usize][1] += p[1];
            counts[a as usize] += 1;
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let next = if counts[c] > 0 {
                [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64]
            } else {
                // reseed on the point worst served by its current centroid
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        let di = d2(&points[i], &centroids[assignment[i] as usize]);
                        let dj = d2(&points[j], &centroids[assignment[j] as usize]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    })
                    .unwrap();
                assignment[far] = c as u32;
                points[far]
            };
            shift = shift.max(crate::math::sqrt(d2(&next, &centroids[c])));
            centroids[c] = next;
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    for (a, p) in assignment.iter_mut().zip(points) {
        *a = nearest_centroid(p, &centroids);
    }
    Ok(KMeans {
        centroids,
        assignment,
        iterations,
    })
}

pub fn assign_words(centroids: &[Point], word_coords: &[Point]) -> Vec<u32> {
    word_coords.iter().map(|p| nearest_centroid(p, centroids)).collect()
}

/// Pairs (i, j), i < j, of mutually near centroids.
pub fn adjacent_clusters(centroids: &[Point]) -> Vec<(u32, u32)> {
    let k = centroids.len();
    let near: Vec<Vec<usize>> = (0..k)
        .map(|i| {
            let mut others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                d2(&centroids[i], &centroids[a])
                    .total_cmp(&d2(&centroids[i], &centroids[b]))
                    .then(a.cmp(&b))
            });
            others.truncate(ADJACENCY_K);
            others
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..k {
        for &j in &near[i] {
            if i < j && near[j].contains(&i) {
                out.push((i as u32, j as u32));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLevel {
    pub level: usize,
    pub k: usize,
    pub centroids: Vec<Point>,
    pub article_assignment: Vec<u32>,
    pub word_assignment: Vec<u32>,
    /// One or two term ids per cluster.
    pub names: Vec<Vec<u32>>,
    /// Fraction of the cluster's articles containing the first name term.
    pub coverage: Vec<f64>,
}

impl ClusterLevel {
    pub fn label(&self, cluster: usize, terms: &[String]) -> String {
        let parts: Vec<&str> = self.names[cluster].iter().map(|&t| terms[t as usize].as_str()).collect();
        parts.join(", ")
    }

    pub fn members(&self, cluster: u32) -> Vec<u32> {
        (0..self.article_assignment.len() as u32)
            .filter(|&a| self.article_assignment[a as usize] == cluster)
            .collect()
    }
}

/// Term statistics shared by every level of one corpus.
#[derive(Debug, Clone)]
pub struct TermStats<'a> {
    pub doc_terms: &'a [Vec<u32>],
    pub terms: &'a [String],
    pub df: Vec<u32>,
}

impl<'a> TermStats<'a> {
    /// `doc_terms[a]` lists the distinct term ids present in article `a`.
    pub fn new(doc_terms: &'a [Vec<u32>], terms: &'a [String]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Empty("vocabulary"));
        }
        let mut df = vec![0u32; terms.len()];
        for (a, set) in doc_terms.iter().enumerate() {
            for &t in set {
                let slot = df.get_mut(t as usize).ok_or_else(|| {
                    Error::ShapeMismatch(format!("article {a} references unknown term {t}"))
                })?;
                *slot += 1;
            }
        }
        Ok(Self { doc_terms, terms, df })
    }

    pub fn n_articles(&self) -> usize {
        self.doc_terms.len()
    }

    /// Per-term counts over a subset of articles.
    pub fn counts(&self, articles: &[u32]) -> Vec<u32> {
        let mut c = vec![0u32; self.terms.len()];
        for &a in articles {
            for &t in &self.doc_terms[a as usize] {
                c[t as usize] += 1;
            }
        }
        c
    }
}

/// i(w) − o(w) for a subset of `size` articles, kept as the exact numerator
/// `count·N − df·size` over the common denominator `size·N`.
#[derive(Debug, Clone, Copy)]
struct Scored {
    term: u32,
    num: i128,
}

fn score_order(stats: &TermStats<'_>, a: &Scored, b: &Scored) -> Ordering {
    b.num
        .cmp(&a.num)
        .then(stats.df[b.term as usize].cmp(&stats.df[a.term as usize]))
        .then(stats.terms[a.term as usize].cmp(&stats.terms[b.term as usize]))
}

/// Candidates ranked best-first.
fn ranked(stats: &TermStats<'_>, counts: &[u32], size: usize, candidates: impl Iterator<Item = u32>) -> Vec<u32> {
    let n = stats.n_articles() as i128;
    let mut v: Vec<Scored> = candidates
        .map(|t| Scored {
            term: t,
            num: counts[t as usize] as i128 * n - stats.df[t as usize] as i128 * size as i128,
        })
        .collect();
    v.sort_by(|a, b| score_order(stats, a, b));
    v.into_iter().map(|s| s.term).collect()
}

/// Names every cluster of `level` in place.
pub fn name_clusters(level: &mut ClusterLevel, stats: &TermStats<'_>) -> Result<()> {
    let k = level.k;
    let v = stats.terms.len() as u32;
    if level.word_assignment.len() != stats.terms.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} word assignments for {} terms",
            level.word_assignment.len(),
            stats.terms.len()
        )));
    }
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (a, &c) in level.article_assignment.iter().enumerate() {
        members[c as usize].push(a as u32);
    }
    let mut assigned: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (t, &c) in level.word_assignment.iter().enumerate() {
        assigned[c as usize].push(t as u32);
    }
    let adjacency = adjacent_clusters(&level.centroids);
    let neighbors_of = |c: usize| -> Vec<usize> {
        adjacency
            .iter()
            .filter_map(|&(i, j)| {
                if i as usize == c {
                    Some(j as usize)
                } else if j as usize == c {
                    Some(i as usize)
                } else {
                    None
                }
            })
            .collect()
    };
    let counts: Vec<Vec<u32>> = members.iter().map(|m| stats.counts(m)).collect();
    let mut first: Vec<Option<u32>> = vec![None; k];

    // clusters owning words, in index order; later ones yield on conflicts
    for c in 0..k {
        if assigned[c].is_empty() {
            continue;
        }
        let taken: Vec<u32> = neighbors_of(c).into_iter().filter(|&o| o < c).filter_map(|o| first[o]).collect();
        let pick = ranked(stats, &counts[c], members[c].len(), assigned[c].iter().copied())
            .into_iter()
            .find(|t| !taken.contains(t))
            .or_else(|| {
                ranked(stats, &counts[c], members[c].len(), 0..v)
                    .into_iter()
                    .find(|t| !taken.contains(t))
            });
        first[c] = pick;
    }
    // clusters without words draw from the global pool of unused words
    for c in 0..k {
        if first[c].is_some() {
            continue;
        }
        let adjacent: Vec<u32> = neighbors_of(c).into_iter().filter_map(|o| first[o]).collect();
        let ranking = ranked(stats, &counts[c], members[c].len(), 0..v);
        let pick = ranking
            .iter()
            .copied()
            .find(|t| !first.contains(&Some(*t)))
            .or_else(|| ranking.iter().copied().find(|t| !adjacent.contains(t)))
            .unwrap_or(ranking[0]);
        first[c] = Some(pick);
    }

    level.names = Vec::with_capacity(k);
    level.coverage = Vec::with_capacity(k);
    for c in 0..k {
        let w = first[c].unwrap();
        let size = members[c].len();
        let coverage = if size == 0 {
            0.0
        } else {
            counts[c][w as usize] as f64 / size as f64
        };
        let mut name = vec![w];
        if coverage < 0.5 {
            let rest: Vec<u32> = members[c]
                .iter()
                .copied()
                .filter(|&a| stats.doc_terms[a as usize].binary_search(&w).is_err())
                .collect();
            if !rest.is_empty() {
                let rc = stats.counts(&rest);
                let local: Vec<u32> = assigned[c].iter().copied().filter(|&t| t != w).collect();
                let second = if local.is_empty() {
                    ranked(stats, &rc, rest.len(), (0..v).filter(|&t| t != w))
                } else {
                    ranked(stats, &rc, rest.len(), local.into_iter())
                };
                if let Some(&s) = second.first() {
                    name.push(s);
                }
            }
        }
        level.names.push(name);
        level.coverage.push(coverage);
    }
    Ok(())
}

/// One independently clustered and named level per entry of `ks`.
pub fn build_levels(
    article_coords: &[Point],
    word_coords: &[Point],
    stats: &TermStats<'_>,
    ks: &[usize],
    seed: u64,
) -> Result<Vec<ClusterLevel>> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter("no cluster levels requested".into()));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("cluster counts {ks:?} are not strictly increasing")));
    }
    if article_coords.len() != stats.n_articles() {
        return Err(Error::ShapeMismatch(format!(
            "{} article coordinates for {} articles",
            article_coords.len(),
            stats.n_articles()
        )));
    }
    if word_coords.len() != stats.terms.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} word coordinates for {} terms",
            word_coords.len(),
            stats.terms.len()
        )));
    }
    ks.iter()
        .enumerate()
        .map(|(level, &k)| {
            let km = kmeans(article_coords, k, level_seed(seed, level))?;
            let mut out = ClusterLevel {
                level,
                k,
                word_assignment: assign_words(&km.centroids, word_coords),
                centroids: km.centroids,
                article_assignment: km.assignment,
                names: Vec::new(),
                coverage: Vec::new(),
            };
            name_clusters(&mut out, stats)?;
            Ok(out)
        })
        .collect()
}

pub fn level_seed(seed: u64, level: usize) -> u64 {
    seed ^ (level as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn saturated_clustering() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]];
        let km = kmeans(&pts, 4, 1).unwrap();
        assert_eq!(km.inertia(&pts), 0.0);
    }

    #[test]
    fn separated_pairs() {
        let pts = [[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]];
        let km = kmeans(&pts, 2, 3).unwrap();
        assert_eq!(km.assignment[0], km.assignment[1]);
        assert_eq!(km.assignment[2], km.assignment[3]);
        assert_ne!(km.assignment[0], km.assignment[2]);
    }

    #[test]
    fn bad_k() {
        assert!(kmeans(&[[0.0, 0.0]], 2, 0).is_err());
        assert!(kmeans(&[[0.0, 0.0]], 0, 0).is_err());
    }

    #[test]
    fn duplicates_with_k_equal_n() {
        let pts = [[1.0, 1.0]; 3];
        let km = kmeans(&pts, 3, 0).unwrap();
        assert_eq!(km.inertia(&pts), 0.0);
    }

    #[test]
    fn word_assignment_ties() {
        let c = [[0.0, 0.0], [2.0, 0.0]];
        assert_eq!(assign_words(&c, &[[1.0, 0.0], [2.0, 0.0]]), vec![0, 1]);
    }

    #[test]
    fn adjacency_is_mutual() {
        let c = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [100.0, 0.0]];
        let adj = adjacent_clusters(&c);
        assert!(adj.contains(&(0, 1)));
        // 4 lists 1,2,3 as nearest but none of them list 4
        assert!(!adj.iter().any(|&(_, j)| j == 4));
    }

    fn stats_fixture() -> (Vec<Vec<u32>>, Vec<String>) {
        // terms: 0 "alpha" (cluster A), 1 "beta" (cluster B), 2 "common" (all)
        let docs = vec![
            vec![0, 2],
            vec![0, 2],
            vec![0, 2],
            vec![1, 2],
            vec![1, 2],
            vec![2],
        ];
        let terms = ["alpha", "beta", "common"].iter().map(|s| s.to_string()).collect();
        (docs, terms)
    }

    #[test]
    fn naming_prefers_specific_terms() {
        let (docs, terms) = stats_fixture();
        let stats = TermStats::new(&docs, &terms).unwrap();
        let mut level = ClusterLevel {
            level: 0,
            k: 2,
            centroids: vec![[0.0, 0.0], [1.0, 1.0]],
            article_assignment: vec![0, 0, 0, 1, 1, 1],
            word_assignment: vec![0, 1, 0],
            names: vec![],
            coverage: vec![],
        };
        name_clusters(&mut level, &stats).unwrap();
        assert_eq!(level.names[0], vec![0]);
        assert_eq!(level.names[1][0], 1);
        assert_eq!(level.coverage[0], 1.0);
        assert!((level.coverage[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(level.names[1].len(), 1);
    }

    #[test]
    fn single_cluster_best_global_word() {
        let (docs, terms) = stats_fixture();
        let stats = TermStats::new(&docs, &terms).unwrap();
        let coords: Vec<Point> = (0..6).map(|i| [i as f64, 0.0]).collect();
        let levels = build_levels(&coords, &[[0.0, 0.0]; 3], &stats, &[1], 0).unwrap();
        // every score is 0; df breaks the tie
        assert_eq!(levels[0].names[0], vec![2]);
        assert!((levels[0].centroids[0][0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn level_preconditions() {
        let (docs, terms) = stats_fixture();
        let stats = TermStats::new(&docs, &terms).unwrap();
        let coords: Vec<Point> = (0..6).map(|i| [i as f64, 0.0]).collect();
        let w = [[0.0, 0.0]; 3];
        assert!(build_levels(&coords, &w, &stats, &[2, 2], 0).is_err());
        assert!(build_levels(&coords, &w, &stats, &[7], 0).is_err());
        assert_eq!(build_levels(&coords, &w, &stats, &[1, 2, 3, 6], 0).unwrap().len(), 4);
        assert!(TermStats::new(&docs, &[]).is_err());
    }

    #[test]
    fn second_word_when_coverage_low() {
        // cluster of 4: "x" in 1 article, "y" in the other 3
        let docs = vec![vec![0], vec![1], vec![1], vec![1], vec![2]];
        let terms: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let stats = TermStats::new(&docs, &terms).unwrap();
        let mut level = ClusterLevel {
            level: 0,
            k: 2,
            centroids: vec![[0.0, 0.0], [1.0, 1.0]],
            article_assignment: vec![0, 0, 0, 0, 1],
            word_assignment: vec![0, 1, 1],
            names: vec![],
            coverage: vec![],
        };
        name_clusters(&mut level, &stats).unwrap();
        // cluster 0 owns only "x": coverage 1/4, second word from the rest
        assert_eq!(level.names[0][0], 0);
        assert_eq!(level.names[0].len(), 2);
        assert_eq!(level.names[0][1], 1);
    }
}
