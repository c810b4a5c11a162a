//! Exhaustive restatement of the cluster naming rules.

#![allow(dead_code)]

use cartomap_core::landmarks::{adjacent_clusters, ClusterLevel};

/// Exact score i(w) - o(w) as a reduced fraction compared by cross products.
fn score(w: u32, members: &[u32], docs: &[Vec<u32>]) -> (i64, i64) {
    let inside = members.iter().filter(|&&a| docs[a as usize].contains(&w)).count() as i64;
    let all = docs.iter().filter(|d| d.contains(&w)).count() as i64;
    (inside * docs.len() as i64 - all * members.len() as i64, members.len() as i64 * docs.len() as i64)
}

/// Best candidate under (score desc, df desc, term asc), skipping `banned`.
fn best(cands: &[u32], members: &[u32], docs: &[Vec<u32>], terms: &[String], banned: &[u32]) -> Option<u32> {
    let df = |w: u32| docs.iter().filter(|d| d.contains(&w)).count();
    let mut ranked: Vec<u32> = cands.iter().copied().filter(|w| !banned.contains(w)).collect();
    ranked.sort_by(|&a, &b| {
        let (na, da) = score(a, members, docs);
        let (nb, db) = score(b, members, docs);
        // descending score: compare nb/db with na/da
        (nb as i128 * da as i128)
            .cmp(&(na as i128 * db as i128))
            .then(df(b).cmp(&df(a)))
            .then(terms[a as usize].cmp(&terms[b as usize]))
    });
    ranked.first().copied()
}

/// Straightforward restatement of the naming rules.
pub fn oracle(level: &ClusterLevel, docs: &[Vec<u32>], terms: &[String]) -> Vec<Vec<u32>> {
    let k = level.k;
    let v: Vec<u32> = (0..terms.len() as u32).collect();
    let members: Vec<Vec<u32>> = (0..k as u32).map(|c| level.members(c)).collect();
    let assigned: Vec<Vec<u32>> = (0..k as u32)
        .map(|c| v.iter().copied().filter(|&t| level.word_assignment[t as usize] == c).collect())
        .collect();
    let adj = adjacent_clusters(&level.centroids);
    let is_adj = |a: usize, b: usize| adj.contains(&(a.min(b) as u32, a.max(b) as u32));
    let mut first: Vec<Option<u32>> = vec![None; k];
    for c in 0..k {
        if assigned[c].is_empty() {
            continue;
        }
        let taken: Vec<u32> = (0..c).filter(|&o| is_adj(o, c)).filter_map(|o| first[o]).collect();
        first[c] = best(&assigned[c], &members[c], docs, terms, &taken).or_else(|| best(&v, &members[c], docs, terms, &taken));
    }
    for c in 0..k {
        if first[c].is_some() {
            continue;
        }
        let used: Vec<u32> = first.iter().flatten().copied().collect();
        let adjacent: Vec<u32> = (0..k).filter(|&o| o != c && is_adj(o, c)).filter_map(|o| first[o]).collect();
        first[c] = best(&v, &members[c], docs, terms, &used)
            .or_else(|| best(&v, &members[c], docs, terms, &adjacent))
            .or_else(|| best(&v, &members[c], docs, terms, &[]));
    }
    (0..k)
        .map(|c| {
            let w = first[c].unwrap();
            let m = &members[c];
            let cov = m.iter().filter(|&&a| docs[a as usize].contains(&w)).count();
            let mut name = vec![w];
            if !m.is_empty() && 2 * cov < m.len() {
                let rest: Vec<u32> = m.iter().copied().filter(|&a| !docs[a as usize].contains(&w)).collect();
                if !rest.is_empty() {
                    let local: Vec<u32> = assigned[c].iter().copied().filter(|&t| t != w).collect();
                    let pool: Vec<u32> = if local.is_empty() { v.iter().copied().filter(|&t| t != w).collect() } else { local };
                    if let Some(s) = best(&pool, &rest, docs, terms, &[]) {
                        name.push(s);
                    }
                }
            }
            name
        })
        .collect()
}

pub fn level(centroids: Vec<[f64; 2]>, article_assignment: Vec<u32>, word_assignment: Vec<u32>) -> ClusterLevel {
    ClusterLevel {
        level: 0,
        k: centroids.len(),
        centroids,
        article_assignment,
        word_assignment,
        names: vec![],
        coverage: vec![],
    }
}

pub fn terms(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i:02}")).collect()
}
