//! Cluster naming against an exhaustive scorer.

#[path = "support/naming_oracle.rs"]
mod naming_oracle;

use cartomap_core::landmarks::{adjacent_clusters, name_clusters, ClusterLevel, TermStats};
use naming_oracle::{level, oracle, terms};
use proptest::prelude::*;

fn check(mut lv: ClusterLevel, docs: &[Vec<u32>], terms: &[String]) -> ClusterLevel {
    let stats = TermStats::new(docs, terms).unwrap();
    let want = oracle(&lv, docs, terms);
    name_clusters(&mut lv, &stats).unwrap();
    assert_eq!(lv.names, want);
    lv
}

#[test]
fn two_clusters_pick_their_own_terms() {
    // cluster 0: articles 0..4 all use t00; cluster 1: articles 4..8 all use t01; t02 everywhere
    let docs: Vec<Vec<u32>> = (0..8).map(|a| if a < 4 { vec![0, 2] } else { vec![1, 2] }).collect();
    let lv = check(
        level(vec![[0.2, 0.5], [0.8, 0.5]], vec![0, 0, 0, 0, 1, 1, 1, 1], vec![0, 1, 0]),
        &docs,
        &terms(3),
    );
    assert_eq!(lv.names, vec![vec![0], vec![1]]);
    assert_eq!(lv.coverage, vec![1.0, 1.0]);
}

#[test]
fn second_word_below_half_coverage() {
    // best term of cluster 0 appears in 2 of its 5 articles
    let docs = vec![vec![0], vec![0], vec![3], vec![4], vec![3, 4], vec![1], vec![1], vec![1], vec![1], vec![1]];
    let lv = check(
        level(vec![[0.2, 0.5], [0.8, 0.5]], vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1], vec![0, 1, 1, 0, 0]),
        &docs,
        &terms(5),
    );
    assert!(lv.coverage[0] < 0.5);
    assert_eq!(lv.names[0], vec![0, 3]);
    assert_eq!(lv.names[1].len(), 1);
}

#[test]
fn adjacent_clusters_get_distinct_first_terms() {
    // t00 is the best term for both clusters
    let docs: Vec<Vec<u32>> = (0..8).map(|a| if a < 4 { vec![0, 1] } else { vec![0, 2] }).collect();
    let lv = check(
        level(vec![[0.2, 0.5], [0.8, 0.5]], vec![0, 0, 0, 0, 1, 1, 1, 1], vec![0, 0, 1]),
        &docs,
        &terms(3),
    );
    assert_ne!(lv.names[0][0], lv.names[1][0]);
}

#[test]
fn wordless_cluster_draws_from_unused_pool() {
    let docs: Vec<Vec<u32>> = (0..9).map(|a| vec![(a / 3) as u32, 3]).collect();
    check(
        level(vec![[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]], vec![0, 0, 0, 1, 1, 1, 2, 2, 2], vec![0, 0, 0, 1]),
        &docs,
        &terms(4),
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_exhaustive_enumeration(
        k in 1usize..5,
        n_terms in 1usize..9,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n_docs = k * 3 + r.gen_range(0..6);
        let docs: Vec<Vec<u32>> = (0..n_docs)
            .map(|_| (0..n_terms as u32).filter(|_| r.gen_bool(0.35)).collect())
            .collect();
        let assign: Vec<u32> = (0..n_docs).map(|a| (a % k) as u32).collect();
        let words: Vec<u32> = (0..n_terms).map(|_| r.gen_range(0..k as u32)).collect();
        let centroids: Vec<[f64; 2]> = (0..k).map(|_| [r.gen(), r.gen()]).collect();
        let t = terms(n_terms);
        let mut lv = level(centroids, assign, words);
        let stats = TermStats::new(&docs, &t).unwrap();
        let want = oracle(&lv, &docs, &t);
        name_clusters(&mut lv, &stats).unwrap();
        prop_assert_eq!(&lv.names, &want);
        for c in (0..k).filter(|_| n_terms >= 2) {
            prop_assert_eq!(lv.names[c].len() == 2, lv.coverage[c] < 0.5 && {
                let w = lv.names[c][0];
                lv.members(c as u32).iter().any(|&a| !docs[a as usize].contains(&w))
            });
        }
        for (a, b) in adjacent_clusters(&lv.centroids).into_iter().filter(|_| n_terms >= k) {
            prop_assert_ne!(lv.names[a as usize][0], lv.names[b as usize][0]);
        }
    }
}
