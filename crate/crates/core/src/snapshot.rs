//! The exported map: every entity with its position, score, neighbors,
//! metadata and related entities, plus the named cluster levels.
//!
//! Ids are global and grouped by type in the order articles, words,
//! authors, labs; within a type they follow the catalog ids.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{CorpusRecord, EntityCatalog, EntityType};
use crate::error::{Error, Result};
use crate::landmarks::ClusterLevel;
use crate::neighbors::NeighborLists;
use crate::project2d::Point;
use crate::score::Scores;

pub const FORMAT_VERSION: &str = "cartomap/1";

/// Stored neighbor: global id and distance (single precision on disk).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoredNeighbor {
    pub id: u32,
    pub distance: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEntity {
    pub id: u32,
    pub kind: EntityType,
    pub label: String,
    pub score: f64,
    pub x: f64,
    pub y: f64,
    /// Indexed by target [`EntityType::index`].
    pub neighbors: [Vec<StoredNeighbor>; 4],
    pub metadata: BTreeMap<String, String>,
    /// Sorted global ids: lab → its articles and authors, author and word →
    /// their articles, article → its authors and labs.
    pub related: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotCluster {
    pub label: String,
    pub terms: Vec<String>,
    pub x: f64,
    pub y: f64,
    pub size: u32,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotLevel {
    pub level: u32,
    pub k: u32,
    pub clusters: Vec<SnapshotCluster>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSnapshot {
    pub format_version: String,
    pub entities: Vec<SnapshotEntity>,
    pub levels: Vec<SnapshotLevel>,
}

impl MapSnapshot {
    /// Entities per type, indexed by [`EntityType::index`].
    pub fn counts(&self) -> [u32; 4] {
        let mut c = [0u32; 4];
        for e in &self.entities {
            c[e.kind.index()] += 1;
        }
        c
    }

    /// First global id of each type.
    pub fn offsets(&self) -> [u32; 4] {
        type_offsets(self.counts())
    }

    pub fn get(&self, id: u32) -> Option<&SnapshotEntity> {
        self.entities.get(id as usize)
    }

    pub fn of_type(&self, kind: EntityType) -> &[SnapshotEntity] {
        let off = self.offsets();
        let counts = self.counts();
        let start = off[kind.index()] as usize;
        &self.entities[start..start + counts[kind.index()] as usize]
    }

    pub fn coords(&self) -> Vec<Point> {
        self.entities.iter().map(|e| [e.x, e.y]).collect()
    }

    /// Checks every invariant; errors name the offending entity.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidSnapshot(format!(
                "unsupported format version {:?} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.entities.is_empty() {
            return Err(Error::InvalidSnapshot("empty snapshot".into()));
        }
        let n = self.entities.len() as u32;
        let counts = self.counts();
        let offsets = type_offsets(counts);
        let mut prev_kind = 0;
        for (i, e) in self.entities.iter().enumerate() {
            let who = || format!("entity {} ({} {:?})", e.id, e.kind, e.label);
            if e.id != i as u32 {
                return Err(Error::InvalidSnapshot(format!("{}: id out of order at position {i}", who())));
            }
            if e.kind.index() < prev_kind {
                return Err(Error::InvalidSnapshot(format!("{}: entity types not grouped", who())));
            }
            prev_kind = e.kind.index();
            if !(e.score.is_finite() && e.score >= 0.0) {
                return Err(Error::InvalidSnapshot(format!("{}: invalid score {}", who(), e.score)));
            }
            if !in_unit(e.x) || !in_unit(e.y) {
                return Err(Error::InvalidSnapshot(format!(
                    "{}: coordinates ({}, {}) outside [0,1]",
                    who(),
                    e.x,
                    e.y
                )));
            }
            for (t, list) in e.neighbors.iter().enumerate() {
                let lo = offsets[t];
                let hi = lo + counts[t];
                for (p, nb) in list.iter().enumerate() {
                    if nb.id < lo || nb.id >= hi {
                        return Err(Error::InvalidSnapshot(format!(
                            "{}: neighbor id {} is not a {}",
                            who(),
                            nb.id,
                            EntityType::ALL[t]
                        )));
                    }
                    if !(nb.distance.is_finite() && nb.distance >= 0.0) {
                        return Err(Error::InvalidSnapshot(format!(
                            "{}: neighbor id {} has invalid distance",
                            who(),
                            nb.id
                        )));
                    }
                    if p > 0 && list[p - 1].distance > nb.distance {
                        return Err(Error::InvalidSnapshot(format!(
                            "{}: neighbor list not sorted at id {}",
                            who(),
                            nb.id
                        )));
                    }
                }
            }
            for w in e.related.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidSnapshot(format!("{}: related ids not strictly increasing", who())));
                }
            }
            if let Some(&bad) = e.related.iter().find(|&&r| r >= n) {
                return Err(Error::InvalidSnapshot(format!("{}: related id {bad} does not exist", who())));
            }
        }
        for lv in &self.levels {
            if lv.clusters.len() != lv.k as usize {
                return Err(Error::InvalidSnapshot(format!(
                    "cluster level {}: {} clusters for k = {}",
                    lv.level,
                    lv.clusters.len(),
                    lv.k
                )));
            }
            for (c, cl) in lv.clusters.iter().enumerate() {
                if !in_unit(cl.x) || !in_unit(cl.y) || cl.terms.is_empty() {
                    return Err(Error::InvalidSnapshot(format!(
                        "cluster {c} of level {}: invalid position or empty name",
                        lv.level
                    )));
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

pub fn type_offsets(counts: [u32; 4]) -> [u32; 4] {
    let mut off = [0u32; 4];
    for t in 1..4 {
        off[t] = off[t - 1] + counts[t - 1];
    }
    off
}

/// Everything needed to assemble a snapshot.
pub struct SnapshotInputs<'a> {
    pub catalog: &'a EntityCatalog,
    /// Source records in article order, for metadata.
    pub records: &'a [CorpusRecord],
    /// Normalized coordinates per type.
    pub coords: &'a [Vec<Point>; 4],
    pub scores: &'a Scores,
    /// Neighbor lists for any (query type, target type) pairs that were computed.
    pub neighbors: &'a [NeighborLists],
    pub levels: &'a [ClusterLevel],
    /// Vocabulary terms, for cluster names.
    pub terms: &'a [String],
}

pub fn assemble_snapshot(input: &SnapshotInputs<'_>) -> Result<MapSnapshot> {
    let cat = input.catalog;
    let counts = EntityType::ALL.map(|t| cat.count(t) as u32);
    let offsets = type_offsets(counts);
    for t in EntityType::ALL {
        let i = t.index();
        if input.coords[i].len() != counts[i] as usize || input.scores[i].len() != counts[i] as usize {
            return Err(Error::ShapeMismatch(format!("coordinates or scores for {} do not match the catalog", t.layer_name())));
        }
    }
    if input.records.len() != cat.n_articles() {
        return Err(Error::ShapeMismatch(format!(
            "{} records for {} articles",
            input.records.len(),
            cat.n_articles()
        )));
    }

    // article → authors and labs
    let mut article_related: Vec<Vec<u32>> = vec![Vec::new(); cat.n_articles()];
    for kind in [EntityType::Author, EntityType::Lab] {
        for e in cat.of_type(kind) {
            for &a in &e.doc_refs {
                article_related[a as usize].push(offsets[kind.index()] + e.id);
            }
        }
    }
    // lab → authors that co-sign its articles
    let mut lab_authors: Vec<Vec<u32>> = vec![Vec::new(); cat.labs.len()];
    for lab in &cat.labs {
        let set = &mut lab_authors[lab.id as usize];
        for &a in &lab.doc_refs {
            set.extend(
                article_related[a as usize]
                    .iter()
                    .copied()
                    .filter(|&g| g >= offsets[2] && g < offsets[3]),
            );
        }
    }

    let mut entities = Vec::with_capacity(counts.iter().sum::<u32>() as usize);
    for kind in EntityType::ALL {
        let ti = kind.index();
        for e in cat.of_type(kind) {
            let local = e.id as usize;
            let p = input.coords[ti][local];
            let mut metadata = BTreeMap::new();
            let mut related: Vec<u32> = match kind {
                EntityType::Article => {
                    let r = &input.records[local];
                    metadata.insert("doc_id".into(), r.doc_id.clone());
                    if let Some(y) = r.pub_year {
                        metadata.insert("year".into(), format!("{y}"));
                    }
                    if let Some(d) = r.domain_tag.as_ref().filter(|d| !d.is_empty()) {
                        metadata.insert("domain".into(), d.clone());
                    }
                    if !r.keywords.is_empty() {
                        metadata.insert("keywords".into(), r.keywords.join("; "));
                    }
                    article_related[local].clone()
                }
                EntityType::Lab => {
                    let mut v: Vec<u32> = e.doc_refs.iter().map(|&a| offsets[0] + a).collect();
                    v.extend(&lab_authors[local]);
                    v
                }
                _ => e.doc_refs.iter().map(|&a| offsets[0] + a).collect(),
            };
            if kind != EntityType::Article {
                metadata.insert("articles".into(), format!("{}", e.doc_refs.len()));
            }
            related.sort_unstable();
            related.dedup();
            entities.push(SnapshotEntity {
                id: offsets[ti] + e.id,
                kind,
                label: e.label.clone(),
                score: input.scores[ti][local],
                x: p[0],
                y: p[1],
                neighbors: Default::default(),
                metadata,
                related,
            });
        }
    }
    for lists in input.neighbors {
        let (qi, ti) = (lists.query_kind.index(), lists.target_kind.index());
        if lists.lists.len() != counts[qi] as usize {
            return Err(Error::ShapeMismatch(format!(
                "{} neighbor lists for {} {}",
                lists.lists.len(),
                counts[qi],
                lists.query_kind.layer_name()
            )));
        }
        for (q, list) in lists.lists.iter().enumerate() {
            let slot = &mut entities[(offsets[qi] + q as u32) as usize].neighbors[ti];
            *slot = list
                .iter()
                .map(|nb| StoredNeighbor {
                    id: offsets[ti] + nb.id,
                    distance: nb.distance as f32,
                })
                .collect();
        }
    }

    let levels = input
        .levels
        .iter()
        .map(|lv| SnapshotLevel {
            level: lv.level as u32,
            k: lv.k as u32,
            clusters: (0..lv.k)
                .map(|c| {
                    let terms: Vec<String> = lv.names[c].iter().map(|&t| input.terms[t as usize].clone()).collect();
                    SnapshotCluster {
                        label: terms.join(", "),
                        terms,
                        x: lv.centroids[c][0].clamp(0.0, 1.0),
                        y: lv.centroids[c][1].clamp(0.0, 1.0),
                        size: lv.article_assignment.iter().filter(|&&a| a as usize == c).count() as u32,
                        coverage: lv.coverage[c],
                    }
                })
                .collect(),
        })
        .collect();

    let snap = MapSnapshot {
        format_version: FORMAT_VERSION.into(),
        entities,
        levels,
    };
    snap.validate()?;
    Ok(snap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MapSnapshot {
        let mk = |id: u32, kind, x| SnapshotEntity {
            id,
            kind,
            label: format!("e{id}"),
            score: 1.0,
            x,
            y: 0.5,
            neighbors: Default::default(),
            metadata: BTreeMap::new(),
            related: vec![],
        };
        let mut a = mk(0, EntityType::Article, 0.1);
        a.neighbors[0] = vec![StoredNeighbor { id: 1, distance: 0.5 }];
        MapSnapshot {
            format_version: FORMAT_VERSION.into(),
            entities: vec![a, mk(1, EntityType::Article, 0.2), mk(2, EntityType::Author, 0.3)],
            levels: vec![],
        }
    }

    #[test]
    fn valid_and_offsets() {
        let s = tiny();
        s.validate().unwrap();
        assert_eq!(s.counts(), [2, 0, 1, 0]);
        assert_eq!(s.offsets(), [0, 2, 2, 3]);
        assert_eq!(s.of_type(EntityType::Author)[0].id, 2);
    }

    #[test]
    fn tampered_neighbor_named() {
        let mut s = tiny();
        s.entities[0].neighbors[0][0].id = 7;
        let err = s.validate().unwrap_err();
        assert!(format!("{err}").contains("neighbor id 7"), "{err}");
    }

    #[test]
    fn empty_and_version() {
        let mut s = tiny();
        s.entities.clear();
        assert!(format!("{}", s.validate().unwrap_err()).contains("empty snapshot"));
        let mut s = tiny();
        s.format_version = "cartomap/9".into();
        assert!(s.validate().is_err());
        let mut s = tiny();
        s.entities[1].x = 1.5;
        assert!(s.validate().is_err());
    }
}
