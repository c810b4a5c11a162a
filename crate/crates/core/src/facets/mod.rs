//! Facet and tile indices over snapshot entities, and filter evaluation.

mod filter;
mod idset;

pub use filter::{Clause, FilterExpr};
pub use idset::CompressedIdSet;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::EntityType;
use crate::error::{Error, Result};
use crate::raster::{self, TileAddr};
use crate::snapshot::MapSnapshot;

/// Which facets to index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum FacetSpec {
    /// Entity type, values `article`, `word`, `author`, `lab`.
    Type,
    /// Lab label → the lab's articles and authors.
    Lab,
    /// Author label → the author's articles.
    Author,
    /// Term → articles containing it.
    Term,
    /// Metadata value of the given key (the `year` facet is `Meta("year")`).
    Meta(String),
}

impl FacetSpec {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "type" => FacetSpec::Type,
            "lab" => FacetSpec::Lab,
            "author" => FacetSpec::Author,
            "term" => FacetSpec::Term,
            "year" => FacetSpec::Meta("year".into()),
            _ => match s.strip_prefix("meta:") {
                Some(k) if !k.is_empty() => FacetSpec::Meta(k.into()),
                _ => return Err(Error::UnknownFacet(s.into())),
            },
        })
    }

    /// Name used in filter expressions.
    pub fn name(&self) -> String {
        match self {
            FacetSpec::Type => "type".into(),
            FacetSpec::Lab => "lab".into(),
            FacetSpec::Author => "author".into(),
            FacetSpec::Term => "term".into(),
            FacetSpec::Meta(k) => k.clone(),
        }
    }

    pub fn defaults() -> Vec<FacetSpec> {
        vec![
            FacetSpec::Type,
            FacetSpec::Lab,
            FacetSpec::Meta("year".into()),
            FacetSpec::Term,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetIndex {
    pub universe: CompressedIdSet,
    pub facets: BTreeMap<String, BTreeMap<String, CompressedIdSet>>,
}

impl FacetIndex {
    pub fn build(snapshot: &MapSnapshot, specs: &[FacetSpec]) -> Result<Self> {
        let n = snapshot.entities.len() as u32;
        let mut facets = BTreeMap::new();
        for spec in specs {
            let mut values: BTreeMap<String, Vec<u32>> = BTreeMap::new();
            match spec {
                FacetSpec::Type => {
                    for e in &snapshot.entities {
                        values.entry(e.kind.as_str().into()).or_default().push(e.id);
                    }
                }
                FacetSpec::Lab | FacetSpec::Author | FacetSpec::Term => {
                    let kind = match spec {
                        FacetSpec::Lab => EntityType::Lab,
                        FacetSpec::Author => EntityType::Author,
                        _ => EntityType::Word,
                    };
                    for e in snapshot.of_type(kind) {
                        values.entry(e.label.clone()).or_default().extend(&e.related);
                    }
                }
                FacetSpec::Meta(key) => {
                    let mut seen = false;
                    for e in &snapshot.entities {
                        if let Some(v) = e.metadata.get(key) {
                            seen = true;
                            values.entry(v.clone()).or_default().push(e.id);
                        }
                    }
                    if !seen {
                        return Err(Error::MissingMetadataField {
                            facet: spec.name(),
                            field: key.clone(),
                        });
                    }
                }
            }
            let sets = values
                .into_iter()
                .map(|(v, ids)| (v, CompressedIdSet::from_unsorted(ids)))
                .collect();
            facets.insert(spec.name(), sets);
        }
        Ok(Self {
            universe: CompressedIdSet::full(n),
            facets,
        })
    }

    /// Facet names with their values and set sizes.
    pub fn catalog(&self) -> Vec<(String, Vec<(String, u64)>)> {
        self.facets
            .iter()
            .map(|(f, vals)| (f.clone(), vals.iter().map(|(v, s)| (v.clone(), s.len())).collect()))
            .collect()
    }

    pub fn value_set(&self, facet: &str, value: &str) -> Result<&CompressedIdSet> {
        let vals = self
            .facets
            .get(facet)
            .ok_or_else(|| Error::UnknownFacet(facet.to_string()))?;
        vals.get(value).ok_or_else(|| Error::UnknownFacetValue {
            facet: facet.to_string(),
            value: value.to_string(),
        })
    }

    /// Ids satisfying the expression: OR within a clause, AND across clauses.
    pub fn eval(&self, expr: &FilterExpr) -> Result<CompressedIdSet> {
        let mut acc: Option<CompressedIdSet> = None;
        for clause in &expr.clauses {
            let mut u = CompressedIdSet::new();
            for v in &clause.values {
                u = u.union(self.value_set(&clause.facet, v)?);
            }
            acc = Some(match acc {
                None => u,
                Some(a) => a.intersect(&u),
            });
        }
        Ok(acc.unwrap_or_else(|| self.universe.clone()))
    }

    /// Binary layout, all integers little endian:
    /// `"CMFX"`, u32 universe size, u32 facet count, then per facet
    /// u32 name length, name bytes, u32 value count, and per value u32 value
    /// length, value bytes, u32 blob length, blob (portable roaring format).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = b"CMFX".to_vec();
        out.extend_from_slice(&(self.universe.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.facets.len() as u32).to_le_bytes());
        for (f, vals) in &self.facets {
            put_str(&mut out, f);
            out.extend_from_slice(&(vals.len() as u32).to_le_bytes());
            for (v, set) in vals {
                put_str(&mut out, v);
                put_blob(&mut out, &set.serialize());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != b"CMFX" {
            return Err(Error::CorruptIdSet("bad facet index magic"));
        }
        let n = r.u32()?;
        let nf = r.u32()?;
        let mut facets = BTreeMap::new();
        for _ in 0..nf {
            let f = r.string()?;
            let nv = r.u32()?;
            let mut vals = BTreeMap::new();
            for _ in 0..nv {
                let v = r.string()?;
                let set = CompressedIdSet::deserialize(r.blob()?)?;
                vals.insert(v, set);
            }
            facets.insert(f, vals);
        }
        r.finish()?;
        Ok(Self {
            universe: CompressedIdSet::full(n),
            facets,
        })
    }
}

/// Per-zoom partition of entity ids by tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileIndex {
    pub zmax: u8,
    /// `levels[z]` holds `4^z` sets in row-major tile order.
    levels: Vec<Vec<CompressedIdSet>>,
}

impl TileIndex {
    pub fn build(snapshot: &MapSnapshot, zmax: u8) -> Result<Self> {
        let coords = snapshot.coords();
        raster::check_points(&coords)?;
        if zmax > 12 {
            return Err(Error::InvalidParameter(format!("tile index zoom {zmax} is too deep")));
        }
        let levels = (0..=zmax)
            .map(|z| {
                let side = raster::tiles_per_side(z) as usize;
                let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); side * side];
                for (id, &p) in coords.iter().enumerate() {
                    let (x, y) = raster::tile_of(p, z);
                    buckets[y as usize * side + x as usize].push(id as u32);
                }
                buckets
                    .into_iter()
                    .map(|ids| CompressedIdSet::from_sorted_iter(ids).expect("ids in entity order"))
                    .collect()
            })
            .collect();
        Ok(Self { zmax, levels })
    }

    pub fn tile(&self, addr: TileAddr) -> Option<&CompressedIdSet> {
        let level = self.levels.get(addr.z as usize)?;
        let side = raster::tiles_per_side(addr.z);
        level.get((addr.y * side + addr.x) as usize)
    }

    /// Ids in the tile and its neighbors, which covers the blur apron.
    pub fn window(&self, addr: TileAddr) -> CompressedIdSet {
        CompressedIdSet::union_all(addr.neighborhood().filter_map(|t| self.tile(t)))
    }

    /// Layout: `"CMTX"`, u8 zmax, then for every tile of every level in
    /// row-major order a u32 blob length and the blob.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = b"CMTX".to_vec();
        out.push(self.zmax);
        for level in &self.levels {
            for set in level {
                put_blob(&mut out, &set.serialize());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != b"CMTX" {
            return Err(Error::CorruptIdSet("bad tile index magic"));
        }
        let zmax = r.take(1)?[0];
        if zmax > 12 {
            return Err(Error::CorruptIdSet("tile index zoom too deep"));
        }
        let mut levels = Vec::new();
        for z in 0..=zmax {
            let side = raster::tiles_per_side(z) as usize;
            let mut level = Vec::with_capacity(side * side);
            for _ in 0..side * side {
                level.push(CompressedIdSet::deserialize(r.blob()?)?);
            }
            levels.push(level);
        }
        r.finish()?;
        Ok(Self { zmax, levels })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_blob(out, s.as_bytes());
}

fn put_blob(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

struct ByteReader<'a> {
    b: &'a [u8],
    p: usize,
}

impl<'a> ByteReader<'a> {
    fn new(b: &'a [u8]) -> Self {
        Self { b, p: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        match self.p.checked_add(n).filter(|&e| e <= self.b.len()) {
            Some(e) => {
                let s = &self.b[self.p..e];
                self.p = e;
                Ok(s)
            }
            None => Err(Error::CorruptIdSet("truncated index")),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String> {
        core::str::from_utf8(self.blob()?)
            .map(String::from)
            .map_err(|_| Error::CorruptIdSet("invalid utf-8 in index"))
    }

    fn finish(&self) -> Result<()> {
        if self.p != self.b.len() {
            return Err(Error::CorruptIdSet("trailing bytes in index"));
        }
        Ok(())
    }
}
