//! On-disk map snapshot: a directory holding
//!
//! * `manifest.json`: format version, entity counts per type, coordinate
//!   bounds and the number of cluster levels;
//! * `entities.jsonl`: one JSON object per entity in global id order with
//!   `id`, `type`, `label`, `score`, `metadata` and `related`;
//! * `clusters.json`: the named cluster levels;
//! * `geometry.bin`: little-endian binary block. Magic `CMGB`, u64 entity
//!   count, then `x`,`y` as f64 per entity, then per entity and per target
//!   type (article, word, author, lab) a u16 length followed by
//!   `(u32 global id, f32 distance)` pairs.
//!
//! Writing is byte-deterministic; loading validates every invariant.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use cartomap_core::snapshot::{
    MapSnapshot, SnapshotCluster, SnapshotEntity, SnapshotLevel, StoredNeighbor, FORMAT_VERSION,
};
use cartomap_core::EntityType;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const ENTITIES: &str = "entities.jsonl";
pub const CLUSTERS: &str = "clusters.json";
pub const GEOMETRY: &str = "geometry.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub format_version: String,
    pub counts: BTreeMap<String, u32>,
    /// `[x_min, y_min, x_max, y_max]` over all entities.
    pub bounds: [f64; 4],
    pub levels: usize,
}

#[derive(Serialize, Deserialize)]
struct EntityRow {
    id: u32,
    #[serde(rename = "type")]
    kind: String,
    label: String,
    score: f64,
    metadata: BTreeMap<String, String>,
    related: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct ClusterRow {
    label: String,
    terms: Vec<String>,
    x: f64,
    y: f64,
    size: u32,
    coverage: f64,
}

#[derive(Serialize, Deserialize)]
struct LevelRow {
    level: u32,
    k: u32,
    clusters: Vec<ClusterRow>,
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    Error::format(path, e.to_string())
}

pub fn write_snapshot(dir: &Path, snap: &MapSnapshot) -> Result<()> {
    snap.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let counts = snap.counts();
    let mut bounds = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for e in &snap.entities {
        bounds[0] = bounds[0].min(e.x);
        bounds[1] = bounds[1].min(e.y);
        bounds[2] = bounds[2].max(e.x);
        bounds[3] = bounds[3].max(e.y);
    }
    let manifest = SnapshotManifest {
        format_version: snap.format_version.clone(),
        counts: EntityType::ALL
            .iter()
            .map(|t| (t.as_str().to_string(), counts[t.index()]))
            .collect(),
        bounds,
        levels: snap.levels.len(),
    };
    let p = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| json_err(&p, e))?;
    fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;

    let p = dir.join(ENTITIES);
    let mut w = BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?);
    for e in &snap.entities {
        let row = EntityRow {
            id: e.id,
            kind: e.kind.as_str().to_string(),
            label: e.label.clone(),
            score: e.score,
            metadata: e.metadata.clone(),
            related: e.related.clone(),
        };
        serde_json::to_writer(&mut w, &row).map_err(|e| json_err(&p, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(&p, e))?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;

    let p = dir.join(CLUSTERS);
    let levels: Vec<LevelRow> = snap
        .levels
        .iter()
        .map(|l| LevelRow {
            level: l.level,
            k: l.k,
            clusters: l
                .clusters
                .iter()
                .map(|c| ClusterRow {
                    label: c.label.clone(),
                    terms: c.terms.clone(),
                    x: c.x,
                    y: c.y,
                    size: c.size,
                    coverage: c.coverage,
                })
                .collect(),
        })
        .collect();
    let text = serde_json::to_string_pretty(&levels).map_err(|e| json_err(&p, e))?;
    fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;

    let p = dir.join(GEOMETRY);
    let mut w = BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?);
    let mut put = |b: &[u8]| w.write_all(b).map_err(|e| Error::io(&p, e));
    put(b"CMGB")?;
    put(&(snap.entities.len() as u64).to_le_bytes())?;
    for e in &snap.entities {
        put(&e.x.to_le_bytes())?;
        put(&e.y.to_le_bytes())?;
    }
    for e in &snap.entities {
        for list in &e.neighbors {
            let len = u16::try_from(list.len()).map_err(|_| Error::Input(format!("entity {}: neighbor list too long", e.id)))?;
            put(&len.to_le_bytes())?;
            for nb in list {
                put(&nb.id.to_le_bytes())?;
                put(&nb.distance.to_le_bytes())?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&p, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let s = self.buf.get(self.pos..self.pos + N)?;
        self.pos += N;
        Some(s.try_into().unwrap())
    }
}

pub fn read_manifest(dir: &Path) -> Result<SnapshotManifest> {
    let p = dir.join(MANIFEST);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| json_err(&p, e))
}

/// Loads and validates a snapshot directory in one pass over each file.
pub fn load_snapshot(dir: &Path) -> Result<MapSnapshot> {
    let manifest = read_manifest(dir)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            dir.join(MANIFEST),
            format!(
                "unsupported format version {:?} (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        ));
    }

    let p = dir.join(ENTITIES);
    let r = BufReader::new(File::open(&p).map_err(|e| Error::io(&p, e))?);
    let mut entities = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&p, e))?;
        if line.is_empty() {
            continue;
        }
        let row: EntityRow =
            serde_json::from_str(&line).map_err(|e| Error::format(&p, format!("line {}: {e}", i + 1)))?;
        let kind = EntityType::parse(&row.kind)
            .ok_or_else(|| Error::format(&p, format!("line {}: entity {}: unknown type {:?}", i + 1, row.id, row.kind)))?;
        entities.push(SnapshotEntity {
            id: row.id,
            kind,
            label: row.label,
            score: row.score,
            x: 0.0,
            y: 0.0,
            neighbors: Default::default(),
            metadata: row.metadata,
            related: row.related,
        });
    }
    let expected: u32 = manifest.counts.values().sum();
    if expected as usize != entities.len() {
        return Err(Error::format(
            &p,
            format!("{} entities but the manifest declares {expected}", entities.len()),
        ));
    }

    let p = dir.join(CLUSTERS);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let rows: Vec<LevelRow> = serde_json::from_str(&text).map_err(|e| json_err(&p, e))?;
    let levels = rows
        .into_iter()
        .map(|l| SnapshotLevel {
            level: l.level,
            k: l.k,
            clusters: l
                .clusters
                .into_iter()
                .map(|c| SnapshotCluster {
                    label: c.label,
                    terms: c.terms,
                    x: c.x,
                    y: c.y,
                    size: c.size,
                    coverage: c.coverage,
                })
                .collect(),
        })
        .collect();

    let p = dir.join(GEOMETRY);
    let mut buf = Vec::new();
    File::open(&p)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(&p, e))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let truncated = || Error::format(&p, "truncated geometry block");
    if c.take::<4>().ok_or_else(truncated)? != *b"CMGB" {
        return Err(Error::format(&p, "bad magic"));
    }
    let n = u64::from_le_bytes(c.take().ok_or_else(truncated)?);
    if n != entities.len() as u64 {
        return Err(Error::format(&p, format!("geometry for {n} entities, {} listed", entities.len())));
    }
    for e in entities.iter_mut() {
        e.x = f64::from_le_bytes(c.take().ok_or_else(truncated)?);
        e.y = f64::from_le_bytes(c.take().ok_or_else(truncated)?);
    }
    for e in entities.iter_mut() {
        for list in e.neighbors.iter_mut() {
            let len = u16::from_le_bytes(c.take().ok_or_else(truncated)?);
            list.reserve(len as usize);
            for _ in 0..len {
                let id = u32::from_le_bytes(c.take().ok_or_else(truncated)?);
                let distance = f32::from_le_bytes(c.take().ok_or_else(truncated)?);
                list.push(StoredNeighbor { id, distance });
            }
        }
    }
    if c.pos != buf.len() {
        return Err(Error::format(&p, "trailing bytes after geometry block"));
    }

    let snap = MapSnapshot {
        format_version: manifest.format_version,
        entities,
        levels,
    };
    snap.validate()?;
    Ok(snap)
}
