//! Index directory: `manifest.json`, `facets.bin` (facet index) and
//! `tiles.bin` (per-tile id sets). Byte layouts are documented on
//! `FacetIndex::to_bytes` and `TileIndex::to_bytes`; every id set blob uses
//! the portable roaring serialization.

use std::fs;
use std::path::Path;

use cartomap_core::facets::{FacetIndex, FacetSpec, TileIndex};
use cartomap_core::snapshot::MapSnapshot;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FACETS: &str = "facets.bin";
pub const TILES: &str = "tiles.bin";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub entities: u32,
    pub facets: Vec<String>,
    pub zmax: u8,
    pub facets_sha256: String,
    pub tiles_sha256: String,
}

pub struct Indices {
    pub facets: FacetIndex,
    pub tiles: TileIndex,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn build_indices(snap: &MapSnapshot, specs: &[FacetSpec], zmax: u8) -> Result<Indices> {
    Ok(Indices {
        facets: FacetIndex::build(snap, specs)?,
        tiles: TileIndex::build(snap, zmax)?,
    })
}

pub fn write_indices(dir: &Path, idx: &Indices) -> Result<IndexManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fb = idx.facets.to_bytes();
    let tb = idx.tiles.to_bytes();
    let manifest = IndexManifest {
        entities: idx.facets.universe.len() as u32,
        facets: idx.facets.facets.keys().cloned().collect(),
        zmax: idx.tiles.zmax,
        facets_sha256: sha256_hex(&fb),
        tiles_sha256: sha256_hex(&tb),
    };
    for (name, bytes) in [(FACETS, &fb), (TILES, &tb)] {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    let p = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&p, e.to_string()))?;
    fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(manifest)
}

/// Loads indices and checks them against the manifest and the snapshot size.
pub fn load_indices(dir: &Path, n_entities: u32) -> Result<Indices> {
    let p = dir.join(MANIFEST);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let m: IndexManifest = serde_json::from_str(&text).map_err(|e| Error::format(&p, e.to_string()))?;
    if m.entities != n_entities {
        return Err(Error::format(
            &p,
            format!("index built for {} entities, snapshot has {n_entities}", m.entities),
        ));
    }
    let read = |name: &str, sha: &str| -> Result<Vec<u8>> {
        let p = dir.join(name);
        let b = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if sha256_hex(&b) != sha {
            return Err(Error::format(&p, "checksum does not match the index manifest"));
        }
        Ok(b)
    };
    let facets = FacetIndex::from_bytes(&read(FACETS, &m.facets_sha256)?)?;
    let tiles = TileIndex::from_bytes(&read(TILES, &m.tiles_sha256)?)?;
    Ok(Indices { facets, tiles })
}
