//! PNG encoding and the on-disk pyramid `layers/<layer>/<z>/<x>/<y>.png`.

use std::fs;
use std::path::{Path, PathBuf};

use cartomap_core::raster::{self, DensityScratch, Kernel, LevelBuckets, Tile, TileAddr, TILE_SIZE};
use cartomap_core::snapshot::MapSnapshot;
use cartomap_core::EntityType;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Encodes a 256×256 grey tile as an 8-bit single-channel, non-interlaced
/// PNG. Output bytes depend only on the pixels.
pub fn encode_png(pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), (TILE_SIZE * TILE_SIZE) as usize);
    let mut out = Vec::with_capacity(1024);
    {
        let mut enc = png::Encoder::new(&mut out, TILE_SIZE, TILE_SIZE);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(pixels).expect("in-memory PNG data");
    }
    out
}

/// Decodes a grey tile written by [`encode_png`].
pub fn decode_png(bytes: &[u8]) -> Result<Vec<u8>> {
    let dec = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = dec.read_info().map_err(|e| Error::Input(format!("bad PNG: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Input(format!("bad PNG: {e}")))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Input("PNG is not 8-bit greyscale".into()));
    }
    buf.truncate(info.buffer_size());
    Ok(buf)
}

pub fn tile_path(root: &Path, layer: &str, addr: TileAddr) -> PathBuf {
    root.join("layers")
        .join(layer)
        .join(addr.z.to_string())
        .join(addr.x.to_string())
        .join(format!("{}.png", addr.y))
}

/// Coordinates of one entity type.
pub fn layer_points(snap: &MapSnapshot, kind: EntityType) -> Vec<[f64; 2]> {
    snap.of_type(kind).iter().map(|e| [e.x, e.y]).collect()
}

/// Renders level `z` in parallel; same tiles as [`raster::render_level`].
pub fn render_level_par(points: &[[f64; 2]], z: u8, k: &Kernel) -> Result<Vec<Tile>> {
    let buckets = LevelBuckets::new(points, z)?;
    let candidates = buckets.candidate_tiles();
    let top = scale_par(&buckets, &candidates, k);
    Ok(TileAddr::level(z)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|addr| {
            if top.is_none() || candidates.binary_search_by(|c| (c.y, c.x).cmp(&(addr.y, addr.x))).is_err() {
                Tile::blank(addr)
            } else {
                Tile::from_density(addr, &buckets.render(addr, k), top)
            }
        })
        .collect())
}

/// Parallel version of [`raster::level_scale`]: per-chunk rank histograms
/// are merged, then the percentile is selected from the retained bin,
/// re-rendering only tiles whose maximum reaches it.
pub fn scale_par(buckets: &LevelBuckets, tiles: &[TileAddr], k: &Kernel) -> Option<f64> {
    if tiles.len() <= 4 {
        let mut sc = DensityScratch::default();
        return raster::level_scale(tiles, |t| buckets.render_nonzero(t, k, &mut sc));
    }
    let (hist, maxima) = tiles
        .par_iter()
        .fold(
            || (raster::RankHistogram::default(), Vec::new(), DensityScratch::default()),
            |(mut h, mut ms, mut sc), &t| {
                let mut m = 0.0f64;
                for v in buckets.render_nonzero(t, k, &mut sc) {
                    h.add(v);
                    m = m.max(v);
                }
                ms.push((t, m));
                (h, ms, sc)
            },
        )
        .map(|(h, ms, _)| (h, ms))
        .reduce(
            || (raster::RankHistogram::default(), Vec::new()),
            |(mut a, mut am), (b, bm)| {
                a.merge(&b);
                am.extend(bm);
                (a, am)
            },
        );
    let (bin, rank) = hist.locate_p999()?;
    let hot: Vec<TileAddr> = maxima.into_iter().filter(|&(_, m)| raster::reaches_rank_bin(m, bin)).map(|(t, _)| t).collect();
    let in_bin: Vec<f64> = hot
        .par_iter()
        .map_init(DensityScratch::default, |sc, &t| {
            buckets.render_nonzero(t, k, sc).into_iter().filter(|&v| raster::in_rank_bin(v, bin)).collect::<Vec<_>>()
        })
        .flatten_iter()
        .collect();
    Some(raster::select_rank(in_bin, rank))
}

/// `layers/manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidManifest {
    pub layers: Vec<String>,
    pub zmax: u8,
    pub sigma: f64,
    pub tile_size: u32,
}

pub fn read_pyramid_manifest(root: &Path) -> Result<PyramidManifest> {
    let p = root.join("layers").join("manifest.json");
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&p, e.to_string()))
}

/// Writes the pyramid of each layer and its manifest; returns the number
/// of tiles written.
pub fn write_pyramid(root: &Path, snap: &MapSnapshot, layers: &[EntityType], zmax: u8, sigma: f64) -> Result<usize> {
    let k = Kernel::new(sigma)?;
    let mut written = 0;
    let dir = root.join("layers");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest = PyramidManifest {
        layers: layers.iter().map(|k| k.layer_name().to_string()).collect(),
        zmax,
        sigma,
        tile_size: TILE_SIZE,
    };
    let p = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&p, e.to_string()))?;
    fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
    for &kind in layers {
        let points = layer_points(snap, kind);
        for z in 0..=zmax {
            let tiles = render_level_par(&points, z, &k)?;
            for x in 0..raster::tiles_per_side(z) {
                let dir = root.join("layers").join(kind.layer_name()).join(z.to_string()).join(x.to_string());
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
            tiles.par_iter().try_for_each(|t| {
                let p = tile_path(root, kind.layer_name(), t.addr);
                fs::write(&p, encode_png(&t.pixels)).map_err(|e| Error::io(&p, e))
            })?;
            written += tiles.len();
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_deterministic() {
        let px: Vec<u8> = (0..256 * 256).map(|i| (i * 7 % 251) as u8).collect();
        let a = encode_png(&px);
        assert_eq!(a, encode_png(&px));
        assert_eq!(&a[..8], b"\x89PNG\r\n\x1a\n");
        assert_eq!(decode_png(&a).unwrap(), px);
    }

    #[test]
    fn parallel_level_matches_serial() {
        let pts: Vec<[f64; 2]> = (0..500).map(|i| [(i as f64 * 0.618).fract(), (i as f64 * 0.377).fract()]).collect();
        let k = Kernel::new(1.5).unwrap();
        for z in 0..3 {
            assert_eq!(render_level_par(&pts, z, &k).unwrap(), raster::render_level(&pts, z, 1.5).unwrap());
        }
    }
}
