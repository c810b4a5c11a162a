//! Density images by direct kernel splatting over the whole level.

#![allow(dead_code)]

use cartomap_core::raster::{TileAddr, TILE_SIZE};

/// Full image at zoom `z` by splatting each point's normalized kernel directly.
pub fn splat(points: &[[f64; 2]], z: u8, sigma: f64) -> (usize, Vec<f64>) {
    let size = (TILE_SIZE as usize) << z;
    let r = (3.0 * sigma).ceil() as i64;
    let w = |t: i64| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp();
    let norm = |p: i64| (-r..=r).filter(|t| (0..size as i64).contains(&(p + t))).map(w).sum::<f64>();
    let mut img = vec![0.0; size * size];
    for p in points {
        let px = ((p[0] * size as f64).floor() as i64).clamp(0, size as i64 - 1);
        let py = ((p[1] * size as f64).floor() as i64).clamp(0, size as i64 - 1);
        let (zx, zy) = (norm(px), norm(py));
        for dy in -r..=r {
            for dx in -r..=r {
                let (gx, gy) = (px + dx, py + dy);
                if (0..size as i64).contains(&gx) && (0..size as i64).contains(&gy) {
                    img[gy as usize * size + gx as usize] += w(dx) * w(dy) / (zx * zy);
                }
            }
        }
    }
    (size, img)
}

pub fn crop(img: &[f64], size: usize, a: TileAddr) -> Vec<f64> {
    let ts = TILE_SIZE as usize;
    let mut out = Vec::with_capacity(ts * ts);
    for row in 0..ts {
        let start = (a.y as usize * ts + row) * size + a.x as usize * ts;
        out.extend_from_slice(&img[start..start + ts]);
    }
    out
}

/// 99.9th percentile by nearest rank over nonzero values.
pub fn p999(values: &[f64]) -> Option<f64> {
    let mut nz: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    if nz.is_empty() {
        return None;
    }
    nz.sort_by(f64::total_cmp);
    let rank = ((0.999 * nz.len() as f64).ceil() as usize).max(1);
    Some(nz[rank - 1])
}

/// Grey level of `v` under the tone curve topped at `top`.
pub fn grey(v: f64, top: Option<f64>) -> i32 {
    match top {
        Some(t) if v > 0.0 => (255.0 * v.ln_1p() / t.ln_1p()).round().clamp(0.0, 255.0) as i32,
        _ => 0,
    }
}
