//! Density rasters: histogram, Gaussian blur, log tone mapping and tiling.
//!
//! A zoom level `z` is a square image of `256·2^z` pixels covering the unit
//! square, y pointing down, cut into `2^z × 2^z` tiles. Tiles are never
//! rendered from the whole image: each one is blurred from a window of
//! source pixels extended by the kernel radius. The blur is written as a
//! gather over a fixed tap order, so a windowed tile is bit-identical to the
//! matching crop of the full-image blur.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::project2d::Point;

pub const TILE_SIZE: u32 = 256;
pub const DEFAULT_SIGMA: f64 = 1.5;
/// Deepest supported zoom; keeps pixel coordinates well inside u32.
pub const MAX_ZOOM: u8 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileAddr {
    pub z: u8,
    pub x: u32,
    pub y: u32,
}

impl TileAddr {
    pub fn new(z: u8, x: u32, y: u32) -> Result<Self> {
        if z > MAX_ZOOM || x >= tiles_per_side(z) || y >= tiles_per_side(z) {
            return Err(Error::InvalidTile { z, x, y });
        }
        Ok(Self { z, x, y })
    }

    /// Map rectangle `[x0, x1) × [y0, y1)` in normalized coordinates.
    pub fn rect(&self) -> [f64; 4] {
        let s = tiles_per_side(self.z) as f64;
        [
            self.x as f64 / s,
            self.y as f64 / s,
            (self.x + 1) as f64 / s,
            (self.y + 1) as f64 / s,
        ]
    }

    /// The tile and its in-range 8-neighborhood.
    pub fn neighborhood(&self) -> impl Iterator<Item = TileAddr> + '_ {
        let side = tiles_per_side(self.z) as i64;
        let (x, y, z) = (self.x as i64, self.y as i64, self.z);
        (-1..=1).flat_map(move |dy| {
            (-1..=1).filter_map(move |dx| {
                let (nx, ny) = (x + dx, y + dy);
                (nx >= 0 && ny >= 0 && nx < side && ny < side).then_some(TileAddr {
                    z,
                    x: nx as u32,
                    y: ny as u32,
                })
            })
        })
    }

    pub fn children(&self) -> [TileAddr; 4] {
        let (z, x, y) = (self.z + 1, self.x * 2, self.y * 2);
        [
            TileAddr { z, x, y },
            TileAddr { z, x: x + 1, y },
            TileAddr { z, x, y: y + 1 },
            TileAddr { z, x: x + 1, y: y + 1 },
        ]
    }

    /// All tiles of a level in row-major order.
    pub fn level(z: u8) -> impl Iterator<Item = TileAddr> {
        let side = tiles_per_side(z);
        (0..side).flat_map(move |y| (0..side).map(move |x| TileAddr { z, x, y }))
    }
}

pub fn tiles_per_side(z: u8) -> u32 {
    1u32 << z.min(31)
}

pub fn image_size(z: u8) -> u64 {
    (TILE_SIZE as u64) << z
}

/// Pixel column (or row) of a normalized coordinate; 1.0 falls in the last pixel.
#[inline]
pub fn pixel_of(v: f64, size: u64) -> u64 {
    let p = math::floor(v * size as f64);
    if p <= 0.0 {
        0
    } else {
        (p as u64).min(size - 1)
    }
}

/// Tile containing a point at zoom `z`, consistent with [`pixel_of`].
#[inline]
pub fn tile_of(p: Point, z: u8) -> (u32, u32) {
    let size = image_size(z);
    (
        (pixel_of(p[0], size) / TILE_SIZE as u64) as u32,
        (pixel_of(p[1], size) / TILE_SIZE as u64) as u32,
    )
}

pub fn check_points(points: &[Point]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
            return Err(Error::OutOfDomain { index: i, x: p[0], y: p[1] });
        }
    }
    Ok(())
}

/// Row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn get(&self, col: usize, row: usize) -> T {
        self.data[row * self.width + col]
    }
}

/// Counts per half-open bin `[i/w, (i+1)/w)`; coordinates equal to 1.0
/// land in the last bin.
pub fn histogram2d(points: &[Point], width: usize, height: usize) -> Result<Grid<u32>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("histogram dimensions must be at least 1".into()));
    }
    check_points(points)?;
    let mut data = vec![0u32; width * height];
    for p in points {
        let c = pixel_of(p[0], width as u64) as usize;
        let r = pixel_of(p[1], height as u64) as usize;
        data[r * width + c] += 1;
    }
    Ok(Grid { width, height, data })
}

/// Gaussian kernel truncated at 3σ.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub sigma: f64,
    pub radius: usize,
    /// `2·radius + 1` unnormalized weights, centered.
    pub taps: Vec<f64>,
    interior: f64,
}

impl Kernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("blur sigma {sigma} must be finite and ≥ 0")));
        }
        let radius = math::ceil(3.0 * sigma) as usize;
        if radius > TILE_SIZE as usize {
            return Err(Error::InvalidParameter(format!(
                "blur radius {radius} exceeds the tile size"
            )));
        }
        let taps: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let t = i as f64 - radius as f64;
                if sigma == 0.0 {
                    1.0
                } else {
                    math::exp(-t * t / (2.0 * sigma * sigma))
                }
            })
            .collect();
        let interior = taps.iter().sum();
        Ok(Self {
            sigma,
            radius,
            taps,
            interior,
        })
    }

    /// Total weight a source at position `s` spreads inside `[0, len)`.
    #[inline]
    fn normalizer(&self, s: i64, len: i64) -> f64 {
        let r = self.radius as i64;
        if s >= r && s + r < len {
            return self.interior;
        }
        let mut z = 0.0;
        for (i, w) in self.taps.iter().enumerate() {
            let t = s + i as i64 - r;
            if t >= 0 && t < len {
                z += w;
            }
        }
        z
    }
}

/// Source pixels of a window, and the image they belong to.
struct Window<'a> {
    data: &'a [f64],
    /// Global pixel origin and size of the window.
    x0: i64,
    y0: i64,
    w: i64,
    h: i64,
    image_w: i64,
    image_h: i64,
}

/// Blurred values for the output rectangle `[ox, ox+ow) × [oy, oy+oh)`
/// (global pixels); the window must cover it plus the kernel radius,
/// clipped to the image.
fn blur_window(win: &Window<'_>, ox: i64, oy: i64, ow: usize, oh: usize, k: &Kernel) -> Vec<f64> {
    let r = k.radius as i64;
    let zx: Vec<f64> = (0..win.w).map(|c| k.normalizer(win.x0 + c, win.image_w)).collect();
    let zy: Vec<f64> = (0..win.h).map(|c| k.normalizer(win.y0 + c, win.image_h)).collect();
    // horizontal pass over every window row, output columns only
    let mut tmp = vec![0.0; win.h as usize * ow];
    for row in 0..win.h {
        let src = &win.data[(row * win.w) as usize..((row + 1) * win.w) as usize];
        if src.iter().all(|&v| v == 0.0) {
            continue;
        }
        let dst = &mut tmp[row as usize * ow..(row as usize + 1) * ow];
        for (j, out) in dst.iter_mut().enumerate() {
            let gx = ox + j as i64;
            let mut acc = 0.0;
            for (i, w) in k.taps.iter().enumerate() {
                let s = gx - (i as i64 - r) - win.x0;
                if s >= 0 && s < win.w {
                    let v = src[s as usize];
                    if v != 0.0 {
                        acc += v * w / zx[s as usize];
                    }
                }
            }
            *out = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for i in 0..oh {
        let gy = oy + i as i64;
        let dst = &mut out[i * ow..(i + 1) * ow];
        for (t, w) in k.taps.iter().enumerate() {
            let s = gy - (t as i64 - r) - win.y0;
            if s < 0 || s >= win.h {
                continue;
            }
            let f = w / zy[s as usize];
            let src = &tmp[s as usize * ow..(s as usize + 1) * ow];
            for (d, &v) in dst.iter_mut().zip(src) {
                if v != 0.0 {
                    *d += v * f;
                }
            }
        }
    }
    out
}

/// Separable, edge-renormalized Gaussian blur of a whole grid. Mass is
/// preserved: every source pixel spreads exactly its value over the image.
pub fn blur(grid: &Grid<f64>, sigma: f64) -> Result<Grid<f64>> {
    let k = Kernel::new(sigma)?;
    let win = Window {
        data: &grid.data,
        x0: 0,
        y0: 0,
        w: grid.width as i64,
        h: grid.height as i64,
        image_w: grid.width as i64,
        image_h: grid.height as i64,
    };
    Ok(Grid {
        width: grid.width,
        height: grid.height,
        data: blur_window(&win, 0, 0, grid.width, grid.height, &k),
    })
}

/// Reusable buffers for tile density computation.
#[derive(Debug, Clone, Default)]
pub struct DensityScratch {
    /// Tile-sized accumulator, all zero between calls.
    acc: Vec<f64>,
    touched: Vec<u32>,
    hits: Vec<(i64, i64)>,
}

/// Geometry of a tile's apron window at its zoom level.
struct Apron {
    size: i64,
    ts: i64,
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
}

impl Apron {
    fn new(addr: TileAddr, k: &Kernel) -> Self {
        let size = image_size(addr.z) as i64;
        let ts = TILE_SIZE as i64;
        let r = k.radius as i64;
        Self {
            size,
            ts,
            x0: (addr.x as i64 * ts - r).max(0),
            y0: (addr.y as i64 * ts - r).max(0),
            x1: ((addr.x as i64 + 1) * ts + r).min(size),
            y1: ((addr.y as i64 + 1) * ts + r).min(size),
        }
    }
}

/// Collects the global pixels of the points inside the apron window.
fn window_hits<I>(points: I, a: &Apron, hits: &mut Vec<(i64, i64)>)
where
    I: IntoIterator<Item = Point>,
{
    hits.clear();
    for p in points {
        let px = pixel_of(p[0], a.size as u64) as i64;
        let py = pixel_of(p[1], a.size as u64) as i64;
        if px >= a.x0 && px < a.x1 && py >= a.y0 && py < a.y1 {
            hits.push((px, py));
        }
    }
}

/// Whether splatting `n` sources beats the separable pass over the window.
fn prefer_splat(n: usize, a: &Apron, k: &Kernel) -> bool {
    let taps = 2 * k.radius + 1;
    let blur = ((a.y1 - a.y0) as usize * a.ts as usize + (a.ts * a.ts) as usize) * taps;
    n.saturating_mul(taps * taps) < blur
}

/// Adds each source's normalized kernel footprint into `sc.acc` (tile
/// pixels only) and records first touches.
fn splat(addr: TileAddr, a: &Apron, k: &Kernel, sc: &mut DensityScratch) {
    let ts = a.ts;
    let r = k.radius as i64;
    let (ox, oy) = (addr.x as i64 * ts, addr.y as i64 * ts);
    if sc.acc.len() != (ts * ts) as usize {
        sc.acc = vec![0.0; (ts * ts) as usize];
    }
    let DensityScratch { acc, touched, hits } = sc;
    for &(px, py) in hits.iter() {
        let zx = k.normalizer(px, a.size);
        let zy = k.normalizer(py, a.size);
        for (ty, wy) in k.taps.iter().enumerate() {
            let gy = py + ty as i64 - r - oy;
            if gy < 0 || gy >= ts {
                continue;
            }
            let fy = wy / zy;
            let row = (gy * ts) as usize;
            for (tx, wx) in k.taps.iter().enumerate() {
                let gx = px + tx as i64 - r - ox;
                if gx < 0 || gx >= ts {
                    continue;
                }
                let i = row + gx as usize;
                if acc[i] == 0.0 {
                    touched.push(i as u32);
                }
                acc[i] += wx / zx * fy;
            }
        }
    }
}

fn blur_hits(a: &Apron, addr: TileAddr, k: &Kernel, hits: &[(i64, i64)]) -> Vec<f64> {
    let (w, h) = (a.x1 - a.x0, a.y1 - a.y0);
    let mut data = vec![0.0; (w * h) as usize];
    for &(px, py) in hits {
        data[((py - a.y0) * w + (px - a.x0)) as usize] += 1.0;
    }
    let win = Window {
        data: &data,
        x0: a.x0,
        y0: a.y0,
        w,
        h,
        image_w: a.size,
        image_h: a.size,
    };
    blur_window(&win, addr.x as i64 * a.ts, addr.y as i64 * a.ts, a.ts as usize, a.ts as usize, k)
}

/// Blurred density of one tile computed from `points`; points outside
/// the tile's apron window are ignored, so callers may pass any superset
/// of the points within `radius` pixels of the tile.
pub fn tile_density<I>(points: I, addr: TileAddr, k: &Kernel) -> Vec<f64>
where
    I: IntoIterator<Item = Point>,
{
    tile_density_with(points, addr, k, &mut DensityScratch::default())
}

/// [`tile_density`] with caller-provided buffers.
pub fn tile_density_with<I>(points: I, addr: TileAddr, k: &Kernel, sc: &mut DensityScratch) -> Vec<f64>
where
    I: IntoIterator<Item = Point>,
{
    let a = Apron::new(addr, k);
    window_hits(points, &a, &mut sc.hits);
    let n = (a.ts * a.ts) as usize;
    if sc.hits.is_empty() {
        return vec![0.0; n];
    }
    if !prefer_splat(sc.hits.len(), &a, k) {
        return blur_hits(&a, addr, k, &sc.hits);
    }
    splat(addr, &a, k, sc);
    let out = sc.acc.clone();
    for &i in &sc.touched {
        sc.acc[i as usize] = 0.0;
    }
    sc.touched.clear();
    out
}

/// Positive density values of one tile, in no particular order; the same
/// values [`tile_density`] produces.
pub fn tile_nonzero<I>(points: I, addr: TileAddr, k: &Kernel, sc: &mut DensityScratch) -> Vec<f64>
where
    I: IntoIterator<Item = Point>,
{
    let a = Apron::new(addr, k);
    window_hits(points, &a, &mut sc.hits);
    if sc.hits.is_empty() {
        return Vec::new();
    }
    if !prefer_splat(sc.hits.len(), &a, k) {
        let mut d = blur_hits(&a, addr, k, &sc.hits);
        d.retain(|&v| v > 0.0);
        return d;
    }
    splat(addr, &a, k, sc);
    let out = sc.touched.iter().map(|&i| sc.acc[i as usize]).filter(|&v| v > 0.0).collect();
    for &i in &sc.touched {
        sc.acc[i as usize] = 0.0;
    }
    sc.touched.clear();
    out
}

/// Upper end of the tone curve: the 99.9th percentile (nearest rank) of the
/// nonzero values; `None` when every value is zero.
pub fn p999(values: &[f64]) -> Option<f64> {
    let mut nz: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    if nz.is_empty() {
        return None;
    }
    let rank = p999_rank(nz.len() as u64) as usize;
    let (_, v, _) = nz.select_nth_unstable_by(rank, |a, b| a.total_cmp(b));
    Some(*v)
}

/// Zero-based nearest-rank index of the 99.9th percentile among `n` values;
/// equals `n − 1` (the maximum) whenever `n < 1000`.
pub fn p999_rank(n: u64) -> u64 {
    // ceil(0.999·n) − 1 in integer arithmetic
    (999 * n).div_ceil(1000).saturating_sub(1)
}

#[inline]
pub fn tonemap_value(v: f64, top: Option<f64>) -> u8 {
    match top {
        Some(t) if t > 0.0 && v > 0.0 => {
            let g = math::round(255.0 * math::ln_1p(v) / math::ln_1p(t));
            g.clamp(0.0, 255.0) as u8
        }
        _ => 0,
    }
}

/// 8-bit image of a grid scaled by its own p999.
pub fn tonemap(grid: &Grid<f64>) -> Grid<u8> {
    let top = p999(&grid.data);
    Grid {
        width: grid.width,
        height: grid.height,
        data: grid.data.iter().map(|&v| tonemap_value(v, top)).collect(),
    }
}

/// Coarse histogram over the bit patterns of positive doubles (which order
/// like the values), for finding a rank without keeping every value.
#[derive(Debug, Clone)]
pub struct RankHistogram {
    counts: Vec<u64>,
    total: u64,
}

const RANK_BITS: u32 = 16;

#[inline]
fn rank_bin(v: f64) -> usize {
    (v.to_bits() >> (64 - RANK_BITS)) as usize
}

impl Default for RankHistogram {
    fn default() -> Self {
        Self {
            counts: vec![0; 1 << RANK_BITS],
            total: 0,
        }
    }
}

impl RankHistogram {
    pub fn add(&mut self, v: f64) {
        if v > 0.0 {
            self.counts[rank_bin(v)] += 1;
            self.total += 1;
        }
    }

    pub fn merge(&mut self, other: &RankHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Bin holding the p999 value and its rank within that bin.
    pub fn locate_p999(&self) -> Option<(usize, u64)> {
        if self.total == 0 {
            return None;
        }
        let mut rank = p999_rank(self.total);
        for (bin, &c) in self.counts.iter().enumerate() {
            if rank < c {
                return Some((bin, rank));
            }
            rank -= c;
        }
        None
    }
}

/// Whether a tile whose largest value is `max` can hold values of `bin`.
pub fn reaches_rank_bin(max: f64, bin: usize) -> bool {
    max > 0.0 && rank_bin(max) >= bin
}

/// Values of `bin` gathered in a second pass.
pub fn in_rank_bin(v: f64, bin: usize) -> bool {
    v > 0.0 && rank_bin(v) == bin
}

/// Finishes the second pass: the value of rank `rank` among `values`.
pub fn select_rank(mut values: Vec<f64>, rank: u64) -> f64 {
    let (_, v, _) = values.select_nth_unstable_by(rank as usize, |a, b| a.total_cmp(b));
    *v
}

/// Points of one zoom level bucketed by tile.
#[derive(Debug, Clone)]
pub struct LevelBuckets {
    pub z: u8,
    side: u32,
    buckets: Vec<Vec<Point>>,
}

impl LevelBuckets {
    pub fn new(points: &[Point], z: u8) -> Result<Self> {
        if z > MAX_ZOOM {
            return Err(Error::InvalidParameter(format!("zoom {z} exceeds {MAX_ZOOM}")));
        }
        check_points(points)?;
        let side = tiles_per_side(z);
        let mut buckets = vec![Vec::new(); (side as usize) * (side as usize)];
        for &p in points {
            let (tx, ty) = tile_of(p, z);
            buckets[(ty * side + tx) as usize].push(p);
        }
        Ok(Self { z, side, buckets })
    }

    pub fn tile_points(&self, x: u32, y: u32) -> &[Point] {
        &self.buckets[(y * self.side + x) as usize]
    }

    /// Points of the tile and its neighbors: everything a tile render can see.
    pub fn window_points(&self, addr: TileAddr) -> impl Iterator<Item = Point> + '_ {
        let n: Vec<TileAddr> = addr.neighborhood().collect();
        n.into_iter().flat_map(move |t| self.tile_points(t.x, t.y).iter().copied())
    }

    /// Tiles that can hold nonzero density: occupied tiles and their neighbors.
    pub fn candidate_tiles(&self) -> Vec<TileAddr> {
        let mut mark = vec![false; self.buckets.len()];
        for addr in TileAddr::level(self.z) {
            if !self.tile_points(addr.x, addr.y).is_empty() {
                for t in addr.neighborhood() {
                    mark[(t.y * self.side + t.x) as usize] = true;
                }
            }
        }
        TileAddr::level(self.z).filter(|t| mark[(t.y * self.side + t.x) as usize]).collect()
    }

    pub fn render(&self, addr: TileAddr, k: &Kernel) -> Vec<f64> {
        tile_density(self.window_points(addr), addr, k)
    }

    /// Positive values of [`render`](Self::render), unordered.
    pub fn render_nonzero(&self, addr: TileAddr, k: &Kernel, sc: &mut DensityScratch) -> Vec<f64> {
        tile_nonzero(self.window_points(addr), addr, k, sc)
    }
}

/// Values kept in memory before falling back to a second rendering pass.
const DIRECT_SELECT_CAP: usize = 1 << 22;

/// p999 of the nonzero pixels of the whole level image, computed tile by
/// tile. `render` returns a tile's positive density values in any order
/// (zeros are ignored).
pub fn level_scale<F>(tiles: &[TileAddr], mut render: F) -> Option<f64>
where
    F: FnMut(TileAddr) -> Vec<f64>,
{
    let mut hist = RankHistogram::default();
    let mut kept: Vec<f64> = Vec::new();
    let mut maxima = Vec::with_capacity(tiles.len());
    let mut overflow = false;
    for &t in tiles {
        let mut m = 0.0f64;
        for v in render(t) {
            if v > 0.0 {
                hist.add(v);
                m = m.max(v);
                if !overflow {
                    kept.push(v);
                    if kept.len() > DIRECT_SELECT_CAP {
                        overflow = true;
                        kept = Vec::new();
                    }
                }
            }
        }
        maxima.push(m);
    }
    let total = hist.total();
    if total == 0 {
        return None;
    }
    if !overflow {
        return Some(select_rank(kept, p999_rank(total)));
    }
    let (bin, rank) = hist.locate_p999()?;
    let mut in_bin = Vec::new();
    for (&t, &m) in tiles.iter().zip(&maxima) {
        if reaches_rank_bin(m, bin) {
            in_bin.extend(render(t).into_iter().filter(|&v| in_rank_bin(v, bin)));
        }
    }
    Some(select_rank(in_bin, rank))
}

/// A rendered 256×256 grey tile.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub addr: TileAddr,
    pub pixels: Vec<u8>,
}

impl Tile {
    pub fn blank(addr: TileAddr) -> Self {
        Self {
            addr,
            pixels: vec![0; (TILE_SIZE * TILE_SIZE) as usize],
        }
    }

    pub fn from_density(addr: TileAddr, density: &[f64], top: Option<f64>) -> Self {
        Self {
            addr,
            pixels: density.iter().map(|&v| tonemap_value(v, top)).collect(),
        }
    }

    pub fn is_blank(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0)
    }
}

/// Every tile of level `z`, tone mapped with the level's own scale.
pub fn render_level(points: &[Point], z: u8, sigma: f64) -> Result<Vec<Tile>> {
    let k = Kernel::new(sigma)?;
    let buckets = LevelBuckets::new(points, z)?;
    let candidates = buckets.candidate_tiles();
    let mut sc = DensityScratch::default();
    let top = level_scale(&candidates, |t| buckets.render_nonzero(t, &k, &mut sc));
    Ok(TileAddr::level(z)
        .map(|addr| {
            if top.is_none() || candidates.binary_search_by(|c| (c.y, c.x).cmp(&(addr.y, addr.x))).is_err() {
                Tile::blank(addr)
            } else {
                Tile::from_density(addr, &buckets.render(addr, &k), top)
            }
        })
        .collect())
}

/// Tiles for zoom levels `0..=zmax`, level by level.
pub fn build_pyramid(points: &[Point], zmax: u8, sigma: f64) -> Result<Vec<Vec<Tile>>> {
    (0..=zmax).map(|z| render_level(points, z, sigma)).collect()
}

/// Orders tiles by distance of their centers from `center` (normalized
/// coordinates), nearest first; ties by (y, x).
pub fn center_out(tiles: &mut [TileAddr], center: Point) {
    tiles.sort_by(|a, b| {
        let d = |t: &TileAddr| {
            let r = t.rect();
            let cx = (r[0] + r[2]) / 2.0 - center[0];
            let cy = (r[1] + r[3]) / 2.0 - center[1];
            cx * cx + cy * cy
        };
        d(a).total_cmp(&d(b)).then((a.y, a.x).cmp(&(b.y, b.x)))
    });
}
