//! Viewport label selection, zoom-dependent cluster labels and label search.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::corpus::EntityType;
use crate::error::{Error, Result};
use crate::snapshot::{MapSnapshot, SnapshotCluster};

pub const GRID: usize = 64;
pub const DEFAULT_LIMIT: usize = 10;
pub const SEARCH_CAP: usize = 20;
pub const SEARCH_MIN_CHARS: usize = 2;

/// Closed rectangle `[x0, x1] × [y0, y1]` in map coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub const WORLD: BBox = BBox {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let ok = [x0, y0, x1, y1].iter().all(|v| v.is_finite()) && x0 < x1 && y0 < y1;
        if !ok {
            return Err(Error::InvalidParameter(format!("malformed bbox ({x0}, {y0}, {x1}, {y1})")));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Parses `x0,y0,x1,y1`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidParameter(format!("bbox {s:?} needs four numbers")));
        }
        let mut v = [0.0; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bbox component {p:?} is not a number")))?;
        }
        Self::new(v[0], v[1], v[2], v[3])
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

#[inline]
fn cell_of(v: f64) -> usize {
    let c = crate::math::floor(v * GRID as f64);
    if c <= 0.0 {
        0
    } else {
        (c as usize).min(GRID - 1)
    }
}

/// Per-type score ranking plus a uniform grid of rank lists.
#[derive(Debug, Clone)]
pub struct LabelIndex {
    /// Global ids per type, best first: (score desc, id asc).
    ranked: [Vec<u32>; 4],
    /// `cells[type][cell]` holds ranks into `ranked[type]`, ascending.
    cells: [Vec<Vec<u32>>; 4],
    coords: Vec<[f64; 2]>,
}

impl LabelIndex {
    pub fn build(snapshot: &MapSnapshot) -> Self {
        let mut ranked: [Vec<u32>; 4] = Default::default();
        for kind in EntityType::ALL {
            let mut ids: Vec<u32> = snapshot.of_type(kind).iter().map(|e| e.id).collect();
            ids.sort_by(|&a, &b| {
                let (ea, eb) = (&snapshot.entities[a as usize], &snapshot.entities[b as usize]);
                eb.score.total_cmp(&ea.score).then(a.cmp(&b))
            });
            ranked[kind.index()] = ids;
        }
        let coords = snapshot.coords();
        let cells = core::array::from_fn(|t| {
            let mut cells = vec![Vec::new(); GRID * GRID];
            for (rank, &id) in ranked[t].iter().enumerate() {
                let p = coords[id as usize];
                cells[cell_of(p[1]) * GRID + cell_of(p[0])].push(rank as u32);
            }
            cells
        });
        Self { ranked, cells, coords }
    }

    /// Best `limit` entities of `kind` inside `bbox`, by (score desc, id asc).
    pub fn top(&self, kind: EntityType, bbox: &BBox, limit: usize) -> Vec<u32> {
        let t = kind.index();
        let (cx0, cx1) = (cell_of(bbox.x0.max(0.0)), cell_of(bbox.x1.min(1.0)));
        let (cy0, cy1) = (cell_of(bbox.y0.max(0.0)), cell_of(bbox.y1.min(1.0)));
        if limit == 0 || bbox.x1 < 0.0 || bbox.y1 < 0.0 || bbox.x0 > 1.0 || bbox.y0 > 1.0 {
            return Vec::new();
        }
        // k-way merge of the overlapped cells' rank lists
        let mut heap: BinaryHeap<Reverse<(u32, usize, usize)>> = BinaryHeap::new();
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                let c = cy * GRID + cx;
                if let Some(&r) = self.cells[t][c].first() {
                    heap.push(Reverse((r, c, 0)));
                }
            }
        }
        let mut out = Vec::with_capacity(limit);
        while let Some(Reverse((rank, c, pos))) = heap.pop() {
            let id = self.ranked[t][rank as usize];
            let p = self.coords[id as usize];
            if bbox.contains(p[0], p[1]) {
                out.push(id);
                if out.len() == limit {
                    break;
                }
            }
            if let Some(&r) = self.cells[t].get(c).and_then(|l| l.get(pos + 1)) {
                heap.push(Reverse((r, c, pos + 1)));
            }
        }
        out
    }
}

/// Zoom bands: `(min_zoom, level)` pairs sorted by `min_zoom`.
pub type ZoomBands = Vec<(u32, usize)>;

pub fn default_zoom_bands() -> ZoomBands {
    vec![(0, 0), (2, 1), (4, 2), (6, 3)]
}

/// Cluster level shown at `zoom`, clamped to the levels available.
pub fn level_for_zoom(bands: &[(u32, usize)], zoom: u32, n_levels: usize) -> Option<usize> {
    if n_levels == 0 {
        return None;
    }
    let lv = bands
        .iter()
        .filter(|(z, _)| *z <= zoom)
        .map(|&(_, l)| l)
        .next_back()
        .unwrap_or(0);
    Some(lv.min(n_levels - 1))
}

/// Clusters of the level for `zoom` whose centroid lies in `bbox`.
pub fn clusters_in<'a>(
    snapshot: &'a MapSnapshot,
    bands: &[(u32, usize)],
    zoom: u32,
    bbox: &BBox,
) -> Vec<(usize, &'a SnapshotCluster)> {
    let Some(lv) = level_for_zoom(bands, zoom, snapshot.levels.len()) else {
        return Vec::new();
    };
    snapshot.levels[lv]
        .clusters
        .iter()
        .enumerate()
        .filter(|(_, c)| bbox.contains(c.x, c.y))
        .collect()
}

/// Case-insensitive label prefix search.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    /// (lowercased label, id), sorted.
    keys: Vec<(String, u32)>,
    scores: Vec<f64>,
    kinds: Vec<EntityType>,
}

impl SearchIndex {
    pub fn build(snapshot: &MapSnapshot) -> Self {
        let mut keys: Vec<(String, u32)> =
            snapshot.entities.iter().map(|e| (e.label.to_lowercase(), e.id)).collect();
        keys.sort();
        Self {
            keys,
            scores: snapshot.entities.iter().map(|e| e.score).collect(),
            kinds: snapshot.entities.iter().map(|e| e.kind).collect(),
        }
    }

    /// Up to [`SEARCH_CAP`] ids whose label starts with `q`, by score then id.
    pub fn search(&self, q: &str, kind: Option<EntityType>) -> Result<Vec<u32>> {
        if q.trim().chars().count() < SEARCH_MIN_CHARS {
            return Err(Error::InvalidParameter(format!(
                "search needs at least {SEARCH_MIN_CHARS} characters"
            )));
        }
        let q = q.trim().to_lowercase();
        let start = self.keys.partition_point(|(k, _)| k.as_str() < q.as_str());
        let mut hits: Vec<u32> = self.keys[start..]
            .iter()
            .take_while(|(k, _)| k.starts_with(&q))
            .map(|&(_, id)| id)
            .filter(|&id| kind.is_none_or(|t| self.kinds[id as usize] == t))
            .collect();
        hits.sort_by(|&a, &b| self.scores[b as usize].total_cmp(&self.scores[a as usize]).then(a.cmp(&b)));
        hits.truncate(SEARCH_CAP);
        Ok(hits)
    }
}
