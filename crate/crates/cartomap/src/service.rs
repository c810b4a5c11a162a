//! Query engine behind the HTTP server: static and filtered tiles, labels,
//! clusters, search, entity details and progressive render jobs.
//!
//! Everything is read-only except the caches, the statistics and the job
//! table.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use cartomap_core::facets::{CompressedIdSet, FacetIndex, FilterExpr, TileIndex};
use cartomap_core::labels::{self, BBox, LabelIndex, SearchIndex, ZoomBands};
use cartomap_core::raster::{self, Kernel, LevelBuckets, Tile, TileAddr};
use cartomap_core::snapshot::MapSnapshot;
use cartomap_core::EntityType;
use parking_lot::Mutex;
use serde::Serialize;

use crate::index_io::Indices;
use crate::lru::Lru;
use crate::tiles;

/// Request failures, mapped to HTTP statuses by the server.
#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Internal(String),
}

impl From<cartomap_core::Error> for QueryError {
    fn from(e: cartomap_core::Error) -> Self {
        use cartomap_core::Error as E;
        match e {
            E::InvalidTile { .. } => QueryError::NotFound(e.to_string()),
            E::UnknownFacet(_)
            | E::UnknownFacetValue { .. }
            | E::FilterSyntax(_)
            | E::InvalidParameter(_) => QueryError::BadRequest(e.to_string()),
            _ => QueryError::Internal(e.to_string()),
        }
    }
}

pub type QueryResult<T> = std::result::Result<T, QueryError>;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub cache_size: usize,
    pub workers: usize,
    pub zoom_bands: ZoomBands,
    /// Layers served as static and filtered tiles.
    pub layers: Vec<EntityType>,
    pub sigma: f64,
    /// Directory holding `layers/...` PNG files, if a pyramid was built.
    pub pyramid_root: Option<PathBuf>,
    /// Deepest static zoom (from the pyramid manifest).
    pub static_zmax: u8,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cache_size: 512,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4),
            zoom_bands: labels::default_zoom_bands(),
            layers: vec![EntityType::Article, EntityType::Author],
            sigma: raster::DEFAULT_SIGMA,
            pyramid_root: None,
            static_zmax: 0,
        }
    }
}

type TileKey = (String, EntityType, TileAddr);
type ScaleKey = (String, EntityType, u8);

/// Filtered render timings kept for percentile reporting.
const TIMING_WINDOW: usize = 4096;

#[derive(Default)]
struct Stats {
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
    scale_computations: AtomicU64,
    jobs_started: AtomicU64,
    jobs_done: AtomicU64,
    jobs_cancelled: AtomicU64,
    timings_ms: Mutex<Vec<f64>>,
    timings_total: AtomicU64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StatsReport {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub cache_entries: usize,
    pub cache_capacity: usize,
    pub scale_computations: u64,
    pub renders: u64,
    pub render_ms_median: f64,
    pub render_ms_p99: f64,
    pub render_ms_max: f64,
    pub jobs_started: u64,
    pub jobs_done: u64,
    pub jobs_cancelled: u64,
    pub tiles_after_cancel: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Rendering,
    Done,
    Cancelled,
}

pub struct Job {
    pub id: u64,
    pub layer: EntityType,
    pub filter: String,
    /// Center-out order.
    pub tiles: Vec<TileAddr>,
    done: Mutex<Vec<bool>>,
    state: Mutex<JobState>,
    cancel: AtomicBool,
    emitted: AtomicUsize,
    emitted_at_cancel: AtomicUsize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobTile {
    pub z: u8,
    pub x: u32,
    pub y: u32,
    pub done: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobReport {
    pub id: u64,
    pub state: JobState,
    pub layer: String,
    pub filter: String,
    pub emitted: usize,
    pub tiles: Vec<JobTile>,
}

impl Job {
    pub fn report(&self) -> JobReport {
        let done = self.done.lock();
        JobReport {
            id: self.id,
            state: *self.state.lock(),
            layer: self.layer.layer_name().into(),
            filter: self.filter.clone(),
            emitted: self.emitted.load(Ordering::SeqCst),
            tiles: self
                .tiles
                .iter()
                .zip(done.iter())
                .map(|(t, &d)| JobTile {
                    z: t.z,
                    x: t.x,
                    y: t.y,
                    done: d,
                })
                .collect(),
        }
    }

    pub fn state(&self) -> JobState {
        *self.state.lock()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EntitySummary {
    pub id: u32,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub label: String,
    pub score: f64,
    pub x: f64,
    pub y: f64,
}

pub struct MapService {
    pub snapshot: Arc<MapSnapshot>,
    pub facets: FacetIndex,
    pub tile_index: TileIndex,
    labels: LabelIndex,
    search: SearchIndex,
    type_sets: [CompressedIdSet; 4],
    coords: Vec<[f64; 2]>,
    kernel: Kernel,
    pub config: ServiceConfig,
    tile_cache: Mutex<Lru<TileKey, Arc<Vec<u8>>>>,
    scale_cache: Mutex<Lru<ScaleKey, Arc<OnceLock<Option<f64>>>>>,
    eval_cache: Mutex<Lru<String, Arc<CompressedIdSet>>>,
    stats: Stats,
    pool: rayon::ThreadPool,
    jobs: Mutex<HashMap<u64, Arc<Job>>>,
    next_job: AtomicU64,
}

impl MapService {
    pub fn new(snapshot: MapSnapshot, indices: Indices, config: ServiceConfig) -> crate::Result<Self> {
        let offsets = snapshot.offsets();
        let counts = snapshot.counts();
        let type_sets = std::array::from_fn(|t| {
            CompressedIdSet::from_sorted_iter(offsets[t]..offsets[t] + counts[t]).expect("ascending range")
        });
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers.max(1))
            .thread_name(|i| format!("render-{i}"))
            .build()
            .map_err(|e| crate::Error::Input(format!("cannot start render pool: {e}")))?;
        Ok(Self {
            labels: LabelIndex::build(&snapshot),
            search: SearchIndex::build(&snapshot),
            coords: snapshot.coords(),
            snapshot: Arc::new(snapshot),
            facets: indices.facets,
            tile_index: indices.tiles,
            type_sets,
            kernel: Kernel::new(config.sigma)?,
            tile_cache: Mutex::new(Lru::new(config.cache_size)),
            scale_cache: Mutex::new(Lru::new(256)),
            eval_cache: Mutex::new(Lru::new(64)),
            stats: Stats::default(),
            pool,
            jobs: Mutex::new(HashMap::new()),
            next_job: AtomicU64::new(1),
            config,
        })
    }

    /// Loads `map/`, `index/` and, when present, the `tiles/` pyramid of a
    /// pipeline output directory.
    pub fn open(out: &Path, mut config: ServiceConfig) -> crate::Result<Self> {
        let snapshot = crate::snapshot_io::load_snapshot(&out.join("map"))?;
        let indices = crate::index_io::load_indices(&out.join("index"), snapshot.entities.len() as u32)?;
        let tiles_root = out.join("tiles");
        if let Ok(m) = tiles::read_pyramid_manifest(&tiles_root) {
            config.static_zmax = m.zmax;
            config.sigma = m.sigma;
            config.layers = m.layers.iter().filter_map(|l| EntityType::parse(l)).collect();
            config.pyramid_root = Some(tiles_root);
        }
        Self::new(snapshot, indices, config)
    }

    pub fn layer(&self, name: &str) -> QueryResult<EntityType> {
        EntityType::parse(name)
            .filter(|k| self.config.layers.contains(k))
            .ok_or_else(|| QueryError::NotFound(format!("unknown layer {name:?}")))
    }

    pub fn summary(&self, id: u32) -> EntitySummary {
        let e = &self.snapshot.entities[id as usize];
        EntitySummary {
            id: e.id,
            kind: e.kind.as_str(),
            label: e.label.clone(),
            score: e.score,
            x: e.x,
            y: e.y,
        }
    }

    /// Bytes of a precomputed tile.
    pub fn static_tile(&self, layer: &str, z: u8, x: u32, y: u32) -> QueryResult<Vec<u8>> {
        let kind = self.layer(layer)?;
        let root = self
            .config
            .pyramid_root
            .as_ref()
            .ok_or_else(|| QueryError::NotFound("no tile pyramid loaded".into()))?;
        if z > self.config.static_zmax {
            return Err(QueryError::NotFound(format!("zoom {z} beyond the pyramid")));
        }
        let addr = TileAddr::new(z, x, y)?;
        let p = tiles::tile_path(root, kind.layer_name(), addr);
        std::fs::read(&p).map_err(|_| QueryError::NotFound(format!("tile {z}/{x}/{y} not found")))
    }

    fn eval(&self, expr: &FilterExpr, canon: &str) -> QueryResult<Arc<CompressedIdSet>> {
        if let Some(s) = self.eval_cache.lock().get(canon) {
            return Ok(s);
        }
        let s = Arc::new(self.facets.eval(expr)?);
        self.eval_cache.lock().put(canon.to_string(), s.clone());
        Ok(s)
    }

    /// Entity ids of the layer matching a filter expression.
    pub fn filtered_ids(&self, layer: EntityType, expr: &str) -> QueryResult<(String, CompressedIdSet)> {
        let parsed = FilterExpr::parse(expr)?;
        let canon = parsed.canonical();
        let set = self.eval(&parsed, &canon)?;
        Ok((canon, set.intersect(&self.type_sets[layer.index()])))
    }

    fn level_scale(&self, canon: &str, layer: EntityType, z: u8, ids: &CompressedIdSet) -> Option<f64> {
        let key = (canon.to_string(), layer, z);
        let cell = {
            let mut c = self.scale_cache.lock();
            match c.get(&key) {
                Some(cell) => cell,
                None => {
                    let cell = Arc::new(OnceLock::new());
                    c.put(key, cell.clone());
                    cell
                }
            }
        };
        *cell.get_or_init(|| {
            self.stats.scale_computations.fetch_add(1, Ordering::Relaxed);
            let pts: Vec<[f64; 2]> = ids.iter().map(|i| self.coords[i as usize]).collect();
            let buckets = LevelBuckets::new(&pts, z).expect("snapshot coordinates are validated");
            let cand = buckets.candidate_tiles();
            self.pool.install(|| tiles::scale_par(&buckets, &cand, &self.kernel))
        })
    }

    /// PNG of a tile restricted to the entities matching `expr`. The second
    /// value tells whether it came from the cache.
    pub fn filtered_tile(&self, layer: &str, z: u8, x: u32, y: u32, expr: &str) -> QueryResult<(Arc<Vec<u8>>, bool)> {
        let kind = self.layer(layer)?;
        if z > self.tile_index.zmax {
            return Err(QueryError::NotFound(format!("zoom {z} beyond the tile index")));
        }
        let addr = TileAddr::new(z, x, y)?;
        let canon = FilterExpr::parse(expr)?.canonical();
        let key = (canon, kind, addr);
        if let Some(png) = self.tile_cache.lock().get(&key) {
            self.stats.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok((png, true));
        }
        let start = Instant::now();
        let tile = self.render_filtered(kind, addr, expr)?;
        self.stats.cache_misses.fetch_add(1, Ordering::Relaxed);
        let png = Arc::new(tiles::encode_png(&tile.pixels));
        self.tile_cache.lock().put(key, png.clone());
        self.record_time(start.elapsed().as_secs_f64() * 1e3);
        Ok((png, false))
    }

    /// Uncached filtered render.
    pub fn render_filtered(&self, kind: EntityType, addr: TileAddr, expr: &str) -> QueryResult<Tile> {
        let (canon, ids) = self.filtered_ids(kind, expr)?;
        let window = self.tile_index.window(addr).intersect(&ids);
        if window.is_empty() {
            return Ok(Tile::blank(addr));
        }
        let top = self.level_scale(&canon, kind, addr.z, &ids);
        let density = raster::tile_density(window.iter().map(|i| self.coords[i as usize]), addr, &self.kernel);
        Ok(Tile::from_density(addr, &density, top))
    }

    fn record_time(&self, ms: f64) {
        let n = self.stats.timings_total.fetch_add(1, Ordering::Relaxed) as usize;
        let mut t = self.stats.timings_ms.lock();
        if t.len() < TIMING_WINDOW {
            t.push(ms);
        } else {
            t[n % TIMING_WINDOW] = ms;
        }
    }

    pub fn stats(&self) -> StatsReport {
        let mut t = self.stats.timings_ms.lock().clone();
        t.sort_by(f64::total_cmp);
        let pct = |q: f64| {
            if t.is_empty() {
                0.0
            } else {
                t[((q * t.len() as f64).ceil() as usize).clamp(1, t.len()) - 1]
            }
        };
        let cache = self.tile_cache.lock();
        let s = &self.stats;
        StatsReport {
            cache_hits: s.cache_hits.load(Ordering::Relaxed),
            cache_misses: s.cache_misses.load(Ordering::Relaxed),
            cache_entries: cache.len(),
            cache_capacity: cache.capacity(),
            scale_computations: s.scale_computations.load(Ordering::Relaxed),
            renders: s.timings_total.load(Ordering::Relaxed),
            render_ms_median: pct(0.5),
            render_ms_p99: pct(0.99),
            render_ms_max: t.last().copied().unwrap_or(0.0),
            jobs_started: s.jobs_started.load(Ordering::Relaxed),
            jobs_done: s.jobs_done.load(Ordering::Relaxed),
            jobs_cancelled: s.jobs_cancelled.load(Ordering::Relaxed),
            tiles_after_cancel: self
                .jobs
                .lock()
                .values()
                .map(|j| {
                    let at = j.emitted_at_cancel.load(Ordering::SeqCst);
                    if at == usize::MAX {
                        0
                    } else {
                        j.emitted.load(Ordering::SeqCst).saturating_sub(at) as u64
                    }
                })
                .sum(),
        }
    }

    /// Top entities per requested type inside `bbox`.
    pub fn labels(&self, bbox: &BBox, types: &[EntityType], limit: usize) -> QueryResult<Vec<(EntityType, Vec<EntitySummary>)>> {
        if limit == 0 {
            return Err(QueryError::BadRequest("limit must be at least 1".into()));
        }
        Ok(types
            .iter()
            .map(|&t| (t, self.labels.top(t, bbox, limit).into_iter().map(|id| self.summary(id)).collect()))
            .collect())
    }

    pub fn clusters(&self, bbox: &BBox, zoom: u32) -> (Option<usize>, Vec<(usize, &cartomap_core::snapshot::SnapshotCluster)>) {
        let level = labels::level_for_zoom(&self.config.zoom_bands, zoom, self.snapshot.levels.len());
        (level, labels::clusters_in(&self.snapshot, &self.config.zoom_bands, zoom, bbox))
    }

    pub fn search(&self, q: &str, kind: Option<EntityType>) -> QueryResult<Vec<EntitySummary>> {
        Ok(self.search.search(q, kind)?.into_iter().map(|id| self.summary(id)).collect())
    }

    /// Starts a progressive render of `addrs`, nearest to `center` first.
    pub fn start_job(self: &Arc<Self>, layer: &str, expr: &str, mut addrs: Vec<TileAddr>, center: [f64; 2]) -> QueryResult<Arc<Job>> {
        let kind = self.layer(layer)?;
        let parsed = FilterExpr::parse(expr)?;
        self.facets.eval(&parsed)?;
        if let Some(bad) = addrs.iter().find(|a| a.z > self.tile_index.zmax) {
            return Err(QueryError::NotFound(format!("zoom {} beyond the tile index", bad.z)));
        }
        addrs.sort();
        addrs.dedup();
        raster::center_out(&mut addrs, center);
        let id = self.next_job.fetch_add(1, Ordering::SeqCst);
        let job = Arc::new(Job {
            id,
            layer: kind,
            filter: parsed.canonical(),
            done: Mutex::new(vec![false; addrs.len()]),
            tiles: addrs,
            state: Mutex::new(JobState::Queued),
            cancel: AtomicBool::new(false),
            emitted: AtomicUsize::new(0),
            emitted_at_cancel: AtomicUsize::new(usize::MAX),
        });
        self.jobs.lock().insert(id, job.clone());
        self.stats.jobs_started.fetch_add(1, Ordering::Relaxed);
        let svc = self.clone();
        let j = job.clone();
        std::thread::Builder::new()
            .name(format!("job-{id}"))
            .spawn(move || svc.run_job(&j))
            .map_err(|e| QueryError::Internal(format!("cannot start job: {e}")))?;
        Ok(job)
    }

    fn run_job(&self, job: &Job) {
        {
            let mut st = job.state.lock();
            if *st == JobState::Cancelled {
                return;
            }
            *st = JobState::Rendering;
        }
        let layer = job.layer.layer_name();
        for (i, t) in job.tiles.iter().enumerate() {
            if job.cancel.load(Ordering::SeqCst) {
                return;
            }
            let ok = self.filtered_tile(layer, t.z, t.x, t.y, &job.filter).is_ok();
            // emission and cancellation are serialized through the state lock
            let st = job.state.lock();
            if *st == JobState::Cancelled {
                return;
            }
            if ok {
                job.done.lock()[i] = true;
                job.emitted.fetch_add(1, Ordering::SeqCst);
            }
            drop(st);
        }
        let mut st = job.state.lock();
        if *st != JobState::Cancelled {
            *st = JobState::Done;
            self.stats.jobs_done.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn job(&self, id: u64) -> Option<Arc<Job>> {
        self.jobs.lock().get(&id).cloned()
    }

    /// Cancels a job; no tile is emitted for it afterwards. Returns false
    /// for unknown ids.
    pub fn cancel_job(&self, id: u64) -> bool {
        let Some(job) = self.job(id) else {
            return false;
        };
        job.cancel.store(true, Ordering::SeqCst);
        let mut st = job.state.lock();
        if matches!(*st, JobState::Queued | JobState::Rendering) {
            *st = JobState::Cancelled;
            job.emitted_at_cancel.store(job.emitted.load(Ordering::SeqCst), Ordering::SeqCst);
            self.stats.jobs_cancelled.fetch_add(1, Ordering::Relaxed);
        }
        true
    }
}
