//! HTTP/JSON API.
//!
//! | route | answer |
//! |---|---|
//! | `GET /layers` | layers, zoom ranges, entity counts, facets |
//! | `GET /facets/{name}?prefix=&limit=` | values of one facet with set sizes |
//! | `GET /tiles/{layer}/{z}/{x}/{y}.png` | precomputed tile |
//! | `GET /filtered/{layer}/{z}/{x}/{y}.png?f=` | tile restricted to a filter expression |
//! | `GET /labels?bbox=&zoom=&types=&limit=` | best-scored entities per type in a viewport |
//! | `GET /clusters?bbox=&zoom=` | cluster names of the level for a zoom |
//! | `GET /search?q=&type=` | label prefix search |
//! | `GET /entity/{id}` | details, metadata, related ids and stored neighbors |
//! | `GET /stats` | cache and render counters |
//! | `POST /jobs`, `GET /jobs/{id}`, `DELETE /jobs/{id}` | progressive filtered renders |

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use cartomap_core::labels::BBox;
use cartomap_core::raster::{self, TileAddr};
use cartomap_core::EntityType;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::service::{MapService, QueryError};

impl IntoResponse for QueryError {
    fn into_response(self) -> Response {
        let status = match self {
            QueryError::BadRequest(_) => StatusCode::BAD_REQUEST,
            QueryError::NotFound(_) => StatusCode::NOT_FOUND,
            QueryError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Svc = State<Arc<MapService>>;
type ApiResult<T> = Result<T, QueryError>;

pub fn router(svc: Arc<MapService>) -> Router {
    Router::new()
        .route("/layers", get(layers))
        .route("/facets/{name}", get(facet_values))
        .route("/tiles/{layer}/{z}/{x}/{file}", get(static_tile))
        .route("/filtered/{layer}/{z}/{x}/{file}", get(filtered_tile))
        .route("/labels", get(labels))
        .route("/clusters", get(clusters))
        .route("/search", get(search))
        .route("/entity/{id}", get(entity))
        .route("/stats", get(stats))
        .route("/jobs", axum::routing::post(create_job))
        .route("/jobs/{id}", get(job_status).delete(cancel_job))
        .with_state(svc)
}

pub async fn serve(svc: Arc<MapService>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn tile_y(file: &str) -> ApiResult<u32> {
    file.strip_suffix(".png")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| QueryError::NotFound(format!("no tile named {file:?}")))
}

fn png_response(bytes: Vec<u8>, extra: &[(&'static str, String)]) -> Response {
    let mut r = bytes.into_response();
    let h = r.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    for (k, v) in extra {
        if let Ok(v) = HeaderValue::from_str(v) {
            h.insert(*k, v);
        }
    }
    r
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| QueryError::Internal(format!("worker failed: {e}")))?
}

async fn layers(State(svc): Svc) -> Json<Value> {
    let counts = svc.snapshot.counts();
    let layers: Vec<Value> = svc
        .config
        .layers
        .iter()
        .map(|k| {
            json!({
                "name": k.layer_name(),
                "type": k.as_str(),
                "entities": counts[k.index()],
                "zmax": svc.config.static_zmax,
                "filtered_zmax": svc.tile_index.zmax,
            })
        })
        .collect();
    let facets: Vec<Value> = svc
        .facets
        .facets
        .iter()
        .map(|(name, vals)| json!({ "name": name, "values": vals.len() }))
        .collect();
    let entity_types: BTreeMap<&str, u32> = EntityType::ALL.iter().map(|t| (t.as_str(), counts[t.index()])).collect();
    Json(json!({
        "format_version": svc.snapshot.format_version,
        "tile_size": raster::TILE_SIZE,
        "layers": layers,
        "entity_types": entity_types,
        "facets": facets,
        "cluster_levels": svc.snapshot.levels.iter().map(|l| l.k).collect::<Vec<_>>(),
    }))
}

#[derive(Deserialize)]
struct FacetQuery {
    prefix: Option<String>,
    limit: Option<usize>,
}

async fn facet_values(State(svc): Svc, Path(name): Path<String>, Query(q): Query<FacetQuery>) -> ApiResult<Json<Value>> {
    let vals = svc
        .facets
        .facets
        .get(&name)
        .ok_or_else(|| QueryError::NotFound(format!("unknown facet {name:?}")))?;
    let prefix = q.prefix.unwrap_or_default();
    let limit = q.limit.unwrap_or(1000);
    let values: Vec<Value> = vals
        .range(prefix.clone()..)
        .take_while(|(v, _)| v.starts_with(&prefix))
        .take(limit)
        .map(|(v, s)| json!({ "value": v, "count": s.len() }))
        .collect();
    Ok(Json(json!({ "name": name, "values": values })))
}

async fn static_tile(State(svc): Svc, Path((layer, z, x, file)): Path<(String, u8, u32, String)>) -> ApiResult<Response> {
    let y = tile_y(&file)?;
    let bytes = blocking(move || svc.static_tile(&layer, z, x, y)).await?;
    Ok(png_response(bytes, &[("cache-control", "public, max-age=31536000, immutable".into())]))
}

#[derive(Deserialize)]
struct FilterQuery {
    #[serde(default)]
    f: String,
}

async fn filtered_tile(
    State(svc): Svc,
    Path((layer, z, x, file)): Path<(String, u8, u32, String)>,
    Query(q): Query<FilterQuery>,
) -> ApiResult<Response> {
    let y = tile_y(&file)?;
    let start = std::time::Instant::now();
    let (png, hit) = blocking(move || svc.filtered_tile(&layer, z, x, y, &q.f)).await?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(png_response(
        png.as_ref().clone(),
        &[
            ("x-cache", if hit { "hit" } else { "miss" }.into()),
            ("server-timing", format!("render;dur={ms:.2}")),
            ("cache-control", "public, max-age=3600".into()),
        ],
    ))
}

fn parse_bbox(s: Option<&str>) -> ApiResult<BBox> {
    match s {
        None => Ok(BBox::WORLD),
        Some(s) => BBox::parse(s).map_err(|e| QueryError::BadRequest(e.to_string())),
    }
}

fn parse_types(s: Option<&str>) -> ApiResult<Vec<EntityType>> {
    match s {
        None | Some("") => Ok(EntityType::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|t| EntityType::parse(t.trim()).ok_or_else(|| QueryError::BadRequest(format!("unknown entity type {t:?}"))))
            .collect(),
    }
}

#[derive(Deserialize)]
struct LabelQuery {
    bbox: Option<String>,
    zoom: Option<u32>,
    types: Option<String>,
    limit: Option<usize>,
}

async fn labels(State(svc): Svc, Query(q): Query<LabelQuery>) -> ApiResult<Json<Value>> {
    let bbox = parse_bbox(q.bbox.as_deref())?;
    let types = parse_types(q.types.as_deref())?;
    let limit = q.limit.unwrap_or(cartomap_core::labels::DEFAULT_LIMIT);
    let per_type = svc.labels(&bbox, &types, limit)?;
    let mut out = serde_json::Map::new();
    for (t, list) in per_type {
        out.insert(t.as_str().into(), serde_json::to_value(list).expect("serializable"));
    }
    Ok(Json(json!({ "zoom": q.zoom.unwrap_or(0), "labels": out })))
}

#[derive(Deserialize)]
struct ClusterQuery {
    bbox: Option<String>,
    zoom: Option<u32>,
}

async fn clusters(State(svc): Svc, Query(q): Query<ClusterQuery>) -> ApiResult<Json<Value>> {
    let bbox = parse_bbox(q.bbox.as_deref())?;
    let (level, list) = svc.clusters(&bbox, q.zoom.unwrap_or(0));
    let clusters: Vec<Value> = list
        .into_iter()
        .map(|(i, c)| {
            json!({
                "index": i, "label": c.label, "terms": c.terms, "x": c.x, "y": c.y,
                "size": c.size, "coverage": c.coverage,
            })
        })
        .collect();
    Ok(Json(json!({ "level": level, "clusters": clusters })))
}

#[derive(Deserialize)]
struct SearchQuery {
    #[serde(default)]
    q: String,
    #[serde(rename = "type")]
    kind: Option<String>,
}

async fn search(State(svc): Svc, Query(q): Query<SearchQuery>) -> ApiResult<Json<Value>> {
    let kind = match q.kind.as_deref() {
        None | Some("") => None,
        Some(t) => Some(EntityType::parse(t).ok_or_else(|| QueryError::BadRequest(format!("unknown entity type {t:?}")))?),
    };
    let results = svc.search(&q.q, kind)?;
    Ok(Json(json!({ "results": results })))
}

async fn entity(State(svc): Svc, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let e = id
        .parse::<u32>()
        .ok()
        .and_then(|id| svc.snapshot.get(id))
        .ok_or_else(|| QueryError::NotFound(format!("no entity {id:?}")))?;
    let mut neighbors = serde_json::Map::new();
    for t in EntityType::ALL {
        let list: Vec<Value> = e.neighbors[t.index()]
            .iter()
            .map(|nb| {
                let n = &svc.snapshot.entities[nb.id as usize];
                json!({ "id": nb.id, "label": n.label, "distance": nb.distance, "x": n.x, "y": n.y })
            })
            .collect();
        neighbors.insert(t.as_str().into(), Value::Array(list));
    }
    Ok(Json(json!({
        "id": e.id,
        "type": e.kind.as_str(),
        "label": e.label,
        "score": e.score,
        "x": e.x,
        "y": e.y,
        "metadata": e.metadata,
        "related": e.related,
        "neighbors": neighbors,
    })))
}

async fn stats(State(svc): Svc) -> Json<Value> {
    Json(serde_json::to_value(svc.stats()).expect("serializable"))
}

#[derive(Deserialize)]
struct JobRequest {
    layer: String,
    #[serde(default)]
    f: String,
    z: u8,
    /// Explicit `[x, y]` tiles; defaults to the tiles covering `bbox`.
    tiles: Option<Vec<[u32; 2]>>,
    bbox: Option<[f64; 4]>,
    center: Option<[f64; 2]>,
}

async fn create_job(State(svc): Svc, Json(req): Json<JobRequest>) -> ApiResult<(StatusCode, Json<Value>)> {
    let bbox = match req.bbox {
        Some([x0, y0, x1, y1]) => BBox::new(x0, y0, x1, y1).map_err(|e| QueryError::BadRequest(e.to_string()))?,
        None => BBox::WORLD,
    };
    let side = raster::tiles_per_side(req.z.min(raster::MAX_ZOOM));
    let addrs: Vec<TileAddr> = match req.tiles {
        Some(list) => list
            .into_iter()
            .map(|[x, y]| TileAddr::new(req.z, x, y).map_err(QueryError::from))
            .collect::<ApiResult<_>>()?,
        None => {
            let cell = |v: f64| ((v.clamp(0.0, 1.0) * side as f64) as u32).min(side - 1);
            let (x0, x1, y0, y1) = (cell(bbox.x0), cell(bbox.x1), cell(bbox.y0), cell(bbox.y1));
            let mut v = Vec::new();
            for y in y0..=y1 {
                for x in x0..=x1 {
                    v.push(TileAddr::new(req.z, x, y)?);
                }
            }
            v
        }
    };
    let center = req.center.unwrap_or([(bbox.x0 + bbox.x1) / 2.0, (bbox.y0 + bbox.y1) / 2.0]);
    let job = blocking(move || svc.start_job(&req.layer, &req.f, addrs, center)).await?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(job.report()).expect("serializable"))))
}

fn job_id(s: &str) -> ApiResult<u64> {
    s.parse().map_err(|_| QueryError::NotFound(format!("no job {s:?}")))
}

async fn job_status(State(svc): Svc, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = svc.job(job_id(&id)?).ok_or_else(|| QueryError::NotFound(format!("no job {id}")))?;
    Ok(Json(serde_json::to_value(job.report()).expect("serializable")))
}

async fn cancel_job(State(svc): Svc, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let n = job_id(&id)?;
    if !svc.cancel_job(n) {
        return Err(QueryError::NotFound(format!("no job {id}")));
    }
    let job = svc.job(n).expect("job exists");
    Ok(Json(serde_json::to_value(job.report()).expect("serializable")))
}
