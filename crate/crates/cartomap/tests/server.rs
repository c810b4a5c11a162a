mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request};
use axum::Router;
use cartomap::index_io::build_indices;
use cartomap::service::{MapService, ServiceConfig};
use cartomap::{server, tiles};
use cartomap_core::facets::FacetSpec;
use cartomap_core::snapshot::MapSnapshot;
use cartomap_core::EntityType;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    app: Router,
    snap: MapSnapshot,
    _dir: tempfile::TempDir,
}

fn fixture() -> Fixture {
    let snap = common::snapshot(common::Shape { neighbors: 3, ..common::Shape::scaled(2000) }, 5);
    let dir = tempfile::tempdir().unwrap();
    tiles::write_pyramid(dir.path(), &snap, &[EntityType::Article, EntityType::Author], 1, 1.5).unwrap();
    let idx = build_indices(&snap, &FacetSpec::defaults(), 3).unwrap();
    let cfg = ServiceConfig {
        cache_size: 8,
        workers: 2,
        pyramid_root: Some(dir.path().to_path_buf()),
        static_zmax: 1,
        ..ServiceConfig::default()
    };
    let svc = Arc::new(MapService::new(snap.clone(), idx, cfg).unwrap());
    Fixture {
        app: server::router(svc),
        snap,
        _dir: dir,
    }
}

async fn send(app: &Router, req: Request<Body>) -> (u16, axum::http::HeaderMap, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let headers = res.headers().clone();
    (status, headers, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(app: &Router, uri: &str) -> (u16, axum::http::HeaderMap, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn get_json(app: &Router, uri: &str) -> (u16, Value) {
    let (s, _, b) = get(app, uri).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn decode_png(bytes: &[u8]) -> (u32, u32, Vec<u8>) {
    let dec = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = dec.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!(info.color_type, png::ColorType::Grayscale);
    (info.width, info.height, buf[..info.buffer_size()].to_vec())
}

#[tokio::test]
async fn layers_and_facets() {
    let f = fixture();
    let (s, v) = get_json(&f.app, "/layers").await;
    assert_eq!(s, 200);
    assert_eq!(v["format_version"], "cartomap/1");
    assert_eq!(v["tile_size"], 256);
    assert_eq!(v["layers"].as_array().unwrap().len(), 2);
    assert_eq!(v["entity_types"]["article"], f.snap.counts()[0]);
    assert_eq!(v["cluster_levels"], json!([3, 9]));

    let (s, v) = get_json(&f.app, "/facets/lab?prefix=lab%201").await;
    assert_eq!(s, 200);
    let vals = v["values"].as_array().unwrap();
    assert!(!vals.is_empty());
    assert!(vals.iter().all(|x| x["value"].as_str().unwrap().starts_with("lab 1") && x["count"].as_u64().unwrap() > 0));
    assert_eq!(get_json(&f.app, "/facets/colour").await.0, 404);
}

#[tokio::test]
async fn static_tiles() {
    let f = fixture();
    let (s, h, b) = get(&f.app, "/tiles/articles/1/1/0.png").await;
    assert_eq!(s, 200);
    assert_eq!(h[header::CONTENT_TYPE], "image/png");
    assert!(h[header::CACHE_CONTROL].to_str().unwrap().contains("immutable"));
    let (w, hgt, px) = decode_png(&b);
    assert_eq!((w, hgt, px.len()), (256, 256, 65536));
    for uri in ["/tiles/articles/2/0/0.png", "/tiles/words/0/0/0.png", "/tiles/articles/1/2/0.png", "/tiles/articles/0/0/0.jpg"] {
        assert_eq!(get(&f.app, uri).await.0, 404, "{uri}");
    }
}

#[tokio::test]
async fn filtered_tiles_cache_and_errors() {
    let f = fixture();
    let uri = "/filtered/articles/2/1/1.png?f=year%3A2003%7C2004";
    let (s, h, first) = get(&f.app, uri).await;
    assert_eq!(s, 200);
    assert_eq!(h["x-cache"], "miss");
    assert!(h["server-timing"].to_str().unwrap().starts_with("render;dur="));
    let (_, h, second) = get(&f.app, uri).await;
    assert_eq!(h["x-cache"], "hit");
    assert_eq!(first, second);
    // same filter written differently shares the cache entry
    let (_, h, _) = get(&f.app, "/filtered/articles/2/1/1.png?f=year%3A2004%7C2003%3B").await;
    assert_eq!(h["x-cache"], "hit");

    // the empty filter draws the whole layer: nonblank somewhere
    let (_, _, b) = get(&f.app, "/filtered/articles/0/0/0.png").await;
    assert!(decode_png(&b).2.iter().any(|&p| p > 0));

    for (uri, want) in [
        ("/filtered/articles/2/1/1.png?f=year", 400),
        ("/filtered/articles/2/1/1.png?f=colour%3Ared", 400),
        ("/filtered/articles/2/1/1.png?f=year%3A1800", 400),
        ("/filtered/articles/4/0/0.png", 404),
        ("/filtered/articles/1/5/0.png", 404),
        ("/filtered/labs/0/0/0.png", 404),
    ] {
        let (s, _, b) = get(&f.app, uri).await;
        assert_eq!(s, want, "{uri}");
        let v: Value = serde_json::from_slice(&b).unwrap();
        assert!(v["error"].is_string());
    }

    let (_, v) = get_json(&f.app, "/stats").await;
    assert_eq!(v["cache_hits"], 2);
    assert_eq!(v["cache_misses"], 2);
    assert_eq!(v["cache_capacity"], 8);
    assert!(v["render_ms_median"].as_f64().unwrap() >= 0.0);
}

#[tokio::test]
async fn labels_clusters_search_entity() {
    let f = fixture();
    let (s, v) = get_json(&f.app, "/labels?types=lab&limit=3").await;
    assert_eq!(s, 200);
    let labs = v["labels"]["lab"].as_array().unwrap();
    assert_eq!(labs.len(), 3);
    assert!(labs.windows(2).all(|w| w[0]["score"].as_f64() >= w[1]["score"].as_f64()));
    assert!(v["labels"].get("article").is_none());
    for uri in ["/labels?bbox=0,0,1", "/labels?bbox=1,0,0,1", "/labels?limit=0", "/labels?types=planet"] {
        assert_eq!(get(&f.app, uri).await.0, 400, "{uri}");
    }

    let (_, v) = get_json(&f.app, "/clusters?zoom=0").await;
    assert_eq!(v["level"], 0);
    assert_eq!(v["clusters"].as_array().unwrap().len(), 3);
    let (_, v) = get_json(&f.app, "/clusters?zoom=9").await;
    assert_eq!(v["level"], 1);

    let (s, v) = get_json(&f.app, "/search?q=LAB%201&type=lab").await;
    assert_eq!(s, 200);
    let hits = v["results"].as_array().unwrap();
    assert!(!hits.is_empty() && hits.len() <= 20);
    assert!(hits.iter().all(|h| h["type"] == "lab" && h["label"].as_str().unwrap().starts_with("lab 1")));
    assert_eq!(get(&f.app, "/search?q=l").await.0, 400);

    let (s, v) = get_json(&f.app, "/entity/0").await;
    assert_eq!(s, 200);
    assert_eq!(v["type"], "article");
    assert_eq!(v["related"], json!(f.snap.entities[0].related));
    assert!(v["metadata"]["year"].is_string());
    assert_eq!(v["neighbors"]["word"].as_array().unwrap().len(), 3);
    assert_eq!(get(&f.app, "/entity/abc").await.0, 404);
    assert_eq!(get(&f.app, "/entity/99999999").await.0, 404);
}

async fn post_job(app: &Router, body: Value) -> (u16, Value) {
    let req = Request::post("/jobs")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, _, b) = send(app, req).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn jobs_run_center_out_and_cancel() {
    let f = fixture();
    let (s, v) = post_job(&f.app, json!({ "layer": "articles", "f": "lab:lab 1", "z": 3, "bbox": [0.3, 0.3, 0.7, 0.7] })).await;
    assert_eq!(s, 201);
    let id = v["id"].as_u64().unwrap();
    let first = &v["tiles"][0];
    assert!((3..=4).contains(&first["x"].as_u64().unwrap()) && (3..=4).contains(&first["y"].as_u64().unwrap()));
    let mut state = String::new();
    for _ in 0..400 {
        let (_, v) = get_json(&f.app, &format!("/jobs/{id}")).await;
        state = v["state"].as_str().unwrap().to_string();
        if state == "done" {
            assert!(v["tiles"].as_array().unwrap().iter().all(|t| t["done"] == true));
            assert_eq!(v["emitted"], v["tiles"].as_array().unwrap().len());
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(state, "done");

    let (_, v) = post_job(&f.app, json!({ "layer": "articles", "f": "year:2001", "z": 3 })).await;
    let id = v["id"].as_u64().unwrap();
    let req = Request::delete(format!("/jobs/{id}")).body(Body::empty()).unwrap();
    let (s, _, b) = send(&f.app, req).await;
    assert_eq!(s, 200);
    let v: Value = serde_json::from_slice(&b).unwrap();
    if v["state"] == "cancelled" {
        let at = v["emitted"].as_u64().unwrap();
        tokio::time::sleep(Duration::from_millis(100)).await;
        let (_, v) = get_json(&f.app, &format!("/jobs/{id}")).await;
        assert_eq!(v["emitted"].as_u64().unwrap(), at);
        let (_, st) = get_json(&f.app, "/stats").await;
        assert_eq!(st["tiles_after_cancel"], 0);
    }

    let req = Request::delete("/jobs/9999").body(Body::empty()).unwrap();
    assert_eq!(send(&f.app, req).await.0, 404);
    assert_eq!(post_job(&f.app, json!({ "layer": "words", "z": 1 })).await.0, 404);
    assert_eq!(post_job(&f.app, json!({ "layer": "articles", "f": "lab", "z": 1 })).await.0, 400);
    assert_eq!(post_job(&f.app, json!({ "layer": "articles", "z": 4 })).await.0, 404);
}
