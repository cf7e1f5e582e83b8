use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use kws_core::{build_index_from_graphs, parse_lattice, IndexConfig, Method};
use kws_service::{router, ApiSearchResponse, AppState};
use tower::ServiceExt;

const SAMPLE: &str = "LATTICE r1 30\nN 4\nE 4\nnode 0 0\nnode 1 8\nnode 2 22\nnode 3 30\n\
    edge 0 0 1 the 0.0\nedge 1 1 2 cloud -0.5108256237659907\n\
    edge 2 1 2 clouds -0.916290731874155\nedge 3 2 3 is 0.0\n";

fn state(method: Method) -> AppState {
    let g = parse_lattice(SAMPLE.as_bytes()).unwrap();
    let cfg = IndexConfig {
        prune_epsilon: 0.0,
        ..IndexConfig::with_method(method)
    };
    AppState::loaded(build_index_from_graphs(vec![g], &cfg).unwrap())
}

async fn get(state: AppState, uri: &str) -> (StatusCode, Vec<u8>) {
    let res = router(state)
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = res.status();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get_json(uri: &str) -> (StatusCode, serde_json::Value) {
    let (status, body) = get(state(Method::FrameMax), uri).await;
    (status, serde_json::from_slice(&body).unwrap())
}

#[tokio::test]
async fn search_sample() {
    let (status, body) = get(state(Method::FrameMax), "/api/search?q=cloud&tau=0.5").await;
    assert_eq!(status, StatusCode::OK);
    let r: ApiSearchResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.query, "cloud");
    assert_eq!(r.tau, 0.5);
    assert!(!r.out_of_lexicon);
    assert_eq!(r.detected_count, 1);
    assert_eq!(r.results.len(), 1);
    assert_eq!(r.results[0].rank, 1);
    assert_eq!(r.results[0].region_id, "r1");
    assert!((r.results[0].score - 0.6).abs() < 1e-9);
    assert_eq!((r.results[0].span.begin, r.results[0].span.end), (8, 22));
}

#[tokio::test]
async fn search_defaults_and_limit() {
    let (_, v) = get_json("/api/search?q=clouds").await;
    assert_eq!(v["tau"], 0.5);
    assert_eq!(v["detected_count"], 0);
    let (_, v) = get_json("/api/search?q=clouds&tau=0.3&limit=0").await;
    assert_eq!(v["detected_count"], 1);
    assert_eq!(v["results"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn search_out_of_lexicon() {
    let (status, v) = get_json("/api/search?q=zzz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["out_of_lexicon"], true);
    assert!(v["results"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn malformed_parameters() {
    for uri in [
        "/api/search?q=cloud&tau=abc",
        "/api/search?q=cloud&tau=-0.1",
        "/api/search?q=cloud&tau=1.5",
        "/api/search?q=cloud&limit=-3",
        "/api/search?tau=0.5",
        "/api/search?q=",
        "/api/suggest?prefix=c&limit=x",
    ] {
        let (status, v) = get_json(uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(v["error"].is_string());
    }
}

#[tokio::test]
async fn block_sum_accepts_tau_above_one() {
    let (status, _) = get(state(Method::BlockSum), "/api/search?q=the&tau=1.5").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn not_ready_before_load() {
    let empty = AppState::default();
    for uri in ["/api/search?q=cloud", "/api/suggest?prefix=c", "/api/stats"] {
        let (status, _) = get(empty.clone(), uri).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    }
    let (status, body) = get(empty, "/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn suggest_words() {
    let (_, v) = get_json("/api/suggest?prefix=clo").await;
    assert_eq!(v, serde_json::json!(["cloud", "clouds"]));
    let (_, v) = get_json("/api/suggest?prefix=zz").await;
    assert_eq!(v, serde_json::json!([]));
    let (_, v) = get_json("/api/suggest?prefix=&limit=2").await;
    assert_eq!(v, serde_json::json!(["cloud", "clouds"]));
    let (_, v) = get_json("/api/suggest").await;
    assert_eq!(v.as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn stats_sample() {
    let (_, v) = get_json("/api/stats").await;
    assert_eq!(v["regions"], 1);
    assert_eq!(v["total_spots"], 4);
    assert_eq!(v["spots_per_line"], 4.0);
}

#[tokio::test]
async fn identical_requests_identical_bytes() {
    let s = state(Method::FrameMax);
    let a = get(s.clone(), "/api/search?q=the&tau=0").await;
    let b = get(s, "/api/search?q=the&tau=0").await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn cors_headers_present() {
    let res = router(state(Method::FrameMax))
        .oneshot(
            Request::get("/api/stats")
                .header("origin", "http://localhost:5173")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert!(res.headers().contains_key("access-control-allow-origin"));
}
