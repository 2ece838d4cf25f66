//! HttpProvider against a local stub server.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use csaug::translate::{
    CachedProvider, HttpProvider, Provenance, TranslationCache, TranslationProvider, TranslationRequest,
};
use csaug::Error;
use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

#[derive(Default)]
struct Stub {
    requests: AtomicUsize,
    /// Remaining 503 answers before `/translate` starts succeeding.
    failures_left: AtomicUsize,
    auth: Mutex<Vec<Option<String>>>,
}

fn spawn(stub: Arc<Stub>) -> String {
    let server = Server::http("127.0.0.1:0").unwrap();
    let base = format!("http://{}", server.server_addr().to_ip().unwrap());
    thread::spawn(move || {
        for mut request in server.incoming_requests() {
            stub.requests.fetch_add(1, Ordering::SeqCst);
            let auth = request
                .headers()
                .iter()
                .find(|h| h.field.equiv("Authorization"))
                .map(|h| h.value.to_string());
            stub.auth.lock().unwrap().push(auth);
            let json_header = Header::from_bytes("Content-Type", "application/json").unwrap();
            let response = match request.url() {
                "/languages" => Response::from_string(json!([{"code": "de"}, {"code": "es"}]).to_string()),
                "/translate" => {
                    let mut body = String::new();
                    request.as_reader().read_to_string(&mut body).unwrap();
                    let v: Value = serde_json::from_str(&body).unwrap();
                    let target = v["target"].as_str().unwrap();
                    let q = v["q"].as_str().unwrap();
                    let pending = stub.failures_left.load(Ordering::SeqCst);
                    if pending > 0 {
                        stub.failures_left.store(pending - 1, Ordering::SeqCst);
                        Response::from_string("busy").with_status_code(503)
                    } else if target == "xx" {
                        Response::from_string("slow down").with_status_code(429)
                    } else if target == "yy" {
                        Response::from_string("bad language").with_status_code(400)
                    } else {
                        Response::from_string(json!({"translatedText": format!("{target} {q}")}).to_string())
                    }
                }
                _ => Response::from_string("not found").with_status_code(404),
            };
            let _ = request.respond(response.with_header(json_header));
        }
    });
    base
}

fn provider(base: &str) -> HttpProvider {
    HttpProvider::new(base)
        .unwrap()
        .with_backoff_base(Duration::from_millis(1))
}

fn req(text: &str, target: &str) -> TranslationRequest {
    TranslationRequest::new(text, "en", target).unwrap()
}

#[test]
fn translates_and_lists_languages() {
    let stub = Arc::new(Stub::default());
    let p = provider(&spawn(stub.clone()));
    let langs = p.supported_languages().unwrap();
    assert_eq!(langs.into_iter().collect::<Vec<_>>(), ["de", "es"]);
    // Cached after the first call.
    p.supported_languages().unwrap();
    assert_eq!(stub.requests.load(Ordering::SeqCst), 1);

    let r = p.translate(&req("new york", "de")).unwrap();
    assert_eq!(r.tokens, ["de", "new", "york"]);
    assert_eq!(r.provenance, Provenance::Http);
}

#[test]
fn bearer_token_is_sent() {
    let stub = Arc::new(Stub::default());
    let p = provider(&spawn(stub.clone())).with_token("s3cret");
    p.translate(&req("boston", "es")).unwrap();
    assert_eq!(stub.auth.lock().unwrap()[0].as_deref(), Some("Bearer s3cret"));

    let stub = Arc::new(Stub::default());
    provider(&spawn(stub.clone())).translate(&req("boston", "es")).unwrap();
    assert_eq!(stub.auth.lock().unwrap()[0], None);
}

#[test]
fn server_errors_are_retried() {
    let stub = Arc::new(Stub::default());
    stub.failures_left.store(2, Ordering::SeqCst);
    let p = provider(&spawn(stub.clone()));
    let r = p.translate(&req("denver", "de")).unwrap();
    assert_eq!(r.text, "de denver");
    assert_eq!(p.request_count(), 3);

    stub.failures_left.store(3, Ordering::SeqCst);
    let err = p.translate(&req("denver", "de")).unwrap_err();
    assert!(matches!(err, Error::ProviderUnavailable(_)), "{err:?}");
    assert_eq!(p.request_count(), 6);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = Arc::new(Stub::default());
    let p = provider(&spawn(stub.clone()));
    let err = p.translate(&req("x", "xx")).unwrap_err();
    assert!(matches!(err, Error::RateLimited(_)), "{err:?}");
    let err = p.translate(&req("x", "yy")).unwrap_err();
    assert!(matches!(err, Error::ProviderRejected { status: 400, .. }), "{err:?}");
    assert!(err.is_provider_failure());
    assert_eq!(p.request_count(), 2);
}

#[test]
fn disk_cache_hit_makes_no_network_call() {
    let stub = Arc::new(Stub::default());
    let base = spawn(stub.clone());
    let dir = tempfile::tempdir().unwrap();

    let first = CachedProvider::new(
        provider(&base),
        TranslationCache::open(dir.path(), "http:stub").unwrap(),
    );
    assert_eq!(
        first.translate(&req("miami", "es")).unwrap().provenance,
        Provenance::Http
    );
    assert_eq!(first.inner().request_count(), 1);
    drop(first);

    let second = CachedProvider::new(
        provider(&base),
        TranslationCache::open(dir.path(), "http:stub").unwrap(),
    );
    let hit = second.translate(&req("miami", "es")).unwrap();
    assert_eq!(hit.text, "es miami");
    assert_eq!(hit.provenance, Provenance::Cache);
    assert_eq!(second.inner().request_count(), 0);
    assert_eq!(stub.requests.load(Ordering::SeqCst), 1);
}
