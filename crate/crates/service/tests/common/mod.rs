#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::Uri;
use axum::Router;
use sacpdp_core::Bundle;
use sacpdp_service::{serve, AuditLog, Gateway};
use tokio::net::TcpListener;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// An upstream that answers every request with `upstream:<path>` and
/// counts how often it was reached.
pub struct Stub {
    pub addr: SocketAddr,
    pub hits: Arc<AtomicUsize>,
}

impl Stub {
    pub async fn start() -> Stub {
        let hits = Arc::new(AtomicUsize::new(0));
        let app = Router::new()
            .fallback(|State(hits): State<Arc<AtomicUsize>>, uri: Uri| async move {
                hits.fetch_add(1, Ordering::SeqCst);
                format!("upstream:{}", uri.path())
            })
            .with_state(hits.clone());
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        Stub { addr, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

pub struct Running {
    pub base: String,
    pub gateway: Arc<Gateway>,
    pub audit_path: PathBuf,
    pub client: reqwest::Client,
    _dir: tempfile::TempDir,
}

impl Running {
    pub async fn start(upstream: &str) -> Running {
        let dir = tempfile::tempdir().unwrap();
        let audit_path = dir.path().join("audit.jsonl");
        let deployment = Bundle::open(&fixtures().join("ehealth"))
            .unwrap()
            .load()
            .unwrap()
            .deployment;
        let gateway = Arc::new(Gateway::new(
            deployment,
            AuditLog::open(&audit_path).unwrap(),
            upstream,
        ));
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        tokio::spawn(serve(listener, gateway.clone(), std::future::pending()));
        Running {
            base,
            gateway,
            audit_path,
            client: reqwest::Client::new(),
            _dir: dir,
        }
    }

    pub fn get(&self, path: &str) -> reqwest::RequestBuilder {
        self.client.get(format!("{}{}", self.base, path))
    }

    /// A proxied request from `subject` with optional trusted attributes.
    pub fn as_subject(&self, path: &str, subject: &str, attributes: &[&str]) -> reqwest::RequestBuilder {
        let mut req = self.get(path).header("X-Subject-Id", subject);
        for a in attributes {
            req = req.header("X-Subject-Attribute", *a);
        }
        req
    }

    pub async fn decide_xml(&self, body: String) -> reqwest::Response {
        self.client
            .post(format!("{}/pdp/decide", self.base))
            .header("content-type", "application/xml")
            .body(body)
            .send()
            .await
            .unwrap()
    }

    pub async fn admin(&self, kind: &str, body: String) -> reqwest::Response {
        self.client
            .put(format!("{}/admin/{kind}", self.base))
            .body(body)
            .send()
            .await
            .unwrap()
    }

    pub fn audit(&self) -> Vec<serde_json::Value> {
        std::fs::read_to_string(&self.audit_path)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }
}

pub const YEARS_5: &str = "years_of_service=5; issuer=hospital_ADMIN; type=int";
pub const YEARS_2: &str = "years_of_service=2; issuer=hospital_ADMIN; type=int";

pub async fn json(resp: reqwest::Response) -> serde_json::Value {
    serde_json::from_str(&resp.text().await.unwrap()).unwrap()
}
