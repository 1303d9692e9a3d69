#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::Value;
use spanwise_core::corpus::Corpus;
use spanwise_core::session::{Project, ProjectConfig};
use spanwise_core::synthetic::{planted, PlantedConfig};
use spanwise_service::{serve, ServeError};
use tokio::sync::oneshot;

pub fn small_project(dir: &Path, train: usize) -> Project {
    let config = PlantedConfig {
        train,
        dev: 15,
        test: 15,
        ..PlantedConfig::default()
    };
    let paths = planted(&config).write(dir).unwrap();
    let corpus = Arc::new(Corpus::ingest(&paths).unwrap());
    Project::new(corpus, Some(paths), ProjectConfig::default())
}

pub struct Server {
    pub base: String,
    agent: ureq::Agent,
    shutdown: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<Result<(), ServeError>>>,
}

impl Server {
    pub fn start(project: Project, save_path: Option<PathBuf>) -> Self {
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (shutdown, shutdown_rx) = oneshot::channel::<()>();
        let handle = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                serve(listener, project, save_path, async {
                    let _ = shutdown_rx.await;
                })
                .await
            })
        });
        let addr = addr_rx.recv().unwrap();
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            base: format!("http://{addr}"),
            agent,
            shutdown: Some(shutdown),
            handle: Some(handle),
        }
    }

    fn read(mut resp: ureq::http::Response<ureq::Body>) -> (u16, Value) {
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        let value: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"));
        assert_envelope(&value);
        (status, value)
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        Self::read(self.agent.get(format!("{}{path}", self.base)).call().unwrap())
    }

    pub fn get_raw(&self, path: &str) -> String {
        let mut resp = self.agent.get(format!("{}{path}", self.base)).call().unwrap();
        resp.body_mut().read_to_string().unwrap()
    }

    pub fn post(&self, path: &str, body: Option<Value>) -> (u16, Value) {
        let req = self.agent.post(format!("{}{path}", self.base));
        let resp = match body {
            Some(b) => req.send_json(&b).unwrap(),
            None => req.send_empty().unwrap(),
        };
        Self::read(resp)
    }

    pub fn post_raw(&self, path: &str, body: &str) -> (u16, Value) {
        let resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        Self::read(resp)
    }

    pub fn delete(&self, path: &str) -> (u16, Value) {
        Self::read(self.agent.delete(format!("{}{path}", self.base)).call().unwrap())
    }

    /// Polls GET /model until no fit is pending.
    pub fn settle(&self) -> Value {
        let deadline = Instant::now() + Duration::from_secs(60);
        loop {
            let (_, v) = self.get("/model");
            if v["payload"]["status"] != "fitting" {
                return v["payload"].clone();
            }
            assert!(Instant::now() < deadline, "fit did not finish");
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn stop(mut self) -> Result<(), ServeError> {
        self.shutdown.take().unwrap().send(()).unwrap();
        self.handle.take().unwrap().join().unwrap()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Exactly one of the two envelope shapes.
pub fn assert_envelope(v: &Value) {
    let obj = v.as_object().expect("envelope is an object");
    match obj.get("status").and_then(Value::as_str) {
        Some("ok") => {
            assert!(obj.keys().all(|k| k == "status" || k == "payload"), "{v}");
        }
        Some("error") => {
            assert_eq!(obj.len(), 2, "{v}");
            let err = obj["error"].as_object().expect("error object");
            assert!(err["code"].is_string() && err["message"].is_string(), "{v}");
            assert_eq!(err.len(), 2);
        }
        _ => panic!("not an envelope: {v}"),
    }
}

pub fn code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap_or("")
}
