//! HTTP/JSON API over one annotation session.
//!
//! Every response is an envelope: `{"status":"ok","payload":...}` or
//! `{"status":"error","error":{"code":...,"message":...}}`. Mutations are
//! serialized through one [`Project`]; model fitting runs in a background
//! worker that debounces selection changes and publishes snapshots
//! atomically.

mod envelope;
mod routes;
mod worker;

use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use spanwise_core::session::Project;
use tokio::net::TcpListener;
use tokio::sync::mpsc;

pub use envelope::{classify, ApiError, ErrorBody};
pub use routes::router;
pub use worker::{FitProgress, Trigger, DEBOUNCE};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("saving project on shutdown: {0}")]
    Save(#[from] spanwise_core::Error),
}

/// Shared service state.
pub struct AppState {
    project: Mutex<Project>,
    save_path: Option<PathBuf>,
    fit: Mutex<FitProgress>,
    triggers: mpsc::UnboundedSender<Trigger>,
}

impl AppState {
    /// State plus the receiving end the retrain worker consumes.
    pub fn new(project: Project, save_path: Option<PathBuf>) -> (Arc<Self>, mpsc::UnboundedReceiver<Trigger>) {
        let (triggers, rx) = mpsc::unbounded_channel();
        let state = Arc::new(Self {
            project: Mutex::new(project),
            save_path,
            fit: Mutex::new(FitProgress::default()),
            triggers,
        });
        (state, rx)
    }

    pub fn project(&self) -> MutexGuard<'_, Project> {
        self.project.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn progress(&self) -> FitProgress {
        self.fit_progress().clone()
    }

    fn fit_progress(&self) -> MutexGuard<'_, FitProgress> {
        self.fit.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Queues a fit; the worker coalesces debounced triggers.
    pub fn request_fit(&self, trigger: Trigger) {
        self.fit_progress().requested += 1;
        // The worker only stops at shutdown, after which nothing is queued.
        let _ = self.triggers.send(trigger);
    }

    pub fn save_path(&self) -> Option<&PathBuf> {
        self.save_path.as_ref()
    }
}

/// Serves `project` on `listener` until `shutdown` resolves, then stops the
/// retrain worker and writes the project to `save_path` if one is set.
pub async fn serve(
    listener: TcpListener,
    project: Project,
    save_path: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let (state, rx) = AppState::new(project, save_path);
    let worker = tokio::spawn(worker::run(Arc::clone(&state), rx));
    axum::serve(listener, router(Arc::clone(&state)))
        .with_graceful_shutdown(shutdown)
        .await?;
    worker.abort();
    let _ = worker.await;
    if let Some(path) = &state.save_path {
        let state = Arc::clone(&state);
        let path = path.clone();
        tokio::task::spawn_blocking(move || state.project().save(&path))
            .await
            .map_err(std::io::Error::other)??;
    }
    Ok(())
}
