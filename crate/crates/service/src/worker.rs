//! Background retraining.

use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use tokio::sync::mpsc;

use crate::envelope::{classify, ErrorBody};
use crate::AppState;

/// Quiet period that coalesces selection changes into one fit.
pub const DEBOUNCE: Duration = Duration::from_millis(300);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trigger {
    /// Wait for a quiet period first.
    Debounced,
    Immediate,
}

/// Fit bookkeeping: a fit is pending while `requested > completed`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FitProgress {
    pub requested: u64,
    pub completed: u64,
    pub fits: u64,
    pub last_error: Option<ErrorBody>,
}

impl FitProgress {
    pub fn pending(&self) -> bool {
        self.requested > self.completed
    }
}

pub(crate) async fn run(state: Arc<AppState>, mut rx: mpsc::UnboundedReceiver<Trigger>) {
    while let Some(first) = rx.recv().await {
        if first == Trigger::Debounced {
            loop {
                match tokio::time::timeout(DEBOUNCE, rx.recv()).await {
                    Ok(Some(Trigger::Debounced)) => continue,
                    Ok(Some(Trigger::Immediate)) | Err(_) => break,
                    Ok(None) => return,
                }
            }
        }
        while rx.try_recv().is_ok() {}

        let target = state.fit_progress().requested;
        let job = state.project().prepare_fit();
        let result = match job {
            Ok(job) => tokio::task::spawn_blocking(move || job.run())
                .await
                .unwrap_or_else(|e| Err(spanwise_core::Error::FitFailed(e.to_string()))),
            Err(e) => Err(e),
        };
        let error = match result {
            Ok(snapshot) => {
                state.project().publish(snapshot);
                None
            }
            Err(e) => Some(ErrorBody {
                code: classify(&e).1,
                message: e.to_string(),
            }),
        };
        let mut progress = state.fit_progress();
        progress.completed = progress.completed.max(target);
        progress.fits += u64::from(error.is_none());
        progress.last_error = error;
    }
}
