use std::str::FromStr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use spanwise_core::corpus::{corpus_stats, CorpusStats, Split, Token};
use spanwise_core::labelmodel::{ExportRecord, LfStats, ModelKind};
use spanwise_core::rules::{LabelingFunction, Polarity, SpanAnnotation};
use spanwise_core::session::{FpReport, Project, SnapshotStatus, SnapshotSummary};

use crate::envelope::{Accepted, ApiError, ApiResult, ErrorBody, Ok};
use crate::worker::Trigger;
use crate::AppState;

type AppRef = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/project", get(project))
        .route("/next_doc", get(next_doc))
        .route("/annotations", post(annotations))
        .route("/lfs", get(lfs))
        .route("/lfs/{id}", axum::routing::delete(prune))
        .route("/lfs/{id}/select", post(select))
        .route("/lfs/{id}/deselect", post(deselect))
        .route("/lfs/{id}/negate", post(negate))
        .route("/lfs/{id}/feedback", get(feedback))
        .route("/retrain", post(retrain))
        .route("/model", get(model).post(set_model))
        .route("/export", get(export))
        .route("/save", post(save))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

/// Runs `f` against the project on the blocking pool.
async fn with_project<T, F>(state: &Arc<AppState>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Project) -> ApiResult<T> + Send + 'static,
{
    let state = Arc::clone(state);
    tokio::task::spawn_blocking(move || f(&mut state.project()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "METHOD_NOT_ALLOWED",
        "method not allowed",
    )
}

async fn health() -> impl IntoResponse {
    Json(json!({"status": "ok"}))
}

#[derive(Serialize)]
struct ProjectInfo {
    labels: Vec<String>,
    model: ModelKind,
    tau_default: f64,
    stats: CorpusStats,
    annotations: usize,
    suggested: usize,
    selected: usize,
    served: usize,
    status: SnapshotStatus,
}

async fn project(State(state): AppRef) -> ApiResult<Ok<ProjectInfo>> {
    with_project(&state, |p| {
        Result::Ok(Ok(ProjectInfo {
            labels: p.corpus().labels().classes().to_vec(),
            model: p.model(),
            tau_default: p.config().tau_default,
            stats: corpus_stats(p.corpus()),
            annotations: p.annotations().len(),
            suggested: p.functions().count(),
            selected: p.selected_functions().len(),
            served: p.sampler().served.len(),
            status: p.status(),
        }))
    })
    .await
}

#[derive(Serialize)]
struct DocPayload {
    doc_id: String,
    split: Split,
    strategy: spanwise_core::sampler::Strategy,
    tokens: Vec<Token>,
}

async fn next_doc(State(state): AppRef) -> ApiResult<Ok<DocPayload>> {
    with_project(&state, |p| {
        let pick = p.next_document()?;
        let doc = p.corpus().doc(&pick.doc_id).expect("sampler returns known ids");
        Result::Ok(Ok(DocPayload {
            doc_id: doc.id.clone(),
            split: doc.split,
            strategy: pick.strategy,
            tokens: doc.tokens.clone(),
        }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationBody {
    doc_id: String,
    start: usize,
    end: usize,
    label: String,
    #[serde(default = "positive")]
    polarity: Polarity,
}

fn positive() -> Polarity {
    Polarity::Positive
}

#[derive(Serialize)]
struct SuggestionView {
    id: String,
    name: String,
    target: String,
    polarity: Polarity,
    span_len: usize,
    coverage: f64,
    doc_coverage: usize,
    train_votes: usize,
    dev_precision: Option<f64>,
    dev_votes: usize,
    selected: bool,
}

#[derive(Serialize)]
struct SuggestionsPayload {
    annotation_index: usize,
    off_train: bool,
    suggestions: Vec<SuggestionView>,
}

async fn annotations(
    State(state): AppRef,
    body: Result<Json<AnnotationBody>, JsonRejection>,
) -> ApiResult<Ok<SuggestionsPayload>> {
    let Json(body) = body?;
    with_project(&state, move |p| {
        let out = p.submit_annotation(SpanAnnotation {
            doc_id: body.doc_id,
            start: body.start,
            end: body.end,
            label: body.label,
            polarity: body.polarity,
        })?;
        let suggestions = out
            .suggestions
            .into_iter()
            .map(|s| SuggestionView {
                id: s.lf.id().to_string(),
                name: s.lf.name().to_string(),
                target: s.lf.target().to_string(),
                polarity: s.lf.polarity(),
                span_len: s.lf.span_len(),
                coverage: s.coverage,
                doc_coverage: s.doc_coverage,
                train_votes: s.train_votes,
                dev_precision: s.dev_precision,
                dev_votes: s.dev_votes,
                selected: p.is_selected(s.lf.id()),
            })
            .collect();
        Result::Ok(Ok(SuggestionsPayload {
            annotation_index: out.annotation_index,
            off_train: out.off_train,
            suggestions,
        }))
    })
    .await
}

#[derive(Serialize)]
struct FunctionView {
    #[serde(flatten)]
    lf: LabelingFunction,
    selected: bool,
    /// Statistics from the latest snapshot, when it includes the function.
    stats: Option<LfStats>,
}

#[derive(Serialize)]
struct FunctionsPayload {
    suggested: Vec<FunctionView>,
    selected: Vec<String>,
}

fn view(p: &Project, lf: &LabelingFunction) -> FunctionView {
    FunctionView {
        lf: lf.clone(),
        selected: p.is_selected(lf.id()),
        stats: p.snapshot().and_then(|s| s.stats_for(lf.id()).cloned()),
    }
}

async fn lfs(State(state): AppRef) -> ApiResult<Ok<FunctionsPayload>> {
    with_project(&state, |p| {
        Result::Ok(Ok(FunctionsPayload {
            suggested: p.functions().map(|lf| view(p, lf)).collect(),
            selected: p.selected_functions().iter().map(|lf| lf.id().to_string()).collect(),
        }))
    })
    .await
}

#[derive(Serialize)]
struct SelectionPayload {
    id: String,
    selected: bool,
    n_selected: usize,
    status: SnapshotStatus,
}

async fn set_selected(state: Arc<AppState>, id: String, selected: bool) -> ApiResult<Ok<SelectionPayload>> {
    let payload = with_project(&state, move |p| {
        p.set_selected(&id, selected)?;
        Result::Ok(SelectionPayload {
            n_selected: p.selected_functions().len(),
            status: p.status(),
            id,
            selected,
        })
    })
    .await?;
    if payload.n_selected > 0 && payload.status != SnapshotStatus::Fresh {
        state.request_fit(Trigger::Debounced);
    }
    Result::Ok(Ok(payload))
}

async fn select(State(state): AppRef, Path(id): Path<String>) -> ApiResult<Ok<SelectionPayload>> {
    set_selected(state, id, true).await
}

async fn deselect(State(state): AppRef, Path(id): Path<String>) -> ApiResult<Ok<SelectionPayload>> {
    set_selected(state, id, false).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NegateBody {
    position: usize,
    index: usize,
}

async fn negate(
    State(state): AppRef,
    Path(id): Path<String>,
    body: Result<Json<NegateBody>, JsonRejection>,
) -> ApiResult<Ok<FunctionView>> {
    let Json(body) = body?;
    with_project(&state, move |p| {
        let lf = p.toggle_negation(&id, body.position, body.index)?;
        Result::Ok(Ok(view(p, &lf)))
    })
    .await
}

async fn prune(State(state): AppRef, Path(id): Path<String>) -> ApiResult<Ok<serde_json::Value>> {
    with_project(&state, move |p| {
        p.prune(&id)?;
        Result::Ok(Ok(json!({"id": id, "pruned": true})))
    })
    .await
}

async fn feedback(State(state): AppRef, Path(id): Path<String>) -> ApiResult<Ok<FpReport>> {
    with_project(&state, move |p| Result::Ok(Ok(p.fp_feedback(&id)?))).await
}

async fn retrain(State(state): AppRef) -> ApiResult<Accepted<serde_json::Value>> {
    let n = with_project(&state, |p| Result::Ok(p.selected_functions().len())).await?;
    if n == 0 {
        return Err(spanwise_core::Error::EmptySelection.into());
    }
    state.request_fit(Trigger::Immediate);
    Result::Ok(Accepted(json!({"status": "fitting", "n_selected": n})))
}

#[derive(Serialize)]
struct ModelPayload {
    /// `fitting`, `fresh`, `stale` or `none`.
    status: &'static str,
    model: ModelKind,
    fits: u64,
    last_error: Option<ErrorBody>,
    snapshot: Option<SnapshotSummary>,
}

async fn model(State(state): AppRef) -> ApiResult<Ok<ModelPayload>> {
    let progress = state.progress();
    let (snapshot, snapshot_status, kind) = {
        let p = state.project();
        (p.snapshot().cloned(), p.status(), p.model())
    };
    let status = if progress.pending() {
        "fitting"
    } else {
        match snapshot_status {
            SnapshotStatus::Fresh => "fresh",
            SnapshotStatus::Stale => "stale",
            SnapshotStatus::None => "none",
        }
    };
    Result::Ok(Ok(ModelPayload {
        status,
        model: kind,
        fits: progress.fits,
        last_error: progress.last_error,
        snapshot: snapshot.map(|s| s.summary()),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelBody {
    model: String,
}

async fn set_model(
    State(state): AppRef,
    body: Result<Json<ModelBody>, JsonRejection>,
) -> ApiResult<Ok<serde_json::Value>> {
    let Json(body) = body?;
    let kind = ModelKind::from_str(&body.model)?;
    let n = with_project(&state, move |p| {
        p.set_model(kind);
        Result::Ok(p.selected_functions().len())
    })
    .await?;
    if n > 0 {
        state.request_fit(Trigger::Debounced);
    }
    Result::Ok(Ok(json!({"model": kind})))
}

#[derive(Deserialize)]
struct ExportQuery {
    split: String,
    #[serde(default)]
    force: bool,
}

#[derive(Serialize)]
struct ExportPayload {
    split: Split,
    records: Vec<ExportRecord>,
}

async fn export(
    State(state): AppRef,
    query: Result<Query<ExportQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Ok<ExportPayload>> {
    let Query(query) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", e.body_text()))?;
    let split = Split::from_str(&query.split)?;
    with_project(&state, move |p| {
        Result::Ok(Ok(ExportPayload {
            split,
            records: p.export(split, query.force)?,
        }))
    })
    .await
}

async fn save(State(state): AppRef) -> ApiResult<Ok<serde_json::Value>> {
    let path = state.save_path().cloned().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "NO_PROJECT_PATH",
            "service was started without a project file",
        )
    })?;
    with_project(&state, move |p| {
        p.save(&path)?;
        Result::Ok(Ok(json!({"path": path})))
    })
    .await
}
