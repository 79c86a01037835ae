//! HTTP resolve service: `POST /resolve` takes one canonical document and
//! returns its predictions; `GET /healthz` reports readiness. The index and
//! scorer are loaded once and shared read-only across requests.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use toposieve::corpus::AnnotatedDocument;
use toposieve::pipeline::{ContextMode, Resolver};
use toposieve::reranker::CandidateScorer;
use toposieve::{Gazetteer, NameIndex};

use crate::args::ServeArgs;
use crate::commands::{load_scorer, load_snapshot};
use crate::error::{CliError, CliResult};
use crate::predict::{predict_document, InputDocument};

pub struct AppState {
    pub gazetteer: Gazetteer,
    pub index: NameIndex,
    pub scorer: Box<dyn CandidateScorer>,
    pub k: usize,
    pub mode: ContextMode,
}

impl AppState {
    pub fn load(args: &ServeArgs) -> CliResult<Self> {
        let o = &args.options;
        if o.k == 0 {
            return Err(CliError::config(anyhow::anyhow!("k must be at least 1")));
        }
        let (gazetteer, index) = load_snapshot(&o.index)?;
        let scorer = load_scorer(&o.scorer, &gazetteer)?;
        Ok(Self { gazetteer, index, scorer, k: o.k, mode: o.context.into() })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new().route("/healthz", get(healthz)).route("/resolve", post(resolve)).with_state(state)
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({"status": "ready", "entries": state.gazetteer.len()}))
}

fn error(status: StatusCode, message: String) -> Response {
    (status, Json(json!({"error": message}))).into_response()
}

async fn resolve(State(state): State<Arc<AppState>>, Json(doc): Json<AnnotatedDocument>) -> Response {
    if let Err(why) = doc.validate() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, why);
    }
    let input = InputDocument::from(&doc);
    let result = tokio::task::spawn_blocking(move || {
        let resolver = Resolver::new(&state.index, &state.gazetteer, state.scorer.as_ref(), state.k);
        predict_document(&resolver, &input, state.mode)
    })
    .await;
    match result {
        Ok(Ok(prediction)) => Json(prediction).into_response(),
        Ok(Err(e)) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn serve(args: &ServeArgs) -> CliResult {
    let state = Arc::new(AppState::load(args)?);
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::runtime)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .map_err(|e| CliError::config(anyhow::Error::new(e).context(format!("cannot listen on {}", args.addr))))?;
        eprintln!("listening on {}", listener.local_addr().map_err(CliError::runtime)?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(CliError::runtime)
    })
}
