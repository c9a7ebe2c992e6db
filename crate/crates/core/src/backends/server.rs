//! HTTP server exposing a [`PolicyBackend`] over the JSON wire protocol:
//! `POST /score_state`, `/transition`, `/generate` and `/embed`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use tokio::sync::oneshot;

use super::remote::{
    EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse, OwnedScoreStateRequest,
    OwnedTransitionRequest, ScoreStateResponse, TransitionResponse,
};
use super::{BackendError, PolicyBackend, PolicyQuery};
use crate::catalog::{Item, Scene};
use crate::dialogue::TurnContext;
use crate::retrieval::{Embedder, HashingEmbedder};

type Shared = Arc<dyn PolicyBackend>;
type Reply<T> = Result<Json<T>, (StatusCode, String)>;

fn reject(e: BackendError) -> (StatusCode, String) {
    let status = match e {
        BackendError::Parameter(_) => StatusCode::BAD_REQUEST,
        BackendError::Capability(_) => StatusCode::NOT_IMPLEMENTED,
        _ => StatusCode::BAD_GATEWAY,
    };
    (status, e.to_string())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, BackendError> + Send + 'static,
) -> Result<T, (StatusCode, String)> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(reject)
}

async fn score_state(
    State(backend): State<Shared>,
    Json(req): Json<OwnedScoreStateRequest>,
) -> Reply<ScoreStateResponse> {
    let loglik = blocking(move || {
        let query = PolicyQuery {
            context: &req.context,
            item: &req.item,
            polarity: req.polarity,
            prior_states: &req.prior_states,
            observed_state: &req.observed_state,
        };
        backend.state_loglik(&query)
    })
    .await?;
    Ok(Json(ScoreStateResponse {
        loglik: Some(loglik),
    }))
}

async fn transition(
    State(backend): State<Shared>,
    Json(req): Json<OwnedTransitionRequest>,
) -> Reply<TransitionResponse> {
    let logits = blocking(move || {
        let profile = req.current_profile;
        let items = profile
            .item_catalog
            .iter()
            .map(|(id, attrs)| Item::new(id.clone(), attrs.clone()))
            .collect();
        let context = TurnContext {
            dialogue_id: req.dialogue_id,
            turn: req.turn,
            history: req.history,
            scene: Arc::new(Scene::new(profile.scene_id.clone(), items)),
            profile: Arc::new(profile.clone()),
        };
        backend.transition_inference(&context, &profile)
    })
    .await?;
    Ok(Json(TransitionResponse {
        z_yes: Some(logits.z_yes),
        z_no: Some(logits.z_no),
        target_profile: Some(logits.target_profile),
        decision: logits.token,
    }))
}

async fn generate(
    State(backend): State<Shared>,
    Json(req): Json<GenerateRequest<String>>,
) -> Reply<GenerateResponse> {
    let text = blocking(move || backend.generate_text(&req.prompt, &req.decoding)).await?;
    Ok(Json(GenerateResponse { text }))
}

async fn embed(Json(req): Json<EmbedRequest<String>>) -> Reply<EmbedResponse> {
    let embedder = HashingEmbedder::new(req.dimension);
    let v = embedder
        .embed(&req.text)
        .map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()))?;
    Ok(Json(EmbedResponse {
        values: Some(v.values),
    }))
}

pub fn router(backend: Shared) -> Router {
    Router::new()
        .route("/score_state", post(score_state))
        .route("/transition", post(transition))
        .route("/generate", post(generate))
        .route("/embed", post(embed))
        .with_state(backend)
}

/// A server running on a background thread; stops when dropped.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server thread exits.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn(backend: Shared, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
            let app = router(backend);
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
