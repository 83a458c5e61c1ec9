//! HTTP clients for embedding, reranking and completion endpoints.
//!
//! Each endpoint takes a JSON POST and answers with a JSON object:
//!
//! | client | request | response |
//! |---|---|---|
//! | embed | `EmbeddingRequest` | `{"vector": [..]}` or `{"tokens": [[..], ..]}` |
//! | rerank | `{"query", "passage"}` | `{"raw_score"}` |
//! | complete | `{"role", "prompt", "trace_id"}` | `{"response"}` |
//!
//! Connection failures, timeouts, 429 and 5xx count as unavailable and are
//! retried under the configured policy. Other 4xx statuses are invalid
//! requests and malformed bodies are parse failures; neither is retried.

use std::time::Duration;

use evidence_core::providers::{
    Embedder, Embedding, EmbeddingMode, EmbeddingRequest, LanguageModel, ProviderError, RerankVerdict, Reranker,
    RetryPolicy, Role,
};
use evidence_core::retrieval::TokenMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    client: reqwest::blocking::Client,
    url: String,
    retry: RetryPolicy,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, timeout: Duration, retry: RetryPolicy) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::InvalidRequest(format!("http client: {e}")))?;
        Ok(HttpEndpoint { client, url: url.into(), retry })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R, ProviderError> {
        let resp = self
            .client
            .post(&self.url)
            .json(body)
            .send()
            .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", self.url)))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(ProviderError::Unavailable(format!("{} answered {status}", self.url)));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(ProviderError::InvalidRequest(format!("{} answered {status}: {}", self.url, text.trim())));
        }
        let bytes = resp.bytes().map_err(|e| ProviderError::Unavailable(format!("{}: {e}", self.url)))?;
        serde_json::from_slice(&bytes).map_err(|e| ProviderError::ParseFailure(format!("{}: {e}", self.url)))
    }

    pub fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R, ProviderError> {
        self.retry.run(|| self.post_once(body), |ms| std::thread::sleep(Duration::from_millis(ms)))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EmbedResponse {
    Vector { vector: Vec<f64> },
    Tokens { tokens: Vec<Vec<f64>> },
}

fn check_unit(row: &[f64], dimension: usize) -> Result<(), ProviderError> {
    if row.len() != dimension {
        return Err(ProviderError::ParseFailure(format!("vector of length {}, expected {dimension}", row.len())));
    }
    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(ProviderError::ParseFailure(format!("vector norm {norm} is not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: HttpEndpoint,
    dimension: usize,
}

impl RemoteEmbedder {
    pub fn new(endpoint: HttpEndpoint, dimension: usize) -> Self {
        RemoteEmbedder { endpoint, dimension }
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, request: &EmbeddingRequest) -> Result<Embedding, ProviderError> {
        request.validate()?;
        if request.dimension != self.dimension {
            return Err(ProviderError::InvalidRequest(format!(
                "dimension {} requested from a {}-dimensional embedder",
                request.dimension, self.dimension
            )));
        }
        match (request.mode, self.endpoint.post::<_, EmbedResponse>(request)?) {
            (EmbeddingMode::SingleVector, EmbedResponse::Vector { vector }) => {
                check_unit(&vector, self.dimension)?;
                Ok(Embedding::Single(vector))
            }
            (EmbeddingMode::MultiVector, EmbedResponse::Tokens { tokens }) => {
                if tokens.is_empty() {
                    return Err(ProviderError::ParseFailure("no token vectors".into()));
                }
                for row in &tokens {
                    check_unit(row, self.dimension)?;
                }
                TokenMatrix::from_rows(self.dimension, &tokens)
                    .map(Embedding::Multi)
                    .map_err(|e| ProviderError::ParseFailure(e.to_string()))
            }
            (mode, _) => Err(ProviderError::ParseFailure(format!("response shape does not match {mode:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteReranker {
    endpoint: HttpEndpoint,
}

impl RemoteReranker {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        RemoteReranker { endpoint }
    }
}

#[derive(Serialize)]
struct RerankRequest<'a> {
    query: &'a str,
    passage: &'a str,
}

#[derive(Deserialize)]
struct RerankResponse {
    raw_score: f64,
}

impl Reranker for RemoteReranker {
    fn rerank(&self, query: &str, passage: &str) -> Result<RerankVerdict, ProviderError> {
        if query.trim().is_empty() || passage.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let r: RerankResponse = self.endpoint.post(&RerankRequest { query, passage })?;
        if r.raw_score.is_nan() {
            return Err(ProviderError::ParseFailure("raw_score is NaN".into()));
        }
        Ok(RerankVerdict::from_raw(r.raw_score))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteModel {
    endpoint: HttpEndpoint,
}

impl RemoteModel {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        RemoteModel { endpoint }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    role: Role,
    prompt: &'a str,
    trace_id: &'a str,
}

#[derive(Deserialize)]
struct CompletionResponse {
    response: String,
}

impl LanguageModel for RemoteModel {
    fn complete(&self, role: Role, prompt: &str, trace_id: &str) -> Result<String, ProviderError> {
        let r: CompletionResponse = self.endpoint.post(&CompletionRequest { role, prompt, trace_id })?;
        Ok(r.response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::extract::State;
    use axum::http::StatusCode;
    use axum::routing::post;
    use axum::{Json, Router};
    use evidence_core::providers::HashingEmbedder;
    use serde_json::{json, Value};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves `app` on an ephemeral port from a background thread.
    fn serve(app: Router) -> String {
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(listener.local_addr().unwrap()).unwrap();
                axum::serve(listener, app).await.unwrap();
            });
        });
        format!("http://{}", rx.recv().unwrap())
    }

    fn endpoint(url: String) -> HttpEndpoint {
        HttpEndpoint::new(url, Duration::from_secs(5), RetryPolicy { attempts: 3, initial_backoff_ms: 1 }).unwrap()
    }

    async fn embed(Json(req): Json<EmbeddingRequest>) -> Json<Value> {
        let stub = HashingEmbedder::new(req.dimension);
        match stub.embed(&req).unwrap() {
            Embedding::Single(v) => Json(json!({ "vector": v })),
            Embedding::Multi(m) => Json(json!({ "tokens": m.rows().map(|r| r.to_vec()).collect::<Vec<_>>() })),
        }
    }

    #[test]
    fn embedder_matches_the_offline_stub_over_http() {
        let base = serve(Router::new().route("/embed", post(embed)));
        let remote = RemoteEmbedder::new(endpoint(format!("{base}/embed")), 64);
        let stub = HashingEmbedder::default();
        let text = "maternal toxicity in rabbits";
        assert_eq!(remote.embed_single(text).unwrap(), stub.embed_single(text).unwrap());
        assert_eq!(remote.embed_multi(text).unwrap(), stub.embed_multi(text).unwrap());
        assert_eq!(remote.embed_single("  "), Err(ProviderError::EmptyInput));
    }

    #[test]
    fn non_unit_vectors_are_rejected() {
        let app = Router::new().route("/embed", post(|| async { Json(json!({ "vector": [1.0, 1.0] })) }));
        let remote = RemoteEmbedder::new(endpoint(format!("{}/embed", serve(app))), 2);
        assert!(matches!(remote.embed_single("x"), Err(ProviderError::ParseFailure(_))));
    }

    #[test]
    fn transient_failures_are_retried() {
        let hits = Arc::new(AtomicUsize::new(0));
        let app = Router::new()
            .route(
                "/rerank",
                post(|State(h): State<Arc<AtomicUsize>>| async move {
                    if h.fetch_add(1, Ordering::SeqCst) < 2 {
                        Err(StatusCode::SERVICE_UNAVAILABLE)
                    } else {
                        Ok(Json(json!({ "raw_score": 2.0 })))
                    }
                }),
            )
            .with_state(hits.clone());
        let r = RemoteReranker::new(endpoint(format!("{}/rerank", serve(app))));
        let v = r.rerank("q", "p").unwrap();
        assert_eq!(v, RerankVerdict::from_raw(2.0));
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn persistent_outage_surfaces_after_all_attempts() {
        let hits = Arc::new(AtomicUsize::new(0));
        let app = Router::new()
            .route(
                "/llm",
                post(|State(h): State<Arc<AtomicUsize>>| async move {
                    h.fetch_add(1, Ordering::SeqCst);
                    StatusCode::BAD_GATEWAY
                }),
            )
            .with_state(hits.clone());
        let m = RemoteModel::new(endpoint(format!("{}/llm", serve(app))));
        let err = m.complete(Role::Research, "p", "t").unwrap_err();
        assert!(matches!(err, ProviderError::Unavailable(ref s) if s.contains("after 3 attempts")), "{err}");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_and_bad_bodies_are_not_retried() {
        let hits = Arc::new(AtomicUsize::new(0));
        let app = Router::new()
            .route(
                "/bad",
                post(|State(h): State<Arc<AtomicUsize>>| async move {
                    h.fetch_add(1, Ordering::SeqCst);
                    (StatusCode::BAD_REQUEST, "nope")
                }),
            )
            .route("/garbled", post(|| async { "not json" }))
            .route(
                "/llm",
                post(|Json(v): Json<Value>| async move {
                    Json(json!({ "response": format!("{}|{}", v["role"], v["trace_id"]) }))
                }),
            )
            .with_state(hits.clone());
        let base = serve(app);
        let bad = RemoteModel::new(endpoint(format!("{base}/bad")));
        assert!(matches!(bad.complete(Role::Classify, "p", "t"), Err(ProviderError::InvalidRequest(_))));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
        let garbled = RemoteModel::new(endpoint(format!("{base}/garbled")));
        assert!(matches!(garbled.complete(Role::Classify, "p", "t"), Err(ProviderError::ParseFailure(_))));
        let ok = RemoteModel::new(endpoint(format!("{base}/llm")));
        assert_eq!(ok.complete(Role::JudgeRelevance, "p", "run/x").unwrap(), "\"judge_relevance\"|\"run/x\"");
    }

    #[test]
    fn refused_connection_is_unavailable() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let m = RemoteModel::new(endpoint(format!("http://{addr}/llm")));
        assert!(matches!(m.complete(Role::Classify, "p", "t"), Err(ProviderError::Unavailable(_))));
    }
}
