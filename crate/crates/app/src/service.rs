//! HTTP session service. Request and response bodies are JSON manifests,
//! except corpus uploads, which are corpus files sent as octet streams.
//!
//! ```text
//! POST /sessions                       create from a synthetic spec or a corpus upload
//! GET  /sessions/{id}                  session summary
//! GET  /sessions/{id}/gallery          ?page=&page_size=
//! POST /sessions/{id}/marks            {"sample_id": "12", "verdict": "negative"}
//! POST /sessions/{id}/fit              fit options, all optional
//! POST /sessions/{id}/preview          {"threshold_override": 0.3 | "inf" | null}
//! GET  /sessions/{id}/evaluate         ?k=
//! GET  /sessions/{id}/export           ?threshold=
//! GET  /sessions/{id}/history
//! ```

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use fast_core::manifest::{eval_report_to_manifest, filter_model_to_manifest, format_f64, parse_special_f64, ManifestWriter};
use fast_core::metrics::{histogram, roc_curve, LabeledScore, HISTOGRAM_BINS};
use fast_core::mining::DEFAULT_ALPHA;
use fast_core::synthgen::{Nonlinearity, DEFAULT_PREVALENCE};
use fast_core::urf::CovarianceMode;
use fast_core::FilterModel;
use serde_json::{Map, Value};

use crate::corpus::{Corpus, MAGIC};
use crate::error::{AppError, AppResult};
use crate::marks::Mark;
use crate::session::{Fitted, Session, SessionStore, Source};
use crate::workflow::{evaluate_corpus, simulate, FitOptions, LpfChoice, UrfChoice};

pub const KIND_ERROR: &str = "error";
pub const DEFAULT_PAGE_SIZE: usize = 100;
pub const MAX_UPLOAD_BYTES: usize = 1 << 30;

#[derive(Debug)]
pub struct AppState {
    pub store: SessionStore,
    /// Seed used by fits that do not name one.
    pub default_seed: u64,
}

impl AppState {
    pub fn new(store: SessionStore, default_seed: u64) -> Arc<Self> {
        Arc::new(Self { store, default_seed })
    }
}

type Shared = State<Arc<AppState>>;

fn manifest_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn ok(body: String) -> Response {
    manifest_response(StatusCode::OK, body)
}

fn error_response(e: &AppError) -> Response {
    let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = ManifestWriter::new(KIND_ERROR)
        .uint("status", status.as_u16() as u64)
        .string("message", &e.to_string())
        .finish();
    manifest_response(status, body)
}

fn respond(result: AppResult<Response>) -> Response {
    result.unwrap_or_else(|e| error_response(&e))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok\n" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(summary))
        .route("/sessions/{id}/gallery", get(gallery))
        .route("/sessions/{id}/marks", post(mark))
        .route("/sessions/{id}/fit", post(fit))
        .route("/sessions/{id}/preview", post(preview))
        .route("/sessions/{id}/evaluate", get(evaluate))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/history", get(history))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> AppResult<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::Usage(format!("cannot listen on {addr}: {e}")))?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::Data(format!("server stopped: {e}")))
}

/// JSON object body; an empty body reads as `{}`.
fn json_body(body: &[u8]) -> AppResult<Map<String, Value>> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(Map::new());
    }
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(AppError::Data("request body must be a JSON object".into())),
        Err(e) => Err(AppError::Data(format!("malformed request body: {e}"))),
    }
}

struct Fields<'a>(&'a Map<String, Value>);

impl Fields<'_> {
    fn bad(key: &str, want: &str) -> AppError {
        AppError::Data(format!("field `{key}` must be {want}"))
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key).filter(|v| !v.is_null())
    }

    fn uint(&self, key: &str, default: u64) -> AppResult<u64> {
        self.get(key)
            .map_or(Ok(default), |v| v.as_u64().ok_or_else(|| Self::bad(key, "a nonnegative integer")))
    }

    fn float(&self, key: &str, default: f64) -> AppResult<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => Self::number(v).ok_or_else(|| Self::bad(key, "a number")),
        }
    }

    fn opt_float(&self, key: &str) -> AppResult<Option<f64>> {
        self.get(key)
            .map(|v| Self::number(v).ok_or_else(|| Self::bad(key, "a number or \"inf\"")))
            .transpose()
    }

    fn number(v: &Value) -> Option<f64> {
        match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => parse_special_f64(s),
            _ => None,
        }
    }

    fn boolean(&self, key: &str, default: bool) -> AppResult<bool> {
        self.get(key)
            .map_or(Ok(default), |v| v.as_bool().ok_or_else(|| Self::bad(key, "true or false")))
    }

    fn string(&self, key: &str) -> AppResult<Option<&str>> {
        self.get(key)
            .map(|v| v.as_str().ok_or_else(|| Self::bad(key, "a string")))
            .transpose()
    }
}

/// Fit options from a request body; omitted fields take the command-line defaults.
pub fn fit_options_from_json(map: &Map<String, Value>, default_seed: u64) -> AppResult<FitOptions> {
    let f = Fields(map);
    let d = FitOptions::default();
    let reject_usage = |e: AppError| match e {
        AppError::Usage(m) => AppError::Data(m),
        other => other,
    };
    Ok(FitOptions {
        urf: f.string("urf")?.map_or(Ok(d.urf), UrfChoice::parse).map_err(reject_usage)?,
        lpf: f.string("lpf")?.map_or(Ok(d.lpf), LpfChoice::parse).map_err(reject_usage)?,
        augment: f.boolean("augment", d.augment)?,
        augment_count: f.uint("augment_count", d.augment_count as u64)? as usize,
        lambda_rel: f.float("lambda_rel", d.lambda_rel)?,
        covariance: match f.string("covariance")? {
            None => d.covariance,
            Some(s) => CovarianceMode::parse(s)?,
        },
        alpha: f.float("alpha", DEFAULT_ALPHA)?,
        seed: f.uint("seed", default_seed)?,
        svm_penalty: f.float("svm_c", d.svm_penalty)?,
        svm_max_iterations: f.uint("svm_max_iter", d.svm_max_iterations as u64)? as usize,
        svm_tolerance: f.float("svm_tol", d.svm_tolerance)?,
        ridge: f.float("ridge", d.ridge)?,
        mine_count: f.get("mine_count").map(|_| f.uint("mine_count", 0).map(|v| v as usize)).transpose()?,
    })
}

async fn create_session(State(state): Shared, headers: HeaderMap, body: Bytes) -> Response {
    respond((|| {
        let is_upload = headers
            .get(header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with("application/octet-stream"))
            || body.starts_with(MAGIC.as_bytes());
        let shared = if is_upload {
            let corpus = Corpus::from_bytes(&body)?;
            state.store.create(Source::Upload, corpus, None)?
        } else {
            let map = json_body(&body)?;
            let f = Fields(&map);
            let latent_dim = f
                .get("latent_dim")
                .ok_or_else(|| AppError::Data("field `latent_dim` is required".into()))
                .and_then(|_| f.uint("latent_dim", 0))? as usize;
            let data_dim = f.uint("data_dim", latent_dim as u64)? as usize;
            let n = f
                .get("n")
                .ok_or_else(|| AppError::Data("field `n` is required".into()))
                .and_then(|_| f.uint("n", 0))? as usize;
            let prevalence = f.float("prevalence", DEFAULT_PREVALENCE)?;
            let nonlinearity = match f.string("nonlinearity")? {
                None => Nonlinearity::None,
                Some(s) => Nonlinearity::parse(s)?,
            };
            let seed = f.uint("seed", state.default_seed)?;
            let (spec, corpus) = simulate(latent_dim, data_dim, n, prevalence, nonlinearity, seed).map_err(|e| match e {
                AppError::Usage(m) => AppError::Data(m),
                other => other,
            })?;
            state.store.create(Source::Synthetic, corpus, Some(&spec))?
        };
        let summary = shared.try_read().map(|s| s.summary_manifest()).map_err(|_| {
            AppError::Conflict("session busy".into())
        })?;
        Ok(manifest_response(StatusCode::CREATED, summary))
    })())
}

async fn summary(State(state): Shared, Path(id): Path<String>) -> Response {
    let shared = match state.store.get(&id) {
        Ok(s) => s,
        Err(e) => return error_response(&e),
    };
    let session = shared.read().await;
    ok(session.summary_manifest())
}

fn query_usize(q: &HashMap<String, String>, key: &str, default: usize) -> AppResult<usize> {
    q.get(key).map_or(Ok(default), |v| {
        v.parse()
            .map_err(|_| AppError::Data(format!("query `{key}` must be a nonnegative integer")))
    })
}

async fn gallery(State(state): Shared, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> Response {
    let shared = match state.store.get(&id) {
        Ok(s) => s,
        Err(e) => return error_response(&e),
    };
    let session = shared.read().await;
    respond((|| {
        let page = query_usize(&q, "page", 0)?;
        let page_size = query_usize(&q, "page_size", DEFAULT_PAGE_SIZE)?;
        if page_size == 0 {
            return Err(AppError::Data("page_size must be at least 1".into()));
        }
        let total = session.corpus().len();
        let start = page.saturating_mul(page_size).min(total);
        let end = start.saturating_add(page_size).min(total);
        let fitted = session.fitted();
        let items: Vec<Value> = (start..end)
            .map(|i| {
                let [x, y] = session.gallery()[i];
                let mut m = Map::new();
                m.insert("sample_id".into(), Value::String(i.to_string()));
                m.insert("x".into(), float_value(x));
                m.insert("y".into(), float_value(y));
                m.insert("mark".into(), Value::String(session.marks().get(i).as_str().into()));
                if let Some(f) = fitted {
                    let s = f.similarities[i];
                    m.insert("similarity".into(), float_value(s));
                    m.insert("verdict".into(), Value::String(verdict_str(s, f.model.threshold()).into()));
                }
                Value::Object(m)
            })
            .collect();
        Ok(ok(ManifestWriter::new("gallery")
            .string("session_id", session.id())
            .uint("page", page as u64)
            .uint("page_size", page_size as u64)
            .uint("total", total as u64)
            .json("items", &Value::Array(items).to_string())
            .finish()))
    })())
}

fn float_value(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or_else(|| Value::String(format_f64(v)), Value::Number)
}

fn verdict_str(similarity: f64, threshold: f64) -> &'static str {
    if similarity >= threshold {
        "block"
    } else {
        "keep"
    }
}

async fn mark(State(state): Shared, Path(id): Path<String>, body: Bytes) -> Response {
    let shared = match state.store.get(&id) {
        Ok(s) => s,
        Err(e) => return error_response(&e),
    };
    let mut session = shared.write().await;
    respond((|| {
        let map = json_body(&body)?;
        let f = Fields(&map);
        let sample_id = match f.get("sample_id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) if n.is_u64() => n.to_string(),
            _ => return Err(Fields::bad("sample_id", "a sample id")),
        };
        let verdict = f.string("verdict")?.ok_or_else(|| Fields::bad("verdict", "a verdict"))?;
        let mark = Mark::parse(verdict)?;
        session.mark(&sample_id, mark)?;
        Ok(ok(ManifestWriter::new("mark_ack")
            .string("session_id", session.id())
            .string("sample_id", &sample_id)
            .string("verdict", mark.as_str())
            .uint("negatives", session.marks().negatives() as u64)
            .uint("positives", session.marks().positives() as u64)
            .finish()))
    })())
}

/// Labeled scores for the ROC curve: corpus labels when present, else the marks.
fn roc_scores(session: &Session, fitted: &Fitted) -> (&'static str, Vec<LabeledScore>) {
    let sims = &fitted.similarities;
    if let Some(labels) = session.corpus().labels() {
        let scored = sims
            .iter()
            .zip(labels)
            .filter_map(|(s, l)| LabeledScore::new(*s, *l).ok())
            .collect();
        return ("labels", scored);
    }
    let marks = session.marks();
    let scored = marks
        .rows_with(Mark::Negative)
        .into_iter()
        .map(|r| (r, true))
        .chain(marks.rows_with(Mark::Positive).into_iter().map(|r| (r, false)))
        .filter_map(|(r, l)| LabeledScore::new(sims[r], l).ok())
        .collect();
    ("marks", scored)
}

async fn fit(State(state): Shared, Path(id): Path<String>, body: Bytes) -> Response {
    let shared = match state.store.get(&id) {
        Ok(s) => s,
        Err(e) => return error_response(&e),
    };
    let mut session = shared.write().await;
    respond((|| {
        let opts = fit_options_from_json(&json_body(&body)?, state.default_seed)?;
        let outcome = session.fit(&opts)?;
        let fitted = session.fitted().expect("model stored by fit");
        let hist = histogram(&fitted.similarities, HISTOGRAM_BINS)?;
        let (mut source, scored) = roc_scores(&session, fitted);
        let roc = roc_curve(&scored).unwrap_or_else(|_| {
            source = "none";
            Vec::new()
        });
        let thresholds: Vec<f64> = roc.iter().map(|p| p.threshold).collect();
        let fpr: Vec<f64> = roc.iter().map(|p| p.false_positive_rate).collect();
        let tpr: Vec<f64> = roc.iter().map(|p| p.true_positive_rate).collect();
        let mined = outcome.mining.as_ref().map_or(0, |m| m.mined.len());
        Ok(ok(ManifestWriter::new("fit_result")
            .string("session_id", session.id())
            .uint("fit_index", session.history().len() as u64)
            .uint("n_negative", outcome.n_negative as u64)
            .uint("n_positive", outcome.n_positive as u64)
            .uint("mined", mined as u64)
            .float("threshold", outcome.model.threshold())
            .float("min_similarity", hist.min)
            .float("max_similarity", hist.max)
            .uint("histogram_bins", HISTOGRAM_BINS as u64)
            .json("histogram_counts", &Value::from(hist.counts).to_string())
            .string("roc_source", source)
            .floats("roc_threshold", &thresholds)
            .floats("roc_fpr", &fpr)
            .floats("roc_tpr", &tpr)
            .json("model", filter_model_to_manifest(&outcome.model).trim_end())
            .finish()))
    })())
}

fn require_fitted(session: &Session) -> AppResult<&Fitted> {
    session
        .fitted()
        .ok_or_else(|| AppError::Conflict("session has no fitted model".into()))
}

async fn preview(State(state): Shared, Path(id): Path<String>, body: Bytes) -> Response {
    let shared = match state.store.get(&id) {
        Ok(s) => s,
        Err(e) => return error_response(&e),
    };
    let session = shared.read().await;
    respond((|| {
        let map = json_body(&body)?;
        let override_t = Fields(&map).opt_float("threshold_override")?;
        if override_t.is_some_and(f64::is_nan) {
            return Err(AppError::Data("threshold_override must not be NaN".into()));
        }
        let fitted = require_fitted(&session)?;
        let fitted_t = fitted.model.threshold();
        let t = override_t.unwrap_or(fitted_t);
        let verdicts: Vec<String> = fitted.similarities.iter().map(|s| verdict_str(*s, t).to_owned()).collect();
        let n_blocked = fitted.similarities.iter().filter(|s| **s >= t).count();
        let (fpr, tpr) = match session.corpus().labels() {
            Some(labels) => operating_point(&fitted.similarities, labels, t),
            None => (None, None),
        };
        Ok(ok(ManifestWriter::new("preview")
            .string("session_id", session.id())
            .uint("version", session.next_preview_version())
            .uint("fit_index", session.history().len() as u64)
            .float("fitted_threshold", fitted_t)
            .float("threshold", t)
            .uint("n_kept", (verdicts.len() - n_blocked) as u64)
            .uint("n_blocked", n_blocked as u64)
            .opt_float("recall", tpr)
            .opt_float("false_positive_rate", fpr)
            .floats("similarities", &fitted.similarities)
            .strings("verdicts", &verdicts)
            .finish()))
    })())
}

/// (false positive rate, true positive rate) of blocking at `t`; a rate is
/// `None` when its class is empty.
fn operating_point(sims: &[f64], labels: &[bool], t: f64) -> (Option<f64>, Option<f64>) {
    let (mut tp, mut fp, mut neg, mut pos) = (0u64, 0u64, 0u64, 0u64);
    for (s, l) in sims.iter().zip(labels) {
        let blocked = *s >= t;
        if *l {
            neg += 1;
            tp += blocked as u64;
        } else {
            pos += 1;
            fp += blocked as u64;
        }
    }
    let rate = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    (rate(fp, pos), rate(tp, neg))
}

async fn evaluate(State(state): Shared, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> Response {
    let shared = match state.store.get(&id) {
        Ok(s) => s,
        Err(e) => return error_response(&e),
    };
    let session = shared.read().await;
    respond((|| {
        let k = query_usize(&q, "k", fast_core::metrics::DEFAULT_K)?;
        let fitted = require_fitted(&session)?;
        if session.corpus().labels().is_none() {
            return Err(AppError::Conflict("session corpus has no labels".into()));
        }
        let report = evaluate_corpus(session.corpus(), &fitted.model, fitted.inverter.as_ref(), None, k)?;
        Ok(ok(eval_report_to_manifest(&report)))
    })())
}

async fn export(State(state): Shared, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> Response {
    let shared = match state.store.get(&id) {
        Ok(s) => s,
        Err(e) => return error_response(&e),
    };
    let session = shared.read().await;
    respond((|| {
        let fitted = require_fitted(&session)?;
        let model = match q.get("threshold") {
            None => fitted.model.clone(),
            Some(raw) => {
                let t = parse_special_f64(raw)
                    .ok_or_else(|| AppError::Data("query `threshold` must be a number or inf".into()))?;
                FilterModel::new(fitted.model.direction().clone(), t, fitted.model.lpf_id())?
            }
        };
        Ok(ok(filter_model_to_manifest(&model)))
    })())
}

async fn history(State(state): Shared, Path(id): Path<String>) -> Response {
    let shared = match state.store.get(&id) {
        Ok(s) => s,
        Err(e) => return error_response(&e),
    };
    let session = shared.read().await;
    let events: Vec<String> = session.history().iter().map(|e| e.to_json()).collect();
    ok(ManifestWriter::new("history")
        .string("session_id", session.id())
        .json("events", &format!("[{}]", events.join(",")))
        .finish())
}
