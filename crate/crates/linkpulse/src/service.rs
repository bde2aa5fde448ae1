//! HTTP facade over a counter store, plus the federation client that
//! collects published counters from remote instances.
//!
//! Endpoints:
//!
//! - `POST /sites/{site}/events` — single event JSON or a JSONL batch;
//!   responds 202 with an ingest report carrying per-line diagnostics.
//! - `GET /sites/{site}/links/{link}/counters` — one link's counters.
//! - `GET /sites/{site}/counters` — every link of a site (the federation
//!   surface).
//! - `GET /sites/{site}/popular?k=K` — top-k slot objects.
//! - `GET /sites/{site}/layout?k=K` — the full layout document.
//! - `GET /healthz` — liveness.
//!
//! Recent counts are resolved against the server's clock; responses echo
//! the `now` used so a federated reader computes current importance
//! against server time, not its own. Read endpoints accept an optional
//! `?now=` override, which keeps replayed logs with synthetic timestamps
//! queryable.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::config::Config;
use crate::counters::{ClickEvent, CounterSnapshot, CounterStore, IngestReport, LineDiagnostic, LinkCounts};
use crate::ids::{LinkId, SiteId};
use crate::popularity::{page_layout, LayoutSlot};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: String,
        source: std::io::Error,
    },
    #[error("timeout talking to {endpoint}")]
    Timeout { endpoint: String },
    #[error("malformed response from {endpoint}: {detail}")]
    MalformedResponse { endpoint: String, detail: String },
}

/// A remote instance publishing counters for one site.
#[derive(Debug, Clone)]
pub struct RemoteSiteEndpoint {
    pub base_url: String,
    pub site: SiteId,
    pub timeout: Duration,
}

impl RemoteSiteEndpoint {
    pub fn new(base_url: impl Into<String>, site: SiteId, timeout: Duration) -> Self {
        RemoteSiteEndpoint {
            base_url: base_url.into(),
            site,
            timeout,
        }
    }

    fn counters_url(&self) -> String {
        format!(
            "{}/sites/{}/counters",
            self.base_url.trim_end_matches('/'),
            self.site
        )
    }
}

/// Wire format of the per-site counter dump; also the federation fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteCountersDump {
    pub site: SiteId,
    pub now: u64,
    pub links: BTreeMap<LinkId, LinkCounts>,
}

#[derive(Clone)]
struct AppState {
    store: Arc<CounterStore>,
    config: Config,
}

/// Running server handle. Dropping it leaves the server running until
/// the process receives a shutdown signal; call [`ServiceHandle::shutdown`]
/// to stop it explicitly.
pub struct ServiceHandle {
    pub local_addr: SocketAddr,
    shutdown: oneshot::Sender<()>,
    task: JoinHandle<()>,
}

impl ServiceHandle {
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(());
        let _ = self.task.await;
    }

    /// Runs until the server exits on its own (signal-driven shutdown).
    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

/// Binds `addr` and serves the API until shutdown or SIGINT/SIGTERM-ish
/// (ctrl-c). All reads are served from point-in-time snapshots.
pub async fn serve(
    store: Arc<CounterStore>,
    addr: &str,
    config: Config,
) -> Result<ServiceHandle, ServiceError> {
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::BindFailure {
            addr: addr.to_string(),
            source,
        })?;
    let local_addr = listener.local_addr().map_err(|source| ServiceError::BindFailure {
        addr: addr.to_string(),
        source,
    })?;
    let app = router(AppState { store, config });
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let shutdown = async move {
            tokio::select! {
                _ = rx => {}
                _ = tokio::signal::ctrl_c() => {}
            }
        };
        if let Err(err) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
            eprintln!("server error: {err}");
        }
    });
    Ok(ServiceHandle {
        local_addr,
        shutdown: tx,
        task,
    })
}

fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sites/{site}/events", post(post_events))
        .route("/sites/{site}/counters", get(get_site_counters))
        .route("/sites/{site}/links/{link}/counters", get(get_link_counters))
        .route("/sites/{site}/popular", get(get_popular))
        .route("/sites/{site}/layout", get(get_layout))
        .with_state(state)
}

/// Fetches one remote site's counters. Connection failures and timeouts
/// come back as [`ServiceError::Timeout`]; anything else unexpected (bad
/// status, non-JSON body, mismatched site) as
/// [`ServiceError::MalformedResponse`].
pub async fn fetch_remote_counters(
    endpoint: &RemoteSiteEndpoint,
) -> Result<SiteCountersDump, ServiceError> {
    let url = endpoint.counters_url();
    let client = reqwest::Client::builder()
        .timeout(endpoint.timeout)
        .build()
        .map_err(|e| ServiceError::MalformedResponse {
            endpoint: url.clone(),
            detail: e.to_string(),
        })?;
    let response = client.get(&url).send().await.map_err(|e| {
        if e.is_timeout() || e.is_connect() {
            ServiceError::Timeout {
                endpoint: url.clone(),
            }
        } else {
            ServiceError::MalformedResponse {
                endpoint: url.clone(),
                detail: e.to_string(),
            }
        }
    })?;
    if !response.status().is_success() {
        return Err(ServiceError::MalformedResponse {
            endpoint: url,
            detail: format!("status {}", response.status()),
        });
    }
    let dump: SiteCountersDump =
        response
            .json()
            .await
            .map_err(|e| ServiceError::MalformedResponse {
                endpoint: url.clone(),
                detail: e.to_string(),
            })?;
    if dump.site != endpoint.site {
        return Err(ServiceError::MalformedResponse {
            endpoint: url,
            detail: format!("expected site {}, got {}", endpoint.site, dump.site),
        });
    }
    Ok(dump)
}

/// Fetches every endpoint and merges the fragments into one snapshot.
/// Any failure aborts the merge; no partial snapshot is returned.
pub async fn federate(
    endpoints: &[RemoteSiteEndpoint],
) -> Result<CounterSnapshot, ServiceError> {
    let mut fragments = Vec::with_capacity(endpoints.len());
    for endpoint in endpoints {
        fragments.push(fetch_remote_counters(endpoint).await?);
    }
    let now = fragments.iter().map(|f| f.now).max().unwrap_or(0);
    let mut snapshot = CounterSnapshot::empty(now);
    for fragment in fragments {
        snapshot.merge_site(fragment.site, fragment.links);
    }
    Ok(snapshot)
}

// ---- handlers ----

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn unknown_site(site: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "unknown_site",
            message: format!("site {site} has no recorded events"),
        }
    }

    fn unknown_link(site: &str, link: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "unknown_link",
            message: format!("link {link} of site {site} has no recorded events"),
        }
    }

    fn bad_request(message: String) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": self.code, "message": self.message});
        (self.status, Json(body)).into_response()
    }
}

fn wall_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Deserialize)]
struct ReadQuery {
    k: Option<usize>,
    now: Option<u64>,
}

async fn healthz() -> &'static str {
    "ok"
}

// Event bodies may omit the site (it is in the path); when present it
// must match.
#[derive(Deserialize)]
struct BodyEvent {
    ts: u64,
    site: Option<SiteId>,
    link: LinkId,
}

async fn post_events(
    State(state): State<AppState>,
    Path(site): Path<String>,
    body: String,
) -> Result<(StatusCode, Json<IngestReport>), ApiError> {
    let site = SiteId::new(&site).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut report = IngestReport::default();

    // A single JSON document counts as a one-line batch, even if pretty
    // printed; otherwise treat the body as JSONL.
    let lines: Vec<(usize, String)> = if serde_json::from_str::<serde_json::Value>(&body).is_ok() {
        vec![(1, body)]
    } else {
        body.lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.to_string()))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect()
    };

    for (line, raw) in lines {
        match serde_json::from_str::<BodyEvent>(&raw) {
            Ok(event) => {
                if let Some(body_site) = &event.site {
                    if body_site != &site {
                        report.errors.push(LineDiagnostic {
                            line,
                            message: format!(
                                "event site {body_site} does not match path site {site}"
                            ),
                        });
                        continue;
                    }
                }
                let click = ClickEvent::new(event.ts, site.clone(), event.link);
                match state.store.record_click(&click) {
                    Ok(()) => report.ingested += 1,
                    Err(err) => report.errors.push(LineDiagnostic {
                        line,
                        message: err.to_string(),
                    }),
                }
            }
            Err(err) => report.errors.push(LineDiagnostic {
                line,
                message: err.to_string(),
            }),
        }
    }
    Ok((StatusCode::ACCEPTED, Json(report)))
}

#[derive(Serialize)]
struct LinkCountersResponse {
    history: u64,
    recent: u64,
    now: u64,
}

async fn get_link_counters(
    State(state): State<AppState>,
    Path((site, link)): Path<(String, String)>,
    Query(query): Query<ReadQuery>,
) -> Result<Json<LinkCountersResponse>, ApiError> {
    let site_id = SiteId::new(&site).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let link_id = LinkId::new(&link).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let now = query.now.unwrap_or_else(wall_now);
    let snapshot = state.store.snapshot(now);
    let rows = snapshot
        .site(&site_id)
        .ok_or_else(|| ApiError::unknown_site(&site))?;
    let counts = rows
        .get(&link_id)
        .ok_or_else(|| ApiError::unknown_link(&site, &link))?;
    Ok(Json(LinkCountersResponse {
        history: counts.history,
        recent: counts.recent,
        now,
    }))
}

async fn get_site_counters(
    State(state): State<AppState>,
    Path(site): Path<String>,
    Query(query): Query<ReadQuery>,
) -> Result<Json<SiteCountersDump>, ApiError> {
    let site_id = SiteId::new(&site).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let now = query.now.unwrap_or_else(wall_now);
    let snapshot = state.store.snapshot(now);
    let rows = snapshot
        .site(&site_id)
        .ok_or_else(|| ApiError::unknown_site(&site))?;
    Ok(Json(SiteCountersDump {
        site: site_id,
        now,
        links: rows.clone(),
    }))
}

async fn get_popular(
    State(state): State<AppState>,
    Path(site): Path<String>,
    Query(query): Query<ReadQuery>,
) -> Result<Json<Vec<LayoutSlot>>, ApiError> {
    let layout = layout_for(&state, &site, &query)?;
    Ok(Json(layout.slots))
}

async fn get_layout(
    State(state): State<AppState>,
    Path(site): Path<String>,
    Query(query): Query<ReadQuery>,
) -> Result<Json<crate::popularity::PageLayout>, ApiError> {
    let layout = layout_for(&state, &site, &query)?;
    Ok(Json(layout))
}

fn layout_for(
    state: &AppState,
    site: &str,
    query: &ReadQuery,
) -> Result<crate::popularity::PageLayout, ApiError> {
    let site_id = SiteId::new(site).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let k = query.k.unwrap_or(state.config.k);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1".to_string()));
    }
    let now = query.now.unwrap_or_else(wall_now);
    let snapshot = state.store.snapshot(now);
    page_layout(&snapshot, &site_id, k).map_err(|_| ApiError::unknown_site(site))
}
