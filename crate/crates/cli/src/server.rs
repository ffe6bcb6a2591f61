//! Read-only JSON service over the data root, plus the append-only journal.
//!
//! Networks are built on first request and kept in memory per
//! `(symbol, resolution, subtype)`. A background task rebuilds entries whose
//! tick file changed; all rebuilds go through one writer lock.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Duration, SystemTime};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use toponet::figures::ViewWindow;
use toponet::ingest::BarSeries;
use toponet::network::build_network;
use toponet::validate::{analyze_window, shift_test, Chart, ChartLabel};
use toponet::Network;

use crate::commands::project_figures;
use crate::config::RunConfig;
use crate::data::DataStore;
use crate::ShellError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    symbol: String,
    resolution_minutes: i64,
    subtype: usize,
}

pub struct Built {
    modified: SystemTime,
    pub bars: BarSeries,
    pub network: Network,
}

pub struct AppState {
    config: RunConfig,
    config_hash: String,
    store: DataStore,
    built: RwLock<HashMap<Key, Arc<Built>>>,
    writer: tokio::sync::Mutex<()>,
    journal: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(config: RunConfig) -> Arc<Self> {
        Arc::new(Self {
            config_hash: config.hash(),
            store: DataStore::new(&config),
            config,
            built: RwLock::new(HashMap::new()),
            writer: tokio::sync::Mutex::new(()),
            journal: tokio::sync::Mutex::new(()),
        })
    }

    fn journal_path(&self) -> PathBuf {
        self.config.output_dir.join("journal.jsonl")
    }

    fn reports_dir(&self) -> PathBuf {
        self.config.output_dir.join("reports")
    }

    fn cached(&self, key: &Key) -> Option<Arc<Built>> {
        self.built.read().expect("cache lock").get(key).cloned()
    }

    fn is_fresh(&self, key: &Key, entry: &Built) -> bool {
        self.store
            .source_modified(&key.symbol)
            .map(|t| t == entry.modified)
            .unwrap_or(false)
    }

    async fn rebuild(self: &Arc<Self>, key: &Key) -> Result<Arc<Built>, ApiError> {
        let _guard = self.writer.lock().await;
        if let Some(entry) = self.cached(key).filter(|e| self.is_fresh(key, e)) {
            return Ok(entry);
        }
        let state = Arc::clone(self);
        let k = key.clone();
        let entry = tokio::task::spawn_blocking(move || -> Result<Built, ShellError> {
            let modified = state.store.source_modified(&k.symbol)?;
            let bars = state.store.bars(&k.symbol, k.resolution_minutes, state.config.date)?;
            let network = build_network(&bars, &state.config.chart.schedule(k.subtype)?)?;
            Ok(Built {
                modified,
                bars,
                network,
            })
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
        let entry = Arc::new(entry);
        self.built.write().expect("cache lock").insert(key.clone(), Arc::clone(&entry));
        tracing::info!(symbol = %key.symbol, res = key.resolution_minutes, subtype = key.subtype, "network built");
        Ok(entry)
    }

    async fn network(self: &Arc<Self>, key: Key) -> Result<Arc<Built>, ApiError> {
        match self.cached(&key) {
            Some(entry) if self.is_fresh(&key, &entry) => Ok(entry),
            _ => self.rebuild(&key).await,
        }
    }

    /// Rebuilds every cached network whose source changed.
    pub async fn refresh_stale(self: &Arc<Self>) -> usize {
        let keys: Vec<Key> = self.built.read().expect("cache lock").keys().cloned().collect();
        let mut rebuilt = 0;
        for key in keys {
            let stale = self.cached(&key).map(|e| !self.is_fresh(&key, &e)).unwrap_or(false);
            if stale {
                match self.rebuild(&key).await {
                    Ok(_) => rebuilt += 1,
                    Err(e) => tracing::warn!(symbol = %key.symbol, error = %e.message, "refresh failed"),
                }
            }
        }
        rebuilt
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
        }
    }
}

impl From<ShellError> for ApiError {
    fn from(e: ShellError) -> Self {
        let status = match &e {
            ShellError::NotFound(_) => StatusCode::NOT_FOUND,
            e if e.is_client_error() => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChartQuery {
    pub symbol: String,
    pub res: Option<i64>,
    pub subtype: Option<usize>,
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub max_points: Option<usize>,
    pub tau: Option<f64>,
    pub deltas: Option<String>,
}

impl ChartQuery {
    fn key(&self, config: &RunConfig) -> Key {
        Key {
            symbol: self.symbol.clone(),
            resolution_minutes: self.res.unwrap_or(config.resolution_minutes),
            subtype: self.subtype.unwrap_or(3),
        }
    }

    /// `[from, to)` clamped to the series; defaults to the last view.
    fn window(&self, len: usize, view_bars: usize) -> Result<ViewWindow, ApiError> {
        let to = self.to.unwrap_or(len).min(len);
        let from = self.from.unwrap_or(to.saturating_sub(view_bars));
        if from + 3 > to {
            return Err(ApiError::bad_request(format!("window {from}..{to} needs at least 3 of {len} bars")));
        }
        Ok(ViewWindow::new(from, to))
    }
}

async fn analyze(state: &Arc<AppState>, q: &ChartQuery) -> Result<(Arc<Built>, Chart), ApiError> {
    let key = q.key(&state.config);
    let built = state.network(key.clone()).await?;
    let window = q.window(built.bars.len(), state.config.chart.view_bars)?;
    let mut chart_config = state.config.chart.clone();
    if let Some(tau) = q.tau {
        if !(tau >= 0.0) {
            return Err(ApiError::bad_request("tau must be non-negative"));
        }
        chart_config.tau = tau;
    }
    let label = ChartLabel {
        instrument: key.symbol,
        resolution_minutes: Some(key.resolution_minutes),
        subtype: key.subtype,
        window,
    };
    let b = Arc::clone(&built);
    let chart = tokio::task::spawn_blocking(move || analyze_window(label, &b.network, &b.bars.bars, &chart_config))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ShellError::from)?;
    Ok((built, chart))
}

async fn instruments(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let list = state.store.instruments()?;
    Ok(Json(json!({ "config_hash": state.config_hash, "instruments": list })))
}

async fn network(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ChartQuery>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let built = state.network(q.key(&state.config)).await?;
    let window = q.window(built.bars.len(), state.config.chart.view_bars)?;
    let max_points = q.max_points.unwrap_or(state.config.server.max_points);
    let view = built.network.view(window.from, window.to, max_points);
    Ok(Json(json!({
        "config_hash": state.config_hash,
        "symbol": q.symbol,
        "resolution_minutes": q.res.unwrap_or(state.config.resolution_minutes),
        "bars": &built.bars.bars[window.from..window.to],
        "network": view,
    })))
}

async fn figures(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ChartQuery>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (_, chart) = analyze(&state, &q).await?;
    Ok(Json(json!({
        "config_hash": state.config_hash,
        "label": chart.label,
        "bounds": chart.bounds,
        "extrapolation": state.config.extrapolation,
        "figures": project_figures(&chart.figures, &state.config.extrapolation),
    })))
}

async fn extrema(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ChartQuery>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (_, chart) = analyze(&state, &q).await?;
    Ok(Json(json!({
        "config_hash": state.config_hash,
        "label": chart.label,
        "price_range": chart.price_range,
        "extrema": chart.extrema,
    })))
}

async fn interactions(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ChartQuery>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (_, chart) = analyze(&state, &q).await?;
    Ok(Json(json!({
        "config_hash": state.config_hash,
        "label": chart.label,
        "tau": q.tau.unwrap_or(state.config.chart.tau),
        "interactions": chart.interactions,
        "qualification": chart.qualification,
    })))
}

fn parse_deltas(text: &str) -> Result<Vec<f64>, ApiError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|d| d.is_finite())
                .ok_or_else(|| ApiError::bad_request(format!("bad delta `{s}`")))
        })
        .collect()
}

async fn shift(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ChartQuery>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let deltas = match &q.deltas {
        Some(text) => parse_deltas(text)?,
        None => state.config.shift_deltas.clone(),
    };
    let (_, chart) = analyze(&state, &q).await?;
    let tau = q.tau.unwrap_or(state.config.chart.tau);
    let result = shift_test(&chart.extrema, &chart.figures, chart.price_range, tau, &deltas);
    Ok(Json(json!({
        "config_hash": state.config_hash,
        "label": chart.label,
        "result": result,
    })))
}

async fn reports(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let mut names = Vec::new();
    if let Ok(entries) = std::fs::read_dir(state.reports_dir()) {
        for entry in entries.flatten() {
            if entry.path().is_file() {
                if let Some(name) = entry.file_name().to_str() {
                    names.push(name.to_string());
                }
            }
        }
    }
    names.sort();
    Ok(Json(json!({ "config_hash": state.config_hash, "reports": names })))
}

async fn report(State(state): State<Arc<AppState>>, Path(name): Path<String>) -> Result<Response, ApiError> {
    let safe = !name.is_empty() && !name.starts_with('.') && !name.contains(['/', '\\']);
    if !safe {
        return Err(ApiError::bad_request("invalid report name"));
    }
    let path = state.reports_dir().join(&name);
    let bytes = std::fs::read(&path).map_err(|_| ShellError::NotFound(format!("report `{name}`")))?;
    let content_type = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        _ => "text/plain; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JournalStatus {
    Open,
    Hit,
    Miss,
    Expired,
}

/// One analyst prediction. Updates are new lines with the same `id`; the
/// last line per `id` is the current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JournalEntry {
    pub id: String,
    pub created_at: String,
    pub instrument: String,
    #[serde(default)]
    pub resolution_minutes: Option<i64>,
    #[serde(default)]
    pub subtype: Option<usize>,
    #[serde(default)]
    pub view: Option<ViewWindow>,
    #[serde(default)]
    pub figure_id: Option<usize>,
    /// Predicted ordinate band `(low, high)`.
    pub band: (f64, f64),
    pub horizon_bars: usize,
    pub status: JournalStatus,
    #[serde(default)]
    pub note: String,
}

fn read_journal(path: &std::path::Path) -> Result<Vec<JournalEntry>, ShellError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut order: Vec<String> = Vec::new();
    let mut latest: HashMap<String, JournalEntry> = HashMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let entry: JournalEntry = serde_json::from_str(line)?;
        if !latest.contains_key(&entry.id) {
            order.push(entry.id.clone());
        }
        latest.insert(entry.id.clone(), entry);
    }
    Ok(order.into_iter().filter_map(|id| latest.remove(&id)).collect())
}

async fn journal_list(State(state): State<Arc<AppState>>) -> Result<Json<Vec<JournalEntry>>, ApiError> {
    let _guard = state.journal.lock().await;
    Ok(Json(read_journal(&state.journal_path())?))
}

async fn journal_append(
    State(state): State<Arc<AppState>>,
    Json(entry): Json<JournalEntry>,
) -> Result<(StatusCode, Json<JournalEntry>), ApiError> {
    if entry.id.trim().is_empty() || entry.instrument.trim().is_empty() {
        return Err(ApiError::bad_request("id and instrument are required"));
    }
    let (lo, hi) = entry.band;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(ApiError::bad_request("band must be finite with low <= high"));
    }
    let line = serde_json::to_string(&entry).map_err(ShellError::from)?;
    let _guard = state.journal.lock().await;
    let path = state.journal_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(ShellError::from)?;
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(ShellError::from)?;
    writeln!(file, "{line}").map_err(ShellError::from)?;
    Ok((StatusCode::CREATED, Json(entry)))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/instruments", get(instruments))
        .route("/network", get(network))
        .route("/figures", get(figures))
        .route("/extrema", get(extrema))
        .route("/interactions", get(interactions))
        .route("/shift-test", get(shift))
        .route("/reports", get(reports))
        .route("/reports/{name}", get(report))
        .route("/journal", get(journal_list).post(journal_append))
        .with_state(state)
}

pub async fn serve(config: RunConfig) -> Result<(), ShellError> {
    let addr = config.server.addr.clone();
    let period = Duration::from_secs(config.server.refresh_seconds.max(1));
    let state = AppState::new(config);
    let refresher = Arc::clone(&state);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            refresher.refresh_stale().await;
        }
    });
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub fn serve_blocking(config: RunConfig) -> Result<(), ShellError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deltas_parse() {
        assert_eq!(parse_deltas("0,-0.01, 0.02").unwrap(), vec![0.0, -0.01, 0.02]);
        assert!(parse_deltas("0,x").is_err());
        assert!(parse_deltas("inf").is_err());
    }

    #[test]
    fn window_defaults_to_last_view() {
        let q = ChartQuery {
            symbol: "A".into(),
            res: None,
            subtype: None,
            from: None,
            to: None,
            max_points: None,
            tau: None,
            deltas: None,
        };
        assert_eq!(q.window(1000, 300).unwrap(), ViewWindow::new(700, 1000));
        let q = ChartQuery { from: Some(10), to: Some(5000), ..q };
        assert_eq!(q.window(1000, 300).unwrap(), ViewWindow::new(10, 1000));
        let q = ChartQuery { from: Some(999), ..q };
        assert!(q.window(1000, 300).is_err());
    }

    #[test]
    fn journal_keeps_latest_state_per_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let entry = |id: &str, status: JournalStatus| JournalEntry {
            id: id.into(),
            created_at: "2026-01-01T00:00:00Z".into(),
            instrument: "GOOG".into(),
            resolution_minutes: Some(1440),
            subtype: Some(2),
            view: None,
            figure_id: Some(0),
            band: (1.0, 2.0),
            horizon_bars: 5,
            status,
            note: String::new(),
        };
        let lines: Vec<String> = [
            entry("a", JournalStatus::Open),
            entry("b", JournalStatus::Open),
            entry("a", JournalStatus::Hit),
        ]
        .iter()
        .map(|e| serde_json::to_string(e).unwrap())
        .collect();
        std::fs::write(&path, lines.join("\n")).unwrap();
        let got = read_journal(&path).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!((got[0].id.as_str(), got[0].status), ("a", JournalStatus::Hit));
        assert_eq!(got[1].id, "b");
        assert!(read_journal(&dir.path().join("none")).unwrap().is_empty());
    }
}
