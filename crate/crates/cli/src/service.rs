//! HTTP service: image sessions kept in an in-memory LRU, maps and tables
//! computed on demand and cached per session.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cldmap::ddmap::DefectTable;
use cldmap::dmap::SuccessTable;
use cldmap::optimize::{QualityCurve, DEFAULT_GRID};
use cldmap::pipeline::{tau_from_percent, TauAnalysis};
use cldmap::render::MapFormat;
use cldmap::{CldError, GrayImage, ImageStats};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{self, AutoTau, Selection, DEFAULT_K};

pub const DEFAULT_SESSIONS: usize = 16;
pub const DEFAULT_PORT: u16 = 8080;
pub const PORT_ENV: &str = "CLDMAP_PORT";

const TAU_PRIME_HEADER: &str = "x-tau-prime";
const TAU_DOUBLEPRIME_HEADER: &str = "x-tau-doubleprime";
const TAU_HEADER: &str = "x-tau-percent";

/// Error returned to HTTP clients as `{"error": ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown session {id}"))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<CldError> for ApiError {
    fn from(e: CldError) -> Self {
        let status = match e {
            CldError::InvalidParameter(_)
            | CldError::InvalidTau(_)
            | CldError::Decode { .. }
            | CldError::Dimension { .. }
            | CldError::BufferSize { .. } => StatusCode::BAD_REQUEST,
            CldError::DegenerateImage(_)
            | CldError::DegenerateCurve { .. }
            | CldError::NoSupport
            | CldError::UniformShape
            | CldError::EmptyTable
            | CldError::EmptyPartition
            | CldError::UnreachableCoverage { .. }
            | CldError::UnreachableDefect { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            CldError::Io(_) | CldError::Encode(_) | CldError::Json(_) | CldError::Csv(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body {
            error: String,
        }
        (self.status, Json(Body { error: self.message })).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Clone)]
struct Tables {
    h_prime: SuccessTable,
    h_doubleprime: DefectTable,
}

#[derive(Default)]
struct SessionCache {
    auto: Option<AutoTau>,
    analyses: HashMap<u64, Arc<TauAnalysis>>,
    tables: HashMap<(u64, usize), Arc<Tables>>,
}

/// One uploaded image with its cached results. Computations on a session
/// serialize on its cache.
pub struct Session {
    pub image: GrayImage,
    pub stats: ImageStats,
    cache: Mutex<SessionCache>,
}

impl Session {
    pub fn new(image: GrayImage) -> cldmap::Result<Self> {
        let stats = cldmap::stats(&image)?;
        Ok(Self {
            image,
            stats,
            cache: Mutex::new(SessionCache::default()),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, SessionCache> {
        self.cache.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn auto(&self, cache: &mut SessionCache) -> cldmap::Result<AutoTau> {
        if let Some(a) = &cache.auto {
            return Ok(a.clone());
        }
        let a = artifacts::auto_tau(&self.image, &self.stats, DEFAULT_GRID)?;
        cache.auto = Some(a.clone());
        Ok(a)
    }

    /// Optimization result, computed once per session.
    pub fn optimize(&self) -> cldmap::Result<AutoTau> {
        self.auto(&mut self.lock())
    }

    /// Threshold from a percentage, or the tuned value when absent.
    fn tau(&self, cache: &mut SessionCache, percent: Option<f64>) -> cldmap::Result<f64> {
        match percent {
            Some(p) => tau_from_percent(p),
            None => Ok(self.auto(cache)?.tau()),
        }
    }

    pub fn analysis(&self, tau_percent: Option<f64>) -> cldmap::Result<Arc<TauAnalysis>> {
        let mut cache = self.lock();
        let tau = self.tau(&mut cache, tau_percent)?;
        self.analysis_at(&mut cache, tau)
    }

    fn analysis_at(&self, cache: &mut SessionCache, tau: f64) -> cldmap::Result<Arc<TauAnalysis>> {
        if let Some(a) = cache.analyses.get(&tau.to_bits()) {
            return Ok(a.clone());
        }
        let a = Arc::new(TauAnalysis::compute(&self.image, &self.stats, tau)?);
        cache.analyses.insert(tau.to_bits(), a.clone());
        Ok(a)
    }

    fn tables(&self, tau_percent: Option<f64>, k: usize) -> cldmap::Result<Arc<Tables>> {
        let mut cache = self.lock();
        let tau = self.tau(&mut cache, tau_percent)?;
        let key = (tau.to_bits(), k);
        if let Some(t) = cache.tables.get(&key) {
            return Ok(t.clone());
        }
        let a = self.analysis_at(&mut cache, tau)?;
        let t = Arc::new(Tables {
            h_prime: a.success_table(k)?,
            h_doubleprime: a.defect_table(k)?,
        });
        cache.tables.insert(key, t.clone());
        Ok(t)
    }
}

/// Shared state: sessions keyed by a digest of the decoded image, so the
/// same upload always maps to the same id.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<LruCache<String, Arc<Session>>>>,
}

impl AppState {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("non-zero capacity");
        Self {
            sessions: Arc::new(Mutex::new(LruCache::new(cap))),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, LruCache<String, Arc<Session>>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.lock().get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    /// Registers an image and returns its session id.
    pub fn insert(&self, image: GrayImage) -> cldmap::Result<(String, Arc<Session>)> {
        let id = session_id(&image);
        if let Some(s) = self.lock().get(&id) {
            return Ok((id, s.clone()));
        }
        let session = Arc::new(Session::new(image)?);
        self.lock().put(id.clone(), session.clone());
        Ok((id, session))
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for AppState {
    fn default() -> Self {
        Self::new(DEFAULT_SESSIONS)
    }
}

pub fn session_id(image: &GrayImage) -> String {
    let mut h = Sha256::new();
    h.update((image.width() as u64).to_le_bytes());
    h.update((image.height() as u64).to_le_bytes());
    h.update(image.pixels());
    let digest = h.finalize();
    let mut id = String::with_capacity(32);
    for b in &digest[..16] {
        write!(id, "{b:02x}").expect("write to string");
    }
    id
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/images", post(upload))
        .route("/sessions/{id}/optimize", post(optimize))
        .route("/sessions/{id}/smap", get(smap))
        .route("/sessions/{id}/dmap", get(dmap))
        .route("/sessions/{id}/ddmap", get(ddmap))
        .route("/sessions/{id}/tables", get(tables))
        .route("/sessions/{id}/cld", get(cld))
        .with_state(state)
}

pub async fn serve(port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default())).await
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn image_response(bytes: Vec<u8>, format: MapFormat, headers: &[(&'static str, String)]) -> Response {
    let content_type = match format {
        MapFormat::Png => "image/png",
        MapFormat::Bmp => "image/bmp",
    };
    let mut resp = ([(header::CONTENT_TYPE, content_type)], bytes).into_response();
    for (name, value) in headers {
        if let Ok(v) = HeaderValue::from_str(value) {
            resp.headers_mut().insert(HeaderName::from_static(name), v);
        }
    }
    resp
}

fn json_response<T: Serialize>(value: &T) -> ApiResult<Response> {
    let bytes = artifacts::json_bytes(value)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

fn format_of(q: &Option<String>) -> ApiResult<MapFormat> {
    Ok(match q {
        Some(f) => artifacts::parse_format(f)?,
        None => MapFormat::Png,
    })
}

#[derive(Serialize)]
struct UploadResponse {
    session_id: String,
    width: usize,
    height: usize,
    stats: ImageStats,
    tau_max_percent: f64,
}

async fn upload(State(state): State<AppState>, mut multipart: Multipart) -> ApiResult<Response> {
    let mut data = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(e.to_string()))?
    {
        let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.to_string()))?;
        if data.is_none() {
            data = Some(bytes);
        }
    }
    let data = data.ok_or_else(|| ApiError::bad_request("multipart body holds no file"))?;
    blocking(move || {
        let image = GrayImage::from_bytes(&data)?;
        let (session_id, session) = state.insert(image)?;
        json_response(&UploadResponse {
            session_id,
            width: session.image.width(),
            height: session.image.height(),
            stats: session.stats,
            tau_max_percent: artifacts::percent(session.stats.tau_max),
        })
    })
    .await
}

#[derive(Serialize)]
struct CurvePoint {
    tau_percent: f64,
    omega: f64,
    #[serde(rename = "Omega")]
    support: f64,
    #[serde(rename = "Pi")]
    quality: f64,
}

#[derive(Serialize)]
struct OptimizeResponse {
    tau0_percent: f64,
    pi_at_tau0: f64,
    omega_min: f64,
    #[serde(rename = "Omega_min")]
    support_min: f64,
    curve: Vec<CurvePoint>,
}

fn curve_points(curve: &QualityCurve) -> Vec<CurvePoint> {
    curve
        .points
        .iter()
        .map(|p| CurvePoint {
            tau_percent: artifacts::percent(p.tau),
            omega: p.omega,
            support: p.support,
            quality: p.quality,
        })
        .collect()
}

async fn optimize(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    blocking(move || match session.optimize()? {
        AutoTau::Optimized(r) => json_response(&OptimizeResponse {
            tau0_percent: artifacts::percent(r.tau0),
            pi_at_tau0: r.pi_at_tau0,
            omega_min: r.curve.omega_min,
            support_min: r.curve.support_min,
            curve: curve_points(&r.curve),
        }),
        AutoTau::Fallback(fallback_tau) => Err(CldError::DegenerateCurve { fallback_tau }.into()),
    })
    .await
}

#[derive(Debug, Deserialize)]
struct MapQuery {
    tau: Option<f64>,
    coverage: Option<f64>,
    tau_prime: Option<f64>,
    defect_pct: Option<f64>,
    tau_doubleprime: Option<f64>,
    k: Option<usize>,
    format: Option<String>,
}

fn selection(percent: Option<f64>, value: Option<f64>, names: (&str, &str)) -> ApiResult<Selection> {
    match (percent, value) {
        (Some(p), None) => Ok(Selection::Percent(p)),
        (None, Some(v)) => Ok(Selection::Value(v)),
        _ => Err(ApiError::bad_request(format!(
            "exactly one of {} or {} is required",
            names.0, names.1
        ))),
    }
}

async fn smap(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<MapQuery>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let format = format_of(&q.format)?;
    blocking(move || {
        let a = session.analysis(q.tau)?;
        let bytes = artifacts::smap_image(&a, format)?;
        Ok(image_response(bytes, format, &[(TAU_HEADER, artifacts::percent(a.tau()).to_string())]))
    })
    .await
}

async fn dmap(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<MapQuery>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let format = format_of(&q.format)?;
    let sel = selection(q.coverage, q.tau_prime, ("coverage", "tau_prime"))?;
    let k = q.k.unwrap_or(DEFAULT_K);
    blocking(move || {
        let a = session.analysis(q.tau)?;
        let out = artifacts::dmap(&a, sel, k, format)?;
        Ok(image_response(
            out.image,
            format,
            &[
                (TAU_HEADER, artifacts::percent(a.tau()).to_string()),
                (TAU_PRIME_HEADER, out.tau_prime.to_string()),
                ("x-successful-fraction", out.map.successful_fraction().to_string()),
            ],
        ))
    })
    .await
}

async fn ddmap(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<MapQuery>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let format = format_of(&q.format)?;
    let sel = selection(q.defect_pct, q.tau_doubleprime, ("defect_pct", "tau_doubleprime"))?;
    let k = q.k.unwrap_or(DEFAULT_K);
    blocking(move || {
        let a = session.analysis(q.tau)?;
        let out = artifacts::ddmap(&a, sel, k, format)?;
        Ok(image_response(
            out.image,
            format,
            &[
                (TAU_HEADER, artifacts::percent(a.tau()).to_string()),
                (TAU_DOUBLEPRIME_HEADER, out.tau_doubleprime.to_string()),
                ("x-defect-fraction", out.defect_fraction.to_string()),
            ],
        ))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct TablesQuery {
    tau: Option<f64>,
    k: Option<usize>,
}

#[derive(Serialize)]
struct TablesResponse<'a> {
    tau_percent: f64,
    h_prime: &'a SuccessTable,
    h_doubleprime: &'a DefectTable,
}

async fn tables(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<TablesQuery>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let k = q.k.unwrap_or(DEFAULT_K);
    blocking(move || {
        let t = session.tables(q.tau, k)?;
        let tau = session.analysis(q.tau)?.tau();
        json_response(&TablesResponse {
            tau_percent: artifacts::percent(tau),
            h_prime: &t.h_prime,
            h_doubleprime: &t.h_doubleprime,
        })
    })
    .await
}

#[derive(Debug, Deserialize)]
struct TauQuery {
    tau: Option<f64>,
}

async fn cld(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<TauQuery>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    blocking(move || {
        let a = session.analysis(q.tau)?;
        Ok(([(header::CONTENT_TYPE, "application/json")], artifacts::cld_json(&a)?).into_response())
    })
    .await
}
