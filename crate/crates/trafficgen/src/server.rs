use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use bytes::Bytes;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio::time::Instant;
use vidmeter_core::framelog_io::write_framelog_csv;

use crate::{payload_seed, shape_schedule, Catalog, ServiceError};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::InvalidEntry(..) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, self.to_string()).into_response()
    }
}

type Shared = Arc<Catalog>;

pub fn router(catalog: Arc<Catalog>) -> Router {
    Router::new()
        .route("/videos", get(videos))
        .route("/stream/{id}", get(stream))
        .route("/framelog/{id}", get(framelog))
        .with_state(catalog)
}

async fn videos(State(cat): State<Shared>) -> impl IntoResponse {
    Json(cat.listing())
}

async fn framelog(State(cat): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let entry = cat.get(&id)?;
    let csv = write_framelog_csv(&entry.framelog);
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

async fn stream(
    State(cat): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ServiceError> {
    let entry = cat.get(&id)?;
    let target = match q.get("mean_kbps") {
        None => entry.stored_mean_kbps(),
        Some(raw) => raw
            .trim()
            .parse::<f64>()
            .map_err(|_| ServiceError::BadRequest(format!("mean_kbps {raw:?} is not a number")))?,
    };
    let schedule = shape_schedule(entry, target)?;
    let total = schedule.total_bytes();
    let checksum = schedule.checksum();
    // Each response runs its own clock from here.
    let start = Instant::now();
    let rng = ChaCha8Rng::seed_from_u64(payload_seed(&id));
    let chunks = schedule.chunks.into_iter().filter(|c| c.bytes > 0);
    let body = futures::stream::unfold((chunks, rng), move |(mut chunks, mut rng)| async move {
        let c = chunks.next()?;
        tokio::time::sleep_until(start + Duration::from_secs_f64(c.send_at)).await;
        let mut buf = vec![0u8; c.bytes as usize];
        rng.fill_bytes(&mut buf);
        Some((Ok::<_, std::io::Error>(Bytes::from(buf)), (chunks, rng)))
    });
    let mut resp = Body::from_stream(body).into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"));
    h.insert("x-total-bytes", HeaderValue::from(total));
    h.insert("x-schedule-checksum", HeaderValue::from_str(&checksum).expect("hex is a valid header"));
    h.insert("x-mean-kbps", HeaderValue::from_str(&format!("{target}")).expect("number is a valid header"));
    Ok(resp)
}

/// Serves `catalog` on `addr` until the process ends.
pub async fn serve(catalog: Catalog, addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("serving {} videos on {}", catalog.len(), listener.local_addr()?);
    axum::serve(listener, router(Arc::new(catalog))).await
}

/// Binds `addr` (port 0 picks a free port) and serves in a background task.
pub async fn spawn(catalog: Catalog, addr: SocketAddr) -> std::io::Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(Arc::new(catalog));
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("server stopped: {e}");
        }
    });
    Ok((local, handle))
}
