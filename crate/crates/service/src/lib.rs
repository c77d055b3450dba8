//! HTTP API over an image directory and an annotation directory.
//!
//! Images are read-only. Annotation files are validated with the core
//! parser before being written, atomically and one writer per file.

use std::collections::HashMap;
use std::io::{Cursor, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use thiserror::Error;
use tokio::net::TcpListener;

use tiltseg_core::annotation::AnnotationFile;
use tiltseg_core::api::{DeriveBoxResponse, ErrorBody, ImageInfo};
use tiltseg_core::geometry::ClickSequence;
use tiltseg_core::io::{image_id, list_images};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug)]
struct Inner {
    images: PathBuf,
    annotations: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

#[derive(Debug, Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(images: impl Into<PathBuf>, annotations: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let (images, annotations) = (images.into(), annotations.into());
        for dir in [&images, &annotations] {
            if !dir.is_dir() {
                return Err(ServiceError::NotADirectory(dir.clone()));
            }
        }
        Ok(Self(Arc::new(Inner {
            images,
            annotations,
            locks: Mutex::default(),
        })))
    }

    fn annotation_path(&self, id: &str) -> PathBuf {
        self.0.annotations.join(format!("{id}.json"))
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.0.locks.lock().expect("lock table").entry(id.to_string()).or_default().clone()
    }
}

enum ApiError {
    NotFound(String),
    BadRequest(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            Self::NotFound(m) => (StatusCode::NOT_FOUND, m),
            Self::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            Self::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::Internal(e.to_string())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(internal)?
}

fn find_image(dir: &Path, id: &str) -> Result<PathBuf, ApiError> {
    list_images(dir)
        .map_err(internal)?
        .into_iter()
        .find(|p| image_id(p) == id)
        .ok_or_else(|| ApiError::NotFound(format!("no image `{id}`")))
}

fn image_dims(path: &Path) -> Result<(u32, u32), ApiError> {
    image::image_dimensions(path).map_err(|e| internal(format!("{}: {e}", path.display())))
}

async fn list(State(state): State<AppState>) -> Result<Json<Vec<ImageInfo>>, ApiError> {
    let dir = state.0.images.clone();
    let infos = blocking(move || {
        list_images(&dir)
            .map_err(internal)?
            .iter()
            .map(|p| {
                let (width, height) = image_dims(p)?;
                Ok(ImageInfo {
                    id: image_id(p),
                    width,
                    height,
                })
            })
            .collect()
    })
    .await?;
    Ok(Json(infos))
}

async fn image_bytes(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let dir = state.0.images.clone();
    let png = blocking(move || {
        let path = find_image(&dir, &id)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            return std::fs::read(&path).map_err(internal);
        }
        let img = image::open(&path).map_err(internal)?;
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).map_err(internal)?;
        Ok(out.into_inner())
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn get_annotation(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let dir = state.0.images.clone();
    let path = state.annotation_path(&id);
    let lock = state.lock_for(&id);
    let _guard = lock.lock().await;
    let bytes = blocking(move || {
        find_image(&dir, &id)?;
        match std::fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError::NotFound(format!("no annotation for `{id}`"))),
            Err(e) => Err(internal(e)),
        }
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

/// Validates the body and stores it verbatim.
async fn put_annotation(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<StatusCode, ApiError> {
    let dir = state.0.images.clone();
    let target = state.annotation_path(&id);
    let lock = state.lock_for(&id);
    let _guard = lock.lock().await;
    blocking(move || {
        let image = find_image(&dir, &id)?;
        let file = AnnotationFile::from_json_bytes(&body, Path::new(&format!("{id}.json")))
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        if file.image != id {
            return Err(ApiError::BadRequest(format!("annotation names image `{}`, not `{id}`", file.image)));
        }
        let dims = image_dims(&image)?;
        if (file.width, file.height) != dims {
            return Err(ApiError::BadRequest(format!(
                "annotation is {}×{} but the image is {}×{}",
                file.width, file.height, dims.0, dims.1
            )));
        }
        let parent = target.parent().expect("annotation dir");
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(internal)?;
        tmp.write_all(&body).map_err(internal)?;
        tmp.as_file().sync_all().map_err(internal)?;
        tmp.persist(&target).map_err(internal)?;
        tracing::info!(image = %id, objects = file.objects.len(), "annotation saved");
        Ok(())
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn derive_box(body: Bytes) -> Result<Json<DeriveBoxResponse>, ApiError> {
    let clicks: ClickSequence = serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(DeriveBoxResponse::derive(&clicks)))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/images", get(list))
        .route("/api/images/{id}", get(image_bytes))
        .route("/api/annotations/{id}", get(get_annotation).post(put_annotation))
        .route("/api/derive-box", post(derive_box))
        .with_state(state)
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })
}

/// Serves until the listener fails or `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}
