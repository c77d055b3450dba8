//! Async client for the annotation service.

use reqwest::StatusCode;
use thiserror::Error;

use tiltseg_core::annotation::AnnotationFile;
use tiltseg_core::api::{DeriveBoxResponse, ErrorBody, ImageInfo};
use tiltseg_core::geometry::ClickSequence;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server answered {status}: {message}")]
    Status { status: StatusCode, message: String },
    #[error("invalid annotation from server: {0}")]
    Annotation(#[from] tiltseg_core::annotation::AnnotationError),
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn list_images(&self) -> Result<Vec<ImageInfo>, ClientError> {
        let res = check(self.http.get(self.url("/api/images")).send().await?).await?;
        Ok(res.json().await?)
    }

    /// PNG bytes of one image.
    pub async fn image(&self, id: &str) -> Result<Vec<u8>, ClientError> {
        let res = check(self.http.get(self.url(&format!("/api/images/{id}"))).send().await?).await?;
        Ok(res.bytes().await?.to_vec())
    }

    /// Raw stored annotation, `None` when the image has none yet.
    pub async fn annotation_bytes(&self, id: &str) -> Result<Option<Vec<u8>>, ClientError> {
        let res = self.http.get(self.url(&format!("/api/annotations/{id}"))).send().await?;
        if res.status() == StatusCode::NOT_FOUND {
            // an unknown image is an error, a missing annotation is not
            let message = res.json::<ErrorBody>().await.map(|b| b.error).unwrap_or_default();
            if message.starts_with("no annotation") {
                return Ok(None);
            }
            return Err(ClientError::Status {
                status: StatusCode::NOT_FOUND,
                message,
            });
        }
        Ok(Some(check(res).await?.bytes().await?.to_vec()))
    }

    pub async fn annotation(&self, id: &str) -> Result<Option<AnnotationFile>, ClientError> {
        let path = format!("{id}.json");
        match self.annotation_bytes(id).await? {
            Some(b) => Ok(Some(AnnotationFile::from_json_bytes(&b, path.as_ref())?)),
            None => Ok(None),
        }
    }

    pub async fn save_annotation_bytes(&self, id: &str, body: Vec<u8>) -> Result<(), ClientError> {
        let req = self
            .http
            .post(self.url(&format!("/api/annotations/{id}")))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body);
        check(req.send().await?).await?;
        Ok(())
    }

    pub async fn save_annotation(&self, file: &AnnotationFile) -> Result<(), ClientError> {
        self.save_annotation_bytes(&file.image, file.to_json_pretty().into_bytes()).await
    }

    pub async fn derive_box(&self, clicks: &ClickSequence) -> Result<DeriveBoxResponse, ClientError> {
        let res = check(self.http.post(self.url("/api/derive-box")).json(clicks).send().await?).await?;
        Ok(res.json().await?)
    }
}

async fn check(res: reqwest::Response) -> Result<reqwest::Response, ClientError> {
    let status = res.status();
    if status.is_success() {
        return Ok(res);
    }
    let text = res.text().await.unwrap_or_default();
    let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
    Err(ClientError::Status { status, message })
}
