//! Request and response bodies of the annotation HTTP API.

use serde::{Deserialize, Serialize};

use crate::annotation::BoxRecord;
use crate::geometry::{box_from_clicks, ClickSequence, Point2};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: String,
    pub width: u32,
    pub height: u32,
}

/// Answer to a derive-box request. Exactly one of `box` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeriveBoxResponse {
    pub valid: bool,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bx: Option<BoxRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_center: Option<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl DeriveBoxResponse {
    pub fn derive(clicks: &ClickSequence) -> Self {
        match box_from_clicks(clicks) {
            Ok(b) => Self {
                valid: true,
                bx: Some(BoxRecord::from(&b)),
                object_center: Some(b.object_center),
                error: None,
            },
            Err(e) => Self {
                valid: false,
                bx: None,
                object_center: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
