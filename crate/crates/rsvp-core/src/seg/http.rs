//! Remote mask backend speaking the pipeline's wire protocol:
//!
//! ```text
//! POST <endpoint>
//! {"image": "<base64 PNG, crop resized to 224x224>", "text": "<target>"}
//! →
//! {"width": W, "height": H, "rle": [counts...]}
//! ```
//!
//! RLE counts follow the codec in [`crate::mask`]: column-major, starting
//! with the zero run. The returned mask is resized back to the crop's
//! dimensions with nearest-neighbor so it stays strictly binary.

use async_trait::async_trait;
use base64::Engine;
use image::imageops;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::mask::{rle_decode, BinaryMask, RleMask};
use crate::prompt::encode_png;

use super::{SegBackend, SegmentationRequest};

/// Side length remote crops are resized to before dispatch.
pub const REMOTE_INPUT_SIZE: u32 = 224;

/// JSON body of a mask response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskResponse {
    pub width: u32,
    pub height: u32,
    pub rle: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct HttpMaskBackend {
    endpoint: String,
    max_parallelism: usize,
    client: reqwest::Client,
}

impl HttpMaskBackend {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpMaskBackend {
            endpoint: endpoint.into(),
            max_parallelism: 4,
            client: reqwest::Client::builder()
                .timeout(std::time::Duration::from_secs(60))
                .build()
                .expect("reqwest client"),
        }
    }

    pub fn with_max_parallelism(mut self, n: usize) -> Self {
        self.max_parallelism = n.max(1);
        self
    }

    pub fn with_timeout(mut self, timeout: std::time::Duration) -> Self {
        self.client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .expect("reqwest client");
        self
    }
}

#[async_trait]
impl SegBackend for HttpMaskBackend {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn max_parallelism(&self) -> usize {
        self.max_parallelism
    }

    async fn segment(&self, req: &SegmentationRequest) -> Result<BinaryMask> {
        req.validate()?;
        // Bilinear down to the model's input size; masks come back binary.
        let resized = imageops::resize(
            &req.crop_image,
            REMOTE_INPUT_SIZE,
            REMOTE_INPUT_SIZE,
            imageops::FilterType::Triangle,
        );
        let png = encode_png(&resized)?;
        let body = json!({
            "image": base64::engine::general_purpose::STANDARD.encode(&png),
            "text": req.target_text,
        });
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .await
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.endpoint)))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(Error::BackendUnavailable(format!(
                "{} returned {status}",
                self.endpoint
            )));
        }
        if !status.is_success() {
            return Err(Error::Protocol(format!(
                "{} rejected mask request: {status}",
                self.endpoint
            )));
        }
        let mask_resp: MaskResponse = resp
            .json()
            .await
            .map_err(|e| Error::Protocol(format!("malformed mask response: {e}")))?;
        let rle = RleMask {
            width: mask_resp.width,
            height: mask_resp.height,
            counts: mask_resp.rle,
        };
        let decoded = rle_decode(&rle).map_err(|e| Error::Protocol(e.to_string()))?;
        Ok(decoded.resize_nearest(req.crop_rect.width(), req.crop_rect.height()))
    }
}
