//! Stage-two mask generators behind one interface: a remote
//! vision-language segmentation service, a ground-truth oracle for pipeline
//! verification, and a trivial full-crop baseline.

mod http;

pub use http::HttpMaskBackend;

use std::collections::HashMap;

use async_trait::async_trait;
use image::RgbImage;

use crate::error::{Error, Result};
use crate::geometry::{restrict_mask, CropRect};
use crate::mask::BinaryMask;

/// One segmentation call: a cropped image plus the target description.
#[derive(Debug, Clone)]
pub struct SegmentationRequest {
    pub crop_image: RgbImage,
    /// Object name and attributes distilled by stage one.
    pub target_text: String,
    /// Where the crop sits in normalized coordinates.
    pub crop_rect: CropRect,
    /// Sample ID for backends that need corpus bookkeeping (the oracle).
    pub sample_tag: Option<String>,
}

impl SegmentationRequest {
    pub fn validate(&self) -> Result<()> {
        if self.target_text.trim().is_empty() {
            return Err(Error::InvalidInput("empty target text".into()));
        }
        if self.crop_image.width() == 0 || self.crop_image.height() == 0 {
            return Err(Error::InvalidInput("empty crop image".into()));
        }
        if self.crop_image.dimensions() != (self.crop_rect.width(), self.crop_rect.height()) {
            return Err(Error::InvalidInput(format!(
                "crop image {:?} does not match rect {}x{}",
                self.crop_image.dimensions(),
                self.crop_rect.width(),
                self.crop_rect.height()
            )));
        }
        Ok(())
    }
}

/// A stage-two mask generator. Returned masks are in crop coordinates with
/// dimensions equal to the request's crop.
#[async_trait]
pub trait SegBackend: Send + Sync {
    fn id(&self) -> String;

    fn max_parallelism(&self) -> usize {
        1
    }

    async fn segment(&self, req: &SegmentationRequest) -> Result<BinaryMask>;
}

/// Baseline that marks the whole crop as foreground.
pub struct TrivialBackend;

#[async_trait]
impl SegBackend for TrivialBackend {
    fn id(&self) -> String {
        "trivial".into()
    }

    fn max_parallelism(&self) -> usize {
        64
    }

    async fn segment(&self, req: &SegmentationRequest) -> Result<BinaryMask> {
        req.validate()?;
        Ok(BinaryMask::ones(req.crop_rect.width(), req.crop_rect.height()))
    }
}

/// Pointwise restriction of a full-image ground-truth mask to the crop rect.
pub fn oracle_segment(gt_mask: &BinaryMask, rect: &CropRect) -> Result<BinaryMask> {
    restrict_mask(gt_mask, rect)
}

/// Verification backend that answers from ground truth held in normalized
/// image space, keyed by sample ID.
pub struct OracleBackend {
    masks: HashMap<String, BinaryMask>,
    max_parallelism: usize,
}

impl OracleBackend {
    pub fn new(masks: HashMap<String, BinaryMask>) -> Self {
        OracleBackend {
            masks,
            max_parallelism: 64,
        }
    }
}

#[async_trait]
impl SegBackend for OracleBackend {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn max_parallelism(&self) -> usize {
        self.max_parallelism
    }

    async fn segment(&self, req: &SegmentationRequest) -> Result<BinaryMask> {
        req.validate()?;
        let tag = req
            .sample_tag
            .as_deref()
            .ok_or_else(|| Error::Config("oracle backend needs a sample tag".into()))?;
        let gt = self
            .masks
            .get(tag)
            .ok_or_else(|| Error::Config(format!("oracle has no ground truth for {tag}")))?;
        oracle_segment(gt, &req.crop_rect)
    }
}
