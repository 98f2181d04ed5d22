//! Two-stage reasoning segmentation pipeline.
//!
//! Stage one renders region-aware visual prompts (strip-annotated copies of
//! the image), asks a multimodal LLM for a structured region proposal, and
//! parses it. Stage two crops the proposed region, delegates mask generation
//! to a pluggable segmentation backend, pastes the mask back into full-image
//! space, and scores it against ground truth with gIoU/cIoU/mAP.
//!
//! Module map:
//! - [`geometry`]: normalization, strip boundaries, region-ID → pixel
//!   bounds, cropping, pasting.
//! - [`prompt`]: visual prompt rendering and chain-of-thought prompt text.
//! - [`mllm`]: stage-one backends (HTTP vision chat, scripted), proposal
//!   parsing, transcripts.
//! - [`seg`]: stage-two backends (remote mask service, ground-truth oracle,
//!   trivial baseline).
//! - [`metrics`]: IoU primitives, gIoU/cIoU, COCO-style mAP.
//! - [`mask`]: dense masks, the RLE codec, polygon rasterization.
//! - [`corpus`]: manifest schema, loaders, importers, synthetic corpora.
//! - [`pipeline`]: per-sample orchestration, batch evaluation, ablations,
//!   reports.

pub mod corpus;
pub mod error;
pub mod geometry;
pub mod mask;
pub mod metrics;
pub mod mllm;
pub mod pipeline;
pub mod prompt;
pub mod seg;

pub use error::{Error, Result};
