//! Orchestration: stage one (prompt → MLLM → proposal) through geometry,
//! stage two (crop → mask backend), scoring, batch runs, and ablation grids.
//!
//! Samples are independent; a worker pool of `parallelism` tasks consumes
//! them while per-backend semaphores enforce each backend's declared
//! parallelism limit. Results are reassembled in manifest order, so reports
//! are identical regardless of worker count.

mod ablation;
mod report;

pub use ablation::{run_ablation, AblationOutcome, AblationRow, AblationTable};
pub use report::{
    deterministic_view, render_markdown, Aggregates, EvalReport, RunStatus, RunTiming, SampleRecord,
    SampleTiming,
};

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use futures::stream::{self, StreamExt};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::geometry::{crop, normalize_image, paste_mask, region_pixel_bounds, CropRect, GridSpec};
use crate::mask::BinaryMask;
use crate::metrics::{
    ciou, giou, map_eval, default_iou_thresholds, ImageInstances, InstanceGroundTruth,
    InstancePrediction, IoURecord, ScoringOptions,
};
use crate::mllm::{
    bundle_digest, parse_proposal, query_backend, HttpChatBackend, MllmBackend, MllmTranscript,
    ParseOutcome, RequestContext, RetryPolicy, ScriptedBackend,
};
use crate::prompt::{
    build_cot_prompt, encode_png, render_grid_prompt, render_split_prompts, PromptBundle,
    PromptImage, PromptVariant,
};
use crate::seg::{HttpMaskBackend, OracleBackend, SegBackend, SegmentationRequest, TrivialBackend};

/// Which visual prompt images accompany the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualStyle {
    /// Raw image plus row-annotated and column-annotated copies.
    Split,
    /// Raw image plus one grid-annotated copy.
    Grid,
    /// Raw image only.
    None,
}

/// Stage-one backend selection, JSON-configurable. Secrets stay in the
/// environment: descriptors carry variable names, never key material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MllmDescriptor {
    Scripted {
        dir: PathBuf,
        #[serde(default = "default_scripted_parallelism")]
        max_parallelism: usize,
    },
    Http {
        endpoint: String,
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
        #[serde(default = "default_http_parallelism")]
        max_parallelism: usize,
        #[serde(default = "default_max_tokens")]
        max_tokens: u32,
        #[serde(default = "default_timeout_seconds")]
        timeout_seconds: u64,
    },
}

/// Stage-two backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegDescriptor {
    /// All-ones baseline.
    Trivial,
    /// Ground-truth oracle (verification runs only; needs corpus GT).
    Oracle,
    Http {
        endpoint: String,
        #[serde(default = "default_http_parallelism")]
        max_parallelism: usize,
        #[serde(default = "default_timeout_seconds")]
        timeout_seconds: u64,
    },
}

fn default_scripted_parallelism() -> usize {
    64
}
fn default_http_parallelism() -> usize {
    4
}
fn default_max_tokens() -> u32 {
    2048
}
fn default_timeout_seconds() -> u64 {
    120
}
fn default_parallelism() -> usize {
    4
}
fn default_failure_budget() -> f64 {
    0.05
}
fn default_ablation_cap() -> usize {
    64
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("rsvp-out")
}
fn default_true() -> bool {
    true
}

/// Full configuration of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_variant")]
    pub prompt_variant: PromptVariant,
    #[serde(default = "default_style")]
    pub visual_style: VisualStyle,
    #[serde(default)]
    pub temperature: f64,
    pub mllm: MllmDescriptor,
    pub seg: SegDescriptor,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub fail_fast: bool,
    /// Fraction of infrastructure-errored samples tolerated before the run
    /// is marked failed.
    #[serde(default = "default_failure_budget")]
    pub failure_budget: f64,
    #[serde(default)]
    pub emit_overlays: bool,
    /// Compute instance mAP (requires category metadata on every sample).
    #[serde(default)]
    pub compute_map: bool,
    /// Both-empty IoU convention; see metrics.
    #[serde(default = "default_true")]
    pub both_empty_scores_one: bool,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_ablation_cap")]
    pub ablation_cap: usize,
}

fn default_variant() -> PromptVariant {
    PromptVariant::A
}
fn default_style() -> VisualStyle {
    VisualStyle::Split
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::InvalidInput(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidInput("parallelism must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return Err(Error::InvalidInput("failure budget outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn scoring(&self) -> ScoringOptions {
        ScoringOptions {
            both_empty_scores_one: self.both_empty_scores_one,
        }
    }
}

impl MllmDescriptor {
    pub fn build(&self) -> Result<Arc<dyn MllmBackend>> {
        match self {
            MllmDescriptor::Scripted { dir, max_parallelism } => Ok(Arc::new(
                ScriptedBackend::new(dir.clone()).with_max_parallelism(*max_parallelism),
            )),
            MllmDescriptor::Http {
                endpoint,
                model,
                api_key_env,
                max_parallelism,
                max_tokens,
                timeout_seconds,
            } => {
                let mut b = HttpChatBackend::new(endpoint.clone(), model.clone())
                    .with_max_parallelism(*max_parallelism)
                    .with_max_tokens(*max_tokens)
                    .with_timeout(std::time::Duration::from_secs(*timeout_seconds));
                if let Some(var) = api_key_env {
                    b = b.with_api_key_env(var.clone());
                }
                Ok(Arc::new(b))
            }
        }
    }
}

impl SegDescriptor {
    /// The oracle backend answers from the corpus ground truth resampled to
    /// normalized space, keyed by sample ID.
    pub fn build(&self, samples: &[Sample], grid: &GridSpec) -> Result<Arc<dyn SegBackend>> {
        match self {
            SegDescriptor::Trivial => Ok(Arc::new(TrivialBackend)),
            SegDescriptor::Oracle => {
                let mut masks = HashMap::new();
                for s in samples {
                    masks.insert(
                        s.id.clone(),
                        s.gt_union().resize_nearest(grid.norm_width, grid.norm_height),
                    );
                }
                Ok(Arc::new(OracleBackend::new(masks)))
            }
            SegDescriptor::Http {
                endpoint,
                max_parallelism,
                timeout_seconds,
            } => Ok(Arc::new(
                HttpMaskBackend::new(endpoint.clone())
                    .with_max_parallelism(*max_parallelism)
                    .with_timeout(std::time::Duration::from_secs(*timeout_seconds)),
            )),
        }
    }
}

/// Everything a worker needs to process one sample.
pub struct RunContext {
    pub cfg: RunConfig,
    pub mllm: Arc<dyn MllmBackend>,
    pub seg: Arc<dyn SegBackend>,
    mllm_limit: Arc<Semaphore>,
    seg_limit: Arc<Semaphore>,
}

impl RunContext {
    pub fn new(cfg: RunConfig, samples: &[Sample]) -> Result<Self> {
        cfg.validate()?;
        let mllm = cfg.mllm.build()?;
        let seg = cfg.seg.build(samples, &cfg.grid)?;
        let mllm_limit = Arc::new(Semaphore::new(mllm.max_parallelism().max(1)));
        let seg_limit = Arc::new(Semaphore::new(seg.max_parallelism().max(1)));
        Ok(RunContext {
            cfg,
            mllm,
            seg,
            mllm_limit,
            seg_limit,
        })
    }
}

/// Full per-sample outcome.
#[derive(Debug, Clone)]
pub struct SampleRunResult {
    pub record: IoURecord,
    pub transcript: SampleTranscript,
    pub timing: SampleTiming,
    pub predicted: BinaryMask,
    /// Infrastructure failure (backend, image I/O); counts against the
    /// failure budget. Parse failures do not: they are model behavior and
    /// score as empty predictions.
    pub errored: bool,
    pub parse_failed: bool,
}

/// Everything recorded about one sample's trip through the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleTranscript {
    pub sample_id: String,
    pub mllm: Option<MllmTranscript>,
    pub seg_backend_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_rect: Option<CropRect>,
    pub absent_predicted: bool,
}

/// Run one sample end to end: normalize → render → prompt → query → parse
/// → bounds → crop → segment → paste → resize → score. Backend and parse
/// failures yield an empty prediction rather than aborting, unless
/// `fail_fast` is set.
pub async fn run_sample(ctx: &RunContext, sample: &Sample) -> Result<SampleRunResult> {
    let total_start = Instant::now();
    let cfg = &ctx.cfg;
    let grid = &cfg.grid;
    let scoring = cfg.scoring();
    let gt = sample.gt_union();

    let mut transcript = SampleTranscript {
        sample_id: sample.id.clone(),
        mllm: None,
        seg_backend_id: ctx.seg.id(),
        error: None,
        warnings: Vec::new(),
        crop_rect: None,
        absent_predicted: false,
    };
    let mut first_stage = 0.0f64;
    let mut second_stage = 0.0f64;
    let mut parse_failed = false;

    let outcome: Result<BinaryMask> = async {
        let native = sample.load_image()?;
        let normalized = normalize_image(&native, grid)?;
        let bundle = assemble_bundle(&normalized, grid, cfg, &sample.query)?;

        let req_ctx = RequestContext {
            temperature: cfg.temperature,
            sample_tag: Some(sample.id.clone()),
        };
        let stage1_start = Instant::now();
        let query = {
            let _permit = ctx.mllm_limit.acquire().await.expect("semaphore open");
            query_backend(ctx.mllm.as_ref(), &bundle, &req_ctx, &cfg.retry).await?
        };
        first_stage = stage1_start.elapsed().as_secs_f64();

        let parsed = parse_proposal(&query.raw_response, grid);
        let (proposal, warnings, parse_outcome) = match parsed {
            Ok(p) => {
                let outcome = ParseOutcome::Proposal {
                    proposal: p.proposal.clone(),
                };
                (Some(p.proposal), p.warnings, outcome)
            }
            Err(e) => {
                parse_failed = true;
                (None, Vec::new(), ParseOutcome::Failure { error: e.to_string() })
            }
        };
        transcript.warnings.extend(warnings.iter().cloned());
        transcript.mllm = Some(MllmTranscript {
            request_digest: bundle_digest(&bundle),
            raw_response: query.raw_response.clone(),
            parsed: parse_outcome,
            warnings,
            latency_seconds: query.latency.as_secs_f64(),
            backend_id: ctx.mllm.id(),
            temperature: cfg.temperature,
        });

        let Some(proposal) = proposal else {
            // Parse failure scores as an empty prediction.
            return Ok(BinaryMask::zeros(sample.width, sample.height));
        };

        let Some(rect) = region_pixel_bounds(grid, &proposal.ids_v, &proposal.ids_h) else {
            transcript.absent_predicted = true;
            return Ok(BinaryMask::zeros(sample.width, sample.height));
        };
        transcript.crop_rect = Some(rect);

        let crop_image = crop(&normalized, &rect)?;
        let seg_req = SegmentationRequest {
            crop_image,
            target_text: nonempty_target(&proposal.target_text()),
            crop_rect: rect,
            sample_tag: Some(sample.id.clone()),
        };
        let stage2_start = Instant::now();
        let crop_mask = {
            let _permit = ctx.seg_limit.acquire().await.expect("semaphore open");
            crate::mllm::with_retry(&cfg.retry, || ctx.seg.segment(&seg_req)).await?
        };
        second_stage = stage2_start.elapsed().as_secs_f64();
        if crop_mask.dims() != (rect.width(), rect.height()) {
            return Err(Error::Protocol(format!(
                "segmentation backend returned {:?} for a {}x{} crop",
                crop_mask.dims(),
                rect.width(),
                rect.height()
            )));
        }

        let full_norm = paste_mask(&crop_mask, &rect, (grid.norm_width, grid.norm_height))?;
        Ok(full_norm.resize_nearest(sample.width, sample.height))
    }
    .await;

    let (predicted, errored) = match outcome {
        Ok(mask) => (mask, false),
        Err(e) if cfg.fail_fast => return Err(e),
        Err(e) => {
            transcript.error = Some(e.to_string());
            (BinaryMask::zeros(sample.width, sample.height), true)
        }
    };

    let (intersection, union) = predicted.overlap_counts(&gt)?;
    let record = IoURecord::new(sample.id.clone(), intersection, union, &scoring);
    let timing = SampleTiming {
        sample_id: sample.id.clone(),
        first_stage_seconds: first_stage,
        second_stage_seconds: second_stage,
        total_seconds: total_start.elapsed().as_secs_f64(),
    };
    Ok(SampleRunResult {
        record,
        transcript,
        timing,
        predicted,
        errored,
        parse_failed,
    })
}

fn nonempty_target(target: &str) -> String {
    if target.trim().is_empty() {
        "the proposed region".to_string()
    } else {
        target.to_string()
    }
}

fn assemble_bundle(
    normalized: &RgbImage,
    grid: &GridSpec,
    cfg: &RunConfig,
    query: &str,
) -> Result<PromptBundle> {
    let text = build_cot_prompt(query, cfg.prompt_variant, grid)?;
    let mut images = vec![PromptImage {
        name: "image".into(),
        png: encode_png(normalized)?,
    }];
    match cfg.visual_style {
        VisualStyle::Split => {
            let pair = render_split_prompts(normalized, grid)?;
            images.push(PromptImage {
                name: "rows".into(),
                png: encode_png(&pair.row_annotated)?,
            });
            images.push(PromptImage {
                name: "cols".into(),
                png: encode_png(&pair.col_annotated)?,
            });
        }
        VisualStyle::Grid => {
            let gridded = render_grid_prompt(normalized, grid)?;
            images.push(PromptImage {
                name: "grid".into(),
                png: encode_png(&gridded)?,
            });
        }
        VisualStyle::None => {}
    }
    Ok(PromptBundle {
        system_text: text.system_text,
        user_text: text.user_text,
        images,
    })
}

pub type ProgressFn = Arc<dyn Fn(usize, usize) + Send + Sync>;

/// Evaluate a whole corpus. Per-sample records keep manifest order no matter
/// how execution interleaves; the report is written to the config's output
/// directory along with a transcript log.
pub async fn run_eval(cfg: &RunConfig, samples: &[Sample]) -> Result<EvalReport> {
    run_eval_with_progress(cfg, samples, None).await
}

pub async fn run_eval_with_progress(
    cfg: &RunConfig,
    samples: &[Sample],
    progress: Option<ProgressFn>,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let wall_start = Instant::now();
    let ctx = Arc::new(RunContext::new(cfg.clone(), samples)?);

    let done_counter = Arc::new(std::sync::atomic::AtomicUsize::new(0));
    let total = samples.len();
    let mut indexed: Vec<Option<SampleRunResult>> = Vec::new();
    indexed.resize_with(total, || None);

    let mut results = stream::iter(samples.iter().enumerate().map(|(i, sample)| {
        let ctx = Arc::clone(&ctx);
        let progress = progress.clone();
        let done = Arc::clone(&done_counter);
        async move {
            let out = run_sample(&ctx, sample).await;
            let n = done.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
            if let Some(cb) = &progress {
                cb(n, total);
            }
            (i, out)
        }
    }))
    .buffer_unordered(cfg.parallelism.max(1));

    while let Some((i, out)) = results.next().await {
        indexed[i] = Some(out?);
    }
    drop(results);
    let results: Vec<SampleRunResult> = indexed.into_iter().map(|r| r.expect("all samples ran")).collect();

    let report = report::assemble_report(cfg, samples, &results, wall_start.elapsed().as_secs_f64())?;
    report::write_outputs(cfg, samples, &results, &report)?;
    Ok(report)
}

/// Build mAP inputs from per-sample predictions: a single-mask pipeline
/// yields one instance per sample with score 1.0; ground-truth instances
/// come from the per-sample mask lists, grouped per image.
pub(crate) fn map_from_results(samples: &[Sample], results: &[SampleRunResult]) -> Result<f64> {
    let mut by_image: HashMap<&std::path::Path, ImageInstances> = HashMap::new();
    for (sample, result) in samples.iter().zip(results) {
        let category = sample
            .category
            .clone()
            .ok_or_else(|| Error::InvalidInput(format!("sample {} has no category", sample.id)))?;
        let entry = by_image.entry(sample.image_path.as_path()).or_default();
        if !result.predicted.is_blank() {
            entry.predictions.push(InstancePrediction {
                mask: result.predicted.clone(),
                score: 1.0,
                category: category.clone(),
            });
        }
        for gt in &sample.gt_masks {
            entry.ground_truth.push(InstanceGroundTruth {
                mask: gt.clone(),
                category: category.clone(),
            });
        }
    }
    let images: Vec<ImageInstances> = by_image.into_values().collect();
    map_eval(&images, &default_iou_thresholds())
}

pub(crate) fn aggregates_from_records(records: &[IoURecord]) -> Result<(f64, f64)> {
    Ok((giou(records)?, ciou(records)?))
}
