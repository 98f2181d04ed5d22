//! Evaluation reports: assembly, serialization, and human-readable
//! rendering.
//!
//! A report is reproducible modulo its `timing` block and `created_at_unix`
//! stamp; `deterministic_view` strips exactly those, and the determinism
//! acceptance check compares the remainder byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Sample;
use crate::error::Result;
use crate::mask::BinaryMask;
use crate::metrics::IoURecord;

use super::{map_from_results, RunConfig, SampleRunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// More samples hit infrastructure errors than the failure budget allows.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub intersection: u64,
    pub union: u64,
    pub iou: f64,
    pub absent_predicted: bool,
    pub parse_failed: bool,
    pub errored: bool,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub giou: f64,
    pub ciou: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<f64>,
    pub samples: usize,
    pub errored: usize,
    pub parse_failures: usize,
    pub absent_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTiming {
    pub sample_id: String,
    pub first_stage_seconds: f64,
    pub second_stage_seconds: f64,
    pub total_seconds: f64,
}

/// Stage-time accounting. Per-sample totals decompose exactly:
/// `total = first + second + overhead`, summed over samples; `wall_seconds`
/// is the parallel wall-clock time of the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub wall_seconds: f64,
    pub first_stage_seconds: f64,
    pub second_stage_seconds: f64,
    pub overhead_seconds: f64,
    pub total_sample_seconds: f64,
    pub per_sample: Vec<SampleTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub status: RunStatus,
    pub config: RunConfig,
    pub records: Vec<SampleRecord>,
    pub aggregates: Aggregates,
    pub notes: Vec<String>,
    pub timing: RunTiming,
    pub created_at_unix: f64,
}

impl EvalReport {
    pub fn read(path: &Path) -> Result<EvalReport> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Recompute gIoU/cIoU from the per-sample records (exactness check).
    pub fn recompute_aggregates(&self) -> Result<(f64, f64)> {
        let records: Vec<IoURecord> = self
            .records
            .iter()
            .map(|r| IoURecord {
                sample_id: r.sample_id.clone(),
                intersection: r.intersection,
                union: r.union,
                iou: r.iou,
            })
            .collect();
        super::aggregates_from_records(&records)
    }
}

/// JSON value of a report with the volatile fields (`timing`,
/// `created_at_unix`) removed.
pub fn deterministic_view(report: &Value) -> Value {
    let mut v = report.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
        obj.remove("created_at_unix");
    }
    v
}

pub(super) fn assemble_report(
    cfg: &RunConfig,
    samples: &[Sample],
    results: &[SampleRunResult],
    wall_seconds: f64,
) -> Result<EvalReport> {
    let records: Vec<SampleRecord> = results
        .iter()
        .map(|r| SampleRecord {
            sample_id: r.record.sample_id.clone(),
            intersection: r.record.intersection,
            union: r.record.union,
            iou: r.record.iou,
            absent_predicted: r.transcript.absent_predicted,
            parse_failed: r.parse_failed,
            errored: r.errored,
            warnings: r.transcript.warnings.clone(),
            transcript_digest: r.transcript.mllm.as_ref().map(|t| t.request_digest.clone()),
        })
        .collect();

    let iou_records: Vec<IoURecord> = results.iter().map(|r| r.record.clone()).collect();
    let (giou, ciou) = super::aggregates_from_records(&iou_records)?;

    let mut notes = Vec::new();
    let map = if cfg.compute_map {
        match map_from_results(samples, results) {
            Ok(m) => Some(m),
            Err(e) => {
                notes.push(format!("mAP skipped: {e}"));
                None
            }
        }
    } else {
        None
    };

    let errored = results.iter().filter(|r| r.errored).count();
    let parse_failures = results.iter().filter(|r| r.parse_failed).count();
    let absent_predictions = results.iter().filter(|r| r.transcript.absent_predicted).count();
    let status = if (errored as f64) / (results.len() as f64) > cfg.failure_budget {
        notes.push(format!(
            "{errored}/{} samples errored, over the {:.1}% budget",
            results.len(),
            cfg.failure_budget * 100.0
        ));
        RunStatus::Failed
    } else {
        RunStatus::Ok
    };

    let per_sample: Vec<SampleTiming> = results.iter().map(|r| r.timing.clone()).collect();
    let first: f64 = per_sample.iter().map(|t| t.first_stage_seconds).sum();
    let second: f64 = per_sample.iter().map(|t| t.second_stage_seconds).sum();
    let total: f64 = per_sample.iter().map(|t| t.total_seconds).sum();
    let timing = RunTiming {
        wall_seconds,
        first_stage_seconds: first,
        second_stage_seconds: second,
        overhead_seconds: total - first - second,
        total_sample_seconds: total,
        per_sample,
    };

    Ok(EvalReport {
        version: 1,
        status,
        config: cfg.clone(),
        records,
        aggregates: Aggregates {
            giou,
            ciou,
            map,
            samples: results.len(),
            errored,
            parse_failures,
            absent_predictions,
        },
        notes,
        timing,
        created_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
    })
}

pub(super) fn write_outputs(
    cfg: &RunConfig,
    samples: &[Sample],
    results: &[SampleRunResult],
    report: &EvalReport,
) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(
        cfg.output_dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    let mut transcripts = String::new();
    for r in results {
        transcripts.push_str(&serde_json::to_string(&r.transcript)?);
        transcripts.push('\n');
    }
    std::fs::write(cfg.output_dir.join("transcripts.jsonl"), transcripts)?;
    std::fs::write(cfg.output_dir.join("report.md"), render_markdown(report))?;

    if cfg.emit_overlays {
        let dir = cfg.output_dir.join("overlays");
        std::fs::create_dir_all(&dir)?;
        for (sample, result) in samples.iter().zip(results) {
            let overlay = overlay_image(sample, &result.predicted)?;
            overlay.save(dir.join(format!("{}.png", sample.id)))?;
        }
    }
    Ok(())
}

/// Prediction vs ground truth, painted over a darkened copy of the image:
/// yellow = agreement, red = prediction only, green = ground truth only.
fn overlay_image(sample: &Sample, predicted: &BinaryMask) -> Result<image::RgbImage> {
    let mut img = sample.load_image()?;
    let gt = sample.gt_union();
    for y in 0..sample.height {
        for x in 0..sample.width {
            let p = predicted.get(x, y);
            let g = gt.get(x, y);
            let base = img.get_pixel(x, y).0;
            let dim = [base[0] / 2, base[1] / 2, base[2] / 2];
            let color = match (p, g) {
                (true, true) => [200, 200, 40],
                (true, false) => [200, 40, 40],
                (false, true) => [40, 180, 40],
                (false, false) => dim,
            };
            img.put_pixel(x, y, image::Rgb(color));
        }
    }
    Ok(img)
}

/// Human-readable summary of a report.
pub fn render_markdown(report: &EvalReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let a = &report.aggregates;
    writeln!(out, "# Evaluation report").unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "- status: {}",
        match report.status {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        }
    )
    .unwrap();
    writeln!(out, "- samples: {}", a.samples).unwrap();
    writeln!(out, "- gIoU: {:.4}", a.giou).unwrap();
    writeln!(out, "- cIoU: {:.4}", a.ciou).unwrap();
    if let Some(map) = a.map {
        writeln!(out, "- mAP: {map:.4}").unwrap();
    }
    writeln!(
        out,
        "- errored: {} | parse failures: {} | absence predictions: {}",
        a.errored, a.parse_failures, a.absent_predictions
    )
    .unwrap();
    writeln!(
        out,
        "- stage seconds: first {:.2}, second {:.2}, overhead {:.2} (wall {:.2})",
        report.timing.first_stage_seconds,
        report.timing.second_stage_seconds,
        report.timing.overhead_seconds,
        report.timing.wall_seconds
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "- grid: {}x{} @ {}x{}, padding {:.2}, variant {:?}, style {:?}, temperature {}",
        report.config.grid.rows,
        report.config.grid.cols,
        report.config.grid.norm_width,
        report.config.grid.norm_height,
        report.config.grid.padding_ratio,
        report.config.prompt_variant,
        report.config.visual_style,
        report.config.temperature
    )
    .unwrap();
    for note in &report.notes {
        writeln!(out, "- note: {note}").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "| sample | IoU | I | U | flags |").unwrap();
    writeln!(out, "|---|---|---|---|---|").unwrap();
    for r in &report.records {
        let mut flags = Vec::new();
        if r.absent_predicted {
            flags.push("absent");
        }
        if r.parse_failed {
            flags.push("parse-fail");
        }
        if r.errored {
            flags.push("error");
        }
        writeln!(
            out,
            "| {} | {:.4} | {} | {} | {} |",
            r.sample_id,
            r.iou,
            r.intersection,
            r.union,
            flags.join(",")
        )
        .unwrap();
    }
    out
}
