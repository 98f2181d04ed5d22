//! Corpus scoring: per-sample IoU, gIoU (mean IoU), cIoU (cumulative IoU),
//! and COCO-convention instance mAP.
//!
//! All pixel arithmetic stays in integers until the final division. The
//! empty-mask convention is configurable: by default a sample where both
//! prediction and ground truth are empty scores IoU 1.0 (a correct "no
//! target" answer) while contributing I=0, U=0 to the cumulative sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// How to score a sample whose prediction and ground truth are both empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringOptions {
    /// `true`: both-empty scores IoU 1.0; `false`: 0.0. Either way the sample
    /// contributes I=0, U=0 to cIoU.
    pub both_empty_scores_one: bool,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions {
            both_empty_scores_one: true,
        }
    }
}

/// Exact intersection/union pixel counts plus the resulting ratio for one
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoURecord {
    pub sample_id: String,
    pub intersection: u64,
    pub union: u64,
    pub iou: f64,
}

impl IoURecord {
    pub fn new(sample_id: impl Into<String>, intersection: u64, union: u64, opts: &ScoringOptions) -> Self {
        let iou = if union == 0 {
            if opts.both_empty_scores_one {
                1.0
            } else {
                0.0
            }
        } else {
            intersection as f64 / union as f64
        };
        IoURecord {
            sample_id: sample_id.into(),
            intersection,
            union,
            iou,
        }
    }
}

/// Pixel-exact IoU of two equal-sized masks.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask, opts: &ScoringOptions) -> Result<IoURecord> {
    let (intersection, union) = a.overlap_counts(b)?;
    Ok(IoURecord::new("", intersection, union, opts))
}

/// Generalized IoU: the arithmetic mean of per-sample IoU values.
pub fn giou(records: &[IoURecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidInput("gIoU of an empty record list".into()));
    }
    Ok(records.iter().map(|r| r.iou).sum::<f64>() / records.len() as f64)
}

/// Cumulative IoU: the ratio of summed intersections over summed unions.
/// An all-empty corpus (ΣU = 0) is defined as 1.0.
pub fn ciou(records: &[IoURecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cIoU of an empty record list".into()));
    }
    let inter: u64 = records.iter().map(|r| r.intersection).sum();
    let union: u64 = records.iter().map(|r| r.union).sum();
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// One scored predicted instance.
#[derive(Debug, Clone)]
pub struct InstancePrediction {
    pub mask: BinaryMask,
    pub score: f64,
    pub category: String,
}

/// One ground-truth instance.
#[derive(Debug, Clone)]
pub struct InstanceGroundTruth {
    pub mask: BinaryMask,
    pub category: String,
}

/// All predictions and ground truth for one image.
#[derive(Debug, Clone, Default)]
pub struct ImageInstances {
    pub predictions: Vec<InstancePrediction>,
    pub ground_truth: Vec<InstanceGroundTruth>,
}

/// The COCO IoU threshold ladder 0.50, 0.55, …, 0.95.
pub fn default_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// COCO-convention mask mAP.
///
/// Per category and IoU threshold, detections are matched greedily in
/// descending score order against unmatched ground truth within each image
/// (highest-IoU eligible GT wins, each GT used at most once). AP is the
/// 101-point interpolated area under the precision-recall curve; mAP averages
/// AP over categories with ground truth, then over thresholds.
pub fn map_eval(images: &[ImageInstances], thresholds: &[f64]) -> Result<f64> {
    if thresholds.is_empty() {
        return Err(Error::InvalidInput("empty IoU threshold list".into()));
    }
    let mut categories: Vec<String> = images
        .iter()
        .flat_map(|img| img.ground_truth.iter().map(|g| g.category.clone()))
        .collect();
    categories.sort();
    categories.dedup();
    if categories.is_empty() {
        return Err(Error::InvalidInput(
            "mAP is undefined without any ground-truth instance".into(),
        ));
    }

    // IoU matrices per (image, category): rows = predictions sorted by
    // descending score (ties keep insertion order), cols = ground truth.
    struct CatImage {
        // (score, global tiebreak) per sorted prediction
        scores: Vec<(f64, usize)>,
        ious: Vec<Vec<f64>>,
        n_gt: usize,
    }

    let mut per_cat: Vec<Vec<CatImage>> = Vec::with_capacity(categories.len());
    let mut global_rank = 0usize;
    for cat in &categories {
        let mut imgs = Vec::new();
        for image in images {
            let mut preds: Vec<(usize, &InstancePrediction)> = image
                .predictions
                .iter()
                .enumerate()
                .filter(|(_, p)| &p.category == cat)
                .collect();
            preds.sort_by(|a, b| b.1.score.partial_cmp(&a.1.score).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
            let gts: Vec<&InstanceGroundTruth> = image
                .ground_truth
                .iter()
                .filter(|g| &g.category == cat)
                .collect();
            if preds.is_empty() && gts.is_empty() {
                continue;
            }
            let mut ious = Vec::with_capacity(preds.len());
            for (_, p) in &preds {
                let row: Vec<f64> = gts
                    .iter()
                    .map(|g| {
                        let (i, u) = p.mask.overlap_counts(&g.mask).unwrap_or((0, 0));
                        if u == 0 {
                            0.0
                        } else {
                            i as f64 / u as f64
                        }
                    })
                    .collect();
                ious.push(row);
            }
            let scores = preds
                .iter()
                .map(|(_, p)| {
                    global_rank += 1;
                    (p.score, global_rank)
                })
                .collect();
            imgs.push(CatImage {
                scores,
                ious,
                n_gt: gts.len(),
            });
        }
        per_cat.push(imgs);
    }

    let mut mean_over_thresholds = 0.0;
    for &thr in thresholds {
        let mut cat_sum = 0.0;
        let mut cat_count = 0usize;
        for imgs in &per_cat {
            let n_gt: usize = imgs.iter().map(|ci| ci.n_gt).sum();
            if n_gt == 0 {
                continue;
            }
            // Greedy matching inside each image, then a global score sort.
            let mut detections: Vec<(f64, usize, bool)> = Vec::new();
            for ci in imgs {
                let mut gt_used = vec![false; ci.ious.first().map_or(0, Vec::len)];
                for (d, row) in ci.ious.iter().enumerate() {
                    let mut best: Option<(usize, f64)> = None;
                    for (g, &iou) in row.iter().enumerate() {
                        if gt_used[g] || iou < thr {
                            continue;
                        }
                        if best.map_or(true, |(_, b)| iou > b) {
                            best = Some((g, iou));
                        }
                    }
                    let matched = if let Some((g, _)) = best {
                        gt_used[g] = true;
                        true
                    } else {
                        false
                    };
                    let (score, rank) = ci.scores[d];
                    detections.push((score, rank, matched));
                }
            }
            detections.sort_by(|a, b| {
                b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1))
            });
            cat_sum += average_precision_101(&detections, n_gt);
            cat_count += 1;
        }
        if cat_count > 0 {
            mean_over_thresholds += cat_sum / cat_count as f64;
        }
    }
    Ok(mean_over_thresholds / thresholds.len() as f64)
}

/// 101-point interpolated AP from score-sorted detections.
fn average_precision_101(detections: &[(f64, usize, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precisions = Vec::with_capacity(detections.len());
    let mut recalls = Vec::with_capacity(detections.len());
    let mut tp = 0u64;
    let mut fp = 0u64;
    for &(_, _, matched) in detections {
        if matched {
            tp += 1;
        } else {
            fp += 1;
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / n_gt as f64);
    }
    // Make precision the running max from the right, COCO style.
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        if precisions[i] < precisions[i + 1] {
            precisions[i] = precisions[i + 1];
        }
    }
    let mut ap = 0.0;
    for r in 0..=100 {
        let target = r as f64 / 100.0;
        // First PR point with recall >= target.
        let idx = recalls.partition_point(|&rec| rec < target - 1e-12);
        if idx < precisions.len() {
            ap += precisions[idx];
        }
    }
    ap / 101.0
}
