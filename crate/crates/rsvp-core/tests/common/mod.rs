//! Independent oracles shared by the integration and acceptance suites.
//!
//! Everything here deliberately re-derives expected values from first
//! principles (exact rational arithmetic, brute-force pixel scans, direct
//! definition evaluation) without touching the implementation paths it
//! checks.

#![allow(dead_code)]

use rsvp_core::mask::BinaryMask;
use rsvp_core::metrics::ImageInstances;

/// Exact rational `round(k·total/parts)` (half away from zero, positive).
pub fn oracle_boundary(k: u32, total: u32, parts: u32) -> i128 {
    let n = 2 * (k as i128) * (total as i128) + parts as i128;
    n / (2 * parts as i128)
}

/// Exact rational padding for a ratio expressed as `num/den`.
pub fn oracle_padding(num: i128, den: i128, total: u32, parts: u32) -> i128 {
    if num == 0 {
        return 0;
    }
    let n = num * total as i128;
    let d = den * parts as i128;
    (2 * n + d) / (2 * d)
}

/// Rational-arithmetic reimplementation of region_pixel_bounds for grids
/// whose padding ratio is the fraction `pad_num/pad_den`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_bounds(
    rows: u32,
    cols: u32,
    width: u32,
    height: u32,
    pad_num: i128,
    pad_den: i128,
    ids_v: &[i64],
    ids_h: &[i64],
) -> Option<(i128, i128, i128, i128)> {
    if ids_v.is_empty() || ids_h.is_empty() {
        return None;
    }
    let span = |ids: &[i64], parts: u32| {
        let clamped: Vec<i128> = ids
            .iter()
            .map(|&i| (i as i128).clamp(1, parts as i128))
            .collect();
        (
            *clamped.iter().min().unwrap(),
            *clamped.iter().max().unwrap(),
        )
    };
    let (sv, ev) = span(ids_v, rows);
    let (sh, eh) = span(ids_h, cols);
    let py = oracle_padding(pad_num, pad_den, height, rows);
    let px = oracle_padding(pad_num, pad_den, width, cols);
    let y0 = (oracle_boundary(sv as u32 - 1, height, rows) - py).max(0);
    let y1 = (oracle_boundary(ev as u32, height, rows) + py).min(height as i128);
    let x0 = (oracle_boundary(sh as u32 - 1, width, cols) - px).max(0);
    let x1 = (oracle_boundary(eh as u32, width, cols) + px).min(width as i128);
    Some((x0, y0, x1, y1))
}

/// Brute-force per-pair intersection/union pixel counts.
pub fn naive_overlap(a: &BinaryMask, b: &BinaryMask) -> (u64, u64) {
    assert_eq!(a.dims(), b.dims());
    let mut i = 0;
    let mut u = 0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (va, vb) = (a.get(x, y), b.get(x, y));
            if va && vb {
                i += 1;
            }
            if va || vb {
                u += 1;
            }
        }
    }
    (i, u)
}

/// Direct-definition mAP: same matching rules as the implementation, but a
/// separate code path computing AP by scanning every PR point for each of
/// the 101 recall targets.
pub fn oracle_map(images: &[ImageInstances], thresholds: &[f64]) -> f64 {
    let mut cats: Vec<String> = images
        .iter()
        .flat_map(|im| im.ground_truth.iter().map(|g| g.category.clone()))
        .collect();
    cats.sort();
    cats.dedup();
    assert!(!cats.is_empty(), "oracle mAP needs ground truth");

    let mut total = 0.0;
    for &thr in thresholds {
        let mut cat_aps = Vec::new();
        for cat in &cats {
            let n_gt: usize = images
                .iter()
                .map(|im| im.ground_truth.iter().filter(|g| &g.category == cat).count())
                .sum();
            if n_gt == 0 {
                continue;
            }
            // (score, image idx, pred idx, matched)
            let mut dets: Vec<(f64, usize, usize, bool)> = Vec::new();
            for (img_idx, im) in images.iter().enumerate() {
                let mut preds: Vec<(usize, f64)> = im
                    .predictions
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| &p.category == cat)
                    .map(|(i, p)| (i, p.score))
                    .collect();
                preds.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                let gts: Vec<usize> = im
                    .ground_truth
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| &g.category == cat)
                    .map(|(i, _)| i)
                    .collect();
                let mut used = vec![false; gts.len()];
                for (pred_idx, score) in preds {
                    let pm = &im.predictions[pred_idx].mask;
                    let mut best: Option<(usize, f64)> = None;
                    for (slot, &gi) in gts.iter().enumerate() {
                        if used[slot] {
                            continue;
                        }
                        let (i, u) = naive_overlap(pm, &im.ground_truth[gi].mask);
                        let iou = if u == 0 { 0.0 } else { i as f64 / u as f64 };
                        if iou >= thr && best.map_or(true, |(_, b)| iou > b) {
                            best = Some((slot, iou));
                        }
                    }
                    let matched = if let Some((slot, _)) = best {
                        used[slot] = true;
                        true
                    } else {
                        false
                    };
                    dets.push((score, img_idx, pred_idx, matched));
                }
            }
            dets.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap()
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            // PR points.
            let mut tp = 0usize;
            let mut points = Vec::new();
            for (k, det) in dets.iter().enumerate() {
                if det.3 {
                    tp += 1;
                }
                points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
            }
            let mut ap = 0.0;
            for r in 0..=100u32 {
                let target = r as f64 / 100.0;
                let best = points
                    .iter()
                    .filter(|(rec, _)| *rec >= target - 1e-12)
                    .map(|(_, prec)| *prec)
                    .fold(0.0f64, f64::max);
                ap += best;
            }
            cat_aps.push(ap / 101.0);
        }
        if !cat_aps.is_empty() {
            total += cat_aps.iter().sum::<f64>() / cat_aps.len() as f64;
        }
    }
    total / thresholds.len() as f64
}
