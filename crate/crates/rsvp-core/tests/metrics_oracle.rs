//! Metrics against brute-force accumulators and a direct-definition mAP
//! oracle, plus RLE and polygon rasterization properties.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsvp_core::mask::{rasterize_polygons, rle_decode, rle_encode, BinaryMask, RleMask};
use rsvp_core::metrics::{
    ciou, default_iou_thresholds, giou, map_eval, mask_iou, ImageInstances, InstanceGroundTruth,
    InstancePrediction, IoURecord, ScoringOptions,
};

fn random_mask(rng: &mut ChaCha8Rng, max_side: u32) -> BinaryMask {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let fill: f64 = rng.random_range(0.0..1.0);
    let cells: Vec<bool> = (0..w * h).map(|_| rng.random_bool(fill)).collect();
    BinaryMask::from_fn(w, h, |x, y| cells[(y * w + x) as usize])
}

#[test]
fn iou_and_aggregates_match_naive_accumulator_on_200_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let opts = ScoringOptions::default();
    let mut records = Vec::new();
    let mut sum_i = 0u64;
    let mut sum_u = 0u64;
    let mut sum_iou = 0.0f64;
    for k in 0..200 {
        let a = random_mask(&mut rng, 64);
        let b = BinaryMask::from_fn(a.width(), a.height(), |x, y| {
            // Correlated second mask for nontrivial overlap.
            a.get(x, y) ^ ((x + y + k) % 3 == 0)
        });
        let (ni, nu) = common::naive_overlap(&a, &b);
        let rec = mask_iou(&a, &b, &opts).unwrap();
        assert_eq!((rec.intersection, rec.union), (ni, nu), "pair {k}");
        let naive_iou = if nu == 0 { 1.0 } else { ni as f64 / nu as f64 };
        assert!((rec.iou - naive_iou).abs() <= 1e-12);
        sum_i += ni;
        sum_u += nu;
        sum_iou += naive_iou;
        records.push(IoURecord::new(format!("p{k}"), rec.intersection, rec.union, &opts));
    }
    let g = giou(&records).unwrap();
    let c = ciou(&records).unwrap();
    assert!((g - sum_iou / 200.0).abs() <= 1e-12);
    assert!((c - sum_i as f64 / sum_u as f64).abs() <= 1e-12);
    assert!((0.0..=1.0).contains(&c));
}

#[test]
fn pinned_aggregate_examples() {
    let opts = ScoringOptions::default();
    let records = vec![
        IoURecord::new("a", 1, 2, &opts),
        IoURecord::new("b", 3, 4, &opts),
    ];
    assert_eq!(giou(&records).unwrap(), 0.625);
    assert_eq!(ciou(&records).unwrap(), 4.0 / 6.0);
}

#[test]
fn giou_equals_ciou_when_unions_match() {
    let opts = ScoringOptions::default();
    let records = vec![
        IoURecord::new("a", 10, 50, &opts),
        IoURecord::new("b", 30, 50, &opts),
        IoURecord::new("c", 45, 50, &opts),
    ];
    // Equal in exact arithmetic; the two float summation orders may differ
    // by an ulp.
    assert!((giou(&records).unwrap() - ciou(&records).unwrap()).abs() <= 1e-12);
}

fn random_instances(rng: &mut ChaCha8Rng) -> Vec<ImageInstances> {
    let categories = ["a", "b"];
    let n_images = rng.random_range(1..=3);
    let mut used_scores = Vec::new();
    (0..n_images)
        .map(|_| {
            let n_pred = rng.random_range(0..=5);
            let n_gt = rng.random_range(0..=5);
            let predictions = (0..n_pred)
                .map(|_| {
                    // Distinct scores keep tie-breaking out of the comparison.
                    let mut s;
                    loop {
                        s = (rng.random_range(1..10_000) as f64) / 10_000.0;
                        if !used_scores.contains(&s) {
                            used_scores.push(s);
                            break;
                        }
                    }
                    InstancePrediction {
                        mask: block(rng, 32),
                        score: s,
                        category: categories[rng.random_range(0..2)].into(),
                    }
                })
                .collect();
            let ground_truth = (0..n_gt)
                .map(|_| InstanceGroundTruth {
                    mask: block(rng, 32),
                    category: categories[rng.random_range(0..2)].into(),
                })
                .collect();
            ImageInstances {
                predictions,
                ground_truth,
            }
        })
        .collect()
}

fn block(rng: &mut ChaCha8Rng, side: u32) -> BinaryMask {
    let x0 = rng.random_range(0..side / 2);
    let y0 = rng.random_range(0..side / 2);
    let w = rng.random_range(1..=side / 2);
    let h = rng.random_range(1..=side / 2);
    BinaryMask::from_fn(side, side, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
}

#[test]
fn map_matches_direct_definition_oracle_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let thresholds = default_iou_thresholds();
    let mut compared = 0;
    while compared < 25 {
        let images = random_instances(&mut rng);
        let has_gt = images.iter().any(|im| !im.ground_truth.is_empty());
        if !has_gt {
            continue;
        }
        let got = map_eval(&images, &thresholds).unwrap();
        let want = common::oracle_map(&images, &thresholds);
        assert!(
            (got - want).abs() <= 1e-9,
            "set {compared}: got {got}, oracle {want}"
        );
        compared += 1;
    }
}

#[test]
fn map_monotone_score_transform_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let thresholds = default_iou_thresholds();
    for _ in 0..5 {
        let images = loop {
            let im = random_instances(&mut rng);
            if im.iter().any(|i| !i.ground_truth.is_empty()) {
                break im;
            }
        };
        let base = map_eval(&images, &thresholds).unwrap();
        let transformed: Vec<ImageInstances> = images
            .iter()
            .map(|im| ImageInstances {
                predictions: im
                    .predictions
                    .iter()
                    .map(|p| InstancePrediction {
                        mask: p.mask.clone(),
                        score: (p.score * 3.0).exp(),
                        category: p.category.clone(),
                    })
                    .collect(),
                ground_truth: im.ground_truth.clone(),
            })
            .collect();
        let t = map_eval(&transformed, &thresholds).unwrap();
        assert!((base - t).abs() <= 1e-12);
    }
}

#[test]
fn rle_roundtrip_1000_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..1000 {
        let m = random_mask(&mut rng, 64);
        let rle = rle_encode(&m);
        let back = rle_decode(&rle).unwrap();
        assert_eq!(back, m, "mask {k}");
        // Counts always alternate starting from the zero run.
        assert_eq!(rle.counts.iter().sum::<u64>(), (m.width() * m.height()) as u64);
    }
}

#[test]
fn rle_convention_pins() {
    assert_eq!(rle_encode(&BinaryMask::ones(2, 2)).counts, vec![0, 4]);
    assert_eq!(rle_encode(&BinaryMask::zeros(5, 8)).counts, vec![40]);
    let round = rle_decode(&RleMask { width: 2, height: 2, counts: vec![0, 4] }).unwrap();
    assert_eq!(round, BinaryMask::ones(2, 2));
}

proptest! {
    #[test]
    fn rle_roundtrip_property(w in 1u32..40, h in 1u32..40, seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.5)).collect();
        let m = BinaryMask::from_fn(w, h, |x, y| cells[(y * w + x) as usize]);
        prop_assert_eq!(rle_decode(&rle_encode(&m)).unwrap(), m);
    }
}

#[test]
fn polygon_rasterization_matches_point_in_polygon_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        // Random simple-ish polygon: star of random radii around a center.
        let cx = rng.random_range(8.0..24.0);
        let cy = rng.random_range(8.0..24.0);
        let n = rng.random_range(3..9);
        let mut ring = Vec::new();
        for k in 0..n {
            let angle = k as f64 / n as f64 * std::f64::consts::TAU;
            let r = rng.random_range(2.0..8.0);
            ring.push(cx + r * angle.cos());
            ring.push(cy + r * angle.sin());
        }
        let mask = rasterize_polygons(&[ring.clone()], 32, 32).unwrap();
        for y in 0..32u32 {
            for x in 0..32u32 {
                let inside = point_in_polygon_even_odd(&ring, x as f64 + 0.5, y as f64 + 0.5);
                assert_eq!(mask.get(x, y), inside, "pixel ({x},{y})");
            }
        }
    }
}

/// Even-odd crossing test with the same half-open vertical convention as the
/// scanline (edges counted on [ymin, ymax)).
fn point_in_polygon_even_odd(ring: &[f64], px: f64, py: f64) -> bool {
    let pts: Vec<(f64, f64)> = ring.chunks(2).map(|c| (c[0], c[1])).collect();
    let mut crossings = 0;
    for i in 0..pts.len() {
        let (x1, y1) = pts[i];
        let (x2, y2) = pts[(i + 1) % pts.len()];
        if y1 == y2 {
            continue;
        }
        let (ylo, yhi) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
        if ylo <= py && py < yhi {
            let x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
            if x_at > px {
                crossings += 1;
            }
        }
    }
    crossings % 2 == 1
}
