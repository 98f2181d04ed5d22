//! Geometry against an exact rational-arithmetic oracle, plus the module's
//! ordering/monotonicity invariants and a reference check of the bilinear
//! normalizer.

mod common;

use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rsvp_core::geometry::{
    crop, normalize_image, paste_mask, region_pixel_bounds, restrict_mask, CropRect, GridSpec,
};
use rsvp_core::mask::BinaryMask;

fn grid(rows: u32, cols: u32, ratio: f64) -> GridSpec {
    GridSpec::new(rows, cols)
        .unwrap()
        .with_padding_ratio(ratio)
        .unwrap()
}

const PADDINGS: [(f64, i128, i128); 3] = [(0.0, 0, 1), (0.2, 1, 5), (0.4, 2, 5)];
const DENSITIES: [u32; 3] = [5, 9, 13];

#[test]
fn exhaustive_rational_oracle_equivalence() {
    let mut checked = 0u64;
    for &rows in &DENSITIES {
        for &cols in &DENSITIES {
            for &(ratio, num, den) in &PADDINGS {
                let g = grid(rows, cols, ratio);
                for sv in 1..=rows {
                    for ev in sv..=rows {
                        for sh in 1..=cols {
                            for eh in sh..=cols {
                                let ids_v: Vec<i64> = (sv..=ev).map(i64::from).collect();
                                let ids_h: Vec<i64> = (sh..=eh).map(i64::from).collect();
                                let got = region_pixel_bounds(&g, &ids_v, &ids_h).unwrap();
                                let want =
                                    common::oracle_bounds(rows, cols, 1000, 1000, num, den, &ids_v, &ids_h)
                                        .unwrap();
                                assert_eq!(
                                    (got.x0 as i128, got.y0 as i128, got.x1 as i128, got.y1 as i128),
                                    want,
                                    "grid {rows}x{cols} pad {ratio} rows {sv}..={ev} cols {sh}..={eh}"
                                );
                                checked += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    assert_eq!(checked, 3 * (15 + 45 + 91) * (15 + 45 + 91));
}

#[test]
fn oracle_agrees_on_spec_worked_example() {
    let want = common::oracle_bounds(9, 9, 1000, 1000, 1, 5, &[4, 5, 6], &[5, 6, 7, 8]).unwrap();
    assert_eq!(want, (422, 311, 911, 689));
}

proptest! {
    #[test]
    fn idempotent_under_preclamping(
        rows in 1u32..=13,
        cols in 1u32..=13,
        ratio in 0usize..3,
        ids_v in prop::collection::vec(-5i64..20, 1..8),
        ids_h in prop::collection::vec(-5i64..20, 1..8),
    ) {
        let g = grid(rows, cols, PADDINGS[ratio].0);
        let clamped_v: Vec<i64> = ids_v.iter().map(|&i| i.clamp(1, rows as i64)).collect();
        let clamped_h: Vec<i64> = ids_h.iter().map(|&i| i.clamp(1, cols as i64)).collect();
        prop_assert_eq!(
            region_pixel_bounds(&g, &ids_v, &ids_h),
            region_pixel_bounds(&g, &clamped_v, &clamped_h)
        );
    }

    #[test]
    fn superset_ids_contain(
        rows in 2u32..=13,
        cols in 2u32..=13,
        ratio in 0usize..3,
        ids_v in prop::collection::vec(1i64..=13, 1..6),
        ids_h in prop::collection::vec(1i64..=13, 1..6),
        extra_v in 1i64..=13,
        extra_h in 1i64..=13,
    ) {
        let g = grid(rows, cols, PADDINGS[ratio].0);
        let small = region_pixel_bounds(&g, &ids_v, &ids_h).unwrap();
        let mut big_v = ids_v.clone();
        big_v.push(extra_v);
        let mut big_h = ids_h.clone();
        big_h.push(extra_h);
        let big = region_pixel_bounds(&g, &big_v, &big_h).unwrap();
        prop_assert!(big.x0 <= small.x0 && big.y0 <= small.y0);
        prop_assert!(big.x1 >= small.x1 && big.y1 >= small.y1);
    }

    #[test]
    fn larger_padding_contains(
        rows in 1u32..=13,
        cols in 1u32..=13,
        ids_v in prop::collection::vec(1i64..=13, 1..6),
        ids_h in prop::collection::vec(1i64..=13, 1..6),
        lo in 0.0f64..0.5,
        delta in 0.0f64..0.5,
    ) {
        let small = region_pixel_bounds(&grid(rows, cols, lo), &ids_v, &ids_h).unwrap();
        let big = region_pixel_bounds(&grid(rows, cols, lo + delta), &ids_v, &ids_h).unwrap();
        prop_assert!(big.x0 <= small.x0 && big.y0 <= small.y0);
        prop_assert!(big.x1 >= small.x1 && big.y1 >= small.y1);
    }

    #[test]
    fn paste_after_restrict_is_identity_inside_rect(
        x0 in 0u32..20,
        y0 in 0u32..20,
        w in 1u32..20,
        h in 1u32..20,
        seed in 0u64..1000,
    ) {
        let rect = CropRect { x0, y0, x1: x0 + w, y1: y0 + h };
        let full = BinaryMask::from_fn(40, 40, |x, y| {
            rect.contains_point(x, y) && (x as u64 * 31 + y as u64 * 17 + seed) % 3 == 0
        });
        let restricted = restrict_mask(&full, &rect).unwrap();
        let pasted = paste_mask(&restricted, &rect, (40, 40)).unwrap();
        prop_assert_eq!(pasted, full);
    }

    #[test]
    fn paste_preserves_popcount(
        x0 in 0u32..10,
        y0 in 0u32..10,
        w in 1u32..12,
        h in 1u32..12,
        seed in 0u64..1000,
    ) {
        let rect = CropRect { x0, y0, x1: x0 + w, y1: y0 + h };
        let cm = BinaryMask::from_fn(w, h, |x, y| (x as u64 * 7 + y as u64 * 13 + seed) % 4 == 0);
        let pasted = paste_mask(&cm, &rect, (24, 24)).unwrap();
        prop_assert_eq!(pasted.popcount(), cm.popcount());
    }
}

/// Independent triangle-kernel resampler mirroring the normalizer's filter
/// definition (separable, pixel-center mapping, clamped taps).
fn reference_bilinear(src: &RgbImage, dw: u32, dh: u32) -> RgbImage {
    let pass_h = |img: &Vec<Vec<[f32; 3]>>, sw: u32, out_w: u32| -> Vec<Vec<[f32; 3]>> {
        let ratio = sw as f32 / out_w as f32;
        let sratio = ratio.max(1.0);
        let support = sratio;
        img.iter()
            .map(|row| {
                (0..out_w)
                    .map(|ox| {
                        let center = (ox as f32 + 0.5) * ratio - 0.5;
                        let left = ((center - support).floor() as i64).max(0) as u32;
                        let right = ((center + support).ceil() as i64).min(sw as i64 - 1) as u32;
                        let mut acc = [0.0f32; 3];
                        let mut wsum = 0.0f32;
                        for sx in left..=right {
                            let w = (1.0 - ((sx as f32 - center) / sratio).abs()).max(0.0);
                            wsum += w;
                            for c in 0..3 {
                                acc[c] += w * row[sx as usize][c];
                            }
                        }
                        if wsum > 0.0 {
                            for a in &mut acc {
                                *a /= wsum;
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    };
    let rows: Vec<Vec<[f32; 3]>> = (0..src.height())
        .map(|y| {
            (0..src.width())
                .map(|x| {
                    let p = src.get_pixel(x, y).0;
                    [p[0] as f32, p[1] as f32, p[2] as f32]
                })
                .collect()
        })
        .collect();
    let horizontal = pass_h(&rows, src.width(), dw);
    // Transpose, resample "horizontally" again, transpose back.
    let transposed: Vec<Vec<[f32; 3]>> = (0..dw as usize)
        .map(|x| (0..src.height() as usize).map(|y| horizontal[y][x]).collect())
        .collect();
    let vertical = pass_h(&transposed, src.height(), dh);
    let mut out = RgbImage::new(dw, dh);
    for y in 0..dh {
        for x in 0..dw {
            let p = vertical[x as usize][y as usize];
            out.put_pixel(
                x,
                y,
                Rgb([
                    p[0].round().clamp(0.0, 255.0) as u8,
                    p[1].round().clamp(0.0, 255.0) as u8,
                    p[2].round().clamp(0.0, 255.0) as u8,
                ]),
            );
        }
    }
    out
}

#[test]
fn normalize_checkerboard_corners_and_reference_agreement() {
    let colors = [
        Rgb([255u8, 0, 0]),
        Rgb([0, 255, 0]),
        Rgb([0, 0, 255]),
        Rgb([255, 255, 0]),
        Rgb([0, 255, 255]),
        Rgb([255, 0, 255]),
        Rgb([255, 255, 255]),
        Rgb([0, 0, 0]),
        Rgb([128, 128, 128]),
    ];
    let mut src = RgbImage::new(3, 3);
    for y in 0..3 {
        for x in 0..3 {
            src.put_pixel(x, y, colors[(y * 3 + x) as usize]);
        }
    }
    let g = grid(9, 9, 0.2);
    let out = normalize_image(&src, &g).unwrap();
    assert_eq!(out.dimensions(), (1000, 1000));
    // Extreme corners keep the source corner colors exactly.
    assert_eq!(out.get_pixel(0, 0), &colors[0]);
    assert_eq!(out.get_pixel(999, 0), &colors[2]);
    assert_eq!(out.get_pixel(0, 999), &colors[6]);
    assert_eq!(out.get_pixel(999, 999), &colors[8]);

    let reference = reference_bilinear(&src, 1000, 1000);
    let mut max_diff = 0i32;
    for (a, b) in out.pixels().zip(reference.pixels()) {
        for c in 0..3 {
            max_diff = max_diff.max((a.0[c] as i32 - b.0[c] as i32).abs());
        }
    }
    assert!(max_diff <= 2, "max channel diff {max_diff} vs reference resampler");
}

#[test]
fn normalize_downscale_matches_reference() {
    let mut src = RgbImage::new(500, 2000);
    for y in 0..2000 {
        for x in 0..500 {
            src.put_pixel(x, y, Rgb([(x % 256) as u8, (y % 256) as u8, ((x + y) % 256) as u8]));
        }
    }
    let g = grid(9, 9, 0.2);
    let out = normalize_image(&src, &g).unwrap();
    assert_eq!(out.dimensions(), (1000, 1000));
    let reference = reference_bilinear(&src, 1000, 1000);
    let mut max_diff = 0i32;
    for (a, b) in out.pixels().zip(reference.pixels()) {
        for c in 0..3 {
            max_diff = max_diff.max((a.0[c] as i32 - b.0[c] as i32).abs());
        }
    }
    assert!(max_diff <= 2, "max channel diff {max_diff} vs reference resampler");
}

#[test]
fn crop_of_worked_example_rect() {
    let g = grid(9, 9, 0.2);
    let img = RgbImage::from_fn(1000, 1000, |x, y| Rgb([(x % 251) as u8, (y % 241) as u8, 7]));
    let rect = region_pixel_bounds(&g, &[4, 5, 6], &[5, 6, 7, 8]).unwrap();
    let cropped = crop(&img, &rect).unwrap();
    assert_eq!(cropped.dimensions(), (489, 378));
    for (cx, cy) in [(0u32, 0u32), (488, 377), (200, 100)] {
        assert_eq!(cropped.get_pixel(cx, cy), img.get_pixel(rect.x0 + cx, rect.y0 + cy));
    }
}
