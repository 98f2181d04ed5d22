//! Seed-deterministic synthetic corpora for desk-scale pipeline
//! verification.
//!
//! Every sample's ground truth is a rectangle or inscribed ellipse whose
//! bounding box is aligned to the strip boundaries of a chosen grid. A
//! paired scripted-MLLM response file is emitted per sample whose region IDs
//! either exactly cover the ground-truth box or deliberately cover only its
//! left half, giving analytically known IoU outcomes.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::GridSpec;
use crate::mask::{rle_encode, BinaryMask};
use crate::mllm::{serialize_proposal, RegionProposal};

use super::{AnnotationData, AnnotationField, Manifest, ManifestSample, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    /// Scripted IDs span exactly the ground-truth box.
    Exact,
    /// Scripted column IDs span only the left half of the box.
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rect,
    Ellipse,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub count: u32,
    /// Grid the scripted responses are written against. Images render at the
    /// grid's normalized size so the oracle path is pixel-exact.
    pub grid: GridSpec,
    pub cover: CoverMode,
    #[serde(default = "default_shape")]
    pub shape: ShapeKind,
    /// Additional absence samples (empty ground truth, scripted empty IDs).
    #[serde(default)]
    pub absent_count: u32,
}

fn default_shape() -> ShapeKind {
    ShapeKind::Mixed
}

/// Analytic expectations, written alongside the corpus for tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSample {
    pub id: String,
    /// Ideal-geometry IoU for an oracle segmenter (1.0 in exact mode).
    pub analytic_iou: f64,
    pub ids_v: Vec<i64>,
    pub ids_h: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub root: PathBuf,
    pub manifest_path: PathBuf,
    pub responses_dir: PathBuf,
    pub expected_path: PathBuf,
    pub grid: GridSpec,
    pub expected: Vec<ExpectedSample>,
}

const PALETTE: [(&str, [u8; 3]); 5] = [
    ("crimson", [180, 30, 60]),
    ("navy", [20, 40, 120]),
    ("forest", [20, 110, 50]),
    ("amber", [220, 160, 30]),
    ("violet", [120, 40, 160]),
];

/// Generate a corpus under `out_dir`: `images/`, `responses/`,
/// `manifest.json`, and `expected.json`. Fully determined by the spec.
pub fn make_synthetic_corpus(spec: &SyntheticSpec, out_dir: &Path) -> Result<SyntheticCorpus> {
    spec.grid.validate()?;
    if spec.count < 1 {
        return Err(crate::error::Error::InvalidInput(
            "synthetic corpus needs count >= 1".into(),
        ));
    }
    if spec.grid.rows < 2 || spec.grid.cols < 2 {
        return Err(crate::error::Error::InvalidInput(
            "synthetic corpus needs a grid of at least 2x2 strips".into(),
        ));
    }
    let images_dir = out_dir.join("images");
    let responses_dir = out_dir.join("responses");
    std::fs::create_dir_all(&images_dir)?;
    std::fs::create_dir_all(&responses_dir)?;

    let grid = &spec.grid;
    let (w, h) = (grid.norm_width, grid.norm_height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::new();
    let mut expected = Vec::new();

    for i in 0..spec.count {
        let id = format!("syn-{i:03}");
        let row_len = rng.random_range(2..=4.min(grid.rows).max(2)).min(grid.rows);
        let col_len = match spec.cover {
            // Even span so "half" splits at a strip boundary.
            CoverMode::Half => 2 * rng.random_range(1..=(grid.cols / 2).min(2).max(1)),
            CoverMode::Exact => rng.random_range(2..=4.min(grid.cols).max(2)).min(grid.cols),
        };
        let row_start = rng.random_range(1..=grid.rows - row_len + 1);
        let col_start = rng.random_range(1..=grid.cols - col_len + 1);
        let row_end = row_start + row_len - 1;
        let col_end = col_start + col_len - 1;

        let x0 = grid.col_boundary(col_start - 1);
        let x1 = grid.col_boundary(col_end);
        let y0 = grid.row_boundary(row_start - 1);
        let y1 = grid.row_boundary(row_end);

        let use_ellipse = match spec.shape {
            ShapeKind::Rect => false,
            ShapeKind::Ellipse => true,
            ShapeKind::Mixed => rng.random_bool(0.5),
        };
        let (gt, annotation) = if use_ellipse {
            let cx = (x0 + x1) as f64 / 2.0;
            let cy = (y0 + y1) as f64 / 2.0;
            let a = (x1 - x0) as f64 / 2.0;
            let b = (y1 - y0) as f64 / 2.0;
            let mask = BinaryMask::from_fn(w, h, |x, y| {
                let dx = (x as f64 + 0.5 - cx) / a;
                let dy = (y as f64 + 0.5 - cy) / b;
                dx * dx + dy * dy <= 1.0
            });
            let ann = AnnotationData::Rle(rle_encode(&mask));
            (mask, ann)
        } else {
            let mask = BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1);
            let ann = AnnotationData::Polygon(vec![vec![
                x0 as f64, y0 as f64, x1 as f64, y0 as f64, x1 as f64, y1 as f64, x0 as f64,
                y1 as f64,
            ]]);
            (mask, ann)
        };

        let (color_name, fg) = PALETTE[rng.random_range(0..PALETTE.len())];
        let bg = 225 + rng.random_range(0..20) as u8;
        let mut img = RgbImage::from_pixel(w, h, Rgb([bg, bg, bg]));
        for y in 0..h {
            for x in 0..w {
                if gt.get(x, y) {
                    img.put_pixel(x, y, Rgb(fg));
                }
            }
        }
        let image_rel = format!("images/{id}.png");
        img.save(out_dir.join(&image_rel))?;

        let ids_v: Vec<i64> = (row_start..=row_end).map(i64::from).collect();
        let ids_h: Vec<i64> = match spec.cover {
            CoverMode::Exact => (col_start..=col_end).map(i64::from).collect(),
            CoverMode::Half => (col_start..=col_start + col_len / 2 - 1).map(i64::from).collect(),
        };
        let shape_word = if use_ellipse { "ellipse" } else { "rectangle" };
        let proposal = RegionProposal {
            object_name: format!("{color_name} {shape_word}"),
            attributes: vec![color_name.to_string(), shape_word.to_string()],
            rationale: format!("the {color_name} {shape_word} is the only marked region"),
            ids_v: ids_v.clone(),
            ids_h: ids_h.clone(),
            absent: false,
        };
        let response = format!(
            "Step 1 - Object class: a {shape_word}.\nStep 2 - Attributes: {color_name}.\n\
             Step 3 - Region IDs: rows {ids_v:?}, columns {ids_h:?}.\nStep 4 - Rationale: {}.\n\n{}\n",
            proposal.rationale,
            serialize_proposal(&proposal)
        );
        std::fs::write(responses_dir.join(format!("{id}.txt")), response)?;

        let analytic_iou = match spec.cover {
            CoverMode::Exact => 1.0,
            CoverMode::Half => {
                // Ideal covered fraction of the box width: half the strips
                // plus the padding overhang on the cut side.
                let t = (0.5 + grid.padding_ratio / col_len as f64).min(1.0);
                if use_ellipse {
                    ellipse_left_fraction(t)
                } else {
                    t
                }
            }
        };

        samples.push(ManifestSample {
            id: id.clone(),
            image: image_rel,
            query: format!("which region holds the {color_name} {shape_word}?"),
            split: Split::Val,
            category: Some(shape_word.to_string()),
            width: w,
            height: h,
            annotation: Some(AnnotationField::One(annotation)),
        });
        expected.push(ExpectedSample {
            id,
            analytic_iou,
            ids_v,
            ids_h,
        });
    }

    for k in 0..spec.absent_count {
        let id = format!("syn-abs-{k:03}");
        let bg = 240u8;
        let img = RgbImage::from_pixel(w, h, Rgb([bg, bg, bg]));
        let image_rel = format!("images/{id}.png");
        img.save(out_dir.join(&image_rel))?;
        let proposal = RegionProposal {
            object_name: String::new(),
            attributes: vec![],
            rationale: "no marked region is present in this image".into(),
            ids_v: vec![],
            ids_h: vec![],
            absent: true,
        };
        std::fs::write(
            responses_dir.join(format!("{id}.txt")),
            format!("Nothing matches the query.\n\n{}\n", serialize_proposal(&proposal)),
        )?;
        samples.push(ManifestSample {
            id: id.clone(),
            image: image_rel,
            query: "which region holds the marked object?".into(),
            split: Split::Val,
            category: None,
            width: w,
            height: h,
            annotation: None,
        });
        expected.push(ExpectedSample {
            id,
            analytic_iou: 1.0,
            ids_v: vec![],
            ids_h: vec![],
        });
    }

    let manifest_path = out_dir.join("manifest.json");
    Manifest {
        version: super::MANIFEST_VERSION,
        samples,
    }
    .write(&manifest_path)?;

    let expected_path = out_dir.join("expected.json");
    std::fs::write(&expected_path, serde_json::to_string_pretty(&expected)?)?;

    Ok(SyntheticCorpus {
        root: out_dir.to_path_buf(),
        manifest_path,
        responses_dir,
        expected_path,
        grid: grid.clone(),
        expected,
    })
}

/// Fraction of an ellipse's area left of the vertical line at fraction `t`
/// of its bounding box width.
fn ellipse_left_fraction(t: f64) -> f64 {
    let u = (2.0 * t - 1.0).clamp(-1.0, 1.0);
    0.5 + (u.asin() + u * (1.0 - u * u).sqrt()) / std::f64::consts::PI
}
