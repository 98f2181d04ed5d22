//! Frozen golden images for the 9×9 split prompts on a uniform gray canvas.
//!
//! The goldens were produced by this renderer once, structurally verified
//! (line positions at the strip boundaries, one label per strip, correct
//! counts), and committed. Any byte drift in the rendering path fails here.
//!
//! Regenerate deliberately with:
//! `REGEN_GOLDENS=1 cargo test -p rsvp-core --test rendering_golden`

use image::{Rgb, RgbImage};
use rsvp_core::geometry::GridSpec;
use rsvp_core::prompt::{encode_png, render_split_prompts, LABEL_BG, LABEL_FG, LINE_COLOR};
use std::path::PathBuf;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn gray_canvas() -> RgbImage {
    RgbImage::from_pixel(1000, 1000, Rgb([128, 128, 128]))
}

fn render_pair() -> (Vec<u8>, Vec<u8>) {
    let grid = GridSpec::new(9, 9).unwrap();
    let pair = render_split_prompts(&gray_canvas(), &grid).unwrap();
    (
        encode_png(&pair.row_annotated).unwrap(),
        encode_png(&pair.col_annotated).unwrap(),
    )
}

#[test]
fn split_9x9_matches_frozen_goldens() {
    let (rows_png, cols_png) = render_pair();
    let rows_path = golden_dir().join("split_rows_9x9_gray.png");
    let cols_path = golden_dir().join("split_cols_9x9_gray.png");

    if std::env::var("REGEN_GOLDENS").is_ok() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&rows_path, &rows_png).unwrap();
        std::fs::write(&cols_path, &cols_png).unwrap();
        panic!("goldens regenerated; rerun without REGEN_GOLDENS");
    }

    let frozen_rows = std::fs::read(&rows_path).expect("frozen golden missing");
    let frozen_cols = std::fs::read(&cols_path).expect("frozen golden missing");
    assert_eq!(rows_png, frozen_rows, "row-annotated render drifted from golden");
    assert_eq!(cols_png, frozen_cols, "col-annotated render drifted from golden");
}

/// Structural verification of the goldens themselves: 8 separator lines,
/// 9 labels, lines exactly at the geometry boundaries.
#[test]
fn goldens_have_expected_structure() {
    let grid = GridSpec::new(9, 9).unwrap();
    let rows_img = image::load_from_memory(&std::fs::read(golden_dir().join("split_rows_9x9_gray.png")).unwrap())
        .unwrap()
        .to_rgb8();
    let cols_img = image::load_from_memory(&std::fs::read(golden_dir().join("split_cols_9x9_gray.png")).unwrap())
        .unwrap()
        .to_rgb8();

    // Full-width green rows: 8 boundaries x 3 px thickness.
    let green_rows: Vec<u32> = (0..rows_img.height())
        .filter(|&y| (0..rows_img.width()).all(|x| rows_img.get_pixel(x, y) == &LINE_COLOR))
        .collect();
    assert_eq!(green_rows.len(), 8 * 3);
    for k in 1..9 {
        assert!(green_rows.contains(&grid.row_boundary(k)));
    }

    let green_cols: Vec<u32> = (0..cols_img.width())
        .filter(|&x| (0..cols_img.height()).all(|y| cols_img.get_pixel(x, y) == &LINE_COLOR))
        .collect();
    assert_eq!(green_cols.len(), 8 * 3);
    for k in 1..9 {
        assert!(green_cols.contains(&grid.col_boundary(k)));
    }

    // One label per strip along the midline.
    let count_labels = |img: &RgbImage, vertical_scan: bool| {
        let mut runs = 0;
        let mut inside = false;
        let n = if vertical_scan { img.height() } else { img.width() };
        for t in 0..n {
            let p = if vertical_scan {
                img.get_pixel(img.width() / 2, t)
            } else {
                img.get_pixel(t, img.height() / 2)
            };
            let label = p == &LABEL_BG || p == &LABEL_FG;
            if label && !inside {
                runs += 1;
            }
            inside = label;
        }
        runs
    };
    assert_eq!(count_labels(&rows_img, true), 9);
    assert_eq!(count_labels(&cols_img, false), 9);
}
