//! Coordinate math for the two-stage pipeline: image normalization, strip
//! boundaries, region-ID to pixel bounds, padding, cropping, and pasting
//! crop-space masks back into full-image space.
//!
//! Conventions fixed here and relied on everywhere else:
//! - `rows` horizontal strips of height `H/rows`, `cols` vertical strips of
//!   width `W/cols`, IDs are 1-based, row 1 at the top, column 1 at the left.
//! - All rects are half-open `[x0,x1)×[y0,y1)`, origin top-left.
//! - Strip boundaries sit at `round(k·dim/parts)` with round-half-away-from-
//!   zero, so strips tile the image exactly without cumulative drift.
//! - Region IDs are clamped in index space first, converted to pixels, and
//!   padding is applied in pixel space afterwards.

use image::{imageops, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const DEFAULT_NORM_WIDTH: u32 = 1000;
pub const DEFAULT_NORM_HEIGHT: u32 = 1000;
pub const DEFAULT_PADDING_RATIO: f64 = 0.20;

/// The M×N region-division scheme plus normalization size and padding policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Count of horizontal strips (rows), M.
    pub rows: u32,
    /// Count of vertical strips (columns), N.
    pub cols: u32,
    #[serde(default = "default_norm_width")]
    pub norm_width: u32,
    #[serde(default = "default_norm_height")]
    pub norm_height: u32,
    #[serde(default = "default_padding_ratio")]
    pub padding_ratio: f64,
}

fn default_norm_width() -> u32 {
    DEFAULT_NORM_WIDTH
}
fn default_norm_height() -> u32 {
    DEFAULT_NORM_HEIGHT
}
fn default_padding_ratio() -> f64 {
    DEFAULT_PADDING_RATIO
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 9,
            cols: 9,
            norm_width: DEFAULT_NORM_WIDTH,
            norm_height: DEFAULT_NORM_HEIGHT,
            padding_ratio: DEFAULT_PADDING_RATIO,
        }
    }
}

impl GridSpec {
    pub fn new(rows: u32, cols: u32) -> Result<Self> {
        let g = GridSpec {
            rows,
            cols,
            ..GridSpec::default()
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_padding_ratio(mut self, ratio: f64) -> Result<Self> {
        self.padding_ratio = ratio;
        self.validate()?;
        Ok(self)
    }

    pub fn with_norm_size(mut self, width: u32, height: u32) -> Result<Self> {
        self.norm_width = width;
        self.norm_height = height;
        self.validate()?;
        Ok(self)
    }

    /// Every strip must be at least one pixel in both axes, and the padding
    /// ratio must be a fraction in [0, 1].
    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::InvalidInput(format!(
                "grid must have at least one strip per axis, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.norm_height < self.rows || self.norm_width < self.cols {
            return Err(Error::InvalidInput(format!(
                "normalized size {}x{} cannot fit {}x{} strips of >=1px",
                self.norm_width, self.norm_height, self.rows, self.cols
            )));
        }
        if !(0.0..=1.0).contains(&self.padding_ratio) || !self.padding_ratio.is_finite() {
            return Err(Error::InvalidInput(format!(
                "padding ratio {} outside [0, 1]",
                self.padding_ratio
            )));
        }
        Ok(())
    }

    /// Pixel y of the boundary below the k-th row strip (k in 0..=rows).
    pub fn row_boundary(&self, k: u32) -> u32 {
        strip_boundary(k, self.norm_height, self.rows)
    }

    /// Pixel x of the boundary right of the k-th column strip (k in 0..=cols).
    pub fn col_boundary(&self, k: u32) -> u32 {
        strip_boundary(k, self.norm_width, self.cols)
    }
}

/// `round(k·total/parts)` with round-half-away-from-zero, in exact integer
/// arithmetic. All quantities are non-negative so this is `floor(q + 1/2)`.
fn strip_boundary(k: u32, total: u32, parts: u32) -> u32 {
    let num = 2 * (k as u64) * (total as u64) + (parts as u64);
    (num / (2 * parts as u64)) as u32
}

/// Horizontal/vertical padding in pixels derived from the grid's ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddingPx {
    /// Horizontal padding: `round(ratio · W/cols)`.
    pub x: i64,
    /// Vertical padding: `round(ratio · H/rows)`.
    pub y: i64,
}

/// Compute pixel padding from the grid's padding ratio
/// (round-half-away-from-zero).
pub fn padding_pixels(grid: &GridSpec) -> PaddingPx {
    let px = (grid.padding_ratio * grid.norm_width as f64 / grid.cols as f64).round() as i64;
    let py = (grid.padding_ratio * grid.norm_height as f64 / grid.rows as f64).round() as i64;
    PaddingPx { x: px, y: py }
}

/// Half-open pixel rectangle `[x0,x1)×[y0,y1)` in normalized-image
/// coordinates, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl CropRect {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// Resolve row/column region IDs into a padded, clamped pixel rectangle.
///
/// Returns `None` (the absence signal) when either ID list is empty. IDs may
/// be unsorted, duplicated, or out of range: they are clamped into
/// `[1, rows]` / `[1, cols]`, the span `[min, max]` is taken per axis,
/// converted to pixels, padded, and finally clamped to the image bounds.
pub fn region_pixel_bounds(grid: &GridSpec, ids_v: &[i64], ids_h: &[i64]) -> Option<CropRect> {
    if ids_v.is_empty() || ids_h.is_empty() {
        return None;
    }
    let clamp_span = |ids: &[i64], parts: u32| -> (u32, u32) {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for &id in ids {
            let c = id.clamp(1, parts as i64);
            lo = lo.min(c);
            hi = hi.max(c);
        }
        (lo as u32, hi as u32)
    };
    let (start_v, end_v) = clamp_span(ids_v, grid.rows);
    let (start_h, end_h) = clamp_span(ids_h, grid.cols);
    let pad = padding_pixels(grid);

    let y0 = (grid.row_boundary(start_v - 1) as i64 - pad.y).max(0) as u32;
    let y1 = (grid.row_boundary(end_v) as i64 + pad.y).min(grid.norm_height as i64) as u32;
    let x0 = (grid.col_boundary(start_h - 1) as i64 - pad.x).max(0) as u32;
    let x1 = (grid.col_boundary(end_h) as i64 + pad.x).min(grid.norm_width as i64) as u32;

    Some(CropRect { x0, y0, x1, y1 })
}

/// Resize an image to the grid's normalized dimensions with bilinear
/// resampling. Aspect ratio is deliberately not preserved. A source already
/// at the target size passes through byte-identical.
pub fn normalize_image(image: &RgbImage, grid: &GridSpec) -> Result<RgbImage> {
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::InvalidInput("cannot normalize an empty image".into()));
    }
    if image.dimensions() == (grid.norm_width, grid.norm_height) {
        return Ok(image.clone());
    }
    Ok(imageops::resize(
        image,
        grid.norm_width,
        grid.norm_height,
        imageops::FilterType::Triangle,
    ))
}

/// Pixel-exact crop of `rect` out of `image`.
pub fn crop(image: &RgbImage, rect: &CropRect) -> Result<RgbImage> {
    if rect.x1 > image.width() || rect.y1 > image.height() || rect.x0 >= rect.x1 || rect.y0 >= rect.y1
    {
        return Err(Error::ContractViolation(format!(
            "crop rect [{},{})x[{},{}) outside {}x{} image",
            rect.x0,
            rect.x1,
            rect.y0,
            rect.y1,
            image.width(),
            image.height()
        )));
    }
    Ok(imageops::crop_imm(image, rect.x0, rect.y0, rect.width(), rect.height()).to_image())
}

/// Place a crop-space mask back into a zero full-image canvas at `rect`.
/// The popcount is preserved exactly.
pub fn paste_mask(crop_mask: &BinaryMask, rect: &CropRect, full_dims: (u32, u32)) -> Result<BinaryMask> {
    if crop_mask.dims() != (rect.width(), rect.height()) {
        return Err(Error::InvalidInput(format!(
            "crop mask {:?} does not match rect {}x{}",
            crop_mask.dims(),
            rect.width(),
            rect.height()
        )));
    }
    let (fw, fh) = full_dims;
    if rect.x1 > fw || rect.y1 > fh {
        return Err(Error::InvalidInput(format!(
            "rect [{},{})x[{},{}) outside full dims {}x{}",
            rect.x0, rect.x1, rect.y0, rect.y1, fw, fh
        )));
    }
    let mut full = BinaryMask::zeros(fw, fh);
    for cy in 0..crop_mask.height() {
        for cx in 0..crop_mask.width() {
            if crop_mask.get(cx, cy) {
                full.set(rect.x0 + cx, rect.y0 + cy, true);
            }
        }
    }
    Ok(full)
}

/// Restrict a full-image mask to `rect`, producing a crop-space mask.
pub fn restrict_mask(full: &BinaryMask, rect: &CropRect) -> Result<BinaryMask> {
    if rect.x1 > full.width() || rect.y1 > full.height() {
        return Err(Error::InvalidInput(format!(
            "rect [{},{})x[{},{}) outside mask {:?}",
            rect.x0,
            rect.x1,
            rect.y0,
            rect.y1,
            full.dims()
        )));
    }
    Ok(BinaryMask::from_fn(rect.width(), rect.height(), |x, y| {
        full.get(rect.x0 + x, rect.y0 + y)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn grid(rows: u32, cols: u32, ratio: f64) -> GridSpec {
        GridSpec::new(rows, cols).unwrap().with_padding_ratio(ratio).unwrap()
    }

    #[test]
    fn padding_examples() {
        assert_eq!(padding_pixels(&grid(9, 9, 0.2)), PaddingPx { x: 22, y: 22 });
        assert_eq!(padding_pixels(&grid(9, 9, 0.0)), PaddingPx { x: 0, y: 0 });
        assert_eq!(padding_pixels(&grid(5, 5, 0.2)), PaddingPx { x: 40, y: 40 });
    }

    #[test]
    fn bounds_worked_example_9x9() {
        let g = grid(9, 9, 0.2);
        let r = region_pixel_bounds(&g, &[4, 5, 6], &[5, 6, 7, 8]).unwrap();
        assert_eq!(r, CropRect { x0: 422, y0: 311, x1: 911, y1: 689 });
    }

    #[test]
    fn bounds_full_grid_saturates() {
        let g = grid(9, 9, 0.4);
        let ids_v: Vec<i64> = (1..=9).collect();
        let ids_h: Vec<i64> = (1..=9).collect();
        let r = region_pixel_bounds(&g, &ids_v, &ids_h).unwrap();
        assert_eq!(r, CropRect { x0: 0, y0: 0, x1: 1000, y1: 1000 });
    }

    #[test]
    fn bounds_empty_list_is_absent() {
        let g = grid(9, 9, 0.2);
        assert!(region_pixel_bounds(&g, &[], &[3]).is_none());
        assert!(region_pixel_bounds(&g, &[3], &[]).is_none());
    }

    #[test]
    fn bounds_clamp_out_of_range_ids() {
        let g = grid(9, 9, 0.0);
        // 0 and 99 clamp to 1 and 9.
        let r = region_pixel_bounds(&g, &[0, 99], &[-3, 12]).unwrap();
        assert_eq!(r, CropRect { x0: 0, y0: 0, x1: 1000, y1: 1000 });
    }

    #[test]
    fn bounds_unsorted_duplicates() {
        let g = grid(9, 9, 0.2);
        let a = region_pixel_bounds(&g, &[6, 4, 5, 4], &[8, 5, 5, 7]).unwrap();
        let b = region_pixel_bounds(&g, &[4, 5, 6], &[5, 6, 7, 8]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0, 5).is_err());
        assert!(GridSpec::new(5, 5).unwrap().with_padding_ratio(1.5).is_err());
        assert!(GridSpec::new(5, 5).unwrap().with_norm_size(4, 100).is_err());
        assert!(GridSpec::new(1, 1).is_ok());
    }

    #[test]
    fn normalize_identity_is_byte_exact() {
        let g = grid(9, 9, 0.2);
        let mut img = RgbImage::new(1000, 1000);
        img.put_pixel(123, 456, Rgb([7, 8, 9]));
        let out = normalize_image(&img, &g).unwrap();
        assert_eq!(out.as_raw(), img.as_raw());
    }

    #[test]
    fn normalize_resizes_any_shape() {
        let g = grid(9, 9, 0.2);
        let img = RgbImage::from_pixel(500, 2000, Rgb([10, 20, 30]));
        let out = normalize_image(&img, &g).unwrap();
        assert_eq!(out.dimensions(), (1000, 1000));
        // Flat input stays flat under bilinear resampling.
        assert!(out.pixels().all(|p| *p == Rgb([10, 20, 30])));
    }

    #[test]
    fn normalize_rejects_empty() {
        let g = grid(9, 9, 0.2);
        let img = RgbImage::new(0, 10);
        assert!(matches!(normalize_image(&img, &g), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn crop_examples() {
        let mut img = RgbImage::from_pixel(1000, 1000, Rgb([1, 2, 3]));
        img.put_pixel(422, 311, Rgb([42, 0, 0]));
        let rect = CropRect { x0: 422, y0: 311, x1: 911, y1: 689 };
        let out = crop(&img, &rect).unwrap();
        assert_eq!(out.dimensions(), (489, 378));
        assert_eq!(out.get_pixel(0, 0), &Rgb([42, 0, 0]));

        let full = CropRect { x0: 0, y0: 0, x1: 1000, y1: 1000 };
        assert_eq!(crop(&img, &full).unwrap().as_raw(), img.as_raw());

        let one = CropRect { x0: 422, y0: 311, x1: 423, y1: 312 };
        let px = crop(&img, &one).unwrap();
        assert_eq!(px.dimensions(), (1, 1));
        assert_eq!(px.get_pixel(0, 0), &Rgb([42, 0, 0]));
    }

    #[test]
    fn crop_out_of_bounds_rejected() {
        let img = RgbImage::new(100, 100);
        let rect = CropRect { x0: 50, y0: 50, x1: 101, y1: 90 };
        assert!(matches!(crop(&img, &rect), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn paste_examples() {
        let rect = CropRect { x0: 5, y0: 5, x1: 15, y1: 15 };
        let zeros = BinaryMask::zeros(10, 10);
        assert!(paste_mask(&zeros, &rect, (20, 20)).unwrap().is_blank());

        let ones = BinaryMask::ones(10, 10);
        let full = paste_mask(&ones, &rect, (20, 20)).unwrap();
        assert_eq!(full.popcount(), 100);
        assert!(full.get(5, 5) && full.get(14, 14));
        assert!(!full.get(4, 5) && !full.get(15, 14));
    }

    #[test]
    fn paste_dim_mismatch_rejected() {
        let rect = CropRect { x0: 0, y0: 0, x1: 4, y1: 4 };
        let m = BinaryMask::zeros(3, 4);
        assert!(matches!(paste_mask(&m, &rect, (10, 10)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn restrict_then_paste_roundtrip() {
        let rect = CropRect { x0: 2, y0: 3, x1: 9, y1: 11 };
        let full = BinaryMask::from_fn(16, 16, |x, y| rect.contains_point(x, y) && (x + y) % 2 == 0);
        let restricted = restrict_mask(&full, &rect).unwrap();
        let back = paste_mask(&restricted, &rect, (16, 16)).unwrap();
        assert_eq!(back, full);
    }
}
