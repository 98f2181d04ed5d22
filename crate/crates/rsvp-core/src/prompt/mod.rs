//! Region-aware visual prompts and chain-of-thought text prompts.
//!
//! The split renderer produces two annotated copies of a normalized image:
//! one with the M horizontal strips separated and labeled, one with the N
//! vertical strips. The grid renderer combines both line sets and labels
//! cells with linear indices. Line positions come from the same strip
//! boundary function the geometry module uses, so visual prompts and pixel
//! bounds can never drift apart.
//!
//! Rendering constants are fixed (3 px green lines, 28 px white digits on
//! black label patches) to keep golden images stable.

mod font;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridSpec;

pub const LINE_COLOR: Rgb<u8> = Rgb([0, 255, 0]);
pub const LINE_THICKNESS: u32 = 3;
pub const LABEL_FG: Rgb<u8> = Rgb([255, 255, 255]);
pub const LABEL_BG: Rgb<u8> = Rgb([0, 0, 0]);
/// Padding between glyphs and the edge of the black label patch.
const LABEL_PAD: u32 = 4;

/// The instruction sentence that defines the absence path. Variant A embeds
/// this verbatim; tests assert on it.
pub const ABSENCE_INSTRUCTION: &str = "If the object of interest is absent from the image, return empty ids_v and ids_h lists and still provide your rationale.";

/// Step headers of the hierarchical prompt variant.
pub const STEP_HEADERS: [&str; 4] = [
    "Step 1 - Object class",
    "Step 2 - Attributes",
    "Step 3 - Region IDs",
    "Step 4 - Rationale",
];

const SYSTEM_TEMPLATE: &str = include_str!("templates/system.txt");
const COT_A_TEMPLATE: &str = include_str!("templates/cot_a.txt");
const COT_B_TEMPLATE: &str = include_str!("templates/cot_b.txt");

/// Which chain-of-thought prompt wording to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptVariant {
    /// Hierarchical four-step prompt.
    A,
    /// Plain task statement with the same output schema.
    B,
}

/// The two annotated images of the split visual prompt.
pub struct AnnotatedImagePair {
    /// M strips, M−1 separator lines, labels 1..M top to bottom.
    pub row_annotated: RgbImage,
    /// N strips, N−1 separator lines, labels 1..N left to right.
    pub col_annotated: RgbImage,
}

/// Text halves of a prompt, before images are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptText {
    pub system_text: String,
    pub user_text: String,
}

/// A named, PNG-encoded image attachment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptImage {
    pub name: String,
    #[serde(with = "png_base64")]
    pub png: Vec<u8>,
}

/// Everything sent to the MLLM for one sample: text plus ordered images
/// (raw image first, then annotated images).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub images: Vec<PromptImage>,
}

mod png_base64 {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(serde::de::Error::custom)
    }
}

fn check_normalized(image: &RgbImage, grid: &GridSpec) -> Result<()> {
    if image.dimensions() != (grid.norm_width, grid.norm_height) {
        return Err(Error::InvalidInput(format!(
            "image is {}x{} but grid expects normalized {}x{}",
            image.width(),
            image.height(),
            grid.norm_width,
            grid.norm_height
        )));
    }
    Ok(())
}

fn draw_hline(img: &mut RgbImage, y: u32) {
    let half = LINE_THICKNESS / 2;
    let y_lo = y.saturating_sub(half);
    let y_hi = (y + half + 1).min(img.height());
    for yy in y_lo..y_hi {
        for x in 0..img.width() {
            img.put_pixel(x, yy, LINE_COLOR);
        }
    }
}

fn draw_vline(img: &mut RgbImage, x: u32) {
    let half = LINE_THICKNESS / 2;
    let x_lo = x.saturating_sub(half);
    let x_hi = (x + half + 1).min(img.width());
    for xx in x_lo..x_hi {
        for y in 0..img.height() {
            img.put_pixel(xx, y, LINE_COLOR);
        }
    }
}

/// White digits on a black patch, centered at (cx, cy), clamped in-bounds.
fn draw_label(img: &mut RgbImage, text: &str, cx: u32, cy: u32) {
    let tw = font::text_width(text);
    let th = font::text_height();
    let pw = tw + 2 * LABEL_PAD;
    let ph = th + 2 * LABEL_PAD;
    let x0 = cx.saturating_sub(pw / 2).min(img.width().saturating_sub(pw));
    let y0 = cy.saturating_sub(ph / 2).min(img.height().saturating_sub(ph));
    for y in 0..ph {
        for x in 0..pw {
            img.put_pixel(x0 + x, y0 + y, LABEL_BG);
        }
    }
    for y in 0..th {
        for x in 0..tw {
            if font::text_pixel(text, x, y) {
                img.put_pixel(x0 + LABEL_PAD + x, y0 + LABEL_PAD + y, LABEL_FG);
            }
        }
    }
}

/// Render the two split visual prompts for a normalized image.
pub fn render_split_prompts(image: &RgbImage, grid: &GridSpec) -> Result<AnnotatedImagePair> {
    check_normalized(image, grid)?;
    let mut rows = image.clone();
    for k in 1..grid.rows {
        draw_hline(&mut rows, grid.row_boundary(k));
    }
    for i in 1..=grid.rows {
        let cy = (grid.row_boundary(i - 1) + grid.row_boundary(i)) / 2;
        draw_label(&mut rows, &i.to_string(), grid.norm_width / 2, cy);
    }

    let mut cols = image.clone();
    for k in 1..grid.cols {
        draw_vline(&mut cols, grid.col_boundary(k));
    }
    for j in 1..=grid.cols {
        let cx = (grid.col_boundary(j - 1) + grid.col_boundary(j)) / 2;
        draw_label(&mut cols, &j.to_string(), cx, grid.norm_height / 2);
    }

    Ok(AnnotatedImagePair {
        row_annotated: rows,
        col_annotated: cols,
    })
}

/// Render the single-image grid visual prompt: both line sets, cells labeled
/// with linear indices 1..rows·cols in row-major order.
pub fn render_grid_prompt(image: &RgbImage, grid: &GridSpec) -> Result<RgbImage> {
    check_normalized(image, grid)?;
    let mut out = image.clone();
    for k in 1..grid.rows {
        draw_hline(&mut out, grid.row_boundary(k));
    }
    for k in 1..grid.cols {
        draw_vline(&mut out, grid.col_boundary(k));
    }
    for i in 1..=grid.rows {
        let cy = (grid.row_boundary(i - 1) + grid.row_boundary(i)) / 2;
        for j in 1..=grid.cols {
            let cx = (grid.col_boundary(j - 1) + grid.col_boundary(j)) / 2;
            let idx = (i - 1) * grid.cols + j;
            draw_label(&mut out, &idx.to_string(), cx, cy);
        }
    }
    Ok(out)
}

/// Build the system/user text for a query against a grid.
///
/// Variant A walks the model through the four reasoning steps; variant B
/// states the task directly. Both embed the grid dimensions, the absence
/// path, and the JSON output schema, and contain the query exactly once.
pub fn build_cot_prompt(query: &str, variant: PromptVariant, grid: &GridSpec) -> Result<PromptText> {
    if query.trim().is_empty() {
        return Err(Error::InvalidInput("empty query".into()));
    }
    let template = match variant {
        PromptVariant::A => COT_A_TEMPLATE,
        PromptVariant::B => COT_B_TEMPLATE,
    };
    let user_text = template
        .replace("{M}", &grid.rows.to_string())
        .replace("{N}", &grid.cols.to_string())
        .replace("{query}", query);
    Ok(PromptText {
        system_text: SYSTEM_TEMPLATE.trim_end().to_string(),
        user_text,
    })
}

/// PNG-encode an image deterministically.
pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    image
        .write_to(&mut std::io::Cursor::new(&mut buf), image::ImageFormat::Png)
        .map_err(Error::Image)?;
    Ok(buf)
}

/// Decode a PNG/JPEG byte buffer to RGB.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    Ok(image::load_from_memory(bytes)?.to_rgb8())
}
