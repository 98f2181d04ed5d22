//! Embedded 5×7 digit bitmaps for strip and cell labels.
//!
//! Rendered at an integer scale factor of 4, giving 28 px tall glyphs on the
//! default 1000×1000 canvas. Keeping the font in-crate pins the rendered
//! bytes, which the golden-image tests depend on.

/// 5-bit row patterns, MSB = leftmost column.
const GLYPHS: [[u8; 7]; 10] = [
    // 0
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    // 1
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
    // 2
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    // 3
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
    // 4
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    // 5
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    // 6
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    // 7
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    // 8
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    // 9
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

pub const GLYPH_COLS: u32 = 5;
pub const GLYPH_ROWS: u32 = 7;
/// Integer scale factor: glyphs render at 20×28 px.
pub const SCALE: u32 = 4;
/// Gap between adjacent glyphs, in scaled pixels.
pub const GLYPH_GAP: u32 = SCALE;

/// Scaled pixel width of a rendered digit string.
pub fn text_width(text: &str) -> u32 {
    let n = text.len() as u32;
    if n == 0 {
        return 0;
    }
    n * GLYPH_COLS * SCALE + (n - 1) * GLYPH_GAP
}

/// Scaled pixel height of any rendered digit string.
pub fn text_height() -> u32 {
    GLYPH_ROWS * SCALE
}

/// Whether the scaled glyph pixel at (x, y) within the text box is set.
/// `text` must be ASCII digits only.
pub fn text_pixel(text: &str, x: u32, y: u32) -> bool {
    let advance = GLYPH_COLS * SCALE + GLYPH_GAP;
    let idx = (x / advance) as usize;
    let within = x % advance;
    if within >= GLYPH_COLS * SCALE || idx >= text.len() {
        return false;
    }
    let digit = (text.as_bytes()[idx] - b'0') as usize;
    debug_assert!(digit < 10);
    let col = within / SCALE;
    let row = y / SCALE;
    if row >= GLYPH_ROWS {
        return false;
    }
    GLYPHS[digit][row as usize] & (1 << (GLYPH_COLS - 1 - col)) != 0
}
