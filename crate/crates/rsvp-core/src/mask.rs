//! Dense binary masks, the COCO-convention RLE codec, and polygon
//! rasterization.
//!
//! Masks are stored row-major, one byte per pixel (0 or 1). The RLE
//! interchange form is column-major alternating run counts, always starting
//! with the zero run — a 2×2 all-ones mask encodes as `[0, 4]`, an all-zero
//! `w×h` mask as `[w·h]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense binary mask with explicit dimensions. Row-major, values are 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl BinaryMask {
    /// All-zero mask.
    pub fn zeros(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![0; (width as usize) * (height as usize)],
        }
    }

    /// All-one mask.
    pub fn ones(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![1; (width as usize) * (height as usize)],
        }
    }

    /// Build from a row-major byte buffer; any nonzero byte becomes 1.
    pub fn from_raw(width: u32, height: u32, raw: Vec<u8>) -> Result<Self> {
        let n = (width as usize) * (height as usize);
        if raw.len() != n {
            return Err(Error::InvalidInput(format!(
                "mask buffer length {} does not match {}x{}",
                raw.len(),
                width,
                height
            )));
        }
        let data = raw.into_iter().map(|v| u8::from(v != 0)).collect();
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    /// Build by evaluating a predicate at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity((width as usize) * (height as usize));
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        BinaryMask {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y as usize) * (self.width as usize) + (x as usize)] != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[(y as usize) * (self.width as usize) + (x as usize)] = u8::from(value);
    }

    /// Row-major 0/1 bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    /// Number of set pixels.
    pub fn popcount(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    pub fn is_blank(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Pointwise OR with another mask of identical dimensions.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::InvalidInput(format!(
                "mask dims {:?} vs {:?} differ",
                self.dims(),
                other.dims()
            )));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a |= *b;
        }
        Ok(())
    }

    /// Exact intersection and union pixel counts against another mask.
    pub fn overlap_counts(&self, other: &BinaryMask) -> Result<(u64, u64)> {
        if self.dims() != other.dims() {
            return Err(Error::InvalidInput(format!(
                "mask dims {:?} vs {:?} differ",
                self.dims(),
                other.dims()
            )));
        }
        let mut inter = 0u64;
        let mut union = 0u64;
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            inter += u64::from(a & b);
            union += u64::from(a | b);
        }
        Ok((inter, union))
    }

    /// Nearest-neighbor resize. Masks stay strictly binary.
    ///
    /// Sampling uses pixel centers with exact integer arithmetic:
    /// `src = floor((2·dst + 1) · src_dim / (2 · dst_dim))`.
    pub fn resize_nearest(&self, width: u32, height: u32) -> BinaryMask {
        if (width, height) == self.dims() {
            return self.clone();
        }
        let sw = self.width as u64;
        let sh = self.height as u64;
        let src_col: Vec<usize> = (0..width as u64)
            .map(|x| (((2 * x + 1) * sw) / (2 * width as u64)) as usize)
            .collect();
        let mut out = Vec::with_capacity((width as usize) * (height as usize));
        for y in 0..height as u64 {
            let sy = (((2 * y + 1) * sh) / (2 * height as u64)) as usize;
            let row = &self.data[sy * self.width as usize..(sy + 1) * self.width as usize];
            out.extend(src_col.iter().map(|&sx| row[sx]));
        }
        BinaryMask {
            width,
            height,
            data: out,
        }
    }
}

/// Run-length encoded mask: the JSON interchange and wire form.
///
/// Counts are column-major and start with the number of leading zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u64>,
}

/// Encode a dense mask as column-major RLE counts starting with the zero run.
pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let (w, h) = mask.dims();
    let mut counts = Vec::new();
    let mut current: u8 = 0;
    let mut run: u64 = 0;
    for x in 0..w {
        for y in 0..h {
            let v = u8::from(mask.get(x, y));
            if v == current {
                run += 1;
            } else {
                counts.push(run);
                current = v;
                run = 1;
            }
        }
    }
    counts.push(run);
    if counts.is_empty() {
        counts.push(0);
    }
    RleMask {
        width: w,
        height: h,
        counts,
    }
}

/// Decode RLE counts back to a dense mask.
///
/// Fails with a format error when the counts do not sum to `width·height`.
pub fn rle_decode(rle: &RleMask) -> Result<BinaryMask> {
    let n = (rle.width as u64) * (rle.height as u64);
    let total: u64 = rle.counts.iter().sum();
    if total != n {
        return Err(Error::Format(format!(
            "rle counts sum to {} but mask is {}x{} = {}",
            total, rle.width, rle.height, n
        )));
    }
    let mut mask = BinaryMask::zeros(rle.width, rle.height);
    let mut flat: u64 = 0;
    let mut value = false;
    let h = rle.height as u64;
    for &c in &rle.counts {
        if value {
            for k in flat..flat + c {
                let x = (k / h) as u32;
                let y = (k % h) as u32;
                mask.set(x, y, true);
            }
        }
        flat += c;
        value = !value;
    }
    Ok(mask)
}

/// Rasterize one or more polygon rings into a mask using the even-odd rule.
///
/// Each ring is a flat `[x0, y0, x1, y1, ...]` coordinate array. All rings
/// participate in a single even-odd fill, so nested rings cut holes. A pixel
/// is set when its center `(x+0.5, y+0.5)` is inside.
pub fn rasterize_polygons(rings: &[Vec<f64>], width: u32, height: u32) -> Result<BinaryMask> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("zero-size raster target".into()));
    }
    let mut edges: Vec<(f64, f64, f64, f64)> = Vec::new();
    for ring in rings {
        if ring.len() % 2 != 0 {
            return Err(Error::Format(format!(
                "polygon ring has odd coordinate count {}",
                ring.len()
            )));
        }
        if ring.len() < 6 {
            return Err(Error::Format(format!(
                "polygon ring has {} points, need at least 3",
                ring.len() / 2
            )));
        }
        let pts: Vec<(f64, f64)> = ring.chunks(2).map(|c| (c[0], c[1])).collect();
        for i in 0..pts.len() {
            let (x1, y1) = pts[i];
            let (x2, y2) = pts[(i + 1) % pts.len()];
            if y1 != y2 {
                edges.push((x1, y1, x2, y2));
            }
        }
    }

    let mut mask = BinaryMask::zeros(width, height);
    let mut xs: Vec<f64> = Vec::new();
    for y in 0..height {
        let yc = y as f64 + 0.5;
        xs.clear();
        for &(x1, y1, x2, y2) in &edges {
            let (ylo, yhi) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
            // Half-open [ylo, yhi) so shared vertices count once.
            if ylo <= yc && yc < yhi {
                xs.push(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite coords"));
        for pair in xs.chunks(2) {
            if pair.len() < 2 {
                break;
            }
            // Pixel centers in [xa, xb).
            let x_min = (pair[0] - 0.5).ceil().max(0.0) as i64;
            let x_max = ((pair[1] - 0.5).ceil() as i64).min(width as i64);
            for x in x_min..x_max {
                mask.set(x as u32, y, true);
            }
        }
    }
    Ok(mask)
}
