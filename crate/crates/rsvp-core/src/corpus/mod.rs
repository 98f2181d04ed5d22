//! Dataset ingestion: one versioned manifest schema for images, queries,
//! and ground-truth masks (polygon or RLE), plus converters from upstream
//! formats and a deterministic synthetic corpus generator for verification.

mod import;
mod synthetic;

pub use import::{import_coco, import_reasonseg, ImportSummary};
pub use synthetic::{make_synthetic_corpus, CoverMode, ExpectedSample, ShapeKind, SyntheticCorpus, SyntheticSpec};

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{rasterize_polygons, rle_decode, BinaryMask, RleMask};

pub const MANIFEST_VERSION: u32 = 1;

/// Corpus split labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Val,
    Test,
    ShortQuery,
    LongQuery,
}

/// One ground-truth annotation in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum AnnotationData {
    /// Flat `[x0,y0,x1,y1,...]` rings, filled together with the even-odd rule.
    Polygon(Vec<Vec<f64>>),
    Rle(RleMask),
}

/// `annotation` accepts a single object or a list of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnnotationField {
    One(AnnotationData),
    Many(Vec<AnnotationData>),
}

impl AnnotationField {
    fn items(&self) -> Vec<&AnnotationData> {
        match self {
            AnnotationField::One(a) => vec![a],
            AnnotationField::Many(list) => list.iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSample {
    pub id: String,
    /// Image path relative to the corpus root.
    pub image: String,
    pub query: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub width: u32,
    pub height: u32,
    /// Absent or null for absence samples (empty ground truth).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<AnnotationField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub samples: Vec<ManifestSample>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("malformed manifest {}: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// A loaded, validated sample. Image pixels load lazily via `load_image`.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image_path: PathBuf,
    pub query: String,
    pub split: Split,
    pub category: Option<String>,
    pub width: u32,
    pub height: u32,
    /// Ground-truth instances at native resolution; empty for absence samples.
    pub gt_masks: Vec<BinaryMask>,
}

impl Sample {
    /// Union of all ground-truth instances (the scoring mask). Empty ground
    /// truth yields an all-zero mask.
    pub fn gt_union(&self) -> BinaryMask {
        let mut union = BinaryMask::zeros(self.width, self.height);
        for m in &self.gt_masks {
            // Dims validated at load.
            let _ = union.union_with(m);
        }
        union
    }

    pub fn load_image(&self) -> Result<image::RgbImage> {
        let img = image::open(&self.image_path)
            .map_err(|e| Error::Format(format!("cannot decode {}: {e}", self.image_path.display())))?
            .to_rgb8();
        if img.dimensions() != (self.width, self.height) {
            return Err(Error::Format(format!(
                "{} is {}x{} but manifest says {}x{}",
                self.image_path.display(),
                img.width(),
                img.height(),
                self.width,
                self.height
            )));
        }
        Ok(img)
    }
}

/// One sample that failed to load, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleLoadError {
    pub id: String,
    pub error: String,
}

/// Loader output: valid samples in manifest order plus per-sample failures.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub samples: Vec<Sample>,
    pub errors: Vec<SampleLoadError>,
    pub manifest_path: PathBuf,
}

/// Load and validate a corpus. Per-sample problems (missing image, bad
/// annotation, duplicate ID) are reported, not fatal; a corpus with zero
/// valid samples is fatal.
pub fn load_corpus(root: &Path, manifest_path: &Path) -> Result<LoadedCorpus> {
    let manifest = Manifest::read(manifest_path)?;
    if manifest.samples.is_empty() {
        return Err(Error::InvalidInput(format!(
            "manifest {} lists no samples",
            manifest_path.display()
        )));
    }
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for entry in &manifest.samples {
        match load_sample(root, entry, &mut seen) {
            Ok(s) => samples.push(s),
            Err(e) => errors.push(SampleLoadError {
                id: entry.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no valid samples in {} ({} errors, first: {})",
            manifest_path.display(),
            errors.len(),
            errors.first().map(|e| e.error.as_str()).unwrap_or("-")
        )));
    }
    Ok(LoadedCorpus {
        samples,
        errors,
        manifest_path: manifest_path.to_path_buf(),
    })
}

fn load_sample(root: &Path, entry: &ManifestSample, seen: &mut HashSet<String>) -> Result<Sample> {
    if !seen.insert(entry.id.clone()) {
        return Err(Error::Format(format!("duplicate sample id {}", entry.id)));
    }
    if entry.width == 0 || entry.height == 0 {
        return Err(Error::Format("zero image dimensions".into()));
    }
    let image_path = root.join(&entry.image);
    if !image_path.is_file() {
        return Err(Error::Format(format!("missing image {}", image_path.display())));
    }
    // Cheap header check keeps mask/image dims consistent without decoding.
    let (iw, ih) = image::image_dimensions(&image_path)
        .map_err(|e| Error::Format(format!("unreadable image {}: {e}", image_path.display())))?;
    if (iw, ih) != (entry.width, entry.height) {
        return Err(Error::Format(format!(
            "image is {iw}x{ih} but manifest says {}x{}",
            entry.width, entry.height
        )));
    }
    let mut gt_masks = Vec::new();
    if let Some(field) = &entry.annotation {
        for ann in field.items() {
            gt_masks.push(decode_annotation(ann, entry.width, entry.height)?);
        }
    }
    Ok(Sample {
        id: entry.id.clone(),
        image_path,
        query: entry.query.clone(),
        split: entry.split,
        category: entry.category.clone(),
        width: entry.width,
        height: entry.height,
        gt_masks,
    })
}

fn decode_annotation(ann: &AnnotationData, width: u32, height: u32) -> Result<BinaryMask> {
    match ann {
        AnnotationData::Polygon(rings) => rasterize_polygons(rings, width, height),
        AnnotationData::Rle(rle) => {
            if (rle.width, rle.height) != (width, height) {
                return Err(Error::Format(format!(
                    "rle mask is {}x{} but sample is {width}x{height}",
                    rle.width, rle.height
                )));
            }
            rle_decode(rle)
        }
    }
}
