//! Converters from upstream dataset formats into the internal manifest.
//!
//! Two importers ship: one for LISA-style reasoning-segmentation
//! distributions (per-image JSON with labeled polygon shapes and a list of
//! query sentences, image alongside), one for COCO instance-segmentation
//! JSON (polygons, uncompressed RLE, or compressed RLE count strings).
//! Image paths in the produced manifest stay relative to the source
//! directory, which therefore serves as the corpus root at eval time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::mask::RleMask;

use super::{AnnotationData, AnnotationField, Manifest, ManifestSample, Split};

/// What an importer did, including per-file skips with reasons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportSummary {
    pub manifest_path: String,
    pub imported: usize,
    pub skipped: Vec<SkippedEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub source: String,
    pub reason: String,
}

#[derive(Deserialize)]
struct ReasonSegShape {
    #[serde(default)]
    label: String,
    points: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct ReasonSegEntry {
    #[serde(default)]
    text: Vec<String>,
    #[serde(default)]
    is_sentence: bool,
    #[serde(default)]
    shapes: Vec<ReasonSegShape>,
}

/// Import a directory of per-image reasoning-segmentation JSON files.
///
/// Each query sentence becomes its own sample (`<stem>-q<j>`). Shapes
/// labeled `target` form the ground truth; when no shape carries that label,
/// all shapes except ones labeled `ignore` are used. With `default_split`
/// set to `test`, samples refine into `short_query`/`long_query` based on
/// the entry's sentence flag.
pub fn import_reasonseg(src_dir: &Path, out_manifest: &Path, default_split: Split) -> Result<ImportSummary> {
    let mut json_files: Vec<_> = std::fs::read_dir(src_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    json_files.sort();

    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for path in json_files {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        match import_reasonseg_entry(src_dir, &path, &stem, default_split) {
            Ok(mut s) => samples.append(&mut s),
            Err(e) => skipped.push(SkippedEntry {
                source: stem,
                reason: e.to_string(),
            }),
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no importable samples under {} ({} skipped)",
            src_dir.display(),
            skipped.len()
        )));
    }
    let manifest = Manifest {
        version: super::MANIFEST_VERSION,
        samples,
    };
    manifest.write(out_manifest)?;
    Ok(ImportSummary {
        manifest_path: out_manifest.display().to_string(),
        imported: manifest_len(out_manifest)?,
        skipped,
    })
}

fn manifest_len(path: &Path) -> Result<usize> {
    Ok(Manifest::read(path)?.samples.len())
}

fn import_reasonseg_entry(
    src_dir: &Path,
    json_path: &Path,
    stem: &str,
    default_split: Split,
) -> Result<Vec<ManifestSample>> {
    let entry: ReasonSegEntry = serde_json::from_str(&std::fs::read_to_string(json_path)?)
        .map_err(|e| Error::Format(format!("bad json: {e}")))?;
    if entry.text.is_empty() {
        return Err(Error::Format("no query text".into()));
    }
    let image_rel = ["jpg", "jpeg", "png"]
        .iter()
        .map(|ext| format!("{stem}.{ext}"))
        .find(|rel| src_dir.join(rel).is_file())
        .ok_or_else(|| Error::Format("no sibling image".into()))?;
    let (w, h) = image::image_dimensions(src_dir.join(&image_rel))
        .map_err(|e| Error::Format(format!("unreadable image: {e}")))?;

    let has_target = entry.shapes.iter().any(|s| s.label.eq_ignore_ascii_case("target"));
    let rings: Vec<Vec<f64>> = entry
        .shapes
        .iter()
        .filter(|s| {
            if has_target {
                s.label.eq_ignore_ascii_case("target")
            } else {
                !s.label.to_ascii_lowercase().contains("ignore")
            }
        })
        .map(|s| s.points.iter().flat_map(|p| [p[0], p[1]]).collect())
        .collect();
    let annotation = if rings.is_empty() {
        None
    } else {
        Some(AnnotationField::One(AnnotationData::Polygon(rings)))
    };

    let split = match default_split {
        Split::Test => {
            if entry.is_sentence {
                Split::LongQuery
            } else {
                Split::ShortQuery
            }
        }
        other => other,
    };

    Ok(entry
        .text
        .iter()
        .enumerate()
        .map(|(j, query)| ManifestSample {
            id: format!("{stem}-q{j}"),
            image: image_rel.clone(),
            query: query.clone(),
            split,
            category: None,
            width: w,
            height: h,
            annotation: annotation.clone(),
        })
        .collect())
}

#[derive(Deserialize)]
struct CocoRoot {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    category_id: u64,
    segmentation: Value,
}

/// Import COCO instance-segmentation JSON. One sample is produced per
/// (image, category) pair, holding every instance of that category as a
/// separate ground-truth mask; the query names the category.
pub fn import_coco(annotations_path: &Path, out_manifest: &Path, split: Split) -> Result<ImportSummary> {
    let root: CocoRoot = serde_json::from_str(&std::fs::read_to_string(annotations_path)?)
        .map_err(|e| Error::Format(format!("bad coco json: {e}")))?;
    let images: BTreeMap<u64, &CocoImage> = root.images.iter().map(|i| (i.id, i)).collect();
    let categories: BTreeMap<u64, &str> = root
        .categories
        .iter()
        .map(|c| (c.id, c.name.as_str()))
        .collect();

    let mut grouped: BTreeMap<(u64, u64), Vec<AnnotationData>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (k, ann) in root.annotations.iter().enumerate() {
        let Some(img) = images.get(&ann.image_id) else {
            skipped.push(SkippedEntry {
                source: format!("annotation #{k}"),
                reason: format!("unknown image_id {}", ann.image_id),
            });
            continue;
        };
        match decode_coco_segmentation(&ann.segmentation, img.width, img.height) {
            Ok(data) => grouped
                .entry((ann.image_id, ann.category_id))
                .or_default()
                .push(data),
            Err(e) => skipped.push(SkippedEntry {
                source: format!("annotation #{k}"),
                reason: e.to_string(),
            }),
        }
    }
    if grouped.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no importable annotations in {} ({} skipped)",
            annotations_path.display(),
            skipped.len()
        )));
    }

    let mut samples = Vec::new();
    for ((image_id, category_id), anns) in grouped {
        let img = images[&image_id];
        let cat = categories
            .get(&category_id)
            .copied()
            .unwrap_or("unknown");
        let slug: String = cat
            .chars()
            .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
            .collect();
        samples.push(ManifestSample {
            id: format!("img{image_id}-{slug}"),
            image: img.file_name.clone(),
            query: format!("the {cat}"),
            split,
            category: Some(cat.to_string()),
            width: img.width,
            height: img.height,
            annotation: Some(AnnotationField::Many(anns)),
        });
    }
    let manifest = Manifest {
        version: super::MANIFEST_VERSION,
        samples,
    };
    manifest.write(out_manifest)?;
    Ok(ImportSummary {
        manifest_path: out_manifest.display().to_string(),
        imported: manifest.samples.len(),
        skipped,
    })
}

fn decode_coco_segmentation(seg: &Value, width: u32, height: u32) -> Result<AnnotationData> {
    match seg {
        // Polygon form: list of flat coordinate rings.
        Value::Array(rings) => {
            let mut out = Vec::with_capacity(rings.len());
            for ring in rings {
                let coords: Option<Vec<f64>> = ring
                    .as_array()
                    .map(|a| a.iter().filter_map(Value::as_f64).collect());
                match coords {
                    Some(c) if c.len() >= 6 && c.len() % 2 == 0 => out.push(c),
                    _ => return Err(Error::Format("bad polygon ring".into())),
                }
            }
            Ok(AnnotationData::Polygon(out))
        }
        Value::Object(obj) => {
            let size = obj
                .get("size")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Format("rle without size".into()))?;
            let (h, w) = match (size.first().and_then(Value::as_u64), size.get(1).and_then(Value::as_u64)) {
                (Some(h), Some(w)) => (h as u32, w as u32),
                _ => return Err(Error::Format("bad rle size".into())),
            };
            if (w, h) != (width, height) {
                return Err(Error::Format(format!(
                    "rle size {w}x{h} does not match image {width}x{height}"
                )));
            }
            let counts = match obj.get("counts") {
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| v.as_u64().ok_or_else(|| Error::Format("negative rle count".into())))
                    .collect::<Result<Vec<u64>>>()?,
                Some(Value::String(s)) => decode_coco_count_string(s)?,
                _ => return Err(Error::Format("rle without counts".into())),
            };
            Ok(AnnotationData::Rle(RleMask {
                width: w,
                height: h,
                counts,
            }))
        }
        _ => Err(Error::Format("unrecognized segmentation value".into())),
    }
}

/// Decode COCO's compressed count string: 5-bit groups with a continuation
/// bit, sign-extended, and delta-coded against the count two places back.
pub fn decode_coco_count_string(s: &str) -> Result<Vec<u64>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            if p >= bytes.len() {
                return Err(Error::Format("truncated rle count string".into()));
            }
            let c = bytes[p] as i64 - 48;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            let more = c & 0x20 != 0;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * (k + 1));
                }
                break;
            }
            k += 1;
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        counts.push(x);
    }
    counts
        .into_iter()
        .map(|c| u64::try_from(c).map_err(|_| Error::Format("negative rle count".into())))
        .collect()
}
