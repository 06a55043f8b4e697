//! On-disk record formats and image IO.
//!
//! All record files are versioned JSON documents with a top-level
//! `version` field and per-frame arrays. Writers go through a temp file
//! and an atomic rename so a failed run never leaves partial output.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::CalibrationResult;
use crate::dictionary::{descriptor_of, DescriptorSpec, DictEntry, TemplateDictionary};
use crate::geometry::{Homography, ImageFrame};
use crate::localization::{Detection, PlayerGraph, PlayerLocalization};
use crate::raster::{TopViewImage, TopViewMode, ZoneSegmentation};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: record {record}: invalid field {field}: {message}")]
    Invalid {
        path: PathBuf,
        record: usize,
        field: &'static str,
        message: String,
    },
    #[error("{path}: unsupported version {found} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl FormatError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Exit-code class: 2 for format errors, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            FormatError::Io { .. } => 4,
            _ => 2,
        }
    }
}

/// One calibrated frame. The homography is stored as 9 row-major
/// decimals and re-normalized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub game_id: String,
    pub half: u8,
    pub frame_index: u64,
    pub homography: [f64; 9],
    pub relevance: u8,
    pub residual: f64,
    pub template_index: usize,
}

impl FrameRecord {
    pub fn from_result(
        game_id: &str,
        half: u8,
        frame_index: u64,
        r: &CalibrationResult,
    ) -> Self {
        Self {
            game_id: game_id.to_string(),
            half,
            frame_index,
            homography: r.homography.to_row_major(),
            relevance: r.relevance,
            residual: r.residual,
            template_index: r.template_index,
        }
    }

    pub fn to_result(&self) -> Result<CalibrationResult, crate::geometry::GeometryError> {
        Ok(CalibrationResult {
            homography: Homography::from_row_major(self.homography)?,
            relevance: self.relevance,
            residual: self.residual,
            template_index: self.template_index,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub version: u32,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub game_id: String,
    pub half: u8,
    pub frame_index: u64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionsFile {
    pub version: u32,
    pub frames: Vec<DetectionFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationFrame {
    pub game_id: String,
    pub half: u8,
    pub frame_index: u64,
    pub players: Vec<PlayerLocalization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationsFile {
    pub version: u32,
    pub frames: Vec<LocalizationFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFrame {
    pub game_id: String,
    pub half: u8,
    pub frame_index: u64,
    pub graph: PlayerGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphsFile {
    pub version: u32,
    pub frames: Vec<GraphFrame>,
}

/// Timestamps are stored as milliseconds from the start of the half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub game_id: String,
    pub half: u8,
    pub class: String,
    pub time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationsFile {
    pub version: u32,
    pub actions: Vec<ActionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub game_id: String,
    pub half: u8,
    pub class: String,
    pub time_ms: u64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionsFile {
    pub version: u32,
    pub predictions: Vec<PredictionRecord>,
}

pub trait Validate {
    fn version(&self) -> u32;
    fn validate(&self, path: &Path) -> Result<(), FormatError>;
}

impl Validate for CalibrationFile {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        for (i, f) in self.frames.iter().enumerate() {
            if f.relevance > 1 {
                return Err(invalid(path, i, "relevance", "must be 0 or 1"));
            }
            if f.residual < 0.0 {
                return Err(invalid(path, i, "residual", "must be non-negative"));
            }
            if f.relevance == 1 && Homography::from_row_major(f.homography).is_err() {
                return Err(invalid(path, i, "homography", "not invertible"));
            }
        }
        Ok(())
    }
}

impl Validate for DetectionsFile {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        for (i, frame) in self.frames.iter().enumerate() {
            for d in &frame.detections {
                let (x1, y1, x2, y2) = d.bbox;
                if !(x1 < x2 && y1 < y2) {
                    return Err(invalid(path, i, "bbox", "requires x1 < x2 and y1 < y2"));
                }
            }
        }
        Ok(())
    }
}

impl Validate for LocalizationsFile {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        for (i, frame) in self.frames.iter().enumerate() {
            for p in &frame.players {
                if p.bbox_area_px <= 0.0 {
                    return Err(invalid(path, i, "bbox_area_px", "must be positive"));
                }
            }
        }
        Ok(())
    }
}

impl Validate for GraphsFile {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        for (i, frame) in self.frames.iter().enumerate() {
            let n = frame.graph.nodes.len();
            for &(a, b) in &frame.graph.edges {
                if a >= b || b >= n {
                    return Err(invalid(path, i, "edges", "must satisfy i < j < node count"));
                }
            }
        }
        Ok(())
    }
}

impl Validate for AnnotationsFile {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        for (i, a) in self.actions.iter().enumerate() {
            if !crate::eval::CLASS_REGISTRY.contains(&a.class.as_str()) {
                return Err(invalid(path, i, "class", &format!("unknown '{}'", a.class)));
            }
        }
        Ok(())
    }
}

impl Validate for PredictionsFile {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        for (i, p) in self.predictions.iter().enumerate() {
            if !crate::eval::CLASS_REGISTRY.contains(&p.class.as_str()) {
                return Err(invalid(path, i, "class", &format!("unknown '{}'", p.class)));
            }
            if !(0.0..=1.0).contains(&p.confidence) {
                return Err(invalid(path, i, "confidence", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

fn invalid(path: &Path, record: usize, field: &'static str, message: &str) -> FormatError {
    FormatError::Invalid {
        path: path.to_path_buf(),
        record,
        field,
        message: message.to_string(),
    }
}

/// Reads and validates a versioned JSON document.
pub fn read_doc<T: DeserializeOwned + Validate>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_doc(path, &text)
}

/// Parses and validates a versioned JSON document from text already in
/// memory. `path` only labels diagnostics.
pub fn parse_doc<T: DeserializeOwned + Validate>(path: &Path, text: &str) -> Result<T, FormatError> {
    let doc: T = serde_json::from_str(text).map_err(|e| FormatError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.version() != FORMAT_VERSION {
        return Err(FormatError::Version {
            path: path.to_path_buf(),
            found: doc.version(),
            expected: FORMAT_VERSION,
        });
    }
    doc.validate(path)?;
    Ok(doc)
}

/// Serializes to a sibling temp file, then renames into place.
pub fn write_doc<T: Serialize>(path: &Path, doc: &T) -> Result<(), FormatError> {
    let json = serde_json::to_string_pretty(doc).expect("serialization is infallible");
    write_atomic(path, json.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| FormatError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| FormatError::io(&tmp, e))?;
        f.sync_all().map_err(|e| FormatError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| FormatError::io(path, e))
}

// ---------------------------------------------------------------------
// Images.

/// Writes a zone segmentation as an 8-bit grayscale PNG of raw labels.
pub fn save_segmentation_png(path: &Path, seg: &ZoneSegmentation) -> Result<(), FormatError> {
    let img = image::GrayImage::from_raw(seg.width_px, seg.height_px, seg.labels.clone())
        .expect("label buffer matches dimensions");
    img.save(path).map_err(|e| FormatError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_segmentation_png(path: &Path) -> Result<ZoneSegmentation, FormatError> {
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_segmentation_png(path, &bytes)
}

/// Decodes a segmentation PNG from bytes already in memory. `path` only
/// labels diagnostics.
pub fn decode_segmentation_png(path: &Path, bytes: &[u8]) -> Result<ZoneSegmentation, FormatError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| FormatError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .into_luma8();
    Ok(ZoneSegmentation {
        width_px: img.width(),
        height_px: img.height(),
        labels: img.into_raw(),
    })
}

/// Writes a top view. Color compositions become one RGB PNG. Binary
/// channels become either one RGB PNG with values {0, 255} or, with
/// `split_bits`, three 1-bit PNGs suffixed `_lines`, `_polygon`,
/// `_players`.
pub fn save_top_view(path: &Path, img: &TopViewImage, split_bits: bool) -> Result<(), FormatError> {
    match img.mode {
        TopViewMode::ColorComposition => {
            let rgb = image::RgbImage::from_raw(img.size_px, img.size_px, img.data.clone())
                .expect("pixel buffer matches dimensions");
            rgb.save(path).map_err(|e| FormatError::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        }
        TopViewMode::BinaryChannels if !split_bits => {
            let data: Vec<u8> = img.data.iter().map(|&v| v * 255).collect();
            let rgb = image::RgbImage::from_raw(img.size_px, img.size_px, data)
                .expect("pixel buffer matches dimensions");
            rgb.save(path).map_err(|e| FormatError::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        }
        TopViewMode::BinaryChannels => {
            let stem = path.with_extension("");
            let stem = stem.to_string_lossy();
            for (c, name) in ["lines", "polygon", "players"].iter().enumerate() {
                let out = PathBuf::from(format!("{stem}_{name}.png"));
                save_bitplane_png(&out, img, c as u32)?;
            }
            Ok(())
        }
    }
}

/// Encodes one channel of a binary top view as a true 1-bit PNG.
fn save_bitplane_png(path: &Path, img: &TopViewImage, channel: u32) -> Result<(), FormatError> {
    let size = img.size_px;
    let row_bytes = size.div_ceil(8) as usize;
    let mut packed = vec![0u8; row_bytes * size as usize];
    for y in 0..size {
        for x in 0..size {
            if img.get(x, y, channel) != 0 {
                packed[y as usize * row_bytes + (x / 8) as usize] |= 0x80 >> (x % 8);
            }
        }
    }
    let img_err = |e: &dyn std::fmt::Display| FormatError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let file = fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), size, size);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let mut writer = enc.write_header().map_err(|e| img_err(&e))?;
    writer.write_image_data(&packed).map_err(|e| img_err(&e))?;
    writer.finish().map_err(|e| img_err(&e))
}

// ---------------------------------------------------------------------
// Dictionary persistence.

#[derive(Debug, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub version: u32,
    pub entry_count: usize,
    pub frame: ImageFrame,
    pub descriptor_spec: DescriptorSpec,
    pub seed: u64,
    pub homographies: Vec<[f64; 9]>,
}

impl Validate for DictionaryMeta {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        if self.homographies.len() != self.entry_count {
            return Err(invalid(
                path,
                0,
                "homographies",
                "length differs from entry_count",
            ));
        }
        for (i, h) in self.homographies.iter().enumerate() {
            if Homography::from_row_major(*h).is_err() {
                return Err(invalid(path, i, "homographies", "not invertible"));
            }
        }
        Ok(())
    }
}

/// Persists a dictionary as a directory: `meta.json` plus one label PNG
/// per template. Descriptors are recomputed on load.
pub fn save_dictionary(dir: &Path, dict: &TemplateDictionary) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    let meta = DictionaryMeta {
        version: FORMAT_VERSION,
        entry_count: dict.entries.len(),
        frame: dict.frame,
        descriptor_spec: dict.descriptor_spec,
        seed: dict.seed,
        homographies: dict.entries.iter().map(|e| e.homography.to_row_major()).collect(),
    };
    write_doc(&dir.join("meta.json"), &meta)?;
    for (i, e) in dict.entries.iter().enumerate() {
        save_segmentation_png(&dir.join(format!("template_{i:04}.png")), &e.template)?;
    }
    Ok(())
}

pub fn load_dictionary(dir: &Path) -> Result<TemplateDictionary, FormatError> {
    let meta: DictionaryMeta = read_doc(&dir.join("meta.json"))?;
    let mut entries = Vec::with_capacity(meta.entry_count);
    for (i, h) in meta.homographies.iter().enumerate() {
        let template = load_segmentation_png(&dir.join(format!("template_{i:04}.png")))?;
        let descriptor = descriptor_of(&template, meta.descriptor_spec.channels);
        entries.push(DictEntry {
            homography: Homography::from_row_major(*h).expect("validated above"),
            template,
            descriptor,
        });
    }
    Ok(TemplateDictionary {
        entries,
        frame: meta.frame,
        descriptor_spec: meta.descriptor_spec,
        seed: meta.seed,
    })
}
