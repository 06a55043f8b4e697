//! Player localization in field coordinates and the proximity graph.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::CalibrationResult;
use crate::field::FieldModel;
use crate::geometry::{clip_convex, visible_field_polygon, ImageFrame};

/// Players closer than this (meters, strict) share a graph edge.
pub const GRAPH_DISTANCE_M: f64 = 25.0;

/// Positions may fall this far (meters) outside the field rectangle and
/// still count as valid localizations.
const FIELD_TOLERANCE_M: f64 = 3.0;

const DEFAULT_COLOR: (u8, u8, u8) = (128, 128, 128);

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("uncalibrated frame (relevance 0)")]
    Uncalibrated,
}

/// Person detection in image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// (x1, y1, x2, y2), pixels, x1 < x2 and y1 < y2.
    pub bbox: (f64, f64, f64, f64),
    /// Mean RGB of the segmented person, when available.
    pub mean_color: Option<(u8, u8, u8)>,
}

impl Detection {
    /// Middle point of the bottom edge of the bounding box.
    pub fn foot_point(&self) -> (f64, f64) {
        ((self.bbox.0 + self.bbox.2) / 2.0, self.bbox.3)
    }

    pub fn area(&self) -> f64 {
        (self.bbox.2 - self.bbox.0) * (self.bbox.3 - self.bbox.1)
    }
}

/// A player (or referee) mapped to the field plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerLocalization {
    pub position: (f64, f64),
    pub color: (u8, u8, u8),
    pub bbox_area_px: f64,
}

/// Per-frame proximity graph over player localizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerGraph {
    pub nodes: Vec<PlayerLocalization>,
    /// Unordered node-index pairs, i < j, no duplicates.
    pub edges: Vec<(usize, usize)>,
}

/// Maps detections to field positions through a relevant calibration.
/// Detections whose box does not intersect the image-space visible-field
/// region are dropped.
pub fn localize(
    dets: &[Detection],
    calib: &CalibrationResult,
    frame: &ImageFrame,
    field: &FieldModel,
) -> Result<Vec<PlayerLocalization>, LocalizationError> {
    if calib.relevance != 1 {
        return Err(LocalizationError::Uncalibrated);
    }
    let h = &calib.homography;
    let visible = visible_field_polygon(h, frame, field);
    // Visible polygon re-projected to image coordinates. Its vertices are
    // on-field, so they project cleanly; a vertex at the horizon means the
    // frame is unusable for filtering and we keep every detection inside
    // the image instead.
    let image_poly: Option<Vec<(f64, f64)>> = visible
        .vertices
        .iter()
        .map(|&p| h.project(p))
        .collect();
    let mut out = Vec::new();
    for det in dets {
        let keep = match &image_poly {
            Some(poly) if poly.len() >= 3 => bbox_intersects_polygon(det.bbox, poly),
            _ => false,
        };
        if !keep {
            continue;
        }
        let Some(pos) = h.unproject(det.foot_point()) else {
            continue;
        };
        let hl = field.length_m / 2.0 + FIELD_TOLERANCE_M;
        let hw = field.width_m / 2.0 + FIELD_TOLERANCE_M;
        if pos.0.abs() > hl || pos.1.abs() > hw {
            continue;
        }
        out.push(PlayerLocalization {
            position: pos,
            color: det.mean_color.unwrap_or(DEFAULT_COLOR),
            bbox_area_px: det.area(),
        });
    }
    Ok(out)
}

fn bbox_intersects_polygon(bbox: (f64, f64, f64, f64), poly: &[(f64, f64)]) -> bool {
    let rect = [
        (bbox.0, bbox.1),
        (bbox.2, bbox.1),
        (bbox.2, bbox.3),
        (bbox.0, bbox.3),
    ];
    let mut poly = poly.to_vec();
    if crate::geometry::polygon_area(&poly) < 0.0 {
        poly.reverse();
    }
    let inter = clip_convex(&poly, &rect);
    crate::geometry::polygon_area(&inter).abs() > 1e-9
}

/// Threshold graph: edge iff pairwise distance is strictly below 25 m.
pub fn build_player_graph(locs: &[PlayerLocalization]) -> PlayerGraph {
    let mut edges = Vec::new();
    for i in 0..locs.len() {
        for j in (i + 1)..locs.len() {
            let dx = locs[i].position.0 - locs[j].position.0;
            let dy = locs[i].position.1 - locs[j].position.1;
            if (dx * dx + dy * dy).sqrt() < GRAPH_DISTANCE_M {
                edges.push((i, j));
            }
        }
    }
    PlayerGraph {
        nodes: locs.to_vec(),
        edges,
    }
}
