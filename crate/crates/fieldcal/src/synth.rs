//! Synthetic broadcast scenes: a side-line elevated camera family plus
//! derived zone segmentations and person detections, reproducible from a
//! seed. Stands in for real datasets in tests and benchmarks.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldModel;
use crate::geometry::{visible_field_polygon, Homography, ImageFrame};
use crate::localization::Detection;
use crate::raster::{render_zone_segmentation, ZoneSegmentation};

/// Canonical frame the pose family is calibrated for.
pub const CANONICAL_FRAME: ImageFrame = ImageFrame {
    width_px: 960,
    height_px: 540,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("no pose with a usable visible polygon found after {0} rejection samples")]
    PoseRejection(usize),
    #[error("invalid scene parameters: {0}")]
    BadParams(&'static str),
}

/// Broadcast-like camera pose: elevated behind a touch line, looking into
/// the field. `pan` slides the look-at target along the length (roughly
/// fraction of the half length), `tilt` along the width, `zoom` scales
/// the focal length multiplicatively. Returns the field-to-pixels
/// homography for the canonical 960x540 frame.
pub fn broadcast_pose(field: &FieldModel, pan: f64, tilt: f64, zoom: f64) -> Homography {
    let target = Vector3::new(
        pan * 1.2 * field.length_m / 2.0,
        tilt * field.width_m / 2.0,
        0.0,
    );
    let camera = Vector3::new(pan * 30.0, -(field.width_m / 2.0 + 56.0), 25.0);
    let focal = 600.0 * (1.0 + zoom);
    let forward = (target - camera).normalize();
    let up = Vector3::new(0.0, 0.0, 1.0);
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right).normalize();
    // Rows: camera x (right), camera y (down), camera z (forward).
    let rot = Matrix3::from_rows(&[
        right.transpose(),
        down.transpose(),
        forward.transpose(),
    ]);
    let k = Matrix3::new(
        focal,
        0.0,
        CANONICAL_FRAME.width_px as f64 / 2.0,
        0.0,
        focal,
        CANONICAL_FRAME.height_px as f64 / 2.0,
        0.0,
        0.0,
        1.0,
    );
    let rc = rot * camera;
    let plane = Matrix3::from_columns(&[rot.column(0).into(), rot.column(1).into(), -rc]);
    Homography::from_matrix(k * plane).expect("pose family is non-degenerate")
}

/// [`broadcast_pose`] rescaled from the canonical frame to `frame`.
pub fn pose_for_frame(
    field: &FieldModel,
    frame: &ImageFrame,
    pan: f64,
    tilt: f64,
    zoom: f64,
) -> Homography {
    let scale = Homography::from_row_major([
        frame.width_px as f64 / CANONICAL_FRAME.width_px as f64,
        0.0,
        0.0,
        0.0,
        frame.height_px as f64 / CANONICAL_FRAME.height_px as f64,
        0.0,
        0.0,
        0.0,
        1.0,
    ])
    .expect("scale is invertible");
    scale
        .compose(&broadcast_pose(field, pan, tilt, zoom))
        .expect("scaled pose is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub frame: ImageFrame,
    pub n_players: usize,
    /// Label-noise probability on segmentation border pixels and pixel
    /// jitter scale on detection boxes.
    pub noise: f64,
    pub pan_range: (f64, f64),
    pub tilt_range: (f64, f64),
    pub zoom_range: (f64, f64),
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            frame: ImageFrame {
                width_px: 480,
                height_px: 270,
            },
            n_players: 12,
            noise: 0.0,
            pan_range: (-0.35, 0.35),
            tilt_range: (-0.1, 0.1),
            zoom_range: (-0.1, 0.25),
        }
    }
}

/// One generated frame: ground-truth pose, planted players, and the
/// derived observations the pipeline consumes.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub truth: Homography,
    pub player_positions: Vec<(f64, f64)>,
    pub frame: ImageFrame,
    pub seed: u64,
    pub segmentation: ZoneSegmentation,
    pub detections: Vec<Detection>,
}

const POSE_REJECTION_LIMIT: usize = 100;
const MIN_SCENE_VISIBLE_AREA: f64 = 100.0;

/// Samples a scene. Poses are drawn from the configured ranges until the
/// camera sees a usable amount of field; players are planted uniformly in
/// the visible polygon and forward-projected to detection boxes.
pub fn generate_scene(
    params: &SceneParams,
    field: &FieldModel,
    seed: u64,
) -> Result<SyntheticScene, SynthError> {
    if params.pan_range.0 > params.pan_range.1
        || params.tilt_range.0 > params.tilt_range.1
        || params.zoom_range.0 > params.zoom_range.1
    {
        return Err(SynthError::BadParams("empty pose range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rng.gen_range(lo..hi)
        }
    };
    let mut truth = None;
    for _ in 0..POSE_REJECTION_LIMIT {
        let h = pose_for_frame(
            field,
            &params.frame,
            sample(&mut rng, params.pan_range),
            sample(&mut rng, params.tilt_range),
            sample(&mut rng, params.zoom_range),
        );
        if visible_field_polygon(&h, &params.frame, field).area() >= MIN_SCENE_VISIBLE_AREA {
            truth = Some(h);
            break;
        }
    }
    let truth = truth.ok_or(SynthError::PoseRejection(POSE_REJECTION_LIMIT))?;

    let mut segmentation = render_zone_segmentation(&truth, &params.frame, field);
    if params.noise > 0.0 {
        apply_label_noise(&mut segmentation, params.noise, &mut rng);
    }

    let visible = visible_field_polygon(&truth, &params.frame, field);
    let mut player_positions = Vec::with_capacity(params.n_players);
    let mut detections = Vec::with_capacity(params.n_players);
    let bbox_of = |h: &Homography, p: (f64, f64)| -> Option<(f64, f64, f64, f64)> {
        let (u, v) = h.project(p)?;
        // Local meters-to-pixels scale from finite differences.
        let (ux, vx) = h.project((p.0 + 0.05, p.1))?;
        let (uy, vy) = h.project((p.0, p.1 + 0.05))?;
        let sx = ((ux - u).powi(2) + (vx - v).powi(2)).sqrt() / 0.05;
        let sy = ((uy - u).powi(2) + (vy - v).powi(2)).sqrt() / 0.05;
        let s = (sx + sy) / 2.0;
        let w = 0.7 * s;
        let hgt = 1.8 * s;
        Some((u - w / 2.0, v - hgt, u + w / 2.0, v))
    };
    let mut attempts = 0;
    while player_positions.len() < params.n_players && attempts < params.n_players * 200 {
        attempts += 1;
        let p = (
            rng.gen_range(field.boundary.min_x..field.boundary.max_x),
            rng.gen_range(field.boundary.min_y..field.boundary.max_y),
        );
        if !visible.contains(p) {
            continue;
        }
        let Some(mut bbox) = bbox_of(&truth, p) else {
            continue;
        };
        // Keep the foot point comfortably inside the frame.
        let (w, h) = (params.frame.width_px as f64, params.frame.height_px as f64);
        let foot = ((bbox.0 + bbox.2) / 2.0, bbox.3);
        if foot.0 < 5.0 || foot.0 > w - 5.0 || foot.1 < 5.0 || foot.1 > h - 5.0 {
            continue;
        }
        if params.noise > 0.0 {
            let jitter = params.noise * 2.0;
            bbox.0 += rng.gen_range(-jitter..jitter);
            bbox.1 += rng.gen_range(-jitter..jitter);
            bbox.2 += rng.gen_range(-jitter..jitter);
            bbox.3 += rng.gen_range(-jitter..jitter);
        }
        player_positions.push(p);
        detections.push(Detection {
            bbox,
            mean_color: Some((
                rng.gen_range(0..=255),
                rng.gen_range(0..=255),
                rng.gen_range(0..=255),
            )),
        });
    }
    Ok(SyntheticScene {
        truth,
        player_positions,
        frame: params.frame,
        seed,
        segmentation,
        detections,
    })
}

/// Flips each segmentation border pixel with probability `p` to a label
/// drawn from its 4-neighborhood.
fn apply_label_noise(seg: &mut ZoneSegmentation, p: f64, rng: &mut ChaCha8Rng) {
    let boundary = seg.boundary_pixels();
    for (x, y) in boundary {
        if !rng.gen_bool(p.clamp(0.0, 1.0)) {
            continue;
        }
        let mut neighbors = Vec::with_capacity(4);
        if x > 0 {
            neighbors.push(seg.get(x - 1, y));
        }
        if x + 1 < seg.width_px {
            neighbors.push(seg.get(x + 1, y));
        }
        if y > 0 {
            neighbors.push(seg.get(x, y - 1));
        }
        if y + 1 < seg.height_px {
            neighbors.push(seg.get(x, y + 1));
        }
        let pick = neighbors[rng.gen_range(0..neighbors.len())];
        seg.set(x, y, pick);
    }
}
