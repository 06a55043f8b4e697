//! Evaluation metrics: calibration IoU (entire and part) and
//! action-spotting Average-mAP with the patterned/fuzzy class split.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldModel;
use crate::geometry::{
    clip_convex, polygon_area, visible_field_polygon, Homography, ImageFrame,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown action class '{0}'")]
    UnknownClass(String),
    #[error("no ground-truth actions")]
    EmptyGroundTruth,
    #[error("margins must be non-empty and ascending")]
    BadMargins,
    #[error("class '{0}' does not belong to the {1} split")]
    SplitMismatch(String, &'static str),
}

/// The 17 action classes recognized by the spotting evaluator,
/// canonicalized lowercase with hyphens.
pub const CLASS_REGISTRY: [&str; 17] = [
    "ball-out-of-play",
    "throw-in",
    "foul",
    "indirect-free-kick",
    "clearance",
    "shot-on-target",
    "shot-off-target",
    "corner",
    "substitution",
    "kick-off",
    "yellow-card",
    "offside",
    "direct-free-kick",
    "goal",
    "penalty",
    "yellow-to-red-card",
    "red-card",
];

/// Classes whose occurrence implies a typical player placement.
pub const PATTERNED_CLASSES: [&str; 8] = [
    "penalty",
    "kick-off",
    "throw-in",
    "direct-free-kick",
    "corner",
    "yellow-card",
    "red-card",
    "yellow-to-red-card",
];

/// The remaining classes, with no systematic player placement.
pub const FUZZY_CLASSES: [&str; 9] = [
    "goal",
    "substitution",
    "offside",
    "shot-on-target",
    "shot-off-target",
    "clearance",
    "ball-out-of-play",
    "foul",
    "indirect-free-kick",
];

/// Margins (seconds) over which the Average-mAP is averaged.
pub const DEFAULT_MARGINS: [f64; 12] = [
    5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassSplit;

impl ClassSplit {
    pub fn is_patterned(class: &str) -> bool {
        PATTERNED_CLASSES.contains(&class)
    }

    pub fn is_fuzzy(class: &str) -> bool {
        FUZZY_CLASSES.contains(&class)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAction {
    pub class: String,
    pub time_s: f64,
    pub half: u8,
    pub game_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpottingPrediction {
    pub class: String,
    pub time_s: f64,
    pub half: u8,
    pub game_id: String,
    pub confidence: f64,
}

/// Frame index to seconds at the 2 fps subsampling convention.
pub fn frame_time(frame_index: u64) -> f64 {
    frame_index as f64 / 2.0
}

/// Concatenates per-split prediction lists, rejecting predictions filed
/// under the wrong split.
pub fn merge_split_predictions(
    patterned: &[SpottingPrediction],
    fuzzy: &[SpottingPrediction],
) -> Result<Vec<SpottingPrediction>, EvalError> {
    for p in patterned {
        if !ClassSplit::is_patterned(&p.class) {
            return Err(EvalError::SplitMismatch(p.class.clone(), "patterned"));
        }
    }
    for p in fuzzy {
        if !ClassSplit::is_fuzzy(&p.class) {
            return Err(EvalError::SplitMismatch(p.class.clone(), "fuzzy"));
        }
    }
    let mut out = patterned.to_vec();
    out.extend_from_slice(fuzzy);
    Ok(out)
}

/// Per-image calibration IoUs; `None` marks an undefined entry (horizon
/// crossing the mapped field rectangle).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IouPair {
    pub entire: Option<f64>,
    pub part: Option<f64>,
}

/// IoU between the ground-truth and predicted top-view field projections.
/// `entire` compares over the whole field rectangle, `part` restricts
/// both operands to the part of the field visible to the ground-truth
/// camera.
pub fn iou_pair(
    h_gt: &Homography,
    h_pred: &Homography,
    frame: &ImageFrame,
    field: &FieldModel,
) -> IouPair {
    let hl = field.length_m / 2.0;
    let hw = field.width_m / 2.0;
    let rect = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)];
    let Ok(gt_inv) = h_gt.inverse() else {
        return IouPair::default();
    };
    let Ok(m) = gt_inv.compose(h_pred) else {
        return IouPair::default();
    };
    // Map the field rectangle through pred-then-gt-inverse; the result is
    // unbounded (undefined IoU) when the horizon crosses it.
    let mm = m.matrix();
    let mut mapped = Vec::with_capacity(4);
    let mut sign = 0.0f64;
    for &(x, y) in &rect {
        let w = mm[(2, 0)] * x + mm[(2, 1)] * y + mm[(2, 2)];
        if w.abs() <= 1e-9 || (sign != 0.0 && w.signum() != sign) {
            return IouPair::default();
        }
        sign = w.signum();
        mapped.push((
            (mm[(0, 0)] * x + mm[(0, 1)] * y + mm[(0, 2)]) / w,
            (mm[(1, 0)] * x + mm[(1, 1)] * y + mm[(1, 2)]) / w,
        ));
    }
    if polygon_area(&mapped) < 0.0 {
        mapped.reverse();
    }
    let entire = iou_convex(&rect, &mapped);
    let visible = visible_field_polygon(h_gt, frame, field);
    let part = if visible.is_empty() {
        None
    } else {
        let a = clip_convex(&rect, &visible.vertices);
        let b = clip_convex(&mapped, &visible.vertices);
        iou_convex(&a, &b)
    };
    IouPair {
        entire,
        part,
    }
}

fn iou_convex(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<f64> {
    let area_a = polygon_area(a).abs();
    let area_b = polygon_area(b).abs();
    if area_a <= 0.0 && area_b <= 0.0 {
        return None;
    }
    let inter = polygon_area(&clip_convex(a, b)).abs();
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return None;
    }
    Some((inter / union).clamp(0.0, 1.0))
}

/// Aggregate calibration-IoU report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    pub per_image: Vec<IouPair>,
    pub mean_entire: Option<f64>,
    pub median_entire: Option<f64>,
    pub mean_part: Option<f64>,
    pub median_part: Option<f64>,
    pub undefined_entire: usize,
    pub undefined_part: usize,
}

impl IouReport {
    pub fn from_pairs(per_image: Vec<IouPair>) -> Self {
        let entire: Vec<f64> = per_image.iter().filter_map(|p| p.entire).collect();
        let part: Vec<f64> = per_image.iter().filter_map(|p| p.part).collect();
        Self {
            undefined_entire: per_image.len() - entire.len(),
            undefined_part: per_image.len() - part.len(),
            mean_entire: mean(&entire),
            median_entire: median(&entire),
            mean_part: mean(&part),
            median_part: median(&part),
            per_image,
        }
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    })
}

/// Per-class AP table for each margin plus the margin-averaged summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpottingReport {
    pub margins: Vec<f64>,
    /// `ap[class][margin_index]`; `None` for classes with no ground truth.
    pub per_class: Vec<ClassAp>,
    pub map_per_margin: Vec<f64>,
    pub average_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class: String,
    pub gt_count: usize,
    pub ap_per_margin: Option<Vec<f64>>,
}

/// Average-mAP: greedy confidence-ordered matching of predictions to
/// ground truth within each margin, all-point-interpolated AP per class,
/// unweighted class mean, then the mean over margins.
pub fn average_map(
    preds: &[SpottingPrediction],
    gts: &[GroundTruthAction],
    margins: &[f64],
) -> Result<SpottingReport, EvalError> {
    if margins.is_empty() || margins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BadMargins);
    }
    if gts.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    for p in preds {
        if !CLASS_REGISTRY.contains(&p.class.as_str()) {
            return Err(EvalError::UnknownClass(p.class.clone()));
        }
    }
    for g in gts {
        if !CLASS_REGISTRY.contains(&g.class.as_str()) {
            return Err(EvalError::UnknownClass(g.class.clone()));
        }
    }
    let mut per_class = Vec::with_capacity(CLASS_REGISTRY.len());
    for class in CLASS_REGISTRY {
        let class_gts: Vec<&GroundTruthAction> =
            gts.iter().filter(|g| g.class == class).collect();
        let mut class_preds: Vec<(usize, &SpottingPrediction)> = preds
            .iter()
            .filter(|p| p.class == class)
            .enumerate()
            .collect();
        // Descending confidence; ties by earlier time, then input order.
        class_preds.sort_by(|(ia, a), (ib, b)| {
            b.confidence
                .partial_cmp(&a.confidence)
                .unwrap()
                .then(a.time_s.partial_cmp(&b.time_s).unwrap())
                .then(ia.cmp(ib))
        });
        if class_gts.is_empty() {
            per_class.push(ClassAp {
                class: class.to_string(),
                gt_count: 0,
                ap_per_margin: None,
            });
            continue;
        }
        let aps: Vec<f64> = margins
            .iter()
            .map(|&delta| ap_at_margin(&class_preds, &class_gts, delta))
            .collect();
        per_class.push(ClassAp {
            class: class.to_string(),
            gt_count: class_gts.len(),
            ap_per_margin: Some(aps),
        });
    }
    let map_per_margin: Vec<f64> = (0..margins.len())
        .map(|mi| {
            let vals: Vec<f64> = per_class
                .iter()
                .filter_map(|c| c.ap_per_margin.as_ref().map(|a| a[mi]))
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect();
    let average_map = map_per_margin.iter().sum::<f64>() / map_per_margin.len() as f64;
    Ok(SpottingReport {
        margins: margins.to_vec(),
        per_class,
        map_per_margin,
        average_map,
    })
}

fn ap_at_margin(
    sorted_preds: &[(usize, &SpottingPrediction)],
    gts: &[&GroundTruthAction],
    delta: f64,
) -> f64 {
    let mut matched = vec![false; gts.len()];
    let mut tps = Vec::with_capacity(sorted_preds.len());
    for (_, p) in sorted_preds {
        // Nearest unmatched ground truth in the same game half within the
        // margin; ties go to the earlier timestamp.
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if matched[gi] || g.game_id != p.game_id || g.half != p.half {
                continue;
            }
            let dt = (g.time_s - p.time_s).abs();
            if dt > delta {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bd)) => {
                    dt < bd - 1e-12
                        || ((dt - bd).abs() <= 1e-12 && g.time_s < gts[bi].time_s)
                }
            };
            if better {
                best = Some((gi, dt));
            }
        }
        if let Some((gi, _)) = best {
            matched[gi] = true;
            tps.push(true);
        } else {
            tps.push(false);
        }
    }
    ap_from_tps(&tps, gts.len())
}

/// All-point-interpolated AP from an ordered TP/FP sequence.
fn ap_from_tps(tps: &[bool], gt_count: usize) -> f64 {
    if gt_count == 0 {
        return 0.0;
    }
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut points = Vec::with_capacity(tps.len());
    for &is_tp in tps {
        if is_tp {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        points.push((tp / gt_count as f64, tp / (tp + fp)));
    }
    // Precision envelope from the right.
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..points.len() {
        let (r, _) = points[i];
        if r > prev_recall {
            let max_p = points[i..]
                .iter()
                .map(|&(_, p)| p)
                .fold(0.0f64, f64::max);
            ap += (r - prev_recall) * max_p;
            prev_recall = r;
        }
    }
    ap
}
