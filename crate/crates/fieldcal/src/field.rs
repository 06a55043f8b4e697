//! Canonical soccer field: markings, the zones they enclose, and point
//! queries.
//!
//! The field lives in real-world coordinates with the origin at the field
//! center, x along the length and y along the width. Dimensions follow the
//! IFAB recommended 105 m x 68 m pitch.
//!
//! The field is partitioned into 16 zones: the two goal areas, the two
//! penalty-area remainders, the two penalty arcs, the two center-circle
//! halves, and 8 outer regions cut by the halfway line, the penalty-area
//! fronts, and the touch-line-parallel extensions of the penalty-area
//! sides. Points on shared boundaries resolve to the smaller zone id.

use serde::{Deserialize, Serialize};

/// Number of zones in the standard enumeration.
pub const ZONE_COUNT: u8 = 16;

/// Physical width of painted field lines, meters.
pub const MARKING_WIDTH_M: f64 = 0.12;

/// Axis-aligned rectangle in field coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

/// Line-marking geometry: straight segments and circle arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkingPrimitive {
    Segment {
        a: (f64, f64),
        b: (f64, f64),
        width_m: f64,
    },
    CircleArc {
        center: (f64, f64),
        radius: f64,
        /// Radians, counter-clockwise; `end > start`.
        start_angle: f64,
        end_angle: f64,
        width_m: f64,
    },
}

/// A field region enclosed by markings. The boundary is stored as a
/// sampled simple polygon (arcs discretized) for serialization and
/// independent geometric checks; exact point queries go through
/// [`FieldModel::zone_at`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: u8,
    /// Distinct value used when rasterizing label images (id + 1; 0 is
    /// reserved for non-field).
    pub label_color: u8,
    pub boundary: Vec<(f64, f64)>,
}

/// Interior dimensions of the standard markings, meters from the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldDims {
    pub half_length: f64,
    pub half_width: f64,
    pub penalty_half_width: f64,
    pub penalty_depth: f64,
    pub goal_half_width: f64,
    pub goal_depth: f64,
    pub penalty_mark_dist: f64,
    pub center_radius: f64,
    pub corner_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    pub length_m: f64,
    pub width_m: f64,
    pub dims: FieldDims,
    pub markings: Vec<MarkingPrimitive>,
    pub zones: Vec<Zone>,
    pub boundary: FieldRect,
}

/// The canonical 105 m x 68 m field with IFAB markings and the fixed
/// 16-zone enumeration.
pub fn standard_field() -> FieldModel {
    let dims = FieldDims {
        half_length: 52.5,
        half_width: 34.0,
        penalty_half_width: 20.16,
        penalty_depth: 16.5,
        goal_half_width: 9.16,
        goal_depth: 5.5,
        penalty_mark_dist: 11.0,
        center_radius: 9.15,
        corner_radius: 1.0,
    };
    FieldModel {
        length_m: 2.0 * dims.half_length,
        width_m: 2.0 * dims.half_width,
        dims,
        markings: standard_markings(&dims),
        zones: standard_zones(&dims),
        boundary: FieldRect {
            min_x: -dims.half_length,
            min_y: -dims.half_width,
            max_x: dims.half_length,
            max_y: dims.half_width,
        },
    }
}

fn seg(a: (f64, f64), b: (f64, f64)) -> MarkingPrimitive {
    MarkingPrimitive::Segment {
        a,
        b,
        width_m: MARKING_WIDTH_M,
    }
}

fn arc(center: (f64, f64), radius: f64, start_angle: f64, end_angle: f64) -> MarkingPrimitive {
    MarkingPrimitive::CircleArc {
        center,
        radius,
        start_angle,
        end_angle,
        width_m: MARKING_WIDTH_M,
    }
}

fn standard_markings(d: &FieldDims) -> Vec<MarkingPrimitive> {
    use std::f64::consts::PI;
    let hl = d.half_length;
    let hw = d.half_width;
    let pf = hl - d.penalty_depth; // penalty-area front |x|
    let gf = hl - d.goal_depth; // goal-area front |x|
    let mut m = vec![
        // Touch lines and goal lines.
        seg((-hl, -hw), (hl, -hw)),
        seg((-hl, hw), (hl, hw)),
        seg((-hl, -hw), (-hl, hw)),
        seg((hl, -hw), (hl, hw)),
        // Halfway line.
        seg((0.0, -hw), (0.0, hw)),
        // Center circle.
        arc((0.0, 0.0), d.center_radius, 0.0, 2.0 * PI),
    ];
    for side in [-1.0f64, 1.0] {
        // Penalty area.
        m.push(seg(
            (side * hl, -d.penalty_half_width),
            (side * pf, -d.penalty_half_width),
        ));
        m.push(seg(
            (side * pf, -d.penalty_half_width),
            (side * pf, d.penalty_half_width),
        ));
        m.push(seg(
            (side * pf, d.penalty_half_width),
            (side * hl, d.penalty_half_width),
        ));
        // Goal area.
        m.push(seg(
            (side * hl, -d.goal_half_width),
            (side * gf, -d.goal_half_width),
        ));
        m.push(seg(
            (side * gf, -d.goal_half_width),
            (side * gf, d.goal_half_width),
        ));
        m.push(seg(
            (side * gf, d.goal_half_width),
            (side * hl, d.goal_half_width),
        ));
        // Penalty arc: the part of the circle around the penalty mark that
        // lies outside the penalty area.
        let theta = (d.penalty_mark_dist - d.penalty_depth).abs() / d.center_radius;
        let theta = theta.acos();
        let cx = side * (hl - d.penalty_mark_dist);
        if side < 0.0 {
            m.push(arc((cx, 0.0), d.center_radius, -theta, theta));
        } else {
            m.push(arc((cx, 0.0), d.center_radius, PI - theta, PI + theta));
        }
    }
    // Corner arcs.
    m.push(arc((-hl, -hw), d.corner_radius, 0.0, PI / 2.0));
    m.push(arc((hl, -hw), d.corner_radius, PI / 2.0, PI));
    m.push(arc((hl, hw), d.corner_radius, PI, 1.5 * PI));
    m.push(arc((-hl, hw), d.corner_radius, 1.5 * PI, 2.0 * PI));
    m
}

const ARC_STEPS: usize = 64;

fn arc_points(center: (f64, f64), r: f64, a0: f64, a1: f64) -> Vec<(f64, f64)> {
    (0..=ARC_STEPS)
        .map(|i| {
            let t = a0 + (a1 - a0) * i as f64 / ARC_STEPS as f64;
            (center.0 + r * t.cos(), center.1 + r * t.sin())
        })
        .collect()
}

fn standard_zones(d: &FieldDims) -> Vec<Zone> {
    use std::f64::consts::PI;
    let hl = d.half_length;
    let hw = d.half_width;
    let pw = d.penalty_half_width;
    let pf = hl - d.penalty_depth;
    let gw = d.goal_half_width;
    let gf = hl - d.goal_depth;
    let r = d.center_radius;
    let pm = hl - d.penalty_mark_dist; // penalty mark |x|
    let theta = ((d.penalty_depth - d.penalty_mark_dist).abs() / r).acos();
    let arc_y = r * theta.sin(); // |y| where the penalty arc meets the front

    let mirror_x = |p: &Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        let mut v: Vec<_> = p.iter().map(|&(x, y)| (-x, y)).collect();
        v.reverse();
        v
    };

    // 0/1: goal areas.
    let goal_l = vec![(-hl, -gw), (-gf, -gw), (-gf, gw), (-hl, gw)];
    // 2/3: penalty area minus goal area (C-shaped).
    let pen_l = vec![
        (-hl, -pw),
        (-pf, -pw),
        (-pf, pw),
        (-hl, pw),
        (-hl, gw),
        (-gf, gw),
        (-gf, -gw),
        (-hl, -gw),
    ];
    // 4/5: penalty arcs (chord on the penalty-area front + the arc).
    let mut arc_l = vec![(-pf, arc_y)];
    arc_l.extend(arc_points((-pm, 0.0), r, theta, -theta));
    arc_l.push((-pf, -arc_y));
    // 6/7: center-circle halves.
    let mut circ_l = vec![(0.0, r)];
    circ_l.extend(arc_points((0.0, 0.0), r, PI / 2.0, 1.5 * PI));
    circ_l.push((0.0, -r));
    let mut circ_r = vec![(0.0, -r)];
    circ_r.extend(arc_points((0.0, 0.0), r, -PI / 2.0, PI / 2.0));
    circ_r.push((0.0, r));
    // 8..=10: band above the penalty-width lines, cut at the penalty fronts.
    let top_corner_l = vec![(-hl, pw), (-pf, pw), (-pf, hw), (-hl, hw)];
    let top_mid = vec![(-pf, pw), (pf, pw), (pf, hw), (-pf, hw)];
    // 11..=13: mirrored below.
    let bot_corner_l = vec![(-hl, -hw), (-pf, -hw), (-pf, -pw), (-hl, -pw)];
    let bot_mid = vec![(-pf, -hw), (pf, -hw), (pf, -pw), (-pf, -pw)];
    // 14/15: central regions between front and halfway line, with the
    // penalty arc and the center-circle half carved out.
    let mut central_l = vec![(-pf, pw)];
    central_l.push((-pf, arc_y));
    central_l.extend(arc_points((-pm, 0.0), r, theta, -theta));
    central_l.push((-pf, -arc_y));
    central_l.push((-pf, -pw));
    central_l.push((0.0, -pw));
    central_l.push((0.0, -r));
    central_l.extend(arc_points((0.0, 0.0), r, 1.5 * PI, PI / 2.0));
    central_l.push((0.0, r));
    central_l.push((0.0, pw));

    let polys: Vec<Vec<(f64, f64)>> = vec![
        goal_l.clone(),
        mirror_x(&goal_l),
        pen_l.clone(),
        mirror_x(&pen_l),
        arc_l.clone(),
        mirror_x(&arc_l),
        circ_l,
        circ_r,
        top_corner_l.clone(),
        top_mid,
        mirror_x(&top_corner_l),
        bot_corner_l.clone(),
        bot_mid,
        mirror_x(&bot_corner_l),
        central_l.clone(),
        mirror_x(&central_l),
    ];
    polys
        .into_iter()
        .enumerate()
        .map(|(i, boundary)| Zone {
            id: i as u8,
            label_color: i as u8 + 1,
            boundary,
        })
        .collect()
}

impl FieldModel {
    /// Zone id whose region contains `p`; `None` outside the field
    /// rectangle. Shared boundaries resolve to the smaller id.
    pub fn zone_at(&self, p: (f64, f64)) -> Option<u8> {
        let d = &self.dims;
        let (x, y) = p;
        if x.abs() > d.half_length || y.abs() > d.half_width {
            return None;
        }
        let pf = d.half_length - d.penalty_depth;
        let gf = d.half_length - d.goal_depth;
        let pm = d.half_length - d.penalty_mark_dist;
        let r2 = d.center_radius * d.center_radius;
        if x <= -gf && y.abs() <= d.goal_half_width {
            return Some(0);
        }
        if x >= gf && y.abs() <= d.goal_half_width {
            return Some(1);
        }
        if x <= -pf && y.abs() <= d.penalty_half_width {
            return Some(2);
        }
        if x >= pf && y.abs() <= d.penalty_half_width {
            return Some(3);
        }
        if (x + pm).powi(2) + y * y <= r2 {
            return Some(4);
        }
        if (x - pm).powi(2) + y * y <= r2 {
            return Some(5);
        }
        if x * x + y * y <= r2 {
            return Some(if x <= 0.0 { 6 } else { 7 });
        }
        if y >= d.penalty_half_width {
            if x <= -pf {
                return Some(8);
            }
            if x <= pf {
                return Some(9);
            }
            return Some(10);
        }
        if y <= -d.penalty_half_width {
            if x <= -pf {
                return Some(11);
            }
            if x <= pf {
                return Some(12);
            }
            return Some(13);
        }
        Some(if x <= 0.0 { 14 } else { 15 })
    }

    pub fn zone_count(&self) -> u8 {
        self.zones.len() as u8
    }
}

/// Zone-id image of the x -> -x reflection.
pub fn reflect_x_id(id: u8) -> u8 {
    match id {
        0 => 1,
        1 => 0,
        2 => 3,
        3 => 2,
        4 => 5,
        5 => 4,
        6 => 7,
        7 => 6,
        8 => 10,
        10 => 8,
        11 => 13,
        13 => 11,
        14 => 15,
        15 => 14,
        other => other,
    }
}

/// Zone-id image of the y -> -y reflection.
pub fn reflect_y_id(id: u8) -> u8 {
    match id {
        8 => 11,
        11 => 8,
        9 => 12,
        12 => 9,
        10 => 13,
        13 => 10,
        other => other,
    }
}

/// Point-in-polygon by ray casting; used as an independent oracle for the
/// sampled zone boundaries.
pub fn point_in_polygon(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
