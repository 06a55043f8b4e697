//! Rasterization: zone-segmentation label images and the two schematic
//! top-view representations (color composition and binary channels).

use serde::{Deserialize, Serialize};

use crate::field::{FieldModel, MarkingPrimitive};
use crate::geometry::{Homography, ImageFrame, VisiblePolygon};
use crate::localization::PlayerLocalization;

/// Side length of a top-view image, pixels.
pub const TOP_VIEW_SIZE: u32 = 224;

/// Line stroke width in top views, pixels.
pub const LINE_WIDTH_PX: f64 = 4.0;

/// Player square side in top views, pixels.
pub const PLAYER_SQUARE_PX: i64 = 8;

/// Per-pixel zone labels: zone id + 1, with 0 for non-field pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneSegmentation {
    pub width_px: u32,
    pub height_px: u32,
    pub labels: Vec<u8>,
}

impl ZoneSegmentation {
    pub fn new(width_px: u32, height_px: u32) -> Self {
        Self {
            width_px,
            height_px,
            labels: vec![0; (width_px * height_px) as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[(y * self.width_px + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.labels[(y * self.width_px + x) as usize] = v;
    }

    /// Pixels whose label differs from a 4-neighbor (includes the border
    /// between field and non-field).
    pub fn boundary_pixels(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        let (w, h) = (self.width_px, self.height_px);
        for y in 0..h {
            for x in 0..w {
                let c = self.get(x, y);
                let differs = (x > 0 && self.get(x - 1, y) != c)
                    || (x + 1 < w && self.get(x + 1, y) != c)
                    || (y > 0 && self.get(x, y - 1) != c)
                    || (y + 1 < h && self.get(x, y + 1) != c);
                if differs {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

/// Renders the zone labels seen through `h`: each pixel center is
/// back-projected to the field plane and looked up in the zone partition.
pub fn render_zone_segmentation(
    h: &Homography,
    frame: &ImageFrame,
    field: &FieldModel,
) -> ZoneSegmentation {
    let mut seg = ZoneSegmentation::new(frame.width_px, frame.height_px);
    let inv = match h.inverse() {
        Ok(i) => i,
        Err(_) => return seg,
    };
    let m = *inv.matrix();
    for y in 0..frame.height_px {
        for x in 0..frame.width_px {
            let u = x as f64 + 0.5;
            let v = y as f64 + 0.5;
            let w = m[(2, 0)] * u + m[(2, 1)] * v + m[(2, 2)];
            if w.abs() <= crate::geometry::HORIZON_EPS {
                continue;
            }
            let fx = (m[(0, 0)] * u + m[(0, 1)] * v + m[(0, 2)]) / w;
            let fy = (m[(1, 0)] * u + m[(1, 1)] * v + m[(1, 2)]) / w;
            if let Some(id) = field.zone_at((fx, fy)) {
                seg.set(x, y, id + 1);
            }
        }
    }
    seg
}

/// Geometry of the field-to-top-view mapping: the field rectangle plus a
/// fixed margin fills the square image anisotropically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopViewSpec {
    pub size_px: u32,
    pub margin_m: f64,
}

impl Default for TopViewSpec {
    fn default() -> Self {
        Self {
            size_px: TOP_VIEW_SIZE,
            margin_m: 2.0,
        }
    }
}

impl TopViewSpec {
    /// Field point (meters) to continuous top-view pixel coordinates.
    pub fn to_pixels(&self, field: &FieldModel, p: (f64, f64)) -> (f64, f64) {
        let half_l = field.length_m / 2.0 + self.margin_m;
        let half_w = field.width_m / 2.0 + self.margin_m;
        let s = self.size_px as f64;
        (
            (p.0 + half_l) / (2.0 * half_l) * s,
            (p.1 + half_w) / (2.0 * half_w) * s,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopViewMode {
    ColorComposition,
    BinaryChannels,
}

/// 224x224 top-view render. Color composition stores interleaved 8-bit
/// RGB; binary channels store interleaved {0,1} values per channel
/// (0 = lines, 1 = visible polygon fill, 2 = players).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopViewImage {
    pub mode: TopViewMode,
    pub size_px: u32,
    pub data: Vec<u8>,
}

impl TopViewImage {
    fn new(mode: TopViewMode, size_px: u32) -> Self {
        Self {
            mode,
            size_px,
            data: vec![0; (size_px * size_px * 3) as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u32) -> u8 {
        self.data[((y * self.size_px + x) * 3 + c) as usize]
    }

    #[inline]
    fn set(&mut self, x: u32, y: u32, c: u32, v: u8) {
        self.data[((y * self.size_px + x) * 3 + c) as usize] = v;
    }
}

/// Markings flattened to polylines in top-view pixel coordinates.
fn marking_polylines(spec: &TopViewSpec, field: &FieldModel) -> Vec<Vec<(f64, f64)>> {
    field
        .markings
        .iter()
        .map(|m| {
            let pts: Vec<(f64, f64)> = match m {
                MarkingPrimitive::Segment { a, b, .. } => vec![*a, *b],
                MarkingPrimitive::CircleArc {
                    center,
                    radius,
                    start_angle,
                    end_angle,
                    ..
                } => {
                    let steps = 128;
                    (0..=steps)
                        .map(|i| {
                            let t =
                                start_angle + (end_angle - start_angle) * i as f64 / steps as f64;
                            (center.0 + radius * t.cos(), center.1 + radius * t.sin())
                        })
                        .collect()
                }
            };
            pts.into_iter().map(|p| spec.to_pixels(field, p)).collect()
        })
        .collect()
}

fn dist_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let vx = b.0 - a.0;
    let vy = b.1 - a.1;
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = a.0 + t * vx - p.0;
    let dy = a.1 + t * vy - p.1;
    (dx * dx + dy * dy).sqrt()
}

/// Boolean mask of pixels covered by a stroke of `width` pixels around
/// the given polylines.
fn stroke_mask(size: u32, polylines: &[Vec<(f64, f64)>], width: f64) -> Vec<bool> {
    let half = width / 2.0;
    let mut mask = vec![false; (size * size) as usize];
    for line in polylines {
        for seg in line.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let x0 = ((a.0.min(b.0) - half).floor().max(0.0)) as u32;
            let x1 = ((a.0.max(b.0) + half).ceil().min(size as f64)) as u32;
            let y0 = ((a.1.min(b.1) - half).floor().max(0.0)) as u32;
            let y1 = ((a.1.max(b.1) + half).ceil().min(size as f64)) as u32;
            for y in y0..y1 {
                for x in x0..x1 {
                    if mask[(y * size + x) as usize] {
                        continue;
                    }
                    let c = (x as f64 + 0.5, y as f64 + 0.5);
                    if dist_to_segment(c, a, b) <= half {
                        mask[(y * size + x) as usize] = true;
                    }
                }
            }
        }
    }
    mask
}

fn polygon_polyline(spec: &TopViewSpec, field: &FieldModel, poly: &VisiblePolygon) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = poly
        .vertices
        .iter()
        .map(|&p| spec.to_pixels(field, p))
        .collect();
    if let Some(&first) = pts.first() {
        pts.push(first);
    }
    pts
}

/// Integer pixel rectangle of an 8x8 player square centered at the mapped
/// position, clipped to the image.
fn player_square(spec: &TopViewSpec, field: &FieldModel, pos: (f64, f64)) -> Option<(u32, u32, u32, u32)> {
    let (u, v) = spec.to_pixels(field, pos);
    let cx = u.round() as i64;
    let cy = v.round() as i64;
    let half = PLAYER_SQUARE_PX / 2;
    let s = spec.size_px as i64;
    let x0 = (cx - half).clamp(0, s);
    let x1 = (cx + half).clamp(0, s);
    let y0 = (cy - half).clamp(0, s);
    let y1 = (cy + half).clamp(0, s);
    if x0 >= x1 || y0 >= y1 {
        return None;
    }
    Some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
}

/// Color-composition top view: black field, white lines, white visible
/// polygon contour, player squares in their stored color drawn last and
/// overriding everything underneath.
pub fn render_color_composition(
    spec: &TopViewSpec,
    localizations: &[PlayerLocalization],
    polygon: &VisiblePolygon,
    field: &FieldModel,
) -> TopViewImage {
    let size = spec.size_px;
    let mut img = TopViewImage::new(TopViewMode::ColorComposition, size);
    let lines = stroke_mask(size, &marking_polylines(spec, field), LINE_WIDTH_PX);
    let contour = stroke_mask(
        size,
        &[polygon_polyline(spec, field, polygon)],
        LINE_WIDTH_PX,
    );
    for y in 0..size {
        for x in 0..size {
            let i = (y * size + x) as usize;
            if lines[i] || contour[i] {
                for c in 0..3 {
                    img.set(x, y, c, 255);
                }
            }
        }
    }
    for loc in localizations {
        if let Some((x0, y0, x1, y1)) = player_square(spec, field, loc.position) {
            for y in y0..y1 {
                for x in x0..x1 {
                    img.set(x, y, 0, loc.color.0);
                    img.set(x, y, 1, loc.color.1);
                    img.set(x, y, 2, loc.color.2);
                }
            }
        }
    }
    img
}

/// Binary-channels top view: channel 0 = field lines, channel 1 = filled
/// visible polygon, channel 2 = player squares. Channels are independent,
/// so players never erase line pixels.
pub fn render_binary_channels(
    spec: &TopViewSpec,
    localizations: &[PlayerLocalization],
    polygon: &VisiblePolygon,
    field: &FieldModel,
) -> TopViewImage {
    let size = spec.size_px;
    let mut img = TopViewImage::new(TopViewMode::BinaryChannels, size);
    let lines = stroke_mask(size, &marking_polylines(spec, field), LINE_WIDTH_PX);
    // Polygon fill test runs in field coordinates.
    let half_l = field.length_m / 2.0 + spec.margin_m;
    let half_w = field.width_m / 2.0 + spec.margin_m;
    for y in 0..size {
        for x in 0..size {
            let i = (y * size + x) as usize;
            if lines[i] {
                img.set(x, y, 0, 1);
            }
            let fx = (x as f64 + 0.5) / size as f64 * 2.0 * half_l - half_l;
            let fy = (y as f64 + 0.5) / size as f64 * 2.0 * half_w - half_w;
            if polygon.contains((fx, fy)) {
                img.set(x, y, 1, 1);
            }
        }
    }
    for loc in localizations {
        if let Some((x0, y0, x1, y1)) = player_square(spec, field, loc.position) {
            for y in y0..y1 {
                for x in x0..x1 {
                    img.set(x, y, 2, 1);
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::standard_field;
    use crate::geometry::Homography;

    fn loc(pos: (f64, f64), color: (u8, u8, u8)) -> PlayerLocalization {
        PlayerLocalization {
            position: pos,
            color,
            bbox_area_px: 100.0,
        }
    }

    fn full_field_polygon(field: &FieldModel) -> VisiblePolygon {
        let hl = field.length_m / 2.0;
        let hw = field.width_m / 2.0;
        VisiblePolygon {
            vertices: vec![(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)],
        }
    }

    #[test]
    fn zone_segmentation_top_down_full_cover() {
        let field = standard_field();
        // Field rectangle onto a 420x272 image (4 px per meter).
        let h = Homography::from_row_major([4.0, 0.0, 210.0, 0.0, 4.0, 136.0, 0.0, 0.0, 1.0])
            .unwrap();
        let frame = ImageFrame::new(420, 272);
        let seg = render_zone_segmentation(&h, &frame, &field);
        assert!(seg.labels.iter().all(|&l| l != 0));
        // Label histogram is area-proportional.
        let mut counts = [0f64; 17];
        for &l in &seg.labels {
            counts[l as usize] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        // Penalty-area remainder: (40.32 * 16.5 - 18.32 * 5.5) m^2.
        let expect = (40.32 * 16.5 - 18.32 * 5.5) / (105.0 * 68.0);
        let got = counts[3] / total;
        assert!((got - expect).abs() < 0.01, "got {got}, expect {expect}");
    }

    #[test]
    fn zone_segmentation_sky_all_zero() {
        let field = standard_field();
        // Camera aimed at ground far past the field boundary.
        let h = Homography::from_row_major([10.0, 0.0, -2000.0, 0.0, 10.0, 0.0, 0.0, 0.0, 1.0])
            .unwrap();
        let seg = render_zone_segmentation(&h, &ImageFrame::new(64, 64), &field);
        assert!(seg.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn zone_segmentation_pixel_zero_matches_corner() {
        let field = standard_field();
        // Meters to pixels 1:1 with origin at image center of a 105x68 frame.
        let h = Homography::from_row_major([1.0, 0.0, 52.5, 0.0, 1.0, 34.0, 0.0, 0.0, 1.0])
            .unwrap();
        let seg = render_zone_segmentation(&h, &ImageFrame::new(105, 68), &field);
        let corner = field.zone_at((-52.0, -33.5)).unwrap();
        assert_eq!(seg.get(0, 0), corner + 1);
    }

    #[test]
    fn cc_player_overrides_lines() {
        let field = standard_field();
        let spec = TopViewSpec::default();
        let img = render_color_composition(
            &spec,
            &[loc((0.0, 0.0), (255, 0, 0))],
            &full_field_polygon(&field),
            &field,
        );
        let (u, v) = spec.to_pixels(&field, (0.0, 0.0));
        let (cx, cy) = (u.round() as u32, v.round() as u32);
        let mut red = 0;
        for y in cy - 4..cy + 4 {
            for x in cx - 4..cx + 4 {
                assert_eq!(
                    (img.get(x, y, 0), img.get(x, y, 1), img.get(x, y, 2)),
                    (255, 0, 0)
                );
                red += 1;
            }
        }
        assert_eq!(red, 64);
    }

    #[test]
    fn cc_player_clipped_at_border() {
        let field = standard_field();
        let spec = TopViewSpec::default();
        // Just inside the margin edge; part of the square falls off-image.
        let img = render_color_composition(
            &spec,
            &[loc((-54.3, 0.0), (0, 255, 0))],
            &VisiblePolygon::default(),
            &field,
        );
        let green: usize = (0..224)
            .flat_map(|y| (0..224).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y, 1) == 255 && img.get(x, y, 0) == 0)
            .count();
        assert!(green > 0 && green < 64);
    }

    #[test]
    fn bc_player_on_line_keeps_line_channel() {
        let field = standard_field();
        let spec = TopViewSpec::default();
        let img = render_binary_channels(
            &spec,
            &[loc((0.0, -20.0), (255, 0, 0))],
            &full_field_polygon(&field),
            &field,
        );
        let (u, v) = spec.to_pixels(&field, (0.0, -20.0));
        let (cx, cy) = (u.round() as u32, v.round() as u32);
        let mut line_under_square = 0;
        for y in cy - 4..cy + 4 {
            for x in cx - 4..cx + 4 {
                assert_eq!(img.get(x, y, 2), 1);
                line_under_square += img.get(x, y, 0) as u32;
            }
        }
        // Halfway line runs straight through the square.
        assert!(line_under_square >= 8);
    }

    #[test]
    fn bc_empty_inputs() {
        let field = standard_field();
        let spec = TopViewSpec::default();
        let img = render_binary_channels(&spec, &[], &VisiblePolygon::default(), &field);
        assert!(img.data.iter().all(|&v| v <= 1));
        for y in 0..224 {
            for x in 0..224 {
                assert_eq!(img.get(x, y, 1), 0);
                assert_eq!(img.get(x, y, 2), 0);
            }
        }
        assert!((0..224 * 224).any(|i| img.data[i * 3] == 1));
    }

    #[test]
    fn bc_full_polygon_fill_area() {
        let field = standard_field();
        let spec = TopViewSpec::default();
        let img = render_binary_channels(&spec, &[], &full_field_polygon(&field), &field);
        let filled: f64 = (0..224u32)
            .flat_map(|y| (0..224u32).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y, 1) == 1)
            .count() as f64;
        // Field rectangle fraction of the margin-padded top view.
        let expect = (105.0 * 68.0) / (109.0 * 72.0) * 224.0 * 224.0;
        assert!((filled - expect).abs() / expect < 0.005);
    }

    #[test]
    fn cc_line_pixel_count_matches_independent_rasterizer() {
        let field = standard_field();
        let spec = TopViewSpec::default();
        let img = render_color_composition(&spec, &[], &VisiblePolygon::default(), &field);
        let got: usize = (0..224u32)
            .flat_map(|y| (0..224u32).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y, 0) == 255)
            .count();
        // Independent rasterizer: walk every marking densely and mark all
        // pixels whose center lies within half the stroke width.
        let mut mask = vec![false; 224 * 224];
        for m in &field.markings {
            let pts: Vec<(f64, f64)> = match m {
                MarkingPrimitive::Segment { a, b, .. } => {
                    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                    let n = (len / 0.01).ceil() as usize;
                    (0..=n)
                        .map(|i| {
                            let t = i as f64 / n as f64;
                            (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
                        })
                        .collect()
                }
                MarkingPrimitive::CircleArc {
                    center,
                    radius,
                    start_angle,
                    end_angle,
                    ..
                } => {
                    let n = ((end_angle - start_angle) * radius / 0.01).ceil() as usize;
                    (0..=n)
                        .map(|i| {
                            let t = start_angle + (end_angle - start_angle) * i as f64 / n as f64;
                            (center.0 + radius * t.cos(), center.1 + radius * t.sin())
                        })
                        .collect()
                }
            };
            for p in pts {
                let (u, v) = spec.to_pixels(&field, p);
                for dy in -3i64..=3 {
                    for dx in -3i64..=3 {
                        let x = u.floor() as i64 + dx;
                        let y = v.floor() as i64 + dy;
                        if !(0..224).contains(&x) || !(0..224).contains(&y) {
                            continue;
                        }
                        let c = (x as f64 + 0.5, y as f64 + 0.5);
                        let d = ((c.0 - u).powi(2) + (c.1 - v).powi(2)).sqrt();
                        if d <= LINE_WIDTH_PX / 2.0 {
                            mask[(y * 224 + x) as usize] = true;
                        }
                    }
                }
            }
        }
        let expect = mask.iter().filter(|&&b| b).count();
        let diff = (got as f64 - expect as f64).abs() / expect as f64;
        assert!(diff < 0.01, "got {got}, oracle {expect}");
    }
}
