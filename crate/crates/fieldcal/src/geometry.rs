//! Homography algebra: projection, composition, DLT estimation, and the
//! visible-field polygon.
//!
//! A [`Homography`] maps field-plane homogeneous coordinates (meters) to
//! image homogeneous coordinates (pixels). Matrices are stored normalized
//! to unit Frobenius norm with a canonical sign so that equality and
//! chart extraction are well defined.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldModel;

/// Homogeneous scale below which a projected point counts as at or behind
/// the horizon.
pub const HORIZON_EPS: f64 = 1e-9;

/// Half-plane margin used when clipping the image rectangle against the
/// horizon line, in normalized homography coordinates.
pub const HORIZON_CLIP_EPS: f64 = 1e-6;

const DET_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("homography is singular (|det| = {0:e} after normalization)")]
    Singular(f64),
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPairs(usize),
    #[error("degenerate correspondence configuration (rank-deficient design matrix)")]
    Degenerate,
    #[error("homography has h33 ~ 0; no 8-vector chart representation")]
    ChartExcluded,
}

/// Image dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFrame {
    pub width_px: u32,
    pub height_px: u32,
}

impl ImageFrame {
    pub fn new(width_px: u32, height_px: u32) -> Self {
        assert!(width_px >= 1 && height_px >= 1);
        Self {
            width_px,
            height_px,
        }
    }

    /// Corners of the image rectangle, counter-clockwise in image coords.
    fn corners(&self) -> [(f64, f64); 4] {
        let w = self.width_px as f64;
        let h = self.height_px as f64;
        [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
    }
}

/// 3x3 projective map from the field plane (meters) to the image (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

impl Homography {
    /// Builds a homography from a row-major 3x3 matrix, normalizing it.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let n = normalize(m);
        let det = n.determinant();
        if det.abs() <= DET_TOL {
            return Err(GeometryError::Singular(det.abs()));
        }
        Ok(Self { h: n })
    }

    /// Builds a homography from 9 row-major entries.
    pub fn from_row_major(v: [f64; 9]) -> Result<Self, GeometryError> {
        Ok(Self::from_matrix(Matrix3::new(
            v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8],
        ))?)
    }

    pub fn identity() -> Self {
        Self {
            h: normalize(Matrix3::identity()),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    /// Row-major entries of the normalized matrix.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.h;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let inv = self
            .h
            .try_inverse()
            .ok_or(GeometryError::Singular(0.0))?;
        Self::from_matrix(inv)
    }

    /// Projects a field-plane point to the image; `None` at or behind the horizon.
    pub fn project(&self, p: (f64, f64)) -> Option<(f64, f64)> {
        let v = self.h * Vector3::new(p.0, p.1, 1.0);
        if v.z.abs() <= HORIZON_EPS {
            return None;
        }
        Some((v.x / v.z, v.y / v.z))
    }

    /// Back-projects an image point to the field plane.
    pub fn unproject(&self, q: (f64, f64)) -> Option<(f64, f64)> {
        self.inverse().ok()?.project(q)
    }

    /// Normalized product `self * other`.
    pub fn compose(&self, other: &Homography) -> Result<Homography, GeometryError> {
        Homography::from_matrix(self.h * other.h)
    }

    /// Frobenius distance between the normalized matrices, sign-insensitive.
    pub fn distance(&self, other: &Homography) -> f64 {
        let d1 = (self.h - other.h).norm();
        let d2 = (self.h + other.h).norm();
        d1.min(d2)
    }
}

/// Frobenius-normalizes `m` and canonicalizes the sign: h33 >= 0 when
/// |h33| is meaningful, otherwise the first entry of largest magnitude
/// is made positive.
fn normalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let n = m.norm();
    let mut out = m / n;
    let pivot = if out[(2, 2)].abs() > 1e-9 {
        out[(2, 2)]
    } else {
        let mut best = 0.0f64;
        for v in out.iter() {
            if v.abs() > best.abs() {
                best = *v;
            }
        }
        best
    };
    if pivot < 0.0 {
        out = -out;
    }
    out
}

/// Least-squares DLT homography from point correspondences with Hartley
/// normalization. Requires at least 4 pairs in general position.
pub fn estimate_dlt(pairs: &[((f64, f64), (f64, f64))]) -> Result<Homography, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::TooFewPairs(pairs.len()));
    }
    let (t_src, src) = hartley_normalize(pairs.iter().map(|p| p.0));
    let (t_dst, dst) = hartley_normalize(pairs.iter().map(|p| p.1));

    let n = pairs.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(2 * n, 9);
    for i in 0..n {
        let (x, y) = src[i];
        let (u, v) = dst[i];
        a[(2 * i, 0)] = -x;
        a[(2 * i, 1)] = -y;
        a[(2 * i, 2)] = -1.0;
        a[(2 * i, 6)] = u * x;
        a[(2 * i, 7)] = u * y;
        a[(2 * i, 8)] = u;
        a[(2 * i + 1, 3)] = -x;
        a[(2 * i + 1, 4)] = -y;
        a[(2 * i + 1, 5)] = -1.0;
        a[(2 * i + 1, 6)] = v * x;
        a[(2 * i + 1, 7)] = v * y;
        a[(2 * i + 1, 8)] = v;
    }
    // Solve via the normal matrix so the full right singular basis is
    // available even when the design matrix has fewer rows than columns.
    let ata = a.transpose() * &a;
    let eig = nalgebra::SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lam_max = eig.eigenvalues[order[8]].max(1e-300);
    // Two near-zero eigenvalues mean the correspondences do not pin down
    // a unique homography.
    if eig.eigenvalues[order[1]] / lam_max < 1e-16 {
        return Err(GeometryError::Degenerate);
    }
    let hvec = eig.eigenvectors.column(order[0]);
    let hn = Matrix3::new(
        hvec[0], hvec[1], hvec[2], hvec[3], hvec[4], hvec[5], hvec[6], hvec[7], hvec[8],
    );
    let t_dst_inv = t_dst.try_inverse().ok_or(GeometryError::Degenerate)?;
    Homography::from_matrix(t_dst_inv * hn * t_src)
}

fn hartley_normalize(
    pts: impl Iterator<Item = (f64, f64)>,
) -> (Matrix3<f64>, Vec<(f64, f64)>) {
    let pts: Vec<(f64, f64)> = pts.collect();
    let n = pts.len() as f64;
    let (cx, cy) = pts
        .iter()
        .fold((0.0, 0.0), |(ax, ay), p| (ax + p.0, ay + p.1));
    let (cx, cy) = (cx / n, cy / n);
    let mean_dist = pts
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let out = pts
        .iter()
        .map(|p| (s * (p.0 - cx), s * (p.1 - cy)))
        .collect();
    (t, out)
}

/// Convex polygon in field-plane coordinates, counter-clockwise. May be
/// empty when the camera sees no field at all.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VisiblePolygon {
    pub vertices: Vec<(f64, f64)>,
}

impl VisiblePolygon {
    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        if self.is_empty() {
            return false;
        }
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if cross(a, b, p) < -1e-9 {
                return false;
            }
        }
        true
    }
}

/// Signed area of a simple polygon (positive for CCW).
pub fn polygon_area(vertices: &[(f64, f64)]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        s += a.0 * b.1 - b.0 * a.1;
    }
    s / 2.0
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Clips a convex polygon against the half-plane `a*x + b*y + c >= 0`.
pub fn clip_halfplane(poly: &[(f64, f64)], a: f64, b: f64, c: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = a * p.0 + b * p.1 + c;
        let dq = a * q.0 + b * q.1 + c;
        if dp >= 0.0 {
            out.push(p);
        }
        if (dp > 0.0 && dq < 0.0) || (dp < 0.0 && dq > 0.0) {
            let t = dp / (dp - dq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

/// Intersection of two convex polygons (Sutherland-Hodgman). Inputs must
/// be CCW; output is CCW and may be empty.
pub fn clip_convex(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    let mut poly = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        let a = clip[i];
        let b = clip[(i + 1) % n];
        // Half-plane to the left of edge a->b.
        let (ha, hb) = (a.1 - b.1, b.0 - a.0);
        let hc = -(ha * a.0 + hb * a.1);
        poly = clip_halfplane(&poly, ha, hb, hc);
        if poly.len() < 3 {
            return Vec::new();
        }
    }
    poly
}

/// Enforces CCW orientation in place.
fn orient_ccw(poly: &mut Vec<(f64, f64)>) {
    if polygon_area(poly) < 0.0 {
        poly.reverse();
    }
}

/// Region of the field plane imaged by the camera: the image rectangle is
/// clipped against the horizon half-plane, back-projected to the field,
/// and clipped against the field boundary rectangle.
pub fn visible_field_polygon(
    h: &Homography,
    frame: &ImageFrame,
    field: &FieldModel,
) -> VisiblePolygon {
    let inv = match h.inverse() {
        Ok(i) => i,
        Err(_) => return VisiblePolygon::default(),
    };
    let m = inv.matrix();
    // Horizon of the back-projection: the image line where the third
    // homogeneous component of inv * [u, v, 1] vanishes. The sign gauge
    // of a normalized matrix says nothing about which side the camera
    // actually faces, so both sides are clipped to the field rectangle
    // and the one covering more field wins.
    let (a, b, c) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    let hl = field.length_m / 2.0;
    let hw = field.width_m / 2.0;
    let rect = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)];
    let side = |sign: f64| -> Vec<(f64, f64)> {
        let mut img: Vec<(f64, f64)> = frame.corners().to_vec();
        orient_ccw(&mut img);
        img = clip_halfplane(&img, sign * a, sign * b, sign * c - HORIZON_CLIP_EPS);
        if img.len() < 3 {
            return Vec::new();
        }
        let mut fieldpts = Vec::with_capacity(img.len());
        for q in &img {
            match inv.project(*q) {
                Some(p) => fieldpts.push(p),
                None => return Vec::new(),
            }
        }
        orient_ccw(&mut fieldpts);
        let mut out = clip_convex(&fieldpts, &rect);
        orient_ccw(&mut out);
        out
    };
    let pos = side(1.0);
    let neg = side(-1.0);
    let out = if polygon_area(&pos) >= polygon_area(&neg) {
        pos
    } else {
        neg
    };
    if polygon_area(&out) <= 1e-9 {
        return VisiblePolygon::default();
    }
    VisiblePolygon { vertices: out }
}
