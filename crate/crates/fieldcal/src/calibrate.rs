//! Three-step calibration: retrieve the nearest dictionary template,
//! refine the alignment with Levenberg-Marquardt over a chamfer cost,
//! and compose the correction with the template homography.
//!
//! The refinement aligns zone-boundary points sampled from the input
//! segmentation with the template's zone boundaries. Distances come from
//! a precomputed exact Euclidean distance transform of the template
//! boundary map, sampled bilinearly, so each LM iteration costs only a
//! few hundred lookups.

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{descriptor_distance, descriptor_of, TemplateDictionary};
use crate::field::FieldModel;
use crate::geometry::{visible_field_polygon, Homography, ImageFrame};
use crate::raster::ZoneSegmentation;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("insufficient field content ({0} boundary points, need at least 20)")]
    InsufficientFieldContent(usize),
    #[error("empty dictionary")]
    EmptyDictionary,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Calibration tuning knobs. The thresholds feed the binary relevance
/// score; the sampling seed keeps per-frame results deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrateOpts {
    /// RMS chamfer residual (pixels) above which a frame is flagged
    /// irrelevant.
    pub residual_max: f64,
    /// Minimum visible-field area (square meters) for a relevant frame.
    pub min_visible_area: f64,
    /// Number of boundary points sampled for the chamfer cost.
    pub boundary_samples: usize,
    /// Seed for boundary-point sampling.
    pub sample_seed: u64,
    /// LM iteration budget.
    pub max_iters: usize,
}

impl Default for CalibrateOpts {
    fn default() -> Self {
        Self {
            residual_max: 3.0,
            min_visible_area: 50.0,
            boundary_samples: 512,
            sample_seed: 0,
            max_iters: 100,
        }
    }
}

/// Result of calibrating one frame. `relevance` stays 0 when the frame
/// looks implausible; the homography is still reported.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub homography: Homography,
    pub relevance: u8,
    pub residual: f64,
    pub template_index: usize,
}

/// Index of the dictionary entry whose descriptor is L2-closest to the
/// segmentation's, ties to the smaller index.
pub fn retrieve(seg: &ZoneSegmentation, dict: &TemplateDictionary) -> Result<(usize, f64), CalibrateError> {
    if dict.entries.is_empty() {
        return Err(CalibrateError::EmptyDictionary);
    }
    let desc = descriptor_of(seg, dict.descriptor_spec.channels);
    let mut best = (0usize, f64::MAX);
    for (i, e) in dict.entries.iter().enumerate() {
        let d = descriptor_distance(&desc, &e.descriptor);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Exact Euclidean distance transform (Felzenszwalb-Huttenlocher).
/// Returns per-pixel distance to the nearest set pixel.
pub fn distance_transform(width: usize, height: usize, set: &[bool]) -> Vec<f64> {
    const INF: f64 = 1e20;
    let mut d: Vec<f64> = set.iter().map(|&s| if s { 0.0 } else { INF }).collect();
    // Columns.
    let mut col = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = d[y * width + x];
        }
        let t = dt_1d(&col);
        for y in 0..height {
            d[y * width + x] = t[y];
        }
    }
    // Rows.
    let mut row = vec![0.0; width];
    for y in 0..height {
        row.copy_from_slice(&d[y * width..(y + 1) * width]);
        let t = dt_1d(&row);
        d[y * width..(y + 1) * width].copy_from_slice(&t);
    }
    for v in d.iter_mut() {
        *v = v.sqrt();
    }
    d
}

/// 1D squared distance transform of a sampled function.
fn dt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut d = vec![0.0f64; n];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
    d
}

/// Bilinear sample of a distance field with a linear penalty for points
/// outside the grid.
fn sample_distance(dt: &[f64], width: usize, height: usize, p: (f64, f64)) -> f64 {
    let cx = p.0.clamp(0.0, (width - 1) as f64);
    let cy = p.1.clamp(0.0, (height - 1) as f64);
    let outside = ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt();
    let x0 = cx.floor() as usize;
    let y0 = cy.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = cx - x0 as f64;
    let fy = cy - y0 as f64;
    let v00 = dt[y0 * width + x0];
    let v10 = dt[y0 * width + x1];
    let v01 = dt[y1 * width + x0];
    let v11 = dt[y1 * width + x1];
    let v = v00 * (1.0 - fx) * (1.0 - fy)
        + v10 * fx * (1.0 - fy)
        + v01 * (1.0 - fx) * fy
        + v11 * fx * fy;
    v + outside
}

fn chart_to_matrix(p: &[f64; 8]) -> Matrix3<f64> {
    Matrix3::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0)
}

/// Normalizing similarity mapping a frame's pixel coordinates to roughly
/// [-1, 1]; LM parameters stay well scaled across image sizes.
fn norm_transform(frame: &ImageFrame) -> (Matrix3<f64>, Matrix3<f64>) {
    let sx = 2.0 / frame.width_px as f64;
    let sy = 2.0 / frame.height_px as f64;
    let s = Matrix3::new(sx, 0.0, -1.0, 0.0, sy, -1.0, 0.0, 0.0, 1.0);
    let sinv = Matrix3::new(
        1.0 / sx,
        0.0,
        frame.width_px as f64 / 2.0,
        0.0,
        1.0 / sy,
        frame.height_px as f64 / 2.0,
        0.0,
        0.0,
        1.0,
    );
    (s, sinv)
}

struct ChamferProblem<'a> {
    dt: &'a [f64],
    width: usize,
    height: usize,
    points: &'a [(f64, f64)],
    /// seg pixels -> normalized coords.
    s_seg: Matrix3<f64>,
    /// normalized coords -> template pixels.
    sinv_tpl: Matrix3<f64>,
}

impl ChamferProblem<'_> {
    fn residuals(&self, params: &[f64; 8], out: &mut DVector<f64>) {
        let d_norm = chart_to_matrix(params);
        let m = self.sinv_tpl * d_norm * self.s_seg;
        for (i, &(u, v)) in self.points.iter().enumerate() {
            let w = m[(2, 0)] * u + m[(2, 1)] * v + m[(2, 2)];
            if w.abs() < 1e-12 {
                out[i] = 1e6;
                continue;
            }
            let x = (m[(0, 0)] * u + m[(0, 1)] * v + m[(0, 2)]) / w;
            let y = (m[(1, 0)] * u + m[(1, 1)] * v + m[(1, 2)]) / w;
            out[i] = sample_distance(self.dt, self.width, self.height, (x, y));
        }
    }
}

/// Shared refinement setup: sampled boundary points plus the template
/// distance field and coordinate normalizers.
struct ProblemSetup {
    dt: Vec<f64>,
    width: usize,
    height: usize,
    points: Vec<(f64, f64)>,
    s_seg: Matrix3<f64>,
    sinv_tpl: Matrix3<f64>,
}

impl ProblemSetup {
    fn build(
        seg: &ZoneSegmentation,
        template: &ZoneSegmentation,
        opts: &CalibrateOpts,
    ) -> Result<Self, CalibrateError> {
        let boundary = seg.boundary_pixels();
        if boundary.len() < 20 {
            return Err(CalibrateError::InsufficientFieldContent(boundary.len()));
        }
        // Deterministic subsample of the boundary. Integer coordinates:
        // the template distance field is exactly zero at boundary pixels,
        // so a perfect alignment costs zero.
        let mut rng = ChaCha8Rng::seed_from_u64(opts.sample_seed);
        let n = opts.boundary_samples.min(boundary.len());
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let (x, y) = boundary[rng.gen_range(0..boundary.len())];
                (x as f64, y as f64)
            })
            .collect();

        let tw = template.width_px as usize;
        let th = template.height_px as usize;
        let mut set = vec![false; tw * th];
        for (x, y) in template.boundary_pixels() {
            set[y as usize * tw + x as usize] = true;
        }
        let dt = distance_transform(tw, th, &set);

        let (s_seg, _) = norm_transform(&ImageFrame::new(seg.width_px, seg.height_px));
        let (_, sinv_tpl) =
            norm_transform(&ImageFrame::new(template.width_px, template.height_px));
        Ok(Self {
            dt,
            width: tw,
            height: th,
            points,
            s_seg,
            sinv_tpl,
        })
    }

    fn problem(&self) -> ChamferProblem<'_> {
        ChamferProblem {
            dt: &self.dt,
            width: self.width,
            height: self.height,
            points: &self.points,
            s_seg: self.s_seg,
            sinv_tpl: self.sinv_tpl,
        }
    }
}

/// Root-mean-square boundary distance of `seg` against the template
/// with no correction applied; the starting cost of [`refine`].
pub fn identity_residual(
    seg: &ZoneSegmentation,
    template: &ZoneSegmentation,
    opts: &CalibrateOpts,
) -> Result<f64, CalibrateError> {
    let setup = ProblemSetup::build(seg, template, opts)?;
    let problem = setup.problem();
    let params = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let mut r = DVector::zeros(setup.points.len());
    problem.residuals(&params, &mut r);
    Ok((r.norm_squared() / setup.points.len() as f64).sqrt())
}

/// Levenberg-Marquardt alignment of `seg`'s zone boundaries against a
/// template. Returns the correction homography (template image ->
/// segmentation image) and the final root-mean-square boundary distance
/// in pixels.
pub fn refine(
    seg: &ZoneSegmentation,
    template: &ZoneSegmentation,
    opts: &CalibrateOpts,
) -> Result<(Homography, f64), CalibrateError> {
    let setup = ProblemSetup::build(seg, template, opts)?;
    let problem = setup.problem();

    let mut params = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let m = setup.points.len();
    let mut r = DVector::zeros(m);
    let mut r_try = DVector::zeros(m);
    problem.residuals(&params, &mut r);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    const FD_STEP: f64 = 1e-6;

    for _ in 0..opts.max_iters {
        // Forward-difference Jacobian.
        let mut jac = DMatrix::zeros(m, 8);
        for j in 0..8 {
            let mut p = params;
            p[j] += FD_STEP;
            problem.residuals(&p, &mut r_try);
            for i in 0..m {
                jac[(i, j)] = (r_try[i] - r[i]) / FD_STEP;
            }
        }
        let g = jac.transpose() * &r;
        if g.amax() < 1e-6 {
            break;
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for j in 0..8 {
                a[(j, j)] += lambda * (jtj[(j, j)].max(1e-12));
            }
            let Some(step) = a.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let mut p = params;
            for j in 0..8 {
                p[j] -= step[j];
            }
            problem.residuals(&p, &mut r_try);
            let c = r_try.norm_squared();
            if c < cost {
                params = p;
                std::mem::swap(&mut r, &mut r_try);
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }

    let rms_residual = (cost / m as f64).sqrt();
    // params describe D: seg -> template in pixel coordinates; the
    // correction C is its inverse.
    let d_px = setup.sinv_tpl * chart_to_matrix(&params) * setup.s_seg;
    let d = Homography::from_matrix(d_px)?;
    let correction = d.inverse()?;
    Ok((correction, rms_residual))
}

/// Full per-frame calibration. Refinement failures degrade to a
/// relevance-0 result carrying the raw template homography.
pub fn calibrate_frame(
    seg: &ZoneSegmentation,
    dict: &TemplateDictionary,
    frame: &ImageFrame,
    field: &FieldModel,
    opts: &CalibrateOpts,
) -> Result<CalibrationResult, CalibrateError> {
    let (template_index, _) = retrieve(seg, dict)?;
    let entry = &dict.entries[template_index];
    match refine(seg, &entry.template, opts) {
        Ok((correction, residual)) => {
            let homography = correction.compose(&entry.homography)?;
            let area = visible_field_polygon(&homography, frame, field).area();
            let relevance =
                u8::from(residual <= opts.residual_max && area >= opts.min_visible_area);
            Ok(CalibrationResult {
                homography,
                relevance,
                residual,
                template_index,
            })
        }
        Err(CalibrateError::InsufficientFieldContent(_)) => Ok(CalibrationResult {
            homography: entry.homography,
            relevance: 0,
            residual: f64::INFINITY,
            template_index,
        }),
        Err(e) => Err(e),
    }
}
