//! Template dictionary construction: Gaussian-mixture mode discovery over
//! the training homography distribution, one (homography, template,
//! descriptor) entry per mode.
//!
//! Homographies are clustered in an 8-dimensional chart (the h33 = 1
//! gauge). Mode count is selected automatically by BIC over a K range.
//! Zone-segmentation templates are encoded as deterministic descriptors:
//! a 28x28 majority-vote downsample, one-hot over labels, flattened and
//! scaled to unit norm. Retrieval then reduces to a shortest-L2 scan.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldModel;
use crate::geometry::{Homography, ImageFrame};
use crate::raster::{render_zone_segmentation, ZoneSegmentation};

/// Descriptor grid resolution per axis.
pub const DESCRIPTOR_GRID: u32 = 28;

/// Variance floor for diagonal covariances.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Default template render size.
pub const TEMPLATE_FRAME: ImageFrame = ImageFrame {
    width_px: 960,
    height_px: 540,
};

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("no training samples")]
    EmptySamples,
    #[error("need at least {need} samples for k_max = {k_max}, got {got}")]
    TooFewSamples { need: usize, k_max: usize, got: usize },
    #[error("invalid k range [{0}, {1}]")]
    BadKRange(usize, usize),
    #[error("EM component collapsed and could not be re-seeded")]
    ComponentCollapse,
    #[error("homography has h33 ~ 0; no 8-vector chart representation")]
    ChartExcluded,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// 8-vector chart of a homography: the entries of H / h33 in row-major
/// order, excluding the trailing 1.
pub fn homography_to_vector(h: &Homography) -> Result<[f64; 8], DictionaryError> {
    let m = h.to_row_major();
    if m[8].abs() <= 1e-6 {
        return Err(DictionaryError::ChartExcluded);
    }
    let s = m[8];
    Ok([
        m[0] / s,
        m[1] / s,
        m[2] / s,
        m[3] / s,
        m[4] / s,
        m[5] / s,
        m[6] / s,
        m[7] / s,
    ])
}

pub fn vector_to_homography(v: &[f64; 8]) -> Result<Homography, DictionaryError> {
    Ok(Homography::from_matrix(Matrix3::new(
        v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], 1.0,
    ))?)
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub bic: f64,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }
}

fn log_gauss_diag(x: &[f64], mean: &[f64], cov: &[f64]) -> f64 {
    let mut acc = -0.5 * (x.len() as f64) * (2.0 * std::f64::consts::PI).ln();
    for i in 0..x.len() {
        let d = x[i] - mean[i];
        acc -= 0.5 * (cov[i].ln() + d * d / cov[i]);
    }
    acc
}

fn kmeans_pp_init(samples: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = Vec::with_capacity(k);
    centers.push(samples[rng.gen_range(0..samples.len())].clone());
    let mut d2: Vec<f64> = samples
        .iter()
        .map(|s| sq_dist(s, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..samples.len())
        } else {
            let mut t = rng.gen_range(0.0..total);
            let mut idx = 0;
            for (i, &d) in d2.iter().enumerate() {
                t -= d;
                if t <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centers.push(samples[next].clone());
        for (i, s) in samples.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(s, centers.last().unwrap()));
        }
    }
    centers
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

const EM_MAX_ITERS: usize = 200;
const EM_TOL: f64 = 1e-6;
const COLLAPSE_RETRIES: usize = 3;

/// One EM run at fixed K. The log-likelihood is checked non-decreasing
/// on every iteration.
fn em_single(
    samples: &[Vec<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GmmModel, DictionaryError> {
    let n = samples.len();
    let d = samples[0].len();
    let mut means = kmeans_pp_init(samples, k, rng);
    // Global per-dimension variance as the starting covariance.
    let mut global_var = vec![0.0; d];
    let mut global_mean = vec![0.0; d];
    for s in samples {
        for i in 0..d {
            global_mean[i] += s[i] / n as f64;
        }
    }
    for s in samples {
        for i in 0..d {
            global_var[i] += (s[i] - global_mean[i]).powi(2) / n as f64;
        }
    }
    for v in global_var.iter_mut() {
        *v = v.max(VARIANCE_FLOOR);
    }
    let mut covs = vec![global_var.clone(); k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut resp = vec![vec![0.0f64; k]; n];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = prev_ll;
    let mut retries = 0;
    let mut iter = 0;
    while iter < EM_MAX_ITERS {
        iter += 1;
        // E step.
        ll = 0.0;
        for (i, s) in samples.iter().enumerate() {
            let mut logs = vec![0.0; k];
            for j in 0..k {
                logs[j] = weights[j].max(1e-300).ln() + log_gauss_diag(s, &means[j], &covs[j]);
            }
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logs.iter().map(|l| (l - m).exp()).sum();
            ll += m + sum.ln();
            for j in 0..k {
                resp[i][j] = (logs[j] - m).exp() / sum;
            }
        }
        assert!(
            prev_ll == f64::NEG_INFINITY || ll >= prev_ll - 1e-9,
            "EM log-likelihood decreased: {prev_ll} -> {ll}"
        );
        if (ll - prev_ll).abs() < EM_TOL {
            break;
        }
        prev_ll = ll;
        // M step.
        let mut collapsed = None;
        for j in 0..k {
            let nj: f64 = resp.iter().map(|r| r[j]).sum();
            if nj < 1e-10 {
                collapsed = Some(j);
                break;
            }
            weights[j] = nj / n as f64;
            for t in 0..d {
                means[j][t] = resp
                    .iter()
                    .zip(samples)
                    .map(|(r, s)| r[j] * s[t])
                    .sum::<f64>()
                    / nj;
            }
            for t in 0..d {
                covs[j][t] = (resp
                    .iter()
                    .zip(samples)
                    .map(|(r, s)| r[j] * (s[t] - means[j][t]).powi(2))
                    .sum::<f64>()
                    / nj)
                    .max(VARIANCE_FLOOR);
            }
        }
        if let Some(j) = collapsed {
            if retries >= COLLAPSE_RETRIES {
                return Err(DictionaryError::ComponentCollapse);
            }
            retries += 1;
            // Re-seed the empty component at the sample farthest from any
            // current mean and restart the likelihood tracking.
            let far = samples
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    let da = means.iter().map(|m| sq_dist(a, m)).fold(f64::MAX, f64::min);
                    let db = means.iter().map(|m| sq_dist(b, m)).fold(f64::MAX, f64::min);
                    da.partial_cmp(&db).unwrap()
                })
                .map(|(i, _)| i)
                .unwrap();
            means[j] = samples[far].clone();
            covs[j] = global_var.clone();
            weights[j] = 1.0 / k as f64;
            let s: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= s;
            }
            prev_ll = f64::NEG_INFINITY;
        }
    }
    // Free parameters: (K-1) weights + K*d means + K*d variances.
    let p = (k - 1) + 2 * k * d;
    let bic = -2.0 * ll + p as f64 * (n as f64).ln();
    Ok(GmmModel {
        weights,
        means,
        covariances: covs,
        log_likelihood: ll,
        bic,
    })
}

/// Fits a diagonal GMM for each K in `k_range` and keeps the one with the
/// lowest BIC. Deterministic for a fixed seed.
pub fn fit_gmm(
    samples: &[Vec<f64>],
    k_range: (usize, usize),
    seed: u64,
) -> Result<GmmModel, DictionaryError> {
    if samples.is_empty() {
        return Err(DictionaryError::EmptySamples);
    }
    let (k_min, k_max) = k_range;
    if k_min < 1 || k_max < k_min {
        return Err(DictionaryError::BadKRange(k_min, k_max));
    }
    if samples.len() < 2 * k_max {
        return Err(DictionaryError::TooFewSamples {
            need: 2 * k_max,
            k_max,
            got: samples.len(),
        });
    }
    let mut best: Option<GmmModel> = None;
    for k in k_min..=k_max {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let model = em_single(samples, k, &mut rng)?;
        if best.as_ref().map_or(true, |b| model.bic < b.bic) {
            best = Some(model);
        }
    }
    Ok(best.unwrap())
}

/// Descriptor layout metadata, persisted with the dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorSpec {
    pub grid: u32,
    pub channels: u32,
}

/// One dictionary entry: a mode homography, its rendered template, and
/// the template descriptor.
#[derive(Debug, Clone)]
pub struct DictEntry {
    pub homography: Homography,
    pub template: ZoneSegmentation,
    pub descriptor: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TemplateDictionary {
    pub entries: Vec<DictEntry>,
    pub frame: ImageFrame,
    pub descriptor_spec: DescriptorSpec,
    pub seed: u64,
}

/// Majority-vote downsample to a 28x28 grid, one-hot over labels,
/// flattened and scaled by 1/sqrt(cells) so the descriptor has unit norm.
pub fn descriptor_of(seg: &ZoneSegmentation, channels: u32) -> Vec<f64> {
    let g = DESCRIPTOR_GRID;
    let scale = 1.0 / ((g * g) as f64).sqrt();
    let mut out = vec![0.0; (g * g * channels) as usize];
    for cy in 0..g {
        for cx in 0..g {
            let x0 = (cx * seg.width_px / g) as u32;
            let x1 = ((cx + 1) * seg.width_px / g).max(x0 + 1);
            let y0 = (cy * seg.height_px / g) as u32;
            let y1 = ((cy + 1) * seg.height_px / g).max(y0 + 1);
            let mut counts = vec![0u32; channels as usize];
            for y in y0..y1.min(seg.height_px) {
                for x in x0..x1.min(seg.width_px) {
                    counts[seg.get(x, y) as usize] += 1;
                }
            }
            // Majority vote, ties to the smaller label.
            let mut label = 0;
            for (l, &c) in counts.iter().enumerate() {
                if c > counts[label] {
                    label = l;
                }
            }
            out[((cy * g + cx) * channels + label as u32) as usize] = scale;
        }
    }
    out
}

pub fn descriptor_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Builds the template dictionary from training homographies: chart the
/// samples, fit a GMM with automatic mode count, and render one template
/// per mode mean.
pub fn build_dictionary(
    train: &[Homography],
    frame: &ImageFrame,
    field: &FieldModel,
    k_range: (usize, usize),
    seed: u64,
) -> Result<TemplateDictionary, DictionaryError> {
    if train.is_empty() {
        return Err(DictionaryError::EmptySamples);
    }
    let samples: Vec<Vec<f64>> = train
        .iter()
        .map(|h| homography_to_vector(h).map(|v| v.to_vec()))
        .collect::<Result<_, _>>()?;
    let channels = field.zone_count() as u32 + 1;
    let descriptor_spec = DescriptorSpec {
        grid: DESCRIPTOR_GRID,
        channels,
    };
    let model = if train.len() == 1 {
        // Degenerate single-sample dictionary: one mode at the sample.
        GmmModel {
            weights: vec![1.0],
            means: vec![samples[0].clone()],
            covariances: vec![vec![VARIANCE_FLOOR; 8]],
            log_likelihood: 0.0,
            bic: 0.0,
        }
    } else {
        let k_max = k_range.1.min(train.len() / 2).max(k_range.0);
        fit_gmm(&samples, (k_range.0, k_max), seed)?
    };
    let entries = model
        .means
        .iter()
        .map(|m| {
            let v: [f64; 8] = std::array::from_fn(|i| m[i]);
            let homography = vector_to_homography(&v)?;
            let template = render_zone_segmentation(&homography, frame, field);
            let descriptor = descriptor_of(&template, channels);
            Ok(DictEntry {
                homography,
                template,
                descriptor,
            })
        })
        .collect::<Result<Vec<_>, DictionaryError>>()?;
    Ok(TemplateDictionary {
        entries,
        frame: *frame,
        descriptor_spec,
        seed,
    })
}
