//! End-to-end acceptance gate. Each test covers one criterion and prints
//! a single PASS/FAIL line (visible with `--nocapture`).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fieldcal::calibrate::{identity_residual, refine, CalibrateOpts, CalibrationResult};
use fieldcal::dictionary::fit_gmm;
use fieldcal::eval::{
    average_map, frame_time, iou_pair, GroundTruthAction, IouReport, SpottingPrediction,
    CLASS_REGISTRY,
};
use fieldcal::field::standard_field;
use fieldcal::formats::{read_doc, write_doc, CalibrationFile, FrameRecord, FORMAT_VERSION};
use fieldcal::geometry::{estimate_dlt, visible_field_polygon, Homography, ImageFrame};
use fieldcal::localization::{build_player_graph, localize, PlayerLocalization};
use fieldcal::raster::{
    render_binary_channels, render_color_composition, render_zone_segmentation, TopViewSpec,
};
use fieldcal::synth::{generate_scene, pose_for_frame, SceneParams};

fn criterion(name: &str, f: impl FnOnce()) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(()) => println!("ACCEPTANCE {name}: PASS"),
        Err(e) => {
            println!("ACCEPTANCE {name}: FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fieldcal"))
}

fn run_ok(cmd: &mut Command) {
    let out = cmd.output().expect("spawn fieldcal");
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn random_pose(rng: &mut ChaCha8Rng, frame: &ImageFrame) -> Homography {
    let field = standard_field();
    pose_for_frame(
        &field,
        frame,
        rng.gen_range(-0.35..0.35),
        rng.gen_range(-0.1..0.1),
        rng.gen_range(-0.1..0.25),
    )
}

// -------------------------------------------------------------------
// 1. Homography core.

#[test]
fn c01_dlt_recovery() {
    criterion("01 dlt-recovery", || {
        let frame = ImageFrame::new(960, 540);
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let truth = random_pose(&mut rng, &frame);
            let pts = [(-40.0, -25.0), (40.0, -25.0), (40.0, 25.0), (-40.0, 25.0)];
            let pairs: Vec<_> = pts
                .iter()
                .map(|&p| (p, truth.project(p).expect("point projects")))
                .collect();
            let est = estimate_dlt(&pairs).expect("dlt solves");
            // Matrices are unit Frobenius norm, so the distance is the
            // relative error.
            assert!(
                est.distance(&truth) < 1e-6,
                "seed {seed}: distance {}",
                est.distance(&truth)
            );
        }
    });
}

// -------------------------------------------------------------------
// 2. IoU metric.

/// Raster IoU oracle at 10 px/m over the bounding box of both polygons.
fn raster_iou(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let contains = |poly: &[(f64, f64)], p: (f64, f64)| -> bool {
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let (x1, y1) = poly[i];
            let (x2, y2) = poly[(i + 1) % n];
            if (y1 > p.1) != (y2 > p.1) && p.0 < (x2 - x1) * (p.1 - y1) / (y2 - y1) + x1 {
                inside = !inside;
            }
        }
        inside
    };
    let xs = a.iter().chain(b).map(|p| p.0);
    let ys = a.iter().chain(b).map(|p| p.1);
    let min_x = xs.clone().fold(f64::MAX, f64::min);
    let max_x = xs.fold(f64::MIN, f64::max);
    let min_y = ys.clone().fold(f64::MAX, f64::min);
    let max_y = ys.fold(f64::MIN, f64::max);
    let step = 0.1;
    let (mut inter, mut union) = (0u64, 0u64);
    let nx = ((max_x - min_x) / step).ceil() as i64 + 1;
    let ny = ((max_y - min_y) / step).ceil() as i64 + 1;
    for iy in 0..ny {
        for ix in 0..nx {
            let p = (
                min_x + (ix as f64 + 0.5) * step,
                min_y + (iy as f64 + 0.5) * step,
            );
            let ia = contains(a, p);
            let ib = contains(b, p);
            if ia && ib {
                inter += 1;
            }
            if ia || ib {
                union += 1;
            }
        }
    }
    inter as f64 / union as f64
}

#[test]
fn c02_iou_metric() {
    criterion("02 iou-metric", || {
        let field = standard_field();
        let frame = ImageFrame::new(960, 540);
        // Self-IoU is exactly (1, 1).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let h = random_pose(&mut rng, &frame);
            let p = iou_pair(&h, &h, &frame, &field);
            assert!((p.entire.expect("defined") - 1.0).abs() < 1e-9);
            assert!((p.part.expect("defined") - 1.0).abs() < 1e-9);
        }
        // Closed form: a 5 m length-wise offset between two top-down
        // cameras leaves a 100x68 overlap of two 105x68 rectangles.
        let h_gt = Homography::from_row_major([
            10.0, 0.0, 525.0, 0.0, 10.0, 340.0, 0.0, 0.0, 1.0,
        ])
        .unwrap();
        let shift = Homography::from_row_major([
            1.0, 0.0, 50.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
        ])
        .unwrap();
        let h_pred = shift.compose(&h_gt).unwrap();
        let big = ImageFrame::new(1050, 680);
        let p = iou_pair(&h_gt, &h_pred, &big, &field);
        assert!((p.entire.unwrap() - 100.0 / 110.0).abs() < 1e-6);
        // Polygon clipping against the raster oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rect = [(-52.5, -34.0), (52.5, -34.0), (52.5, 34.0), (-52.5, 34.0)];
        let mut checked = 0;
        while checked < 200 {
            let h_gt = random_pose(&mut rng, &frame);
            let h_pred = random_pose(&mut rng, &frame);
            let p = iou_pair(&h_gt, &h_pred, &frame, &field);
            let Some(entire) = p.entire else { continue };
            // Mirror the metric's mapped quadrilateral.
            let m = h_gt.inverse().unwrap().compose(&h_pred).unwrap();
            let mapped: Vec<(f64, f64)> = rect
                .iter()
                .map(|&q| m.project(q).expect("consistent side"))
                .collect();
            let oracle = raster_iou(&rect, &mapped);
            assert!(
                (entire - oracle).abs() < 0.005,
                "entire {entire} vs oracle {oracle}"
            );
            checked += 1;
        }
    });
}

// -------------------------------------------------------------------
// 3. GMM and dictionary retrieval.

#[test]
fn c03_gmm_dictionary() {
    criterion("03 gmm-dictionary", || {
        // 300 samples, 3 well-separated 2-D Gaussians, fixed seed.
        let sigma = 0.4;
        let centers = [[0.0, 0.0], [8.0, 0.0], [4.0, 7.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(145);
        let mut samples = Vec::new();
        for _ in 0..100 {
            for c in &centers {
                let gauss = |rng: &mut ChaCha8Rng| {
                    let u1: f64 = rng.gen_range(1e-12..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                };
                samples.push(vec![c[0] + sigma * gauss(&mut rng), c[1] + sigma * gauss(&mut rng)]);
            }
        }
        let model = fit_gmm(&samples, (1, 6), 9).expect("fit");
        assert_eq!(model.k(), 3, "BIC selected {}", model.k());
        for c in &centers {
            let err = model
                .means
                .iter()
                .map(|m| ((m[0] - c[0]).powi(2) + (m[1] - c[1]).powi(2)).sqrt())
                .fold(f64::MAX, f64::min);
            assert!(err < 0.1 * sigma, "mean error {err}");
        }
        // Retrieve-self over a rendered dictionary.
        let field = standard_field();
        let frame = ImageFrame::new(480, 270);
        let train: Vec<Homography> = (0..12)
            .map(|i| {
                let pan = -0.33 + 0.06 * i as f64;
                let tilt = if i % 2 == 0 { -0.06 } else { 0.06 };
                let zoom = 0.05 * (i % 3) as f64;
                pose_for_frame(&field, &frame, pan, tilt, zoom)
            })
            .collect();
        let dict =
            fieldcal::dictionary::build_dictionary(&train, &frame, &field, (6, 6), 0).unwrap();
        for (i, e) in dict.entries.iter().enumerate() {
            let (idx, d) = fieldcal::calibrate::retrieve(&e.template, &dict).unwrap();
            assert_eq!(idx, i);
            assert_eq!(d, 0.0);
        }
    });
}

// -------------------------------------------------------------------
// 4. Calibration closed loop.

fn closed_loop(dir: &Path, noise: f64, frames: u32) -> IouReport {
    let data = dir.join("data");
    let dict = dir.join("dict");
    let calib = dir.join("calib.json");
    run_ok(bin().args([
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--frames",
        &frames.to_string(),
        "--seed",
        "404",
        "--noise",
        &noise.to_string(),
    ]));
    run_ok(bin().args([
        "build-dict",
        "--train",
        data.join("truth.json").to_str().unwrap(),
        "--out",
        dict.to_str().unwrap(),
        "--k-max",
        "12",
    ]));
    run_ok(bin().args([
        "calibrate",
        "--dict",
        dict.to_str().unwrap(),
        "--segs",
        data.to_str().unwrap(),
        "--out",
        calib.to_str().unwrap(),
    ]));
    let truth: CalibrationFile = read_doc(&data.join("truth.json")).unwrap();
    let pred: CalibrationFile = read_doc(&calib).unwrap();
    let field = standard_field();
    let frame = ImageFrame::new(480, 270);
    let pairs = truth
        .frames
        .iter()
        .zip(&pred.frames)
        .map(|(t, p)| {
            iou_pair(
                &t.to_result().unwrap().homography,
                &p.to_result().unwrap().homography,
                &frame,
                &field,
            )
        })
        .collect();
    IouReport::from_pairs(pairs)
}

#[test]
fn c04_calibration_closed_loop() {
    criterion("04 calibration-closed-loop", || {
        let start = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let clean = closed_loop(&dir.path().join("clean"), 0.0, 200);
        assert!(
            clean.median_part.unwrap() >= 0.98,
            "clean median part {:?}",
            clean.median_part
        );
        assert!(
            clean.median_entire.unwrap() >= 0.95,
            "clean median entire {:?}",
            clean.median_entire
        );
        let noisy = closed_loop(&dir.path().join("noisy"), 0.05, 200);
        assert!(
            noisy.median_part.unwrap() >= 0.90,
            "noisy median part {:?}",
            noisy.median_part
        );
        assert!(
            start.elapsed().as_secs() < 300,
            "took {:?}",
            start.elapsed()
        );
    });
}

// -------------------------------------------------------------------
// 5. Refinement monotonicity.

#[test]
fn c05_refine_monotonic() {
    criterion("05 refine-monotonic", || {
        let field = standard_field();
        let frame = ImageFrame::new(240, 135);
        let opts = CalibrateOpts::default();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let mut runs = 0;
        while runs < 500 {
            let pan = rng.gen_range(-0.3..0.3);
            let tpl_h = pose_for_frame(&field, &frame, pan, 0.0, 0.0);
            let seg_h = pose_for_frame(
                &field,
                &frame,
                pan + rng.gen_range(-0.03..0.03),
                rng.gen_range(-0.02..0.02),
                rng.gen_range(-0.03..0.03),
            );
            let tpl = render_zone_segmentation(&tpl_h, &frame, &field);
            let seg = render_zone_segmentation(&seg_h, &frame, &field);
            let Ok(initial) = identity_residual(&seg, &tpl, &opts) else {
                continue;
            };
            let Ok((_, fin)) = refine(&seg, &tpl, &opts) else {
                continue;
            };
            assert!(fin <= initial + 1e-9, "final {fin} > initial {initial}");
            runs += 1;
        }
    });
}

// -------------------------------------------------------------------
// 6. Localization round trip.

#[test]
fn c06_localization_round_trip() {
    criterion("06 localization-round-trip", || {
        let field = standard_field();
        let params = SceneParams::default();
        let mut sq_sum = 0.0;
        let mut count = 0usize;
        for seed in 0..200u64 {
            let scene = generate_scene(&params, &field, 7000 + seed).unwrap();
            let calib = CalibrationResult {
                homography: scene.truth,
                relevance: 1,
                residual: 0.0,
                template_index: 0,
            };
            let locs = localize(&scene.detections, &calib, &scene.frame, &field).unwrap();
            for loc in &locs {
                let d2 = scene
                    .player_positions
                    .iter()
                    .map(|p| (p.0 - loc.position.0).powi(2) + (p.1 - loc.position.1).powi(2))
                    .fold(f64::MAX, f64::min);
                sq_sum += d2;
                count += 1;
            }
        }
        assert!(count > 1000, "only {count} localizations");
        let rmse = (sq_sum / count as f64).sqrt();
        assert!(rmse < 0.3, "rmse {rmse}");
    });
}

// -------------------------------------------------------------------
// 7. Player graph.

#[test]
fn c07_player_graph() {
    criterion("07 player-graph", || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let n = rng.gen_range(0..20);
            let locs: Vec<PlayerLocalization> = (0..n)
                .map(|_| PlayerLocalization {
                    position: (rng.gen_range(-55.0..55.0), rng.gen_range(-36.0..36.0)),
                    color: (0, 0, 0),
                    bbox_area_px: 1.0,
                })
                .collect();
            let g = build_player_graph(&locs);
            let mut oracle = Vec::new();
            for i in 0..locs.len() {
                for j in (i + 1)..locs.len() {
                    let dx = locs[i].position.0 - locs[j].position.0;
                    let dy = locs[i].position.1 - locs[j].position.1;
                    if (dx * dx + dy * dy).sqrt() < 25.0 {
                        oracle.push((i, j));
                    }
                }
            }
            assert_eq!(g.edges, oracle);
        }
        // Boundary: 24.9 m connects, 25.0 m does not.
        let pair = |d: f64| {
            let locs = vec![
                PlayerLocalization {
                    position: (0.0, 0.0),
                    color: (0, 0, 0),
                    bbox_area_px: 1.0,
                },
                PlayerLocalization {
                    position: (d, 0.0),
                    color: (0, 0, 0),
                    bbox_area_px: 1.0,
                },
            ];
            build_player_graph(&locs).edges.len()
        };
        assert_eq!(pair(24.9), 1);
        assert_eq!(pair(25.0), 0);
    });
}

// -------------------------------------------------------------------
// 8. Average-mAP.

/// Independent average-mAP implementation used as the oracle.
fn oracle_map(preds: &[SpottingPrediction], gts: &[GroundTruthAction], margins: &[f64]) -> f64 {
    let mut margin_sum = 0.0;
    for &margin in margins {
        let mut ap_sum = 0.0;
        let mut class_count = 0usize;
        for class in CLASS_REGISTRY {
            let class_gts: Vec<&GroundTruthAction> =
                gts.iter().filter(|g| g.class == *class).collect();
            if class_gts.is_empty() {
                continue;
            }
            class_count += 1;
            let mut class_preds: Vec<(usize, &SpottingPrediction)> = preds
                .iter()
                .enumerate()
                .filter(|(_, p)| p.class == *class)
                .map(|(i, p)| (i, p))
                .collect();
            class_preds.sort_by(|(ia, a), (ib, b)| {
                b.confidence
                    .partial_cmp(&a.confidence)
                    .unwrap()
                    .then(a.time_s.partial_cmp(&b.time_s).unwrap())
                    .then(ia.cmp(ib))
            });
            let mut used = vec![false; class_gts.len()];
            let mut tps = Vec::with_capacity(class_preds.len());
            for (_, p) in &class_preds {
                let mut best: Option<usize> = None;
                for (gi, g) in class_gts.iter().enumerate() {
                    if used[gi]
                        || g.game_id != p.game_id
                        || g.half != p.half
                        || (g.time_s - p.time_s).abs() > margin
                    {
                        continue;
                    }
                    best = match best {
                        None => Some(gi),
                        Some(cur) => {
                            let dc = (class_gts[cur].time_s - p.time_s).abs();
                            let dg = (g.time_s - p.time_s).abs();
                            if dg < dc
                                || (dg == dc && g.time_s < class_gts[cur].time_s)
                            {
                                Some(gi)
                            } else {
                                Some(cur)
                            }
                        }
                    };
                }
                if let Some(gi) = best {
                    used[gi] = true;
                    tps.push(true);
                } else {
                    tps.push(false);
                }
            }
            // All-point interpolated AP.
            let total = class_gts.len() as f64;
            let mut precisions = Vec::new();
            let mut recalls = Vec::new();
            let mut tp = 0.0;
            for (k, &hit) in tps.iter().enumerate() {
                if hit {
                    tp += 1.0;
                }
                precisions.push(tp / (k as f64 + 1.0));
                recalls.push(tp / total);
            }
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for k in 0..tps.len() {
                if !tps[k] {
                    continue;
                }
                let max_prec = precisions[k..]
                    .iter()
                    .cloned()
                    .fold(0.0f64, f64::max);
                ap += (recalls[k] - prev_recall) * max_prec;
                prev_recall = recalls[k];
            }
            ap_sum += ap;
        }
        if class_count > 0 {
            margin_sum += ap_sum / class_count as f64;
        }
    }
    margin_sum / margins.len() as f64
}

fn random_spotting(
    rng: &mut ChaCha8Rng,
) -> (Vec<SpottingPrediction>, Vec<GroundTruthAction>) {
    let classes = ["goal", "corner", "foul"];
    let n_gt = rng.gen_range(1..5);
    let n_pred = rng.gen_range(0..6);
    let gts = (0..n_gt)
        .map(|_| GroundTruthAction {
            class: classes[rng.gen_range(0..classes.len())].to_string(),
            time_s: frame_time(rng.gen_range(0..240)),
            half: 1,
            game_id: "g".into(),
        })
        .collect();
    let preds = (0..n_pred)
        .map(|_| SpottingPrediction {
            class: classes[rng.gen_range(0..classes.len())].to_string(),
            time_s: frame_time(rng.gen_range(0..240)),
            half: 1,
            game_id: "g".into(),
            confidence: (rng.gen_range(0..=10) as f64) / 10.0,
        })
        .collect();
    (preds, gts)
}

#[test]
fn c08_average_map() {
    criterion("08 average-map", || {
        let margins: Vec<f64> = (1..=12).map(|i| 5.0 * i as f64).collect();
        // Oracle equality on 1000 small instances.
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        for _ in 0..1000 {
            let (preds, gts) = random_spotting(&mut rng);
            let report = average_map(&preds, &gts, &margins).unwrap();
            let oracle = oracle_map(&preds, &gts, &margins);
            assert!(
                (report.average_map - oracle).abs() < 1e-12,
                "{} vs {oracle}",
                report.average_map
            );
        }
        // Perfect predictions score 1.
        let gts: Vec<GroundTruthAction> = (0..10)
            .map(|i| GroundTruthAction {
                class: "goal".into(),
                time_s: 30.0 * i as f64,
                half: 1,
                game_id: "g".into(),
            })
            .collect();
        let preds: Vec<SpottingPrediction> = gts
            .iter()
            .map(|g| SpottingPrediction {
                class: g.class.clone(),
                time_s: g.time_s,
                half: g.half,
                game_id: g.game_id.clone(),
                confidence: 0.9,
            })
            .collect();
        let r = average_map(&preds, &gts, &margins).unwrap();
        assert!((r.average_map - 1.0).abs() < 1e-12);
        // Hand case: one ground truth, one prediction 30 s late. The
        // prediction lands inside margins 30..60 only: 7 of 12.
        let gts = vec![GroundTruthAction {
            class: "goal".into(),
            time_s: 100.0,
            half: 1,
            game_id: "g".into(),
        }];
        let preds = vec![SpottingPrediction {
            class: "goal".into(),
            time_s: 130.0,
            half: 1,
            game_id: "g".into(),
            confidence: 0.9,
        }];
        let r = average_map(&preds, &gts, &margins).unwrap();
        assert!((r.average_map - 7.0 / 12.0).abs() < 1e-9);
        // Margin monotonicity on fuzzed inputs.
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        for _ in 0..200 {
            let (preds, gts) = random_spotting(&mut rng);
            let r = average_map(&preds, &gts, &margins).unwrap();
            for w in r.map_per_margin.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "not monotone: {:?}", r.map_per_margin);
            }
        }
    });
}

// -------------------------------------------------------------------
// 9. Determinism and round trips.

#[test]
fn c09_determinism() {
    criterion("09 determinism", || {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let dict = dir.path().join("dict");
        run_ok(bin().args([
            "synth",
            "--out",
            data.to_str().unwrap(),
            "--frames",
            "16",
            "--seed",
            "99",
        ]));
        run_ok(bin().args([
            "build-dict",
            "--train",
            data.join("truth.json").to_str().unwrap(),
            "--out",
            dict.to_str().unwrap(),
            "--k-max",
            "6",
        ]));
        let mut outputs = Vec::new();
        for threads in ["1", "3", "8"] {
            let out = dir.path().join(format!("calib_{threads}.json"));
            run_ok(bin().args([
                "calibrate",
                "--dict",
                dict.to_str().unwrap(),
                "--segs",
                data.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ]));
            outputs.push(std::fs::read(&out).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[1], outputs[2]);

        // Record round trips on fuzzed records.
        let mut rng = ChaCha8Rng::seed_from_u64(900);
        let frames: Vec<FrameRecord> = (0..10_000)
            .map(|i| {
                let mut homography = [0.0; 9];
                for v in homography.iter_mut() {
                    *v = rng.gen_range(-100.0..100.0);
                }
                homography[0] += 300.0;
                homography[4] += 300.0;
                homography[8] += 900.0;
                FrameRecord {
                    game_id: format!("game_{}", rng.gen_range(0..50)),
                    half: rng.gen_range(1..=2),
                    frame_index: i,
                    homography,
                    relevance: rng.gen_range(0..=1),
                    residual: rng.gen_range(0.0..20.0),
                    template_index: rng.gen_range(0..500),
                }
            })
            .collect();
        let path = dir.path().join("fuzzed.json");
        let doc = CalibrationFile {
            version: FORMAT_VERSION,
            frames,
        };
        write_doc(&path, &doc).unwrap();
        let back: CalibrationFile = read_doc(&path).unwrap();
        assert_eq!(doc, back);
    });
}

// -------------------------------------------------------------------
// 10. Rendering conformance.

#[test]
fn c10_rendering_conformance() {
    criterion("10 rendering-conformance", || {
        let field = standard_field();
        let spec = TopViewSpec::default();
        // A player standing on the halfway line straddles it in the
        // top view.
        let player = PlayerLocalization {
            position: (0.0, 10.0),
            color: (200, 30, 30),
            bbox_area_px: 100.0,
        };
        let polygon = visible_field_polygon(
            &pose_for_frame(&field, &ImageFrame::new(480, 270), 0.0, 0.0, 0.0),
            &ImageFrame::new(480, 270),
            &field,
        );
        let cc = render_color_composition(&spec, &[player.clone()], &polygon, &field);
        let bc = render_binary_channels(&spec, &[player.clone()], &polygon, &field);
        assert_eq!(cc.size_px, 224);
        assert_eq!(bc.size_px, 224);
        assert_eq!(cc.data.len(), 224 * 224 * 3);
        assert!(bc.data.iter().all(|&v| v == 0 || v == 1));

        let (px, py) = spec.to_pixels(&field, player.position);
        let (cx, cy) = (px.round() as u32, py.round() as u32);
        let mut straddled = 0;
        for y in cy.saturating_sub(4)..(cy + 4).min(224) {
            for x in cx.saturating_sub(4)..(cx + 4).min(224) {
                // Inside the player square.
                assert_eq!(
                    (cc.get(x, y, 0), cc.get(x, y, 1), cc.get(x, y, 2)),
                    (200, 30, 30),
                    "cc player pixel at {x},{y}"
                );
                assert_eq!(bc.get(x, y, 2), 1, "bc player pixel at {x},{y}");
                // The halfway line survives underneath in BC channel 0.
                if bc.get(x, y, 0) == 1 {
                    straddled += 1;
                }
            }
        }
        assert!(straddled > 0, "no line pixels under the player square");
        // Line pixels away from the player stay white in CC.
        let (lx, ly) = spec.to_pixels(&field, (0.0, -20.0));
        let (lx, ly) = (lx.round() as u32, ly.round() as u32);
        assert_eq!(
            (cc.get(lx, ly, 0), cc.get(lx, ly, 1), cc.get(lx, ly, 2)),
            (255, 255, 255)
        );
    });
}
