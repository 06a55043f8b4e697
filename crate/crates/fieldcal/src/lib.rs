//! Camera calibration toolkit for broadcast soccer video.
//!
//! The pipeline estimates the homography between the field plane (meters)
//! and the broadcast image (pixels) by retrieving the nearest entry of a
//! precomputed template dictionary and refining it with nonlinear least
//! squares. On top of the calibration it provides player localization in
//! real-world coordinates, schematic top-view renders, a player proximity
//! graph, and the two evaluation metrics used throughout (calibration IoU
//! and action-spotting Average-mAP).
//!
//! Datasets and neural components are out of scope: zone segmentations are
//! inputs, and a synthetic scene generator ([`synth`]) makes every stage
//! testable end to end without external data.

pub mod calibrate;
pub mod dictionary;
pub mod eval;
pub mod field;
pub mod formats;
pub mod geometry;
pub mod localization;
pub mod raster;
pub mod synth;

pub use calibrate::{calibrate_frame, CalibrateOpts, CalibrationResult};
pub use dictionary::{build_dictionary, fit_gmm, GmmModel, TemplateDictionary};
pub use field::{standard_field, FieldModel, Zone};
pub use geometry::{estimate_dlt, Homography, ImageFrame, VisiblePolygon};
pub use localization::{build_player_graph, localize, Detection, PlayerGraph, PlayerLocalization};
pub use raster::{TopViewImage, TopViewSpec, ZoneSegmentation};
