//! Coherence length diagrams for grayscale textures.
//!
//! For every pixel and each of 32 directions, the coherence length counts
//! how many samples along a ray are needed before the running brightness
//! mean settles within a relative band `tau` around the image mean. From the
//! per-pixel lengths the crate derives:
//!
//! - the overall diagram (direction-averaged lengths) and the support map,
//! - the defect map, a per-pixel vote against the overall diagram at a
//!   relative tolerance `tau'`,
//! - the directional defect map, a per-pixel shape mismatch thresholded at
//!   `(1 + tau'')` times its image mean,
//!
//! together with the tools that pick the three thresholds: a search for the
//! saturation threshold balancing diagram size against support, and tables
//! translating a desired percentage of successful or defective pixels into
//! `tau'` or `tau''`.

pub mod cld;
pub mod ddmap;
pub mod dmap;
pub mod error;
pub mod fixture;
pub mod image;
pub mod optimize;
pub mod pipeline;
pub mod render;

pub use crate::cld::{CldAnalysis, DirectionSet, LocalCld, OverallCld, SupportMap, DIRECTIONS};
pub use crate::ddmap::{DefectTable, DirectionalDefectMap, PartitionParams};
pub use crate::dmap::{DefectMap, PixelClass, SuccessProfile, SuccessTable};
pub use crate::error::{CldError, Result};
pub use crate::fixture::SyntheticSpec;
pub use crate::image::{load_gray, stats, GrayImage, ImageStats};
pub use crate::optimize::{optimize_tau, OptimizationResult, QualityCurve};
pub use crate::pipeline::TauAnalysis;
