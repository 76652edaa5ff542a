//! Coverage planning for roadside radio units.
//!
//! Predicts received power from a 2.5D scene with the dominant path model,
//! calibrates predictions against continuous-wave and radio-module
//! measurements and reports coverage for candidate sites.

pub mod antenna;
pub mod calibration;
pub mod coverage;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod io;
pub mod propagation;
pub mod scene;

pub use antenna::{AntennaPattern, PatternCut, RadioConfig};
pub use error::{Error, Result};
pub use exec::{Parallelism, Progress};
pub use geometry::{Point2, Point3};
pub use propagation::{
    dpm_pl, find_dominant_path, free_space_pl, link_budget, received_power, DominantPath, PathLossBreakdown,
    PathLossParams, Reception, Site,
};
pub use scene::{Material, Obstacle, ObstacleKind, Scene, TerrainGrid, VisibilityClass};
