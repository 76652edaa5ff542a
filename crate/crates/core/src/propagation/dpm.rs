use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, Point3};
use crate::scene::{Scene, VisibilityClass};

use super::params::PathLossParams;
use super::frequency_term_db;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub at: Point3,
    /// Change of horizontal direction at the turn, degrees in `[0, 180]`.
    pub delta_phi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantPath {
    pub waypoints: Vec<Point3>,
    pub interactions: Vec<Interaction>,
    pub length_m: f64,
    pub visibility: VisibilityClass,
    /// Signed waveguiding term in dB (negative values are gains).
    pub waveguiding_db: f64,
}

impl DominantPath {
    pub fn straight(tx: Point3, rx: Point3, visibility: VisibilityClass) -> Self {
        Self {
            waypoints: vec![tx, rx],
            interactions: Vec::new(),
            length_m: tx.distance(rx),
            visibility,
            waveguiding_db: 0.0,
        }
    }

    /// Builds a path through `waypoints`, deriving lengths and turn angles.
    pub fn through(waypoints: Vec<Point3>, visibility: VisibilityClass) -> Self {
        let length_m = waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
        let interactions = waypoints
            .windows(3)
            .map(|w| Interaction {
                at: w[1],
                delta_phi_deg: crate::geometry::turn_angle_deg(
                    w[1].xy().sub(w[0].xy()),
                    w[2].xy().sub(w[1].xy()),
                ),
            })
            .collect();
        Self {
            waypoints,
            interactions,
            length_m,
            visibility,
            waveguiding_db: 0.0,
        }
    }

    pub fn tx(&self) -> Point3 {
        self.waypoints[0]
    }

    pub fn rx(&self) -> Point3 {
        self.waypoints[self.waypoints.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossBreakdown {
    pub total_db: f64,
    pub free_space_reference_db: f64,
    pub distance_term_db: f64,
    pub interaction_term_db: f64,
    pub waveguiding_db: f64,
    pub diverse_losses_db: f64,
}

impl PathLossBreakdown {
    pub(crate) fn from_terms(
        free_space_reference_db: f64,
        distance_term_db: f64,
        interaction_term_db: f64,
        waveguiding_db: f64,
        diverse_losses_db: f64,
    ) -> Self {
        let total_db =
            free_space_reference_db + distance_term_db + interaction_term_db + waveguiding_db + diverse_losses_db;
        Self {
            total_db,
            free_space_reference_db,
            distance_term_db,
            interaction_term_db,
            waveguiding_db,
            diverse_losses_db,
        }
    }
}

/// Dominant path model loss: `20·lg f - 147.55 + 10·p·lg d + Σ g(Δφ) + Ω`,
/// plus the configured diverse losses.
pub fn dpm_pl(path: &DominantPath, params: &PathLossParams, frequency_hz: f64) -> Result<PathLossBreakdown> {
    if !(path.length_m > 0.0) || !path.length_m.is_finite() {
        return Err(Error::domain(format!("path length must be > 0 m, got {}", path.length_m)));
    }
    let reference = frequency_term_db(frequency_hz)?;
    let distance = params.distance_term_db(path.visibility, path.length_m);
    let interactions: f64 = path
        .interactions
        .iter()
        .map(|i| params.interaction_loss.loss_db(i.delta_phi_deg))
        .sum();
    Ok(PathLossBreakdown::from_terms(
        reference,
        distance,
        interactions,
        path.waveguiding_db,
        params.diverse_losses_db,
    ))
}

/// Signed waveguiding term Ω for a path: minus the capped sum over segments
/// of `kappa · reflectivity · cos²θ · length / wall_distance` for hard walls
/// within range, where `θ` is the wall-to-segment angle.
pub fn waveguiding_db(scene: &Scene, path: &DominantPath, params: &PathLossParams) -> f64 {
    let w = &params.waveguiding;
    if w.kappa <= 0.0 || w.max_gain_db <= 0.0 {
        return 0.0;
    }
    let mut gain = 0.0;
    for seg in path.waypoints.windows(2) {
        let (a, b) = (seg[0].xy(), seg[1].xy());
        let dir = b.sub(a);
        let len = dir.norm();
        if len <= 0.0 {
            continue;
        }
        let mid = crate::geometry::Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
        for (owner, w0, w1) in scene.hard_walls() {
            let wall = w1.sub(w0);
            let dist = point_segment_distance(mid, w0, w1);
            if dist > w.max_wall_distance_m {
                continue;
            }
            let cos = dir.dot(wall) / (len * wall.norm());
            let loss_db = scene
                .material(&scene.obstacles()[owner].material)
                .map_or(0.0, |m| m.reflection_loss_db);
            let reflectivity = 10f64.powf(-loss_db / 10.0);
            gain += w.kappa * reflectivity * cos * cos * len / dist.max(1.0);
        }
    }
    -gain.min(w.max_gain_db)
}
