//! Path loss (free space and dominant path model), dominant path search and
//! link budget.

mod dpm;
mod params;
mod search;

use serde::{Deserialize, Serialize};

pub use dpm::{dpm_pl, waveguiding_db, DominantPath, Interaction, PathLossBreakdown};
pub use params::{InteractionLossCurve, PathLossParams, Waveguiding};
pub use search::{find_dominant_path, find_dominant_path_in, lex_less, CornerGraph};

use crate::antenna::RadioConfig;
use crate::error::{Error, Result};
use crate::geometry::{direction_angles, Point2, Point3};
use crate::scene::Scene;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// `20·lg(4π/c₀)` in dB, about -147.55.
pub fn free_space_constant_db() -> f64 {
    20.0 * (4.0 * std::f64::consts::PI / SPEED_OF_LIGHT_M_S).log10()
}

/// `20·lg(f) + 20·lg(4π/c₀)`: the distance-independent part of free-space loss.
pub fn frequency_term_db(frequency_hz: f64) -> Result<f64> {
    if !(frequency_hz > 0.0) || !frequency_hz.is_finite() {
        return Err(Error::domain(format!("frequency must be > 0 Hz, got {frequency_hz}")));
    }
    Ok(20.0 * frequency_hz.log10() + free_space_constant_db())
}

/// Free-space path loss in dB.
pub fn free_space_pl(frequency_hz: f64, distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::domain(format!("distance must be > 0 m, got {distance_m}")));
    }
    Ok(frequency_term_db(frequency_hz)? + 20.0 * distance_m.log10())
}

/// Received power in dBm: `P_T - C_T + G_T - PL + G_R - C_R`.
pub fn link_budget(tx: &RadioConfig, rx: &RadioConfig, pl_total_db: f64, tx_gain_dbi: f64, rx_gain_dbi: f64) -> f64 {
    tx.tx_power_dbm - tx.cable_loss_db + tx_gain_dbi - pl_total_db + rx_gain_dbi - rx.cable_loss_db
}

/// A radio at a planar position; its antenna sits `antenna_height_m` above
/// the local ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub position: Point2,
    pub radio: RadioConfig,
}

impl Site {
    pub fn new(position: Point2, radio: RadioConfig) -> Self {
        Self { position, radio }
    }

    pub fn antenna(&self, scene: &Scene) -> Point3 {
        self.position
            .lift(scene.ground_clamped(self.position) + self.radio.antenna_height_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reception {
    pub power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub breakdown: PathLossBreakdown,
    pub path: DominantPath,
}

/// Received power at `rx` from `tx` along the dominant path, with antenna
/// gains evaluated along the first and last path segments.
pub fn received_power(scene: &Scene, tx: &Site, rx: &Site, params: &PathLossParams) -> Result<Reception> {
    let tx_point = tx.antenna(scene);
    let rx_point = rx.antenna(scene);
    let path = find_dominant_path(scene, tx_point, rx_point, params, tx.radio.frequency_hz)?;
    reception_along(path, tx, rx, params)
}

pub(crate) fn reception_along(path: DominantPath, tx: &Site, rx: &Site, params: &PathLossParams) -> Result<Reception> {
    let breakdown = dpm_pl(&path, params, tx.radio.frequency_hz)?;
    let n = path.waypoints.len();
    let (az_t, el_t) = direction_angles(path.waypoints[0], path.waypoints[1]);
    let (az_r, el_r) = direction_angles(path.waypoints[n - 1], path.waypoints[n - 2]);
    let tx_gain_dbi = tx.radio.pattern.gain_toward(az_t, el_t);
    let rx_gain_dbi = rx.radio.pattern.gain_toward(az_r, el_r);
    let power_dbm = link_budget(&tx.radio, &rx.radio, breakdown.total_db, tx_gain_dbi, rx_gain_dbi);
    Ok(Reception {
        power_dbm,
        tx_gain_dbi,
        rx_gain_dbi,
        breakdown,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::AntennaPattern;
    use crate::scene::{Material, Obstacle, ObstacleKind};

    #[test]
    fn free_space_fixed_points() {
        // Independent evaluation: 20·lg(5.9e9) = 195.4170, 20·lg(4π/c₀) = -147.5522.
        assert!((free_space_pl(5.9e9, 1.0).unwrap() - 47.87).abs() < 0.01);
        assert!((free_space_pl(5.9e9, 100.0).unwrap() - 87.87).abs() < 0.01);
        assert!((free_space_constant_db() + 147.55).abs() < 0.005);
    }

    #[test]
    fn free_space_doubling() {
        let d = free_space_pl(2.4e9, 74.0).unwrap();
        let d2 = free_space_pl(2.4e9, 148.0).unwrap();
        assert!((d2 - d - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn free_space_domain_errors() {
        assert!(free_space_pl(0.0, 1.0).is_err());
        assert!(free_space_pl(5.9e9, 0.0).is_err());
        assert!(free_space_pl(5.9e9, -3.0).is_err());
    }

    #[test]
    fn link_budget_cases() {
        let mut tx = RadioConfig::its_g5_rsu(0.0);
        let mut rx = RadioConfig::its_g5_obu();
        assert_eq!(link_budget(&tx, &rx, 0.0, 0.0, 0.0), 23.0);
        assert!((link_budget(&tx, &rx, 87.87, 10.0, 2.0) + 52.87).abs() < 1e-9);
        assert!((link_budget(&tx, &rx, 129.0, 10.0, 2.0) + 94.0).abs() < 1e-9);
        tx.cable_loss_db = 1.5;
        rx.cable_loss_db = 0.5;
        assert!((link_budget(&tx, &rx, 0.0, 0.0, 0.0) - 21.0).abs() < 1e-12);
    }

    fn omni_site(x: f64, y: f64) -> Site {
        let mut radio = RadioConfig::its_g5_obu();
        radio.antenna_height_m = 1.5;
        Site::new(Point2::new(x, y), radio)
    }

    #[test]
    fn open_scene_composition() {
        let scene = Scene::empty();
        let mut tx = omni_site(0.0, 0.0);
        tx.radio.pattern = AntennaPattern::omni(10.0);
        tx.radio.antenna_height_m = 4.0;
        let rx = omni_site(120.0, 0.0);
        let params = PathLossParams::default();
        let r = received_power(&scene, &tx, &rx, &params).unwrap();
        let d = Point3::new(0.0, 0.0, 4.0).distance(Point3::new(120.0, 0.0, 1.5));
        let pl = dpm_pl(&DominantPath::straight(tx.antenna(&scene), rx.antenna(&scene), crate::VisibilityClass::Los), &params, 5.9e9)
            .unwrap()
            .total_db;
        assert!((r.path.length_m - d).abs() < 1e-12);
        assert!((r.power_dbm - (23.0 + 10.0 + 2.0 - pl)).abs() < 1e-12);
    }

    #[test]
    fn panel_pointing_away_hits_floor() {
        let scene = Scene::empty();
        let rx = omni_site(100.0, 0.0);
        let params = PathLossParams::default();
        // East is azimuth 90°.
        let toward = Site::new(Point2::new(0.0, 0.0), RadioConfig::its_g5_rsu(90.0));
        let away = Site::new(Point2::new(0.0, 0.0), RadioConfig::its_g5_rsu(270.0));
        let p_toward = received_power(&scene, &toward, &rx, &params).unwrap();
        let p_away = received_power(&scene, &away, &rx, &params).unwrap();
        // Boresight is horizontal; the ray dips slightly, identical for both.
        let el_loss = 10.0 - p_toward.tx_gain_dbi;
        assert!(el_loss > 0.0 && el_loss < 0.2);
        assert!((p_toward.power_dbm - p_away.power_dbm - (30.0 - el_loss)).abs() < 1e-9);
        assert_eq!(p_away.tx_gain_dbi, 10.0 - 30.0);
    }

    #[test]
    fn shadowed_receiver_loses_power() {
        let b = Obstacle::rectangle(Point2::new(40.0, -10.0), Point2::new(60.0, 10.0), 20.0, "c", ObstacleKind::Building)
            .unwrap();
        let scene = Scene::new(None, vec![Material::new("c", 5.0, 8.0).unwrap()], vec![b]).unwrap();
        let tx = omni_site(0.0, 0.0);
        let rx = omni_site(100.0, 0.0);
        let params = PathLossParams::default();
        let shadowed = received_power(&scene, &tx, &rx, &params).unwrap();
        let open = received_power(&scene.without_obstacles(), &tx, &rx, &params).unwrap();
        assert!(shadowed.power_dbm < open.power_dbm);
        assert_eq!(shadowed.path.interactions.len(), 2);
    }
}
