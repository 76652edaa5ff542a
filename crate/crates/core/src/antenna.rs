//! Radio configurations and directional antenna gain.
//!
//! Angles follow the compass convention of [`crate::geometry::direction_angles`]:
//! azimuth in degrees clockwise from north, elevation in degrees above the
//! horizon.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::wrap_degrees;

/// Loss in dB at an offset of one full half-power beamwidth. A quarter of it
/// (3 dB) is lost at half a beamwidth, matching the half-power definition.
pub const PANEL_ROLLOFF_DB: f64 = 12.0;
/// Maximum attenuation below peak gain.
pub const PATTERN_FLOOR_DB: f64 = 30.0;

/// Gain-versus-angle cut, linearly interpolated and periodic over 360°.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PatternCut {
    // Sorted by angle, angles wrapped into (-180, 180].
    points: Vec<(f64, f64)>,
}

impl PatternCut {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("pattern cut has no samples".into()));
        }
        if points.iter().any(|(a, g)| !a.is_finite() || !g.is_finite()) {
            return Err(Error::domain("pattern cut contains non-finite values"));
        }
        let mut points: Vec<(f64, f64)> = points.into_iter().map(|(a, g)| (wrap_degrees(a), g)).collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("pattern cut has duplicate angles"));
        }
        Ok(Self { points })
    }

    /// Reads a two-column `angle_deg,gain_dbi` file. Lines starting with `#`
    /// and a non-numeric header line are ignored.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split([',', ';', '\t', ' ']).filter(|f| !f.is_empty()).collect();
            let parsed: Option<(f64, f64)> = match fields.as_slice() {
                [a, g] => a.parse().ok().zip(g.parse().ok()),
                _ => None,
            };
            match parsed {
                Some(p) => points.push(p),
                None if idx == 0 => continue,
                None => {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: idx as u64 + 1,
                        message: format!("expected `angle_deg,gain_dbi`, got {line:?}"),
                    })
                }
            }
        }
        Self::new(points)
    }

    pub fn gain_at(&self, angle_deg: f64) -> f64 {
        let a = wrap_degrees(angle_deg);
        let pts = &self.points;
        if pts.len() == 1 {
            return pts[0].1;
        }
        let idx = pts.partition_point(|p| p.0 <= a);
        // Neighbours, wrapping around the ±180° seam.
        let (lo, hi) = if idx == 0 {
            let last = pts[pts.len() - 1];
            ((last.0 - 360.0, last.1), pts[0])
        } else if idx == pts.len() {
            let first = pts[0];
            (pts[pts.len() - 1], (first.0 + 360.0, first.1))
        } else {
            (pts[idx - 1], pts[idx])
        };
        let t = (a - lo.0) / (hi.0 - lo.0);
        lo.1 + (hi.1 - lo.1) * t
    }

    pub fn max_gain(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Vec<(f64, f64)>> for PatternCut {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<PatternCut> for Vec<(f64, f64)> {
    fn from(cut: PatternCut) -> Self {
        cut.points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AntennaPattern {
    Omni {
        peak_gain_dbi: f64,
    },
    Panel {
        boresight_azimuth_deg: f64,
        #[serde(default)]
        boresight_elevation_deg: f64,
        beamwidth_h_deg: f64,
        beamwidth_v_deg: f64,
        peak_gain_dbi: f64,
    },
    /// Measured horizontal and vertical cuts (absolute dBi, angles relative
    /// to boresight). Gain is `H(Δaz) + V(Δel) - V(0)`.
    Tabulated {
        boresight_azimuth_deg: f64,
        #[serde(default)]
        boresight_elevation_deg: f64,
        horizontal: PatternCut,
        vertical: PatternCut,
    },
}

impl AntennaPattern {
    pub fn omni(peak_gain_dbi: f64) -> Self {
        AntennaPattern::Omni { peak_gain_dbi }
    }

    pub fn panel(boresight_azimuth_deg: f64, beamwidth_deg: f64, peak_gain_dbi: f64) -> Self {
        AntennaPattern::Panel {
            boresight_azimuth_deg,
            boresight_elevation_deg: 0.0,
            beamwidth_h_deg: beamwidth_deg,
            beamwidth_v_deg: beamwidth_deg,
            peak_gain_dbi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AntennaPattern::Omni { peak_gain_dbi } => finite("peak gain", *peak_gain_dbi),
            AntennaPattern::Panel {
                boresight_azimuth_deg,
                boresight_elevation_deg,
                beamwidth_h_deg,
                beamwidth_v_deg,
                peak_gain_dbi,
            } => {
                finite("boresight azimuth", *boresight_azimuth_deg)?;
                finite("boresight elevation", *boresight_elevation_deg)?;
                finite("peak gain", *peak_gain_dbi)?;
                for bw in [beamwidth_h_deg, beamwidth_v_deg] {
                    if !(*bw > 0.0 && *bw <= 360.0) {
                        return Err(Error::domain(format!("beamwidth must be in (0, 360], got {bw}")));
                    }
                }
                Ok(())
            }
            AntennaPattern::Tabulated {
                boresight_azimuth_deg,
                boresight_elevation_deg,
                ..
            } => {
                finite("boresight azimuth", *boresight_azimuth_deg)?;
                finite("boresight elevation", *boresight_elevation_deg)
            }
        }
    }

    pub fn peak_gain_dbi(&self) -> f64 {
        match self {
            AntennaPattern::Omni { peak_gain_dbi } | AntennaPattern::Panel { peak_gain_dbi, .. } => *peak_gain_dbi,
            AntennaPattern::Tabulated {
                horizontal, vertical, ..
            } => horizontal.max_gain() + vertical.max_gain() - vertical.gain_at(0.0),
        }
    }

    /// Gain in dBi toward the direction `(azimuth_deg, elevation_deg)`.
    pub fn gain_toward(&self, azimuth_deg: f64, elevation_deg: f64) -> f64 {
        match self {
            AntennaPattern::Omni { peak_gain_dbi } => *peak_gain_dbi,
            AntennaPattern::Panel {
                boresight_azimuth_deg,
                boresight_elevation_deg,
                beamwidth_h_deg,
                beamwidth_v_deg,
                peak_gain_dbi,
            } => {
                let d_az = wrap_degrees(azimuth_deg - boresight_azimuth_deg) / beamwidth_h_deg;
                let d_el = wrap_degrees(elevation_deg - boresight_elevation_deg) / beamwidth_v_deg;
                let loss = (PANEL_ROLLOFF_DB * (d_az * d_az + d_el * d_el)).min(PATTERN_FLOOR_DB);
                peak_gain_dbi - loss
            }
            AntennaPattern::Tabulated {
                boresight_azimuth_deg,
                boresight_elevation_deg,
                horizontal,
                vertical,
            } => {
                let d_az = wrap_degrees(azimuth_deg - boresight_azimuth_deg);
                let d_el = wrap_degrees(elevation_deg - boresight_elevation_deg);
                horizontal.gain_at(d_az) + vertical.gain_at(d_el) - vertical.gain_at(0.0)
            }
        }
    }
}

fn finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be finite")))
    }
}

pub const ITS_G5_FREQUENCY_HZ: f64 = 5.9e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    #[serde(default)]
    pub tx_power_dbm: f64,
    #[serde(default)]
    pub cable_loss_db: f64,
    pub pattern: AntennaPattern,
    pub antenna_height_m: f64,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_sensitivity")]
    pub sensitivity_dbm: f64,
    #[serde(default = "default_mcs")]
    pub mcs_label: String,
}

fn default_frequency() -> f64 {
    ITS_G5_FREQUENCY_HZ
}

fn default_sensitivity() -> f64 {
    -95.0
}

fn default_mcs() -> String {
    "QPSK r=1/2".into()
}

impl RadioConfig {
    /// Roadside unit: 23 dBm into a 10 dBi panel with a 16° beam, 4 m mast.
    pub fn its_g5_rsu(boresight_azimuth_deg: f64) -> Self {
        Self {
            tx_power_dbm: 23.0,
            cable_loss_db: 0.0,
            pattern: AntennaPattern::panel(boresight_azimuth_deg, 16.0, 10.0),
            antenna_height_m: 4.0,
            frequency_hz: ITS_G5_FREQUENCY_HZ,
            sensitivity_dbm: -95.0,
            mcs_label: default_mcs(),
        }
    }

    /// Vehicle receiver: 2 dBi roof dipole at 1.5 m, -95 dBm sensitivity.
    pub fn its_g5_obu() -> Self {
        Self {
            tx_power_dbm: 23.0,
            cable_loss_db: 0.0,
            pattern: AntennaPattern::omni(2.0),
            antenna_height_m: 1.5,
            frequency_hz: ITS_G5_FREQUENCY_HZ,
            sensitivity_dbm: -95.0,
            mcs_label: default_mcs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pattern.validate()?;
        if !(self.frequency_hz > 0.0) || !self.frequency_hz.is_finite() {
            return Err(Error::domain(format!("frequency must be > 0 Hz, got {}", self.frequency_hz)));
        }
        if !(self.antenna_height_m >= 0.0) || !self.antenna_height_m.is_finite() {
            return Err(Error::domain(format!(
                "antenna height must be >= 0 m, got {}",
                self.antenna_height_m
            )));
        }
        if !(self.cable_loss_db >= 0.0) || !self.cable_loss_db.is_finite() {
            return Err(Error::domain(format!("cable loss must be >= 0 dB, got {}", self.cable_loss_db)));
        }
        finite("transmit power", self.tx_power_dbm)?;
        finite("sensitivity", self.sensitivity_dbm)
    }
}
