use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::VisibilityClass;

/// Piecewise-linear loss `g(Δφ)` in dB per interaction, as a function of the
/// turn angle in degrees. Must start at `(0, 0)`, end at 180° and be
/// non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct InteractionLossCurve {
    points: Vec<(f64, f64)>,
}

impl InteractionLossCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidConfig("interaction loss curve needs at least two points".into()));
        }
        if points.iter().any(|(a, l)| !a.is_finite() || !l.is_finite()) {
            return Err(Error::InvalidConfig("interaction loss curve has non-finite values".into()));
        }
        if points[0] != (0.0, 0.0) {
            return Err(Error::InvalidConfig("interaction loss curve must start at (0°, 0 dB)".into()));
        }
        if points[points.len() - 1].0 != 180.0 {
            return Err(Error::InvalidConfig("interaction loss curve must end at 180°".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidConfig("interaction loss curve angles must increase".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidConfig("interaction loss curve must be non-decreasing".into()));
            }
        }
        Ok(Self { points })
    }

    /// Loss in dB for a turn of `delta_phi_deg` (clamped to `[0, 180]`).
    pub fn loss_db(&self, delta_phi_deg: f64) -> f64 {
        let a = delta_phi_deg.clamp(0.0, 180.0);
        let idx = self.points.partition_point(|p| p.0 <= a).clamp(1, self.points.len() - 1);
        let (a0, l0) = self.points[idx - 1];
        let (a1, l1) = self.points[idx];
        l0 + (l1 - l0) * (a - a0) / (a1 - a0)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

impl Default for InteractionLossCurve {
    fn default() -> Self {
        Self {
            points: vec![(0.0, 0.0), (90.0, 8.0), (180.0, 15.0)],
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for InteractionLossCurve {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<InteractionLossCurve> for Vec<(f64, f64)> {
    fn from(c: InteractionLossCurve) -> Self {
        c.points
    }
}

/// Street-canyon guiding along hard-blocker walls. With `kappa = 0` (the
/// default) the waveguiding term is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Waveguiding {
    /// Gain per unit of (segment length / wall distance) for a lossless,
    /// parallel wall.
    pub kappa: f64,
    /// Cap on the total guiding gain in dB.
    pub max_gain_db: f64,
    /// Walls farther than this from a path segment do not guide it.
    pub max_wall_distance_m: f64,
}

impl Default for Waveguiding {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            max_gain_db: 6.0,
            max_wall_distance_m: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossParams {
    pub exponent_los: f64,
    pub exponent_olos: f64,
    pub exponent_nlos: f64,
    /// Two-slope model: beyond this path length the post-breakpoint
    /// exponents apply to the excess distance.
    pub breakpoint_m: Option<f64>,
    pub exponent_los_after_breakpoint: Option<f64>,
    pub exponent_olos_after_breakpoint: Option<f64>,
    pub exponent_nlos_after_breakpoint: Option<f64>,
    pub interaction_loss: InteractionLossCurve,
    pub waveguiding: Waveguiding,
    /// Additional fixed losses in dB added to every path.
    pub diverse_losses_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            exponent_los: 2.6,
            exponent_olos: 2.8,
            exponent_nlos: 3.0,
            breakpoint_m: None,
            exponent_los_after_breakpoint: None,
            exponent_olos_after_breakpoint: None,
            exponent_nlos_after_breakpoint: None,
            interaction_loss: InteractionLossCurve::default(),
            waveguiding: Waveguiding::default(),
            diverse_losses_db: 0.0,
        }
    }
}

impl PathLossParams {
    /// Uniform exponent for every class, no interactions penalty change.
    pub fn with_exponents(los: f64, olos: f64, nlos: f64) -> Self {
        Self {
            exponent_los: los,
            exponent_olos: olos,
            exponent_nlos: nlos,
            ..Self::default()
        }
    }

    pub fn exponent(&self, class: VisibilityClass) -> f64 {
        match class {
            VisibilityClass::Los => self.exponent_los,
            VisibilityClass::Olos => self.exponent_olos,
            VisibilityClass::Nlos => self.exponent_nlos,
        }
    }

    pub fn set_exponent(&mut self, class: VisibilityClass, p: f64) {
        match class {
            VisibilityClass::Los => self.exponent_los = p,
            VisibilityClass::Olos => self.exponent_olos = p,
            VisibilityClass::Nlos => self.exponent_nlos = p,
        }
    }

    pub fn exponent_after_breakpoint(&self, class: VisibilityClass) -> f64 {
        let over = match class {
            VisibilityClass::Los => self.exponent_los_after_breakpoint,
            VisibilityClass::Olos => self.exponent_olos_after_breakpoint,
            VisibilityClass::Nlos => self.exponent_nlos_after_breakpoint,
        };
        over.unwrap_or_else(|| self.exponent(class))
    }

    /// `10·p·lg(d)`, continuous two-slope form past the breakpoint.
    pub fn distance_term_db(&self, class: VisibilityClass, length_m: f64) -> f64 {
        let p = self.exponent(class);
        match self.breakpoint_m {
            Some(bp) if length_m > bp => {
                10.0 * p * bp.log10() + 10.0 * self.exponent_after_breakpoint(class) * (length_m / bp).log10()
            }
            _ => 10.0 * p * length_m.log10(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let exps = [
            Some(self.exponent_los),
            Some(self.exponent_olos),
            Some(self.exponent_nlos),
            self.exponent_los_after_breakpoint,
            self.exponent_olos_after_breakpoint,
            self.exponent_nlos_after_breakpoint,
        ];
        for p in exps.into_iter().flatten() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidConfig(format!("path loss exponents must be > 0, got {p}")));
            }
        }
        if let Some(bp) = self.breakpoint_m {
            if !(bp > 0.0) || !bp.is_finite() {
                return Err(Error::InvalidConfig(format!("breakpoint must be > 0 m, got {bp}")));
            }
        }
        let w = &self.waveguiding;
        if !(w.kappa >= 0.0) || !(w.max_gain_db >= 0.0) || !(w.max_wall_distance_m > 0.0) {
            return Err(Error::InvalidConfig(
                "waveguiding needs kappa >= 0, max gain >= 0 dB and wall distance > 0 m".into(),
            ));
        }
        if !self.diverse_losses_db.is_finite() {
            return Err(Error::InvalidConfig("diverse losses must be finite".into()));
        }
        // Re-validate the curve in case it was built field by field.
        InteractionLossCurve::new(self.interaction_loss.points.clone()).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_curve_values() {
        let c = InteractionLossCurve::default();
        assert_eq!(c.loss_db(0.0), 0.0);
        assert_eq!(c.loss_db(45.0), 4.0);
        assert_eq!(c.loss_db(90.0), 8.0);
        assert_eq!(c.loss_db(135.0), 11.5);
        assert_eq!(c.loss_db(180.0), 15.0);
        assert_eq!(c.loss_db(200.0), 15.0);
    }

    #[test]
    fn curve_validation() {
        assert!(InteractionLossCurve::new(vec![(0.0, 1.0), (180.0, 2.0)]).is_err());
        assert!(InteractionLossCurve::new(vec![(0.0, 0.0), (90.0, 5.0), (180.0, 4.0)]).is_err());
        assert!(InteractionLossCurve::new(vec![(0.0, 0.0), (90.0, 5.0)]).is_err());
        assert!(InteractionLossCurve::new(vec![(0.0, 0.0), (180.0, 0.0)]).is_ok());
    }

    #[test]
    fn breakpoint_is_continuous() {
        let mut p = PathLossParams::default();
        p.breakpoint_m = Some(100.0);
        p.exponent_los_after_breakpoint = Some(4.0);
        let at = p.distance_term_db(VisibilityClass::Los, 100.0);
        let just_after = p.distance_term_db(VisibilityClass::Los, 100.0 + 1e-9);
        assert!((at - 52.0).abs() < 1e-12);
        assert!((at - just_after).abs() < 1e-6);
        // 52 dB up to the breakpoint, then 40 dB for the decade beyond it.
        assert!((p.distance_term_db(VisibilityClass::Los, 1000.0) - 92.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_exponent() {
        let p = PathLossParams::with_exponents(2.0, 0.0, 3.0);
        assert!(p.validate().is_err());
        assert!(PathLossParams::default().validate().is_ok());
    }

    #[test]
    fn toml_roundtrip_defaults() {
        let p: PathLossParams = toml::from_str("exponent_los = 2.3\nexponent_olos = 2.9").unwrap();
        assert_eq!(p.exponent_los, 2.3);
        assert_eq!(p.exponent_nlos, 3.0);
        assert_eq!(p.interaction_loss, InteractionLossCurve::default());
    }
}
