//! Two-stage calibration (continuous-wave path-loss offset, radio-module
//! RSSI offset), exponent fitting and fit metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::antenna::RadioConfig;
use crate::error::{Error, Result};
use crate::exec::{par_map, Parallelism};
use crate::geometry::Point2;
use crate::propagation::{find_dominant_path_in, reception_along, CornerGraph, PathLossParams, Site};
use crate::scene::{Scene, VisibilityClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SampleKind {
    Cw,
    Service,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub position: Point2,
    pub rss_dbm: f64,
    pub kind: SampleKind,
    pub timestamp: Option<String>,
    pub source_tx_power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleSweepRow {
    pub attenuation_db: f64,
    pub p_spec_dbm: f64,
    pub p_module_dbm: f64,
}

/// Measured and simulated path loss at one position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossPair {
    pub measured_db: f64,
    pub simulated_db: f64,
    pub class: VisibilityClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwCalibration {
    pub weight: f64,
    pub offset_db: f64,
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_class_offsets: BTreeMap<VisibilityClass, f64>,
}

impl CwCalibration {
    pub fn identity() -> Self {
        Self {
            weight: 0.0,
            offset_db: 0.0,
            sample_count: 0,
            per_class_offsets: BTreeMap::new(),
        }
    }

    /// Class-specific offset when one was computed, else the global one.
    pub fn offset_for(&self, class: VisibilityClass) -> f64 {
        self.per_class_offsets.get(&class).copied().unwrap_or(self.offset_db)
    }
}

/// Weighted mean difference `(W/K)·Σ (PL_cw - PL_sim)`. With `per_class`,
/// the same formula is also evaluated on each visibility class present.
pub fn cw_offset(pairs: &[PathLossPair], weight: f64, per_class: bool) -> Result<CwCalibration> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no CW/simulation pairs".into()));
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::domain(format!("weight must be in [0, 1], got {weight}")));
    }
    let weighted_mean = |subset: &mut dyn Iterator<Item = &PathLossPair>| {
        let (sum, k) = subset.fold((0.0, 0usize), |(s, k), p| (s + (p.measured_db - p.simulated_db), k + 1));
        weight / k as f64 * sum
    };
    let offset_db = weighted_mean(&mut pairs.iter());
    let mut per_class_offsets = BTreeMap::new();
    if per_class {
        for class in VisibilityClass::ALL {
            if pairs.iter().any(|p| p.class == class) {
                per_class_offsets.insert(class, weighted_mean(&mut pairs.iter().filter(|p| p.class == class)));
            }
        }
    }
    Ok(CwCalibration {
        weight,
        offset_db,
        sample_count: pairs.len(),
        per_class_offsets,
    })
}

pub fn apply_cw_calibration(p_sim_dbm: f64, cal: &CwCalibration) -> f64 {
    p_sim_dbm + cal.offset_db
}

pub fn apply_cw_calibration_for(p_sim_dbm: f64, cal: &CwCalibration, class: VisibilityClass) -> f64 {
    p_sim_dbm + cal.offset_for(class)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleCalibration {
    pub offset_db: f64,
    pub rows_used: usize,
}

impl ModuleCalibration {
    pub fn identity() -> Self {
        Self {
            offset_db: 0.0,
            rows_used: 0,
        }
    }
}

/// Mean of `P_spec - P_module` over the sweep.
pub fn module_offset(rows: &[ModuleSweepRow]) -> Result<ModuleCalibration> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no module sweep rows".into()));
    }
    let sum: f64 = rows.iter().map(|r| r.p_spec_dbm - r.p_module_dbm).sum();
    Ok(ModuleCalibration {
        offset_db: sum / rows.len() as f64,
        rows_used: rows.len(),
    })
}

pub fn apply_module_calibration(p_sim_cal_dbm: f64, cal: &ModuleCalibration) -> f64 {
    p_sim_cal_dbm + cal.offset_db
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub rmse_db: f64,
    pub sd_db: f64,
    pub bias_db: f64,
    pub count: usize,
}

impl ResidualStats {
    fn from_residuals(residuals: &[f64]) -> Self {
        let n = residuals.len() as f64;
        let bias = residuals.iter().sum::<f64>() / n;
        let mse = residuals.iter().map(|r| r * r).sum::<f64>() / n;
        let var = residuals.iter().map(|r| (r - bias) * (r - bias)).sum::<f64>() / n;
        Self {
            rmse_db: mse.sqrt(),
            sd_db: var.sqrt(),
            bias_db: bias,
            count: residuals.len(),
        }
    }
}

/// Simulated versus measured value (dB or dBm) with the visibility class of
/// the position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub simulated_db: f64,
    pub measured_db: f64,
    pub class: VisibilityClass,
}

impl From<PathLossPair> for MetricPair {
    fn from(p: PathLossPair) -> Self {
        Self {
            simulated_db: p.simulated_db,
            measured_db: p.measured_db,
            class: p.class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub all: ResidualStats,
    pub per_class: BTreeMap<VisibilityClass, ResidualStats>,
}

impl FitMetrics {
    pub fn class(&self, class: VisibilityClass) -> Option<&ResidualStats> {
        self.per_class.get(&class)
    }

    /// Plain-text table: rows RMSE/SD (plus bias and count), columns
    /// all/LOS/OLOS/NLOS; classes without data print `-`.
    pub fn table(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {title}");
        let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}{:>10}", "", "all", "LOS", "OLOS", "NLOS");
        let columns: Vec<Option<&ResidualStats>> = std::iter::once(Some(&self.all))
            .chain(VisibilityClass::ALL.iter().map(|c| self.class(*c)))
            .collect();
        let row = |out: &mut String, label: &str, f: &dyn Fn(&ResidualStats) -> String| {
            let _ = write!(out, "{label:<10}");
            for c in &columns {
                let cell = c.map_or_else(|| "-".to_string(), f);
                let _ = write!(out, "{cell:>10}");
            }
            let _ = writeln!(out);
        };
        row(&mut out, "RMSE [dB]", &|s| format!("{:.2}", s.rmse_db));
        row(&mut out, "SD [dB]", &|s| format!("{:.2}", s.sd_db));
        row(&mut out, "BIAS [dB]", &|s| format!("{:.2}", s.bias_db));
        row(&mut out, "N", &|s| s.count.to_string());
        out
    }
}

/// RMSE and population SD of `simulated - measured`, overall and per class.
pub fn evaluate_metrics(pairs: &[MetricPair]) -> Result<FitMetrics> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no simulated/measured pairs".into()));
    }
    let residuals: Vec<f64> = pairs.iter().map(|p| p.simulated_db - p.measured_db).collect();
    let mut per_class = BTreeMap::new();
    for class in VisibilityClass::ALL {
        let subset: Vec<f64> = pairs
            .iter()
            .zip(&residuals)
            .filter(|(p, _)| p.class == class)
            .map(|(_, r)| *r)
            .collect();
        if !subset.is_empty() {
            per_class.insert(class, ResidualStats::from_residuals(&subset));
        }
    }
    Ok(FitMetrics {
        all: ResidualStats::from_residuals(&residuals),
        per_class,
    })
}

/// Path loss implied by a received level: the link budget solved for `PL`.
pub fn measured_path_loss(
    rss_dbm: f64,
    source_tx_power_dbm: f64,
    tx: &RadioConfig,
    rx: &RadioConfig,
    tx_gain_dbi: f64,
    rx_gain_dbi: f64,
) -> f64 {
    source_tx_power_dbm - tx.cable_loss_db + tx_gain_dbi + rx_gain_dbi - rx.cable_loss_db - rss_dbm
}

/// Nearest-neighbour matching of samples to simulation points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    /// `(sample index, point index)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched: Vec<usize>,
}

pub const DEFAULT_ALIGNMENT_GATE_M: f64 = 2.5;

pub fn align_samples(points: &[Point2], samples: &[MeasurementSample], gate_m: f64) -> Alignment {
    let mut out = Alignment::default();
    for (si, s) in samples.iter().enumerate() {
        let nearest = points
            .iter()
            .enumerate()
            .map(|(pi, p)| (pi, p.distance(s.position)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match nearest {
            Some((pi, d)) if d <= gate_m => out.matches.push((si, pi)),
            _ => out.unmatched.push(si),
        }
    }
    out
}

/// Simulated and measured path loss at each sample position.
pub fn path_loss_pairs(
    scene: &Scene,
    tx: &Site,
    rx_radio: &RadioConfig,
    params: &PathLossParams,
    samples: &[MeasurementSample],
    mode: Parallelism,
) -> Result<Vec<PathLossPair>> {
    let graph = CornerGraph::new(scene, rx_radio.antenna_height_m);
    par_map(mode, samples, |s| pair_at(scene, &graph, tx, rx_radio, params, s))
        .into_iter()
        .collect()
}

fn pair_at(
    scene: &Scene,
    graph: &CornerGraph,
    tx: &Site,
    rx_radio: &RadioConfig,
    params: &PathLossParams,
    sample: &MeasurementSample,
) -> Result<PathLossPair> {
    let rx = Site::new(sample.position, rx_radio.clone());
    let path = find_dominant_path_in(
        graph,
        scene,
        tx.antenna(scene),
        rx.antenna(scene),
        params,
        tx.radio.frequency_hz,
    )?;
    let class = path.visibility;
    let r = reception_along(path, tx, &rx, params)?;
    Ok(PathLossPair {
        measured_db: measured_path_loss(
            sample.rss_dbm,
            sample.source_tx_power_dbm,
            &tx.radio,
            rx_radio,
            r.tx_gain_dbi,
            r.rx_gain_dbi,
        ),
        simulated_db: r.breakdown.total_db,
        class,
    })
}

/// Candidate exponents per visibility class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentGrid {
    pub los: Vec<f64>,
    pub olos: Vec<f64>,
    pub nlos: Vec<f64>,
}

impl ExponentGrid {
    /// The same evenly spaced values `lo, lo + step, ..., hi` for every class.
    pub fn uniform(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) || !(lo > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "exponent grid needs 0 < lo <= hi and step > 0, got {lo}..{hi} step {step}"
            )));
        }
        let n = ((hi - lo) / step).round() as usize;
        // Snap to 1e-9 so that e.g. 2.0 + 3·0.1 is exactly 2.3.
        let values: Vec<f64> = (0..=n)
            .map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9)
            .collect();
        Ok(Self {
            los: values.clone(),
            olos: values.clone(),
            nlos: values,
        })
    }

    fn for_class(&self, class: VisibilityClass) -> &[f64] {
        match class {
            VisibilityClass::Los => &self.los,
            VisibilityClass::Olos => &self.olos,
            VisibilityClass::Nlos => &self.nlos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub params: PathLossParams,
    pub rmse_before_db: f64,
    pub rmse_after_db: f64,
}

/// Grid search for the exponents minimising overall path-loss RMSE.
///
/// Each sample's simulated loss depends only on the exponent of its own
/// visibility class, so the squared error separates by class and every class
/// is searched on its own. Ties go to the smaller exponent; classes without
/// samples keep the exponent from `base`.
pub fn fit_exponents(
    scene: &Scene,
    tx: &Site,
    rx_radio: &RadioConfig,
    samples: &[MeasurementSample],
    base: &PathLossParams,
    grid: &ExponentGrid,
    mode: Parallelism,
) -> Result<ExponentFit> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no CW samples to fit".into()));
    }
    let graph = CornerGraph::new(scene, rx_radio.antenna_height_m);
    let tx_point = tx.antenna(scene);
    let classes: Vec<VisibilityClass> = samples
        .iter()
        .map(|s| scene.classify_visibility(tx_point, Site::new(s.position, rx_radio.clone()).antenna(scene)))
        .collect();

    let sse = |params: &PathLossParams, idx: &[usize]| -> Result<f64> {
        let mut total = 0.0;
        for &i in idx {
            let p = pair_at(scene, &graph, tx, rx_radio, params, &samples[i])?;
            total += (p.simulated_db - p.measured_db).powi(2);
        }
        Ok(total)
    };

    let all: Vec<usize> = (0..samples.len()).collect();
    let before = sse(base, &all)?;
    let mut fitted = base.clone();
    for class in VisibilityClass::ALL {
        let idx: Vec<usize> = (0..samples.len()).filter(|&i| classes[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        let mut candidates = grid.for_class(class).to_vec();
        if candidates.is_empty() {
            return Err(Error::EmptyInput(format!("empty exponent grid for {class}")));
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        let scores = par_map(mode, &candidates, |&p| {
            let mut trial = base.clone();
            trial.set_exponent(class, p);
            sse(&trial, &idx).map(|e| (p, e))
        });
        let mut best: Option<(f64, f64)> = None;
        for score in scores {
            let (p, e) = score?;
            if best.map_or(true, |(_, be)| e < be) {
                best = Some((p, e));
            }
        }
        if let Some((p, _)) = best {
            fitted.set_exponent(class, p);
        }
    }
    let after = sse(&fitted, &all)?;
    let n = samples.len() as f64;
    Ok(ExponentFit {
        params: fitted,
        rmse_before_db: (before / n).sqrt(),
        rmse_after_db: (after / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(measured: f64, simulated: f64) -> PathLossPair {
        PathLossPair {
            measured_db: measured,
            simulated_db: simulated,
            class: VisibilityClass::Los,
        }
    }

    #[test]
    fn cw_offset_examples() {
        let pairs = [pair(102.0, 100.0), pair(94.0, 90.0)];
        assert_eq!(cw_offset(&pairs, 0.0, false).unwrap().offset_db, 0.0);
        assert_eq!(cw_offset(&pairs, 0.25, false).unwrap().offset_db, 0.75);
        assert!(matches!(cw_offset(&[], 0.5, false), Err(Error::EmptyInput(_))));
        assert!(matches!(cw_offset(&pairs, 1.5, false), Err(Error::Domain(_))));
        assert!(matches!(cw_offset(&pairs, -0.1, false), Err(Error::Domain(_))));
    }

    #[test]
    fn cw_offset_per_class() {
        let mut pairs = vec![pair(102.0, 100.0), pair(94.0, 90.0)];
        pairs.push(PathLossPair {
            measured_db: 110.0,
            simulated_db: 120.0,
            class: VisibilityClass::Nlos,
        });
        let cal = cw_offset(&pairs, 1.0, true).unwrap();
        assert_eq!(cal.offset_for(VisibilityClass::Los), 3.0);
        assert_eq!(cal.offset_for(VisibilityClass::Nlos), -10.0);
        assert!((cal.offset_for(VisibilityClass::Olos) - cal.offset_db).abs() < 1e-12);
        assert!(!cal.per_class_offsets.contains_key(&VisibilityClass::Olos));
    }

    #[test]
    fn apply_offsets() {
        let mut cal = CwCalibration::identity();
        assert_eq!(apply_cw_calibration(-60.0, &cal), -60.0);
        cal.offset_db = 0.5;
        assert_eq!(apply_cw_calibration(-60.0, &cal), -59.5);
        assert_eq!(apply_cw_calibration(-60.0, &cal) - cal.offset_db, -60.0);
        let m = ModuleCalibration {
            offset_db: 8.0,
            rows_used: 1,
        };
        assert_eq!(apply_module_calibration(-60.0, &m), -52.0);
        assert_eq!(apply_module_calibration(-60.0, &ModuleCalibration::identity()), -60.0);
        let a = apply_module_calibration(apply_cw_calibration(-71.3, &cal), &m);
        let b = apply_cw_calibration(apply_module_calibration(-71.3, &m), &cal);
        assert_eq!(a, b);
    }

    fn row(spec: f64, module: f64) -> ModuleSweepRow {
        ModuleSweepRow {
            attenuation_db: 50.0,
            p_spec_dbm: spec,
            p_module_dbm: module,
        }
    }

    #[test]
    fn module_offset_examples() {
        let constant: Vec<_> = (35..=105).map(|m| row(-m as f64, -m as f64 - 8.0)).collect();
        assert_eq!(module_offset(&constant).unwrap().offset_db, 8.0);
        assert_eq!(module_offset(&[row(-50.0, -50.0), row(-60.0, -60.0)]).unwrap().offset_db, 0.0);
        assert_eq!(module_offset(&[row(-50.0, -57.0), row(-60.0, -69.0)]).unwrap().offset_db, 8.0);
        assert!(matches!(module_offset(&[]), Err(Error::EmptyInput(_))));
    }

    fn residual_pairs(residuals: &[f64]) -> Vec<MetricPair> {
        residuals
            .iter()
            .map(|r| MetricPair {
                simulated_db: 100.0 + r,
                measured_db: 100.0,
                class: VisibilityClass::Los,
            })
            .collect()
    }

    #[test]
    fn metrics_examples() {
        let m = evaluate_metrics(&residual_pairs(&[0.0, 0.0])).unwrap();
        assert_eq!((m.all.rmse_db, m.all.sd_db), (0.0, 0.0));
        let m = evaluate_metrics(&residual_pairs(&[3.0, -3.0])).unwrap();
        assert_eq!((m.all.rmse_db, m.all.sd_db), (3.0, 3.0));
        let m = evaluate_metrics(&residual_pairs(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!((m.all.rmse_db, m.all.sd_db), (1.0, 0.0));
        assert!(m.class(VisibilityClass::Nlos).is_none());
        assert!(matches!(evaluate_metrics(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn metrics_table_marks_absent_classes() {
        let m = evaluate_metrics(&residual_pairs(&[3.0, -3.0])).unwrap();
        let t = m.table("standard simulation vs. CW");
        let rmse_line = t.lines().find(|l| l.starts_with("RMSE")).unwrap();
        let cells: Vec<&str> = rmse_line.split_whitespace().collect();
        assert_eq!(cells, ["RMSE", "[dB]", "3.00", "3.00", "-", "-"]);
    }

    #[test]
    fn alignment_gate() {
        let points = [Point2::new(0.0, 0.0), Point2::new(5.0, 0.0), Point2::new(10.0, 0.0)];
        let sample = |x: f64, y: f64| MeasurementSample {
            position: Point2::new(x, y),
            rss_dbm: -60.0,
            kind: SampleKind::Cw,
            timestamp: None,
            source_tx_power_dbm: 23.0,
        };
        let samples = [sample(4.0, 1.0), sample(7.5, 0.0), sample(20.0, 0.0)];
        let a = align_samples(&points, &samples, DEFAULT_ALIGNMENT_GATE_M);
        // 7.5 is equidistant from 5 and 10; the lower index wins.
        assert_eq!(a.matches, vec![(0, 1), (1, 1)]);
        assert_eq!(a.unmatched, vec![2]);
    }

    #[test]
    fn exponent_grid_snaps() {
        let g = ExponentGrid::uniform(2.0, 3.0, 0.1).unwrap();
        assert_eq!(g.los.len(), 11);
        assert!(g.los.contains(&2.3));
        assert!(g.los.contains(&2.9));
        assert!(ExponentGrid::uniform(2.0, 3.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn cw_offset_linear_in_weight(
            diffs in prop::collection::vec((-20.0f64..20.0, 60.0f64..140.0), 1..50),
            w in 0.0f64..=1.0,
        ) {
            let pairs: Vec<_> = diffs.iter().map(|(d, s)| pair(s + d, *s)).collect();
            let full = cw_offset(&pairs, 1.0, false).unwrap().offset_db;
            let part = cw_offset(&pairs, w, false).unwrap().offset_db;
            prop_assert!((part - w * full).abs() < 1e-9);
            let same: Vec<_> = diffs.iter().map(|(_, s)| pair(*s, *s)).collect();
            prop_assert_eq!(cw_offset(&same, w, false).unwrap().offset_db, 0.0);
        }

        #[test]
        fn module_offset_order_and_duplication_invariant(
            rows in prop::collection::vec((-110.0f64..-30.0, -15.0f64..15.0), 1..40),
            seed in any::<u64>(),
        ) {
            let rows: Vec<_> = rows.iter().map(|(s, d)| row(*s, s - d)).collect();
            let base = module_offset(&rows).unwrap().offset_db;
            let mut shuffled = rows.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert!((module_offset(&shuffled).unwrap().offset_db - base).abs() < 1e-9);
            let doubled: Vec<_> = rows.iter().chain(rows.iter()).copied().collect();
            prop_assert!((module_offset(&doubled).unwrap().offset_db - base).abs() < 1e-9);
        }

        #[test]
        fn rmse_bias_sd_identity(residuals in prop::collection::vec(-30.0f64..30.0, 1..100)) {
            let m = evaluate_metrics(&residual_pairs(&residuals)).unwrap();
            let lhs = m.all.rmse_db.powi(2);
            let rhs = m.all.bias_db.powi(2) + m.all.sd_db.powi(2);
            prop_assert!((lhs - rhs).abs() < 1e-9);
            prop_assert!(m.all.rmse_db >= 0.0 && m.all.sd_db >= 0.0);
        }
    }
}
