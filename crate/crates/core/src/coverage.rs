//! Received-power rasters and trajectories, the sensitivity criterion and
//! coverage reports.

use serde::{Deserialize, Serialize};

use crate::antenna::RadioConfig;
use crate::calibration::{apply_cw_calibration, apply_cw_calibration_for, apply_module_calibration, CwCalibration, ModuleCalibration};
use crate::error::{Error, Result};
use crate::exec::{par_map, Parallelism, Progress};
use crate::geometry::{Point2, Point3};
use crate::propagation::{find_dominant_path_in, reception_along, CornerGraph, PathLossBreakdown, PathLossParams, Site};
use crate::scene::{Scene, VisibilityClass};

pub const DEFAULT_CELL_SIZE_M: f64 = 5.0;

/// Both calibration stages. `per_class` selects class-specific CW offsets
/// where available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrations {
    pub cw: CwCalibration,
    pub module: ModuleCalibration,
    #[serde(default)]
    pub per_class: bool,
}

impl Calibrations {
    pub fn identity() -> Self {
        Self {
            cw: CwCalibration::identity(),
            module: ModuleCalibration::identity(),
            per_class: false,
        }
    }

    /// Simulated level corrected by the CW offset and then the module offset.
    pub fn apply(&self, p_sim_dbm: f64, class: VisibilityClass) -> f64 {
        let cw = if self.per_class {
            apply_cw_calibration_for(p_sim_dbm, &self.cw, class)
        } else {
            apply_cw_calibration(p_sim_dbm, &self.cw)
        };
        apply_module_calibration(cw, &self.module)
    }
}

impl Default for Calibrations {
    fn default() -> Self {
        Self::identity()
    }
}

/// `p > sensitivity + module offset`, strictly.
pub fn check_coverage(p_sim_cal_module_dbm: f64, rx: &RadioConfig, module_cal: &ModuleCalibration) -> bool {
    p_sim_cal_module_dbm > coverage_threshold_dbm(rx, module_cal)
}

pub fn coverage_threshold_dbm(rx: &RadioConfig, module_cal: &ModuleCalibration) -> f64 {
    rx.sensitivity_dbm + module_cal.offset_db
}

/// Everything needed to evaluate one transmitter at arbitrary receiver
/// positions. The corner graph is built once at construction.
#[derive(Debug)]
pub struct Simulator<'a> {
    scene: &'a Scene,
    tx: &'a Site,
    rx_radio: &'a RadioConfig,
    params: &'a PathLossParams,
    calibrations: &'a Calibrations,
    graph: CornerGraph,
    tx_point: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEvaluation {
    pub visibility: VisibilityClass,
    pub distance_m: f64,
    pub p_r_dbm: Option<f64>,
    pub covered: bool,
    pub breakdown: Option<PathLossBreakdown>,
    pub path_length_m: Option<f64>,
    pub interactions: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(
        scene: &'a Scene,
        tx: &'a Site,
        rx_radio: &'a RadioConfig,
        params: &'a PathLossParams,
        calibrations: &'a Calibrations,
    ) -> Result<Self> {
        tx.radio.validate()?;
        rx_radio.validate()?;
        params.validate()?;
        Ok(Self {
            scene,
            tx,
            rx_radio,
            params,
            calibrations,
            graph: CornerGraph::new(scene, rx_radio.antenna_height_m),
            tx_point: tx.antenna(scene),
        })
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn transmitter(&self) -> &Site {
        self.tx
    }

    pub fn threshold_dbm(&self) -> f64 {
        coverage_threshold_dbm(self.rx_radio, &self.calibrations.module)
    }

    /// Fully calibrated received power at a receiver standing at `position`.
    /// Positions without a propagation path come back uncovered with no power.
    pub fn evaluate(&self, position: Point2) -> PointEvaluation {
        let rx = Site::new(position, self.rx_radio.clone());
        let rx_point = rx.antenna(self.scene);
        let distance_m = self.tx_point.distance(rx_point);
        let visibility = self.scene.classify_visibility(self.tx_point, rx_point);
        let reception = find_dominant_path_in(
            &self.graph,
            self.scene,
            self.tx_point,
            rx_point,
            self.params,
            self.tx.radio.frequency_hz,
        )
        .and_then(|path| reception_along(path, self.tx, &rx, self.params));
        match reception {
            Ok(r) => {
                let p = self.calibrations.apply(r.power_dbm, visibility);
                PointEvaluation {
                    visibility,
                    distance_m,
                    p_r_dbm: Some(p),
                    covered: check_coverage(p, self.rx_radio, &self.calibrations.module),
                    breakdown: Some(r.breakdown),
                    path_length_m: Some(r.path.length_m),
                    interactions: r.path.interactions.len(),
                }
            }
            Err(_) => PointEvaluation {
                visibility,
                distance_m,
                p_r_dbm: None,
                covered: false,
                breakdown: None,
                path_length_m: None,
                interactions: 0,
            },
        }
    }
}

/// Rectangular region in scene coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point2,
    pub max: Point2,
}

impl Region {
    pub fn new(min: Point2, max: Point2) -> Result<Self> {
        if !(max.x > min.x) || !(max.y > min.y) {
            return Err(Error::InvalidConfig(format!(
                "region must have positive extent, got ({}, {})..({}, {})",
                min.x, min.y, max.x, max.y
            )));
        }
        Ok(Self { min, max })
    }
}

/// Raster layout: `rows × cols` square cells starting at `origin`
/// (lower-left corner), row index growing northward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point2,
    pub cell_size_m: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn covering(region: Region, cell_size_m: f64) -> Result<Self> {
        if !(cell_size_m > 0.0) || !cell_size_m.is_finite() {
            return Err(Error::InvalidConfig(format!("cell size must be > 0 m, got {cell_size_m}")));
        }
        let cols = ((region.max.x - region.min.x) / cell_size_m).ceil().max(1.0) as usize;
        let rows = ((region.max.y - region.min.y) / cell_size_m).ceil().max(1.0) as usize;
        Ok(Self {
            origin: region.min,
            cell_size_m,
            rows,
            cols,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            self.origin.x + (col as f64 + 0.5) * self.cell_size_m,
            self.origin.y + (row as f64 + 0.5) * self.cell_size_m,
        )
    }

    /// Footprint of a cell as a closed ring (counter-clockwise).
    pub fn cell_ring(&self, row: usize, col: usize) -> [Point2; 5] {
        let x0 = self.origin.x + col as f64 * self.cell_size_m;
        let y0 = self.origin.y + row as f64 * self.cell_size_m;
        let x1 = x0 + self.cell_size_m;
        let y1 = y0 + self.cell_size_m;
        [
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
            Point2::new(x0, y0),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub p_r_dbm: Option<f64>,
    pub visibility: VisibilityClass,
    pub distance_m: f64,
    pub covered: bool,
    pub breakdown: Option<PathLossBreakdown>,
}

impl From<PointEvaluation> for CoverageCell {
    fn from(e: PointEvaluation) -> Self {
        Self {
            p_r_dbm: e.p_r_dbm,
            visibility: e.visibility,
            distance_m: e.distance_m,
            covered: e.covered,
            breakdown: e.breakdown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageGrid {
    pub spec: GridSpec,
    /// Row-major cells.
    pub cells: Vec<CoverageCell>,
}

impl CoverageGrid {
    pub fn cell(&self, row: usize, col: usize) -> &CoverageCell {
        &self.cells[row * self.spec.cols + col]
    }

    pub fn covered_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|c| c.covered).count() as f64 / self.cells.len() as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'p> {
    pub parallelism: Parallelism,
    pub progress: Option<&'p Progress>,
}

/// Evaluates every cell centre of `spec`.
pub fn simulate_grid(sim: &Simulator<'_>, spec: GridSpec, opts: RunOptions<'_>) -> CoverageGrid {
    simulate_grid_tile(sim, spec, 0..spec.rows, 0..spec.cols, opts)
}

/// Evaluates the cells `rows × cols` of `spec`; cell values are identical to
/// those of a full-grid run.
pub fn simulate_grid_tile(
    sim: &Simulator<'_>,
    spec: GridSpec,
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
    opts: RunOptions<'_>,
) -> CoverageGrid {
    let indices: Vec<(usize, usize)> = rows
        .clone()
        .flat_map(|r| cols.clone().map(move |c| (r, c)))
        .collect();
    if let Some(p) = opts.progress {
        p.add_total(indices.len());
    }
    let cells = par_map(opts.parallelism, &indices, |&(r, c)| {
        let cell = CoverageCell::from(sim.evaluate(spec.center(r, c)));
        if let Some(p) = opts.progress {
            p.tick();
        }
        cell
    });
    let tile_spec = GridSpec {
        origin: Point2::new(
            spec.origin.x + cols.start as f64 * spec.cell_size_m,
            spec.origin.y + rows.start as f64 * spec.cell_size_m,
        ),
        cell_size_m: spec.cell_size_m,
        rows: rows.len(),
        cols: cols.len(),
    };
    CoverageGrid { spec: tile_spec, cells }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub position: Point2,
    /// Horizontal distance from the transmitter to the first point plus the
    /// distance travelled along the trajectory.
    pub along_m: f64,
    #[serde(flatten)]
    pub evaluation: PointEvaluation,
}

pub fn simulate_trajectory(
    sim: &Simulator<'_>,
    points: &[Point2],
    opts: RunOptions<'_>,
) -> Result<Vec<TrajectoryRecord>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("trajectory has no points".into()));
    }
    let mut along = Vec::with_capacity(points.len());
    let mut acc = sim.transmitter().position.distance(points[0]);
    along.push(acc);
    for w in points.windows(2) {
        acc += w[0].distance(w[1]);
        along.push(acc);
    }
    if let Some(p) = opts.progress {
        p.add_total(points.len());
    }
    let indexed: Vec<usize> = (0..points.len()).collect();
    let evaluations = par_map(opts.parallelism, &indexed, |&i| {
        let e = sim.evaluate(points[i]);
        if let Some(p) = opts.progress {
            p.tick();
        }
        e
    });
    Ok(evaluations
        .into_iter()
        .enumerate()
        .map(|(index, evaluation)| TrajectoryRecord {
            index,
            position: points[index],
            along_m: along[index],
            evaluation,
        })
        .collect())
}

/// Points every `spacing_m` along a polyline, starting at its first vertex
/// and including the last.
pub fn sample_polyline(vertices: &[Point2], spacing_m: f64) -> Result<Vec<Point2>> {
    if vertices.is_empty() {
        return Err(Error::EmptyInput("polyline has no vertices".into()));
    }
    if !(spacing_m > 0.0) {
        return Err(Error::InvalidConfig(format!("spacing must be > 0 m, got {spacing_m}")));
    }
    let total: f64 = vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
    let n = (total / spacing_m + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(n + 2);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..=n {
        let s = k as f64 * spacing_m;
        while seg + 1 < vertices.len() - 1 && s > seg_start + vertices[seg].distance(vertices[seg + 1]) {
            seg_start += vertices[seg].distance(vertices[seg + 1]);
            seg += 1;
        }
        if vertices.len() == 1 {
            out.push(vertices[0]);
            break;
        }
        let (a, b) = (vertices[seg], vertices[seg + 1]);
        let len = a.distance(b);
        let t = if len > 0.0 { ((s - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
    }
    if let Some(last) = vertices.last() {
        if out.last().map_or(true, |p| p.distance(*last) > 1e-9) {
            out.push(*last);
        }
    }
    Ok(out)
}

/// Along-path distance of the first record that fails the coverage check.
pub fn coverage_boundary_distance(
    records: &[TrajectoryRecord],
    rx: &RadioConfig,
    module_cal: &ModuleCalibration,
) -> Result<Option<f64>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("trajectory has no records".into()));
    }
    Ok(records
        .iter()
        .find(|r| !r.evaluation.p_r_dbm.is_some_and(|p| check_coverage(p, rx, module_cal)))
        .map(|r| r.along_m))
}

/// Longest runs of consecutive covered and uncovered records, in meters.
pub fn stretch_lengths(records: &[TrajectoryRecord]) -> (f64, f64) {
    let mut best = [0.0f64, 0.0f64];
    let mut i = 0;
    while i < records.len() {
        let state = records[i].evaluation.covered;
        let mut j = i;
        while j + 1 < records.len() && records[j + 1].evaluation.covered == state {
            j += 1;
        }
        let len = records[j].along_m - records[i].along_m;
        let slot = usize::from(!state);
        best[slot] = best[slot].max(len);
        i = j + 1;
    }
    (best[0], best[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered_fraction: f64,
    pub boundary_distance_m: Option<f64>,
    pub undersupplied_cells: Vec<(usize, usize)>,
    pub threshold_dbm: f64,
    /// Mean of `p_r - threshold` over cells with a path.
    pub mean_margin_db: Option<f64>,
    pub longest_covered_stretch_m: Option<f64>,
    pub longest_gap_m: Option<f64>,
}

pub fn coverage_report(
    grid: &CoverageGrid,
    trajectory: Option<&[TrajectoryRecord]>,
    rx: &RadioConfig,
    module_cal: &ModuleCalibration,
) -> Result<CoverageReport> {
    let threshold_dbm = coverage_threshold_dbm(rx, module_cal);
    let undersupplied_cells = (0..grid.spec.rows)
        .flat_map(|r| (0..grid.spec.cols).map(move |c| (r, c)))
        .filter(|&(r, c)| !grid.cell(r, c).covered)
        .collect();
    let margins: Vec<f64> = grid
        .cells
        .iter()
        .filter_map(|c| c.p_r_dbm.map(|p| p - threshold_dbm))
        .collect();
    let mean_margin_db = (!margins.is_empty()).then(|| margins.iter().sum::<f64>() / margins.len() as f64);
    let (boundary_distance_m, longest_covered_stretch_m, longest_gap_m) = match trajectory {
        Some(records) => {
            let boundary = coverage_boundary_distance(records, rx, module_cal)?;
            let (covered, gap) = stretch_lengths(records);
            (boundary, Some(covered), Some(gap))
        }
        None => (None, None, None),
    };
    Ok(CoverageReport {
        covered_fraction: grid.covered_fraction(),
        boundary_distance_m,
        undersupplied_cells,
        threshold_dbm,
        mean_margin_db,
        longest_covered_stretch_m,
        longest_gap_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::AntennaPattern;
    use crate::scene::{Material, Obstacle, ObstacleKind};

    fn omni_tx() -> Site {
        let mut radio = RadioConfig::its_g5_rsu(0.0);
        radio.pattern = AntennaPattern::omni(10.0);
        Site::new(Point2::new(0.0, 0.0), radio)
    }

    #[test]
    fn coverage_check_examples() {
        let rx = RadioConfig::its_g5_obu();
        let m8 = ModuleCalibration {
            offset_db: 8.0,
            rows_used: 71,
        };
        assert!(check_coverage(-80.0, &rx, &m8));
        assert!(!check_coverage(-87.0, &rx, &m8));
        assert!(!check_coverage(-96.0, &rx, &ModuleCalibration::identity()));
        assert!(!check_coverage(-95.0, &rx, &ModuleCalibration::identity()));
    }

    #[test]
    fn identity_calibration_is_raw() {
        let c = Calibrations::identity();
        assert_eq!(c.apply(-71.25, VisibilityClass::Nlos), -71.25);
    }

    #[test]
    fn open_scene_grid_is_radial() {
        let scene = Scene::empty();
        let tx = omni_tx();
        let rx = RadioConfig::its_g5_obu();
        let params = PathLossParams::default();
        let cal = Calibrations::identity();
        let sim = Simulator::new(&scene, &tx, &rx, &params, &cal).unwrap();
        let spec = GridSpec::covering(Region::new(Point2::new(-50.0, -50.0), Point2::new(50.0, 50.0)).unwrap(), 10.0).unwrap();
        let grid = simulate_grid(&sim, spec, RunOptions::default());
        // Mirror-image cells have equal power.
        for r in 0..spec.rows {
            for c in 0..spec.cols {
                let a = grid.cell(r, c).p_r_dbm.unwrap();
                let b = grid.cell(spec.rows - 1 - r, spec.cols - 1 - c).p_r_dbm.unwrap();
                let t = grid.cell(c, r).p_r_dbm.unwrap();
                assert!((a - b).abs() < 1e-9);
                assert!((a - t).abs() < 1e-9);
            }
        }
        assert!(grid.cells.iter().all(|c| c.visibility == VisibilityClass::Los));
    }

    #[test]
    fn enclosed_transmitter_leaves_outside_uncovered() {
        let m = Material::new("concrete", 5.0, 8.0).unwrap();
        let walls = [
            (Point2::new(-11.0, -11.0), Point2::new(11.0, -10.0)),
            (Point2::new(-11.0, 10.0), Point2::new(11.0, 11.0)),
            (Point2::new(-11.0, -11.0), Point2::new(-10.0, 11.0)),
            (Point2::new(10.0, -11.0), Point2::new(11.0, 11.0)),
        ]
        .into_iter()
        .map(|(a, b)| Obstacle::rectangle(a, b, 10.0, "concrete", ObstacleKind::Building).unwrap())
        .collect();
        let scene = Scene::new(None, vec![m], walls).unwrap();
        let tx = omni_tx();
        let rx = RadioConfig::its_g5_obu();
        let params = PathLossParams::default();
        let cal = Calibrations::identity();
        let sim = Simulator::new(&scene, &tx, &rx, &params, &cal).unwrap();
        let spec = GridSpec::covering(Region::new(Point2::new(-40.0, -40.0), Point2::new(40.0, 40.0)).unwrap(), 5.0).unwrap();
        let grid = simulate_grid(&sim, spec, RunOptions::default());
        for r in 0..spec.rows {
            for c in 0..spec.cols {
                let p = spec.center(r, c);
                let outside = p.x.abs() > 11.0 || p.y.abs() > 11.0;
                if outside {
                    assert!(!grid.cell(r, c).covered, "cell {r},{c} at {p:?}");
                    assert!(grid.cell(r, c).p_r_dbm.is_none());
                } else if p.x.abs() < 10.0 && p.y.abs() < 10.0 {
                    assert!(grid.cell(r, c).covered);
                }
            }
        }
    }

    #[test]
    fn trajectory_decreases_on_open_road() {
        let scene = Scene::empty();
        let tx = omni_tx();
        let rx = RadioConfig::its_g5_obu();
        let params = PathLossParams::default();
        let cal = Calibrations::identity();
        let sim = Simulator::new(&scene, &tx, &rx, &params, &cal).unwrap();
        let pts = sample_polyline(&[Point2::new(5.0, 0.0), Point2::new(400.0, 0.0)], 5.0).unwrap();
        let recs = simulate_trajectory(&sim, &pts, RunOptions::default()).unwrap();
        for w in recs.windows(2) {
            assert!(w[1].evaluation.p_r_dbm.unwrap() < w[0].evaluation.p_r_dbm.unwrap());
        }
        assert_eq!(recs[0].along_m, 5.0);
        assert!((recs.last().unwrap().along_m - 400.0).abs() < 1e-9);
    }

    #[test]
    fn single_point_at_one_meter() {
        let scene = Scene::empty();
        let mut tx = omni_tx();
        tx.radio.antenna_height_m = 1.5;
        let rx = RadioConfig::its_g5_obu();
        let params = PathLossParams::default();
        let cal = Calibrations::identity();
        let sim = Simulator::new(&scene, &tx, &rx, &params, &cal).unwrap();
        let recs = simulate_trajectory(&sim, &[Point2::new(1.0, 0.0)], RunOptions::default()).unwrap();
        let b = recs[0].evaluation.breakdown.unwrap();
        assert_eq!(b.distance_term_db, 0.0);
        assert_eq!(b.total_db, b.free_space_reference_db);
    }

    #[test]
    fn polyline_sampling() {
        let pts = sample_polyline(&[Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 7.0)], 5.0).unwrap();
        let expected = [(0.0, 0.0), (5.0, 0.0), (10.0, 0.0), (10.0, 5.0), (10.0, 7.0)];
        assert_eq!(pts.len(), expected.len());
        for (p, (x, y)) in pts.iter().zip(expected) {
            assert!((p.x - x).abs() < 1e-9 && (p.y - y).abs() < 1e-9);
        }
        assert!(sample_polyline(&[], 5.0).is_err());
    }

    fn record(along: f64, covered: bool) -> TrajectoryRecord {
        TrajectoryRecord {
            index: 0,
            position: Point2::new(along, 0.0),
            along_m: along,
            evaluation: PointEvaluation {
                visibility: VisibilityClass::Los,
                distance_m: along,
                p_r_dbm: Some(if covered { -60.0 } else { -100.0 }),
                covered,
                breakdown: None,
                path_length_m: Some(along),
                interactions: 0,
            },
        }
    }

    #[test]
    fn boundary_and_stretches() {
        let rx = RadioConfig::its_g5_obu();
        let m = ModuleCalibration::identity();
        let all: Vec<_> = (0..5).map(|i| record(i as f64 * 5.0, true)).collect();
        assert_eq!(coverage_boundary_distance(&all, &rx, &m).unwrap(), None);
        let mixed: Vec<_> = [true, true, true, false, false, true, false]
            .iter()
            .enumerate()
            .map(|(i, &c)| record(i as f64 * 5.0, c))
            .collect();
        assert_eq!(coverage_boundary_distance(&mixed, &rx, &m).unwrap(), Some(15.0));
        assert_eq!(stretch_lengths(&mixed), (10.0, 5.0));
        assert!(coverage_boundary_distance(&[], &rx, &m).is_err());
    }
}
