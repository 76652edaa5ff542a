//! File formats: scene documents, measurement and sweep logs, calibration
//! records and coverage exports.
//!
//! Structured documents are TOML with unit-suffixed field names and a
//! top-level `format_version`. Logs and tabular exports are comma-separated
//! with a header row.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::calibration::{CwCalibration, MeasurementSample, ModuleCalibration, ModuleSweepRow, SampleKind};
use crate::coverage::{CoverageGrid, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scene::{Material, Obstacle, ObstacleKind, Scene, TerrainGrid};

pub const FORMAT_VERSION: u32 = 1;

/// Plausible range for any dBm quantity; values outside are treated as unit
/// errors.
pub const DBM_RANGE: (f64, f64) = (-200.0, 60.0);

pub fn check_dbm(value: f64, what: &str) -> std::result::Result<(), String> {
    if !value.is_finite() || value < DBM_RANGE.0 || value > DBM_RANGE.1 {
        Err(format!(
            "{what} = {value} dBm is outside [{}, {}] (unit error?)",
            DBM_RANGE.0, DBM_RANGE.1
        ))
    } else {
        Ok(())
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Converts a TOML error into a line-numbered parse error.
pub fn toml_error(path: &Path, text: &str, err: toml::de::Error) -> Error {
    let line = err
        .span()
        .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1);
    Error::Parse {
        path: path.into(),
        line,
        message: err.message().to_string(),
    }
}

pub(crate) fn check_version(path: &Path, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("unsupported format_version {version}, expected {FORMAT_VERSION}"),
        });
    }
    Ok(())
}

// Scene documents.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub format_version: u32,
    #[serde(default)]
    pub terrain: Option<TerrainDoc>,
    #[serde(default)]
    pub materials: Vec<Material>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainDoc {
    pub origin_x_m: f64,
    pub origin_y_m: f64,
    pub cell_size_m: f64,
    /// `heights_m[row][col]`, row 0 at `origin_y_m`.
    pub heights_m: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleDoc {
    pub kind: ObstacleKind,
    pub material: String,
    #[serde(default)]
    pub base_height_m: f64,
    pub top_height_m: f64,
    pub footprint_m: Vec<(f64, f64)>,
    #[serde(default)]
    pub hard_blocker: Option<bool>,
}

impl SceneDoc {
    pub fn into_scene(self) -> Result<Scene> {
        let terrain = self
            .terrain
            .map(|t| TerrainGrid::new(Point2::new(t.origin_x_m, t.origin_y_m), t.cell_size_m, t.heights_m))
            .transpose()?;
        let obstacles = self
            .obstacles
            .into_iter()
            .enumerate()
            .map(|(i, o)| {
                let footprint = o.footprint_m.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
                let obstacle = Obstacle::new(footprint, o.base_height_m, o.top_height_m, o.material, o.kind)
                    .map_err(|e| Error::InvalidScene(format!("obstacle {i}: {e}")))?;
                Ok(match o.hard_blocker {
                    Some(h) => obstacle.with_hard_blocker(h),
                    None => obstacle,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Scene::new(terrain, self.materials, obstacles)
    }
}

pub fn parse_scene(path: &Path, text: &str) -> Result<Scene> {
    let doc: SceneDoc = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
    check_version(path, doc.format_version)?;
    doc.into_scene()
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    parse_scene(path, &read_text(path)?)
}

// Local tangent plane.

const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// Equirectangular projection around a reference point; adequate over the
/// few kilometres of a planning area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoOrigin {
    pub fn to_local(&self, lat_deg: f64, lon_deg: f64) -> Point2 {
        let x = (lon_deg - self.lon_deg).to_radians() * EARTH_RADIUS_M * self.lat_deg.to_radians().cos();
        let y = (lat_deg - self.lat_deg).to_radians() * EARTH_RADIUS_M;
        Point2::new(x, y)
    }

    /// Inverse of [`to_local`](Self::to_local), returning `(lat, lon)`.
    pub fn to_geographic(&self, p: Point2) -> (f64, f64) {
        let lat = self.lat_deg + (p.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon_deg + (p.x / (EARTH_RADIUS_M * self.lat_deg.to_radians().cos())).to_degrees();
        (lat, lon)
    }
}

// Logs.

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        message: message.into(),
    }
}

fn field_f64(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let raw = rec.get(idx).unwrap_or("");
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(path, line, format!("{name}: cannot parse {raw:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{name}: value must be finite")));
    }
    Ok(v)
}

/// Reads a measurement log with columns
/// `timestamp, x_m|lat, y_m|lon, rss_dbm, kind, tx_power_dbm`.
/// Geographic columns need `origin`.
pub fn parse_measurement_log<R: Read>(path: &Path, input: R, origin: Option<&GeoOrigin>) -> Result<Vec<MeasurementSample>> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let ts = column(&headers, &["timestamp", "time"]);
    let rss = column(&headers, &["rss_dbm", "rssi_dbm"]).ok_or_else(|| parse_err(path, 1, "missing column rss_dbm"))?;
    let kind = column(&headers, &["kind"]).ok_or_else(|| parse_err(path, 1, "missing column kind"))?;
    let txp = column(&headers, &["tx_power_dbm"]).ok_or_else(|| parse_err(path, 1, "missing column tx_power_dbm"))?;
    enum Coords {
        Planar(usize, usize),
        Geographic(usize, usize),
    }
    let coords = match (
        column(&headers, &["x_m"]),
        column(&headers, &["y_m"]),
        column(&headers, &["lat", "lat_deg"]),
        column(&headers, &["lon", "lon_deg"]),
    ) {
        (Some(x), Some(y), _, _) => Coords::Planar(x, y),
        (_, _, Some(la), Some(lo)) => {
            if origin.is_none() {
                return Err(parse_err(path, 1, "lat/lon columns need a geographic origin in the config"));
            }
            Coords::Geographic(la, lo)
        }
        _ => return Err(parse_err(path, 1, "missing position columns (x_m,y_m or lat,lon)")),
    };

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let position = match coords {
            Coords::Planar(x, y) => Point2::new(
                field_f64(path, line, &rec, x, "x_m")?,
                field_f64(path, line, &rec, y, "y_m")?,
            ),
            Coords::Geographic(la, lo) => {
                let lat = field_f64(path, line, &rec, la, "lat")?;
                let lon = field_f64(path, line, &rec, lo, "lon")?;
                if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                    return Err(parse_err(path, line, format!("invalid coordinates {lat}, {lon}")));
                }
                origin.expect("checked above").to_local(lat, lon)
            }
        };
        let rss_dbm = field_f64(path, line, &rec, rss, "rss_dbm")?;
        check_dbm(rss_dbm, "rss_dbm").map_err(|m| parse_err(path, line, m))?;
        let source_tx_power_dbm = field_f64(path, line, &rec, txp, "tx_power_dbm")?;
        check_dbm(source_tx_power_dbm, "tx_power_dbm").map_err(|m| parse_err(path, line, m))?;
        let kind = match rec.get(kind).unwrap_or("").to_ascii_uppercase().as_str() {
            "CW" => SampleKind::Cw,
            "SERVICE" => SampleKind::Service,
            other => return Err(parse_err(path, line, format!("kind must be CW or SERVICE, got {other:?}"))),
        };
        let timestamp = ts.and_then(|i| rec.get(i)).filter(|s| !s.is_empty()).map(str::to_string);
        out.push(MeasurementSample {
            position,
            rss_dbm,
            kind,
            timestamp,
            source_tx_power_dbm,
        });
    }
    Ok(out)
}

pub fn read_measurement_log(path: &Path, origin: Option<&GeoOrigin>) -> Result<Vec<MeasurementSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_measurement_log(path, file, origin)
}

/// Reads a sweep log with columns `attenuation_db, p_spec_dbm, p_module_dbm`.
pub fn parse_sweep_log<R: Read>(path: &Path, input: R) -> Result<Vec<ModuleSweepRow>> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let att = column(&headers, &["attenuation_db"]).ok_or_else(|| parse_err(path, 1, "missing column attenuation_db"))?;
    let spec = column(&headers, &["p_spec_dbm"]).ok_or_else(|| parse_err(path, 1, "missing column p_spec_dbm"))?;
    let module = column(&headers, &["p_module_dbm"]).ok_or_else(|| parse_err(path, 1, "missing column p_module_dbm"))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let attenuation_db = field_f64(path, line, &rec, att, "attenuation_db")?;
        if attenuation_db < 0.0 {
            return Err(parse_err(path, line, format!("attenuation_db must be >= 0, got {attenuation_db}")));
        }
        let p_spec_dbm = field_f64(path, line, &rec, spec, "p_spec_dbm")?;
        check_dbm(p_spec_dbm, "p_spec_dbm").map_err(|m| parse_err(path, line, m))?;
        let p_module_dbm = field_f64(path, line, &rec, module, "p_module_dbm")?;
        check_dbm(p_module_dbm, "p_module_dbm").map_err(|m| parse_err(path, line, m))?;
        out.push(ModuleSweepRow {
            attenuation_db,
            p_spec_dbm,
            p_module_dbm,
        });
    }
    Ok(out)
}

pub fn read_sweep_log(path: &Path) -> Result<Vec<ModuleSweepRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_sweep_log(path, file)
}

pub fn write_measurement_log<W: Write>(out: W, samples: &[MeasurementSample]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "x_m", "y_m", "rss_dbm", "kind", "tx_power_dbm"])?;
    for s in samples {
        w.write_record([
            s.timestamp.clone().unwrap_or_default(),
            fmt(s.position.x),
            fmt(s.position.y),
            format!("{}", s.rss_dbm),
            match s.kind {
                SampleKind::Cw => "CW".into(),
                SampleKind::Service => "SERVICE".into(),
            },
            format!("{}", s.source_tx_power_dbm),
        ])?;
    }
    w.flush()
}

// Calibration records.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRecord {
    pub format_version: u32,
    pub cw: CwCalibration,
    #[serde(default)]
    pub module: Option<ModuleCalibration>,
    #[serde(default)]
    pub per_class: bool,
    #[serde(default)]
    pub fitted_exponents: Option<FittedExponents>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedExponents {
    pub los: f64,
    pub olos: f64,
    pub nlos: f64,
}

impl CalibrationRecord {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration record serializes")
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let rec: CalibrationRecord = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
        check_version(path, rec.format_version)?;
        Ok(rec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }
}

// Coverage exports.

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Columns `x_m, y_m, p_r_dbm, class, covered, distance_m`; cells without a
/// path have an empty `p_r_dbm`.
pub fn write_grid_csv<W: Write>(out: W, grid: &CoverageGrid) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_m", "y_m", "p_r_dbm", "class", "covered", "distance_m"])?;
    for r in 0..grid.spec.rows {
        for c in 0..grid.spec.cols {
            let p = grid.spec.center(r, c);
            let cell = grid.cell(r, c);
            w.write_record([
                fmt(p.x),
                fmt(p.y),
                fmt_opt(cell.p_r_dbm),
                cell.visibility.to_string(),
                cell.covered.to_string(),
                fmt(cell.distance_m),
            ])?;
        }
    }
    w.flush()
}

/// One polygon feature per cell. With `origin` the coordinates are WGS84
/// `[lon, lat]`; otherwise they are local planar meters.
pub fn grid_geojson(grid: &CoverageGrid, origin: Option<&GeoOrigin>) -> serde_json::Value {
    let mut features = Vec::with_capacity(grid.cells.len());
    for r in 0..grid.spec.rows {
        for c in 0..grid.spec.cols {
            let cell = grid.cell(r, c);
            let ring: Vec<serde_json::Value> = grid
                .spec
                .cell_ring(r, c)
                .iter()
                .map(|p| match origin {
                    Some(o) => {
                        let (lat, lon) = o.to_geographic(*p);
                        json!([lon, lat])
                    }
                    None => json!([p.x, p.y]),
                })
                .collect();
            let center = grid.spec.center(r, c);
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [ring] },
                "properties": {
                    "x_m": center.x,
                    "y_m": center.y,
                    "p_r_dbm": cell.p_r_dbm,
                    "class": cell.visibility.as_str(),
                    "covered": cell.covered,
                    "distance_m": cell.distance_m,
                },
            }));
        }
    }
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn write_grid_geojson<W: Write>(mut out: W, grid: &CoverageGrid, origin: Option<&GeoOrigin>) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, &grid_geojson(grid, origin))?;
    out.write_all(b"\n")
}

/// Per-point path-loss breakdown along a trajectory.
pub fn write_trajectory_csv<W: Write>(out: W, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "x_m",
        "y_m",
        "along_m",
        "distance_m",
        "class",
        "p_r_dbm",
        "covered",
        "path_length_m",
        "interactions",
        "pl_total_db",
        "pl_reference_db",
        "pl_distance_db",
        "pl_interaction_db",
        "pl_waveguiding_db",
        "pl_diverse_db",
    ])?;
    for r in records {
        let e = &r.evaluation;
        let b = e.breakdown;
        w.write_record([
            r.index.to_string(),
            fmt(r.position.x),
            fmt(r.position.y),
            fmt(r.along_m),
            fmt(e.distance_m),
            e.visibility.to_string(),
            fmt_opt(e.p_r_dbm),
            e.covered.to_string(),
            fmt_opt(e.path_length_m),
            e.interactions.to_string(),
            fmt_opt(b.map(|b| b.total_db)),
            fmt_opt(b.map(|b| b.free_space_reference_db)),
            fmt_opt(b.map(|b| b.distance_term_db)),
            fmt_opt(b.map(|b| b.interaction_term_db)),
            fmt_opt(b.map(|b| b.waveguiding_db)),
            fmt_opt(b.map(|b| b.diverse_losses_db)),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::VisibilityClass;

    const SCENE: &str = r#"
format_version = 1

[terrain]
origin_x_m = -100.0
origin_y_m = -100.0
cell_size_m = 100.0
heights_m = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]

[[materials]]
name = "concrete"
relative_permittivity = 5.3
reflection_loss_db = 8.0

[[materials]]
name = "foliage"
relative_permittivity = 1.5
reflection_loss_db = 2.0

[[obstacles]]
kind = "BUILDING"
material = "concrete"
top_height_m = 12.0
footprint_m = [[10.0, 10.0], [30.0, 10.0], [30.0, 30.0], [10.0, 30.0]]

[[obstacles]]
kind = "VEGETATION"
material = "foliage"
top_height_m = 6.0
hard_blocker = true
footprint_m = [[-30.0, 10.0], [-20.0, 10.0], [-25.0, 20.0]]
"#;

    #[test]
    fn scene_document() {
        let s = parse_scene(Path::new("scene.toml"), SCENE).unwrap();
        assert_eq!(s.obstacles().len(), 2);
        assert!(s.obstacles()[1].hard_blocker);
        assert_eq!(s.terrain().unwrap().dims(), (3, 3));
        assert_eq!(s.material("concrete").unwrap().relative_permittivity, 5.3);
    }

    #[test]
    fn scene_errors_have_lines() {
        let bad = SCENE.replace("top_height_m = 12.0", "top_height_m = \"tall\"");
        match parse_scene(Path::new("scene.toml"), &bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 23),
            other => panic!("unexpected {other:?}"),
        }
        let bad_version = SCENE.replace("format_version = 1", "format_version = 7");
        assert!(matches!(parse_scene(Path::new("s"), &bad_version), Err(Error::Parse { .. })));
        let unknown_material = SCENE.replace("material = \"foliage\"", "material = \"glass\"");
        assert!(matches!(parse_scene(Path::new("s"), &unknown_material), Err(Error::InvalidScene(_))));
    }

    #[test]
    fn measurement_log_planar_and_geographic() {
        let planar = "timestamp,x_m,y_m,rss_dbm,kind,tx_power_dbm\n1,5,0,-50.5,CW,10\n2,10,0,-60,service,23\n";
        let s = parse_measurement_log(Path::new("log.csv"), planar.as_bytes(), None).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].kind, SampleKind::Service);
        assert_eq!(s[0].timestamp.as_deref(), Some("1"));

        let origin = GeoOrigin {
            lat_deg: 51.0,
            lon_deg: 13.7,
        };
        let geo = "timestamp,lat,lon,rss_dbm,kind,tx_power_dbm\n,51.001,13.7,-70,CW,10\n";
        let s = parse_measurement_log(Path::new("log.csv"), geo.as_bytes(), Some(&origin)).unwrap();
        assert!((s[0].position.y - 111.32).abs() < 0.1);
        assert!(s[0].position.x.abs() < 1e-9);
        assert!(parse_measurement_log(Path::new("log.csv"), geo.as_bytes(), None).is_err());
    }

    #[test]
    fn measurement_log_rejects_with_line_numbers() {
        let cases = [
            ("timestamp,x_m,y_m,rss_dbm,kind,tx_power_dbm\n1,5,0,-50,CW,10\n2,abc,0,-60,CW,10\n", 3),
            ("timestamp,x_m,y_m,rss_dbm,kind,tx_power_dbm\n1,5,0,-50000,CW,10\n", 2),
            ("timestamp,x_m,y_m,rss_dbm,kind,tx_power_dbm\n1,5,0,-50,CW,10\n1,5,0,-50,XX,10\n", 3),
            ("timestamp,x_m,y_m,rss_dbm,kind,tx_power_dbm\n1,5,0,-50,CW,10000\n", 2),
        ];
        for (text, expected) in cases {
            match parse_measurement_log(Path::new("log.csv"), text.as_bytes(), None) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("unexpected {other:?}"),
            }
        }
        let missing = "timestamp,x_m,y_m,kind,tx_power_dbm\n";
        assert!(parse_measurement_log(Path::new("l"), missing.as_bytes(), None).is_err());
    }

    #[test]
    fn sweep_log() {
        let text = "attenuation_db,p_spec_dbm,p_module_dbm\n35,-12,-20\n36,-13,-21\n";
        let rows = parse_sweep_log(Path::new("s.csv"), text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        let bad = "attenuation_db,p_spec_dbm,p_module_dbm\n-1,-12,-20\n";
        assert!(matches!(
            parse_sweep_log(Path::new("s.csv"), bad.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn calibration_record_roundtrip() {
        let mut cw = CwCalibration::identity();
        cw.weight = 0.25;
        cw.offset_db = 0.5;
        cw.sample_count = 40;
        cw.per_class_offsets.insert(VisibilityClass::Nlos, -1.25);
        let rec = CalibrationRecord {
            format_version: FORMAT_VERSION,
            cw,
            module: Some(ModuleCalibration {
                offset_db: 8.0,
                rows_used: 71,
            }),
            per_class: true,
            fitted_exponents: Some(FittedExponents {
                los: 2.3,
                olos: 2.9,
                nlos: 3.0,
            }),
        };
        let text = rec.to_toml();
        assert_eq!(CalibrationRecord::parse(Path::new("c.toml"), &text).unwrap(), rec);
    }

    #[test]
    fn geo_roundtrip() {
        let o = GeoOrigin {
            lat_deg: 50.99,
            lon_deg: 13.73,
        };
        let p = Point2::new(1234.5, -876.25);
        let (lat, lon) = o.to_geographic(p);
        let q = o.to_local(lat, lon);
        assert!(p.distance(q) < 1e-6);
    }
}
