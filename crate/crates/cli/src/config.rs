//! Project configuration document.

use std::path::{Path, PathBuf};

use covplan_core::calibration::{ExponentGrid, DEFAULT_ALIGNMENT_GATE_M};
use covplan_core::coverage::{sample_polyline, GridSpec, Region, DEFAULT_CELL_SIZE_M};
use covplan_core::io::{toml_error, GeoOrigin, FORMAT_VERSION};
use covplan_core::{PathLossParams, Point2, RadioConfig, Site};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub format_version: u32,
    pub scene: PathBuf,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub geo_origin: Option<GeoOrigin>,
    #[serde(default)]
    pub transmitters: Vec<TransmitterConfig>,
    #[serde(default = "RadioConfig::its_g5_obu")]
    pub receiver: RadioConfig,
    #[serde(default)]
    pub propagation: PathLossParams,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub region: Option<RegionConfig>,
    #[serde(default)]
    pub cell_size_m: Option<f64>,
    #[serde(default)]
    pub trajectories: Vec<TrajectoryConfig>,
    #[serde(default)]
    pub candidates: Vec<CandidateConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterConfig {
    pub name: String,
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default = "default_rsu")]
    pub radio: RadioConfig,
}

fn default_rsu() -> RadioConfig {
    RadioConfig::its_g5_rsu(0.0)
}

impl TransmitterConfig {
    pub fn site(&self) -> Site {
        Site::new(Point2::new(self.x_m, self.y_m), self.radio.clone())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default)]
    pub record: Option<PathBuf>,
    #[serde(default)]
    pub cw_log: Option<PathBuf>,
    #[serde(default)]
    pub sweep_log: Option<PathBuf>,
    #[serde(default)]
    pub service_log: Option<PathBuf>,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub per_class: bool,
    #[serde(default = "default_gate")]
    pub alignment_gate_m: f64,
    /// Match samples to the points of this trajectory instead of simulating
    /// at the sample positions themselves.
    #[serde(default)]
    pub align_to_trajectory: Option<String>,
    #[serde(default)]
    pub fit_exponents: bool,
    #[serde(default)]
    pub exponent_grid: GridConfig,
}

fn default_weight() -> f64 {
    1.0
}

fn default_gate() -> f64 {
    DEFAULT_ALIGNMENT_GATE_M
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            record: None,
            cw_log: None,
            sweep_log: None,
            service_log: None,
            weight: default_weight(),
            per_class: false,
            alignment_gate_m: default_gate(),
            align_to_trajectory: None,
            fit_exponents: false,
            exponent_grid: GridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            min: 2.0,
            max: 3.5,
            step: 0.1,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> CliResult<ExponentGrid> {
        Ok(ExponentGrid::uniform(self.min, self.max, self.step)?)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub min_x_m: f64,
    pub min_y_m: f64,
    pub max_x_m: f64,
    pub max_y_m: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub name: String,
    pub vertices_m: Vec<(f64, f64)>,
    #[serde(default = "default_spacing")]
    pub spacing_m: f64,
}

fn default_spacing() -> f64 {
    5.0
}

impl TrajectoryConfig {
    pub fn points(&self) -> CliResult<Vec<Point2>> {
        let vertices: Vec<Point2> = self.vertices_m.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        Ok(sample_polyline(&vertices, self.spacing_m)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub name: String,
    pub x_m: f64,
    pub y_m: f64,
    /// Overrides the boresight of the template radio's pattern.
    #[serde(default)]
    pub boresight_azimuth_deg: Option<f64>,
    /// Defaults to the first transmitter's radio.
    #[serde(default)]
    pub radio: Option<RadioConfig>,
}

/// A loaded configuration with every path resolved against the config
/// file's directory.
#[derive(Debug, Clone)]
pub struct Project {
    pub path: PathBuf,
    pub config: ProjectConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Project {
    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.is_file() {
            return Err(CliError::missing(path, "configuration file"));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::from(covplan_core::Error::Io {
            path: path.into(),
            source: e,
        }))?;
        let mut config: ProjectConfig = toml::from_str(&text).map_err(|e| CliError::from(toml_error(path, &text, e)))?;
        if config.format_version != FORMAT_VERSION {
            return Err(CliError::config(format!(
                "unsupported format_version {}, expected {FORMAT_VERSION}",
                config.format_version
            ))
            .at(path));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        config.scene = resolve(base, &config.scene);
        if let Some(o) = &config.output_dir {
            config.output_dir = Some(resolve(base, o));
        }
        let cal = &mut config.calibration;
        for p in [&mut cal.record, &mut cal.cw_log, &mut cal.sweep_log, &mut cal.service_log]
            .into_iter()
            .flatten()
        {
            *p = resolve(base, p);
        }
        let project = Self {
            path: path.to_path_buf(),
            config,
        };
        project.validate()?;
        Ok(project)
    }

    fn validate(&self) -> CliResult<()> {
        let c = &self.config;
        if !c.scene.is_file() {
            return Err(CliError::missing(&c.scene, "scene file"));
        }
        let cal = &c.calibration;
        for (p, what) in [
            (&cal.cw_log, "CW log"),
            (&cal.sweep_log, "sweep log"),
            (&cal.service_log, "service log"),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(CliError::missing(p, what));
                }
            }
        }
        let mut names: Vec<&str> = c.transmitters.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::config("transmitter names must be unique").at(&self.path));
        }
        for t in &c.transmitters {
            t.radio.validate()?;
        }
        c.receiver.validate()?;
        c.propagation.validate()?;
        if let Some(name) = &cal.align_to_trajectory {
            if self.trajectory(name).is_none() {
                return Err(CliError::config(format!("align_to_trajectory names unknown trajectory {name:?}")).at(&self.path));
            }
        }
        if !(cal.alignment_gate_m > 0.0) {
            return Err(CliError::config("alignment_gate_m must be > 0").at(&self.path));
        }
        Ok(())
    }

    pub fn trajectory(&self, name: &str) -> Option<&TrajectoryConfig> {
        self.config.trajectories.iter().find(|t| t.name == name)
    }

    pub fn grid_spec(&self, cell_size_override: Option<f64>) -> CliResult<Option<GridSpec>> {
        let Some(r) = self.config.region else {
            return Ok(None);
        };
        let region = Region::new(Point2::new(r.min_x_m, r.min_y_m), Point2::new(r.max_x_m, r.max_y_m))?;
        let cell = cell_size_override
            .or(self.config.cell_size_m)
            .unwrap_or(DEFAULT_CELL_SIZE_M);
        Ok(Some(GridSpec::covering(region, cell)?))
    }

    /// The transmitter named `name`, or the only one when `name` is absent.
    pub fn transmitter(&self, name: Option<&str>) -> CliResult<&TransmitterConfig> {
        let txs = &self.config.transmitters;
        match name {
            Some(n) => txs
                .iter()
                .find(|t| t.name == n)
                .ok_or_else(|| CliError::config(format!("no transmitter named {n:?}")).at(&self.path)),
            None => txs
                .first()
                .ok_or_else(|| CliError::config("configuration defines no transmitters").at(&self.path)),
        }
    }
}
