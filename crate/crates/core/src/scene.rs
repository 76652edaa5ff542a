//! 2.5D environment model: a terrain height field plus extruded,
//! material-tagged obstacle footprints.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    centroid, convex_vertices, is_simple_polygon, segment_inside_intervals, signed_area2, Point2,
    Point3, EPS_M,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub relative_permittivity: f64,
    pub reflection_loss_db: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, relative_permittivity: f64, reflection_loss_db: f64) -> Result<Self> {
        let name = name.into();
        if !(relative_permittivity >= 1.0) || !relative_permittivity.is_finite() {
            return Err(Error::InvalidScene(format!(
                "material {name}: relative permittivity must be >= 1, got {relative_permittivity}"
            )));
        }
        if !(reflection_loss_db >= 0.0) || !reflection_loss_db.is_finite() {
            return Err(Error::InvalidScene(format!(
                "material {name}: reflection loss must be >= 0 dB, got {reflection_loss_db}"
            )));
        }
        Ok(Self {
            name,
            relative_permittivity,
            reflection_loss_db,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObstacleKind {
    Building,
    NoiseBarrier,
    Vegetation,
    Vehicle,
    Other,
}

impl ObstacleKind {
    /// Buildings and noise barriers are walls; everything else only attenuates.
    pub fn default_hard_blocker(self) -> bool {
        matches!(self, ObstacleKind::Building | ObstacleKind::NoiseBarrier)
    }
}

/// A prism: `footprint` extruded from `base_height_m` to `top_height_m`
/// above the local ground level.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub footprint: Vec<Point2>,
    pub base_height_m: f64,
    pub top_height_m: f64,
    pub material: String,
    pub kind: ObstacleKind,
    pub hard_blocker: bool,
}

impl Obstacle {
    pub fn new(
        footprint: Vec<Point2>,
        base_height_m: f64,
        top_height_m: f64,
        material: impl Into<String>,
        kind: ObstacleKind,
    ) -> Result<Self> {
        if footprint.len() < 3 {
            return Err(Error::InvalidScene(format!(
                "obstacle footprint needs at least 3 vertices, got {}",
                footprint.len()
            )));
        }
        if footprint.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidScene("obstacle footprint has non-finite vertex".into()));
        }
        if signed_area2(&footprint).abs() <= EPS_M {
            return Err(Error::InvalidScene("obstacle footprint has zero area".into()));
        }
        if !is_simple_polygon(&footprint) {
            return Err(Error::InvalidScene("obstacle footprint is self-intersecting".into()));
        }
        if !(base_height_m >= 0.0) || !(top_height_m > base_height_m) || !top_height_m.is_finite() {
            return Err(Error::InvalidScene(format!(
                "obstacle heights must satisfy top > base >= 0, got base {base_height_m}, top {top_height_m}"
            )));
        }
        Ok(Self {
            footprint,
            base_height_m,
            top_height_m,
            material: material.into(),
            kind,
            hard_blocker: kind.default_hard_blocker(),
        })
    }

    pub fn with_hard_blocker(mut self, hard: bool) -> Self {
        self.hard_blocker = hard;
        self
    }

    pub fn rectangle(
        min: Point2,
        max: Point2,
        top_height_m: f64,
        material: impl Into<String>,
        kind: ObstacleKind,
    ) -> Result<Self> {
        let footprint = vec![
            min,
            Point2::new(max.x, min.y),
            max,
            Point2::new(min.x, max.y),
        ];
        Self::new(footprint, 0.0, top_height_m, material, kind)
    }
}

/// Regular elevation grid. `heights[row][col]` is the elevation at
/// `(origin.x + col * cell_size_m, origin.y + row * cell_size_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    origin: Point2,
    cell_size_m: f64,
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
}

impl TerrainGrid {
    pub fn new(origin: Point2, cell_size_m: f64, heights: Vec<Vec<f64>>) -> Result<Self> {
        if !(cell_size_m > 0.0) || !cell_size_m.is_finite() {
            return Err(Error::InvalidScene(format!("terrain cell size must be > 0, got {cell_size_m}")));
        }
        let rows = heights.len();
        let cols = heights.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidScene("terrain heights must be non-empty".into()));
        }
        if heights.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidScene("terrain heights must be rectangular".into()));
        }
        let heights: Vec<f64> = heights.into_iter().flatten().collect();
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidScene("terrain heights must be finite".into()));
        }
        Ok(Self {
            origin,
            cell_size_m,
            rows,
            cols,
            heights,
        })
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    fn max_x(&self) -> f64 {
        self.origin.x + (self.cols - 1) as f64 * self.cell_size_m
    }

    fn max_y(&self) -> f64 {
        self.origin.y + (self.rows - 1) as f64 * self.cell_size_m
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.origin.x - EPS_M
            && p.y >= self.origin.y - EPS_M
            && p.x <= self.max_x() + EPS_M
            && p.y <= self.max_y() + EPS_M
    }

    /// Bilinear interpolation of the surrounding grid heights.
    pub fn height_at(&self, p: Point2) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfTerrainBounds { x: p.x, y: p.y });
        }
        Ok(self.interpolate(p))
    }

    /// Like [`height_at`](Self::height_at) but clamps `p` into the grid hull.
    pub fn height_clamped(&self, p: Point2) -> f64 {
        let q = Point2::new(
            p.x.clamp(self.origin.x, self.max_x()),
            p.y.clamp(self.origin.y, self.max_y()),
        );
        self.interpolate(q)
    }

    fn interpolate(&self, p: Point2) -> f64 {
        let fx = ((p.x - self.origin.x) / self.cell_size_m).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((p.y - self.origin.y) / self.cell_size_m).clamp(0.0, (self.rows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.cols.saturating_sub(2));
        let r0 = (fy.floor() as usize).min(self.rows.saturating_sub(2));
        let c1 = (c0 + 1).min(self.cols - 1);
        let r1 = (r0 + 1).min(self.rows - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let h00 = self.at(r0, c0);
        let h01 = self.at(r0, c1);
        let h10 = self.at(r1, c0);
        let h11 = self.at(r1, c1);
        let bottom = h00 + (h01 - h00) * tx;
        let top = h10 + (h11 - h10) * tx;
        bottom + (top - bottom) * ty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VisibilityClass {
    Los,
    Olos,
    Nlos,
}

impl VisibilityClass {
    pub const ALL: [VisibilityClass; 3] = [VisibilityClass::Los, VisibilityClass::Olos, VisibilityClass::Nlos];

    pub fn as_str(self) -> &'static str {
        match self {
            VisibilityClass::Los => "LOS",
            VisibilityClass::Olos => "OLOS",
            VisibilityClass::Nlos => "NLOS",
        }
    }
}

impl fmt::Display for VisibilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VisibilityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOS" => Ok(VisibilityClass::Los),
            "OLOS" => Ok(VisibilityClass::Olos),
            "NLOS" => Ok(VisibilityClass::Nlos),
            other => Err(Error::domain(format!("unknown visibility class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    min: Point2,
    max: Point2,
}

/// Which obstacles a blocking query considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Blockers {
    All,
    HardOnly,
}

#[derive(Debug, Clone)]
pub struct Scene {
    terrain: Option<TerrainGrid>,
    obstacles: Vec<Obstacle>,
    materials: BTreeMap<String, Material>,
    // Ground elevation each obstacle stands on (terrain at its centroid).
    ground_m: Vec<f64>,
    bounds: Vec<Bounds>,
}

impl Default for Scene {
    fn default() -> Self {
        Self::empty()
    }
}

impl Scene {
    pub fn empty() -> Self {
        Self {
            terrain: None,
            obstacles: Vec::new(),
            materials: BTreeMap::new(),
            ground_m: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn new(terrain: Option<TerrainGrid>, materials: Vec<Material>, obstacles: Vec<Obstacle>) -> Result<Self> {
        let mut catalog = BTreeMap::new();
        for m in materials {
            if catalog.contains_key(&m.name) {
                return Err(Error::InvalidScene(format!("duplicate material {:?}", m.name)));
            }
            catalog.insert(m.name.clone(), m);
        }
        for (i, o) in obstacles.iter().enumerate() {
            if !catalog.contains_key(&o.material) {
                return Err(Error::InvalidScene(format!(
                    "obstacle {i} references unknown material {:?}",
                    o.material
                )));
            }
        }
        let ground_m = obstacles
            .iter()
            .map(|o| terrain.as_ref().map_or(0.0, |t| t.height_clamped(centroid(&o.footprint))))
            .collect();
        let bounds = obstacles
            .iter()
            .map(|o| {
                let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
                let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for p in &o.footprint {
                    min = Point2::new(min.x.min(p.x), min.y.min(p.y));
                    max = Point2::new(max.x.max(p.x), max.y.max(p.y));
                }
                Bounds { min, max }
            })
            .collect();
        Ok(Self {
            terrain,
            obstacles,
            materials: catalog,
            ground_m,
            bounds,
        })
    }

    pub fn terrain(&self) -> Option<&TerrainGrid> {
        self.terrain.as_ref()
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn material(&self, name: &str) -> Option<&Material> {
        self.materials.get(name)
    }

    pub fn materials(&self) -> impl Iterator<Item = &Material> {
        self.materials.values()
    }

    /// Same terrain and materials, no obstacles.
    pub fn without_obstacles(&self) -> Scene {
        Scene::new(self.terrain.clone(), self.materials.values().cloned().collect(), Vec::new())
            .expect("terrain and materials already validated")
    }

    /// Absolute z-range `(bottom, top)` of an obstacle's volume.
    pub fn obstacle_z_range(&self, index: usize) -> (f64, f64) {
        let o = &self.obstacles[index];
        let g = self.ground_m[index];
        (g + o.base_height_m, g + o.top_height_m)
    }

    /// Elevation of the ground at `p`; zero everywhere without terrain.
    pub fn terrain_height_at(&self, p: Point2) -> Result<f64> {
        match &self.terrain {
            None => Ok(0.0),
            Some(t) => t.height_at(p),
        }
    }

    /// Ground elevation, clamping to the terrain hull instead of failing.
    pub fn ground_clamped(&self, p: Point2) -> f64 {
        self.terrain.as_ref().map_or(0.0, |t| t.height_clamped(p))
    }

    /// Whether `p` lies strictly inside the volume of obstacle `index`.
    pub fn obstacle_contains(&self, index: usize, p: Point3) -> bool {
        let (lo, hi) = self.obstacle_z_range(index);
        p.z > lo + EPS_M
            && p.z < hi - EPS_M
            && crate::geometry::point_strictly_inside(&self.obstacles[index].footprint, p.xy())
    }

    /// True iff the open segment `(a, b)` passes through an obstacle volume
    /// (hard blockers only when `hard_only`) or below the terrain surface.
    pub fn segment_blocked_3d(&self, a: Point3, b: Point3, hard_only: bool) -> bool {
        let blockers = if hard_only { Blockers::HardOnly } else { Blockers::All };
        let (a, b) = canonical(a, b);
        self.obstacles_block(a, b, blockers) || self.terrain_blocks(a, b)
    }

    /// LOS when nothing obstructs the direct ray; OLOS when it is obstructed
    /// but its ground track crosses no hard-blocker footprint; NLOS otherwise.
    pub fn classify_visibility(&self, tx: Point3, rx: Point3) -> VisibilityClass {
        if !self.segment_blocked_3d(tx, rx, false) {
            return VisibilityClass::Los;
        }
        let (a, b) = canonical(tx, rx);
        let crosses_wall = (0..self.obstacles.len()).any(|i| {
            self.obstacles[i].hard_blocker
                && self.bbox_overlaps(i, a.xy(), b.xy())
                && !segment_inside_intervals(&self.obstacles[i].footprint, a.xy(), b.xy()).is_empty()
        });
        if crosses_wall {
            VisibilityClass::Nlos
        } else {
            VisibilityClass::Olos
        }
    }

    pub(crate) fn obstacles_block(&self, a: Point3, b: Point3, blockers: Blockers) -> bool {
        (0..self.obstacles.len()).any(|i| {
            (blockers == Blockers::All || self.obstacles[i].hard_blocker) && self.obstacle_blocks(i, a, b)
        })
    }

    fn bbox_overlaps(&self, i: usize, a: Point2, b: Point2) -> bool {
        let bb = self.bounds[i];
        a.x.max(b.x) >= bb.min.x - EPS_M
            && a.x.min(b.x) <= bb.max.x + EPS_M
            && a.y.max(b.y) >= bb.min.y - EPS_M
            && a.y.min(b.y) <= bb.max.y + EPS_M
    }

    fn obstacle_blocks(&self, i: usize, a: Point3, b: Point3) -> bool {
        if !self.bbox_overlaps(i, a.xy(), b.xy()) {
            return false;
        }
        let (lo, hi) = self.obstacle_z_range(i);
        if a.z.max(b.z) <= lo || a.z.min(b.z) >= hi {
            return false;
        }
        let len = a.distance(b);
        let Some((z0, z1)) = z_window(a.z, b.z, lo, hi) else {
            return false;
        };
        segment_inside_intervals(&self.obstacles[i].footprint, a.xy(), b.xy())
            .into_iter()
            .any(|(t0, t1)| (t1.min(z1) - t0.max(z0)) * len > EPS_M)
    }

    fn terrain_blocks(&self, a: Point3, b: Point3) -> bool {
        let Some(t) = &self.terrain else {
            return false;
        };
        let horizontal = a.xy().distance(b.xy());
        if horizontal <= EPS_M {
            return false;
        }
        let step = 0.5 * t.cell_size_m();
        let n = (horizontal / step).ceil().max(1.0) as usize;
        (1..n).any(|k| {
            let p = a.lerp(b, k as f64 / n as f64);
            t.contains(p.xy()) && p.z < t.interpolate(p.xy()) - EPS_M
        })
    }

    /// Convex footprint corners of hard blockers: the candidate turning
    /// points of dominant paths.
    pub fn hard_corners(&self) -> Vec<Point2> {
        let mut out = Vec::new();
        for o in self.obstacles.iter().filter(|o| o.hard_blocker) {
            out.extend(convex_vertices(&o.footprint).into_iter().map(|i| o.footprint[i]));
        }
        out
    }

    /// Hard-blocker footprint edges with their owning obstacle index.
    pub(crate) fn hard_walls(&self) -> impl Iterator<Item = (usize, Point2, Point2)> + '_ {
        self.obstacles
            .iter()
            .enumerate()
            .filter(|(_, o)| o.hard_blocker)
            .flat_map(|(i, o)| {
                let n = o.footprint.len();
                (0..n).map(move |k| (i, o.footprint[k], o.footprint[(k + 1) % n]))
            })
    }
}

// Evaluating segments in a fixed endpoint order makes every predicate
// exactly symmetric under endpoint exchange.
fn canonical(a: Point3, b: Point3) -> (Point3, Point3) {
    if b.lex_cmp(&a).is_lt() {
        (b, a)
    } else {
        (a, b)
    }
}

/// Parameter window in `[0, 1]` where `z(t) = za + (zb - za) t` lies in `(lo, hi)`.
fn z_window(za: f64, zb: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let dz = zb - za;
    if dz.abs() < 1e-15 {
        return (za > lo && za < hi).then_some((0.0, 1.0));
    }
    let ta = (lo - za) / dz;
    let tb = (hi - za) / dz;
    let (t0, t1) = if ta < tb { (ta, tb) } else { (tb, ta) };
    let (t0, t1) = (t0.max(0.0), t1.min(1.0));
    (t1 > t0).then_some((t0, t1))
}
