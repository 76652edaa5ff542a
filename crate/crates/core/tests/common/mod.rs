#![allow(dead_code)]

use covplan_core::propagation::{dpm_pl, DominantPath, PathLossParams};
use covplan_core::{Material, Obstacle, ObstacleKind, Point2, Point3, Scene};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn materials() -> Vec<Material> {
    vec![
        Material::new("concrete", 5.3, 8.0).unwrap(),
        Material::new("foliage", 1.5, 2.0).unwrap(),
    ]
}

/// Convex polygon with `k` vertices on an ellipse, counter-clockwise.
pub fn convex_polygon(rng: &mut ChaCha8Rng, center: Point2, rx: f64, ry: f64, k: usize) -> Vec<Point2> {
    let step = std::f64::consts::TAU / k as f64;
    let phase = rng.gen_range(0.0..step);
    (0..k)
        .map(|i| {
            let a = phase + i as f64 * step + rng.gen_range(-0.3..0.3) * step;
            Point2::new(center.x + rx * a.cos(), center.y + ry * a.sin())
        })
        .collect()
}

pub struct SceneSpec {
    pub max_obstacles: usize,
    /// Upper bound on the total number of hard-blocker vertices.
    pub max_hard_vertices: usize,
    pub half_extent: f64,
    pub hard_probability: f64,
    pub allow_raised_base: bool,
    pub min_height_m: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            max_obstacles: 5,
            max_hard_vertices: usize::MAX,
            half_extent: 40.0,
            hard_probability: 0.6,
            allow_raised_base: true,
            min_height_m: 1.0,
        }
    }
}

/// Random non-overlapping convex obstacles on flat ground.
pub fn random_scene(rng: &mut ChaCha8Rng, spec: &SceneSpec) -> Scene {
    let n = rng.gen_range(1..=spec.max_obstacles);
    let mut placed: Vec<(Point2, f64)> = Vec::new();
    let mut obstacles = Vec::new();
    let mut hard_vertices = 0;
    let mut attempts = 0;
    while obstacles.len() < n && attempts < 200 {
        attempts += 1;
        let r = rng.gen_range(3.0..12.0);
        let c = Point2::new(
            rng.gen_range(-spec.half_extent..spec.half_extent),
            rng.gen_range(-spec.half_extent..spec.half_extent),
        );
        if placed.iter().any(|(p, pr)| p.distance(c) < r + pr + 1.0) {
            continue;
        }
        let hard = rng.gen_bool(spec.hard_probability);
        let k = rng.gen_range(3..=6);
        if hard && hard_vertices + k > spec.max_hard_vertices {
            continue;
        }
        let ry = r * rng.gen_range(0.4..1.0);
        let footprint = convex_polygon(rng, c, r, ry, k);
        let base = if spec.allow_raised_base && rng.gen_bool(0.2) {
            rng.gen_range(0.5..4.0)
        } else {
            0.0
        };
        let top = base + rng.gen_range(spec.min_height_m..20.0);
        let (kind, material) = if hard {
            (ObstacleKind::Building, "concrete")
        } else {
            (ObstacleKind::Vegetation, "foliage")
        };
        if hard {
            hard_vertices += k;
        }
        placed.push((c, r));
        obstacles.push(Obstacle::new(footprint, base, top, material, kind).unwrap());
    }
    Scene::new(None, materials(), obstacles).unwrap()
}

pub fn random_point3(rng: &mut ChaCha8Rng, half_extent: f64, z: std::ops::Range<f64>) -> Point3 {
    Point3::new(
        rng.gen_range(-half_extent..half_extent),
        rng.gen_range(-half_extent..half_extent),
        rng.gen_range(z),
    )
}

/// Blocking by dense sampling: any sample strictly inside an obstacle volume.
pub fn sampled_blocked(scene: &Scene, a: Point3, b: Point3, step_m: f64, hard_only: bool) -> bool {
    let n = (a.distance(b) / step_m).ceil().max(1.0) as usize;
    (1..n).any(|k| {
        let p = a.lerp(b, k as f64 / n as f64);
        (0..scene.obstacles().len())
            .any(|i| (!hard_only || scene.obstacles()[i].hard_blocker) && scene.obstacle_contains(i, p))
    })
}

/// Convex footprint corners of hard blockers on flat ground, computed from
/// the polygon orientation.
pub fn convex_hard_corners(scene: &Scene, z: f64) -> Vec<Point3> {
    let mut out = Vec::new();
    for o in scene.obstacles().iter().filter(|o| o.hard_blocker) {
        let f = &o.footprint;
        let n = f.len();
        let area2: f64 = (0..n).map(|i| f[i].x * f[(i + 1) % n].y - f[(i + 1) % n].x * f[i].y).sum();
        for i in 0..n {
            let (p, c, q) = (f[(i + n - 1) % n], f[i], f[(i + 1) % n]);
            let cross = (c.x - p.x) * (q.y - c.y) - (c.y - p.y) * (q.x - c.x);
            if cross * area2.signum() > 0.0 {
                out.push(c.lift(z));
            }
        }
    }
    out
}

/// Minimum loss over every simple path tx → corners → rx whose segments
/// clear all hard blockers. `None` when no such path exists.
pub fn exhaustive_min_loss(scene: &Scene, tx: Point3, rx: Point3, params: &PathLossParams, f: f64) -> Option<f64> {
    let class = scene.classify_visibility(tx, rx);
    let clear = |a: Point3, b: Point3| !scene.segment_blocked_3d(a, b, true);
    let loss = |wp: &[Point3]| dpm_pl(&DominantPath::through(wp.to_vec(), class), params, f).unwrap().total_db;
    if clear(tx, rx) {
        return Some(loss(&[tx, rx]));
    }
    let corners = convex_hard_corners(scene, rx.z);
    let mut best: Option<f64> = None;
    let mut stack = vec![tx];
    let mut used = vec![false; corners.len()];
    fn dfs(
        corners: &[Point3],
        used: &mut [bool],
        stack: &mut Vec<Point3>,
        rx: Point3,
        clear: &dyn Fn(Point3, Point3) -> bool,
        loss: &dyn Fn(&[Point3]) -> f64,
        best: &mut Option<f64>,
    ) {
        let last = *stack.last().unwrap();
        if stack.len() > 1 && clear(last, rx) {
            stack.push(rx);
            let l = loss(stack);
            stack.pop();
            if best.map_or(true, |b| l < b) {
                *best = Some(l);
            }
        }
        for i in 0..corners.len() {
            if used[i] || last.distance(corners[i]) == 0.0 || !clear(last, corners[i]) {
                continue;
            }
            used[i] = true;
            stack.push(corners[i]);
            dfs(corners, used, stack, rx, clear, loss, best);
            stack.pop();
            used[i] = false;
        }
    }
    dfs(&corners, &mut used, &mut stack, rx, &clear, &loss, &mut best);
    best
}

/// One or two hard blockers straddling the x axis with at most 6 corners in
/// total, plus an optional soft obstacle.
pub fn oracle_scene(rng: &mut ChaCha8Rng) -> Scene {
    let mut obstacles = Vec::new();
    let two = rng.gen_bool(0.4);
    let sizes = if two { vec![3, 3] } else { vec![rng.gen_range(3..=6)] };
    for (i, k) in sizes.into_iter().enumerate() {
        let cx = if two { [-15.0, 15.0][i] + rng.gen_range(-5.0..5.0) } else { rng.gen_range(-15.0..15.0) };
        let c = Point2::new(cx, rng.gen_range(-6.0..6.0));
        let r = rng.gen_range(5.0..9.0);
        let ry = r * rng.gen_range(0.5..1.0);
        let footprint = convex_polygon(rng, c, r, ry, k);
        let top = rng.gen_range(3.0..25.0);
        obstacles.push(Obstacle::new(footprint, 0.0, top, "concrete", ObstacleKind::Building).unwrap());
    }
    if rng.gen_bool(0.3) {
        let c = Point2::new(rng.gen_range(-10.0..10.0), rng.gen_range(18.0..24.0));
        let footprint = convex_polygon(rng, c, 4.0, 3.0, 4);
        obstacles.push(Obstacle::new(footprint, 0.0, 8.0, "foliage", ObstacleKind::Vegetation).unwrap());
    }
    Scene::new(None, materials(), obstacles).unwrap()
}

/// Transmitter/receiver pair on opposite sides of the oracle scene area.
pub fn oracle_endpoints(rng: &mut ChaCha8Rng) -> (Point3, Point3) {
    let tx = Point3::new(rng.gen_range(-60.0..-40.0), rng.gen_range(-15.0..15.0), rng.gen_range(1.5..10.0));
    let rx = Point3::new(rng.gen_range(40.0..60.0), rng.gen_range(-15.0..15.0), 1.5);
    (tx, rx)
}
