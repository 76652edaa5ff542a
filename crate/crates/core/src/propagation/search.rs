//! Dominant path search over a corner visibility graph.
//!
//! Nodes are the transmitter, the receiver and the convex corners of every
//! hard-blocker footprint, lifted to the receiver's height above ground.
//! Two nodes are connected when the 3D segment between them does not enter
//! a hard-blocker volume. The path cost is the distance term of the path
//! loss (monotone in total length) plus the interaction losses of its turns,
//! so the optimum lies on the Pareto front of (length, turn loss). A
//! label-setting search keeps that front per (node, predecessor) state and
//! prunes with a straight-line lower bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{turn_angle_deg, Point2, Point3};
use crate::scene::{Blockers, Scene, VisibilityClass};

use super::dpm::{dpm_pl, waveguiding_db, DominantPath};
use super::params::PathLossParams;

/// Relative cost tolerance under which two paths count as tied.
const TIE_DB: f64 = 1e-9;

/// Corner graph for one scene and one receiver height above ground.
/// Corner-to-corner visibility is computed once and reused for every
/// transmitter/receiver pair.
#[derive(Debug, Clone)]
pub struct CornerGraph {
    corners: Vec<Point3>,
    adjacency: Vec<Vec<usize>>,
}

impl CornerGraph {
    pub fn new(scene: &Scene, height_above_ground_m: f64) -> Self {
        let corners: Vec<Point3> = scene
            .hard_corners()
            .into_iter()
            .map(|c| c.lift(scene.ground_clamped(c) + height_above_ground_m))
            .collect();
        let n = corners.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if corners[i].distance(corners[j]) > 0.0 && !hard_blocked(scene, corners[i], corners[j]) {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        Self { corners, adjacency }
    }

    pub fn corners(&self) -> &[Point3] {
        &self.corners
    }
}

pub(crate) fn hard_blocked(scene: &Scene, a: Point3, b: Point3) -> bool {
    let (a, b) = if b.lex_cmp(&a).is_lt() { (b, a) } else { (a, b) };
    scene.obstacles_block(a, b, Blockers::HardOnly)
}

/// Minimum-loss path from `tx` to `rx`. Straight segments that clear every
/// hard blocker are returned directly; otherwise the corner graph is searched.
pub fn find_dominant_path(
    scene: &Scene,
    tx: Point3,
    rx: Point3,
    params: &PathLossParams,
    frequency_hz: f64,
) -> Result<DominantPath> {
    let height = rx.z - scene.ground_clamped(rx.xy());
    let graph = CornerGraph::new(scene, height);
    find_dominant_path_in(&graph, scene, tx, rx, params, frequency_hz)
}

/// As [`find_dominant_path`] with a prebuilt corner graph.
pub fn find_dominant_path_in(
    graph: &CornerGraph,
    scene: &Scene,
    tx: Point3,
    rx: Point3,
    params: &PathLossParams,
    frequency_hz: f64,
) -> Result<DominantPath> {
    if tx.distance(rx) <= 0.0 {
        return Err(Error::domain("transmitter and receiver coincide"));
    }
    let visibility = scene.classify_visibility(tx, rx);
    let mut path = if !hard_blocked(scene, tx, rx) {
        DominantPath::straight(tx, rx, visibility)
    } else {
        search(graph, scene, tx, rx, visibility, params, frequency_hz)?
    };
    path.waveguiding_db = waveguiding_db(scene, &path, params);
    Ok(path)
}

#[derive(Debug, Clone, Copy)]
struct Label {
    node: usize,
    parent: Option<usize>,
    length: f64,
    turn_loss: f64,
    alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Queued {
    bound: f64,
    label: usize,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on the lower bound, then on insertion order.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.label.cmp(&self.label))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const TX: usize = 0;
const RX: usize = 1;

fn search(
    graph: &CornerGraph,
    scene: &Scene,
    tx: Point3,
    rx: Point3,
    visibility: VisibilityClass,
    params: &PathLossParams,
    frequency_hz: f64,
) -> Result<DominantPath> {
    // Node 0 is tx, node 1 is rx, node k + 2 is corner k.
    let n_corners = graph.corners.len();
    let point = |node: usize| match node {
        TX => tx,
        RX => rx,
        k => graph.corners[k - 2],
    };
    let visible = |a: Point3, b: Point3| a.distance(b) > 0.0 && !hard_blocked(scene, a, b);
    let tx_links: Vec<bool> = graph.corners.iter().map(|&c| visible(tx, c)).collect();
    let rx_links: Vec<bool> = graph.corners.iter().map(|&c| visible(c, rx)).collect();
    if !tx_links.iter().any(|&v| v) || !rx_links.iter().any(|&v| v) {
        return Err(Error::NoPathFound);
    }

    let neighbours = |node: usize| -> Vec<usize> {
        match node {
            TX => (0..n_corners).filter(|&k| tx_links[k]).map(|k| k + 2).collect(),
            RX => Vec::new(),
            k => {
                let mut out: Vec<usize> = graph.adjacency[k - 2].iter().map(|&j| j + 2).collect();
                if rx_links[k - 2] {
                    out.push(RX);
                }
                out
            }
        }
    };

    // Terms of the path loss that do not depend on the route.
    let fixed_db = super::frequency_term_db(frequency_hz)? + params.diverse_losses_db;
    let bound = |length: f64, turn_loss: f64, node: usize| {
        fixed_db + params.distance_term_db(visibility, length + point(node).distance(rx)) + turn_loss
    };

    let mut labels: Vec<Label> = vec![Label {
        node: TX,
        parent: None,
        length: 0.0,
        turn_loss: 0.0,
        alive: true,
    }];
    // Pareto fronts keyed by (node, predecessor node).
    let n_nodes = n_corners + 2;
    let mut fronts: Vec<Vec<usize>> = vec![Vec::new(); n_nodes * n_nodes];
    let mut heap = BinaryHeap::new();
    heap.push(Queued {
        bound: bound(0.0, 0.0, TX),
        label: 0,
    });

    let mut best: Option<(f64, Vec<Point3>)> = None;

    while let Some(Queued { bound: lb, label }) = heap.pop() {
        if let Some((cost, _)) = &best {
            if lb > cost + TIE_DB * cost.abs().max(1.0) {
                break;
            }
        }
        let current = labels[label];
        if !current.alive {
            continue;
        }
        if current.node == RX {
            let waypoints = reconstruct(&labels, label, &point);
            let candidate = DominantPath::through(waypoints, visibility);
            let cost = dpm_pl(&candidate, params, frequency_hz)?.total_db;
            let replace = match &best {
                None => true,
                Some((best_cost, best_wp)) => {
                    let tol = TIE_DB * best_cost.abs().max(1.0);
                    cost < best_cost - tol
                        || ((cost - best_cost).abs() <= tol && lex_less(&candidate.waypoints, best_wp))
                }
            };
            if replace {
                best = Some((cost, candidate.waypoints));
            }
            continue;
        }

        let here = point(current.node);
        let prev = current.parent.map(|p| labels[p].node);
        for next in neighbours(current.node) {
            if Some(next) == prev || on_path(&labels, label, next) {
                continue;
            }
            let there = point(next);
            let length = current.length + here.distance(there);
            let turn = match current.parent {
                Some(p) => {
                    let before = point(labels[p].node);
                    params
                        .interaction_loss
                        .loss_db(turn_angle_deg(sub(here.xy(), before.xy()), sub(there.xy(), here.xy())))
                }
                None => 0.0,
            };
            let turn_loss = current.turn_loss + turn;
            let lb = bound(length, turn_loss, next);
            if let Some((cost, _)) = &best {
                if lb > cost + TIE_DB * cost.abs().max(1.0) {
                    continue;
                }
            }

            let key = next * n_nodes + current.node;
            let dominated = fronts[key].iter().any(|&o| {
                let o = &labels[o];
                o.alive
                    && o.length <= length
                    && o.turn_loss <= turn_loss
                    && (o.length < length || o.turn_loss < turn_loss)
            });
            if dominated {
                continue;
            }
            for &o in &fronts[key] {
                let other = &mut labels[o];
                if other.alive
                    && length <= other.length
                    && turn_loss <= other.turn_loss
                    && (length < other.length || turn_loss < other.turn_loss)
                {
                    other.alive = false;
                }
            }
            let id = labels.len();
            labels.push(Label {
                node: next,
                parent: Some(label),
                length,
                turn_loss,
                alive: true,
            });
            fronts[key].retain(|&o| labels[o].alive);
            fronts[key].push(id);
            heap.push(Queued { bound: lb, label: id });
        }
    }

    match best {
        Some((_, waypoints)) => Ok(DominantPath::through(waypoints, visibility)),
        None => Err(Error::NoPathFound),
    }
}

fn sub(a: Point2, b: Point2) -> Point2 {
    Point2::new(a.x - b.x, a.y - b.y)
}

fn on_path(labels: &[Label], mut label: usize, node: usize) -> bool {
    loop {
        if labels[label].node == node {
            return true;
        }
        match labels[label].parent {
            Some(p) => label = p,
            None => return false,
        }
    }
}

fn reconstruct(labels: &[Label], mut label: usize, point: &impl Fn(usize) -> Point3) -> Vec<Point3> {
    let mut out = vec![point(labels[label].node)];
    while let Some(p) = labels[label].parent {
        out.push(point(labels[p].node));
        label = p;
    }
    out.reverse();
    out
}

/// Lexicographic order on the first differing waypoint.
pub fn lex_less(a: &[Point3], b: &[Point3]) -> bool {
    for (pa, pb) in a.iter().zip(b) {
        match pa.lex_cmp(pb) {
            Ordering::Equal => continue,
            ord => return ord.is_lt(),
        }
    }
    a.len() < b.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Material, Obstacle, ObstacleKind};

    fn building_scene() -> Scene {
        let b = Obstacle::rectangle(
            Point2::new(40.0, -10.0),
            Point2::new(60.0, 10.0),
            20.0,
            "concrete",
            ObstacleKind::Building,
        )
        .unwrap();
        Scene::new(None, vec![Material::new("concrete", 5.0, 8.0).unwrap()], vec![b]).unwrap()
    }

    #[test]
    fn empty_scene_is_straight() {
        let tx = Point3::new(0.0, 0.0, 4.0);
        let rx = Point3::new(100.0, 20.0, 1.5);
        let p = find_dominant_path(&Scene::empty(), tx, rx, &PathLossParams::default(), 5.9e9).unwrap();
        assert_eq!(p.waypoints, vec![tx, rx]);
        assert!(p.interactions.is_empty());
        assert_eq!(p.length_m, tx.distance(rx));
        assert_eq!(p.visibility, VisibilityClass::Los);
    }

    #[test]
    fn detours_around_building() {
        let s = building_scene();
        let tx = Point3::new(0.0, 0.0, 4.0);
        let rx = Point3::new(100.0, 0.0, 1.5);
        let p = find_dominant_path(&s, tx, rx, &PathLossParams::default(), 5.9e9).unwrap();
        assert_eq!(p.visibility, VisibilityClass::Nlos);
        assert_eq!(p.interactions.len(), 2);
        assert!(p.length_m > tx.distance(rx));
        // Symmetric scene: the tie goes to the lexicographically smaller
        // first corner, i.e. the southern (y = -10) detour.
        assert_eq!(p.waypoints[1].y, -10.0);
    }

    #[test]
    fn enclosed_receiver_has_no_path() {
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
        let s = Scene::new(None, vec![m], walls).unwrap();
        let r = find_dominant_path(
            &s,
            Point3::new(50.0, 0.0, 4.0),
            Point3::new(0.0, 0.0, 1.5),
            &PathLossParams::default(),
            5.9e9,
        );
        assert!(matches!(r, Err(Error::NoPathFound)));
    }

    #[test]
    fn lexicographic_order() {
        let a = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, -1.0, 0.0)];
        let b = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 0.0)];
        assert!(lex_less(&a, &b));
        assert!(!lex_less(&b, &a));
        assert!(!lex_less(&a, &a));
    }
}
