//! Planner soundness and completeness on the planar 2R arm among random
//! voxel blobs, judged by grid searches over joint space.
//!
//! Both grids use the same cell size `h` and a Lipschitz bound on how far
//! the arm moves inside a cell (1.5 h for unit links), so their verdicts
//! are proofs rather than samples:
//! * a cell is *possibly free* when its center clears the obstacles by
//!   more than -1.5 h; if two configurations are not 8-connected through
//!   possibly free cells, no continuous valid path joins them;
//! * a cell is *surely free* when its center clears by more than 1.5 h and
//!   stays off the singular postures; 4-connected surely free cells are
//!   joined by a continuous valid path.

use std::collections::VecDeque;

use cellreach::armkin::catalog::Catalog;
use cellreach::armkin::{JointConfig, RobotModel, W_MIN};
use cellreach::colcheck::ValidityChecker;
use cellreach::pathfind::{plan, smooth, JointPath, PlannerParams};
use cellreach::voxmap::{OccupancyMap, VoxelKey};
use cellreach::Error;
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const RES: f64 = 0.05;
const H: f64 = 0.04;
const DISCONNECTED: usize = 50;
const CONNECTED: usize = 15;
const SEEDS: u64 = 20;
const ITERS: usize = 20_000;
const PI: f64 = std::f64::consts::PI;

struct World {
    map: OccupancyMap,
    centers: Vec<Point3<f64>>,
    reach: f64,
    exclude: f64,
}

fn dist_to_segment(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let t = if ab.norm_squared() == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

impl World {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut keys: Vec<VoxelKey> = Vec::new();
        for _ in 0..rng.random_range(2..7) {
            let rho = rng.random_range(0.35..1.9);
            let phi = rng.random_range(-PI..PI);
            let r = rng.random_range(0.05..0.25);
            let (cx, cy) = (rho * phi.cos(), rho * phi.sin());
            let span = (r / RES).ceil() as i64 + 1;
            let (i0, j0) = ((cx / RES).floor() as i64, (cy / RES).floor() as i64);
            for i in i0 - span..=i0 + span {
                for j in j0 - span..=j0 + span {
                    let (x, y) = ((i as f64 + 0.5) * RES, (j as f64 + 0.5) * RES);
                    if (x - cx).hypot(y - cy) <= r {
                        keys.push([i, j, -1]);
                        keys.push([i, j, 0]);
                    }
                }
            }
        }
        keys.sort();
        keys.dedup();
        let centers = keys
            .iter()
            .map(|k| Point3::new((k[0] as f64 + 0.5) * RES, (k[1] as f64 + 0.5) * RES, (k[2] as f64 + 0.5) * RES))
            .collect();
        let map = OccupancyMap::from_keys(RES, Point3::origin(), keys);
        Self {
            map,
            centers,
            reach: 0.05 + RES * 3f64.sqrt() / 2.0,
            exclude: 0.05 + RES,
        }
    }

    /// Smallest obstacle distance of either link minus the capsule reach;
    /// positive means clear.
    fn margin(&self, q: &[f64]) -> f64 {
        let p1 = Point3::new(q[0].cos(), q[0].sin(), 0.0);
        let p2 = p1 + nalgebra::Vector3::new((q[0] + q[1]).cos(), (q[0] + q[1]).sin(), 0.0);
        let o = Point3::origin();
        self.centers
            .iter()
            .filter(|c| c.coords.norm() > self.exclude)
            .map(|c| dist_to_segment(c, &o, &p1).min(dist_to_segment(c, &p1, &p2)))
            .fold(f64::INFINITY, f64::min)
            - self.reach
    }

    fn valid(&self, q: &[f64]) -> bool {
        q.iter().all(|v| v.abs() <= PI) && q[1].sin().abs() >= W_MIN && self.margin(q) > 0.0
    }
}

/// Cell `i` covers `[-π + i h, -π + (i + 1) h]`; the last cell overhangs
/// the limit so the grid covers all of joint space.
fn cells() -> usize {
    (2.0 * PI / H).ceil() as usize
}

fn center(i: usize) -> f64 {
    -PI + (i as f64 + 0.5) * H
}

fn label(n: usize, free: &[bool], neighbours: &[(i64, i64)]) -> Vec<Option<usize>> {
    let mut out = vec![None; n * n];
    let mut next = 0;
    for s in 0..n * n {
        if !free[s] || out[s].is_some() {
            continue;
        }
        out[s] = Some(next);
        let mut queue = VecDeque::from([s]);
        while let Some(c) = queue.pop_front() {
            let (i, j) = ((c / n) as i64, (c % n) as i64);
            for (di, dj) in neighbours {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                    continue;
                }
                let d = a as usize * n + b as usize;
                if free[d] && out[d].is_none() {
                    out[d] = Some(next);
                    queue.push_back(d);
                }
            }
        }
        next += 1;
    }
    out
}

struct Grids {
    n: usize,
    possible: Vec<Option<usize>>,
    sure: Vec<Option<usize>>,
}

fn grids(world: &World) -> Grids {
    let n = cells();
    let mut possibly = vec![false; n * n];
    let mut surely = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let q = [center(i), center(j)];
            let m = world.margin(&q);
            possibly[i * n + j] = m > -1.5 * H;
            let inside = q.iter().all(|v| v.abs() + H / 2.0 <= PI);
            surely[i * n + j] = inside && m > 1.5 * H && q[1].sin().abs() > W_MIN + H / 2.0;
        }
    }
    let eight: Vec<(i64, i64)> = (-1..=1)
        .flat_map(|a| (-1..=1).map(move |b| (a, b)))
        .filter(|&d| d != (0, 0))
        .collect();
    Grids {
        n,
        possible: label(n, &possibly, &eight),
        sure: label(n, &surely, &[(1, 0), (-1, 0), (0, 1), (0, -1)]),
    }
}

/// Independent edge check at `step`: `2^k` equal subdivisions for the
/// smallest `k` keeping every joint change within `step`. Nested sampling
/// is what makes a finer step only ever stricter.
fn revalidates(world: &World, path: &JointPath, step: f64) -> bool {
    path.waypoints.windows(2).all(|w| {
        let mut n = 1usize;
        while w[0].dist_inf(&w[1]) / n as f64 > step {
            n *= 2;
        }
        (0..=n).all(|k| world.valid(&w[0].lerp(&w[1], k as f64 / n as f64).0))
    })
}

/// Uniform resampling, which is not nested in the planner's samples and so
/// can land on a graze between them. Reported, not gated on.
fn uniform_clean(world: &World, path: &JointPath, step: f64) -> bool {
    path.waypoints.windows(2).all(|w| {
        let n = (w[0].dist_inf(&w[1]) / step).ceil().max(1.0) as usize;
        (0..=n).all(|k| world.valid(&w[0].lerp(&w[1], k as f64 / n as f64).0))
    })
}

struct Instance {
    world: World,
    start: JointConfig,
    goal: JointConfig,
}

fn instances(rng: &mut ChaCha8Rng, model: &RobotModel, params: &PlannerParams) -> (Vec<Instance>, Vec<Instance>) {
    let (mut apart, mut joined) = (Vec::new(), Vec::new());
    while apart.len() < DISCONNECTED || joined.len() < CONNECTED {
        let world = World::random(rng);
        let g = grids(&world);
        let sure: Vec<usize> = (0..g.n * g.n).filter(|&c| g.sure[c].is_some()).collect();
        if sure.len() < 2 {
            continue;
        }
        // one instance per world keeps the obstacle sets varied
        let cfg = |c: usize| JointConfig(vec![center(c / g.n), center(c % g.n)]);
        let checker = ValidityChecker::new(model, &world.map);
        let mut pick = None;
        for _ in 0..200 {
            let (a, b) = (sure[rng.random_range(0..sure.len())], sure[rng.random_range(0..sure.len())]);
            if g.possible[a] != g.possible[b] && apart.len() < DISCONNECTED {
                pick = Some((a, b, true));
                break;
            }
            if g.sure[a] == g.sure[b]
                && joined.len() < CONNECTED
                && !checker.edge_valid(&cfg(a), &cfg(b), params.edge_step)
            {
                pick = Some((a, b, false));
                break;
            }
        }
        drop(checker);
        if let Some((a, b, disconnected)) = pick {
            let inst = Instance {
                start: cfg(a),
                goal: cfg(b),
                world,
            };
            if disconnected {
                apart.push(inst);
            } else {
                joined.push(inst);
            }
        }
    }
    (apart, joined)
}

pub fn run() -> Verdict {
    let model = Catalog::builtin().require("planar_2r").unwrap().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7004);
    let base = PlannerParams {
        max_iters: ITERS,
        timeout: 600.0,
        ..PlannerParams::default()
    };
    let (apart, joined) = instances(&mut rng, &model, &base);
    let half = base.edge_step / 2.0;

    let mut unsound = 0;
    let mut invalid_endpoints = 0;
    let mut returned = 0;
    let mut revalidation_failures = 0;
    let mut uniform_grazes = 0;
    for (k, inst) in apart.iter().enumerate() {
        let checker = ValidityChecker::new(&model, &inst.world.map);
        if !inst.world.valid(&inst.start.0) || !inst.world.valid(&inst.goal.0) {
            invalid_endpoints += 1;
        }
        let params = PlannerParams {
            rng_seed: k as u64,
            ..base
        };
        match plan(&checker, &inst.start, std::slice::from_ref(&inst.goal), &params, None) {
            Ok(_) => unsound += 1,
            Err(Error::NoPath) => {}
            Err(_) => invalid_endpoints += 1,
        }
    }

    let (mut runs, mut found) = (0, 0);
    for inst in &joined {
        let checker = ValidityChecker::new(&model, &inst.world.map);
        for seed in 0..SEEDS {
            let params = PlannerParams {
                rng_seed: seed,
                ..base
            };
            runs += 1;
            if let Ok(raw) = plan(&checker, &inst.start, std::slice::from_ref(&inst.goal), &params, None) {
                found += 1;
                let smoothed = smooth(&checker, &raw, &params);
                for p in [&raw, &smoothed] {
                    returned += 1;
                    let ends = p.start() == &inst.start && p.end() == &inst.goal;
                    if !ends || !p.is_valid(&checker, half) || !revalidates(&inst.world, p, half) {
                        revalidation_failures += 1;
                    }
                    if !uniform_clean(&inst.world, p, half) {
                        uniform_grazes += 1;
                    }
                }
            }
        }
    }
    let rate = found as f64 / runs as f64;
    let pass = unsound == 0 && invalid_endpoints == 0 && rate >= 0.95 && revalidation_failures == 0;
    Verdict::new(
        pass,
        format!(
            "soundness: {unsound} paths on {} proven-disconnected instances ({invalid_endpoints} bad endpoints); \
             completeness: {found}/{runs} = {:.1}% on {} connected instances x {SEEDS} seeds at {ITERS} iterations (need 95%); \
             revalidation at edge_step/2: {revalidation_failures} failures over {returned} raw and smoothed paths \
             (uniform resampling, not gated: {uniform_grazes} paths graze between samples)",
            apart.len(),
            100.0 * rate,
            joined.len()
        ),
    )
}
