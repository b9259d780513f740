//! Capsule queries on the occupancy map against dense sampling of the raw
//! cloud. The map may call a capsule blocked when the points miss it, but
//! never free when a point lies inside.

use cellreach::cloudkit::PointCloud;
use cellreach::voxmap::OccupancyMap;
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const CLOUDS: usize = 40;
const QUERIES_PER_CLOUD: usize = 60;

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

/// Samples the segment every `spacing` (endpoints included) and reports
/// whether any point lies within `radius` of a sample.
fn oracle_blocked(points: &[Point3<f64>], a: &Point3<f64>, b: &Point3<f64>, radius: f64, spacing: f64) -> bool {
    let n = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
    (0..=n).any(|i| {
        let s = a + (b - a) * (i as f64 / n as f64);
        points.iter().any(|p| (p - s).norm() <= radius)
    })
}

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7003);
    let (mut queries, mut both_blocked, mut both_free, mut one_sided, mut violations) = (0, 0, 0, 0, 0);
    for _ in 0..CLOUDS {
        let n = rng.random_range(50..600);
        let spread = rng.random_range(0.2..1.0);
        let points: Vec<Point3<f64>> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread * 0.3..spread * 0.3),
                )
            })
            .collect();
        let cloud = PointCloud::new(points.clone()).unwrap();
        let res = rng.random_range(0.01..0.08);
        let map = OccupancyMap::build(&cloud, res, 1).unwrap();
        for _ in 0..QUERIES_PER_CLOUD {
            // start near a cloud point so that both outcomes occur
            let a = points[rng.random_range(0..n)] + unit(&mut rng) * rng.random_range(0.0..0.2);
            let b = if rng.random_bool(0.1) {
                a
            } else {
                a + unit(&mut rng) * rng.random_range(0.0..0.5)
            };
            let radius = rng.random_range(0.0..0.08);
            let free = map.capsule_free(&a, &b, radius);
            let blocked = oracle_blocked(&points, &a, &b, radius, res / 10.0);
            queries += 1;
            match (free, blocked) {
                (true, true) => violations += 1,
                (true, false) => both_free += 1,
                (false, true) => both_blocked += 1,
                (false, false) => one_sided += 1,
            }
        }
    }
    let pass = violations == 0 && queries >= 1000 && both_blocked > 0 && both_free > 0;
    Verdict::new(
        pass,
        format!(
            "{queries} queries: {violations} map-free/oracle-blocked violations, \
             {one_sided} conservative disagreements, {both_blocked} agreed blocked, {both_free} agreed free"
        ),
    )
}
