//! Brute-force oracles for the cloud toolbox, compared as exact point
//! sequences on randomized clouds.

use std::collections::HashMap;
use std::time::Instant;

use cellreach::cloudkit::{Cone, OrientedBox, PointCloud, DEFAULT_OUTLIER_ALPHA, DEFAULT_OUTLIER_K};
use cellreach::geom::Pose;
use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const CLOUDS: usize = 120;
const BUDGET_S: f64 = 30.0;

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

/// Uniform, clustered or lattice points, sometimes with duplicates and
/// colors.
fn random_cloud(rng: &mut ChaCha8Rng) -> PointCloud {
    let n = rng.random_range(40..400);
    let mut pts: Vec<Point3<f64>> = Vec::with_capacity(n);
    match rng.random_range(0..3) {
        0 => {
            for _ in 0..n {
                pts.push(Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ));
            }
        }
        1 => {
            let centers: Vec<Point3<f64>> = (0..rng.random_range(1..5))
                .map(|_| Point3::from(unit(rng) * rng.random_range(0.0..0.8)))
                .collect();
            for i in 0..n {
                if i % 17 == 0 {
                    pts.push(Point3::from(unit(rng) * rng.random_range(1.0..3.0)));
                } else {
                    let c = centers[i % centers.len()];
                    pts.push(c + unit(rng) * rng.random_range(0.0..0.15));
                }
            }
        }
        _ => {
            let step = rng.random_range(0.03..0.1);
            let side = (n as f64).cbrt().ceil() as usize;
            'fill: for i in 0..side {
                for j in 0..side {
                    for k in 0..side {
                        if pts.len() == n {
                            break 'fill;
                        }
                        pts.push(Point3::new(i as f64 * step, j as f64 * step, k as f64 * step));
                    }
                }
            }
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let p = pts[rng.random_range(0..pts.len())];
        pts.push(p);
    }
    if rng.random_bool(0.5) {
        let colors = (0..pts.len())
            .map(|_| [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()])
            .collect();
        PointCloud::with_colors(pts, colors).unwrap()
    } else {
        PointCloud::new(pts).unwrap()
    }
}

fn keep(cloud: &PointCloud, mask: impl Fn(&Point3<f64>) -> bool) -> PointCloud {
    let idx: Vec<usize> = (0..cloud.len()).filter(|&i| mask(&cloud.points[i])).collect();
    PointCloud {
        points: idx.iter().map(|&i| cloud.points[i]).collect(),
        colors: cloud.colors.as_ref().map(|c| idx.iter().map(|&i| c[i]).collect()),
    }
}

fn crop_oracle(cloud: &PointCloud, pose: &Pose, half: &Vector3<f64>) -> PointCloud {
    let r = pose.orientation.to_rotation_matrix();
    keep(cloud, |p| {
        let local = r.matrix().transpose() * (p - pose.position);
        (0..3).all(|i| local[i].abs() <= half[i])
    })
}

fn sphere_oracle(cloud: &PointCloud, c: &Point3<f64>, r: f64) -> PointCloud {
    keep(cloud, |p| {
        let d = ((p.x - c.x).powi(2) + (p.y - c.y).powi(2) + (p.z - c.z).powi(2)).sqrt();
        d > r
    })
}

fn cone_oracle(cloud: &PointCloud, apex: &Point3<f64>, dir: &Vector3<f64>, half: f64, range: f64) -> PointCloud {
    keep(cloud, |p| {
        let v = p - apex;
        if v == Vector3::zeros() {
            return false;
        }
        let along = v.dot(dir);
        let angle = (along / v.norm()).clamp(-1.0, 1.0).acos();
        !(along >= 0.0 && along <= range && angle <= half)
    })
}

fn downsample_oracle(cloud: &PointCloud, leaf: f64) -> PointCloud {
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = [(p.x / leaf).floor() as i64, (p.y / leaf).floor() as i64, (p.z / leaf).floor() as i64];
        cells.entry(key).or_default().push(i);
    }
    let mut keys: Vec<[i64; 3]> = cells.keys().copied().collect();
    keys.sort();
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for k in keys {
        let idx = &cells[&k];
        let n = idx.len() as f64;
        let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
        let mut sc = [0.0f64; 3];
        for &i in idx {
            let p = cloud.points[i];
            sx += p.x;
            sy += p.y;
            sz += p.z;
            if let Some(c) = &cloud.colors {
                for ch in 0..3 {
                    sc[ch] += c[i][ch] as f64;
                }
            }
        }
        points.push(Point3::new(sx / n, sy / n, sz / n));
        colors.push(sc.map(|v| (v / n).clamp(0.0, 1.0) as f32));
    }
    PointCloud {
        points,
        colors: cloud.colors.as_ref().map(|_| colors),
    }
}

/// Mean distance to the `k` nearest others by full sort, then the
/// population-statistics cut-off with the module's relative slack.
fn outlier_oracle(cloud: &PointCloud, k: usize, alpha: f64) -> PointCloud {
    let pts = &cloud.points;
    let d: Vec<f64> = (0..pts.len())
        .map(|i| {
            let mut sq: Vec<f64> = (0..pts.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let v = pts[i] - pts[j];
                    v.x * v.x + v.y * v.y + v.z * v.z
                })
                .collect();
            sq.sort_by(f64::total_cmp);
            sq[..k].iter().map(|s| s.sqrt()).sum::<f64>() / k as f64
        })
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let cut = mean + alpha * std + 1e-9 * mean;
    let idx: Vec<usize> = (0..pts.len()).filter(|&i| d[i] <= cut).collect();
    PointCloud {
        points: idx.iter().map(|&i| pts[i]).collect(),
        colors: cloud.colors.as_ref().map(|c| idx.iter().map(|&i| c[i]).collect()),
    }
}

pub fn run() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7001);
    let mut mismatches: Vec<String> = Vec::new();
    let mut removed = [0usize; 5];
    let note = |op: &str, i: usize, ok: bool, mismatches: &mut Vec<String>| {
        if !ok {
            mismatches.push(format!("{op}#{i}"));
        }
    };
    for i in 0..CLOUDS {
        let cloud = random_cloud(&mut rng);

        let pose = Pose::new(
            Point3::from(unit(&mut rng) * rng.random_range(0.0..0.5)),
            UnitQuaternion::from_scaled_axis(unit(&mut rng) * rng.random_range(0.0..3.1)),
        );
        let half = Vector3::new(
            rng.random_range(0.1..1.0),
            rng.random_range(0.1..1.0),
            rng.random_range(0.1..1.0),
        );
        let got = cloud.crop(&OrientedBox::new(pose, half).unwrap());
        removed[0] += cloud.len() - got.len();
        note("crop", i, got == crop_oracle(&cloud, &pose, &half), &mut mismatches);

        let c = cloud.points[rng.random_range(0..cloud.len())] + unit(&mut rng) * rng.random_range(0.0..0.2);
        let r = rng.random_range(0.05..0.8);
        let got = cloud.erase_sphere(&c, r).unwrap();
        removed[1] += cloud.len() - got.len();
        note("erase_sphere", i, got == sphere_oracle(&cloud, &c, r), &mut mismatches);

        let apex = if rng.random_bool(0.3) {
            cloud.points[rng.random_range(0..cloud.len())]
        } else {
            Point3::from(unit(&mut rng) * rng.random_range(0.5..1.5))
        };
        let dir = unit(&mut rng);
        let (ha, range) = (rng.random_range(0.1..1.2), rng.random_range(0.3..2.0));
        let got = cloud.erase_cone(&Cone::new(apex, dir, ha, range).unwrap());
        removed[2] += cloud.len() - got.len();
        note("erase_cone", i, got == cone_oracle(&cloud, &apex, &dir, ha, range), &mut mismatches);

        let leaf = rng.random_range(0.02..0.5);
        let got = cloud.downsample(leaf).unwrap();
        removed[3] += cloud.len() - got.len();
        note("downsample", i, got == downsample_oracle(&cloud, leaf), &mut mismatches);

        let k = DEFAULT_OUTLIER_K;
        if cloud.len() > k {
            let (got, n) = cloud.remove_outliers(k, DEFAULT_OUTLIER_ALPHA).unwrap();
            removed[4] += n;
            note("remove_outliers", i, got == outlier_oracle(&cloud, k, DEFAULT_OUTLIER_ALPHA), &mut mismatches);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    // Each operation must actually discard something somewhere, or the
    // comparison says little.
    let exercised = removed.iter().all(|&n| n > 0);
    Verdict::new(
        mismatches.is_empty() && secs < BUDGET_S && exercised,
        format!(
            "{CLOUDS} clouds x 5 ops, {} mismatches {:?}, removed per op {removed:?}, {secs:.2} s (budget {BUDGET_S} s)",
            mismatches.len(),
            &mismatches[..mismatches.len().min(5)]
        ),
    )
}
