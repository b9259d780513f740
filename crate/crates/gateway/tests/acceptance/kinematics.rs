//! Forward kinematics against closed forms, Jacobians against finite
//! differences, IK round trips and the manipulability floor.

use cellreach::armkin::catalog::{parse_robot, Catalog};
use cellreach::armkin::{fk_frames, flange, jacobian, sample_ik, IkParams, JointConfig, RobotModel, W_MIN};
use cellreach::geom::Pose;
use nalgebra::{Isometry3, Matrix6, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const PLANAR_3R: &str = r#"
name = "planar_3r"
reach_radius = 1.5
link_radii = [0.04, 0.04, 0.04]
joint_limits = [[-3.0, 3.0], [-3.0, 3.0], [-3.0, 3.0]]
task_space = "planar"

[[joints]]
a = 0.7
alpha = 0.0
d = 0.0

[[joints]]
a = 0.5
alpha = 0.0
d = 0.0

[[joints]]
a = 0.3
alpha = 0.0
d = 0.0
"#;

fn random_q(m: &RobotModel, rng: &mut ChaCha8Rng) -> JointConfig {
    JointConfig(m.joint_limits.iter().map(|l| rng.random_range(l[0]..l[1])).collect())
}

/// Frame origins and final heading of a planar chain, summed link by link.
fn planar_closed_form(lengths: &[f64], q: &[f64]) -> (Vec<[f64; 2]>, f64) {
    let (mut x, mut y, mut th) = (0.0, 0.0, 0.0);
    let mut joints = Vec::new();
    for (l, qi) in lengths.iter().zip(q) {
        th += qi;
        x += l * th.cos();
        y += l * th.sin();
        joints.push([x, y]);
    }
    (joints, th)
}

fn fk_error(rng: &mut ChaCha8Rng) -> f64 {
    let models = [
        (Catalog::builtin().require("planar_2r").unwrap().clone(), vec![1.0, 1.0]),
        (parse_robot::<f64>(PLANAR_3R).unwrap(), vec![0.7, 0.5, 0.3]),
    ];
    let mut worst: f64 = 0.0;
    for (m, lengths) in &models {
        for _ in 0..200 {
            let q = random_q(m, rng);
            let (joints, th) = planar_closed_form(lengths, &q.0);
            let frames = fk_frames(m, &q).unwrap();
            // frames[0] is the mount; frames[i + 1] ends joint i's link
            for (f, j) in frames[1..].iter().zip(&joints) {
                let t = f.translation.vector;
                worst = worst.max((t.x - j[0]).abs()).max((t.y - j[1]).abs()).max(t.z.abs());
            }
            let tip = frames.last().unwrap();
            let heading = tip.rotation * Vector3::x();
            worst = worst
                .max((heading.x - th.cos()).abs())
                .max((heading.y - th.sin()).abs());
        }
    }
    worst
}

/// Central differences of position and of the rotation log-map.
fn fd_jacobian(m: &RobotModel, q: &JointConfig, h: f64) -> nalgebra::Matrix6xX<f64> {
    let n = q.dim();
    let mut j = nalgebra::Matrix6xX::zeros(n);
    for c in 0..n {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus.0[c] += h;
        minus.0[c] -= h;
        let (a, b): (Isometry3<f64>, Isometry3<f64>) = (flange(m, &plus).unwrap(), flange(m, &minus).unwrap());
        let dp = (a.translation.vector - b.translation.vector) / (2.0 * h);
        let dr = (a.rotation * b.rotation.inverse()).scaled_axis() / (2.0 * h);
        for r in 0..3 {
            j[(r, c)] = dp[r];
            j[(r + 3, c)] = dr[r];
        }
    }
    j
}

fn jacobian_error(rng: &mut ChaCha8Rng) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for name in ["small", "medium", "large"] {
        let m = Catalog::builtin().require(name).unwrap().clone();
        for _ in 0..100 {
            let q = random_q(&m, rng);
            let diff = jacobian(&m, &q).unwrap() - fd_jacobian(&m, &q, 1e-6);
            worst = worst.max(diff.amax());
            count += 1;
        }
    }
    (worst, count)
}

/// `sqrt(det(J Jᵀ))` of the full spatial Jacobian.
fn w_spatial(m: &RobotModel, q: &JointConfig) -> f64 {
    let j = jacobian(m, q).unwrap();
    let jjt: Matrix6<f64> = &j * j.transpose();
    jjt.determinant().max(0.0).sqrt()
}

struct IkStats {
    targets: usize,
    solved: usize,
    accepted: usize,
    worst_pos: f64,
    worst_rot: f64,
    min_w: f64,
    out_of_tol: usize,
}

fn ik_round_trip(rng: &mut ChaCha8Rng) -> IkStats {
    let m = Catalog::builtin().require("medium").unwrap().clone();
    let params = IkParams::default();
    let mut s = IkStats {
        targets: 0,
        solved: 0,
        accepted: 0,
        worst_pos: 0.0,
        worst_rot: 0.0,
        min_w: f64::INFINITY,
        out_of_tol: 0,
    };
    while s.targets < 200 {
        // reachable by construction, and away from singular postures
        let q = random_q(&m, rng);
        if w_spatial(&m, &q) < 10.0 * W_MIN {
            continue;
        }
        let goal = flange(&m, &q).unwrap();
        let target = Pose::from_isometry(&goal);
        s.targets += 1;
        let sols = sample_ik(&m, &target, 8, rng.random(), &params);
        if !sols.is_empty() {
            s.solved += 1;
        }
        for sol in &sols {
            s.accepted += 1;
            let f = flange(&m, sol).unwrap();
            let pos = (f.translation.vector - goal.translation.vector).norm();
            let rot = (goal.rotation * f.rotation.inverse()).angle();
            let w = w_spatial(&m, sol);
            s.worst_pos = s.worst_pos.max(pos);
            s.worst_rot = s.worst_rot.max(rot);
            s.min_w = s.min_w.min(w);
            if pos > 1e-3 || rot > 1e-2 || !m.within_limits(sol) {
                s.out_of_tol += 1;
            }
        }
    }
    s
}

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7002);
    let fk = fk_error(&mut rng);
    let (jac, configs) = jacobian_error(&mut rng);
    let ik = ik_round_trip(&mut rng);
    let rate = ik.solved as f64 / ik.targets as f64;
    let pass = fk <= 1e-9 && jac <= 1e-5 && rate >= 0.95 && ik.out_of_tol == 0 && ik.min_w >= W_MIN;
    Verdict::new(
        pass,
        format!(
            "FK max err {fk:.1e} (tol 1e-9); Jacobian max err {jac:.1e} over {configs} configs (tol 1e-5); \
             IK {}/{} solved = {:.1}% (need 95%), {} accepted, worst ({:.1e} m, {:.1e} rad), {} out of tolerance; \
             min manipulability {:.2e} (w_min {W_MIN:.0e})",
            ik.solved,
            ik.targets,
            100.0 * rate,
            ik.accepted,
            ik.worst_pos,
            ik.worst_rot,
            ik.out_of_tol,
            ik.min_w
        ),
    )
}
