use nalgebra::{DMatrix, DVector, Isometry3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{flange, fk_frames, jacobian_from_frames, manipulability_of, task_block};
use super::{JointConfig, RobotModel, TaskSpace, W_MIN};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::scalar::Real;

/// Damped least-squares settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct IkParams<T: Real = f64> {
    pub pos_tol: T,
    pub rot_tol: T,
    pub max_iters: usize,
    pub lambda: T,
    pub w_min: T,
}

impl<T: Real> Default for IkParams<T> {
    fn default() -> Self {
        Self {
            pos_tol: T::lit(1e-3),
            rot_tol: T::lit(1e-2),
            max_iters: 200,
            lambda: T::lit(0.1),
            w_min: T::lit(W_MIN),
        }
    }
}

impl<T: Real> IkParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.pos_tol > T::zero() && self.rot_tol > T::zero() && self.lambda >= T::zero() {
            Ok(())
        } else {
            Err(Error::invalid("IK tolerances must be positive"))
        }
    }

    pub fn cast<U: Real>(&self) -> IkParams<U> {
        IkParams {
            pos_tol: U::lit(self.pos_tol.as_f64()),
            rot_tol: U::lit(self.rot_tol.as_f64()),
            max_iters: self.max_iters,
            lambda: U::lit(self.lambda.as_f64()),
            w_min: U::lit(self.w_min.as_f64()),
        }
    }
}

/// Position and rotation error of `current` against `target`, as
/// `(target.p − current.p, axis·angle of target·current⁻¹)`.
fn error_parts<T: Real>(current: &Isometry3<T>, target: &Isometry3<T>) -> (Vector3<T>, Vector3<T>) {
    let dp = target.translation.vector - current.translation.vector;
    let dr = (target.rotation * current.rotation.inverse()).scaled_axis();
    (dp, dr)
}

/// `(position error m, rotation error rad)` of the flange at `q`. Planar
/// models ignore orientation.
pub fn pose_error<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>, target: &Pose<T>) -> Result<(T, T)> {
    let (dp, dr) = error_parts(&flange(model, q)?, &target.isometry());
    let rot = match model.task_space {
        TaskSpace::Spatial => dr.norm(),
        TaskSpace::Planar => T::zero(),
    };
    Ok((dp.norm(), rot))
}

fn clamp_norm<T: Real>(v: Vector3<T>, max: T) -> Vector3<T> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Damped least-squares IK from `seed`, clamping to limits every step.
pub fn ik<T: Real>(
    model: &RobotModel<T>,
    target: &Pose<T>,
    seed: &JointConfig<T>,
    params: &IkParams<T>,
) -> Result<JointConfig<T>> {
    model.check_dim(seed)?;
    params.validate()?;
    let goal = target.isometry();
    let rows = model.task_space.rows();
    let lambda2 = params.lambda * params.lambda;
    // per-step caps keep the linearization honest far from the goal
    let max_lin = model.reach_radius * T::lit(0.2);
    let max_ang = T::lit(0.5);
    let max_dq = T::lit(0.5);

    let mut q = seed.clone();
    model.clamp(&mut q);
    for _ in 0..=params.max_iters {
        let frames = fk_frames(model, &q)?;
        let tip = frames.last().expect("mount frame");
        let (dp, dr) = error_parts(tip, &goal);
        let rot_err = match model.task_space {
            TaskSpace::Spatial => dr.norm(),
            TaskSpace::Planar => T::zero(),
        };
        let full = jacobian_from_frames(&frames);
        let block = task_block(&full, model.task_space);
        if dp.norm() <= params.pos_tol && rot_err <= params.rot_tol {
            return if manipulability_of(&block) >= params.w_min {
                Ok(q)
            } else {
                Err(Error::NoSolution)
            };
        }
        let dp = clamp_norm(dp, max_lin);
        let dr = clamp_norm(dr, max_ang);
        let err6 = [dp.x, dp.y, dp.z, dr.x, dr.y, dr.z];
        let e = DVector::from_iterator(rows.len(), rows.iter().map(|&r| err6[r]));
        let jjt = &block * block.transpose() + DMatrix::identity(rows.len(), rows.len()) * lambda2;
        let Some(y) = jjt.cholesky().map(|c| c.solve(&e)) else {
            return Err(Error::NoSolution);
        };
        let mut dq = block.transpose() * y;
        let biggest = dq.amax();
        if biggest > max_dq {
            dq *= max_dq / biggest;
        }
        for (qi, d) in q.0.iter_mut().zip(dq.iter()) {
            *qi += *d;
        }
        model.clamp(&mut q);
    }
    Err(Error::NoSolution)
}

/// Distance (L2, radians) beyond which two IK solutions count as distinct.
pub const DEDUP_DIST: f64 = 0.05;

/// IK from `n_restarts` uniformly random in-limit seeds, keeping every
/// distinct success in discovery order.
pub fn sample_ik<T: Real>(
    model: &RobotModel<T>,
    target: &Pose<T>,
    n_restarts: usize,
    rng_seed: u64,
    params: &IkParams<T>,
) -> Vec<JointConfig<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dedup = T::lit(DEDUP_DIST);
    let mut out: Vec<JointConfig<T>> = Vec::new();
    for _ in 0..n_restarts.max(1) {
        let seed = JointConfig(
            model
                .joint_limits
                .iter()
                .map(|l| {
                    let (lo, hi) = (l[0].as_f64(), l[1].as_f64());
                    T::lit(rng.random_range(lo..hi))
                })
                .collect(),
        );
        if let Ok(q) = ik(model, target, &seed, params) {
            if out.iter().all(|o| o.dist_l2(&q) > dedup) {
                out.push(q);
            }
        }
    }
    out
}
