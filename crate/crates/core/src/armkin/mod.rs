//! Serial-arm kinematics over standard Denavit–Hartenberg rows.
//!
//! Joint `i` contributes `Rz(q_i + theta_offset) · Tz(d) · Tx(a) · Rx(alpha)`.
//! Frames are indexed so that `frames[0]` is the base mount and `frames[n]`
//! is the flange; joint `i` rotates about the `z` axis of `frames[i]`.

pub mod catalog;
mod ik;

use nalgebra::{
    DMatrix, Isometry3, Matrix6xX, Point3, Translation3, UnitQuaternion, Vector3,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Capsule, Pose};
use crate::scalar::Real;

pub use ik::{ik, pose_error, sample_ik, IkParams};

/// Manipulability floor shared by IK acceptance and configuration validity.
pub const W_MIN: f64 = 1e-4;

/// One standard DH row for a revolute joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DhRow<T: Real = f64> {
    pub a: T,
    pub alpha: T,
    pub d: T,
    #[serde(default)]
    pub theta_offset: T,
}

impl<T: Real> DhRow<T> {
    pub fn new(a: T, alpha: T, d: T, theta_offset: T) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
        }
    }

    pub fn transform(&self, q: T) -> Isometry3<T> {
        let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), q + self.theta_offset);
        let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha);
        let t = Vector3::new(self.a, T::zero(), self.d);
        Isometry3::from_parts(Translation3::from(rz * t), rz * rx)
    }
}

/// Which rows of the geometric Jacobian define the task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSpace {
    /// Full 6-row twist (position and orientation).
    #[default]
    Spatial,
    /// In-plane position only (`x`, `y` rows); for planar test arms.
    Planar,
}

impl TaskSpace {
    pub fn rows(self) -> &'static [usize] {
        match self {
            TaskSpace::Spatial => &[0, 1, 2, 3, 4, 5],
            TaskSpace::Planar => &[0, 1],
        }
    }
}

/// Joint angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct JointConfig<T: Real = f64>(pub Vec<T>);

impl<T: Real> JointConfig<T> {
    pub fn new(q: Vec<T>) -> Self {
        Self(q)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Largest absolute per-joint difference.
    pub fn dist_inf(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    pub fn dist_l2(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |m, (a, b)| m + (*a - *b) * (*a - *b))
            .sqrt()
    }

    /// `self + t · (other − self)`.
    pub fn lerp(&self, other: &Self, t: T) -> Self {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| *a + (*b - *a) * t)
                .collect(),
        )
    }
}

impl<T: Real> From<Vec<T>> for JointConfig<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// A serial arm with per-link capsule radii and a placement offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RobotModel<T: Real = f64> {
    pub name: String,
    pub joints: Vec<DhRow<T>>,
    pub joint_limits: Vec<[T; 2]>,
    /// One radius per link; link `i` spans `frames[i]` to `frames[i + 1]`.
    pub link_radii: Vec<T>,
    pub reach_radius: T,
    #[serde(default)]
    pub base_mount: Pose<T>,
    /// Start posture for planning; all zeros clamped into limits if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<Vec<T>>,
    #[serde(default)]
    pub task_space: TaskSpace,
}

impl<T: Real> RobotModel<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.joints.len();
        if n < 2 {
            return Err(Error::invalid("robot needs at least two joints"));
        }
        if self.joint_limits.len() != n || self.link_radii.len() != n {
            return Err(Error::invalid(format!(
                "robot `{}`: {n} joints but {} limits and {} link radii",
                self.name,
                self.joint_limits.len(),
                self.link_radii.len()
            )));
        }
        if let Some(i) = self.joint_limits.iter().position(|l| !(l[0] < l[1])) {
            return Err(Error::invalid(format!("joint {i}: lower limit must be below upper")));
        }
        if !self.link_radii.iter().all(|r| *r > T::zero()) {
            return Err(Error::invalid("link radii must be positive"));
        }
        if !(self.reach_radius > T::zero()) {
            return Err(Error::invalid("reach radius must be positive"));
        }
        self.base_mount.validate()?;
        if let Some(h) = &self.home {
            if h.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: h.len(),
                });
            }
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn check_dim(&self, q: &JointConfig<T>) -> Result<()> {
        if q.dim() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.dim(),
            });
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &JointConfig<T>) -> bool {
        q.dim() == self.dof()
            && q
                .0
                .iter()
                .zip(&self.joint_limits)
                .all(|(v, l)| *v >= l[0] && *v <= l[1])
    }

    pub fn clamp(&self, q: &mut JointConfig<T>) {
        for (v, l) in q.0.iter_mut().zip(&self.joint_limits) {
            *v = v.clamp(l[0], l[1]);
        }
    }

    /// Home posture from the catalog, or zeros, clamped into limits.
    pub fn home_config(&self) -> JointConfig<T> {
        let mut q = JointConfig(
            self.home
                .clone()
                .unwrap_or_else(|| vec![T::zero(); self.dof()]),
        );
        self.clamp(&mut q);
        q
    }

    /// Capsule around the static part of the first link: the segment from
    /// the mount origin up the first joint axis by `d`, which no joint
    /// motion can move.
    pub fn base_capsule(&self, inflate: T) -> Capsule<T> {
        let mount = self.base_mount.isometry();
        let a = Point3::from(mount.translation.vector);
        let b = mount * Point3::new(T::zero(), T::zero(), self.joints[0].d);
        Capsule::new(a, b, self.link_radii[0] + inflate)
    }

    pub fn cast<U: Real>(&self) -> RobotModel<U> {
        let c = |v: T| U::lit(v.as_f64());
        RobotModel {
            name: self.name.clone(),
            joints: self
                .joints
                .iter()
                .map(|j| DhRow::new(c(j.a), c(j.alpha), c(j.d), c(j.theta_offset)))
                .collect(),
            joint_limits: self.joint_limits.iter().map(|l| [c(l[0]), c(l[1])]).collect(),
            link_radii: self.link_radii.iter().map(|r| c(*r)).collect(),
            reach_radius: c(self.reach_radius),
            base_mount: self.base_mount.cast(),
            home: self.home.as_ref().map(|h| h.iter().map(|v| c(*v)).collect()),
            task_space: self.task_space,
        }
    }
}

/// Frame chain `[mount, after joint 1, …, flange]` as isometries.
pub fn fk_frames<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>) -> Result<Vec<Isometry3<T>>> {
    model.check_dim(q)?;
    let mut frames = Vec::with_capacity(model.dof() + 1);
    let mut cur = model.base_mount.isometry();
    frames.push(cur);
    for (row, qi) in model.joints.iter().zip(&q.0) {
        cur *= row.transform(*qi);
        frames.push(cur);
    }
    Ok(frames)
}

/// One pose per frame, last is the flange.
pub fn fk<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>) -> Result<Vec<Pose<T>>> {
    Ok(fk_frames(model, q)?
        .iter()
        .map(Pose::from_isometry)
        .collect())
}

pub fn flange<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>) -> Result<Isometry3<T>> {
    Ok(*fk_frames(model, q)?.last().expect("at least the mount frame"))
}

fn jacobian_from_frames<T: Real>(frames: &[Isometry3<T>]) -> Matrix6xX<T> {
    let n = frames.len() - 1;
    let pe = frames[n].translation.vector;
    let mut j = Matrix6xX::zeros(n);
    for (col, f) in frames[..n].iter().enumerate() {
        let z = f.rotation * Vector3::z();
        let lin = z.cross(&(pe - f.translation.vector));
        j.fixed_view_mut::<3, 1>(0, col).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, col).copy_from(&z);
    }
    j
}

/// Geometric flange Jacobian: linear rows in meters, angular rows in radians.
pub fn jacobian<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>) -> Result<Matrix6xX<T>> {
    Ok(jacobian_from_frames(&fk_frames(model, q)?))
}

/// Rows of the Jacobian selected by the model's task space.
pub fn task_jacobian<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>) -> Result<DMatrix<T>> {
    Ok(task_block(&jacobian(model, q)?, model.task_space))
}

fn task_block<T: Real>(j: &Matrix6xX<T>, task: TaskSpace) -> DMatrix<T> {
    let rows = task.rows();
    DMatrix::from_fn(rows.len(), j.ncols(), |r, c| j[(rows[r], c)])
}

fn manipulability_of<T: Real>(block: &DMatrix<T>) -> T {
    let jjt = block * block.transpose();
    jjt.determinant().max(T::zero()).sqrt()
}

/// `sqrt(det(J Jᵀ))` over the task rows.
pub fn manipulability<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>) -> Result<T> {
    Ok(manipulability_of(&task_jacobian(model, q)?))
}

/// Euclidean distance from the mount origin (world frame, after `base_pose`)
/// to the nearest of `points`, compared with the reach radius.
pub fn within_reach_sphere<T: Real>(
    model: &RobotModel<T>,
    base_pose: &Pose<T>,
    points: &[Point3<T>],
) -> bool {
    let shoulder = base_pose.compose(&model.base_mount).position;
    points
        .iter()
        .map(|p| (p - shoulder).norm())
        .fold(None, |m: Option<T>, d| Some(m.map_or(d, |m| m.min(d))))
        .is_some_and(|d| d <= model.reach_radius)
}
