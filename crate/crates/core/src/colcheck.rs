//! Configuration and edge validity against the occupancy map.

use serde::Serialize;

use crate::armkin::{fk_frames, manipulability, JointConfig, RobotModel, W_MIN};
use crate::error::Result;
use crate::geom::{segment_segment_distance, Capsule};
use crate::scalar::Real;
use crate::voxmap::{OccupancyMap, VoxelKey};
use nalgebra::Point3;

/// Default joint-space interpolation step for edges, radians.
pub const DEFAULT_EDGE_STEP: f64 = 0.02;

/// One capsule per link between consecutive frame origins.
pub fn link_capsules<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>) -> Result<Vec<Capsule<T>>> {
    let frames = fk_frames(model, q)?;
    Ok(frames
        .windows(2)
        .zip(&model.link_radii)
        .map(|(w, r)| {
            Capsule::new(
                Point3::from(w[0].translation.vector),
                Point3::from(w[1].translation.vector),
                *r,
            )
        })
        .collect())
}

/// Why a configuration was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutOfLimits,
    Singular,
    Environment { link: usize, voxel: VoxelKey },
    SelfCollision { a: usize, b: usize },
}

/// Robot, map and base exclusion bundled for repeated queries.
#[derive(Debug, Clone)]
pub struct ValidityChecker<'a, T: Real = f64> {
    model: &'a RobotModel<T>,
    map: &'a OccupancyMap<T>,
    exclude: Vec<Capsule<T>>,
    w_min: T,
}

impl<'a, T: Real> ValidityChecker<'a, T> {
    /// Ignores map voxels inside the static part of the first link grown
    /// by one resolution, which is where the robot stands on the scan.
    pub fn new(model: &'a RobotModel<T>, map: &'a OccupancyMap<T>) -> Self {
        let exclude = vec![model.base_capsule(map.resolution())];
        Self {
            model,
            map,
            exclude,
            w_min: T::lit(W_MIN),
        }
    }

    pub fn without_base_exclusion(mut self) -> Self {
        self.exclude.clear();
        self
    }

    pub fn model(&self) -> &RobotModel<T> {
        self.model
    }

    pub fn map(&self) -> &OccupancyMap<T> {
        self.map
    }

    pub fn exclusions(&self) -> &[Capsule<T>] {
        &self.exclude
    }

    /// First violated condition, checked in the order limits, singularity,
    /// environment, self-collision.
    pub fn violation(&self, q: &JointConfig<T>) -> Option<Violation> {
        if !self.model.within_limits(q) {
            return Some(Violation::OutOfLimits);
        }
        match manipulability(self.model, q) {
            Ok(w) if w >= self.w_min => {}
            _ => return Some(Violation::Singular),
        }
        let caps = link_capsules(self.model, q).ok()?;
        for (link, c) in caps.iter().enumerate() {
            if let Some(voxel) = self.map.first_blocking(&c.a, &c.b, c.radius, &self.exclude) {
                return Some(Violation::Environment { link, voxel });
            }
        }
        // zero-length links (coincident frames) do not separate their neighbours
        let eps = T::lit(1e-9);
        let degenerate: Vec<bool> = caps.iter().map(|c| (c.b - c.a).norm() <= eps).collect();
        for i in 0..caps.len() {
            for j in i + 2..caps.len() {
                if degenerate[i + 1..j].iter().all(|&z| z) {
                    continue;
                }
                let d = segment_segment_distance(&caps[i].a, &caps[i].b, &caps[j].a, &caps[j].b);
                if d <= caps[i].radius + caps[j].radius {
                    return Some(Violation::SelfCollision { a: i, b: j });
                }
            }
        }
        None
    }

    pub fn config_valid(&self, q: &JointConfig<T>) -> bool {
        self.violation(q).is_none()
    }

    /// Checks the straight joint-space segment at `2^k` equal subdivisions,
    /// the smallest `k` whose per-joint change is at most `step`. With
    /// dyadic sampling a finer step checks a superset of configurations,
    /// and endpoints are put in a canonical order so the result is
    /// symmetric bit for bit.
    pub fn edge_valid(&self, q1: &JointConfig<T>, q2: &JointConfig<T>, step: T) -> bool {
        self.edge_violation(q1, q2, step).is_none()
    }

    /// Interpolation parameter and reason of a failing sample, if any.
    pub fn edge_violation(
        &self,
        q1: &JointConfig<T>,
        q2: &JointConfig<T>,
        step: T,
    ) -> Option<(T, Violation)> {
        if q1.dim() != q2.dim() || !(step > T::zero()) {
            return Some((T::zero(), Violation::OutOfLimits));
        }
        let swap = q1
            .0
            .iter()
            .zip(&q2.0)
            .find(|(a, b)| a != b)
            .is_some_and(|(a, b)| a > b);
        let (a, b) = if swap { (q2, q1) } else { (q1, q2) };
        let flip = |t: T| if swap { T::one() - t } else { t };

        for (t, q) in [(T::zero(), a), (T::one(), b)] {
            if let Some(v) = self.violation(q) {
                return Some((flip(t), v));
            }
        }
        self.interior_violation(a, b, step).map(|(t, v)| (flip(t), v))
    }

    /// Edge check that trusts `from` (already validated) and only samples
    /// `to` and the interior. Used when growing search trees.
    pub fn extend_valid(&self, from: &JointConfig<T>, to: &JointConfig<T>, step: T) -> bool {
        from.dim() == to.dim()
            && step > T::zero()
            && self.violation(to).is_none()
            && self.interior_violation(from, to, step).is_none()
    }

    fn interior_violation(
        &self,
        a: &JointConfig<T>,
        b: &JointConfig<T>,
        step: T,
    ) -> Option<(T, Violation)> {
        let span = a.dist_inf(b);
        let mut n: u64 = 1;
        while span / T::lit(n as f64) > step {
            n *= 2;
        }
        // coarse-to-fine order finds blockers early; the checked set is the same
        let mut stride = n;
        while stride > 1 {
            let half = stride / 2;
            let mut k = half;
            while k < n {
                let t = T::lit(k as f64) / T::lit(n as f64);
                if let Some(v) = self.violation(&a.lerp(b, t)) {
                    return Some((t, v));
                }
                k += stride;
            }
            stride = half;
        }
        None
    }
}

pub fn config_valid<T: Real>(model: &RobotModel<T>, q: &JointConfig<T>, map: &OccupancyMap<T>) -> bool {
    ValidityChecker::new(model, map).config_valid(q)
}

pub fn edge_valid<T: Real>(
    model: &RobotModel<T>,
    q1: &JointConfig<T>,
    q2: &JointConfig<T>,
    map: &OccupancyMap<T>,
    step: T,
) -> bool {
    ValidityChecker::new(model, map).edge_valid(q1, q2, step)
}
