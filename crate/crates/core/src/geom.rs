//! Rigid poses and the small set of distance primitives used by the map and
//! collision layers.

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Position in meters plus a unit quaternion. Serialized as
/// `{"position": [x, y, z], "orientation": [x, y, z, w]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Pose<T: Real = f64> {
    pub position: Point3<T>,
    pub orientation: UnitQuaternion<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self {
            position: Point3::origin(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Point3<T>, orientation: UnitQuaternion<T>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_translation(x: T, y: T, z: T) -> Self {
        Self::new(Point3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Pose from raw `(x, y, z, w)` quaternion components, checked for unit norm.
    pub fn from_parts(position: Point3<T>, xyzw: [T; 4]) -> Result<Self> {
        let q = Quaternion::new(xyzw[3], xyzw[0], xyzw[1], xyzw[2]);
        let pose = Self {
            position,
            orientation: Unit::new_unchecked(q),
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Quaternion norm within 1e-9 of one and a finite position.
    pub fn validate(&self) -> Result<()> {
        let n = self.orientation.as_ref().norm();
        if !((n - T::one()).abs() <= T::lit(1e-9)) {
            return Err(Error::invalid(format!(
                "pose quaternion norm {} deviates from 1",
                n.as_f64()
            )));
        }
        if !self.position.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("pose position is not finite"));
        }
        Ok(())
    }

    pub fn isometry(&self) -> Isometry3<T> {
        Isometry3::from_parts(Translation3::from(self.position.coords), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<T>) -> Self {
        Self {
            position: Point3::from(iso.translation.vector),
            orientation: iso.rotation,
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        Pose::from_isometry(&(self.isometry() * other.isometry()))
    }

    pub fn inverse(&self) -> Pose<T> {
        Pose::from_isometry(&self.isometry().inverse())
    }

    pub fn transform_point(&self, p: &Point3<T>) -> Point3<T> {
        self.orientation * p + self.position.coords
    }

    pub fn transform_vector(&self, v: &Vector3<T>) -> Vector3<T> {
        self.orientation * v
    }

    /// Converts the scalar type, e.g. `Pose<f64>` to `Pose<f32>`.
    pub fn cast<U: Real>(&self) -> Pose<U> {
        let q = self.orientation.as_ref();
        Pose {
            position: self.position.map(|c| U::lit(c.as_f64())),
            orientation: Unit::new_normalize(Quaternion::new(
                U::lit(q.w.as_f64()),
                U::lit(q.i.as_f64()),
                U::lit(q.j.as_f64()),
                U::lit(q.k.as_f64()),
            )),
        }
    }
}

/// Finite-segment capsule. A zero-length segment is a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Capsule<T: Real = f64> {
    pub a: Point3<T>,
    pub b: Point3<T>,
    pub radius: T,
}

impl<T: Real> Capsule<T> {
    pub fn new(a: Point3<T>, b: Point3<T>, radius: T) -> Self {
        Self { a, b, radius }
    }

    pub fn contains(&self, p: &Point3<T>) -> bool {
        point_segment_distance(p, &self.a, &self.b) <= self.radius
    }
}

/// Parameter in `[0, 1]` of the point on segment `ab` closest to `p`.
pub fn closest_param_on_segment<T: Real>(p: &Point3<T>, a: &Point3<T>, b: &Point3<T>) -> T {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= T::zero() {
        return T::zero();
    }
    let t = (p - a).dot(&ab) / len2;
    t.clamp(T::zero(), T::one())
}

pub fn point_segment_distance<T: Real>(p: &Point3<T>, a: &Point3<T>, b: &Point3<T>) -> T {
    let t = closest_param_on_segment(p, a, b);
    let c = a + (b - a) * t;
    (p - c).norm()
}

/// Minimum distance between segments `p1q1` and `p2q2`, handling degenerate
/// (point) segments and parallel segments.
pub fn segment_segment_distance<T: Real>(
    p1: &Point3<T>,
    q1: &Point3<T>,
    p2: &Point3<T>,
    q2: &Point3<T>,
) -> T {
    let eps = T::lit(1e-12);
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let zero = T::zero();
    let one = T::one();

    let (s, t);
    if a <= eps && e <= eps {
        return r.norm();
    }
    if a <= eps {
        s = zero;
        t = (f / e).clamp(zero, one);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = zero;
            s = (-c / a).clamp(zero, one);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps * a * e {
                ((b * f - c * e) / denom).clamp(zero, one)
            } else {
                zero
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < zero {
                t0 = zero;
                s0 = (-c / a).clamp(zero, one);
            } else if t0 > one {
                t0 = one;
                s0 = ((b - c) / a).clamp(zero, one);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

/// Distance from `p` to the axis-aligned box `[lo, hi]` (zero inside).
pub fn point_aabb_distance<T: Real>(p: &Point3<T>, lo: &Point3<T>, hi: &Point3<T>) -> T {
    let mut acc = T::zero();
    for i in 0..3 {
        let d = if p[i] < lo[i] {
            lo[i] - p[i]
        } else if p[i] > hi[i] {
            p[i] - hi[i]
        } else {
            T::zero()
        };
        acc += d * d;
    }
    acc.sqrt()
}

/// Rotation taking `+z` onto the unit vector `dir`; the half-turn about `+x`
/// when `dir` is `-z`.
pub fn rotation_z_to<T: Real>(dir: &Vector3<T>) -> UnitQuaternion<T> {
    let z = Vector3::z();
    UnitQuaternion::rotation_between(&z, dir).unwrap_or_else(|| {
        if dir.dot(&z) > T::zero() {
            UnitQuaternion::identity()
        } else {
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), T::pi())
        }
    })
}
