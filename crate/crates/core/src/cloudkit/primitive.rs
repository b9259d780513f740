use nalgebra::{Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{point_aabb_distance, Pose};
use crate::scalar::Real;

/// Primitive geometry in its local frame. Boxes and plane patches are
/// centered on the origin (patch normal `+z`); cylinders have their axis on
/// local `z`, centered at half height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum Shape<T: Real = f64> {
    Box { size: Vector3<T> },
    PlanePatch { size: Vector2<T> },
    Cylinder { radius: T, height: T },
}

/// A posed primitive that can be added to a scan or used as ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Primitive<T: Real = f64> {
    #[serde(flatten)]
    pub shape: Shape<T>,
    pub pose: Pose<T>,
}

/// A surface sample with its outward normal, both in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample<T: Real = f64> {
    pub point: Point3<T>,
    pub normal: Vector3<T>,
}

impl<T: Real> Primitive<T> {
    pub fn new(shape: Shape<T>, pose: Pose<T>) -> Result<Self> {
        let p = Self { shape, pose };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.pose.validate()?;
        let ok = match self.shape {
            Shape::Box { size } => size.iter().all(|v| *v > T::zero()),
            Shape::PlanePatch { size } => size.iter().all(|v| *v > T::zero()),
            Shape::Cylinder { radius, height } => radius > T::zero() && height > T::zero(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("primitive dimensions must be positive"))
        }
    }

    pub fn surface_area(&self) -> T {
        let two = T::lit(2.0);
        match self.shape {
            Shape::Box { size } => two * (size.x * size.y + size.y * size.z + size.z * size.x),
            Shape::PlanePatch { size } => size.x * size.y,
            Shape::Cylinder { radius, height } => {
                T::two_pi() * radius * height + T::two_pi() * radius * radius
            }
        }
    }

    /// Deterministic grid over the surface at spacing `1 / sqrt(density)`.
    /// Every face gets at least one sample.
    pub fn sample_surface(&self, density: T) -> Vec<SurfaceSample<T>> {
        let spacing = T::one() / density.sqrt();
        let mut local = Vec::new();
        let half = T::lit(0.5);
        match self.shape {
            Shape::PlanePatch { size } => {
                push_rect(&mut local, size.x, size.y, spacing, |u, v| {
                    (Vector3::new(u, v, T::zero()), Vector3::z())
                });
            }
            Shape::Box { size } => {
                let h = size * half;
                for sign in [T::one(), -T::one()] {
                    push_rect(&mut local, size.y, size.z, spacing, |u, v| {
                        (Vector3::new(sign * h.x, u, v), Vector3::x() * sign)
                    });
                    push_rect(&mut local, size.x, size.z, spacing, |u, v| {
                        (Vector3::new(u, sign * h.y, v), Vector3::y() * sign)
                    });
                    push_rect(&mut local, size.x, size.y, spacing, |u, v| {
                        (Vector3::new(u, v, sign * h.z), Vector3::z() * sign)
                    });
                }
            }
            Shape::Cylinder { radius, height } => {
                let ring = |r: T| -> usize { count(T::two_pi() * r, spacing) };
                let n_theta = ring(radius);
                let n_h = count(height, spacing);
                for j in 0..n_h {
                    let z = cell_center(j, n_h, height);
                    for i in 0..n_theta {
                        let t = T::two_pi() * T::from_count(i) / T::from_count(n_theta);
                        let (s, c) = t.sin_cos();
                        local.push((
                            Vector3::new(radius * c, radius * s, z),
                            Vector3::new(c, s, T::zero()),
                        ));
                    }
                }
                let n_r = count(radius, spacing);
                for sign in [T::one(), -T::one()] {
                    for k in 0..n_r {
                        let r = (T::from_count(k) + half) * radius / T::from_count(n_r);
                        let n = ring(r);
                        for i in 0..n {
                            let t = T::two_pi() * T::from_count(i) / T::from_count(n);
                            let (s, c) = t.sin_cos();
                            local.push((
                                Vector3::new(r * c, r * s, sign * height * half),
                                Vector3::z() * sign,
                            ));
                        }
                    }
                }
            }
        }
        local
            .into_iter()
            .map(|(p, n)| SurfaceSample {
                point: self.pose.transform_point(&Point3::from(p)),
                normal: self.pose.transform_vector(&n),
            })
            .collect()
    }

    /// Euclidean distance from `p` to the primitive, treating boxes and
    /// cylinders as solids and patches as zero-thickness rectangles.
    pub fn distance(&self, p: &Point3<T>) -> T {
        let local = self.pose.inverse().transform_point(p);
        let half = T::lit(0.5);
        match self.shape {
            Shape::Box { size } => {
                let h = size * half;
                point_aabb_distance(&local, &Point3::from(-h), &Point3::from(h))
            }
            Shape::PlanePatch { size } => {
                let dx = (local.x.abs() - size.x * half).max(T::zero());
                let dy = (local.y.abs() - size.y * half).max(T::zero());
                (dx * dx + dy * dy + local.z * local.z).sqrt()
            }
            Shape::Cylinder { radius, height } => {
                let r = (local.x * local.x + local.y * local.y).sqrt();
                let dr = (r - radius).max(T::zero());
                let dz = (local.z.abs() - height * half).max(T::zero());
                (dr * dr + dz * dz).sqrt()
            }
        }
    }
}

fn count<T: Real>(extent: T, spacing: T) -> usize {
    ((extent / spacing).round().as_f64() as usize).max(1)
}

fn cell_center<T: Real>(i: usize, n: usize, extent: T) -> T {
    (T::from_count(i) + T::lit(0.5)) * extent / T::from_count(n) - extent * T::lit(0.5)
}

fn push_rect<T: Real>(
    out: &mut Vec<(Vector3<T>, Vector3<T>)>,
    width: T,
    height: T,
    spacing: T,
    place: impl Fn(T, T) -> (Vector3<T>, Vector3<T>),
) {
    let nu = count(width, spacing);
    let nv = count(height, spacing);
    for i in 0..nu {
        let u = cell_center(i, nu, width);
        for j in 0..nv {
            out.push(place(u, cell_center(j, nv, height)));
        }
    }
}
