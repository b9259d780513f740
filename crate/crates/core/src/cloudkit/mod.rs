//! Point-cloud container, workspace cropping and the cleanup toolbox
//! (outlier removal, voxel downsampling, cone and sphere erasers, primitive
//! insertion, plane fitting).

mod plane;
pub mod ply;
mod primitive;
mod tool;

use std::collections::BTreeMap;
use std::num::NonZero;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::scalar::Real;

pub use plane::PlaneFit;
pub use primitive::{Primitive, Shape, SurfaceSample};
pub use tool::{ToolOp, ToolSummary};

/// Default neighbourhood size for statistical outlier removal.
pub const DEFAULT_OUTLIER_K: usize = 16;
/// Default standard-deviation multiplier for statistical outlier removal.
pub const DEFAULT_OUTLIER_ALPHA: f64 = 2.0;

/// Tolerance on unit-vector inputs (cone axes, approach directions).
pub const UNIT_TOL: f64 = 1e-6;

/// Ordered points in meters with optional per-point RGB in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PointCloud<T: Real = f64> {
    pub points: Vec<Point3<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<[f32; 3]>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Point3<T>>) -> Result<Self> {
        let cloud = Self {
            points,
            colors: None,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn with_colors(points: Vec<Point3<T>>, colors: Vec<[f32; 3]>) -> Result<Self> {
        let cloud = Self {
            points,
            colors: Some(colors),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.colors {
            if c.len() != self.points.len() {
                return Err(Error::invalid(format!(
                    "color count {} differs from point count {}",
                    c.len(),
                    self.points.len()
                )));
            }
            if c.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid("colors must lie in [0, 1]"));
            }
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(format!("point {i} is not finite")));
        }
        Ok(())
    }

    /// Keeps the points whose index satisfies `keep`, carrying colors along.
    pub fn filter_indexed(&self, mut keep: impl FnMut(usize, &Point3<T>) -> bool) -> Self {
        let mut points = Vec::with_capacity(self.points.len());
        let mut colors = self.colors.as_ref().map(|_| Vec::new());
        for (i, p) in self.points.iter().enumerate() {
            if keep(i, p) {
                points.push(*p);
                if let (Some(out), Some(src)) = (colors.as_mut(), self.colors.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        Self { points, colors }
    }

    /// Rigidly transforms every point.
    pub fn transformed(&self, pose: &Pose<T>) -> Self {
        Self {
            points: self.points.iter().map(|p| pose.transform_point(p)).collect(),
            colors: self.colors.clone(),
        }
    }

    /// Appends `other`, filling colors with mid-grey if only one side has them.
    pub fn extend(&mut self, other: &PointCloud<T>) {
        let grey = [0.5f32; 3];
        match (&mut self.colors, &other.colors) {
            (Some(mine), Some(theirs)) => mine.extend_from_slice(theirs),
            (Some(mine), None) => mine.extend(std::iter::repeat_n(grey, other.len())),
            (None, Some(theirs)) => {
                let mut c = vec![grey; self.points.len()];
                c.extend_from_slice(theirs);
                self.colors = Some(c);
            }
            (None, None) => {}
        }
        self.points.extend_from_slice(&other.points);
    }

    /// Minimum and maximum corner, `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point3<T>, Point3<T>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    pub fn centroid(&self) -> Option<Point3<T>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / T::from_count(self.points.len())))
    }

    /// Points inside the oriented box (inclusive), order preserved.
    pub fn crop(&self, bbox: &OrientedBox<T>) -> Self {
        self.filter_indexed(|_, p| bbox.contains(p))
    }

    /// Statistical outlier removal: drops points whose mean distance to their
    /// `k` nearest neighbours exceeds `mean + alpha * stddev` over the cloud.
    pub fn remove_outliers(&self, k: usize, alpha: T) -> Result<(Self, usize)> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if self.len() <= k {
            return Err(Error::TooFewPoints {
                got: self.len(),
                k,
            });
        }
        let d = mean_knn_distances(&self.points, k);
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let threshold = outlier_threshold(mean, var.sqrt(), alpha.as_f64());
        let kept = self.filter_indexed(|i, _| d[i] <= threshold);
        let removed = self.len() - kept.len();
        Ok((kept, removed))
    }

    /// Voxel-grid downsampling to one centroid per occupied voxel of edge
    /// `leaf`. Output is ordered by voxel key.
    pub fn downsample(&self, leaf: T) -> Result<Self> {
        if !(leaf > T::zero()) {
            return Err(Error::invalid("leaf size must be positive"));
        }
        let mut cells: BTreeMap<[i64; 3], (Vector3<T>, [f64; 3], usize)> = BTreeMap::new();
        for (i, p) in self.points.iter().enumerate() {
            let key = voxel_key(p, &Point3::origin(), leaf);
            let e = cells
                .entry(key)
                .or_insert((Vector3::zeros(), [0.0; 3], 0));
            e.0 += p.coords;
            if let Some(c) = &self.colors {
                for (acc, v) in e.1.iter_mut().zip(c[i]) {
                    *acc += v as f64;
                }
            }
            e.2 += 1;
        }
        let mut points = Vec::with_capacity(cells.len());
        let mut colors = self.colors.as_ref().map(|_| Vec::with_capacity(cells.len()));
        for (sum, csum, n) in cells.into_values() {
            points.push(Point3::from(sum / T::from_count(n)));
            if let Some(c) = colors.as_mut() {
                c.push(csum.map(|v| (v / n as f64).clamp(0.0, 1.0) as f32));
            }
        }
        Ok(Self { points, colors })
    }

    /// Removes the points inside the cone.
    pub fn erase_cone(&self, cone: &Cone<T>) -> Self {
        self.filter_indexed(|_, p| !cone.contains(p))
    }

    /// Removes points within `radius` of `center`.
    pub fn erase_sphere(&self, center: &Point3<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::invalid("sphere radius must be positive"));
        }
        Ok(self.filter_indexed(|_, p| (p - center).norm() > radius))
    }

    /// Appends a deterministic surface grid of the primitive at spacing
    /// `1 / sqrt(density)`.
    pub fn add_primitive(&self, prim: &Primitive<T>, density: T) -> Result<Self> {
        if !(density > T::zero()) {
            return Err(Error::invalid("density must be positive"));
        }
        prim.validate()?;
        let extra = PointCloud {
            points: prim
                .sample_surface(density)
                .into_iter()
                .map(|s| s.point)
                .collect(),
            colors: None,
        };
        let mut out = self.clone();
        out.extend(&extra);
        Ok(out)
    }

    /// RANSAC plane fit; see [`PlaneFit`].
    pub fn fit_plane(&self, distance_tol: T, max_iters: usize, seed: u64) -> Result<PlaneFit<T>> {
        plane::fit_plane(&self.points, distance_tol, max_iters, seed)
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| p.map(|c| U::lit(c.as_f64())))
                .collect(),
            colors: self.colors.clone(),
        }
    }
}

/// Cut-off on the mean neighbour distance. The relative slack keeps
/// rounding noise on lattice-regular clouds (zero spread) from counting as
/// spread.
pub fn outlier_threshold(mean: f64, stddev: f64, alpha: f64) -> f64 {
    mean + alpha * stddev + 1e-9 * mean
}

/// `floor((p - origin) / resolution)` per axis.
pub fn voxel_key<T: Real>(p: &Point3<T>, origin: &Point3<T>, resolution: T) -> [i64; 3] {
    let mut key = [0i64; 3];
    for (axis, k) in key.iter_mut().enumerate() {
        *k = ((p[axis] - origin[axis]) / resolution).floor().as_f64() as i64;
    }
    key
}

fn mean_knn_distances<T: Real>(points: &[Point3<T>], k: usize) -> Vec<f64> {
    let coords: Vec<[f64; 3]> = points
        .iter()
        .map(|p| [p.x.as_f64(), p.y.as_f64(), p.z.as_f64()])
        .collect();
    let tree: ImmutableKdTree<f64, u32, 3, 32> = ImmutableKdTree::new_from_slice(&coords);
    let want = NonZero::new(k + 1).expect("k + 1 > 0");
    coords
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let mut dists: Vec<f64> = tree
                .nearest_n::<SquaredEuclidean>(q, want)
                .into_iter()
                .filter(|nn| nn.item as usize != i)
                .map(|nn| nn.distance)
                .collect();
            dists.sort_by(|a, b| a.total_cmp(b));
            dists.truncate(k);
            dists.iter().map(|d| d.sqrt()).sum::<f64>() / k as f64
        })
        .collect()
}

/// Oriented workspace box: a pose and positive half extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OrientedBox<T: Real = f64> {
    pub pose: Pose<T>,
    pub half_extents: Vector3<T>,
}

impl<T: Real> OrientedBox<T> {
    pub fn new(pose: Pose<T>, half_extents: Vector3<T>) -> Result<Self> {
        let b = Self { pose, half_extents };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.pose.validate()?;
        if !self.half_extents.iter().all(|h| *h > T::zero()) {
            return Err(Error::invalid("box half extents must be positive"));
        }
        Ok(())
    }

    pub fn to_local(&self, p: &Point3<T>) -> Vector3<T> {
        self.pose.orientation.inverse_transform_vector(&(p - self.pose.position))
    }

    pub fn contains(&self, p: &Point3<T>) -> bool {
        let local = self.to_local(p);
        (0..3).all(|i| local[i].abs() <= self.half_extents[i])
    }
}

/// Cone used by the brush eraser and the zone spray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Cone<T: Real = f64> {
    pub apex: Point3<T>,
    pub dir: Vector3<T>,
    pub half_angle: T,
    pub range: T,
}

impl<T: Real> Cone<T> {
    pub fn new(apex: Point3<T>, dir: Vector3<T>, half_angle: T, range: T) -> Result<Self> {
        let cone = Self {
            apex,
            dir,
            half_angle,
            range,
        };
        cone.validate()?;
        Ok(cone)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit(&self.dir)?;
        if !(self.half_angle > T::zero() && self.half_angle < T::frac_pi_2()) {
            return Err(Error::invalid("cone half angle must lie in (0, pi/2)"));
        }
        if !(self.range > T::zero()) {
            return Err(Error::invalid("cone range must be positive"));
        }
        Ok(())
    }

    /// Axial extent in `[0, range]` and angle to the axis at most
    /// `half_angle`; the apex itself is inside.
    pub fn contains(&self, p: &Point3<T>) -> bool {
        let v = p - self.apex;
        if v.norm_squared() == T::zero() {
            return true;
        }
        let along = v.dot(&self.dir);
        if along < T::zero() || along > self.range {
            return false;
        }
        let lateral = v.cross(&self.dir).norm();
        lateral.atan2(along) <= self.half_angle
    }
}

pub(crate) fn check_unit<T: Real>(v: &Vector3<T>) -> Result<()> {
    let n = v.norm();
    if !((n - T::one()).abs() <= T::lit(UNIT_TOL)) {
        return Err(Error::InvalidDirection { norm: n.as_f64() });
    }
    Ok(())
}
