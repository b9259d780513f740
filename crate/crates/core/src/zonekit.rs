//! Interaction zones: sprayed surface points plus an approach direction,
//! turned into flange goal poses.
//!
//! The tool axis is flange `+z` and points along the approach, from free
//! space into the surface.

use nalgebra::{Point3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloudkit::{check_unit, Cone, PointCloud};
use crate::error::{Error, Result};
use crate::geom::{rotation_z_to, Pose};
use crate::scalar::Real;

pub const DEFAULT_CONE_TOL: f64 = 0.26;

fn default_cone_tol<T: Real>() -> T {
    T::lit(DEFAULT_CONE_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct InteractionZone<T: Real = f64> {
    pub id: String,
    pub marked_points: Vec<Point3<T>>,
    pub approach_dir: Vector3<T>,
    #[serde(default = "default_cone_tol")]
    pub cone_tol: T,
    #[serde(default)]
    pub standoff: T,
    #[serde(default)]
    pub label: String,
}

impl<T: Real> InteractionZone<T> {
    pub fn new(
        id: impl Into<String>,
        marked_points: Vec<Point3<T>>,
        approach_dir: Vector3<T>,
        cone_tol: T,
        standoff: T,
    ) -> Result<Self> {
        let z = Self {
            id: id.into(),
            marked_points,
            approach_dir,
            cone_tol,
            standoff,
            label: String::new(),
        };
        z.validate()?;
        Ok(z)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.marked_points.is_empty() {
            return Err(Error::EmptySelection);
        }
        if !self.marked_points.iter().all(|p| p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("zone `{}`: non-finite point", self.id)));
        }
        check_unit(&self.approach_dir)?;
        if !(self.cone_tol > T::zero() && self.cone_tol < T::frac_pi_2()) {
            return Err(Error::invalid(format!(
                "zone `{}`: cone_tol must lie in (0, pi/2)",
                self.id
            )));
        }
        if !(self.standoff >= T::zero()) {
            return Err(Error::invalid(format!("zone `{}`: standoff must be >= 0", self.id)));
        }
        Ok(())
    }

    pub fn centroid(&self) -> Point3<T> {
        let sum = self
            .marked_points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / T::from_count(self.marked_points.len()))
    }

    /// Same zone with points and direction moved by `pose`.
    pub fn transformed(&self, pose: &Pose<T>) -> Self {
        Self {
            marked_points: self.marked_points.iter().map(|p| pose.transform_point(p)).collect(),
            approach_dir: pose.transform_vector(&self.approach_dir),
            ..self.clone()
        }
    }
}

/// Indices of points inside the spray cone; the complement of what
/// [`PointCloud::erase_cone`] keeps.
pub fn spray_select<T: Real>(cloud: &PointCloud<T>, cone: &Cone<T>) -> Vec<usize> {
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| cone.contains(p))
        .map(|(i, _)| i)
        .collect()
}

/// Zone from selected points, approaching from the device position toward
/// the selection centroid.
pub fn make_zone<T: Real>(
    id: impl Into<String>,
    cloud: &PointCloud<T>,
    selection: &[usize],
    device_pose: &Pose<T>,
    cone_tol: T,
    standoff: T,
) -> Result<InteractionZone<T>> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut points = Vec::with_capacity(selection.len());
    for &i in selection {
        let p = cloud
            .points
            .get(i)
            .ok_or_else(|| Error::invalid(format!("selection index {i} out of range")))?;
        points.push(*p);
    }
    let n = T::from_count(points.len());
    let centroid = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let d = centroid - device_pose.position.coords;
    let norm = d.norm();
    if !(norm > T::lit(1e-12)) {
        return Err(Error::DegenerateDirection);
    }
    InteractionZone::new(id, points, d / norm, cone_tol, standoff)
}

/// `n` flange goal poses. The first is the nominal pose at the centroid with
/// the exact approach and zero spin; the rest pick a marked point, tilt the
/// tool axis uniformly over the cone cap and spin uniformly about it.
pub fn sample_goal_poses<T: Real>(zone: &InteractionZone<T>, n: usize, rng_seed: u64) -> Vec<Pose<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let approach = zone.approach_dir.normalize();
    let base = rotation_z_to(&approach);
    let offset = approach * zone.standoff;
    // strictly inside the cone so rounding cannot push an axis past cone_tol
    let max_tilt = zone.cone_tol.as_f64() * (1.0 - 1e-9);
    let cos_max = max_tilt.cos();

    let mut out = Vec::with_capacity(n.max(1));
    out.push(Pose::new(zone.centroid() - offset, base));
    while out.len() < n {
        let p = zone.marked_points[rng.random_range(0..zone.marked_points.len())];
        let cos_t: f64 = rng.random_range(cos_max..=1.0);
        let tilt = cos_t.clamp(-1.0, 1.0).acos().min(max_tilt);
        let azimuth: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let spin: f64 = rng.random_range(0.0..std::f64::consts::TAU);

        let (s, c) = azimuth.sin_cos();
        let tilt_axis = base * Vector3::new(T::lit(c), T::lit(s), T::zero());
        let tilt_rot = UnitQuaternion::from_axis_angle(&Unit::new_normalize(tilt_axis), T::lit(tilt));
        let spin_rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), T::lit(spin));
        out.push(Pose::new(p - offset, tilt_rot * base * spin_rot));
    }
    out
}
