//! Synthetic workcells with controllable scan defects and exact ground
//! truth for collision oracles.
//!
//! Scenes are built from plane patches (what a handheld scan sees of a
//! table or a sheet-metal enclosure). The robot stands at the world origin
//! on the table top, `z` up.

use nalgebra::{Point3, UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::armkin::{JointConfig, RobotModel};
use crate::cloudkit::{OrientedBox, PointCloud, Primitive, Shape};
use crate::colcheck::link_capsules;
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::pathfind::JointPath;
use crate::zonekit::{InteractionZone, DEFAULT_CONE_TOL};

pub const DEFAULT_SCAN_DENSITY: f64 = 20_000.0;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.003;

pub const TABLE_SIZE: [f64; 2] = [1.2, 0.8];
pub const ZONE_SEPARATION: f64 = 0.5;
/// Task A zones sit this far in front of the robot along `+y`.
pub const TASK_A_ZONE_OFFSET: f64 = 0.3;
pub const TASK_A_STANDOFF: f64 = 0.1;
/// Radius of the ring of marked points around each zone anchor.
pub const ZONE_MARK_RADIUS: f64 = 0.02;

pub const MACHINE_SIZE: f64 = 0.6;
pub const MACHINE_OPENING: f64 = 0.3;
/// Distance from the robot base to the machine's front face along `+x`.
pub const MACHINE_FRONT_X: f64 = 0.45;
/// Flange distance from the fixture; stands in for the unmodeled tool.
pub const FIXTURE_STANDOFF: f64 = 0.25;
pub const MACHINE_ROOF: &str = "machine_roof";
/// Catalog robot for machine loading. The UR-style wrists of the smaller
/// entries cannot pass a 0.3 m opening with capsule and voxel clearance.
pub const TASK_B_ROBOT: &str = "large";
/// Task B mounts the robot on a riser of this height above the table.
pub const TASK_B_BASE_HEIGHT: f64 = 0.45;
/// Planner iterations used for Task B; threading the opening needs more
/// than the default budget.
pub const TASK_B_PLANNER_ITERS: usize = 20_000;

/// Base pose for Task B.
pub fn task_b_base_pose() -> Pose {
    Pose::from_translation(0.0, 0.0, TASK_B_BASE_HEIGHT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPrimitive {
    pub label: String,
    #[serde(flatten)]
    pub primitive: Primitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<LabeledPrimitive>,
    /// Points per square meter.
    pub scan_density: f64,
    /// Standard deviation of displacement along the surface normal, meters.
    pub noise_sigma: f64,
    /// Outliers injected, as a fraction of the surface point count.
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_box: Option<OrientedBox>,
    /// Labels of primitives left out of the scan.
    #[serde(default)]
    pub holes: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

/// Named zone anchor on a primitive surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneAnchor {
    pub id: String,
    pub on: String,
    pub point: Point3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub primitives: Vec<LabeledPrimitive>,
    pub anchors: Vec<ZoneAnchor>,
}

/// A scan-independent collision of one link with one primitive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshHit {
    pub label: String,
    pub link: usize,
    /// Index of the path edge and interpolation parameter along it.
    pub edge: usize,
    pub t: f64,
    pub clearance: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scan_density > 0.0) {
            return Err(Error::invalid("scan density must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::invalid("outlier fraction must lie in [0, 1)"));
        }
        if self.outlier_fraction > 0.0 && self.outlier_box.is_none() {
            return Err(Error::invalid("outliers need an outlier box"));
        }
        for p in &self.primitives {
            p.primitive.validate()?;
        }
        if let Some(b) = &self.outlier_box {
            b.validate()?;
        }
        Ok(())
    }
}

fn label_color(label: &str) -> [f32; 3] {
    let h = label.bytes().fold(0x811c_9dc5u32, |h, b| (h ^ b as u32).wrapping_mul(0x0100_0193));
    let c = |shift: u32| 0.35 + 0.5 * ((h >> shift) & 0xff) as f32 / 255.0;
    [c(0), c(8), c(16)]
}

/// Sample every non-hole primitive, add normal noise and outliers.
pub fn generate(spec: &SceneSpec, anchors: &[ZoneAnchor]) -> Result<(PointCloud, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for lp in &spec.primitives {
        if spec.holes.contains(&lp.label) {
            continue;
        }
        let color = label_color(&lp.label);
        for s in lp.primitive.sample_surface(spec.scan_density) {
            let d = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            points.push(s.point + s.normal * d);
            colors.push(color);
        }
    }
    if let Some(b) = spec.outlier_box.filter(|_| spec.outlier_fraction > 0.0) {
        let n = (spec.outlier_fraction * points.len() as f64).round() as usize;
        for _ in 0..n {
            let local = Vector3::new(
                rng.random_range(-1.0..=1.0) * b.half_extents.x,
                rng.random_range(-1.0..=1.0) * b.half_extents.y,
                rng.random_range(-1.0..=1.0) * b.half_extents.z,
            );
            points.push(b.pose.transform_point(&Point3::from(local)));
            colors.push([1.0, 1.0, 1.0]);
        }
    }
    let cloud = PointCloud::with_colors(points, colors)?;
    let truth = GroundTruth {
        primitives: spec.primitives.clone(),
        anchors: anchors.to_vec(),
    };
    Ok((cloud, truth))
}

fn patch(label: &str, w: f64, h: f64, center: Point3<f64>, rot: UnitQuaternion<f64>) -> LabeledPrimitive {
    LabeledPrimitive {
        label: label.into(),
        primitive: Primitive {
            shape: Shape::PlanePatch {
                size: Vector2::new(w, h),
            },
            pose: Pose::new(center, rot),
        },
    }
}

fn table() -> LabeledPrimitive {
    patch("table", TABLE_SIZE[0], TABLE_SIZE[1], Point3::origin(), UnitQuaternion::identity())
}

fn base_spec(primitives: Vec<LabeledPrimitive>, seed: u64) -> SceneSpec {
    SceneSpec {
        primitives,
        scan_density: DEFAULT_SCAN_DENSITY,
        noise_sigma: DEFAULT_NOISE_SIGMA,
        outlier_fraction: 0.0,
        outlier_box: None,
        holes: Vec::new(),
        seed,
    }
}

/// Anchor plus a ring of marked points in the plane normal to `approach`.
pub fn zone_at(anchor: &ZoneAnchor, approach: Vector3<f64>, standoff: f64) -> InteractionZone {
    let approach = approach.normalize();
    let u = approach.cross(&Vector3::x()).try_normalize(1e-9).unwrap_or_else(|| approach.cross(&Vector3::y()).normalize());
    let v = approach.cross(&u);
    let mut pts = vec![anchor.point];
    for k in 0..8 {
        let a = std::f64::consts::TAU * k as f64 / 8.0;
        pts.push(anchor.point + (u * a.cos() + v * a.sin()) * ZONE_MARK_RADIUS);
    }
    InteractionZone {
        id: anchor.id.clone(),
        marked_points: pts,
        approach_dir: approach,
        cone_tol: DEFAULT_CONE_TOL,
        standoff,
        label: anchor.on.clone(),
    }
}

/// Workspace box around everything a scene contains, with margin.
pub fn workspace_for(spec: &SceneSpec) -> OrientedBox {
    let mut lo = Point3::new(f64::MAX, f64::MAX, f64::MAX);
    let mut hi = Point3::new(f64::MIN, f64::MIN, f64::MIN);
    for lp in &spec.primitives {
        for s in lp.primitive.sample_surface(100.0) {
            lo = lo.inf(&s.point);
            hi = hi.sup(&s.point);
        }
    }
    let margin = Vector3::new(0.1, 0.1, 0.1);
    let hi = hi + margin + Vector3::new(0.0, 0.0, 1.0);
    let lo = lo - margin;
    OrientedBox {
        pose: Pose::new(nalgebra::center(&lo, &hi), UnitQuaternion::identity()),
        half_extents: (hi - lo) / 2.0,
    }
}

/// Flat table with pick and place zones in front of the robot.
pub fn task_a_scene(seed: u64) -> (SceneSpec, Vec<ZoneAnchor>, Vec<InteractionZone>) {
    let spec = base_spec(vec![table()], seed);
    let half = ZONE_SEPARATION / 2.0;
    let anchors = vec![
        ZoneAnchor {
            id: "pick".into(),
            on: "table".into(),
            point: Point3::new(-half, TASK_A_ZONE_OFFSET, 0.0),
        },
        ZoneAnchor {
            id: "place".into(),
            on: "table".into(),
            point: Point3::new(half, TASK_A_ZONE_OFFSET, 0.0),
        },
    ];
    let zones = anchors
        .iter()
        .map(|a| zone_at(a, -Vector3::z(), TASK_A_STANDOFF))
        .collect();
    (spec, anchors, zones)
}

/// Geometry of the machine mock-up: a box of sheet walls on the table with
/// a square opening in the face toward the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineLayout {
    pub size: f64,
    pub opening: f64,
    pub front_x: f64,
    pub fixture_standoff: f64,
}

impl Default for MachineLayout {
    fn default() -> Self {
        Self {
            size: MACHINE_SIZE,
            opening: MACHINE_OPENING,
            front_x: MACHINE_FRONT_X,
            fixture_standoff: FIXTURE_STANDOFF,
        }
    }
}

impl MachineLayout {
    pub fn cavity_center(&self) -> Point3<f64> {
        Point3::new(self.front_x + self.size / 2.0, 0.0, self.size / 2.0)
    }

    pub fn primitives(&self) -> Vec<LabeledPrimitive> {
        let s = self.size;
        let o = self.opening;
        let c = self.cavity_center();
        let (fx, bx) = (self.front_x, self.front_x + s);
        let face_x = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2);
        let face_y = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2);
        let flat = UnitQuaternion::identity();
        // patch local x maps to world -z on the x-facing walls
        let side = (s - o) / 2.0;
        vec![
            patch("machine_floor", s, s, Point3::new(c.x, 0.0, 0.0), flat),
            patch(MACHINE_ROOF, s, s, Point3::new(c.x, 0.0, s), flat),
            patch("machine_back", s, s, Point3::new(bx, 0.0, c.z), face_x),
            patch("machine_left", s, s, Point3::new(c.x, s / 2.0, c.z), face_y),
            patch("machine_right", s, s, Point3::new(c.x, -s / 2.0, c.z), face_y),
            patch("machine_front_low", side, s, Point3::new(fx, 0.0, side / 2.0), face_x),
            patch("machine_front_high", side, s, Point3::new(fx, 0.0, s - side / 2.0), face_x),
            patch("machine_front_left", o, side, Point3::new(fx, o / 2.0 + side / 2.0, c.z), face_x),
            patch("machine_front_right", o, side, Point3::new(fx, -(o / 2.0 + side / 2.0), c.z), face_x),
        ]
    }

    /// Box filling the middle of the cavity, used for floating-point defects.
    pub fn cavity_core(&self, half: f64) -> OrientedBox {
        OrientedBox {
            pose: Pose::new(self.cavity_center(), UnitQuaternion::identity()),
            half_extents: Vector3::repeat(half),
        }
    }
}

/// Table plus machine; the fixture sits on the inside of the back wall and
/// is approached horizontally through the opening. Without the roof the
/// roof patch becomes a scan hole.
pub fn task_b_scene(
    seed: u64,
    with_roof: bool,
    layout: &MachineLayout,
) -> (SceneSpec, Vec<ZoneAnchor>, Vec<InteractionZone>) {
    let mut prims = vec![table()];
    prims.extend(layout.primitives());
    let mut spec = base_spec(prims, seed);
    if !with_roof {
        spec.holes.push(MACHINE_ROOF.into());
    }
    let c = layout.cavity_center();
    let anchors = vec![
        ZoneAnchor {
            id: "source".into(),
            on: "table".into(),
            point: Point3::new(0.0, TASK_A_ZONE_OFFSET, 0.0),
        },
        ZoneAnchor {
            id: "fixture".into(),
            on: "machine_back".into(),
            point: Point3::new(layout.front_x + layout.size, 0.0, c.z),
        },
    ];
    let zones = vec![
        zone_at(&anchors[0], -Vector3::z(), TASK_A_STANDOFF),
        zone_at(&anchors[1], Vector3::x(), layout.fixture_standoff),
    ];
    (spec, anchors, zones)
}

fn capsule_clearance(prim: &Primitive, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    // the distance to a convex solid is convex along a segment
    let f = |t: f64| prim.distance(&(a + (b - a) * t));
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.0).min(f(1.0)).min(f((lo + hi) / 2.0))
}

impl GroundTruth {
    /// Every link/primitive contact along the path, interpolated so no joint
    /// moves more than `step` between samples. Link 0 stands on the table
    /// and is skipped.
    pub fn path_hits(
        &self,
        model: &RobotModel,
        base_pose: &Pose,
        path: &JointPath,
        step: f64,
    ) -> Vec<MeshHit> {
        let mut hits = Vec::new();
        for (edge, w) in path.waypoints.windows(2).enumerate() {
            let n = (w[0].dist_inf(&w[1]) / step).ceil().max(1.0) as usize;
            for k in 0..=n {
                let t = k as f64 / n as f64;
                self.config_hits(model, base_pose, &w[0].lerp(&w[1], t), |label, link, clearance| {
                    hits.push(MeshHit {
                        label: label.to_string(),
                        link,
                        edge,
                        t,
                        clearance,
                    })
                });
            }
        }
        hits
    }

    pub fn config_hits(
        &self,
        model: &RobotModel,
        base_pose: &Pose,
        q: &JointConfig,
        mut on_hit: impl FnMut(&str, usize, f64),
    ) {
        let Ok(caps) = link_capsules(model, q) else {
            return;
        };
        for (link, c) in caps.iter().enumerate().skip(1) {
            let a = base_pose.transform_point(&c.a);
            let b = base_pose.transform_point(&c.b);
            for lp in &self.primitives {
                let d = capsule_clearance(&lp.primitive, &a, &b);
                if d < c.radius {
                    on_hit(&lp.label, link, d - c.radius);
                }
            }
        }
    }

    /// Labels the segment `a`–`b` passes through (zero-thickness contact).
    pub fn segment_hits(&self, a: &Point3<f64>, b: &Point3<f64>) -> Vec<&str> {
        self.primitives
            .iter()
            .filter(|lp| capsule_clearance(&lp.primitive, a, b) < 1e-9)
            .map(|lp| lp.label.as_str())
            .collect()
    }
}
