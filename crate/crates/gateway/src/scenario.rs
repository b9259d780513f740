//! Scenario files: everything `cellreach run` needs to reproduce one
//! analysis, plus the Task A / Task B emitters behind `gen-scene`.

use std::path::{Path, PathBuf};

use cellreach::armkin::catalog::Catalog;
use cellreach::cloudkit::{ply, OrientedBox, PointCloud};
use cellreach::feastool::{AnalysisParams, FeasibilityReport, Session, Timings};
use cellreach::geom::Pose;
use cellreach::scenegen::{self, GroundTruth, MachineLayout, SceneSpec};
use cellreach::zonekit::InteractionZone;
use serde::{Deserialize, Serialize};

use crate::error::{GatewayError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the scan comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CloudSource {
    /// PLY file, relative to the scenario file's directory.
    Ply(PathBuf),
    /// Synthetic scene generated on load.
    Scene(SceneSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotRef {
    /// Catalog name.
    pub id: String,
    #[serde(default)]
    pub base_pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    /// Base planner seed; replaces `params.planner.rng_seed`.
    pub planner: u64,
    /// Replaces the seed of an inline scene when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub workspace: OrientedBox,
    pub cloud: CloudSource,
    pub robot: RobotRef,
    pub zones: Vec<InteractionZone>,
    #[serde(default)]
    pub params: AnalysisParams,
    #[serde(default)]
    pub seeds: Seeds,
}

impl Scenario {
    /// Parses and validates; malformed text is a parse error, a wrong
    /// schema version or broken invariants are validation errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| GatewayError::parse("scenario_json", e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(GatewayError::validation(
                "schema_version",
                format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.workspace.validate()?;
        self.robot.base_pose.validate()?;
        self.params.validate()?;
        if self.zones.is_empty() {
            return Err(cellreach::Error::NoZones.into());
        }
        for z in &self.zones {
            z.validate()?;
        }
        if let CloudSource::Scene(spec) = &self.cloud {
            spec.validate()?;
        }
        Ok(())
    }

    /// Parameters with the scenario seed applied.
    pub fn effective_params(&self) -> AnalysisParams {
        let mut p = self.params;
        p.planner.rng_seed = self.seeds.planner;
        p
    }

    /// Loads the cloud; PLY paths resolve against `base_dir`.
    pub fn load_cloud(&self, base_dir: &Path) -> Result<PointCloud> {
        match &self.cloud {
            CloudSource::Ply(p) => {
                let path = base_dir.join(p);
                if !path.is_file() {
                    return Err(GatewayError::validation(
                        "referenced_file",
                        format!("cloud file {} does not exist", path.display()),
                    ));
                }
                Ok(ply::read_file(&path)?)
            }
            CloudSource::Scene(spec) => {
                let mut spec = spec.clone();
                if let Some(seed) = self.seeds.scene {
                    spec.seed = seed;
                }
                Ok(scenegen::generate(&spec, &[])?.0)
            }
        }
    }

    /// Session with cloud, robot and zones in place (three edits after the
    /// initial snapshot, one per zone after that).
    pub fn build_session(&self, base_dir: &Path, catalog: &Catalog) -> Result<Session> {
        let model = catalog.require(&self.robot.id)?.clone();
        let cloud = self.load_cloud(base_dir)?;
        let mut s = Session::new(self.workspace, cloud)?;
        s.params = self.effective_params();
        s.place_robot(model, self.robot.base_pose)?;
        for z in &self.zones {
            s.add_zone(z.clone())?;
        }
        Ok(s)
    }
}

/// Reads and validates a scenario file.
pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GatewayError::validation("scenario_file", format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text)
}

/// Canonical report bytes, shared by the CLI and the HTTP API.
pub fn report_json(report: &FeasibilityReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

pub fn timings_json(t: &Timings) -> String {
    let mut out = serde_json::to_string_pretty(t).expect("timings serialize");
    out.push('\n');
    out
}

/// `<dir>/<stem>.report.json` and `<dir>/<stem>.timings.json` for a
/// scenario at `<dir>/<stem>.json`.
pub fn output_paths(scenario_path: &Path) -> (PathBuf, PathBuf) {
    let dir = scenario_path.parent().unwrap_or(Path::new(""));
    let stem = scenario_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    (
        dir.join(format!("{stem}.report.json")),
        dir.join(format!("{stem}.timings.json")),
    )
}

/// Which synthetic workcell to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    A,
    B { with_roof: bool, floating_points: usize },
}

/// Scene spec, ground truth and a scenario whose cloud is still unset
/// (the caller decides between an inline scene and a PLY file).
pub struct Generated {
    pub spec: SceneSpec,
    pub truth: GroundTruth,
    pub cloud: PointCloud,
    pub scenario: Scenario,
}

/// Edge of the cube of floating points injected into the machine cavity.
pub const FLOATING_CORE_HALF: f64 = 0.12;

pub fn generate_task(task: Task, seed: u64) -> Result<Generated> {
    let (mut spec, anchors, zones, robot, base_pose, mut params) = match task {
        Task::A => {
            let (spec, anchors, zones) = scenegen::task_a_scene(seed);
            (spec, anchors, zones, "medium", Pose::identity(), AnalysisParams::default())
        }
        Task::B { with_roof, .. } => {
            let (spec, anchors, zones) = scenegen::task_b_scene(seed, with_roof, &MachineLayout::default());
            let mut params = AnalysisParams::default();
            params.planner.max_iters = scenegen::TASK_B_PLANNER_ITERS;
            params.planner.timeout = 60.0;
            (spec, anchors, zones, scenegen::TASK_B_ROBOT, scenegen::task_b_base_pose(), params)
        }
    };
    if let Task::B { floating_points, .. } = task {
        if floating_points > 0 {
            let surface = scenegen::generate(&spec, &anchors)?.0.len();
            spec.outlier_box = Some(MachineLayout::default().cavity_core(FLOATING_CORE_HALF));
            spec.outlier_fraction = floating_points as f64 / surface as f64;
        }
    }
    params.planner.rng_seed = seed;
    let (cloud, truth) = scenegen::generate(&spec, &anchors)?;
    let scenario = Scenario {
        schema_version: SCHEMA_VERSION,
        workspace: scenegen::workspace_for(&spec),
        cloud: CloudSource::Scene(spec.clone()),
        robot: RobotRef {
            id: robot.into(),
            base_pose,
        },
        zones,
        params,
        seeds: Seeds {
            planner: seed,
            scene: None,
        },
    };
    Ok(Generated {
        spec,
        truth,
        cloud,
        scenario,
    })
}
