//! Feasibility sessions: the editable scene state with undo history, and
//! the end-to-end analysis that turns it into a report.

mod analyze;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::armkin::{IkParams, RobotModel};
use crate::cloudkit::{OrientedBox, PointCloud, ToolOp, ToolSummary};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::pathfind::PlannerParams;
use crate::scalar::Real;
use crate::voxmap::{DEFAULT_MIN_POINTS, DEFAULT_RESOLUTION};
use crate::zonekit::InteractionZone;

pub use analyze::{
    analyze, grade_scan, quick_reach_check, FeasibilityReport, Timings, ZoneStatus, ZoneVerdict,
};

/// A catalog robot at a world pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RobotPlacement<T: Real = f64> {
    pub model: RobotModel<T>,
    pub base_pose: Pose<T>,
}

/// Everything one undo step restores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SessionState<T: Real = f64> {
    pub workspace: OrientedBox<T>,
    pub cloud: Arc<PointCloud<T>>,
    pub robot: Option<RobotPlacement<T>>,
    pub zones: Vec<InteractionZone<T>>,
}

/// Knobs of the analysis pipeline. Not part of the undo history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisParams {
    pub planner: PlannerParams,
    pub ik: IkParams,
    pub goal_poses: usize,
    pub ik_restarts: usize,
    pub voxel_resolution: f64,
    pub min_points_per_voxel: usize,
    /// When set, zones failing the reach-sphere check are skipped.
    pub quick_check_gate: bool,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            planner: PlannerParams::default(),
            ik: IkParams::default(),
            goal_poses: 10,
            ik_restarts: 8,
            voxel_resolution: DEFAULT_RESOLUTION,
            min_points_per_voxel: DEFAULT_MIN_POINTS,
            quick_check_gate: false,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.ik.validate()?;
        if self.goal_poses == 0 || self.ik_restarts == 0 {
            return Err(Error::invalid("goal_poses and ik_restarts must be at least 1"));
        }
        if !(self.voxel_resolution > 0.0) {
            return Err(Error::invalid("voxel resolution must be positive"));
        }
        if self.min_points_per_voxel == 0 {
            return Err(Error::invalid("min_points_per_voxel must be at least 1"));
        }
        Ok(())
    }
}

/// Current state plus the ordered snapshots it came from. The last snapshot
/// always equals the current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Session<T: Real = f64> {
    pub params: AnalysisParams,
    history: Vec<SessionState<T>>,
}

impl<T: Real> Session<T> {
    pub fn new(workspace: OrientedBox<T>, cloud: PointCloud<T>) -> Result<Self> {
        workspace.validate()?;
        cloud.validate()?;
        let state = SessionState {
            workspace,
            cloud: Arc::new(cloud),
            robot: None,
            zones: Vec::new(),
        };
        Ok(Self {
            params: AnalysisParams::default(),
            history: vec![state],
        })
    }

    /// Rebuild from stored snapshots.
    pub fn from_history(params: AnalysisParams, history: Vec<SessionState<T>>) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::invalid("session history must not be empty"));
        }
        Ok(Self { params, history })
    }

    pub fn state(&self) -> &SessionState<T> {
        self.history.last().expect("history is never empty")
    }

    pub fn history(&self) -> &[SessionState<T>] {
        &self.history
    }

    pub fn snapshot_count(&self) -> usize {
        self.history.len()
    }

    /// Apply `f` to a copy of the current state and append it as a new
    /// snapshot. Nothing changes if `f` fails.
    pub fn edit<R>(&mut self, f: impl FnOnce(&mut SessionState<T>) -> Result<R>) -> Result<R> {
        let mut next = self.state().clone();
        let r = f(&mut next)?;
        self.history.push(next);
        Ok(r)
    }

    /// Explicit snapshot of the unchanged state.
    pub fn snapshot(&mut self) {
        let s = self.state().clone();
        self.history.push(s);
    }

    pub fn undo(&mut self) -> Result<&SessionState<T>> {
        if self.history.len() < 2 {
            return Err(Error::NothingToUndo);
        }
        self.history.pop();
        Ok(self.state())
    }

    pub fn set_cloud(&mut self, cloud: PointCloud<T>) -> Result<()> {
        cloud.validate()?;
        self.edit(|s| {
            s.cloud = Arc::new(cloud);
            Ok(())
        })
    }

    pub fn set_workspace(&mut self, workspace: OrientedBox<T>) -> Result<()> {
        workspace.validate()?;
        self.edit(|s| {
            s.workspace = workspace;
            Ok(())
        })
    }

    pub fn apply_tool(&mut self, op: &ToolOp<T>) -> Result<ToolSummary> {
        self.edit(|s| {
            let (cloud, summary) = op.apply(&s.cloud, Some(&s.workspace))?;
            s.cloud = Arc::new(cloud);
            Ok(summary)
        })
    }

    pub fn place_robot(&mut self, model: RobotModel<T>, base_pose: Pose<T>) -> Result<()> {
        model.validate()?;
        base_pose.validate()?;
        self.edit(|s| {
            s.robot = Some(RobotPlacement { model, base_pose });
            Ok(())
        })
    }

    pub fn add_zone(&mut self, zone: InteractionZone<T>) -> Result<()> {
        zone.validate()?;
        self.edit(|s| {
            if s.zones.iter().any(|z| z.id == zone.id) {
                return Err(Error::invalid(format!("zone id `{}` already exists", zone.id)));
            }
            s.zones.push(zone);
            Ok(())
        })
    }

    pub fn remove_zone(&mut self, id: &str) -> Result<InteractionZone<T>> {
        self.edit(|s| {
            let i = s
                .zones
                .iter()
                .position(|z| z.id == id)
                .ok_or_else(|| Error::invalid(format!("no zone `{id}`")))?;
            Ok(s.zones.remove(i))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armkin::catalog::Catalog;
    use nalgebra::{Point3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn session() -> Session {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = (0..300)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..0.5)))
            .collect();
        let ws = OrientedBox::new(Pose::identity(), Vector3::new(0.8, 0.8, 0.8)).unwrap();
        Session::new(ws, PointCloud::new(pts).unwrap()).unwrap()
    }

    #[test]
    fn snapshot_undo_round_trip() {
        let mut s = session();
        assert_eq!(s.undo().unwrap_err(), Error::NothingToUndo);
        let before = serde_json::to_string(s.state()).unwrap();
        s.snapshot();
        s.undo().unwrap();
        assert_eq!(serde_json::to_string(s.state()).unwrap(), before);
    }

    #[test]
    fn edits_and_undos_restore_initial_state() {
        let mut s = session();
        let initial = serde_json::to_string(s.state()).unwrap();
        let medium = Catalog::builtin().get("medium").unwrap().clone();
        s.apply_tool(&ToolOp::Crop { bbox: None }).unwrap();
        s.apply_tool(&ToolOp::Downsample { leaf: 0.1 }).unwrap();
        s.place_robot(medium, Pose::identity()).unwrap();
        s.add_zone(
            InteractionZone::new("z", vec![Point3::new(0.3, 0.0, 0.0)], -Vector3::z(), 0.26, 0.0).unwrap(),
        )
        .unwrap();
        s.apply_tool(&ToolOp::EraseSphere {
            center: Point3::new(0.0, 0.0, 0.2),
            radius: 0.3,
        })
        .unwrap();
        assert_eq!(s.snapshot_count(), 6);
        for _ in 0..5 {
            s.undo().unwrap();
        }
        assert_eq!(serde_json::to_string(s.state()).unwrap(), initial);
    }

    #[test]
    fn failed_edit_leaves_history_alone() {
        let mut s = session();
        assert!(s.apply_tool(&ToolOp::Downsample { leaf: -1.0 }).is_err());
        assert!(s.remove_zone("nope").is_err());
        assert_eq!(s.snapshot_count(), 1);
    }
}
