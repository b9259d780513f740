use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalysisParams, RobotPlacement, Session};
use crate::armkin::{sample_ik, within_reach_sphere, JointConfig, RobotModel};
use crate::colcheck::ValidityChecker;
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::pathfind::{plan, smooth, JointPath, PlannerParams};
use crate::scalar::Real;
use crate::voxmap::{MapStats, OccupancyMap};
use crate::zonekit::{sample_goal_poses, InteractionZone};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ZoneStatus {
    ReachableWithPath,
    ReachableNoPath,
    Unreachable,
    SkippedQuickCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ZoneVerdict<T: Real = f64> {
    pub zone_id: String,
    pub status: ZoneStatus,
    /// Joint path from the home configuration, radians.
    pub path: Option<JointPath<T>>,
    /// Flange goal that the path ends at, world frame.
    pub goal_pose_used: Option<Pose<T>>,
    pub ik_solutions_found: usize,
    pub quick_check_passed: bool,
    /// Seed for goal sampling, IK restarts and the planner of this zone.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Wall-clock seconds; kept out of the serialized report.
    #[serde(skip)]
    pub plan_time: f64,
}

/// Wall-clock figures, written next to the report rather than inside it so
/// reports stay byte-identical across runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_s: f64,
    pub zones_s: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeasibilityReport<T: Real = f64> {
    pub report_version: u32,
    pub overall_feasible: bool,
    pub scan_grade: u8,
    pub zones: Vec<ZoneVerdict<T>>,
    pub robot: String,
    pub base_pose: Pose<T>,
    pub home: JointConfig<T>,
    pub cloud_points_in_workspace: usize,
    pub map: MapStats,
    pub params: AnalysisParams,
    #[serde(skip)]
    pub total_time: f64,
}

impl<T: Real> FeasibilityReport<T> {
    pub fn timings(&self) -> Timings {
        Timings {
            total_s: self.total_time,
            zones_s: self
                .zones
                .iter()
                .map(|z| (z.zone_id.clone(), z.plan_time))
                .collect(),
        }
    }

    pub fn verdict(&self, zone_id: &str) -> Option<&ZoneVerdict<T>> {
        self.zones.iter().find(|z| z.zone_id == zone_id)
    }
}

/// Advisory: shoulder point within `reach_radius` of the nearest marked point.
pub fn quick_reach_check<T: Real>(robot: &RobotModel<T>, base_pose: &Pose<T>, zone: &InteractionZone<T>) -> bool {
    within_reach_sphere(robot, base_pose, &zone.marked_points)
}

/// 2 when feasible, 1 when some zone had IK solutions, else 0.
pub fn grade_scan<T: Real>(report: &FeasibilityReport<T>) -> u8 {
    grade(report.overall_feasible, &report.zones)
}

fn grade<T: Real>(feasible: bool, zones: &[ZoneVerdict<T>]) -> u8 {
    if feasible {
        2
    } else if zones.iter().any(|z| z.ik_solutions_found > 0) {
        1
    } else {
        0
    }
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-zone seed derived from the session seed and the zone position.
pub fn zone_seed(base: u64, index: usize) -> u64 {
    mix(base ^ mix(index as u64 + 1))
}

struct Context<'a, T: Real> {
    placement: &'a RobotPlacement<T>,
    checker: ValidityChecker<'a, T>,
    home: JointConfig<T>,
    params: &'a AnalysisParams,
    cancel: Option<&'a AtomicBool>,
}

fn analyze_zone<T: Real>(ctx: &Context<'_, T>, index: usize, zone: &InteractionZone<T>) -> Result<ZoneVerdict<T>> {
    if ctx.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
        return Err(Error::Cancelled);
    }
    let started = Instant::now();
    let model = &ctx.placement.model;
    let to_base = ctx.placement.base_pose.inverse();
    let local = zone.transformed(&to_base);
    let seed = zone_seed(ctx.params.planner.rng_seed, index);
    let quick = quick_reach_check(model, &Pose::identity(), &local);
    let mut verdict = ZoneVerdict {
        zone_id: zone.id.clone(),
        status: ZoneStatus::Unreachable,
        path: None,
        goal_pose_used: None,
        ik_solutions_found: 0,
        quick_check_passed: quick,
        seed,
        detail: None,
        plan_time: 0.0,
    };
    if !quick && ctx.params.quick_check_gate {
        verdict.status = ZoneStatus::SkippedQuickCheck;
        verdict.plan_time = started.elapsed().as_secs_f64();
        return Ok(verdict);
    }

    let poses = sample_goal_poses(&local, ctx.params.goal_poses, seed);
    let ik_params = ctx.params.ik.cast::<T>();
    let mut goals = Vec::new();
    let mut goal_pose = Vec::new();
    for (k, pose) in poses.iter().enumerate() {
        for q in sample_ik(model, pose, ctx.params.ik_restarts, mix(seed ^ k as u64), &ik_params) {
            goals.push(q);
            goal_pose.push(k);
        }
    }
    verdict.ik_solutions_found = goals.len();
    if goals.is_empty() {
        verdict.detail = Some("no IK solution for any sampled goal pose".into());
        verdict.plan_time = started.elapsed().as_secs_f64();
        return Ok(verdict);
    }

    let planner = PlannerParams {
        rng_seed: seed,
        ..ctx.params.planner
    };
    match plan(&ctx.checker, &ctx.home, &goals, &planner, ctx.cancel) {
        Ok(raw) => {
            let path = smooth(&ctx.checker, &raw, &planner);
            let j = goals
                .iter()
                .position(|g| g == path.end())
                .expect("planner ends on a goal");
            let world = ctx.placement.base_pose.compose(&poses[goal_pose[j]]);
            verdict.status = ZoneStatus::ReachableWithPath;
            verdict.goal_pose_used = Some(world);
            verdict.path = Some(path);
        }
        Err(Error::Cancelled) => return Err(Error::Cancelled),
        Err(e @ (Error::NoPath | Error::NoValidGoal)) => {
            verdict.status = ZoneStatus::ReachableNoPath;
            verdict.detail = Some(match e {
                Error::NoValidGoal => "every IK solution is in collision or singular".into(),
                _ => "planning budget exhausted".into(),
            });
        }
        Err(Error::InvalidStart) => {
            verdict.status = ZoneStatus::ReachableNoPath;
            verdict.detail = Some(format!(
                "home configuration invalid: {:?}",
                ctx.checker.violation(&ctx.home)
            ));
        }
        Err(e) => return Err(e),
    }
    verdict.plan_time = started.elapsed().as_secs_f64();
    Ok(verdict)
}

/// Crop, voxelize in the robot base frame, then per zone sample goals, solve
/// IK and plan from home. Zones run in parallel; the result does not depend
/// on scheduling.
pub fn analyze<T: Real>(session: &Session<T>, cancel: Option<&AtomicBool>) -> Result<FeasibilityReport<T>> {
    let started = Instant::now();
    let params = &session.params;
    params.validate()?;
    let state = session.state();
    if state.zones.is_empty() {
        return Err(Error::NoZones);
    }
    let placement = state.robot.as_ref().ok_or(Error::RobotNotPlaced)?;

    let cropped = state.cloud.crop(&state.workspace);
    let local = cropped.transformed(&placement.base_pose.inverse());
    let res = T::lit(params.voxel_resolution);
    let map = if local.is_empty() {
        OccupancyMap::empty(res)
    } else {
        OccupancyMap::build(&local, res, params.min_points_per_voxel)?
    };
    let ctx = Context {
        placement,
        checker: ValidityChecker::new(&placement.model, &map),
        home: placement.model.home_config(),
        params,
        cancel,
    };
    let zones = state
        .zones
        .par_iter()
        .enumerate()
        .map(|(i, z)| analyze_zone(&ctx, i, z))
        .collect::<Result<Vec<_>>>()?;

    let overall = zones.iter().all(|z| z.status == ZoneStatus::ReachableWithPath);
    Ok(FeasibilityReport {
        report_version: REPORT_VERSION,
        overall_feasible: overall,
        scan_grade: grade(overall, &zones),
        zones,
        robot: placement.model.name.clone(),
        base_pose: placement.base_pose,
        home: ctx.home.clone(),
        cloud_points_in_workspace: cropped.len(),
        map: map.stats(),
        params: *params,
        total_time: started.elapsed().as_secs_f64(),
    })
}
