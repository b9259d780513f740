//! Reachability feasibility engine for robot workcells: point-cloud
//! processing, occupancy mapping, arm kinematics, collision checking,
//! interaction zones, joint-space planning and the end-to-end analysis.
//!
//! Geometry and kinematics are generic over [`scalar::Real`] (`f32` or
//! `f64`); the aliases below name the two concrete instantiations.

pub mod armkin;
pub mod cloudkit;
pub mod colcheck;
pub mod error;
pub mod feastool;
pub mod geom;
pub mod pathfind;
pub mod scalar;
pub mod scenegen;
pub mod voxmap;
pub mod zonekit;

pub use error::{Error, Result};

pub type PointCloudF32 = cloudkit::PointCloud<f32>;
pub type PointCloudF64 = cloudkit::PointCloud<f64>;
pub type PoseF32 = geom::Pose<f32>;
pub type PoseF64 = geom::Pose<f64>;
pub type RobotModelF32 = armkin::RobotModel<f32>;
pub type RobotModelF64 = armkin::RobotModel<f64>;
pub type JointConfigF32 = armkin::JointConfig<f32>;
pub type JointConfigF64 = armkin::JointConfig<f64>;
pub type OccupancyMapF32 = voxmap::OccupancyMap<f32>;
pub type OccupancyMapF64 = voxmap::OccupancyMap<f64>;
pub type SessionF32 = feastool::Session<f32>;
pub type SessionF64 = feastool::Session<f64>;
pub type FeasibilityReportF64 = feastool::FeasibilityReport<f64>;
