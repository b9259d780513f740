use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{Cone, OrientedBox, PointCloud, Primitive, DEFAULT_OUTLIER_ALPHA, DEFAULT_OUTLIER_K};
use crate::error::{Error, Result};
use crate::scalar::Real;

fn default_k() -> usize {
    DEFAULT_OUTLIER_K
}

fn default_alpha<T: Real>() -> T {
    T::lit(DEFAULT_OUTLIER_ALPHA)
}

/// One toolbox edit, as sent over the wire or on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", bound = "")]
pub enum ToolOp<T: Real = f64> {
    /// Crop to `bbox`, or to the session workspace when absent.
    Crop {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<OrientedBox<T>>,
    },
    RemoveOutliers {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_alpha")]
        alpha: T,
    },
    Downsample {
        leaf: T,
    },
    EraseCone {
        #[serde(flatten)]
        cone: Cone<T>,
    },
    EraseSphere {
        center: Point3<T>,
        radius: T,
    },
    AddPrimitive {
        primitive: Primitive<T>,
        /// Samples per square meter.
        density: T,
    },
}

/// Point counts before and after an edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSummary {
    pub points_before: usize,
    pub points_after: usize,
}

impl<T: Real> ToolOp<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ToolOp::Crop { .. } => "crop",
            ToolOp::RemoveOutliers { .. } => "remove_outliers",
            ToolOp::Downsample { .. } => "downsample",
            ToolOp::EraseCone { .. } => "erase_cone",
            ToolOp::EraseSphere { .. } => "erase_sphere",
            ToolOp::AddPrimitive { .. } => "add_primitive",
        }
    }

    /// Apply to `cloud`; `workspace` fills in a crop without its own box.
    pub fn apply(
        &self,
        cloud: &PointCloud<T>,
        workspace: Option<&OrientedBox<T>>,
    ) -> Result<(PointCloud<T>, ToolSummary)> {
        let out = match self {
            ToolOp::Crop { bbox } => {
                let b = bbox
                    .as_ref()
                    .or(workspace)
                    .ok_or_else(|| Error::invalid("crop needs a box or a workspace"))?;
                b.validate()?;
                cloud.crop(b)
            }
            ToolOp::RemoveOutliers { k, alpha } => cloud.remove_outliers(*k, *alpha)?.0,
            ToolOp::Downsample { leaf } => cloud.downsample(*leaf)?,
            ToolOp::EraseCone { cone } => {
                cone.validate()?;
                cloud.erase_cone(cone)
            }
            ToolOp::EraseSphere { center, radius } => cloud.erase_sphere(center, *radius)?,
            ToolOp::AddPrimitive { primitive, density } => cloud.add_primitive(primitive, *density)?,
        };
        let summary = ToolSummary {
            points_before: cloud.len(),
            points_after: out.len(),
        };
        Ok((out, summary))
    }
}
