//! Binary occupancy map over a fixed voxel grid.
//!
//! Occupied keys live in a hash set; a second level groups them into
//! `CHUNK`-wide blocks so capsule queries only visit nearby voxels.

use std::collections::{HashMap, HashSet};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloudkit::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{point_segment_distance, Capsule};
use crate::scalar::Real;

pub type VoxelKey = [i64; 3];

/// Default voxel edge in meters.
pub const DEFAULT_RESOLUTION: f64 = 0.02;
/// Default minimum point count for a voxel to be occupied.
pub const DEFAULT_MIN_POINTS: usize = 1;

const CHUNK: i64 = 8;

fn chunk_of(k: &VoxelKey) -> VoxelKey {
    k.map(|v| v.div_euclid(CHUNK))
}

#[derive(Debug, Clone)]
pub struct OccupancyMap<T: Real = f64> {
    resolution: T,
    origin: Point3<T>,
    occupied: HashSet<VoxelKey>,
    chunks: HashMap<VoxelKey, Vec<VoxelKey>>,
    bounds: Option<(VoxelKey, VoxelKey)>,
}

/// Summary written into feasibility reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapStats {
    pub resolution: f64,
    pub origin: [f64; 3],
    pub voxel_count: usize,
    /// Inclusive min/max occupied key per axis; absent for an empty map.
    pub key_bounds: Option<(VoxelKey, VoxelKey)>,
}

impl<T: Real> OccupancyMap<T> {
    /// Builds the map with the origin at the cloud's minimum corner snapped
    /// down to a multiple of `resolution`.
    pub fn build(cloud: &PointCloud<T>, resolution: T, min_points: usize) -> Result<Self> {
        let origin = match cloud.bounds() {
            Some((lo, _)) => lo.map(|c| (c / resolution).floor() * resolution),
            None => Point3::origin(),
        };
        Self::build_with_origin(cloud, resolution, min_points, origin)
    }

    pub fn build_with_origin(
        cloud: &PointCloud<T>,
        resolution: T,
        min_points: usize,
        origin: Point3<T>,
    ) -> Result<Self> {
        if !(resolution > T::zero()) {
            return Err(Error::invalid("map resolution must be positive"));
        }
        if min_points == 0 {
            return Err(Error::invalid("min_points must be positive"));
        }
        let mut counts: HashMap<VoxelKey, usize> = HashMap::new();
        for p in &cloud.points {
            *counts
                .entry(crate::cloudkit::voxel_key(p, &origin, resolution))
                .or_default() += 1;
        }
        let keys = counts
            .into_iter()
            .filter(|(_, n)| *n >= min_points)
            .map(|(k, _)| k);
        Ok(Self::from_keys(resolution, origin, keys))
    }

    pub fn empty(resolution: T) -> Self {
        Self::from_keys(resolution, Point3::origin(), std::iter::empty())
    }

    pub fn from_keys(
        resolution: T,
        origin: Point3<T>,
        keys: impl IntoIterator<Item = VoxelKey>,
    ) -> Self {
        let occupied: HashSet<VoxelKey> = keys.into_iter().collect();
        let mut chunks: HashMap<VoxelKey, Vec<VoxelKey>> = HashMap::new();
        let mut bounds: Option<(VoxelKey, VoxelKey)> = None;
        for k in &occupied {
            chunks.entry(chunk_of(k)).or_default().push(*k);
            bounds = Some(match bounds {
                None => (*k, *k),
                Some((lo, hi)) => (
                    [lo[0].min(k[0]), lo[1].min(k[1]), lo[2].min(k[2])],
                    [hi[0].max(k[0]), hi[1].max(k[1]), hi[2].max(k[2])],
                ),
            });
        }
        for v in chunks.values_mut() {
            v.sort_unstable();
        }
        Self {
            resolution,
            origin,
            occupied,
            chunks,
            bounds,
        }
    }

    pub fn resolution(&self) -> T {
        self.resolution
    }

    pub fn origin(&self) -> Point3<T> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn bounds(&self) -> Option<(VoxelKey, VoxelKey)> {
        self.bounds
    }

    /// Occupied keys in sorted order.
    pub fn keys(&self) -> Vec<VoxelKey> {
        let mut k: Vec<_> = self.occupied.iter().copied().collect();
        k.sort_unstable();
        k
    }

    pub fn contains_key(&self, k: &VoxelKey) -> bool {
        self.occupied.contains(k)
    }

    pub fn key_of(&self, p: &Point3<T>) -> VoxelKey {
        crate::cloudkit::voxel_key(p, &self.origin, self.resolution)
    }

    pub fn voxel_center(&self, k: &VoxelKey) -> Point3<T> {
        let half = T::lit(0.5);
        Point3::new(
            self.origin.x + (T::lit(k[0] as f64) + half) * self.resolution,
            self.origin.y + (T::lit(k[1] as f64) + half) * self.resolution,
            self.origin.z + (T::lit(k[2] as f64) + half) * self.resolution,
        )
    }

    /// Lower and upper corner of a voxel cell.
    pub fn voxel_aabb(&self, k: &VoxelKey) -> (Point3<T>, Point3<T>) {
        let lo = Point3::new(
            self.origin.x + T::lit(k[0] as f64) * self.resolution,
            self.origin.y + T::lit(k[1] as f64) * self.resolution,
            self.origin.z + T::lit(k[2] as f64) * self.resolution,
        );
        (lo, lo + Vector3::repeat(self.resolution))
    }

    pub fn is_occupied(&self, p: &Point3<T>) -> bool {
        self.occupied.contains(&self.key_of(p))
    }

    /// Half the voxel diagonal, the inflation applied to capsule queries.
    pub fn inflation(&self) -> T {
        self.resolution * T::lit(3f64.sqrt() * 0.5)
    }

    /// `true` when no occupied voxel center lies within
    /// `radius + inflation()` of segment `ab`.
    pub fn capsule_free(&self, a: &Point3<T>, b: &Point3<T>, radius: T) -> bool {
        self.capsule_free_excluding(a, b, radius, &[])
    }

    /// As [`capsule_free`](Self::capsule_free), ignoring voxels whose center
    /// lies inside any capsule of `exclude`.
    pub fn capsule_free_excluding(
        &self,
        a: &Point3<T>,
        b: &Point3<T>,
        radius: T,
        exclude: &[Capsule<T>],
    ) -> bool {
        self.first_blocking(a, b, radius, exclude).is_none()
    }

    /// First (in key order within visited chunks) voxel blocking the capsule.
    pub fn first_blocking(
        &self,
        a: &Point3<T>,
        b: &Point3<T>,
        radius: T,
        exclude: &[Capsule<T>],
    ) -> Option<VoxelKey> {
        let (Some((blo, bhi)), true) = (self.bounds, radius >= T::zero()) else {
            return None;
        };
        let reach = radius + self.inflation();
        let lo = self.key_of(&(a.inf(b) - Vector3::repeat(reach)));
        let hi = self.key_of(&(a.sup(b) + Vector3::repeat(reach)));
        let lo = [lo[0].max(blo[0]), lo[1].max(blo[1]), lo[2].max(blo[2])];
        let hi = [hi[0].min(bhi[0]), hi[1].min(bhi[1]), hi[2].min(bhi[2])];
        if (0..3).any(|i| lo[i] > hi[i]) {
            return None;
        }
        let (clo, chi) = (chunk_of(&lo), chunk_of(&hi));
        // every voxel center of a chunk lies within this ball around its middle
        let chunk_ball = self.resolution * T::lit((CHUNK - 1) as f64 * 0.5 * 3f64.sqrt());
        let chunk_mid = |c: i64| T::lit((c * CHUNK) as f64 + CHUNK as f64 * 0.5) * self.resolution;
        for cx in clo[0]..=chi[0] {
            for cy in clo[1]..=chi[1] {
                for cz in clo[2]..=chi[2] {
                    let Some(keys) = self.chunks.get(&[cx, cy, cz]) else {
                        continue;
                    };
                    let mid = self.origin + Vector3::new(chunk_mid(cx), chunk_mid(cy), chunk_mid(cz));
                    if point_segment_distance(&mid, a, b) > reach + chunk_ball {
                        continue;
                    }
                    for k in keys {
                        if (0..3).any(|i| k[i] < lo[i] || k[i] > hi[i]) {
                            continue;
                        }
                        let c = self.voxel_center(k);
                        if point_segment_distance(&c, a, b) <= reach
                            && !exclude.iter().any(|e| e.contains(&c))
                        {
                            return Some(*k);
                        }
                    }
                }
            }
        }
        None
    }

    pub fn stats(&self) -> MapStats {
        MapStats {
            resolution: self.resolution.as_f64(),
            origin: [
                self.origin.x.as_f64(),
                self.origin.y.as_f64(),
                self.origin.z.as_f64(),
            ],
            voxel_count: self.len(),
            key_bounds: self.bounds,
        }
    }
}
