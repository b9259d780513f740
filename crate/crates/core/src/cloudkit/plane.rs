use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Plane `normal · p = offset` with the indices of its inliers.
///
/// The normal sign is canonical: its first non-negligible component along
/// `z`, then `x`, then `y` is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlaneFit<T: Real = f64> {
    pub normal: Vector3<T>,
    pub offset: T,
    pub inliers: Vec<usize>,
}

impl<T: Real> PlaneFit<T> {
    pub fn distance(&self, p: &Point3<T>) -> T {
        (self.normal.dot(&p.coords) - self.offset).abs()
    }
}

fn canonical<T: Real>(n: Vector3<T>) -> Vector3<T> {
    let eps = T::lit(1e-12);
    for axis in [2, 0, 1] {
        if n[axis].abs() > eps {
            return if n[axis] < T::zero() { -n } else { n };
        }
    }
    n
}

fn inliers<T: Real>(points: &[Point3<T>], normal: &Vector3<T>, offset: T, tol: T) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| (normal.dot(&p.coords) - offset).abs() <= tol)
        .map(|(i, _)| i)
        .collect()
}

/// Total-least-squares plane through `idx`.
fn refit<T: Real>(points: &[Point3<T>], idx: &[usize]) -> Option<(Vector3<T>, T)> {
    if idx.len() < 3 {
        return None;
    }
    let n = T::from_count(idx.len());
    let centroid = idx
        .iter()
        .fold(Vector3::zeros(), |acc, &i| acc + points[i].coords)
        / n;
    let cov = idx.iter().fold(Matrix3::zeros(), |acc, &i| {
        let d = points[i].coords - centroid;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov);
    let (min_i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))?;
    let normal = canonical(eig.eigenvectors.column(min_i).into_owned().normalize());
    if !normal.iter().all(|c| c.is_finite()) {
        return None;
    }
    Some((normal, normal.dot(&centroid)))
}

pub(super) fn fit_plane<T: Real>(
    points: &[Point3<T>],
    tol: T,
    max_iters: usize,
    seed: u64,
) -> Result<PlaneFit<T>> {
    if points.len() < 3 {
        return Err(Error::DegenerateCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut best: Option<(Vector3<T>, T, Vec<usize>)> = None;
    let scale = points
        .iter()
        .map(|p| p.coords.norm())
        .fold(T::one(), |a, b| a.max(b));
    let collinear_eps = T::lit(1e-10) * scale * scale;

    for _ in 0..max_iters.max(1) {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let cross = (points[j] - points[i]).cross(&(points[k] - points[i]));
        if cross.norm() <= collinear_eps {
            continue;
        }
        let normal = canonical(cross.normalize());
        let offset = normal.dot(&points[i].coords);
        let idx = inliers(points, &normal, offset, tol);
        if best.as_ref().is_none_or(|b| idx.len() > b.2.len()) {
            best = Some((normal, offset, idx));
        }
        if best.as_ref().is_some_and(|b| b.2.len() == n) {
            break;
        }
    }
    let (mut normal, mut offset, mut idx) = best.ok_or(Error::DegenerateCloud)?;
    if let Some((rn, ro)) = refit(points, &idx) {
        let ridx = inliers(points, &rn, ro, tol);
        if ridx.len() >= idx.len() {
            normal = rn;
            offset = ro;
            idx = ridx;
        }
    }
    Ok(PlaneFit {
        normal,
        offset,
        inliers: idx,
    })
}
