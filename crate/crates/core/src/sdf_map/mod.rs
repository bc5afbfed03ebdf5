//! Dense Euclidean signed distance fields.
//!
//! Free space is positive, the interior of solids is negative. Values are
//! stored at voxel centers and interpolated trilinearly in between, so the
//! queryable region is the box spanned by the outermost voxel centers.

mod cache;
mod heightmap;
mod scene;

pub use cache::{read_map, write_map, CACHE_MAGIC, CACHE_VERSION};
pub use heightmap::Heightmap;
pub use scene::{ConvexPolytope, Rise, SdfPrimitive, TerrainScene};

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};

/// Voxel size used throughout the evaluation setups.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.05;

/// Largest grid a builder will allocate unless told otherwise.
pub const DEFAULT_VOXEL_CAP: usize = 40_000_000;

/// Gradients whose finite-difference norm falls below this are reported as
/// degenerate (medial axis, flat extrema).
pub const GRADIENT_DEGENERACY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("point ({0}, {1}, {2}) lies outside the interpolation bounds")]
    OutOfBounds(f64, f64, f64),
    #[error("gradient is degenerate (norm {0:.3e})")]
    DegenerateGradient(f64),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid height grid: {0}")]
    InvalidGrid(String),
    #[error("grid of {voxels} voxels exceeds the cap of {cap}")]
    ExcessiveGrid { voxels: usize, cap: usize },
    #[error("invalid map layout: {0}")]
    InvalidLayout(String),
    #[error("map cache: {0}")]
    Cache(String),
}

/// Axis-aligned box, `min <= max` component-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T: Real> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Bounds<T> {
    pub fn new(min: Point3<T>, max: Point3<T>) -> Self {
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|i| !(self.max[i] > self.min[i]))
    }

    pub fn center(&self) -> Point3<T> {
        nalgebra::center(&self.min, &self.max)
    }
}

/// Options for the grid builders.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions<T: Real> {
    pub voxel_size: T,
    pub max_voxels: usize,
}

impl<T: Real> Default for BuildOptions<T> {
    fn default() -> Self {
        Self {
            voxel_size: lit(DEFAULT_VOXEL_SIZE),
            max_voxels: DEFAULT_VOXEL_CAP,
        }
    }
}

impl<T: Real> BuildOptions<T> {
    pub fn with_voxel_size(voxel_size: T) -> Self {
        Self {
            voxel_size,
            ..Self::default()
        }
    }
}

/// Fractional voxel offsets closer than this to an integer are snapped.
const CENTER_SNAP: f64 = 1e-9;

/// Exact at both ends, unlike `a + (b - a) * t`.
#[inline]
fn lerp<T: Real>(a: T, b: T, t: T) -> T {
    a * (T::one() - t) + b * t
}

/// Dense voxel grid of signed distances.
///
/// Voxel `(i, j, k)` has its center at `origin + voxel_size * (i, j, k)`;
/// storage is x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct EsdfMap<T: Real> {
    origin: Point3<T>,
    voxel_size: T,
    dims: [usize; 3],
    distances: Vec<T>,
}

impl<T: Real> EsdfMap<T> {
    pub fn from_raw(
        origin: Point3<T>,
        voxel_size: T,
        dims: [usize; 3],
        distances: Vec<T>,
    ) -> Result<Self, MapError> {
        if !(voxel_size > T::zero()) {
            return Err(MapError::InvalidLayout(format!(
                "voxel size {} must be positive",
                to_f64(voxel_size)
            )));
        }
        if dims.iter().any(|&n| n < 2) {
            return Err(MapError::InvalidLayout(format!(
                "dims {dims:?} must be >= 2 on every axis"
            )));
        }
        let n = dims[0] * dims[1] * dims[2];
        if distances.len() != n {
            return Err(MapError::InvalidLayout(format!(
                "expected {n} distances, got {}",
                distances.len()
            )));
        }
        if distances.iter().any(|d| !d.is_finite()) {
            return Err(MapError::InvalidLayout("non-finite distance".into()));
        }
        Ok(Self {
            origin,
            voxel_size,
            dims,
            distances,
        })
    }

    /// Samples `field` at every voxel center covering `bounds`.
    ///
    /// The first voxel center sits at `bounds.min`; the grid extends until the
    /// last center that still fits inside `bounds.max`.
    pub fn from_fn<F>(
        bounds: &Bounds<T>,
        options: &BuildOptions<T>,
        field: F,
    ) -> Result<Self, MapError>
    where
        F: Fn(&Point3<T>) -> T,
    {
        let dims = grid_dims(bounds, options)?;
        let origin = bounds.min;
        let h = options.voxel_size;
        let (nx, ny) = (dims[0], dims[1]);
        let mut distances = vec![T::zero(); dims[0] * dims[1] * dims[2]];
        for (idx, d) in distances.iter_mut().enumerate() {
            let i = idx % nx;
            let j = (idx / nx) % ny;
            let k = idx / (nx * ny);
            let p = origin + Vector3::new(lit::<T>(i as f64), lit(j as f64), lit(k as f64)) * h;
            *d = field(&p);
        }
        Self::from_raw(origin, h, dims, distances)
    }

    pub fn origin(&self) -> Point3<T> {
        self.origin
    }

    pub fn voxel_size(&self) -> T {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn distances(&self) -> &[T] {
        &self.distances
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> T {
        self.distances[self.index(i, j, k)]
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point3<T> {
        self.origin
            + Vector3::new(lit::<T>(i as f64), lit(j as f64), lit(k as f64)) * self.voxel_size
    }

    /// Interpolation bounds: the hull of all voxel centers.
    pub fn bounds(&self) -> Bounds<T> {
        let far = self.voxel_center(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1);
        Bounds::new(self.origin, far)
    }

    pub fn contains(&self, p: &Point3<T>) -> bool {
        self.cell_of(p).is_some()
    }

    /// Trilinearly interpolated signed distance at `p`.
    pub fn distance(&self, p: &Point3<T>) -> Result<T, MapError> {
        self.try_distance(p)
            .ok_or_else(|| MapError::OutOfBounds(to_f64(p.x), to_f64(p.y), to_f64(p.z)))
    }

    /// Like [`EsdfMap::distance`] but `None` outside the interpolation bounds.
    #[inline]
    pub fn try_distance(&self, p: &Point3<T>) -> Option<T> {
        let ([i, j, k], [fx, fy, fz]) = self.cell_of(p)?;
        let nx = self.dims[0];
        let nxy = nx * self.dims[1];
        let base = i + nx * j + nxy * k;
        let d = &self.distances;
        let c000 = d[base];
        let c100 = d[base + 1];
        let c010 = d[base + nx];
        let c110 = d[base + nx + 1];
        let c001 = d[base + nxy];
        let c101 = d[base + nxy + 1];
        let c011 = d[base + nxy + nx];
        let c111 = d[base + nxy + nx + 1];
        let c00 = lerp(c000, c100, fx);
        let c10 = lerp(c010, c110, fx);
        let c01 = lerp(c001, c101, fx);
        let c11 = lerp(c011, c111, fx);
        let c0 = lerp(c00, c10, fy);
        let c1 = lerp(c01, c11, fy);
        Some(lerp(c0, c1, fz))
    }

    /// Cell index (lower corner) and fractional offsets of `p`.
    #[inline]
    fn cell_of(&self, p: &Point3<T>) -> Option<([usize; 3], [T; 3])> {
        let mut cell = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for axis in 0..3 {
            let mut u = (p[axis] - self.origin[axis]) / self.voxel_size;
            // Voxel centers recomputed from their index land within rounding
            // of an integer; snap so they reproduce the stored value.
            let nearest = u.round();
            if (u - nearest).abs() < lit(CENTER_SNAP) {
                u = nearest;
            }
            let last = lit::<T>((self.dims[axis] - 1) as f64);
            // NaN fails both comparisons and is rejected here.
            if !(u >= T::zero() && u <= last) {
                return None;
            }
            let fl = u.floor();
            let mut idx = to_f64(fl) as usize;
            if idx >= self.dims[axis] - 1 {
                idx = self.dims[axis] - 2;
            }
            cell[axis] = idx;
            frac[axis] = u - lit(idx as f64);
        }
        Some((cell, frac))
    }

    /// Raw central-difference gradient with step `voxel_size / 2`.
    pub fn raw_gradient(&self, p: &Point3<T>) -> Result<Vector3<T>, MapError> {
        let s = self.voxel_size * lit(0.5);
        let mut g = Vector3::zeros();
        for axis in 0..3 {
            let mut e = Vector3::zeros();
            e[axis] = s;
            let hi = self.distance(&(p + e))?;
            let lo = self.distance(&(p - e))?;
            g[axis] = (hi - lo) / (s + s);
        }
        Ok(g)
    }

    /// Unit surface-normal estimate at `p`.
    pub fn gradient(&self, p: &Point3<T>) -> Result<Vector3<T>, MapError> {
        let g = self.raw_gradient(p)?;
        let n = g.norm();
        if n < lit(GRADIENT_DEGENERACY_THRESHOLD) {
            return Err(MapError::DegenerateGradient(to_f64(n)));
        }
        Ok(g / n)
    }

    /// Converts the stored field to another scalar type.
    pub fn cast<U: Real>(&self) -> EsdfMap<U> {
        EsdfMap {
            origin: self.origin.map(|v| lit(to_f64(v))),
            voxel_size: lit(to_f64(self.voxel_size)),
            dims: self.dims,
            distances: self.distances.iter().map(|&v| lit(to_f64(v))).collect(),
        }
    }
}

pub(crate) fn grid_dims<T: Real>(
    bounds: &Bounds<T>,
    options: &BuildOptions<T>,
) -> Result<[usize; 3], MapError> {
    if bounds.is_degenerate() {
        return Err(MapError::InvalidLayout("degenerate bounds".into()));
    }
    if !(options.voxel_size > T::zero()) {
        return Err(MapError::InvalidLayout(
            "voxel size must be positive".into(),
        ));
    }
    let mut dims = [0usize; 3];
    let mut total: f64 = 1.0;
    for axis in 0..3 {
        let span = to_f64((bounds.max[axis] - bounds.min[axis]) / options.voxel_size);
        let n = (span + 1e-9).floor() + 1.0;
        total *= n;
        dims[axis] = n.max(2.0) as usize;
    }
    if total > options.max_voxels as f64 {
        return Err(MapError::ExcessiveGrid {
            voxels: total as usize,
            cap: options.max_voxels,
        });
    }
    Ok(dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_bounds() -> Bounds<f64> {
        Bounds::new(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5))
    }

    fn plane_map() -> EsdfMap<f64> {
        EsdfMap::from_fn(&unit_bounds(), &BuildOptions::default(), |p| p.z).unwrap()
    }

    #[test]
    fn plane_distance_is_height() {
        let map = plane_map();
        assert_eq!(map.dims(), [21, 21, 21]);
        assert_relative_eq!(
            map.distance(&Point3::new(0.2, 0.3, 0.45)).unwrap(),
            0.45,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            map.distance(&Point3::new(0.013, -0.31, 0.017)).unwrap(),
            0.017,
            epsilon = 1e-12
        );
    }

    #[test]
    fn voxel_centers_reproduce_stored_values() {
        let map = EsdfMap::from_fn(&unit_bounds(), &BuildOptions::default(), |p| {
            p.x * p.y + p.z
        })
        .unwrap();
        for (i, j, k) in [(0, 0, 0), (20, 20, 20), (3, 7, 11), (20, 0, 5)] {
            let c = map.voxel_center(i, j, k);
            assert_eq!(map.distance(&c).unwrap(), map.value(i, j, k));
        }
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let map = plane_map();
        assert!(matches!(
            map.distance(&Point3::new(0.0, 0.0, 0.51)),
            Err(MapError::OutOfBounds(..))
        ));
        assert!(map.try_distance(&Point3::new(f64::NAN, 0.0, 0.0)).is_none());
        assert!(map.distance(&Point3::new(0.5, 0.5, 0.5)).is_ok());
    }

    #[test]
    fn plane_gradient_points_up() {
        let map = plane_map();
        let g = map.gradient(&Point3::new(0.1, -0.2, 0.3)).unwrap();
        assert!((g - Vector3::z()).norm() < 1e-6);
    }

    #[test]
    fn medial_axis_gradient_is_degenerate() {
        // Walls at z = -0.4 and z = 0.4; the midplane is equidistant.
        let map = EsdfMap::from_fn(&unit_bounds(), &BuildOptions::default(), |p| {
            (p.z + 0.4).min(0.4 - p.z)
        })
        .unwrap();
        assert!(matches!(
            map.gradient(&Point3::new(0.0, 0.0, 0.0)),
            Err(MapError::DegenerateGradient(_))
        ));
    }

    #[test]
    fn rejects_bad_layouts() {
        let o = Point3::origin();
        assert!(EsdfMap::<f64>::from_raw(o, 0.0, [2, 2, 2], vec![0.0; 8]).is_err());
        assert!(EsdfMap::<f64>::from_raw(o, 0.1, [1, 2, 2], vec![0.0; 4]).is_err());
        assert!(EsdfMap::<f64>::from_raw(o, 0.1, [2, 2, 2], vec![0.0; 7]).is_err());
        let opts = BuildOptions {
            voxel_size: 0.05,
            max_voxels: 100,
        };
        assert!(matches!(
            EsdfMap::from_fn(&unit_bounds(), &opts, |p| p.z),
            Err(MapError::ExcessiveGrid { .. })
        ));
    }

    #[test]
    fn single_precision_queries() {
        let b = Bounds::new(Point3::new(-0.5f32, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
        let map = EsdfMap::from_fn(&b, &BuildOptions::default(), |p| p.z).unwrap();
        assert!((map.distance(&Point3::new(0.1, 0.1, 0.25)).unwrap() - 0.25).abs() < 1e-5);
    }
}
