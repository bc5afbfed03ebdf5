//! Heightmap terrain and its conversion into a signed distance field.

use nalgebra::{Point2, Point3};

use super::{Bounds, BuildOptions, EsdfMap, MapError};
use crate::geometry::closest_point_on_triangle;
use crate::scalar::{lit, to_f64, Real};

/// Regular grid of terrain heights.
///
/// Sample `(i, j)` lies at `origin + cell_size * (i, j)`. Each cell is split
/// into two triangles along its `(i, j)`-`(i+1, j+1)` diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap<T: Real> {
    origin: Point2<T>,
    cell_size: T,
    nx: usize,
    ny: usize,
    heights: Vec<T>,
}

impl<T: Real> Heightmap<T> {
    /// `heights` is row-major with `nx` samples per row (x fastest).
    pub fn new(
        origin: Point2<T>,
        cell_size: T,
        nx: usize,
        ny: usize,
        heights: Vec<T>,
    ) -> Result<Self, MapError> {
        if !(cell_size > T::zero()) {
            return Err(MapError::InvalidGrid("cell size must be positive".into()));
        }
        if nx < 2 || ny < 2 {
            return Err(MapError::InvalidGrid(format!(
                "need at least 2x2 samples, got {nx}x{ny}"
            )));
        }
        if heights.len() != nx * ny {
            return Err(MapError::InvalidGrid(format!(
                "expected {} heights, got {}",
                nx * ny,
                heights.len()
            )));
        }
        if let Some(pos) = heights.iter().position(|h| !h.is_finite()) {
            return Err(MapError::InvalidGrid(format!(
                "non-finite height at sample {pos}"
            )));
        }
        Ok(Self {
            origin,
            cell_size,
            nx,
            ny,
            heights,
        })
    }

    /// Builds a heightmap by evaluating `height` at every sample.
    pub fn from_fn(
        origin: Point2<T>,
        cell_size: T,
        nx: usize,
        ny: usize,
        height: impl Fn(T, T) -> T,
    ) -> Result<Self, MapError> {
        let mut heights = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = origin.x + cell_size * lit(i as f64);
                let y = origin.y + cell_size * lit(j as f64);
                heights.push(height(x, y));
            }
        }
        Self::new(origin, cell_size, nx, ny, heights)
    }

    pub fn origin(&self) -> Point2<T> {
        self.origin
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn heights(&self) -> &[T] {
        &self.heights
    }

    #[inline]
    pub fn sample(&self, i: usize, j: usize) -> T {
        self.heights[i + self.nx * j]
    }

    pub fn sample_point(&self, i: usize, j: usize) -> Point3<T> {
        Point3::new(
            self.origin.x + self.cell_size * lit(i as f64),
            self.origin.y + self.cell_size * lit(j as f64),
            self.sample(i, j),
        )
    }

    /// Maximum x and y covered by samples.
    pub fn extent_max(&self) -> Point2<T> {
        Point2::new(
            self.origin.x + self.cell_size * lit((self.nx - 1) as f64),
            self.origin.y + self.cell_size * lit((self.ny - 1) as f64),
        )
    }

    pub fn height_range(&self) -> (T, T) {
        let lo = self
            .heights
            .iter()
            .copied()
            .fold(self.heights[0], |a, b| a.min(b));
        let hi = self
            .heights
            .iter()
            .copied()
            .fold(self.heights[0], |a, b| a.max(b));
        (lo, hi)
    }

    /// Both triangles of cell `(i, j)`.
    pub fn cell_triangles(&self, i: usize, j: usize) -> [[Point3<T>; 3]; 2] {
        let a = self.sample_point(i, j);
        let b = self.sample_point(i + 1, j);
        let c = self.sample_point(i + 1, j + 1);
        let d = self.sample_point(i, j + 1);
        [[a, b, c], [a, c, d]]
    }

    /// Surface height at `(x, y)`, clamped to the sampled extent.
    pub fn height_at(&self, x: T, y: T) -> T {
        let (i, u) = self.locate(x, self.origin.x, self.nx);
        let (j, v) = self.locate(y, self.origin.y, self.ny);
        let a = self.sample(i, j);
        let b = self.sample(i + 1, j);
        let c = self.sample(i + 1, j + 1);
        let d = self.sample(i, j + 1);
        if u >= v {
            a + (b - a) * u + (c - b) * v
        } else {
            a + (d - a) * v + (c - d) * u
        }
    }

    fn locate(&self, x: T, origin: T, n: usize) -> (usize, T) {
        let last = lit::<T>((n - 1) as f64);
        let u = ((x - origin) / self.cell_size).max(T::zero()).min(last);
        let idx = (to_f64(u.floor()) as usize).min(n - 2);
        (idx, u - lit(idx as f64))
    }

    fn clamp_xy(&self, x: T, y: T) -> (T, T) {
        let hi = self.extent_max();
        (
            x.max(self.origin.x).min(hi.x),
            y.max(self.origin.y).min(hi.y),
        )
    }

    /// Exact signed distance from `p` to the triangulated surface; negative
    /// below it.
    ///
    /// Starts from the vertical drop onto the surface as an upper bound and
    /// only visits cells whose footprint lies within that radius, so the
    /// result equals the exhaustive minimum over all triangles.
    pub fn signed_distance(&self, p: &Point3<T>) -> T {
        let (cx, cy) = self.clamp_xy(p.x, p.y);
        let surface = Point3::new(cx, cy, self.height_at(cx, cy));
        let mut best = (p - surface).norm();
        let below = p.z < self.height_at(cx, cy);

        let h = self.cell_size;
        let span = |q: T, o: T, n: usize| -> (usize, usize) {
            let lo = to_f64(((q - best - o) / h).floor()).max(0.0) as usize;
            let hi = (to_f64(((q + best - o) / h).floor()).max(0.0) as usize).min(n - 2);
            (lo.min(n - 2), hi)
        };
        let (i0, i1) = span(p.x, self.origin.x, self.nx);
        let (j0, j1) = span(p.y, self.origin.y, self.ny);
        for j in j0..=j1 {
            for i in i0..=i1 {
                for [a, b, c] in self.cell_triangles(i, j) {
                    let q = closest_point_on_triangle(p, &a, &b, &c);
                    let d = (p - q).norm();
                    if d < best {
                        best = d;
                    }
                }
            }
        }
        if below {
            -best
        } else {
            best
        }
    }

    /// Samples the heightmap's signed distance on a voxel grid.
    pub fn build_map(
        &self,
        bounds: &Bounds<T>,
        options: &BuildOptions<T>,
    ) -> Result<EsdfMap<T>, MapError> {
        EsdfMap::from_fn(bounds, options, |p| self.signed_distance(p))
    }

    /// Bounds enclosing the sampled surface with `margin_below` / `margin_above`
    /// of free room vertically.
    pub fn default_bounds(&self, margin_below: T, margin_above: T) -> Bounds<T> {
        let (lo, hi) = self.height_range();
        let far = self.extent_max();
        Bounds::new(
            Point3::new(self.origin.x, self.origin.y, lo - margin_below),
            Point3::new(far.x, far.y, hi + margin_above),
        )
    }

    /// Parses the plain-text format: a header line
    /// `cell_size <m> [origin <x> <y>]` followed by one whitespace separated
    /// row of heights per line, rows ordered by increasing y.
    pub fn from_text(text: &str) -> Result<Self, MapError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| MapError::InvalidGrid("empty heightmap file".into()))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let num = |s: &str| -> Result<f64, MapError> {
            s.parse::<f64>()
                .map_err(|_| MapError::InvalidGrid(format!("bad number '{s}' in header")))
        };
        let mut cell = None;
        let mut origin = (0.0, 0.0);
        let mut k = 0;
        while k < tokens.len() {
            match tokens[k] {
                "cell_size" if k + 1 < tokens.len() => {
                    cell = Some(num(tokens[k + 1])?);
                    k += 2;
                }
                "origin" if k + 2 < tokens.len() => {
                    origin = (num(tokens[k + 1])?, num(tokens[k + 2])?);
                    k += 3;
                }
                other => {
                    return Err(MapError::InvalidGrid(format!(
                        "unexpected header token '{other}'"
                    )))
                }
            }
        }
        let cell = cell.ok_or_else(|| MapError::InvalidGrid("header lacks cell_size".into()))?;
        let mut heights = Vec::new();
        let mut nx = None;
        let mut ny = 0;
        for (row, line) in lines.enumerate() {
            let values = line
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        MapError::InvalidGrid(format!("bad height '{s}' in row {row}"))
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            match nx {
                None => nx = Some(values.len()),
                Some(n) if n != values.len() => {
                    return Err(MapError::InvalidGrid(format!(
                        "row {row} has {} values, expected {n}",
                        values.len()
                    )))
                }
                _ => {}
            }
            heights.extend(values.into_iter().map(lit::<T>));
            ny += 1;
        }
        Self::new(
            Point2::new(lit(origin.0), lit(origin.1)),
            lit(cell),
            nx.unwrap_or(0),
            ny,
            heights,
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "cell_size {} origin {} {}\n",
            to_f64(self.cell_size),
            to_f64(self.origin.x),
            to_f64(self.origin.y)
        );
        for j in 0..self.ny {
            let row: Vec<String> = (0..self.nx)
                .map(|i| format!("{}", to_f64(self.sample(i, j))))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_heightmap_is_plane() {
        let hm = Heightmap::from_fn(Point2::new(-1.0, -1.0), 0.05, 41, 41, |_, _| 0.0).unwrap();
        for p in [
            Point3::new(0.1, 0.2, 0.3),
            Point3::new(-0.3, 0.25, -0.12),
            Point3::new(0.0, 0.0, 0.0),
        ] {
            assert_relative_eq!(hm.signed_distance(&p), p.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn height_interpolation_follows_triangulation() {
        let hm =
            Heightmap::new(Point2::new(0.0, 0.0), 1.0, 2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(hm.height_at(0.5, 0.25), 0.5);
        assert_relative_eq!(hm.height_at(0.25, 0.5), 0.25);
        assert_relative_eq!(hm.height_at(5.0, 0.0), 1.0);
    }

    #[test]
    fn rejects_non_finite_heights() {
        let err = Heightmap::new(
            Point2::new(0.0, 0.0),
            1.0,
            2,
            2,
            vec![0.0, f64::NAN, 0.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, MapError::InvalidGrid(_)));
        assert!(Heightmap::<f64>::from_text("cell_size 0.1\n0 1\n0 nan\n").is_err());
        assert!(Heightmap::<f64>::from_text("cell_size 0.1\n0 1\n0\n").is_err());
        assert!(Heightmap::<f64>::from_text("0 1\n0 0\n").is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let text = "cell_size 0.05 origin -0.5 0.25\n0 0.1 0.2\n0.3 0.4 0.5\n";
        let hm = Heightmap::<f64>::from_text(text).unwrap();
        assert_eq!(hm.shape(), (3, 2));
        assert_relative_eq!(hm.sample(1, 1), 0.4);
        assert_eq!(Heightmap::<f64>::from_text(&hm.to_text()).unwrap(), hm);
    }
}
