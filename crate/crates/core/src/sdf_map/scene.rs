//! Analytic terrain scenes: unions of primitives with exact signed distances.

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::{Bounds, BuildOptions, EsdfMap, MapError};
use crate::geometry::Triangle;
use crate::scalar::{infinity, lit, to_f64, Real};

/// Direction in which the top face of a slanted box goes up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rise {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
}

/// Convex polyhedron given by its boundary triangles and face planes.
#[derive(Debug, Clone)]
pub struct ConvexPolytope<T: Real> {
    vertices: Vec<Point3<T>>,
    /// Outward unit normal and offset, `n . p = offset` on the face.
    planes: Vec<(Vector3<T>, T)>,
    triangles: Vec<Triangle<T>>,
}

impl<T: Real> ConvexPolytope<T> {
    /// Convex hull of `points`, found by testing every vertex triple as a
    /// supporting plane. Intended for the handful of vertices terrain blocks
    /// have, not for general meshes.
    pub fn from_vertices(points: &[Point3<T>]) -> Result<Self, MapError> {
        let mut vertices: Vec<Point3<T>> = Vec::new();
        for p in points {
            if !vertices.iter().any(|v| (v - p).norm() < lit(1e-9)) {
                vertices.push(*p);
            }
        }
        if vertices.len() < 4 {
            return Err(MapError::InvalidScene(
                "polytope needs at least 4 distinct vertices".into(),
            ));
        }
        let scale = vertices
            .iter()
            .map(|v| v.coords.norm())
            .fold(T::one(), |a, b| a.max(b));
        let tol = scale * lit(1e-9);

        let n = vertices.len();
        let mut planes: Vec<(Vector3<T>, T)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let raw = (vertices[j] - vertices[i]).cross(&(vertices[k] - vertices[i]));
                    let len = raw.norm();
                    if len <= tol * scale {
                        continue;
                    }
                    let mut normal = raw / len;
                    let mut offset = normal.dot(&vertices[i].coords);
                    let side = |nrm: &Vector3<T>, off: T| {
                        vertices.iter().all(|v| nrm.dot(&v.coords) - off <= tol)
                    };
                    if !side(&normal, offset) {
                        normal = -normal;
                        offset = -offset;
                        if !side(&normal, offset) {
                            continue;
                        }
                    }
                    let dup = planes.iter().any(|(m, o)| {
                        (m - normal).norm() < lit(1e-7) && (*o - offset).abs() < tol * lit(10.0)
                    });
                    if !dup {
                        planes.push((normal, offset));
                    }
                }
            }
        }
        if planes.len() < 4 {
            return Err(MapError::InvalidScene(
                "polytope vertices are coplanar".into(),
            ));
        }

        let mut triangles = Vec::new();
        for (normal, offset) in &planes {
            let face: Vec<Point3<T>> = vertices
                .iter()
                .filter(|v| (normal.dot(&v.coords) - *offset).abs() <= tol * lit(10.0))
                .copied()
                .collect();
            let centroid = face.iter().fold(Vector3::zeros(), |acc, v| acc + v.coords)
                / lit::<T>(face.len() as f64);
            let u = (face[0].coords - centroid).normalize();
            let w = normal.cross(&u);
            let mut ordered: Vec<(T, Point3<T>)> = face
                .iter()
                .map(|v| {
                    let r = v.coords - centroid;
                    (r.dot(&w).atan2(r.dot(&u)), *v)
                })
                .collect();
            ordered.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            for t in 1..ordered.len().saturating_sub(1) {
                if let Some(tri) = Triangle::new(ordered[0].1, ordered[t].1, ordered[t + 1].1) {
                    triangles.push(tri);
                }
            }
        }
        Ok(Self {
            vertices,
            planes,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn face_count(&self) -> usize {
        self.planes.len()
    }

    /// Largest signed face-plane distance: exact inside, a lower bound outside.
    fn plane_bound(&self, p: &Point3<T>) -> T {
        self.planes
            .iter()
            .map(|(n, o)| n.dot(&p.coords) - *o)
            .fold(-infinity::<T>(), |a, b| a.max(b))
    }

    pub fn signed_distance(&self, p: &Point3<T>) -> T {
        self.signed_distance_below(p, infinity())
    }

    /// Exact signed distance, or any value `>= cutoff` once the distance is
    /// known to be at least `cutoff`.
    fn signed_distance_below(&self, p: &Point3<T>, cutoff: T) -> T {
        let bound = self.plane_bound(p);
        if bound <= T::zero() || bound >= cutoff {
            return bound;
        }
        self.triangles
            .iter()
            .map(|t| t.distance(p))
            .fold(infinity::<T>(), |a, b| a.min(b))
    }
}

/// One solid of a terrain scene.
#[derive(Debug, Clone)]
pub enum SdfPrimitive<T: Real> {
    /// Half-space; the solid lies on the side opposite `normal`.
    Plane {
        point: Point3<T>,
        normal: Unit<Vector3<T>>,
    },
    /// Axis-aligned box.
    Cuboid {
        center: Point3<T>,
        half_extents: Vector3<T>,
    },
    Polytope(ConvexPolytope<T>),
}

impl<T: Real> SdfPrimitive<T> {
    pub fn plane(point: Point3<T>, normal: Vector3<T>) -> Self {
        SdfPrimitive::Plane {
            point,
            normal: Unit::new_normalize(normal),
        }
    }

    /// Ground plane `z = height`.
    pub fn ground(height: T) -> Self {
        Self::plane(Point3::new(T::zero(), T::zero(), height), Vector3::z())
    }

    /// Axis-aligned box spanning `min..max`.
    pub fn cuboid(min: Point3<T>, max: Point3<T>) -> Self {
        SdfPrimitive::Cuboid {
            center: nalgebra::center(&min, &max),
            half_extents: (max - min) / lit::<T>(2.0),
        }
    }

    /// Box on the footprint `min_xy..max_xy` whose top face is a plane rising
    /// from `top_low` to `top_high` along `rise`. A `top_low` equal to `bottom`
    /// yields a wedge.
    pub fn slanted_box(
        min_xy: [T; 2],
        max_xy: [T; 2],
        bottom: T,
        top_low: T,
        top_high: T,
        rise: Rise,
    ) -> Result<Self, MapError> {
        if !(max_xy[0] > min_xy[0] && max_xy[1] > min_xy[1]) {
            return Err(MapError::InvalidScene(
                "slanted box footprint is empty".into(),
            ));
        }
        if !(top_low >= bottom && top_high > bottom && top_high >= top_low) {
            return Err(MapError::InvalidScene(
                "slanted box heights must satisfy bottom <= low <= high".into(),
            ));
        }
        let corners = [
            (min_xy[0], min_xy[1]),
            (max_xy[0], min_xy[1]),
            (max_xy[0], max_xy[1]),
            (min_xy[0], max_xy[1]),
        ];
        let top = |x: T, y: T| {
            let t = match rise {
                Rise::PosX => (x - min_xy[0]) / (max_xy[0] - min_xy[0]),
                Rise::NegX => (max_xy[0] - x) / (max_xy[0] - min_xy[0]),
                Rise::PosY => (y - min_xy[1]) / (max_xy[1] - min_xy[1]),
                Rise::NegY => (max_xy[1] - y) / (max_xy[1] - min_xy[1]),
            };
            top_low + (top_high - top_low) * t
        };
        let mut pts = Vec::with_capacity(8);
        for &(x, y) in &corners {
            pts.push(Point3::new(x, y, bottom));
            pts.push(Point3::new(x, y, top(x, y)));
        }
        Ok(SdfPrimitive::Polytope(ConvexPolytope::from_vertices(&pts)?))
    }

    pub fn signed_distance(&self, p: &Point3<T>) -> T {
        self.signed_distance_below(p, infinity())
    }

    fn signed_distance_below(&self, p: &Point3<T>, cutoff: T) -> T {
        match self {
            SdfPrimitive::Plane { point, normal } => normal.dot(&(p - point)),
            SdfPrimitive::Cuboid {
                center,
                half_extents,
            } => {
                let q = (p - center).abs() - half_extents;
                let outside = q.map(|v| v.max(T::zero())).norm();
                outside + q.x.max(q.y).max(q.z).min(T::zero())
            }
            SdfPrimitive::Polytope(poly) => poly.signed_distance_below(p, cutoff),
        }
    }
}

/// Union of primitives under pointwise minimum.
///
/// Outside every solid the minimum is the exact distance to the union. Inside
/// overlapping solids it reports the deepest single-solid value, which is
/// still a valid negative lower bound in magnitude.
#[derive(Debug, Clone)]
pub struct TerrainScene<T: Real> {
    pub name: String,
    pub primitives: Vec<SdfPrimitive<T>>,
    /// Bounds the scene was authored for, if the source named any.
    pub bounds: Option<Bounds<T>>,
}

impl<T: Real> TerrainScene<T> {
    pub fn new(name: impl Into<String>, primitives: Vec<SdfPrimitive<T>>) -> Self {
        Self {
            name: name.into(),
            primitives,
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, bounds: Bounds<T>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn signed_distance(&self, p: &Point3<T>) -> T {
        let mut best = infinity::<T>();
        for prim in &self.primitives {
            best = best.min(prim.signed_distance_below(p, best));
        }
        best
    }

    /// Samples the scene on a voxel grid.
    pub fn build_map(
        &self,
        bounds: &Bounds<T>,
        options: &BuildOptions<T>,
    ) -> Result<EsdfMap<T>, MapError> {
        if self.primitives.is_empty() {
            return Err(MapError::InvalidScene("scene has no primitives".into()));
        }
        EsdfMap::from_fn(bounds, options, |p| self.signed_distance(p))
    }

    /// Parses the structured-text scene format (TOML).
    pub fn from_toml_str(text: &str) -> Result<Self, MapError> {
        let doc: SceneDoc =
            toml::from_str(text).map_err(|e| MapError::InvalidScene(e.to_string()))?;
        let mut primitives = Vec::with_capacity(doc.primitives.len());
        for spec in &doc.primitives {
            primitives.push(spec.to_primitive()?);
        }
        if primitives.is_empty() {
            return Err(MapError::InvalidScene("scene has no primitives".into()));
        }
        let bounds = doc.bounds.map(|b| Bounds::new(pt(b.min), pt(b.max)));
        Ok(Self {
            name: doc.name.unwrap_or_default(),
            primitives,
            bounds,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let doc = SceneDoc {
            name: Some(self.name.clone()),
            bounds: self.bounds.map(|b| BoundsDoc {
                min: arr(&b.min),
                max: arr(&b.max),
            }),
            primitives: self
                .primitives
                .iter()
                .map(PrimitiveDoc::from_primitive)
                .collect(),
        };
        toml::to_string(&doc).expect("scene documents always serialize")
    }
}

fn pt<T: Real>(a: [f64; 3]) -> Point3<T> {
    Point3::new(lit(a[0]), lit(a[1]), lit(a[2]))
}

fn arr<T: Real>(p: &Point3<T>) -> [f64; 3] {
    [to_f64(p.x), to_f64(p.y), to_f64(p.z)]
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundsDoc {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneDoc {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    bounds: Option<BoundsDoc>,
    #[serde(default, rename = "primitive")]
    primitives: Vec<PrimitiveDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
enum PrimitiveDoc {
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
    },
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    SlantedBox {
        min_xy: [f64; 2],
        max_xy: [f64; 2],
        bottom: f64,
        top_low: f64,
        top_high: f64,
        rise: Rise,
    },
    Wedge {
        min_xy: [f64; 2],
        max_xy: [f64; 2],
        bottom: f64,
        top: f64,
        rise: Rise,
    },
    Polytope {
        vertices: Vec<[f64; 3]>,
    },
}

impl PrimitiveDoc {
    fn to_primitive<T: Real>(&self) -> Result<SdfPrimitive<T>, MapError> {
        let l = lit::<T>;
        Ok(match self {
            PrimitiveDoc::Plane { point, normal } => {
                let n = Vector3::new(l(normal[0]), l(normal[1]), l(normal[2]));
                if n.norm() < l(1e-12) {
                    return Err(MapError::InvalidScene("plane normal is zero".into()));
                }
                SdfPrimitive::plane(pt(*point), n)
            }
            PrimitiveDoc::Box { min, max } => {
                if (0..3).any(|i| max[i] <= min[i]) {
                    return Err(MapError::InvalidScene("box has non-positive size".into()));
                }
                SdfPrimitive::cuboid(pt(*min), pt(*max))
            }
            PrimitiveDoc::SlantedBox {
                min_xy,
                max_xy,
                bottom,
                top_low,
                top_high,
                rise,
            } => SdfPrimitive::slanted_box(
                [l(min_xy[0]), l(min_xy[1])],
                [l(max_xy[0]), l(max_xy[1])],
                l(*bottom),
                l(*top_low),
                l(*top_high),
                *rise,
            )?,
            PrimitiveDoc::Wedge {
                min_xy,
                max_xy,
                bottom,
                top,
                rise,
            } => SdfPrimitive::slanted_box(
                [l(min_xy[0]), l(min_xy[1])],
                [l(max_xy[0]), l(max_xy[1])],
                l(*bottom),
                l(*bottom),
                l(*top),
                *rise,
            )?,
            PrimitiveDoc::Polytope { vertices } => {
                let pts: Vec<Point3<T>> = vertices.iter().map(|v| pt(*v)).collect();
                SdfPrimitive::Polytope(ConvexPolytope::from_vertices(&pts)?)
            }
        })
    }

    fn from_primitive<T: Real>(prim: &SdfPrimitive<T>) -> Self {
        match prim {
            SdfPrimitive::Plane { point, normal } => PrimitiveDoc::Plane {
                point: arr(point),
                normal: arr(&Point3::from(normal.into_inner())),
            },
            SdfPrimitive::Cuboid {
                center,
                half_extents,
            } => PrimitiveDoc::Box {
                min: arr(&(center - half_extents)),
                max: arr(&(center + half_extents)),
            },
            SdfPrimitive::Polytope(poly) => PrimitiveDoc::Polytope {
                vertices: poly.vertices.iter().map(arr).collect(),
            },
        }
    }
}
