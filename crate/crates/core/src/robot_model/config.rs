//! Robot config files (TOML) and the bundled example robots.

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::Deserialize;

use super::{
    Joint, JointKind, Link, LinkGeometry, ModelError, Pulley, RobotModel, DEFAULT_CANDIDATE_SPACING,
};
use crate::scalar::{lit, Real};

/// Names accepted by [`bundled`].
pub const BUNDLED_ROBOTS: &[&str] = &["asterix", "telemax"];

const ASTERIX: &str = include_str!("../../robots/asterix.toml");
const TELEMAX: &str = include_str!("../../robots/telemax.toml");

/// Loads one of the bundled robot configs by name.
pub fn bundled<T: Real>(name: &str) -> Result<RobotModel<T>, ModelError> {
    match name {
        "asterix" => RobotModel::from_toml_str(ASTERIX),
        "telemax" => RobotModel::from_toml_str(TELEMAX),
        other => Err(ModelError::ParseError(format!(
            "no bundled robot named '{other}'"
        ))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDoc {
    name: String,
    candidate_spacing: Option<f64>,
    #[serde(rename = "link")]
    links: Vec<LinkDoc>,
    #[serde(default, rename = "joint")]
    joints: Vec<JointDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    name: String,
    mass: f64,
    #[serde(default)]
    com: [f64; 3],
    #[serde(default)]
    geometry: Option<GeometryDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum GeometryDoc {
    Point {
        position: [f64; 3],
    },
    Box {
        center: [f64; 3],
        size: [f64; 3],
    },
    Cylinder {
        center: [f64; 3],
        radius: f64,
        length: f64,
    },
    Track {
        pulleys: Vec<[f64; 3]>,
        width: f64,
        #[serde(default)]
        y: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    #[serde(rename = "type")]
    kind: JointKindDoc,
    parent: String,
    child: String,
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    #[serde(default = "default_axis")]
    axis: [f64; 3],
    #[serde(default)]
    limits: Option<[f64; 2]>,
    #[serde(default)]
    actuator: Option<String>,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum JointKindDoc {
    Fixed,
    Revolute,
}

fn default_axis() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn p3<T: Real>(a: [f64; 3]) -> Point3<T> {
    Point3::new(lit(a[0]), lit(a[1]), lit(a[2]))
}

fn v3<T: Real>(a: [f64; 3]) -> Vector3<T> {
    Vector3::new(lit(a[0]), lit(a[1]), lit(a[2]))
}

impl GeometryDoc {
    fn build<T: Real>(&self, link: &str) -> Result<LinkGeometry<T>, ModelError> {
        let bad = |what: &str| ModelError::Invalid(format!("link '{link}': {what}"));
        Ok(match self {
            GeometryDoc::Point { position } => LinkGeometry::Point {
                position: p3(*position),
            },
            GeometryDoc::Box { center, size } => {
                if size.iter().any(|&s| s < 0.0) {
                    return Err(bad("box size must be non-negative"));
                }
                LinkGeometry::Box {
                    center: p3(*center),
                    size: v3(*size),
                }
            }
            GeometryDoc::Cylinder {
                center,
                radius,
                length,
            } => {
                if *radius <= 0.0 || *length < 0.0 {
                    return Err(bad("cylinder needs radius > 0 and length >= 0"));
                }
                LinkGeometry::Cylinder {
                    center: p3(*center),
                    radius: lit(*radius),
                    length: lit(*length),
                }
            }
            GeometryDoc::Track { pulleys, width, y } => {
                if pulleys.is_empty() || pulleys.iter().any(|p| p[2] <= 0.0) || *width < 0.0 {
                    return Err(bad(
                        "track needs pulleys with positive radii and width >= 0",
                    ));
                }
                LinkGeometry::Track {
                    pulleys: pulleys
                        .iter()
                        .map(|p| Pulley {
                            x: lit(p[0]),
                            z: lit(p[1]),
                            radius: lit(p[2]),
                        })
                        .collect(),
                    width: lit(*width),
                    y: lit(*y),
                }
            }
        })
    }
}

impl<T: Real> RobotModel<T> {
    /// Parses and validates a robot config.
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let doc: RobotDoc =
            toml::from_str(text).map_err(|e| ModelError::ParseError(e.to_string()))?;

        let mut links = Vec::with_capacity(doc.links.len());
        for l in &doc.links {
            if links.iter().any(|x: &Link<T>| x.name == l.name) {
                return Err(ModelError::Invalid(format!("duplicate link '{}'", l.name)));
            }
            let geometry = match &l.geometry {
                Some(g) => g.build(&l.name)?,
                None => LinkGeometry::None,
            };
            links.push(Link {
                name: l.name.clone(),
                mass: lit(l.mass),
                com: p3(l.com),
                geometry,
                parent_joint: None,
            });
        }
        let find = |name: &str| links.iter().position(|l| l.name == name);

        let mut joints = Vec::with_capacity(doc.joints.len());
        for j in &doc.joints {
            let parent = find(&j.parent).ok_or_else(|| ModelError::MissingParent {
                joint: j.name.clone(),
                parent: j.parent.clone(),
            })?;
            let child = find(&j.child).ok_or_else(|| ModelError::UnknownChild {
                joint: j.name.clone(),
                child: j.child.clone(),
            })?;
            let axis = v3::<T>(j.axis);
            if axis.norm() < lit(1e-12) {
                return Err(ModelError::Invalid(format!(
                    "joint '{}' has a zero axis",
                    j.name
                )));
            }
            let (lower, upper) = match (j.kind, j.limits) {
                (JointKindDoc::Fixed, _) => (T::zero(), T::zero()),
                (JointKindDoc::Revolute, Some([lo, hi])) => (lit(lo), lit(hi)),
                (JointKindDoc::Revolute, None) => (-T::pi(), T::pi()),
            };
            joints.push(Joint {
                name: j.name.clone(),
                kind: match j.kind {
                    JointKindDoc::Fixed => JointKind::Fixed,
                    JointKindDoc::Revolute => JointKind::Revolute,
                },
                parent,
                child,
                origin: Isometry3::from_parts(
                    Translation3::from(v3::<T>(j.xyz)),
                    UnitQuaternion::from_euler_angles(lit(j.rpy[0]), lit(j.rpy[1]), lit(j.rpy[2])),
                ),
                axis: Unit::new_normalize(axis),
                lower,
                upper,
                actuator: j.actuator.clone().unwrap_or_else(|| j.name.clone()),
            });
        }
        let spacing = lit(doc.candidate_spacing.unwrap_or(DEFAULT_CANDIDATE_SPACING));
        RobotModel::new(doc.name, links, joints, spacing)
    }
}
