//! Kinematic tree, mass model and contact-candidate sampling of a tracked robot.
//!
//! Link geometry is authored in a model frame `M`. All outputs are expressed
//! in the body frame `C`, which is `M` shifted so that the center of mass of
//! the reference configuration (every joint at zero, clamped into its limits)
//! sits at the origin. `C` does not move with the joints; the instantaneous
//! center of mass does.

mod config;
mod sampling;

pub use config::{bundled, BUNDLED_ROBOTS};

use std::collections::BTreeMap;

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};

/// Candidate spacing used when a model file does not set one.
pub const DEFAULT_CANDIDATE_SPACING: f64 = 0.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("failed to parse robot config: {0}")]
    ParseError(String),
    #[error("kinematic tree contains a cycle through link '{0}'")]
    CycleInKinematicTree(String),
    #[error("joint '{joint}' references missing parent link '{parent}'")]
    MissingParent { joint: String, parent: String },
    #[error("joint '{joint}' references unknown child link '{child}'")]
    UnknownChild { joint: String, child: String },
    #[error("link '{0}' is the child of more than one joint")]
    MultipleParents(String),
    #[error("model has {0} root links, expected exactly one")]
    RootCount(usize),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("unknown joint or actuator '{0}'")]
    UnknownJoint(String),
    #[error("joint '{joint}' position {position} outside limits [{lower}, {upper}]")]
    JointOutOfLimits {
        joint: String,
        position: f64,
        lower: f64,
        upper: f64,
    },
}

/// Circular pulley of a track belt, placed in the link's x-z plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulley<T: Real> {
    pub x: T,
    pub z: T,
    pub radius: T,
}

/// Surface a link exposes to the terrain.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkGeometry<T: Real> {
    /// Mass-only link.
    None,
    Point {
        position: Point3<T>,
    },
    /// Axis-aligned box; only the bottom face is sampled.
    Box {
        center: Point3<T>,
        size: Vector3<T>,
    },
    /// Wheel-like cylinder whose axis is the link's y-axis.
    Cylinder {
        center: Point3<T>,
        radius: T,
        length: T,
    },
    /// Belt wrapped around pulleys (the convex outline of the circles),
    /// extruded along y by `width` around `y`.
    Track {
        pulleys: Vec<Pulley<T>>,
        width: T,
        y: T,
    },
}

#[derive(Debug, Clone)]
pub struct Link<T: Real> {
    pub name: String,
    pub mass: T,
    /// Center of mass in link coordinates.
    pub com: Point3<T>,
    pub geometry: LinkGeometry<T>,
    /// Joint connecting this link to its parent; `None` for the root.
    pub parent_joint: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Fixed,
    Revolute,
}

#[derive(Debug, Clone)]
pub struct Joint<T: Real> {
    pub name: String,
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    /// Parent link <- joint frame at zero position.
    pub origin: Isometry3<T>,
    pub axis: Unit<Vector3<T>>,
    pub lower: T,
    pub upper: T,
    /// Name under which the position is commanded; coupled joints share one.
    pub actuator: String,
}

/// Joint positions keyed by actuator (or joint) name. Unlisted actuators
/// stay at their reference position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointConfig<T: Real> {
    pub positions: BTreeMap<String, T>,
}

impl<T: Real> JointConfig<T> {
    pub fn new() -> Self {
        Self {
            positions: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, angle: T) -> Self {
        self.positions.insert(name.into(), angle);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, angle: T) {
        self.positions.insert(name.into(), angle);
    }

    /// Parses a TOML table of `name = angle_rad` entries.
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let table: BTreeMap<String, f64> =
            toml::from_str(text).map_err(|e| ModelError::ParseError(e.to_string()))?;
        Ok(Self {
            positions: table.into_iter().map(|(k, v)| (k, lit(v))).collect(),
        })
    }
}

/// Per-link transforms in the body frame `C`, indexed like the model's links.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTransforms<T: Real>(pub Vec<Isometry3<T>>);

impl<T: Real> LinkTransforms<T> {
    pub fn get<'a>(&'a self, model: &RobotModel<T>, name: &str) -> Option<&'a Isometry3<T>> {
        model.link_index(name).map(|i| &self.0[i])
    }
}

/// Contact point candidates in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<T: Real> {
    pub points: Vec<Point3<T>>,
    /// Index of the link each point was sampled from.
    pub links: Vec<usize>,
}

impl<T: Real> CandidateSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RobotModel<T: Real> {
    name: String,
    links: Vec<Link<T>>,
    joints: Vec<Joint<T>>,
    /// Links in parent-before-child order; `order[0]` is the root.
    order: Vec<usize>,
    candidate_spacing: T,
    /// `C <- M`.
    body_from_model: Isometry3<T>,
    /// Candidate samples per link in link coordinates.
    local_samples: Vec<Vec<Point3<T>>>,
}

impl<T: Real> RobotModel<T> {
    /// Validates the tree and precomputes the body frame and link samples.
    pub fn new(
        name: impl Into<String>,
        links: Vec<Link<T>>,
        joints: Vec<Joint<T>>,
        candidate_spacing: T,
    ) -> Result<Self, ModelError> {
        let mut links = links;
        if links.is_empty() {
            return Err(ModelError::Invalid("model has no links".into()));
        }
        if !(candidate_spacing > T::zero()) {
            return Err(ModelError::Invalid(
                "candidate_spacing must be positive".into(),
            ));
        }
        for link in &mut links {
            link.parent_joint = None;
            if !(link.mass >= T::zero()) {
                return Err(ModelError::Invalid(format!(
                    "link '{}' has negative mass",
                    link.name
                )));
            }
        }
        let total_mass = links.iter().fold(T::zero(), |acc, l| acc + l.mass);
        if !(total_mass > T::zero()) {
            return Err(ModelError::Invalid("total mass must be positive".into()));
        }
        for (index, joint) in joints.iter().enumerate() {
            if joint.parent == joint.child {
                return Err(ModelError::CycleInKinematicTree(
                    links[joint.child].name.clone(),
                ));
            }
            if joint.lower > joint.upper {
                return Err(ModelError::Invalid(format!(
                    "joint '{}' has lower > upper limit",
                    joint.name
                )));
            }
            if joint.kind == JointKind::Revolute && (joint.axis.norm() - T::one()).abs() > lit(1e-9)
            {
                return Err(ModelError::Invalid(format!(
                    "joint '{}' axis is not unit length",
                    joint.name
                )));
            }
            let child = &mut links[joint.child];
            if child.parent_joint.is_some() {
                return Err(ModelError::MultipleParents(child.name.clone()));
            }
            child.parent_joint = Some(index);
        }
        let roots: Vec<usize> = (0..links.len())
            .filter(|&i| links[i].parent_joint.is_none())
            .collect();
        if roots.len() != 1 {
            // Every link of a cycle has a parent, so a model that is a single
            // cycle has no root at all.
            if roots.is_empty() {
                return Err(ModelError::CycleInKinematicTree(links[0].name.clone()));
            }
            return Err(ModelError::RootCount(roots.len()));
        }

        let mut order = vec![roots[0]];
        let mut head = 0;
        while head < order.len() {
            let current = order[head];
            head += 1;
            for joint in joints.iter().filter(|j| j.parent == current) {
                order.push(joint.child);
            }
        }
        if order.len() != links.len() {
            let stray = (0..links.len()).find(|i| !order.contains(i)).unwrap_or(0);
            return Err(ModelError::CycleInKinematicTree(links[stray].name.clone()));
        }

        let local_samples = links
            .iter()
            .map(|l| sampling::sample_link(&l.geometry, candidate_spacing))
            .collect();

        let mut model = Self {
            name: name.into(),
            links,
            joints,
            order,
            candidate_spacing,
            body_from_model: Isometry3::identity(),
            local_samples,
        };
        let reference = model.reference_positions();
        let in_model = model.transforms_with(&reference);
        let com = model.com_from(&in_model);
        model.body_from_model =
            Isometry3::from_parts(Translation3::from(-com.coords), UnitQuaternion::identity());
        Ok(model)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint<T>] {
        &self.joints
    }

    pub fn candidate_spacing(&self) -> T {
        self.candidate_spacing
    }

    pub fn total_mass(&self) -> T {
        self.links.iter().fold(T::zero(), |acc, l| acc + l.mass)
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// Distinct actuator names in joint order.
    pub fn actuators(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for j in self.joints.iter().filter(|j| j.kind == JointKind::Revolute) {
            if !out.contains(&j.actuator.as_str()) {
                out.push(&j.actuator);
            }
        }
        out
    }

    /// Depth of the deepest link below the root.
    pub fn tree_depth(&self) -> usize {
        let mut depth = vec![0usize; self.links.len()];
        for &l in &self.order[1..] {
            let j = self.links[l]
                .parent_joint
                .expect("non-root links have parents");
            depth[l] = depth[self.joints[j].parent] + 1;
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Model `M` expressed in the body frame `C`.
    pub fn body_from_model(&self) -> &Isometry3<T> {
        &self.body_from_model
    }

    /// Same model with a different candidate spacing.
    pub fn with_candidate_spacing(&self, spacing: T) -> Result<Self, ModelError> {
        Self::new(
            self.name.clone(),
            self.links.clone(),
            self.joints.clone(),
            spacing,
        )
    }

    fn reference_positions(&self) -> Vec<T> {
        self.joints
            .iter()
            .map(|j| match j.kind {
                JointKind::Fixed => T::zero(),
                JointKind::Revolute => T::zero().max(j.lower).min(j.upper),
            })
            .collect()
    }

    /// Resolves a configuration into one position per joint.
    pub fn joint_positions(&self, q: &JointConfig<T>) -> Result<Vec<T>, ModelError> {
        for name in q.positions.keys() {
            let known = self
                .joints
                .iter()
                .any(|j| j.kind == JointKind::Revolute && (j.actuator == *name || j.name == *name));
            if !known {
                return Err(ModelError::UnknownJoint(name.clone()));
            }
        }
        let mut positions = self.reference_positions();
        for (index, joint) in self.joints.iter().enumerate() {
            if joint.kind != JointKind::Revolute {
                continue;
            }
            let value = q
                .positions
                .get(&joint.name)
                .or_else(|| q.positions.get(&joint.actuator));
            if let Some(&v) = value {
                let slack = lit::<T>(1e-12);
                if !(v >= joint.lower - slack && v <= joint.upper + slack) {
                    return Err(ModelError::JointOutOfLimits {
                        joint: joint.name.clone(),
                        position: to_f64(v),
                        lower: to_f64(joint.lower),
                        upper: to_f64(joint.upper),
                    });
                }
                positions[index] = v;
            }
        }
        Ok(positions)
    }

    /// Transforms `M <- link` for explicit per-joint positions.
    fn transforms_with(&self, positions: &[T]) -> Vec<Isometry3<T>> {
        let mut out = vec![Isometry3::identity(); self.links.len()];
        for &l in &self.order[1..] {
            let j = self.links[l]
                .parent_joint
                .expect("non-root links have parents");
            let joint = &self.joints[j];
            let motion = match joint.kind {
                JointKind::Fixed => Isometry3::identity(),
                JointKind::Revolute => Isometry3::from_parts(
                    Translation3::identity(),
                    UnitQuaternion::from_axis_angle(&joint.axis, positions[j]),
                ),
            };
            out[l] = out[joint.parent] * joint.origin * motion;
        }
        out
    }

    fn com_from(&self, transforms: &[Isometry3<T>]) -> Point3<T> {
        let mut acc = Vector3::zeros();
        for (link, tf) in self.links.iter().zip(transforms) {
            acc += (tf * link.com).coords * link.mass;
        }
        Point3::from(acc / self.total_mass())
    }

    /// Link transforms in the body frame for configuration `q`.
    pub fn forward_kinematics(&self, q: &JointConfig<T>) -> Result<LinkTransforms<T>, ModelError> {
        let positions = self.joint_positions(q)?;
        let in_model = self.transforms_with(&positions);
        Ok(LinkTransforms(
            in_model
                .into_iter()
                .map(|tf| self.body_from_model * tf)
                .collect(),
        ))
    }

    /// Mass-weighted mean of link centers of mass, in the body frame.
    pub fn center_of_mass(&self, q: &JointConfig<T>) -> Result<Point3<T>, ModelError> {
        let tfs = self.forward_kinematics(q)?;
        Ok(self.com_from(&tfs.0))
    }

    /// Ground-facing sample points of every link, in the body frame.
    ///
    /// Ordered by link index, then by the per-geometry sampling order.
    pub fn contact_candidates(&self, q: &JointConfig<T>) -> Result<CandidateSet<T>, ModelError> {
        let tfs = self.forward_kinematics(q)?;
        Ok(self.candidates_from(&tfs))
    }

    pub fn candidates_from(&self, tfs: &LinkTransforms<T>) -> CandidateSet<T> {
        let total: usize = self.local_samples.iter().map(Vec::len).sum();
        let mut points = Vec::with_capacity(total);
        let mut links = Vec::with_capacity(total);
        for (index, samples) in self.local_samples.iter().enumerate() {
            let tf = &tfs.0[index];
            for p in samples {
                points.push(tf * p);
                links.push(index);
            }
        }
        CandidateSet { points, links }
    }

    /// Link-local samples, before any transform.
    pub fn local_samples(&self, link: usize) -> &[Point3<T>] {
        &self.local_samples[link]
    }
}
