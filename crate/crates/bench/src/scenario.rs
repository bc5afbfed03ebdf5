//! Scenario files: terrain, robot and the list of queries to evaluate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;
use trackpose::arenas::arena;
use trackpose::robot_model::bundled;
use trackpose::{
    pose_from_euler, Bounds, BuildOptions, EsdfMap, Heightmap, JointConfig, QueryPose, RobotModel,
    TerrainScene,
};

use crate::metrics::{reduce_to_query, GimbalAmbiguity};

/// Default spacing of queries generated along a path (m).
pub const DEFAULT_PATH_SPACING: f64 = 0.05;
/// Free space kept below and above a heightmap when building its map (m).
pub const HEIGHTMAP_MARGINS: (f64, f64) = (0.3, 0.8);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] trackpose::MapError),
    #[error(transparent)]
    Model(#[from] trackpose::ModelError),
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub enum Terrain {
    Scene(TerrainScene<f64>),
    Heightmap(Heightmap<f64>),
}

impl Terrain {
    /// Loads `arena:<name>`, a scene (`.toml`) or a heightmap (any other
    /// extension).
    pub fn load(spec: &str, base: &Path, seed: u64) -> Result<Self, ScenarioError> {
        if let Some(name) = spec.strip_prefix("arena:") {
            return Ok(Terrain::Scene(arena(name, seed)?));
        }
        let path = base.join(spec);
        let text = read(&path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            let scene = TerrainScene::from_toml_str(&text)?;
            if scene.bounds.is_none() {
                return Err(ScenarioError::Invalid(format!(
                    "scene {} needs a [bounds] table",
                    path.display()
                )));
            }
            Ok(Terrain::Scene(scene))
        } else {
            Ok(Terrain::Heightmap(Heightmap::from_text(&text)?))
        }
    }

    pub fn bounds(&self) -> Bounds<f64> {
        match self {
            Terrain::Scene(s) => s.bounds.clone().expect("scenes are loaded with bounds"),
            Terrain::Heightmap(h) => h.default_bounds(HEIGHTMAP_MARGINS.0, HEIGHTMAP_MARGINS.1),
        }
    }

    pub fn build_map(&self, voxel_size: f64) -> Result<EsdfMap<f64>, ScenarioError> {
        let options = BuildOptions::with_voxel_size(voxel_size);
        let bounds = self.bounds();
        Ok(match self {
            Terrain::Scene(s) => s.build_map(&bounds, &options)?,
            Terrain::Heightmap(h) => h.build_map(&bounds, &options)?,
        })
    }
}

/// Loads a robot from `builtin:<name>` or a config path.
pub fn load_robot(spec: &str, base: &Path) -> Result<RobotModel<f64>, ScenarioError> {
    match spec.strip_prefix("builtin:") {
        Some(name) => Ok(bundled(name)?),
        None => Ok(RobotModel::from_toml_str(&read(&base.join(spec))?)?),
    }
}

#[derive(Debug, Clone)]
pub struct QueryItem {
    /// `Err` when a ground-truth pose could not be reduced to a query.
    pub query: Result<QueryPose<f64>, GimbalAmbiguity>,
    pub joints: JointConfig<f64>,
    pub ground_truth: Option<Isometry3<f64>>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub terrain: Terrain,
    pub robot: RobotModel<f64>,
    pub queries: Vec<QueryItem>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: String,
    #[serde(default)]
    seed: u64,
    terrain: String,
    robot: String,
    #[serde(default)]
    joints: BTreeMap<String, f64>,
    #[serde(default)]
    path: Option<PathDoc>,
    #[serde(default, rename = "query")]
    queries: Vec<QueryDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathDoc {
    waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    spacing: Option<f64>,
    #[serde(default)]
    yaw_jitter_deg: f64,
    #[serde(default)]
    z_hint: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryDoc {
    #[serde(default)]
    x: f64,
    #[serde(default)]
    y: f64,
    #[serde(default)]
    yaw: f64,
    #[serde(default)]
    z_hint: Option<f64>,
    #[serde(default)]
    joints: BTreeMap<String, f64>,
    #[serde(default)]
    ground_truth: Option<GroundTruthDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthDoc {
    xyz: [f64; 3],
    /// Roll, pitch, yaw (rad).
    rpy: [f64; 3],
}

impl Scenario {
    /// Parses a scenario file; `seed_override` replaces the file's seed.
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, ScenarioError> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&read(path)?, base, seed_override)
    }

    /// Parses scenario text, resolving file references against `base`.
    pub fn from_toml_str(
        text: &str,
        base: &Path,
        seed_override: Option<u64>,
    ) -> Result<Self, ScenarioError> {
        let doc: ScenarioDoc =
            toml::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let seed = seed_override.unwrap_or(doc.seed);
        let terrain = Terrain::load(&doc.terrain, base, seed)?;
        let robot = load_robot(&doc.robot, base)?;
        let bounds = terrain.bounds();
        let default_hint = bounds.center().z;
        let base_joints = JointConfig {
            positions: doc.joints.clone(),
        };

        let mut queries = Vec::new();
        if let Some(p) = &doc.path {
            let spacing = p.spacing.unwrap_or(DEFAULT_PATH_SPACING);
            if !(spacing > 0.0) || p.waypoints.len() < 2 {
                return Err(ScenarioError::Invalid(
                    "a path needs two waypoints and a positive spacing".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (x, y, yaw) in sample_path(&p.waypoints, spacing) {
                let jitter = if p.yaw_jitter_deg > 0.0 {
                    rng.gen_range(-p.yaw_jitter_deg..=p.yaw_jitter_deg)
                        .to_radians()
                } else {
                    0.0
                };
                queries.push(QueryItem {
                    query: Ok(QueryPose::new(
                        x,
                        y,
                        yaw + jitter,
                        p.z_hint.unwrap_or(default_hint),
                    )),
                    joints: base_joints.clone(),
                    ground_truth: None,
                });
            }
        }
        for q in &doc.queries {
            let mut joints = base_joints.clone();
            joints
                .positions
                .extend(q.joints.iter().map(|(k, v)| (k.clone(), *v)));
            let hint = q.z_hint.unwrap_or(default_hint);
            let (query, ground_truth) = match &q.ground_truth {
                Some(gt) => {
                    let pose =
                        pose_from_euler(Vector3::from(gt.xyz), gt.rpy[0], gt.rpy[1], gt.rpy[2]);
                    (reduce_to_query(&pose, hint), Some(pose))
                }
                None => (Ok(QueryPose::new(q.x, q.y, q.yaw, hint)), None),
            };
            queries.push(QueryItem {
                query,
                joints,
                ground_truth,
            });
        }
        if queries.is_empty() {
            return Err(ScenarioError::Invalid("scenario has no queries".into()));
        }
        Ok(Scenario {
            name: doc.name,
            seed,
            terrain,
            robot,
            queries,
        })
    }
}

/// Evenly spaced samples along a polyline with the heading of the current
/// segment. Includes the final waypoint.
pub fn sample_path(waypoints: &[[f64; 2]], spacing: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    let mut carry = 0.0;
    for w in waypoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let yaw = dy.atan2(dx);
        let mut s = carry;
        while s < len - 1e-9 {
            out.push((a[0] + dx * s / len, a[1] + dy * s / len, yaw));
            s += spacing;
        }
        carry = s - len;
    }
    if let (Some(last), Some(prev)) = (
        waypoints.last(),
        waypoints.len().checked_sub(2).map(|i| waypoints[i]),
    ) {
        let yaw = (last[1] - prev[1]).atan2(last[0] - prev[0]);
        out.push((last[0], last[1], yaw));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_sampling_is_even() {
        let pts = sample_path(&[[0.0, 0.0], [1.0, 0.0]], 0.25);
        assert_eq!(pts.len(), 5);
        assert!((pts[4].0 - 1.0).abs() < 1e-12);
        let pts = sample_path(&[[0.0, 0.0], [0.1, 0.0], [0.1, 0.1]], 0.05);
        assert_eq!(pts.len(), 5);
        assert!((pts[2].2 - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn inline_scenario_parses() {
        let text = r#"
            name = "flat"
            terrain = "arena:curb"
            robot = "builtin:asterix"
            [[query]]
            x = 0.6
            y = 1.1
            [[query]]
            ground_truth = { xyz = [0.6, 1.1, 0.1], rpy = [0.0, 0.0, 0.5] }
        "#;
        let s = Scenario::from_toml_str(text, Path::new("."), None).unwrap();
        assert_eq!(s.queries.len(), 2);
        let q = s.queries[1].query.as_ref().unwrap();
        assert!((q.yaw - 0.5).abs() < 1e-12);
        assert!((q.z_hint - s.terrain.bounds().center().z).abs() < 1e-12);
    }

    #[test]
    fn empty_scenario_is_rejected() {
        let text = "name = \"x\"\nterrain = \"arena:curb\"\nrobot = \"builtin:asterix\"\n";
        assert!(matches!(
            Scenario::from_toml_str(text, Path::new("."), None),
            Err(ScenarioError::Invalid(_))
        ));
    }
}
