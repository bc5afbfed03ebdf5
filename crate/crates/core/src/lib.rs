//! Static pose prediction for tracked robots on terrain given as a Euclidean
//! signed distance field.
//!
//! A robot is reduced to a cloud of ground-facing contact candidates. The
//! settling solver drops the cloud onto the field and then tips it about the
//! least stable support edge until every tipover margin is positive. A
//! brute-force search over height, roll and pitch serves as a reference.
//!
//! Everything is generic over the scalar type; the aliases at the crate root
//! fix it to `f64` or `f32`.

pub mod arenas;
pub mod geometry;
pub mod oracle;
pub mod robot_model;
pub mod scalar;
pub mod sdf_map;
pub mod settling;
pub mod stability;

pub use geometry::{euler_of, pose_from_euler, rotation_distance, Pose};
pub use oracle::{settle_bruteforce, settle_bruteforce_with, OracleError, OracleParams};
pub use robot_model::{JointConfig, ModelError, RobotModel};
pub use scalar::Real;
pub use sdf_map::{Bounds, BuildOptions, EsdfMap, Heightmap, MapError, TerrainScene};
pub use settling::{
    predict_pose, settle, PredictionResult, QueryPose, SettleError, SettlingParams, Status,
};
pub use stability::{ContactState, StabilityResult, SupportPolygon};

pub type EsdfMapF64 = EsdfMap<f64>;
pub type EsdfMapF32 = EsdfMap<f32>;
pub type RobotModelF64 = RobotModel<f64>;
pub type RobotModelF32 = RobotModel<f32>;
pub type JointConfigF64 = JointConfig<f64>;
pub type QueryPoseF64 = QueryPose<f64>;
pub type SettlingParamsF64 = SettlingParams<f64>;
pub type PredictionResultF64 = PredictionResult<f64>;
pub type PredictionResultF32 = PredictionResult<f32>;
pub type OracleParamsF64 = OracleParams<f64>;
pub type PoseF64 = Pose<f64>;
