use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use trackpose::sdf_map::{read_map, write_map, DEFAULT_VOXEL_SIZE};
use trackpose::{euler_of, predict_pose, JointConfig, QueryPose, SettlingParams};
use trackpose_bench::scenario::{load_robot, Scenario, Terrain};
use trackpose_bench::{run_benchmark, RunOptions};

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Pose prediction benchmarks on synthetic terrain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every query of a scenario and write CSV reports.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_VOXEL_SIZE)]
        voxel_size: f64,
        /// Also run the brute-force search and report deltas.
        #[arg(long)]
        oracle: bool,
        /// Roll/pitch step of the brute-force search (degrees).
        #[arg(long, default_value_t = 0.25)]
        oracle_angle_step: f64,
        #[arg(long, value_name = "N")]
        parallel: Option<usize>,
        /// Exit 0 even if some queries fail to settle.
        #[arg(long)]
        keep_going: bool,
        #[arg(long)]
        emit_plotdata: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a terrain into a map cache file.
    BuildMap {
        /// Scene (.toml), heightmap (.txt) or `arena:<name>`.
        #[arg(long)]
        terrain: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_VOXEL_SIZE)]
        voxel_size: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Predict a single pose and print it as one JSON line.
    Predict {
        #[arg(long)]
        map: PathBuf,
        /// Robot config path or `builtin:<name>`.
        #[arg(long)]
        robot: String,
        /// "x y yaw z" with yaw in radians.
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        /// TOML table of joint angles (rad).
        #[arg(long)]
        joints: Option<PathBuf>,
    },
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var("BENCH_SEED") {
        Ok(s) => {
            Ok(Some(s.trim().parse().with_context(|| {
                format!("BENCH_SEED '{s}' is not an integer")
            })?))
        }
        Err(_) => Ok(None),
    }
}

fn parse_pose(text: &str) -> Result<QueryPose<f64>> {
    let v: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("bad number '{t}' in --pose"))
        })
        .collect::<Result<_>>()?;
    if v.len() != 4 {
        bail!("--pose needs four numbers \"x y yaw z\", got {}", v.len());
    }
    Ok(QueryPose::new(v[0], v[1], v[2], v[3]))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            voxel_size,
            oracle,
            oracle_angle_step,
            parallel,
            keep_going,
            emit_plotdata,
            out,
        } => {
            let sc = Scenario::load(&scenario, seed_override()?)
                .with_context(|| format!("loading {}", scenario.display()))?;
            let opts = RunOptions {
                voxel_size,
                oracle,
                oracle_angle_step_deg: oracle_angle_step,
                parallel,
                emit_plotdata,
                out_dir: out,
            };
            let outcome = run_benchmark(&sc, &opts)?;
            print!("{}", outcome.summary.to_text());
            if outcome.has_failures() && !keep_going {
                eprintln!("some queries did not converge (use --keep-going to ignore)");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::BuildMap {
            terrain,
            out,
            voxel_size,
            seed,
        } => {
            let t = Terrain::load(&terrain, std::path::Path::new("."), seed)?;
            let map = t.build_map(voxel_size)?;
            let file = std::fs::File::create(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            write_map(&map, std::io::BufWriter::new(file))?;
            let [nx, ny, nz] = map.dims();
            println!("wrote {} ({nx} x {ny} x {nz} voxels)", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict {
            map,
            robot,
            pose,
            joints,
        } => {
            let file =
                std::fs::File::open(&map).with_context(|| format!("opening {}", map.display()))?;
            let map = read_map::<f64, _>(std::io::BufReader::new(file))?;
            let model = load_robot(&robot, std::path::Path::new("."))?;
            let q = match joints {
                Some(p) => JointConfig::from_toml_str(&std::fs::read_to_string(&p)?)?,
                None => JointConfig::new(),
            };
            let query = parse_pose(&pose)?;
            let res = predict_pose(&map, &model, &q, &query, &SettlingParams::default())?;
            let (roll, pitch, yaw) = euler_of(&res.pose);
            let t: Vector3<f64> = res.pose.translation.vector;
            let quat = res.pose.rotation.quaternion();
            let line = serde_json::json!({
                "status": res.status.as_str(),
                "x": t.x, "y": t.y, "z": t.z,
                "roll": roll, "pitch": pitch, "yaw": yaw,
                "qw": quat.w, "qx": quat.i, "qy": quat.j, "qz": quat.k,
                "contacts": res.contacts.len(),
                "beta_min": res.stability.as_ref().map(|s| s.min),
                "fall_iters": res.fall_iters,
                "rotation_stages": res.rotation_stages,
                "rotation_iters": res.total_rot_iters,
                "time_us": res.elapsed.as_secs_f64() * 1e6,
            });
            println!("{line}");
            Ok(if res.converged() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
