//! Benchmark harness: runs pose predictions over a scenario, compares them
//! with ground truth or the brute-force search, and writes CSV reports.

pub mod metrics;
pub mod report;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use trackpose::{
    euler_of, predict_pose, settle_bruteforce, EsdfMap, OracleParams, SettlingParams, Status,
};

use metrics::{axis_errors, pose_errors};
use report::{write_csv, write_text, OracleRow, PlotRow, ResultRow, Summary};
use scenario::{QueryItem, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub voxel_size: f64,
    pub oracle: bool,
    /// Oracle roll/pitch grid step (degrees).
    pub oracle_angle_step_deg: f64,
    /// Worker threads; `None` runs on the calling thread.
    pub parallel: Option<usize>,
    pub emit_plotdata: bool,
    pub out_dir: PathBuf,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            voxel_size: trackpose::sdf_map::DEFAULT_VOXEL_SIZE,
            oracle: false,
            oracle_angle_step_deg: 0.25,
            parallel: None,
            emit_plotdata: false,
            out_dir: out_dir.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<ResultRow>,
    pub oracle_rows: Vec<OracleRow>,
    pub plot_rows: Vec<PlotRow>,
    pub summary: Summary,
}

impl BenchOutcome {
    /// Whether any query failed to settle.
    pub fn has_failures(&self) -> bool {
        self.rows
            .iter()
            .any(|r| r.status != Status::Converged.as_str())
    }
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const PLOTDATA_FILE: &str = "plotdata.csv";

struct Evaluated {
    row: ResultRow,
    oracle: Option<OracleRow>,
    plot: Option<PlotRow>,
}

fn evaluate(
    index: usize,
    item: &QueryItem,
    scenario: &Scenario,
    map: &EsdfMap<f64>,
    opts: &RunOptions,
) -> Result<Evaluated> {
    let mut row = ResultRow {
        query_index: index,
        x: f64::NAN,
        y: f64::NAN,
        yaw: f64::NAN,
        z_hint: f64::NAN,
        status: String::new(),
        pred_x: None,
        pred_y: None,
        pred_z: None,
        pred_qw: None,
        pred_qx: None,
        pred_qy: None,
        pred_qz: None,
        pos_err_m: None,
        rot_err_rad: None,
        time_us: None,
    };
    let query = match &item.query {
        Ok(q) => *q,
        Err(_) => {
            row.status = "gimbal_ambiguity".into();
            return Ok(Evaluated {
                row,
                oracle: None,
                plot: None,
            });
        }
    };
    row.x = query.x;
    row.y = query.y;
    row.yaw = query.yaw;
    row.z_hint = query.z_hint;

    let params = SettlingParams::default();
    let pred = predict_pose(map, &scenario.robot, &item.joints, &query, &params)
        .with_context(|| format!("query {index}"))?;
    row.status = pred.status.as_str().into();
    row.time_us = Some(pred.elapsed.as_secs_f64() * 1e6);
    row.set_pose(&pred.pose);
    let mut plot = None;
    if let Some(gt) = &item.ground_truth {
        let (p, r) = pose_errors(gt, &pred.pose);
        row.pos_err_m = Some(p);
        row.rot_err_rad = Some(r);
        plot = Some(plot_row(index, "ground_truth", gt, &pred.pose));
    }

    let mut oracle = None;
    if opts.oracle {
        let oparams =
            OracleParams::for_map(map).with_angle_step(opts.oracle_angle_step_deg.to_radians());
        let mut orow = OracleRow {
            query_index: index,
            status: String::new(),
            oracle_x: None,
            oracle_y: None,
            oracle_z: None,
            oracle_roll: None,
            oracle_pitch: None,
            pos_delta_m: None,
            rot_delta_rad: None,
            time_us: None,
        };
        match settle_bruteforce(map, &scenario.robot, &item.joints, &query, &oparams) {
            Ok(o) => {
                let (roll, pitch, _) = euler_of(&o.pose);
                let (p, r) = pose_errors(&o.pose, &pred.pose);
                orow.status = "converged".into();
                orow.oracle_x = Some(o.pose.translation.x);
                orow.oracle_y = Some(o.pose.translation.y);
                orow.oracle_z = Some(o.pose.translation.z);
                orow.oracle_roll = Some(roll);
                orow.oracle_pitch = Some(pitch);
                orow.pos_delta_m = Some(p);
                orow.rot_delta_rad = Some(r);
                orow.time_us = Some(o.elapsed.as_secs_f64() * 1e6);
                if plot.is_none() {
                    plot = Some(plot_row(index, "oracle", &o.pose, &pred.pose));
                }
            }
            Err(trackpose::OracleError::NoFeasiblePose) => orow.status = "no_feasible_pose".into(),
            Err(e) => return Err(e).with_context(|| format!("oracle for query {index}")),
        }
        oracle = Some(orow);
    }
    Ok(Evaluated { row, oracle, plot })
}

fn plot_row(
    index: usize,
    reference: &'static str,
    a: &nalgebra::Isometry3<f64>,
    b: &nalgebra::Isometry3<f64>,
) -> PlotRow {
    let e = axis_errors(a, b);
    PlotRow {
        query_index: index,
        reference,
        err_x: e[0],
        err_y: e[1],
        err_z: e[2],
        err_roll: e[3],
        err_pitch: e[4],
        err_yaw: e[5],
    }
}

/// Runs every query of `scenario` and writes the reports into `opts.out_dir`.
pub fn run_benchmark(scenario: &Scenario, opts: &RunOptions) -> Result<BenchOutcome> {
    for item in &scenario.queries {
        scenario.robot.joint_positions(&item.joints)?;
    }
    let map = scenario.terrain.build_map(opts.voxel_size)?;
    let run = || -> Result<Vec<Evaluated>> {
        match opts.parallel {
            Some(_) => scenario
                .queries
                .par_iter()
                .enumerate()
                .map(|(i, q)| evaluate(i, q, scenario, &map, opts))
                .collect(),
            None => scenario
                .queries
                .iter()
                .enumerate()
                .map(|(i, q)| evaluate(i, q, scenario, &map, opts))
                .collect(),
        }
    };
    let evaluated = match opts.parallel {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()?
            .install(run)?,
        None => run()?,
    };

    let mut rows = Vec::with_capacity(evaluated.len());
    let mut oracle_rows = Vec::new();
    let mut plot_rows = Vec::new();
    for e in evaluated {
        rows.push(e.row);
        oracle_rows.extend(e.oracle);
        plot_rows.extend(e.plot);
    }
    let summary = Summary::from_rows(&scenario.name, &rows, &oracle_rows);
    write_outputs(
        &opts.out_dir,
        &rows,
        &oracle_rows,
        &plot_rows,
        &summary,
        opts,
    )?;
    Ok(BenchOutcome {
        rows,
        oracle_rows,
        plot_rows,
        summary,
    })
}

fn write_outputs(
    dir: &Path,
    rows: &[ResultRow],
    oracle_rows: &[OracleRow],
    plot_rows: &[PlotRow],
    summary: &Summary,
    opts: &RunOptions,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_csv(&dir.join(RESULTS_FILE), rows)?;
    write_text(&dir.join(SUMMARY_FILE), &summary.to_text())?;
    if opts.oracle {
        write_csv(&dir.join(ORACLE_FILE), oracle_rows)?;
    }
    if opts.emit_plotdata {
        write_csv(&dir.join(PLOTDATA_FILE), plot_rows)?;
    }
    Ok(())
}
