//! Result rows, summary statistics and CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::Isometry3;
use serde::Serialize;

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub query_index: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub z_hint: f64,
    pub status: String,
    pub pred_x: Option<f64>,
    pub pred_y: Option<f64>,
    pub pred_z: Option<f64>,
    pub pred_qw: Option<f64>,
    pub pred_qx: Option<f64>,
    pub pred_qy: Option<f64>,
    pub pred_qz: Option<f64>,
    pub pos_err_m: Option<f64>,
    pub rot_err_rad: Option<f64>,
    pub time_us: Option<f64>,
}

impl ResultRow {
    pub fn set_pose(&mut self, pose: &Isometry3<f64>) {
        let t = pose.translation.vector;
        let q = pose.rotation.quaternion();
        self.pred_x = Some(t.x);
        self.pred_y = Some(t.y);
        self.pred_z = Some(t.z);
        self.pred_qw = Some(q.w);
        self.pred_qx = Some(q.i);
        self.pred_qy = Some(q.j);
        self.pred_qz = Some(q.k);
    }
}

/// One line of `oracle.csv`: the brute-force pose and its distance to the
/// prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub query_index: usize,
    pub status: String,
    pub oracle_x: Option<f64>,
    pub oracle_y: Option<f64>,
    pub oracle_z: Option<f64>,
    pub oracle_roll: Option<f64>,
    pub oracle_pitch: Option<f64>,
    pub pos_delta_m: Option<f64>,
    pub rot_delta_rad: Option<f64>,
    pub time_us: Option<f64>,
}

/// One line of `plotdata.csv`: per-axis differences against the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub query_index: usize,
    pub reference: &'static str,
    pub err_x: f64,
    pub err_y: f64,
    pub err_z: f64,
    pub err_roll: f64,
    pub err_pitch: f64,
    pub err_yaw: f64,
}

/// Mean, population standard deviation, minimum and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Stats {
            count: v.len(),
            mean,
            std: var.sqrt(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub queries: usize,
    pub converged: usize,
    pub status_counts: Vec<(String, usize)>,
    pub pos_err: Option<Stats>,
    pub rot_err: Option<Stats>,
    pub time_us: Option<Stats>,
    pub oracle_pos_delta: Option<Stats>,
    pub oracle_rot_delta: Option<Stats>,
}

impl Summary {
    pub fn from_rows(scenario: &str, rows: &[ResultRow], oracle: &[OracleRow]) -> Self {
        let mut status_counts: Vec<(String, usize)> = Vec::new();
        for r in rows {
            match status_counts.iter_mut().find(|(s, _)| *s == r.status) {
                Some((_, n)) => *n += 1,
                None => status_counts.push((r.status.clone(), 1)),
            }
        }
        status_counts.sort();
        Summary {
            scenario: scenario.to_string(),
            queries: rows.len(),
            converged: rows.iter().filter(|r| r.status == "converged").count(),
            status_counts,
            pos_err: Stats::of(rows.iter().filter_map(|r| r.pos_err_m)),
            rot_err: Stats::of(rows.iter().filter_map(|r| r.rot_err_rad)),
            time_us: Stats::of(rows.iter().filter_map(|r| r.time_us)),
            oracle_pos_delta: Stats::of(oracle.iter().filter_map(|r| r.pos_delta_m)),
            oracle_rot_delta: Stats::of(oracle.iter().filter_map(|r| r.rot_delta_rad)),
        }
    }

    /// Plain `key = value` block, one statistic per line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "scenario = {}\nqueries = {}\nconverged = {}\n",
            self.scenario, self.queries, self.converged
        );
        for (status, n) in &self.status_counts {
            s.push_str(&format!("status.{status} = {n}\n"));
        }
        let block = |s: &mut String, name: &str, st: &Option<Stats>| {
            if let Some(st) = st {
                s.push_str(&format!(
                    "{name}.count = {}\n{name}.mean = {:e}\n{name}.std = {:e}\n{name}.min = {:e}\n{name}.max = {:e}\n",
                    st.count, st.mean, st.std, st.min, st.max
                ));
            }
        };
        block(&mut s, "pos_err_m", &self.pos_err);
        block(&mut s, "rot_err_rad", &self.rot_err);
        block(&mut s, "time_us", &self.time_us);
        block(&mut s, "oracle_pos_delta_m", &self.oracle_pos_delta);
        block(&mut s, "oracle_rot_delta_rad", &self.oracle_rot_delta);
        s
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_match_hand_values() {
        let s = Stats::of([1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!((s.min, s.max, s.count), (1.0, 4.0, 4));
        assert!(Stats::of(std::iter::empty()).is_none());
    }
}
