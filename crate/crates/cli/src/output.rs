//! Result files: CSV tables, episode traces and the run manifest.
//!
//! Every file is written under a temporary name and renamed into place, so a
//! reader never sees a partial file.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use semimyopic_core::TraceStep;
use serde::Serialize;

use crate::harness::{CellStats, EpisodeRow, GridOutput, SweepPoint};

pub const EPISODES_FILE: &str = "episodes.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const TRACE_FILE: &str = "trace.txt";
pub const VOI_CURVE_FILE: &str = "voi_curve.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "verify_report.txt";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(io::Error::other)?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

/// CSV with a header even when there are no rows.
fn csv_with_header<R: Serialize>(header: &[&str], rows: &[R]) -> io::Result<Vec<u8>> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(io::Error::other)?;
        return w.into_inner().map_err(|e| io::Error::other(e.to_string()));
    }
    csv_bytes(rows)
}

const EPISODE_HEADER: &[&str] = &[
    "scheme",
    "n",
    "budget",
    "sigma_o2",
    "cost",
    "replicate",
    "seed",
    "selected",
    "best",
    "net_utility",
    "regret",
    "measurements",
];

pub fn episodes_csv(rows: &[EpisodeRow]) -> io::Result<Vec<u8>> {
    csv_with_header(EPISODE_HEADER, rows)
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    scheme_pair: String,
    sigma_o2: f64,
    cost: f64,
    mean_diff: f64,
    std_diff: f64,
    n_replicates: u32,
}

pub fn summary_csv(cells: &[CellStats]) -> io::Result<Vec<u8>> {
    let rows: Vec<SummaryRow> = cells
        .iter()
        .flat_map(|c| {
            c.pairs.iter().map(move |p| SummaryRow {
                scheme_pair: format!("{}-{}", p.first.name(), p.second.name()),
                sigma_o2: c.sigma_o2,
                cost: c.cost,
                mean_diff: p.mean_diff,
                std_diff: p.std_diff,
                n_replicates: c.n_replicates,
            })
        })
        .collect();
    csv_with_header(
        &[
            "scheme_pair",
            "sigma_o2",
            "cost",
            "mean_diff",
            "std_diff",
            "n_replicates",
        ],
        &rows,
    )
}

#[derive(Debug, Serialize)]
struct SweepRow {
    ratio: f64,
    drift_variance: f64,
    scheme_pair: String,
    utility_diff: f64,
    std_diff: f64,
    n_replicates: u32,
}

/// One row per ratio and scheme pair; `utility_diff` is
/// `regret(second) − regret(first)`, the first scheme's utility advantage.
pub fn sweep_csv(points: &[SweepPoint]) -> io::Result<Vec<u8>> {
    let rows: Vec<SweepRow> = points
        .iter()
        .flat_map(|pt| {
            pt.output.cells.iter().flat_map(move |c| {
                c.pairs.iter().map(move |p| SweepRow {
                    ratio: pt.ratio,
                    drift_variance: pt.drift_variance,
                    scheme_pair: format!("{}-{}", p.first.name(), p.second.name()),
                    utility_diff: -p.mean_diff,
                    std_diff: p.std_diff,
                    n_replicates: c.n_replicates,
                })
            })
        })
        .collect();
    csv_with_header(
        &[
            "ratio",
            "drift_variance",
            "scheme_pair",
            "utility_diff",
            "std_diff",
            "n_replicates",
        ],
        &rows,
    )
}

#[derive(Debug, Serialize)]
struct SweepEpisodeRow<'a> {
    ratio: f64,
    scheme: &'a str,
    n: usize,
    budget: u32,
    sigma_o2: f64,
    cost: f64,
    replicate: u32,
    seed: u64,
    selected: usize,
    best: usize,
    net_utility: f64,
    regret: f64,
    measurements: usize,
}

pub fn sweep_episodes_csv(points: &[SweepPoint]) -> io::Result<Vec<u8>> {
    let rows: Vec<SweepEpisodeRow> = points
        .iter()
        .flat_map(|pt| {
            pt.output.episodes.iter().map(move |e| SweepEpisodeRow {
                ratio: pt.ratio,
                scheme: &e.scheme,
                n: e.n,
                budget: e.budget,
                sigma_o2: e.sigma_o2,
                cost: e.cost,
                replicate: e.replicate,
                seed: e.seed,
                selected: e.selected,
                best: e.best,
                net_utility: e.net_utility,
                regret: e.regret,
                measurements: e.measurements,
            })
        })
        .collect();
    let mut header = vec!["ratio"];
    header.extend_from_slice(EPISODE_HEADER);
    csv_with_header(&header, &rows)
}

#[derive(Debug, Serialize)]
pub struct VoiCurveRow {
    pub k: u32,
    pub intrinsic: f64,
    pub cost: f64,
    pub net: f64,
}

pub fn voi_curve_csv(rows: &[VoiCurveRow]) -> io::Result<Vec<u8>> {
    csv_with_header(&["k", "intrinsic", "cost", "net"], rows)
}

/// One line per measurement: `step item observation net_voi`.
pub fn trace_text(trace: &[TraceStep], selected: usize) -> String {
    let mut out = String::from("# step item observation net_voi\n");
    for step in trace {
        out.push_str(&step.to_string());
        out.push('\n');
    }
    out.push_str(&format!("select {selected}\n"));
    out
}

/// Written before any result file of a run.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub started_unix_seconds: u64,
    pub master_seed: u64,
    pub files: Vec<String>,
    /// Resolved configuration in the `key = value` format.
    pub config: String,
}

impl RunManifest {
    pub fn new(command: &str, master_seed: u64, config: String, files: &[&str]) -> Self {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            started_unix_seconds: started,
            master_seed,
            files: files.iter().map(|f| f.to_string()).collect(),
            config,
        }
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(io::Error::other)?;
        write_atomic(&dir.join(MANIFEST_FILE), &json)
    }
}

/// Writes the manifest, then each `(file name, bytes)` result.
pub fn write_run(dir: &Path, manifest: &RunManifest, files: &[(&str, Vec<u8>)]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    manifest.write(dir)?;
    for (name, bytes) in files {
        write_atomic(&dir.join(name), bytes)?;
    }
    Ok(())
}

pub fn grid_files(out: &GridOutput) -> io::Result<Vec<(&'static str, Vec<u8>)>> {
    Ok(vec![
        (EPISODES_FILE, episodes_csv(&out.episodes)?),
        (SUMMARY_FILE, summary_csv(&out.cells)?),
    ])
}
