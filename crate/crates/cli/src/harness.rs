//! Experiment grids over (observation variance, measurement cost) and the
//! dependency sweep.
//!
//! Every (cell, replicate) pair is one work unit: one instance and one
//! observation-noise stream, shared by all schemes so that their regrets can
//! be compared pairwise. Units are independent and run in parallel; results
//! are collected in unit order, so output does not depend on thread count.

use rayon::prelude::*;
use semimyopic_core::{
    generate_instance, run_episode, ConstraintFamily, Dependency, EpisodeResult, EstimatorSettings,
    ExecutionMode, InstanceSpec, MeasurementModel, StreamKey,
};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub sigma_o2: Vec<f64>,
    pub costs: Vec<f64>,
    pub instance: InstanceSpec,
    pub budget: u32,
    pub replicates: u32,
    pub schemes: Vec<ConstraintFamily>,
    pub mode: ExecutionMode,
    pub master_seed: u64,
    pub settings: EstimatorSettings,
}

/// One CSV row per (cell, replicate, scheme).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub scheme: String,
    pub n: usize,
    pub budget: u32,
    pub sigma_o2: f64,
    pub cost: f64,
    pub replicate: u32,
    pub seed: u64,
    pub selected: usize,
    pub best: usize,
    pub net_utility: f64,
    pub regret: f64,
    pub measurements: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeStats {
    pub scheme: ConstraintFamily,
    pub mean_regret: f64,
    pub std_regret: f64,
}

/// Paired comparison `regret(first) - regret(second)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub first: ConstraintFamily,
    pub second: ConstraintFamily,
    pub mean_diff: f64,
    pub std_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub sigma_o2: f64,
    pub cost: f64,
    pub n_replicates: u32,
    pub schemes: Vec<SchemeStats>,
    pub pairs: Vec<PairStats>,
    /// Set when any episode of the cell failed (e.g. enumeration guard).
    pub error: Option<String>,
}

impl CellStats {
    pub fn pair(&self, first: ConstraintFamily, second: ConstraintFamily) -> Option<&PairStats> {
        self.pairs
            .iter()
            .find(|p| p.first == first && p.second == second)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub episodes: Vec<EpisodeRow>,
    pub cells: Vec<CellStats>,
}

impl GridOutput {
    /// Mean over successful cells of the paired difference `first - second`.
    pub fn grand_mean_diff(
        &self,
        first: ConstraintFamily,
        second: ConstraintFamily,
    ) -> Option<f64> {
        let diffs: Vec<f64> = self
            .cells
            .iter()
            .filter_map(|c| c.pair(first, second))
            .map(|p| p.mean_diff)
            .collect();
        (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

struct Unit {
    cell: usize,
    replicate: u32,
}

type UnitResult = Result<Vec<EpisodeResult>, String>;

fn run_unit(grid: &GridSpec, unit: &Unit) -> UnitResult {
    let si = unit.cell / grid.costs.len();
    let ci = unit.cell % grid.costs.len();
    let model =
        MeasurementModel::new(grid.sigma_o2[si], grid.costs[ci]).map_err(|e| e.to_string())?;
    let key = StreamKey::new(grid.master_seed)
        .child(unit.cell as u64)
        .child(unit.replicate as u64);
    let instance = generate_instance(&grid.instance, key).map_err(|e| e.to_string())?;
    grid.schemes
        .iter()
        .map(|&scheme| {
            run_episode(
                &instance,
                scheme,
                &model,
                &grid.instance.utility,
                grid.mode,
                grid.budget,
                key,
                &grid.settings,
            )
            .map_err(|e| format!("{scheme}: {e}"))
        })
        .collect()
}

/// Runs every cell and replicate of `grid` on `threads` worker threads
/// (0 = rayon default).
pub fn run_grid(grid: &GridSpec, threads: usize) -> GridOutput {
    let cells = grid.sigma_o2.len() * grid.costs.len();
    let units: Vec<Unit> = (0..cells)
        .flat_map(|cell| (0..grid.replicates).map(move |replicate| Unit { cell, replicate }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to build worker pool");
    let results: Vec<UnitResult> =
        pool.install(|| units.par_iter().map(|u| run_unit(grid, u)).collect());

    let mut episodes = Vec::new();
    let mut stats = Vec::with_capacity(cells);
    for cell in 0..cells {
        let si = cell / grid.costs.len();
        let ci = cell % grid.costs.len();
        let (sigma_o2, cost) = (grid.sigma_o2[si], grid.costs[ci]);
        let block =
            &results[cell * grid.replicates as usize..(cell + 1) * grid.replicates as usize];
        let mut error = None;
        let mut regrets: Vec<Vec<f64>> = vec![Vec::new(); grid.schemes.len()];
        for (replicate, res) in block.iter().enumerate() {
            match res {
                Ok(eps) => {
                    for (s, ep) in eps.iter().enumerate() {
                        regrets[s].push(ep.regret);
                        episodes.push(EpisodeRow {
                            scheme: grid.schemes[s].name().to_string(),
                            n: grid.instance.n,
                            budget: grid.budget,
                            sigma_o2,
                            cost,
                            replicate: replicate as u32,
                            seed: ep.seed,
                            selected: ep.selected,
                            best: ep.best,
                            net_utility: ep.net_utility,
                            regret: ep.regret,
                            measurements: ep.measurements,
                        });
                    }
                }
                Err(e) => {
                    error.get_or_insert_with(|| e.clone());
                }
            }
        }
        let (schemes, pairs) = if error.is_some() {
            (Vec::new(), Vec::new())
        } else {
            let schemes = grid
                .schemes
                .iter()
                .zip(&regrets)
                .map(|(&scheme, r)| {
                    let (mean_regret, std_regret) = mean_std(r);
                    SchemeStats {
                        scheme,
                        mean_regret,
                        std_regret,
                    }
                })
                .collect();
            let mut pairs = Vec::new();
            for a in 0..grid.schemes.len() {
                for b in a + 1..grid.schemes.len() {
                    let diffs: Vec<f64> = regrets[a]
                        .iter()
                        .zip(&regrets[b])
                        .map(|(x, y)| x - y)
                        .collect();
                    let (mean_diff, std_diff) = mean_std(&diffs);
                    pairs.push(PairStats {
                        first: grid.schemes[a],
                        second: grid.schemes[b],
                        mean_diff,
                        std_diff,
                    });
                }
            }
            (schemes, pairs)
        };
        stats.push(CellStats {
            sigma_o2,
            cost,
            n_replicates: grid.replicates,
            schemes,
            pairs,
            error,
        });
    }
    GridOutput {
        episodes,
        cells: stats,
    }
}

/// Dependency-strength sweep: blinkered against omni-myopic on coupled
/// chains at several ratios `σ_o² / σ_w²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub ratios: Vec<f64>,
    pub instance: InstanceSpec,
    pub noise_variance: f64,
    pub cost: f64,
    pub budget: u32,
    pub replicates: u32,
    pub schemes: Vec<ConstraintFamily>,
    pub mode: ExecutionMode,
    pub master_seed: u64,
    pub settings: EstimatorSettings,
}

/// Drift variance standing in for "no dependency" (ratio 0).
pub const INDEPENDENT_DRIFT: f64 = 1e8;

impl SweepSpec {
    /// 5 items with `N(0, 1)` priors, `σ_o² = 4`, `C = 0.002`, budget 10.
    pub fn standard(master_seed: u64) -> Self {
        Self {
            ratios: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0],
            instance: InstanceSpec {
                known_item: None,
                dependency: Dependency::Coupled {
                    drift_variance: 1.0,
                },
                ..InstanceSpec::anchored(5)
            },
            noise_variance: 4.0,
            cost: 0.002,
            budget: 10,
            replicates: 100,
            schemes: vec![ConstraintFamily::Blinkered, ConstraintFamily::OmniMyopic],
            mode: ExecutionMode::SingleStep,
            master_seed,
            settings: EstimatorSettings::default(),
        }
    }
}

pub fn drift_for_ratio(noise_variance: f64, ratio: f64) -> f64 {
    if ratio <= 0.0 {
        INDEPENDENT_DRIFT
    } else {
        noise_variance / ratio
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub ratio: f64,
    pub drift_variance: f64,
    pub output: GridOutput,
}

impl SweepPoint {
    /// Utility advantage of the first scheme: `regret(second) - regret(first)`.
    pub fn utility_difference(&self) -> Option<f64> {
        let cell = self.output.cells.first()?;
        let p = cell.pairs.first()?;
        Some(-p.mean_diff)
    }
}

pub fn dependency_sweep(sweep: &SweepSpec, threads: usize) -> Vec<SweepPoint> {
    sweep
        .ratios
        .iter()
        .map(|&ratio| {
            let drift_variance = drift_for_ratio(sweep.noise_variance, ratio);
            let dependency = match sweep.instance.dependency {
                Dependency::RandomWalk { .. } => Dependency::RandomWalk { drift_variance },
                _ => Dependency::Coupled { drift_variance },
            };
            let grid = GridSpec {
                sigma_o2: vec![sweep.noise_variance],
                costs: vec![sweep.cost],
                instance: InstanceSpec {
                    dependency,
                    ..sweep.instance.clone()
                },
                budget: sweep.budget,
                replicates: sweep.replicates,
                schemes: sweep.schemes.clone(),
                mode: sweep.mode,
                master_seed: sweep.master_seed,
                settings: sweep.settings,
            };
            SweepPoint {
                ratio,
                drift_variance,
                output: run_grid(&grid, threads),
            }
        })
        .collect()
}
