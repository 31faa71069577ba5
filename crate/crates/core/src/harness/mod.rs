//! Monte Carlo comparison of matched and mismatched (Gaussian) estimation.
//!
//! A sweep visits every cell `(structure, noise family, SNR, M)` and, for each
//! repeat, simulates one measurement set and estimates the structure twice
//! from identical initializations: once with the true noise density and once
//! with a Gaussian of the same variance.

mod io;
mod summary;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimateResult, OptimizerSettings};
use crate::geometry::{self, edge_lengths, mean_edge_length, PointSet};
use crate::likelihood::{LikelihoodSpec, MeasurementSet};
use crate::noise::{snr_to_sigma2, NoiseFamily, NoiseModel, DEFAULT_NSST_NU};
use crate::procrustes::opp_loss;
use crate::seed::StreamKey;

pub use io::{
    format_float, pairwise_path, pairwise_to_csv, plot_data_tsv, plot_path, read_results,
    results_from_csv, results_to_csv, summary_to_csv, write_plot_data, write_results,
    write_summary, RESULTS_HEADER,
};
pub use summary::{percentile, summarize, PairwiseRow, Percentiles, SummaryRow, SummaryTable, AGGREGATE_ID};

const MIN_TRIANGLE_EDGE: f64 = 0.1;
const MIN_TRIANGLE_ANGLE_DEG: f64 = 10.0;
const MIN_CLOUD_SEPARATION: f64 = 0.05;

fn unit_square_point<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    [u.sample(rng), u.sample(rng)]
}

fn min_angle_deg(p: &[[f64; 2]; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
            cos.clamp(-1.0, 1.0).acos().to_degrees()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random non-degenerate triangles with vertices in `[-1, 1]^2`.
pub fn generate_triangles<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<PointSet> {
    (0..count)
        .map(|k| loop {
            let p = [unit_square_point(rng), unit_square_point(rng), unit_square_point(rng)];
            let ps = PointSet::from_points(format!("tri-{k:02}"), &p).expect("3 finite 2D points");
            let shortest = edge_lengths(&ps).lengths().iter().copied().fold(f64::INFINITY, f64::min);
            if shortest >= MIN_TRIANGLE_EDGE && min_angle_deg(&p) >= MIN_TRIANGLE_ANGLE_DEG {
                break ps;
            }
        })
        .collect()
}

/// Random `n_points` configurations in `[-1, 1]^2` with pairwise separation
/// of at least 0.05.
pub fn generate_point_clouds<R: Rng + ?Sized>(count: usize, n_points: usize, rng: &mut R) -> Vec<PointSet> {
    let n_points = n_points.max(2);
    (0..count)
        .map(|k| {
            let mut points: Vec<[f64; 2]> = Vec::with_capacity(n_points);
            while points.len() < n_points {
                let p = unit_square_point(rng);
                if points
                    .iter()
                    .all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= MIN_CLOUD_SEPARATION)
                {
                    points.push(p);
                }
            }
            PointSet::from_points(format!("cloud-{k:02}"), &points).expect("finite 2D points")
        })
        .collect()
}

/// Where a sweep gets its ground-truth structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSource {
    Triangles { count: usize, seed: u64 },
    Clouds { count: usize, n_points: usize, seed: u64 },
    /// A structures JSON file, relative to the config file.
    File(PathBuf),
}

impl StructureSource {
    pub fn resolve(&self, base_dir: &Path) -> Result<Vec<PointSet>> {
        match self {
            StructureSource::Triangles { count, seed } => {
                Ok(generate_triangles(*count, &mut StreamKey::new(*seed).with_str("triangles").rng()))
            }
            StructureSource::Clouds { count, n_points, seed } => Ok(generate_point_clouds(
                *count,
                *n_points,
                &mut StreamKey::new(*seed).with_str("clouds").rng(),
            )),
            StructureSource::File(path) => geometry::read_structures(&base_dir.join(path)),
        }
    }
}

pub fn default_snr_grid() -> Vec<f64> {
    (0..9).map(|k| -20.0 + 5.0 * k as f64).collect()
}

fn default_m_values() -> Vec<usize> {
    vec![10, 25, 50, 100]
}

fn default_repeats() -> usize {
    100
}

fn default_nu() -> u32 {
    DEFAULT_NSST_NU
}

fn default_families() -> Vec<NoiseFamily> {
    vec![NoiseFamily::Laplace, NoiseFamily::Nsst]
}

/// On-disk sweep configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfigFile {
    pub structures: StructureSource,
    #[serde(default = "default_families")]
    pub noise_families: Vec<NoiseFamily>,
    #[serde(default = "default_nu")]
    pub nsst_nu: u32,
    #[serde(default = "default_snr_grid")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_m_values")]
    pub m_values: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl SweepConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Loads structures (relative to `base_dir`) and validates the result.
    pub fn resolve(&self, base_dir: &Path) -> Result<SweepConfig> {
        let config = self.with_structures(self.structures.resolve(base_dir)?);
        config.validate()?;
        Ok(config)
    }

    /// The sweep over already-loaded structures, not yet validated.
    pub fn with_structures(&self, structures: Vec<PointSet>) -> SweepConfig {
        SweepConfig {
            structures,
            noise_families: self.noise_families.clone(),
            nsst_nu: self.nsst_nu,
            snr_grid_db: self.snr_grid_db.clone(),
            m_values: self.m_values.clone(),
            repeats: self.repeats,
            seed: self.seed,
            optimizer: self.optimizer,
        }
    }
}

/// A fully resolved sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub structures: Vec<PointSet>,
    pub noise_families: Vec<NoiseFamily>,
    pub nsst_nu: u32,
    pub snr_grid_db: Vec<f64>,
    pub m_values: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub optimizer: OptimizerSettings,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.structures.is_empty() {
            return Err(Error::invalid("sweep needs at least one structure"));
        }
        let mut ids = HashSet::new();
        for s in &self.structures {
            if !ids.insert(s.id()) {
                return Err(Error::invalid(format!("duplicate structure id {}", s.id())));
            }
        }
        if self.noise_families.is_empty() {
            return Err(Error::invalid("noise_families is empty"));
        }
        if self.noise_families.contains(&NoiseFamily::Gaussian) {
            return Err(Error::invalid(
                "gaussian noise makes matched and mismatched estimation identical; use laplace or nsst",
            ));
        }
        if self.nsst_nu < 3 {
            return Err(Error::invalid(format!("nsst_nu must be at least 3, got {}", self.nsst_nu)));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::invalid("snr_grid_db is empty"));
        }
        if let Some(s) = self.snr_grid_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite snr {s}")));
        }
        if self.m_values.is_empty() {
            return Err(Error::invalid("m_values is empty"));
        }
        if self.m_values.contains(&0) {
            return Err(Error::invalid("m_values must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        self.optimizer.validate()
    }

    pub fn n_cells(&self) -> usize {
        self.structures.len() * self.noise_families.len() * self.snr_grid_db.len() * self.m_values.len()
    }

    pub fn expected_records(&self) -> usize {
        self.n_cells() * self.repeats * 2
    }

    /// Cells in canonical order: structure, family, SNR, M.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::with_capacity(self.n_cells());
        for structure in 0..self.structures.len() {
            for family in 0..self.noise_families.len() {
                for snr in 0..self.snr_grid_db.len() {
                    for m in 0..self.m_values.len() {
                        cells.push(Cell { structure, family, snr, m });
                    }
                }
            }
        }
        cells
    }

    fn stream(&self, cell: Cell, repeat: usize, purpose: &str) -> StreamKey {
        StreamKey::new(self.seed)
            .with_str(self.structures[cell.structure].id())
            .with_str(self.noise_families[cell.family].name())
            .with_u64(cell.snr as u64)
            .with_u64(cell.m as u64)
            .with_u64(repeat as u64)
            .with_str(purpose)
    }

    /// Noise model producing the cell's SNR on its structure.
    pub fn true_model(&self, cell: Cell) -> Result<NoiseModel> {
        let sigma2 = self.sigma2(cell);
        NoiseModel::from_target_variance(self.noise_families[cell.family], sigma2, Some(self.nsst_nu))
    }

    fn sigma2(&self, cell: Cell) -> f64 {
        let sigma_x = mean_edge_length(&self.structures[cell.structure]);
        snr_to_sigma2(self.snr_grid_db[cell.snr], sigma_x)
    }

    /// The measurements both estimators see for one repeat of a cell.
    pub fn measurements(&self, cell: Cell, repeat: usize) -> Result<MeasurementSet> {
        let model = self.true_model(cell)?;
        let mut rng = self.stream(cell, repeat, "measurements").rng();
        MeasurementSet::simulate(&self.structures[cell.structure], &model, self.m_values[cell.m], &mut rng)
    }

    /// Matched and mismatched estimates for one repeat, from shared initializations.
    pub fn run_repeat(&self, cell: Cell, repeat: usize) -> Result<RepeatOutcome> {
        let truth = &self.structures[cell.structure];
        let meas = self.measurements(cell, repeat)?;
        let matched_spec = LikelihoodSpec::new(self.true_model(cell)?);
        let mismatched_spec = LikelihoodSpec::new(NoiseModel::gaussian(self.sigma2(cell))?);
        let init = self.stream(cell, repeat, "init").rng();
        let (n, k) = (truth.n_points(), truth.dim());
        let matched = estimate(&meas, &matched_spec, n, k, &self.optimizer, &mut init.clone())?;
        let mismatched = estimate(&meas, &mismatched_spec, n, k, &self.optimizer, &mut init.clone())?;
        Ok(RepeatOutcome { measurements: meas, matched, mismatched })
    }

    fn cell_records(&self, cell: Cell) -> Result<Vec<SweepRecord>> {
        let truth = &self.structures[cell.structure];
        let family = self.noise_families[cell.family];
        let mut out = Vec::with_capacity(2 * self.repeats);
        for repeat in 0..self.repeats {
            let outcome = self.run_repeat(cell, repeat).map_err(|e| Error::Cell {
                context: format!(
                    "cell structure={} noise={} snr_db={} m={} repeat={repeat}",
                    truth.id(),
                    family,
                    self.snr_grid_db[cell.snr],
                    self.m_values[cell.m]
                ),
                source: Box::new(e),
            })?;
            for (likelihood, est) in [(family, &outcome.matched), (NoiseFamily::Gaussian, &outcome.mismatched)] {
                out.push(SweepRecord {
                    structure_id: truth.id().to_owned(),
                    noise_family: family,
                    likelihood_family: likelihood,
                    snr_db: self.snr_grid_db[cell.snr],
                    m: self.m_values[cell.m],
                    repeat,
                    opp_loss: opp_loss(&est.estimate, truth)?,
                    final_nll: est.final_nll,
                    converged: est.converged,
                    restart_index: est.restart_index,
                });
            }
        }
        Ok(out)
    }
}

/// Indices of one sweep cell into the config's lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub structure: usize,
    pub family: usize,
    pub snr: usize,
    pub m: usize,
}

#[derive(Debug, Clone)]
pub struct RepeatOutcome {
    pub measurements: MeasurementSet,
    pub matched: EstimateResult,
    pub mismatched: EstimateResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub structure_id: String,
    pub noise_family: NoiseFamily,
    pub likelihood_family: NoiseFamily,
    pub snr_db: f64,
    pub m: usize,
    pub repeat: usize,
    pub opp_loss: f64,
    pub final_nll: f64,
    pub converged: bool,
    pub restart_index: usize,
}

impl SweepRecord {
    pub fn is_matched(&self) -> bool {
        self.likelihood_family == self.noise_family
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
}

/// Execution options that do not affect the output.
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Worker threads; 0 or 1 runs on the calling thread.
    pub workers: usize,
    /// Called with `(completed_cells, total_cells)` after each cell.
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    run_sweep_with(config, &RunOptions::default())
}

/// Runs every cell. The output is in canonical order and does not depend on
/// the worker count.
pub fn run_sweep_with(config: &SweepConfig, options: &RunOptions<'_>) -> Result<SweepResult> {
    config.validate()?;
    let cells = config.cells();
    let total = cells.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let run_cell = |cell: &Cell| {
        let r = config.cell_records(*cell);
        let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        if let Some(p) = options.progress {
            p(n, total);
        }
        r
    };

    let per_cell: Vec<Result<Vec<SweepRecord>>> = if options.workers > 1 {
        run_parallel(&cells, options.workers, &run_cell)?
    } else {
        cells.iter().map(run_cell).collect()
    };
    let mut records = Vec::with_capacity(config.expected_records());
    for r in per_cell {
        records.extend(r?);
    }
    Ok(SweepResult { records })
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(cells: &[Cell], workers: usize, run_cell: &F) -> Result<Vec<Result<Vec<SweepRecord>>>>
where
    F: Fn(&Cell) -> Result<Vec<SweepRecord>> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(run_cell).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(cells: &[Cell], _workers: usize, run_cell: &F) -> Result<Vec<Result<Vec<SweepRecord>>>>
where
    F: Fn(&Cell) -> Result<Vec<SweepRecord>> + Sync,
{
    Ok(cells.iter().map(run_cell).collect())
}
