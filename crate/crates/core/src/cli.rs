//! The `dgp` command line.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on runtime
//! errors. Progress goes to stderr, data summaries to stdout.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimator::{estimate, OptimizerSettings};
use crate::geometry::{mean_edge_length, read_structures, write_structures, PointSet};
use crate::harness::{
    self, format_float, generate_point_clouds, generate_triangles, plot_path, summarize, RunOptions,
    SweepConfigFile, SweepResult, SummaryTable, AGGREGATE_ID,
};
use crate::likelihood::{LikelihoodSpec, MeasurementSet};
use crate::noise::{snr_to_sigma2, NoiseFamily, NoiseModel, DEFAULT_NSST_NU};
use crate::procrustes::opp_loss;
use crate::seed::StreamKey;

#[derive(Debug, Parser)]
#[command(name = "dgp", version, about = "Matched vs mismatched likelihood estimation from noisy pairwise distances")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StructureKind {
    Triangle,
    Cloud,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate random ground-truth structures and write them as JSON.
    Gen {
        /// Structure kind: non-degenerate triangles or N-point clouds.
        #[arg(long, value_enum)]
        kind: StructureKind,
        /// Number of structures.
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Points per cloud (ignored for triangles).
        #[arg(long, default_value_t = 10)]
        n_points: usize,
        /// Random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output structures JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one cell per structure, estimate, and write OPP losses as CSV.
    Estimate {
        /// Structures JSON file.
        #[arg(long)]
        structures: PathBuf,
        /// True noise: `laplace`, `nsst`, `nsst:nu=<int>` (scaled by --snr-db) or a
        /// full model such as `laplace:theta=0.1`.
        #[arg(long, value_parser = parse_noise_arg)]
        noise: NoiseArg,
        /// Assumed likelihood: `matched`, a family name (variance from the noise) or a full model.
        #[arg(long, value_parser = parse_likelihood_arg, default_value = "gaussian")]
        likelihood: LikelihoodArg,
        /// Signal-to-noise ratio in dB relative to each structure's mean edge length.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        /// Measurements per edge.
        #[arg(long, default_value_t = 10)]
        m: usize,
        /// Degrees of freedom for NSST noise given by family name.
        #[arg(long, default_value_t = DEFAULT_NSST_NU)]
        nu: u32,
        /// Random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optimizer restarts per estimate.
        #[arg(long)]
        restarts: Option<usize>,
        /// Also write each structure's simulated measurements as `<dir>/<id>.json`.
        #[arg(long)]
        measurements_dir: Option<PathBuf>,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full SNR/M sweep from a JSON config.
    Sweep {
        /// Sweep config JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv, summary.csv, summary_pairwise.csv and summary_plot.tsv.
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's repeat count.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Recompute summary, pairwise and plot-data files from a results CSV.
    Report {
        /// Results CSV written by `sweep`.
        #[arg(long)]
        results: PathBuf,
        /// Summary CSV to write; companions go next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone)]
enum NoiseArg {
    Family { family: NoiseFamily, nu: Option<u32> },
    Model(NoiseModel),
}

#[derive(Debug, Clone)]
enum LikelihoodArg {
    Matched,
    Family(NoiseFamily),
    Model(NoiseModel),
}

fn parse_family_with_nu(s: &str) -> Result<Option<(NoiseFamily, Option<u32>)>> {
    let (name, rest) = match s.split_once(':') {
        Some((name, rest)) => (name, Some(rest)),
        None => (s, None),
    };
    match rest {
        None => Ok(Some((NoiseFamily::from_str(name)?, None))),
        Some(rest) => match rest.trim().strip_prefix("nu=") {
            Some(nu) if NoiseFamily::from_str(name)? == NoiseFamily::Nsst => {
                let nu = nu.parse::<u32>().map_err(|_| Error::parse(nu, "nu must be a positive integer"))?;
                Ok(Some((NoiseFamily::Nsst, Some(nu))))
            }
            _ => Ok(None),
        },
    }
}

fn parse_noise_arg(s: &str) -> std::result::Result<NoiseArg, String> {
    match parse_family_with_nu(s).map_err(|e| e.to_string())? {
        Some((family, nu)) => Ok(NoiseArg::Family { family, nu }),
        None => s.parse().map(NoiseArg::Model).map_err(|e: Error| e.to_string()),
    }
}

fn parse_likelihood_arg(s: &str) -> std::result::Result<LikelihoodArg, String> {
    if s.trim().eq_ignore_ascii_case("matched") {
        return Ok(LikelihoodArg::Matched);
    }
    if !s.contains(':') {
        return NoiseFamily::from_str(s)
            .map(LikelihoodArg::Family)
            .map_err(|e| e.to_string());
    }
    s.parse().map(LikelihoodArg::Model).map_err(|e: Error| e.to_string())
}

/// Failure with the exit code it maps to.
struct Failure {
    code: i32,
    error: Error,
}

fn usage(error: Error) -> Failure {
    Failure { code: 1, error }
}

fn runtime(error: Error) -> Failure {
    Failure { code: 2, error }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

fn execute(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Gen { kind, count, n_points, seed, out } => cmd_gen(kind, count, n_points, seed, &out),
        Command::Estimate {
            structures,
            noise,
            likelihood,
            snr_db,
            m,
            nu,
            seed,
            restarts,
            measurements_dir,
            out,
        } => {
            let mut optimizer = OptimizerSettings::default();
            if let Some(r) = restarts {
                optimizer.restarts = r;
            }
            let job = EstimateJob { noise, likelihood, snr_db, m, nu, seed, optimizer };
            cmd_estimate(&structures, &job, measurements_dir.as_deref(), &out)
        }
        Command::Sweep { config, out_dir, workers, seed, repeats } => {
            cmd_sweep(&config, &out_dir, workers, seed, repeats)
        }
        Command::Report { results, out } => cmd_report(&results, &out),
    }
}

fn cmd_gen(kind: StructureKind, count: usize, n_points: usize, seed: u64, out: &Path) -> std::result::Result<(), Failure> {
    if count == 0 {
        return Err(usage(Error::invalid("--count must be at least 1")));
    }
    let structures = match kind {
        StructureKind::Triangle => generate_triangles(count, &mut StreamKey::new(seed).with_str("triangles").rng()),
        StructureKind::Cloud => {
            if n_points < 2 {
                return Err(usage(Error::invalid("--n-points must be at least 2")));
            }
            generate_point_clouds(count, n_points, &mut StreamKey::new(seed).with_str("clouds").rng())
        }
    };
    write_structures(out, &structures).map_err(runtime)?;
    let n = structures[0].n_points();
    println!("wrote {count} structures of {n} points to {}", out.display());
    Ok(())
}

struct EstimateJob {
    noise: NoiseArg,
    likelihood: LikelihoodArg,
    snr_db: Option<f64>,
    m: usize,
    nu: u32,
    seed: u64,
    optimizer: OptimizerSettings,
}

impl EstimateJob {
    /// True noise model and the variance used for family-named likelihoods.
    fn noise_model(&self, truth: &PointSet) -> Result<(NoiseModel, Option<f64>)> {
        match &self.noise {
            NoiseArg::Model(model) => Ok((*model, self.snr_db)),
            NoiseArg::Family { family, nu } => {
                let snr = self
                    .snr_db
                    .ok_or_else(|| Error::invalid("--snr-db is required when --noise is a family name"))?;
                let sigma2 = snr_to_sigma2(snr, mean_edge_length(truth));
                let model = NoiseModel::from_target_variance(*family, sigma2, Some(nu.unwrap_or(self.nu)))?;
                Ok((model, Some(snr)))
            }
        }
    }

    fn likelihood_model(&self, noise: &NoiseModel) -> Result<NoiseModel> {
        match &self.likelihood {
            LikelihoodArg::Matched => Ok(*noise),
            LikelihoodArg::Model(model) => Ok(*model),
            LikelihoodArg::Family(family) => {
                let nu = match noise {
                    NoiseModel::Nsst { nu, .. } => *nu,
                    _ => self.nu,
                };
                NoiseModel::from_target_variance(*family, noise.variance(), Some(nu))
            }
        }
    }
}

fn cmd_estimate(
    structures_path: &Path,
    job: &EstimateJob,
    measurements_dir: Option<&Path>,
    out: &Path,
) -> std::result::Result<(), Failure> {
    if job.m == 0 {
        return Err(usage(Error::invalid("--m must be at least 1")));
    }
    job.optimizer.validate().map_err(usage)?;
    let structures = read_structures(structures_path).map_err(runtime)?;
    if let Some(dir) = measurements_dir {
        std::fs::create_dir_all(dir).map_err(|e| runtime(e.into()))?;
    }

    let mut writer = csv::Writer::from_path(out).map_err(|e| runtime(e.into()))?;
    writer
        .write_record([
            "structure_id",
            "noise_family",
            "likelihood_family",
            "snr_db",
            "m",
            "opp_loss",
            "final_nll",
            "converged",
            "restart_index",
        ])
        .map_err(|e| runtime(e.into()))?;
    for truth in &structures {
        let (noise, snr) = job.noise_model(truth).map_err(usage)?;
        let likelihood = job.likelihood_model(&noise).map_err(usage)?;
        let key = StreamKey::new(job.seed).with_str(truth.id());
        let meas = MeasurementSet::simulate(truth, &noise, job.m, &mut key.clone().with_str("measurements").rng())
            .map_err(runtime)?;
        if let Some(dir) = measurements_dir {
            meas.write(&dir.join(format!("{}.json", truth.id()))).map_err(runtime)?;
        }
        let spec = LikelihoodSpec::new(likelihood);
        let est = estimate(
            &meas,
            &spec,
            truth.n_points(),
            truth.dim(),
            &job.optimizer,
            &mut key.with_str("init").rng(),
        )
        .map_err(runtime)?;
        let loss = opp_loss(&est.estimate, truth).map_err(runtime)?;
        writer
            .write_record([
                truth.id().to_owned(),
                noise.family().to_string(),
                likelihood.family().to_string(),
                snr.map(format_float).unwrap_or_default(),
                job.m.to_string(),
                format_float(loss),
                format_float(est.final_nll),
                est.converged.to_string(),
                est.restart_index.to_string(),
            ])
            .map_err(|e| runtime(e.into()))?;
        println!("{}\t{}\t{}\topp_loss={loss:.6}", truth.id(), noise, likelihood);
    }
    writer.flush().map_err(|e| runtime(e.into()))?;
    Ok(())
}

fn cmd_sweep(
    config_path: &Path,
    out_dir: &Path,
    workers: usize,
    seed: Option<u64>,
    repeats: Option<usize>,
) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(config_path).map_err(|e| runtime(e.into()))?;
    let mut file = SweepConfigFile::from_json(&text).map_err(usage)?;
    if let Some(seed) = seed {
        file.seed = seed;
    }
    if let Some(repeats) = repeats {
        file.repeats = repeats;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let structures = file.structures.resolve(base).map_err(runtime)?;
    let config = file.with_structures(structures);
    config.validate().map_err(usage)?;

    std::fs::create_dir_all(out_dir).map_err(|e| runtime(e.into()))?;
    let progress = |done: usize, total: usize| eprintln!("[{done}/{total}] cells complete");
    let options = RunOptions { workers, progress: Some(&progress) };
    let result = harness::run_sweep_with(&config, &options).map_err(runtime)?;
    let table = summarize(&result);
    harness::write_results(&out_dir.join("results.csv"), &result).map_err(runtime)?;
    harness::write_summary(&out_dir.join("summary.csv"), &table).map_err(runtime)?;
    print_overview(&result, &table);
    Ok(())
}

fn cmd_report(results: &Path, out: &Path) -> std::result::Result<(), Failure> {
    let result = harness::read_results(results).map_err(runtime)?;
    let table = summarize(&result);
    harness::write_summary(out, &table).map_err(runtime)?;
    print_overview(&result, &table);
    eprintln!("plot data: {}", plot_path(out).display());
    Ok(())
}

/// Medians per (noise, M, SNR) on stdout, pooled when there are several structures.
fn print_overview(result: &SweepResult, table: &SummaryTable) {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "{} records", result.records.len());
    let _ = writeln!(out, "structure\tnoise\tm\tsnr_db\tmatched_p50\tgaussian_p50\tdiff_p50");
    let pooled = table.pairwise.iter().any(|r| r.structure_id == AGGREGATE_ID);
    for pair in table.pairwise.iter().filter(|r| !pooled || r.structure_id == AGGREGATE_ID) {
        let median = |lik| {
            table
                .row(&pair.structure_id, pair.noise_family, pair.snr_db, pair.m, lik)
                .map_or(f64::NAN, |r| r.percentiles.p50)
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            pair.structure_id,
            pair.noise_family,
            pair.m,
            pair.snr_db,
            median(pair.noise_family),
            median(NoiseFamily::Gaussian),
            pair.median()
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_arguments() {
        assert!(matches!(
            parse_noise_arg("laplace").unwrap(),
            NoiseArg::Family { family: NoiseFamily::Laplace, nu: None }
        ));
        assert!(matches!(
            parse_noise_arg("nsst:nu=5").unwrap(),
            NoiseArg::Family { family: NoiseFamily::Nsst, nu: Some(5) }
        ));
        assert!(matches!(
            parse_noise_arg("laplace:theta=0.1").unwrap(),
            NoiseArg::Model(NoiseModel::Laplace { .. })
        ));
        let err = parse_noise_arg("cauchy").unwrap_err();
        assert!(err.contains("cauchy"), "{err}");
        let err = parse_noise_arg("nsst:nu=x").unwrap_err();
        assert!(err.contains('x'), "{err}");
    }

    #[test]
    fn likelihood_arguments() {
        assert!(matches!(parse_likelihood_arg("matched").unwrap(), LikelihoodArg::Matched));
        assert!(matches!(
            parse_likelihood_arg("gaussian").unwrap(),
            LikelihoodArg::Family(NoiseFamily::Gaussian)
        ));
        assert!(matches!(
            parse_likelihood_arg("nsst:nu=3,b=0.2").unwrap(),
            LikelihoodArg::Model(NoiseModel::Nsst { nu: 3, .. })
        ));
        assert!(parse_likelihood_arg("huber").unwrap_err().contains("huber"));
    }

    #[test]
    fn matched_copies_noise_family() {
        let job = EstimateJob {
            noise: NoiseArg::Family { family: NoiseFamily::Nsst, nu: Some(4) },
            likelihood: LikelihoodArg::Matched,
            snr_db: Some(10.0),
            m: 10,
            nu: 3,
            seed: 0,
            optimizer: OptimizerSettings::default(),
        };
        let truth = PointSet::from_points("t", &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let (noise, _) = job.noise_model(&truth).unwrap();
        assert_eq!(job.likelihood_model(&noise).unwrap(), noise);
        let gaussian = EstimateJob { likelihood: LikelihoodArg::Family(NoiseFamily::Gaussian), ..job };
        let g = gaussian.likelihood_model(&noise).unwrap();
        assert!((g.variance() - noise.variance()).abs() < 1e-12);
    }
}
