//! Command-line front end for the quench-dynamics toolkit.
//!
//! Verbs: `prepare` (write an initial-state file), `evolve` (full
//! quench pipeline for one config), `sample` (draw shots from a state
//! file), `analyze` (cluster CSVs from shot files), `sweep-fpt`
//! (first-passage sweep over the bias grid) and `reproduce` (canned
//! desk-scale data pipelines).
//!
//! Exit codes: 0 success, 1 config/input error, 2 convergence failure,
//! 3 numerical fault.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use fvsim_core::clusters::FlipReference;
use fvsim_core::error::{Error, Result};
use fvsim_core::io::{read_state, write_snapshots, write_state, SnapshotFile};
use fvsim_core::runner::{
    analyze_shot_files, prepare_initial_state, reproduce, run_experiment_with, sweep_fpt,
    PreparedState, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "fvsim",
    version,
    about = "Quench dynamics of the 2D transverse-field Ising model with a longitudinal bias",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-file flag plus the overrides shared by the config-driven
/// verbs. Every override replaces the matching config field.
#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment config.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Override the post-quench bias field.
    #[arg(long)]
    hq: Option<f64>,
    /// Override the evolution time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the evolution horizon.
    #[arg(long)]
    t_max: Option<f64>,
    /// Override the evolution bond-dimension cap.
    #[arg(long)]
    chi_q: Option<usize>,
    /// Override the sampling/preparation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_file(&self.config)?;
        if let Some(hq) = self.hq {
            if !hq.is_finite() {
                return Err(Error::Config(format!("--hq must be finite, got {hq}")));
            }
            cfg.hq = Some(hq);
            cfg.hq_grid = vec![hq];
        }
        if let Some(dt) = self.dt {
            cfg.evolution.dt = dt;
        }
        if let Some(t_max) = self.t_max {
            cfg.t_max = t_max;
        }
        if let Some(chi_q) = self.chi_q {
            cfg.evolution.chi_max = chi_q;
        }
        if let Some(seed) = self.seed {
            match cfg.sampling.as_mut() {
                Some(s) => s.seed = seed,
                None => {
                    return Err(Error::Config(
                        "--seed needs a [sampling] section in the config".into(),
                    ))
                }
            }
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Prepare the configured initial state and write it as a state
    /// file.
    Prepare {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the full pipeline: prepare (or load), evolve, sample,
    /// analyze, and write the manifest.
    Evolve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Start from this state file instead of running the
        /// configured preparation.
        #[arg(long, value_name = "FILE")]
        state: Option<PathBuf>,
    },
    /// Draw projective snapshots from a state file.
    Sample {
        /// State file to sample from.
        #[arg(long, value_name = "FILE")]
        state: PathBuf,
        /// Number of shots.
        #[arg(long, default_value_t = 100)]
        shots: usize,
        /// Base RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stream label mixed into the seed (the pipeline uses the
        /// evolution step index here).
        #[arg(long, default_value_t = 0)]
        stream: usize,
        /// Evolution time recorded in the output header.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        /// Output shot file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compute cluster statistics from shot files.
    Analyze {
        /// Shot files, each one time slice.
        #[arg(required = true, value_name = "SHOTS")]
        inputs: Vec<PathBuf>,
        /// Background orientation flips are counted against.
        #[arg(long, default_value = "down", value_parser = FlipReference::parse)]
        reference: FlipReference,
        /// Output directory for the CSVs.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Sweep the first-passage time of the return probability over the
    /// configured bias grid, geometries and initial states.
    #[command(name = "sweep-fpt")]
    SweepFpt {
        #[command(flatten)]
        config: ConfigArgs,
        /// Override the first-passage threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run a canned desk-scale data pipeline (fig2, fig3 or fig4).
    Reproduce {
        /// Pipeline id: fig2, fig3 or fig4.
        figure: String,
        /// Linear lattice size.
        #[arg(long, default_value_t = 3)]
        scale: usize,
        /// Output directory.
        #[arg(long, value_name = "DIR", default_value = "reproduce")]
        out: PathBuf,
    },
}

fn state_file_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("initial.fvs")
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Prepare { config } => {
            let cfg = config.load()?;
            let prepared = prepare_initial_state(
                cfg.geometry,
                &cfg.pre,
                &cfg.initial_state,
                &cfg.dmrg,
                cfg.seed(),
            )?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = state_file_path(&cfg);
            write_state(&path, &prepared.state)?;
            match (prepared.energy, prepared.variance) {
                (Some(e), Some(v)) => println!(
                    "prepared {} on {}: energy {e:.12}, variance {v:.3e} -> {}",
                    prepared.label,
                    cfg.geometry.label(),
                    path.display()
                ),
                _ => println!(
                    "prepared {} on {} -> {}",
                    prepared.label,
                    cfg.geometry.label(),
                    path.display()
                ),
            }
            Ok(())
        }
        Command::Evolve { config, state } => {
            let cfg = config.load()?;
            let initial = match state {
                Some(path) => Some(PreparedState {
                    state: read_state(&path)?,
                    label: format!("file:{}", path.display()),
                    energy: None,
                    variance: None,
                }),
                None => None,
            };
            let out_dir = cfg.output_dir.clone();
            let manifest = run_experiment_with(&cfg, &out_dir, initial)?;
            println!(
                "evolved {} on {} to t = {}: {} artifacts in {} ({:.1} s, max bond {})",
                manifest.initial_state,
                manifest.geometry,
                cfg.t_max,
                manifest.artifacts.len(),
                out_dir.display(),
                manifest.wall_seconds,
                manifest.max_bond_reached
            );
            Ok(())
        }
        Command::Sample { state, shots, seed, stream, time, out } => {
            let mps = read_state(&state)?;
            let snaps = mps.sample_snapshots(shots, seed, stream)?;
            let file = SnapshotFile { geometry: mps.geometry(), time, seed, shots: snaps };
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            write_snapshots(&out, &file)?;
            println!("wrote {shots} shots from {} -> {}", state.display(), out.display());
            Ok(())
        }
        Command::Analyze { inputs, reference, out } => {
            let files = analyze_shot_files(&inputs, reference, &out)?;
            println!("analyzed {} shot file(s) -> {} CSVs in {}", inputs.len(), files.len(), out.display());
            Ok(())
        }
        Command::SweepFpt { config, threshold } => {
            let mut cfg = config.load()?;
            if let Some(th) = threshold {
                if !(th > 0.0 && th < 1.0) {
                    return Err(Error::Config(format!(
                        "--threshold must lie in (0, 1), got {th}"
                    )));
                }
                cfg.threshold = th;
            }
            let rows = sweep_fpt(&cfg)?;
            let reached = rows
                .iter()
                .filter(|r| matches!(r.outcome, fvsim_core::io::FptOutcome::Reached(_)))
                .count();
            println!(
                "swept {} points ({} crossed the threshold) -> {}",
                rows.len(),
                reached,
                cfg.output_dir.join("fpt.csv").display()
            );
            Ok(())
        }
        Command::Reproduce { figure, scale, out } => {
            let outputs = reproduce(&figure, scale, &out)?;
            println!("{figure} pipeline finished; key outputs:");
            for path in outputs {
                println!("  {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes; anything else is a
            // usage/config problem and must exit 1 (2 and 3 are
            // reserved for convergence and numerical failures).
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
