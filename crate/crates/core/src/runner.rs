//! Experiment orchestration: config files, initial-state preparation,
//! quench pipelines with scheduled sampling, first-passage sweeps over
//! the bias field, and canned figure-style data pipelines.
//!
//! Everything here is deterministic for a fixed config and seed: state
//! preparation, evolution, and sampling all derive their randomness
//! from counter-based substreams of the single configured seed, so two
//! runs of the same config produce byte-identical data files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clusters::{accumulate_stats, pmax_heatmap, FlipReference, Snapshot};
use crate::error::{Error, Result};
use crate::evolve::{EvolutionConfig, TdvpEngine, TrajectoryPoint};
use crate::groundstate::{excited_states, ground_state, DmrgConfig};
use crate::io::{
    write_fpt_csv, write_hamming_csv, write_n_of_s_csv, write_p_smax_csv, write_pmax_heatmap_csv,
    write_snapshots, write_state, write_trajectory_csv, FptOutcome, FptRow, SnapshotFile,
};
use crate::lattice::LatticeGeometry;
use crate::model::ModelParams;
use crate::mps::MpsState;
use crate::observables::{default_return_threshold, first_passage_time};
use crate::rng::substream;

// ----- configuration --------------------------------------------------------

/// RNG substream id for randomised state preparation, distinct from
/// the shot streams used in sampling.
const PREP_STREAM: u64 = u64::MAX;

fn default_j() -> f64 {
    1.0
}
fn default_stride() -> usize {
    1
}
fn default_entropy_chi() -> usize {
    16
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    #[serde(rename = "J", default = "default_j")]
    j: f64,
    g: f64,
    h0: f64,
    hq: Option<f64>,
    hq_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialStateSection {
    kind: String,
    /// Eigenstate index for `kind = "excited"`; 1 is the first excited
    /// state.
    k: Option<usize>,
    /// Central-cut entropy target for `kind = "random_entropy"`.
    target: Option<f64>,
    /// Bond dimension for `kind = "random_entropy"`.
    chi: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DmrgSection {
    chi_dmrg: Option<usize>,
    svd_min: Option<f64>,
    energy_tol: Option<f64>,
    max_sweeps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvolutionSection {
    dt: Option<f64>,
    t_max: f64,
    chi_q: Option<usize>,
    svd_min: Option<f64>,
    krylov_tol: Option<f64>,
    #[serde(default = "default_stride")]
    observable_stride: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplingSection {
    times: Vec<f64>,
    n_shots: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    geometries: Option<Vec<String>>,
    initial_states: Option<Vec<String>>,
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: GeometrySection,
    model: ModelSection,
    initial_state: InitialStateSection,
    #[serde(default)]
    dmrg: DmrgSection,
    evolution: EvolutionSection,
    sampling: Option<SamplingSection>,
    sweep: Option<SweepSection>,
    output: OutputSection,
}

/// How the initial state of a quench run is prepared.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialStateSpec {
    /// Every spin down.
    ProductDown,
    /// Variational ground state of the pre-quench Hamiltonian.
    FvGround,
    /// `k`-th eigenstate of the pre-quench Hamiltonian (`k >= 1`).
    Excited { k: usize },
    /// Random state with a prescribed central-cut entanglement entropy.
    RandomEntropy { target: f64, chi: usize },
}

impl InitialStateSpec {
    /// Stable label used in file names and CSV rows.
    pub fn label(&self) -> String {
        match self {
            InitialStateSpec::ProductDown => "product_down".into(),
            InitialStateSpec::FvGround => "fv_ground".into(),
            InitialStateSpec::Excited { k } => format!("excited{k}"),
            InitialStateSpec::RandomEntropy { target, .. } => format!("random_entropy{target}"),
        }
    }

    /// Parse a sweep-list entry such as `"fv_ground"` or `"excited2"`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "product_down" => Ok(InitialStateSpec::ProductDown),
            "fv_ground" => Ok(InitialStateSpec::FvGround),
            other => {
                if let Some(k) = other.strip_prefix("excited") {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::Config(format!("bad excited level in {other:?}")))?;
                    if k == 0 {
                        return Err(Error::Config("excited level must be >= 1".into()));
                    }
                    return Ok(InitialStateSpec::Excited { k });
                }
                Err(Error::Config(format!(
                    "unknown initial state {other:?}; expected product_down, fv_ground, or excitedK"
                )))
            }
        }
    }
}

/// Sampling schedule attached to an evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSchedule {
    /// Measurement times; snapped to the step grid during the run.
    pub times: Vec<f64>,
    pub n_shots: usize,
    pub seed: u64,
}

/// A parsed, validated experiment configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry: LatticeGeometry,
    /// Pre-quench couplings (with `h = h0`).
    pub pre: ModelParams,
    /// Post-quench bias; `None` when only a sweep grid was given.
    pub hq: Option<f64>,
    /// Bias grid for sweeps; singleton when `hq` was given directly.
    pub hq_grid: Vec<f64>,
    pub initial_state: InitialStateSpec,
    pub dmrg: DmrgConfig,
    pub evolution: EvolutionConfig,
    pub t_max: f64,
    pub observable_stride: usize,
    pub sampling: Option<ShotSchedule>,
    /// Extra geometries swept by `sweep_fpt` (always includes
    /// `geometry`).
    pub sweep_geometries: Vec<LatticeGeometry>,
    /// Initial states swept by `sweep_fpt` (always non-empty).
    pub sweep_initial_states: Vec<InitialStateSpec>,
    /// First-passage threshold for sweeps.
    pub threshold: f64,
    pub output_dir: PathBuf,
    /// The exact text the config was parsed from; hashed into the
    /// manifest.
    pub config_text: String,
}

impl RunConfig {
    /// Parse and validate a TOML config.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        Self::from_raw(raw, text.to_string())
    }

    /// Load a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    fn from_raw(raw: RawConfig, config_text: String) -> Result<Self> {
        let geometry = LatticeGeometry::new(raw.geometry.rows, raw.geometry.cols)?;
        let pre = ModelParams::new(raw.model.j, raw.model.g, raw.model.h0)?;

        let (hq, hq_grid) = match (raw.model.hq, raw.model.hq_grid) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either hq or hq_grid, not both".into()))
            }
            (None, None) => return Err(Error::Config("model needs hq or hq_grid".into())),
            (Some(h), None) => {
                if !h.is_finite() {
                    return Err(Error::Config(format!("hq must be finite, got {h}")));
                }
                (Some(h), vec![h])
            }
            (None, Some(grid)) => {
                if grid.is_empty() {
                    return Err(Error::Config("hq_grid must be non-empty".into()));
                }
                if grid.iter().any(|h| !h.is_finite()) {
                    return Err(Error::Config("hq_grid entries must be finite".into()));
                }
                (None, grid)
            }
        };

        let initial_state = match raw.initial_state.kind.as_str() {
            "product_down" => InitialStateSpec::ProductDown,
            "fv_ground" => InitialStateSpec::FvGround,
            "excited" => {
                let k = raw
                    .initial_state
                    .k
                    .ok_or_else(|| Error::Config("initial_state.kind = \"excited\" needs k".into()))?;
                if k == 0 {
                    return Err(Error::Config("excited level k must be >= 1".into()));
                }
                InitialStateSpec::Excited { k }
            }
            "random_entropy" => {
                let target = raw.initial_state.target.ok_or_else(|| {
                    Error::Config("initial_state.kind = \"random_entropy\" needs target".into())
                })?;
                if !(target >= 0.0 && target.is_finite()) {
                    return Err(Error::Config(format!(
                        "entropy target must be non-negative and finite, got {target}"
                    )));
                }
                let chi = raw.initial_state.chi.unwrap_or_else(default_entropy_chi);
                InitialStateSpec::RandomEntropy { target, chi }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown initial_state.kind {other:?}; expected product_down, fv_ground, \
                     excited, or random_entropy"
                )))
            }
        };

        let dmrg_defaults = DmrgConfig::default();
        let dmrg = DmrgConfig {
            chi_max: raw.dmrg.chi_dmrg.unwrap_or(dmrg_defaults.chi_max),
            svd_min: raw.dmrg.svd_min.unwrap_or(dmrg_defaults.svd_min),
            energy_tol: raw.dmrg.energy_tol.unwrap_or(dmrg_defaults.energy_tol),
            max_sweeps: raw.dmrg.max_sweeps.unwrap_or(dmrg_defaults.max_sweeps),
        };

        let evo_defaults = EvolutionConfig::default();
        let evolution = EvolutionConfig {
            chi_max: raw.evolution.chi_q.unwrap_or(evo_defaults.chi_max),
            svd_min: raw.evolution.svd_min.unwrap_or(evo_defaults.svd_min),
            dt: raw.evolution.dt.unwrap_or(evo_defaults.dt),
            krylov_tol: raw.evolution.krylov_tol.unwrap_or(evo_defaults.krylov_tol),
        };
        evolution.validate()?;
        let t_max = raw.evolution.t_max;
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Config(format!("t_max must be positive and finite, got {t_max}")));
        }
        if raw.evolution.observable_stride == 0 {
            return Err(Error::Config("observable_stride must be >= 1".into()));
        }

        let sampling = match raw.sampling {
            None => None,
            Some(s) => {
                if s.times.is_empty() {
                    return Err(Error::Config("sampling.times must be non-empty".into()));
                }
                if s.n_shots == 0 {
                    return Err(Error::Config("sampling.n_shots must be >= 1".into()));
                }
                for &t in &s.times {
                    if !(t >= 0.0) || t > t_max + 0.5 * evolution.dt {
                        return Err(Error::Config(format!(
                            "sampling time {t} outside [0, t_max = {t_max}]"
                        )));
                    }
                }
                Some(ShotSchedule { times: s.times, n_shots: s.n_shots, seed: s.seed })
            }
        };

        let (sweep_geometries, sweep_initial_states, threshold) = match raw.sweep {
            None => (vec![geometry], vec![initial_state.clone()], default_return_threshold()),
            Some(sw) => {
                let geoms = match sw.geometries {
                    None => vec![geometry],
                    Some(labels) => {
                        let mut v = Vec::with_capacity(labels.len());
                        for l in &labels {
                            v.push(crate::io::parse_geometry_label(l)?);
                        }
                        if v.is_empty() {
                            return Err(Error::Config("sweep.geometries must be non-empty".into()));
                        }
                        v
                    }
                };
                let states = match sw.initial_states {
                    None => vec![initial_state.clone()],
                    Some(labels) => {
                        let mut v = Vec::with_capacity(labels.len());
                        for l in &labels {
                            v.push(InitialStateSpec::parse(l)?);
                        }
                        if v.is_empty() {
                            return Err(Error::Config(
                                "sweep.initial_states must be non-empty".into(),
                            ));
                        }
                        v
                    }
                };
                let threshold = sw.threshold.unwrap_or_else(default_return_threshold);
                if !(threshold > 0.0 && threshold < 1.0) {
                    return Err(Error::Config(format!(
                        "sweep threshold must lie in (0, 1), got {threshold}"
                    )));
                }
                (geoms, states, threshold)
            }
        };

        Ok(RunConfig {
            geometry,
            pre,
            hq,
            hq_grid,
            initial_state,
            dmrg,
            evolution,
            t_max,
            observable_stride: raw.evolution.observable_stride,
            sampling,
            sweep_geometries,
            sweep_initial_states,
            threshold,
            output_dir: PathBuf::from(raw.output.dir),
            config_text,
        })
    }

    /// The single post-quench parameter set, or a config error when the
    /// config only carries a grid.
    pub fn post_params(&self) -> Result<ModelParams> {
        let hq = self.hq.ok_or_else(|| {
            Error::Config("this command needs a single hq (the config gives hq_grid)".into())
        })?;
        ModelParams::new(self.pre.j, self.pre.g, hq)
    }

    /// Seed used for preparation and sampling (0 when no sampling
    /// section is present).
    pub fn seed(&self) -> u64 {
        self.sampling.as_ref().map_or(0, |s| s.seed)
    }
}

// ----- state preparation ----------------------------------------------------

/// A prepared initial state plus its provenance.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub state: MpsState,
    /// Stable label (`fv_ground`, `product_down`, ...).
    pub label: String,
    /// Variational energy under the *pre-quench* Hamiltonian, when the
    /// preparation solved for one.
    pub energy: Option<f64>,
    /// Energy variance certificate, when available.
    pub variance: Option<f64>,
}

/// Prepare the initial state named by `spec` for the pre-quench
/// couplings `pre`.
///
/// `seed` drives the randomised preparations (excited-state restarts
/// and the entropy-matched random state); deterministic for fixed
/// arguments.
pub fn prepare_initial_state(
    geom: LatticeGeometry,
    pre: &ModelParams,
    spec: &InitialStateSpec,
    dmrg: &DmrgConfig,
    seed: u64,
) -> Result<PreparedState> {
    let label = spec.label();
    match spec {
        InitialStateSpec::ProductDown => Ok(PreparedState {
            state: MpsState::all_down(geom)?,
            label,
            energy: None,
            variance: None,
        }),
        InitialStateSpec::FvGround => {
            let res = ground_state(geom, pre, dmrg)?;
            Ok(PreparedState {
                state: res.state,
                label,
                energy: Some(res.energy),
                variance: Some(res.variance),
            })
        }
        InitialStateSpec::Excited { k } => {
            let mut res = excited_states(geom, pre, dmrg, k + 1, seed)?;
            let level = res.swap_remove(*k);
            Ok(PreparedState {
                state: level.state,
                label,
                energy: Some(level.energy),
                variance: Some(level.variance),
            })
        }
        InitialStateSpec::RandomEntropy { target, chi } => {
            let mut rng = substream(seed, PREP_STREAM);
            let tol = (0.02 * target.max(1.0)).max(1e-3);
            let state = MpsState::random_with_entropy(geom, *chi, *target, tol, &mut rng)?;
            Ok(PreparedState { state, label, energy: None, variance: None })
        }
    }
}

// ----- quench execution -----------------------------------------------------

/// A completed quench: the observable series plus any sampled shot
/// sets.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub points: Vec<TrajectoryPoint>,
    /// `(time, shots)` per scheduled measurement time, in time order.
    pub shot_sets: Vec<(f64, Vec<Snapshot>)>,
}

/// Evolve `initial` under `post`, recording observables every
/// `stride` steps and drawing snapshots at the scheduled times.
///
/// Sampling is non-destructive and each scheduled time uses the step
/// index as its RNG stream label, so the shots do not depend on which
/// other times are scheduled.
pub fn evolve_quench(
    initial: &MpsState,
    post: &ModelParams,
    cfg: &EvolutionConfig,
    t_max: f64,
    stride: usize,
    schedule: Option<&ShotSchedule>,
) -> Result<TrajectoryRecord> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid(format!("t_max must be positive and finite, got {t_max}")));
    }
    if stride == 0 {
        return Err(Error::invalid("observable stride must be at least 1"));
    }
    let n_steps = (t_max / cfg.dt).round().max(1.0) as usize;

    // Snap each scheduled time to its nearest step index.
    let mut sample_steps: Vec<(usize, usize)> = Vec::new(); // (step, n_shots)
    let mut seed = 0;
    if let Some(s) = schedule {
        seed = s.seed;
        for &t in &s.times {
            let step = (t / cfg.dt).round() as usize;
            if step > n_steps {
                return Err(Error::invalid(format!(
                    "scheduled sampling time {t} lies beyond t_max = {t_max}"
                )));
            }
            sample_steps.push((step, s.n_shots));
        }
        sample_steps.sort_unstable();
        sample_steps.dedup_by_key(|e| e.0);
    }

    let mut engine = TdvpEngine::new(post, initial, cfg)?;
    let mut points = vec![engine.observe()?];
    let mut shot_sets = Vec::new();

    let draw = |engine: &TdvpEngine, step: usize, shot_sets: &mut Vec<(f64, Vec<Snapshot>)>| -> Result<()> {
        if let Some(&(_, n_shots)) = sample_steps.iter().find(|e| e.0 == step) {
            let shots = engine.state().sample_snapshots(n_shots, seed, step)?;
            shot_sets.push((step as f64 * cfg.dt, shots));
        }
        Ok(())
    };

    draw(&engine, 0, &mut shot_sets)?;
    for step in 1..=n_steps {
        engine.step()?;
        if step % stride == 0 || step == n_steps {
            points.push(engine.observe()?);
        }
        draw(&engine, step, &mut shot_sets)?;
    }
    Ok(TrajectoryRecord { points, shot_sets })
}

// ----- manifests ------------------------------------------------------------

/// Record of one completed experiment, written as `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    /// SHA-256 of the config text the run was started from.
    pub config_sha256: String,
    pub seed: u64,
    /// Crate version that produced the artifacts.
    pub version: String,
    pub geometry: String,
    pub initial_state: String,
    /// Wall-clock duration of the run in seconds (not part of the
    /// determinism contract).
    pub wall_seconds: f64,
    /// Largest bond dimension reached during evolution.
    pub max_bond_reached: usize,
    /// Total truncation weight discarded along the trajectory.
    pub total_discarded_weight: f64,
    /// Preparation energy under the pre-quench Hamiltonian, when the
    /// initial state was solved variationally.
    pub preparation_energy: Option<f64>,
    /// Preparation energy variance certificate, when available.
    pub preparation_variance: Option<f64>,
    /// SHA-256 per artifact file name (sorted, deterministic).
    pub artifacts: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Prefix an error message with the pipeline stage it came from.
fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{name}: {m}")),
        Error::Config(m) => Error::Config(format!("{name}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{name}: {m}")),
        Error::Convergence { message, energy_trace } => {
            Error::Convergence { message: format!("{name}: {message}"), energy_trace }
        }
        Error::Io(m) => Error::Io(m),
    })
}

// ----- run_experiment -------------------------------------------------------

/// Execute prepare → evolve → sample → analyze for one config and
/// persist every artifact under the config's output directory.
///
/// Returns the manifest, which is also written as `manifest.json`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunManifest> {
    run_experiment_in(cfg, &cfg.output_dir)
}

/// [`run_experiment`] with an explicit output directory (used by the
/// canned pipelines to fan one config out into several runs).
pub fn run_experiment_in(cfg: &RunConfig, out_dir: &Path) -> Result<RunManifest> {
    run_experiment_with(cfg, out_dir, None)
}

/// [`run_experiment`] starting from an already-prepared state instead
/// of running the configured preparation (state-file reuse).
pub fn run_experiment_with(
    cfg: &RunConfig,
    out_dir: &Path,
    initial: Option<PreparedState>,
) -> Result<RunManifest> {
    let started = Instant::now();
    let post = cfg.post_params()?;
    fs::create_dir_all(out_dir)?;

    let prepared = match initial {
        Some(p) => {
            if p.state.geometry() != cfg.geometry {
                return Err(Error::Config(format!(
                    "supplied initial state is on a {} lattice but the config says {}",
                    p.state.geometry().label(),
                    cfg.geometry.label()
                )));
            }
            p
        }
        None => stage(
            "prepare",
            prepare_initial_state(cfg.geometry, &cfg.pre, &cfg.initial_state, &cfg.dmrg, cfg.seed()),
        )?,
    };
    let mut artifacts = BTreeMap::new();
    let state_path = out_dir.join("initial.fvs");
    stage("prepare", write_state(&state_path, &prepared.state))?;
    artifacts.insert("initial.fvs".to_string(), hash_file(&state_path)?);

    let record = stage(
        "evolve",
        evolve_quench(
            &prepared.state,
            &post,
            &cfg.evolution,
            cfg.t_max,
            cfg.observable_stride,
            cfg.sampling.as_ref(),
        ),
    )?;
    let traj_path = out_dir.join("trajectory.csv");
    stage("evolve", write_trajectory_csv(&traj_path, &record.points))?;
    artifacts.insert("trajectory.csv".to_string(), hash_file(&traj_path)?);

    if let Some(schedule) = &cfg.sampling {
        for (i, (time, shots)) in record.shot_sets.iter().enumerate() {
            let name = format!("shots_{i:03}.txt");
            let path = out_dir.join(&name);
            let file = SnapshotFile {
                geometry: cfg.geometry,
                time: *time,
                seed: schedule.seed,
                shots: shots.clone(),
            };
            stage("sample", write_snapshots(&path, &file))?;
            artifacts.insert(name, hash_file(&path)?);
        }

        // Cluster analysis: heatmap over all scheduled times, scalar
        // distributions from the last one.
        let stats_input = record
            .shot_sets
            .last()
            .ok_or_else(|| Error::invalid("sampling was scheduled but produced no shots"))?;
        let reference = flip_reference_for(&post);
        let stats = stage("analyze", accumulate_stats(&stats_input.1, reference))?;
        for (name, writer) in [
            ("n_of_s.csv", write_n_of_s_csv as fn(&Path, &_) -> Result<()>),
            ("p_smax.csv", write_p_smax_csv as fn(&Path, &_) -> Result<()>),
            ("hamming.csv", write_hamming_csv as fn(&Path, &_) -> Result<()>),
        ] {
            let path = out_dir.join(name);
            stage("analyze", writer(&path, &stats))?;
            artifacts.insert(name.to_string(), hash_file(&path)?);
        }
        let heatmap = stage("analyze", pmax_heatmap(&record.shot_sets, reference))?;
        let hm_path = out_dir.join("pmax_heatmap.csv");
        stage("analyze", write_pmax_heatmap_csv(&hm_path, &heatmap))?;
        artifacts.insert("pmax_heatmap.csv".to_string(), hash_file(&hm_path)?);
    }

    let last = record.points.last().expect("trajectory always has points");
    let manifest = RunManifest {
        config_sha256: sha256_hex(cfg.config_text.as_bytes()),
        seed: cfg.seed(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        geometry: cfg.geometry.label(),
        initial_state: prepared.label,
        wall_seconds: started.elapsed().as_secs_f64(),
        max_bond_reached: record.points.iter().map(|p| p.max_bond).max().unwrap_or(1),
        total_discarded_weight: last.discarded_weight,
        preparation_energy: prepared.energy,
        preparation_variance: prepared.variance,
        artifacts,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::invalid(format!("manifest serialization failed: {e}")))?;
    fs::write(out_dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

/// Cluster "flipped" reference for a post-quench bias: spins opposing
/// the bias form the metastable background, so a flip is a spin that
/// has joined the favoured orientation.
///
/// Positive `h` favours up: flips are counted relative to the all-down
/// background. Negative `h` mirrors this.
pub fn flip_reference_for(post: &ModelParams) -> FlipReference {
    if post.h >= 0.0 {
        FlipReference::AllDown
    } else {
        FlipReference::AllUp
    }
}

// ----- first-passage sweeps -------------------------------------------------

/// First-passage extraction for one prepared state and bias value,
/// stopping the evolution as soon as the threshold is crossed.
fn first_passage_for(
    initial: &MpsState,
    post: &ModelParams,
    cfg: &EvolutionConfig,
    t_max: f64,
    threshold: f64,
) -> Result<FptOutcome> {
    let n_steps = (t_max / cfg.dt).round().max(1.0) as usize;
    let mut engine = TdvpEngine::new(post, initial, cfg)?;
    let mut times = vec![0.0];
    let mut values = vec![engine.return_probability()?];
    for _ in 0..n_steps {
        engine.step()?;
        times.push(engine.time());
        values.push(engine.return_probability()?);
        if *values.last().unwrap() <= threshold {
            break;
        }
    }
    let fp = first_passage_time(&times, &values, threshold)?;
    Ok(match fp.time {
        Some(t) => FptOutcome::Reached(t),
        None => FptOutcome::NotReached,
    })
}

/// Sweep the first-passage time over `hq_grid` × geometries × initial
/// states.
///
/// Points run in parallel; per-point failures become `failed` rows and
/// the sweep carries on. Rows are sorted by `hq` (then geometry and
/// initial state) and the CSV at `out_dir/fpt.csv` is written with
/// per-row flushing.
pub fn sweep_fpt(cfg: &RunConfig) -> Result<Vec<FptRow>> {
    use rayon::prelude::*;

    fs::create_dir_all(&cfg.output_dir)?;

    // Preparation is independent of hq, so prepare each (geometry,
    // initial state) pair once and share it across the grid.
    let mut prepared: Vec<(LatticeGeometry, InitialStateSpec, Result<PreparedState>)> = Vec::new();
    for &geom in &cfg.sweep_geometries {
        for spec in &cfg.sweep_initial_states {
            let p = prepare_initial_state(geom, &cfg.pre, spec, &cfg.dmrg, cfg.seed());
            prepared.push((geom, spec.clone(), p));
        }
    }

    let mut grid: Vec<(f64, usize)> = Vec::new(); // (hq, prepared index)
    for &hq in &cfg.hq_grid {
        for idx in 0..prepared.len() {
            grid.push((hq, idx));
        }
    }

    let mut rows: Vec<FptRow> = grid
        .par_iter()
        .map(|&(hq, idx)| {
            let (geom, spec, prep) = &prepared[idx];
            let outcome = (|| -> Result<FptOutcome> {
                let prep = prep.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                let post = ModelParams::new(cfg.pre.j, cfg.pre.g, hq)?;
                first_passage_for(&prep.state, &post, &cfg.evolution, cfg.t_max, cfg.threshold)
            })()
            .unwrap_or(FptOutcome::Failed);
            FptRow {
                hq,
                geometry: geom.label(),
                initial_state: spec.label(),
                threshold: cfg.threshold,
                outcome,
            }
        })
        .collect();

    rows.sort_by(|a, b| {
        a.hq.partial_cmp(&b.hq)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.geometry.cmp(&b.geometry))
            .then_with(|| a.initial_state.cmp(&b.initial_state))
    });
    write_fpt_csv(&cfg.output_dir.join("fpt.csv"), &rows)?;
    Ok(rows)
}

// ----- canned figure pipelines ----------------------------------------------

/// Build a config from TOML text with the output directory overridden.
fn canned_config(text: &str, out_dir: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_toml_str(text)?;
    cfg.output_dir = out_dir.to_path_buf();
    Ok(cfg)
}

/// Desk-scale analogue of the quench-dynamics comparison: one lattice,
/// false-vacuum ground state versus the bare product state, trajectory
/// CSVs with magnetization, collective fluctuation, and return
/// probability.
///
/// `scale` is the linear lattice size. Field signs follow the
/// convention in which the metastable branch is the down-polarised one
/// (prepared at `h0 = -0.1`, quenched to `hq = +0.2`), so
/// magnetization curves start near −1 and relax upward.
fn reproduce_quench_curves(scale: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let mut outputs = Vec::new();
    for kind in ["fv_ground", "product_down"] {
        let sub = out.join(kind);
        let text = format!(
            r#"
[geometry]
rows = {scale}
cols = {scale}

[model]
J = 1.0
g = 1.0
h0 = -0.1
hq = 0.2

[initial_state]
kind = "{kind}"

[dmrg]
chi_dmrg = 64

[evolution]
dt = 0.05
t_max = 8.0
chi_q = 32
observable_stride = 2

[output]
dir = "{}"
"#,
            sub.display()
        );
        let cfg = canned_config(&text, &sub)?;
        run_experiment(&cfg)?;
        outputs.push(sub.join("trajectory.csv"));
    }
    Ok(outputs)
}

/// Desk-scale analogue of the first-passage crossover sweep: a 2D
/// lattice against the 1D chain with the same site count, both initial
/// states, over a bias grid.
fn reproduce_fpt_crossover(scale: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let n = scale * scale;
    let text = format!(
        r#"
[geometry]
rows = {scale}
cols = {scale}

[model]
J = 1.0
g = 1.0
h0 = -0.1
hq_grid = [0.5, 1.0, 1.5, 2.0, 2.5]

[initial_state]
kind = "fv_ground"

[dmrg]
chi_dmrg = 32

[evolution]
dt = 0.05
t_max = 8.0
chi_q = 24

[sweep]
geometries = ["{scale}x{scale}", "{n}x1"]
initial_states = ["fv_ground", "product_down"]

[output]
dir = "{}"
"#,
        out.display()
    );
    let cfg = canned_config(&text, out)?;
    sweep_fpt(&cfg)?;
    Ok(vec![out.join("fpt.csv")])
}

/// Desk-scale analogue of the cluster-statistics pipelines: largest-
/// cluster heatmaps for four initial states (false-vacuum ground,
/// product, first excited, entropy-matched random) at the weak bias,
/// plus end-of-run cluster distributions at a strong bias for the
/// first two.
fn reproduce_cluster_statistics(scale: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let geom = LatticeGeometry::new(scale, scale)?;
    let pre = ModelParams::new(1.0, 1.0, -0.1)?;
    let dmrg = DmrgConfig { chi_max: 32, ..DmrgConfig::default() };

    // The random reference state matches the central-cut entropy of the
    // prepared false-vacuum state.
    let fv = prepare_initial_state(geom, &pre, &InitialStateSpec::FvGround, &dmrg, 7)?;
    let fv_entropy = fv.state.central_entropy()?;

    let mut outputs = Vec::new();
    let mut run_one = |kind_toml: &str, sub_name: &str, hq: f64| -> Result<()> {
        let sub = out.join(sub_name);
        let text = format!(
            r#"
[geometry]
rows = {scale}
cols = {scale}

[model]
J = 1.0
g = 1.0
h0 = -0.1
hq = {hq}

[initial_state]
{kind_toml}

[dmrg]
chi_dmrg = 32

[evolution]
dt = 0.05
t_max = 6.0
chi_q = 24
observable_stride = 4

[sampling]
times = [0.0, 1.5, 3.0, 4.5, 6.0]
n_shots = 120
seed = 7

[output]
dir = "{}"
"#,
            sub.display()
        );
        let cfg = canned_config(&text, &sub)?;
        run_experiment(&cfg)?;
        outputs.push(sub.join("pmax_heatmap.csv"));
        Ok(())
    };

    let random_kind = format!(
        "kind = \"random_entropy\"\ntarget = {:.6}\nchi = 16",
        fv_entropy
    );
    for (kind_toml, name) in [
        ("kind = \"fv_ground\"", "fv"),
        ("kind = \"product_down\"", "psi0"),
        ("kind = \"excited\"\nk = 1", "excited1"),
        (random_kind.as_str(), "random"),
    ] {
        run_one(kind_toml, name, 0.2)?;
    }
    // Strong-bias comparison for the cluster distributions.
    for (kind_toml, name) in [
        ("kind = \"fv_ground\"", "fv_strong"),
        ("kind = \"product_down\"", "psi0_strong"),
    ] {
        run_one(kind_toml, name, 1.6)?;
    }
    Ok(outputs)
}

/// Run a canned desk-scale data pipeline.
///
/// `figure` selects the pipeline: `fig2` (quench-dynamics curves),
/// `fig3` (first-passage crossover sweep), or `fig4` (cluster
/// statistics). `scale` is the linear lattice size (default 3 at the
/// CLI); outputs land under `out`.
pub fn reproduce(figure: &str, scale: usize, out: &Path) -> Result<Vec<PathBuf>> {
    if !(2..=7).contains(&scale) {
        return Err(Error::Config(format!(
            "scale must lie in 2..=7 (got {scale}); larger lattices need a planned run, not \
             the canned pipeline"
        )));
    }
    fs::create_dir_all(out)?;
    match figure {
        "fig2" => reproduce_quench_curves(scale, out),
        "fig3" => reproduce_fpt_crossover(scale, out),
        "fig4" => reproduce_cluster_statistics(scale, out),
        other => Err(Error::Config(format!(
            "unknown figure id {other:?}; expected fig2, fig3, or fig4"
        ))),
    }
}

// ----- shot-file analysis (CLI `analyze`) -----------------------------------

/// Analyze snapshot files into the four cluster CSVs.
///
/// Files are treated as time slices (ordered by their recorded time);
/// the scalar distributions are computed from the latest slice and the
/// heatmap from all of them.
pub fn analyze_shot_files(
    inputs: &[PathBuf],
    reference: FlipReference,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::invalid("analyze needs at least one snapshot file"));
    }
    let mut slices = Vec::with_capacity(inputs.len());
    for path in inputs {
        let file = crate::io::read_snapshots(path)?;
        if file.shots.is_empty() {
            return Err(Error::invalid(format!("{} contains no shots", path.display())));
        }
        slices.push((file.time, file.shots));
    }
    slices.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    fs::create_dir_all(out_dir)?;
    let last = &slices.last().expect("non-empty").1;
    let stats = accumulate_stats(last, reference)?;
    let heatmap = pmax_heatmap(&slices, reference)?;

    let mut outputs = Vec::new();
    for (name, writer) in [
        ("n_of_s.csv", write_n_of_s_csv as fn(&Path, &_) -> Result<()>),
        ("p_smax.csv", write_p_smax_csv as fn(&Path, &_) -> Result<()>),
        ("hamming.csv", write_hamming_csv as fn(&Path, &_) -> Result<()>),
    ] {
        let path = out_dir.join(name);
        writer(&path, &stats)?;
        outputs.push(path);
    }
    let hm_path = out_dir.join("pmax_heatmap.csv");
    write_pmax_heatmap_csv(&hm_path, &heatmap)?;
    outputs.push(hm_path);
    Ok(outputs)
}
