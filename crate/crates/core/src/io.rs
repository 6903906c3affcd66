//! On-disk artifacts: binary state files, snapshot shot files, and the
//! CSV emitters shared by the CLI verbs.
//!
//! Every format is deterministic — a given value always serializes to
//! the same bytes — which is what makes identical-seed reruns
//! byte-identical. Floating-point columns use Rust's shortest
//! round-trip formatting, so reading a value back yields the exact
//! original.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::clusters::{ClusterStats, PmaxHeatmap, Snapshot};
use crate::error::{Error, Result};
use crate::evolve::TrajectoryPoint;
use crate::lattice::LatticeGeometry;
use crate::mps::{MpsState, SiteTensor};
use crate::C64;

// ----- binary state files ---------------------------------------------------

/// Leading bytes of a state file.
const STATE_MAGIC: &[u8; 4] = b"FVS1";
/// Sanity cap on deserialized bond dimensions, to fail fast on corrupt
/// files instead of attempting a huge allocation.
const MAX_FILE_BOND: usize = 1 << 20;

/// Write `state` to `path` in the binary state format.
///
/// Layout (all integers and floats little-endian): magic `FVS1`,
/// `rows: u32`, `cols: u32`, `center: i64` (−1 when not canonical),
/// `chi_max: u64`, `svd_min: f64`, then per site `dl: u64`, `dr: u64`
/// followed by the `2·dl·dr` complex entries as `(re: f64, im: f64)`
/// pairs in column-major order of the `(dl·2) × dr` fused matrix.
pub fn write_state(path: &Path, state: &MpsState) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(STATE_MAGIC)?;
    let geom = state.geometry();
    write_u32(&mut out, geom.rows() as u32)?;
    write_u32(&mut out, geom.cols() as u32)?;
    let center = state.center().map_or(-1i64, |c| c as i64);
    write_i64(&mut out, center)?;
    write_u64(&mut out, state.chi_max() as u64)?;
    write_f64(&mut out, state.svd_min())?;
    for k in 0..state.n_sites() {
        let t = state.tensor(k);
        write_u64(&mut out, t.dl() as u64)?;
        write_u64(&mut out, t.dr() as u64)?;
        for z in t.lfused().iter() {
            write_f64(&mut out, z.re)?;
            write_f64(&mut out, z.im)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a state previously written by [`write_state`].
pub fn read_state(path: &Path) -> Result<MpsState> {
    let mut inp = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    inp.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(Error::invalid(format!(
            "{} is not a state file (bad leading bytes)",
            path.display()
        )));
    }
    let rows = read_u32(&mut inp)? as usize;
    let cols = read_u32(&mut inp)? as usize;
    let geom = LatticeGeometry::new(rows, cols)?;
    let center_raw = read_i64(&mut inp)?;
    let center = usize::try_from(center_raw).ok();
    let chi_max = read_u64(&mut inp)? as usize;
    let svd_min = read_f64(&mut inp)?;
    let n = geom.n_sites();
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let dl = read_u64(&mut inp)? as usize;
        let dr = read_u64(&mut inp)? as usize;
        if dl == 0 || dr == 0 || dl > MAX_FILE_BOND || dr > MAX_FILE_BOND {
            return Err(Error::invalid(format!(
                "corrupt state file: implausible bond dimensions {dl} x {dr}"
            )));
        }
        let mut m = DMatrix::zeros(dl * 2, dr);
        for z in m.iter_mut() {
            *z = C64::new(read_f64(&mut inp)?, read_f64(&mut inp)?);
        }
        tensors.push(SiteTensor::from_lfused(dl, dr, m));
    }
    let mut extra = [0u8; 1];
    if inp.read(&mut extra)? != 0 {
        return Err(Error::invalid("corrupt state file: trailing bytes"));
    }
    MpsState::from_raw_parts(geom, tensors, center, chi_max, svd_min)
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_i64<W: Write>(w: &mut W, v: i64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_i64<R: Read>(r: &mut R) -> Result<i64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(i64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

// ----- snapshot shot files --------------------------------------------------

/// One batch of projective measurements with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub geometry: LatticeGeometry,
    /// Evolution time the shots were drawn at.
    pub time: f64,
    /// Base RNG seed of the sampling run.
    pub seed: u64,
    pub shots: Vec<Snapshot>,
}

/// Write shots as text: `# key=value` header lines (geometry, time,
/// seed, shots) followed by one row-major `'0'`/`'1'` string per shot.
pub fn write_snapshots(path: &Path, file: &SnapshotFile) -> Result<()> {
    for snap in &file.shots {
        if snap.geometry() != file.geometry {
            return Err(Error::invalid(format!(
                "snapshot geometry {} does not match file geometry {}",
                snap.geometry().label(),
                file.geometry.label()
            )));
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# geometry={}", file.geometry.label())?;
    writeln!(out, "# time={}", file.time)?;
    writeln!(out, "# seed={}", file.seed)?;
    writeln!(out, "# shots={}", file.shots.len())?;
    for snap in &file.shots {
        writeln!(out, "{}", snap.to_row_major_string())?;
    }
    out.flush()?;
    Ok(())
}

/// Read a shot file previously written by [`write_snapshots`].
pub fn read_snapshots(path: &Path) -> Result<SnapshotFile> {
    let inp = BufReader::new(File::open(path)?);
    let mut geometry: Option<LatticeGeometry> = None;
    let mut time: Option<f64> = None;
    let mut seed: Option<u64> = None;
    let mut declared_shots: Option<usize> = None;
    let mut shots = Vec::new();
    for line in inp.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed header line {line:?}")))?;
            match key.trim() {
                "geometry" => geometry = Some(parse_geometry_label(value.trim())?),
                "time" => {
                    time = Some(value.trim().parse().map_err(|_| {
                        Error::invalid(format!("bad time in shot file header: {value:?}"))
                    })?)
                }
                "seed" => {
                    seed = Some(value.trim().parse().map_err(|_| {
                        Error::invalid(format!("bad seed in shot file header: {value:?}"))
                    })?)
                }
                "shots" => {
                    declared_shots = Some(value.trim().parse().map_err(|_| {
                        Error::invalid(format!("bad shot count in header: {value:?}"))
                    })?)
                }
                other => {
                    return Err(Error::invalid(format!("unknown shot-file header key {other:?}")))
                }
            }
            continue;
        }
        let geom = geometry
            .ok_or_else(|| Error::invalid("shot line appears before the geometry header"))?;
        shots.push(Snapshot::from_row_major_string(geom, line)?);
    }
    let geometry = geometry.ok_or_else(|| Error::invalid("shot file lacks a geometry header"))?;
    if let Some(n) = declared_shots {
        if n != shots.len() {
            return Err(Error::invalid(format!(
                "shot file declares {n} shots but contains {}",
                shots.len()
            )));
        }
    }
    Ok(SnapshotFile {
        geometry,
        time: time.unwrap_or(0.0),
        seed: seed.unwrap_or(0),
        shots,
    })
}

/// Parse a geometry label of the form `"3x4"` (rows × cols).
pub fn parse_geometry_label(label: &str) -> Result<LatticeGeometry> {
    let (r, c) = label
        .split_once('x')
        .ok_or_else(|| Error::invalid(format!("geometry label {label:?} is not ROWSxCOLS")))?;
    let rows = r
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad row count in geometry label {label:?}")))?;
    let cols = c
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad column count in geometry label {label:?}")))?;
    LatticeGeometry::new(rows, cols)
}

// ----- CSV emitters ---------------------------------------------------------

/// Write a trajectory as CSV with columns
/// `time,mz,ztot_var,p_ret,energy,max_bond,discarded_weight`.
pub fn write_trajectory_csv(path: &Path, points: &[TrajectoryPoint]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "time,mz,ztot_var,p_ret,energy,max_bond,discarded_weight")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.time,
            p.magnetization,
            p.ztot_variance,
            p.return_probability,
            p.energy,
            p.max_bond,
            p.discarded_weight
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Write the cluster-number density as `s,n` rows.
pub fn write_n_of_s_csv(path: &Path, stats: &ClusterStats) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "s,n")?;
    for (s, n) in &stats.n_of_s {
        writeln!(out, "{s},{n}")?;
    }
    out.flush()?;
    Ok(())
}

/// Write the largest-cluster distribution as `s_max,p` rows.
pub fn write_p_smax_csv(path: &Path, stats: &ClusterStats) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "s_max,p")?;
    for (s, p) in &stats.p_smax {
        writeln!(out, "{s},{p}")?;
    }
    out.flush()?;
    Ok(())
}

/// Write the Hamming-distance histogram as `d,p` rows.
pub fn write_hamming_csv(path: &Path, stats: &ClusterStats) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "d,p")?;
    for (d, p) in &stats.hamming {
        writeln!(out, "{d},{p}")?;
    }
    out.flush()?;
    Ok(())
}

/// Write the time-resolved largest-cluster table as `t,s_max,p` rows,
/// dense over all sizes `0..=N` for every recorded time.
pub fn write_pmax_heatmap_csv(path: &Path, heatmap: &PmaxHeatmap) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,s_max,p")?;
    for (t, row) in heatmap.times.iter().zip(&heatmap.rows) {
        for (s, p) in row.iter().enumerate() {
            writeln!(out, "{t},{s},{p}")?;
        }
    }
    out.flush()?;
    Ok(())
}

// ----- first-passage sweep CSV ----------------------------------------------

/// Result of one first-passage sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum FptOutcome {
    /// The curve crossed the threshold at this time.
    Reached(f64),
    /// The curve stayed above the threshold for the whole run.
    NotReached,
    /// The sweep point errored; the sweep carried on.
    Failed,
}

/// One row of the first-passage sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct FptRow {
    pub hq: f64,
    pub geometry: String,
    pub initial_state: String,
    pub threshold: f64,
    pub outcome: FptOutcome,
}

/// Incremental writer for the sweep CSV
/// (`hq,geometry,initial_state,t_fpt,threshold,reached`).
///
/// The header is written and flushed on creation and every row is
/// flushed as it lands, so a crashed sweep still leaves a valid CSV of
/// the points completed so far.
pub struct FptCsvWriter {
    out: BufWriter<File>,
}

impl FptCsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "hq,geometry,initial_state,t_fpt,threshold,reached")?;
        out.flush()?;
        Ok(FptCsvWriter { out })
    }

    pub fn write_row(&mut self, row: &FptRow) -> Result<()> {
        let (t_fpt, reached) = match &row.outcome {
            FptOutcome::Reached(t) => (t.to_string(), "true"),
            FptOutcome::NotReached => (String::new(), "false"),
            FptOutcome::Failed => (String::new(), "failed"),
        };
        writeln!(
            self.out,
            "{},{},{},{},{},{}",
            row.hq, row.geometry, row.initial_state, t_fpt, row.threshold, reached
        )?;
        self.out.flush()?;
        Ok(())
    }
}

/// Write a complete sweep table in one call.
pub fn write_fpt_csv(path: &Path, rows: &[FptRow]) -> Result<()> {
    let mut writer = FptCsvWriter::create(path)?;
    for row in rows {
        writer.write_row(row)?;
    }
    Ok(())
}
