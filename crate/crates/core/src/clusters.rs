//! Spin snapshots and connected-cluster statistics.
//!
//! A [`Snapshot`] is one projective measurement outcome: a classical
//! spin configuration on the lattice. Decay of the false vacuum shows up
//! in these configurations as connected domains ("bubbles") of flipped
//! spins, so the analysis here is percolation-style: find the connected
//! clusters of flipped sites under 2D nearest-neighbour adjacency and
//! histogram their sizes across many shots.
//!
//! Connectivity is always the *lattice* adjacency of
//! [`LatticeGeometry::neighbors`] — two sites being neighbours along the
//! internal snake chain is irrelevant unless they are also neighbours on
//! the 2D lattice.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;

/// One measured spin configuration, stored in chain (snake) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    geom: LatticeGeometry,
    bits: Vec<bool>,
}

impl Snapshot {
    /// Wrap chain-ordered bits (`true` = spin-up).
    pub fn from_chain_bits(geom: LatticeGeometry, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != geom.n_sites() {
            return Err(Error::invalid(format!(
                "snapshot needs {} spins for a {} lattice, got {}",
                geom.n_sites(),
                geom.label(),
                bits.len()
            )));
        }
        Ok(Snapshot { geom, bits })
    }

    /// Lattice the snapshot lives on.
    pub fn geometry(&self) -> LatticeGeometry {
        self.geom
    }

    /// Spins in chain order (`true` = up).
    pub fn chain_bits(&self) -> &[bool] {
        &self.bits
    }

    /// Whether the spin at a chain site is up.
    pub fn is_up(&self, site: usize) -> bool {
        self.bits[site]
    }

    /// Number of up spins, i.e. the Hamming distance from the all-down
    /// configuration (and `N` minus the distance from all-up).
    pub fn up_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Render as `'0'`/`'1'` characters in row-major 2D order (row 0
    /// left to right, then row 1, ...), independent of the snake.
    pub fn to_row_major_string(&self) -> String {
        let mut s = String::with_capacity(self.geom.n_sites());
        for r in 0..self.geom.rows() {
            for c in 0..self.geom.cols() {
                let k = self.geom.snake_index(r, c).expect("in range");
                s.push(if self.bits[k] { '1' } else { '0' });
            }
        }
        s
    }

    /// Parse the row-major rendering produced by
    /// [`to_row_major_string`](Self::to_row_major_string).
    pub fn from_row_major_string(geom: LatticeGeometry, s: &str) -> Result<Self> {
        let chars: Vec<char> = s.trim().chars().collect();
        if chars.len() != geom.n_sites() {
            return Err(Error::invalid(format!(
                "snapshot string has {} characters, expected {}",
                chars.len(),
                geom.n_sites()
            )));
        }
        let mut bits = vec![false; geom.n_sites()];
        let mut it = chars.into_iter();
        for r in 0..geom.rows() {
            for c in 0..geom.cols() {
                let ch = it.next().expect("length checked");
                let up = match ch {
                    '0' => false,
                    '1' => true,
                    other => {
                        return Err(Error::invalid(format!(
                            "invalid snapshot character {other:?}, expected '0' or '1'"
                        )))
                    }
                };
                bits[geom.snake_index(r, c).expect("in range")] = up;
            }
        }
        Snapshot::from_chain_bits(geom, bits)
    }
}

/// Polarised reference configuration that counts as "unflipped".
///
/// With [`AllDown`](FlipReference::AllDown) (the false vacuum of a
/// down-prepared quench) a *flipped* site is an up spin; with
/// [`AllUp`](FlipReference::AllUp) the roles mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipReference {
    AllDown,
    AllUp,
}

impl FlipReference {
    /// Whether an up-spin (`true`) counts as flipped relative to this
    /// reference.
    pub fn is_flipped(&self, up: bool) -> bool {
        match self {
            FlipReference::AllDown => up,
            FlipReference::AllUp => !up,
        }
    }

    /// Parse `"down"` / `"up"` labels used by config files and the CLI.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "down" => Ok(FlipReference::AllDown),
            "up" => Ok(FlipReference::AllUp),
            other => Err(Error::Config(format!(
                "unknown flip reference {other:?}, expected \"down\" or \"up\""
            ))),
        }
    }
}

/// Disjoint-set forest with path compression and union by size.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Sizes of all connected clusters of flipped sites, largest first.
///
/// Two flipped sites belong to the same cluster iff they are connected
/// through a path of flipped 2D nearest neighbours (open boundaries, no
/// wrap-around, no diagonals). An unflipped snapshot yields an empty
/// list.
pub fn cluster_sizes(snap: &Snapshot, reference: FlipReference) -> Vec<usize> {
    let geom = snap.geometry();
    let n = geom.n_sites();
    let flipped: Vec<bool> = snap.chain_bits().iter().map(|&up| reference.is_flipped(up)).collect();
    let mut uf = UnionFind::new(n);
    for (a, b) in geom.bonds() {
        if flipped[a] && flipped[b] {
            uf.union(a, b);
        }
    }
    let mut count: BTreeMap<usize, usize> = BTreeMap::new();
    for site in 0..n {
        if flipped[site] {
            let root = uf.find(site);
            *count.entry(root).or_insert(0) += 1;
        }
    }
    let mut sizes: Vec<usize> = count.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Aggregated cluster statistics over a set of snapshots.
///
/// All histograms are keyed by integer size/count and use `BTreeMap` so
/// iteration (and thus any serialisation) is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    /// Number of snapshots aggregated.
    pub shots: usize,
    /// `n(s)`: mean number of clusters of size `s` per snapshot.
    pub n_of_s: BTreeMap<usize, f64>,
    /// `P(s_max = s)`: distribution of the largest cluster size,
    /// including the `s = 0` bin for snapshots with no flipped site.
    pub p_smax: BTreeMap<usize, f64>,
    /// Distribution of the flipped-site count (the Hamming distance
    /// from the reference configuration).
    pub hamming: BTreeMap<usize, f64>,
}

/// Aggregate cluster statistics over `shots`.
///
/// All snapshots must share one geometry and the slice must be
/// non-empty. The `p_smax` and `hamming` maps are probability
/// distributions (each sums to 1); `n_of_s` is a per-shot average.
pub fn accumulate_stats(shots: &[Snapshot], reference: FlipReference) -> Result<ClusterStats> {
    let first = shots
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty set of snapshots"))?;
    let geom = first.geometry();
    let mut n_of_s: BTreeMap<usize, f64> = BTreeMap::new();
    let mut p_smax: BTreeMap<usize, f64> = BTreeMap::new();
    let mut hamming: BTreeMap<usize, f64> = BTreeMap::new();
    for snap in shots {
        if snap.geometry() != geom {
            return Err(Error::invalid("snapshots from different lattices in one aggregate"));
        }
        let sizes = cluster_sizes(snap, reference);
        for &s in &sizes {
            *n_of_s.entry(s).or_insert(0.0) += 1.0;
        }
        let smax = sizes.first().copied().unwrap_or(0);
        *p_smax.entry(smax).or_insert(0.0) += 1.0;
        let flips = snap.chain_bits().iter().filter(|&&up| reference.is_flipped(up)).count();
        *hamming.entry(flips).or_insert(0.0) += 1.0;
    }
    let norm = shots.len() as f64;
    for v in n_of_s.values_mut() {
        *v /= norm;
    }
    for v in p_smax.values_mut() {
        *v /= norm;
    }
    for v in hamming.values_mut() {
        *v /= norm;
    }
    Ok(ClusterStats { shots: shots.len(), n_of_s, p_smax, hamming })
}

/// Largest-cluster distribution across measurement times.
#[derive(Debug, Clone, PartialEq)]
pub struct PmaxHeatmap {
    /// Measurement times, one per row.
    pub times: Vec<f64>,
    /// Number of lattice sites; columns run `s = 0 ..= n_sites`.
    pub n_sites: usize,
    /// `rows[t][s] = P(s_max = s)` at `times[t]`; each row sums to 1.
    pub rows: Vec<Vec<f64>>,
}

/// Build the `P(s_max)` heatmap for a sampled trajectory.
///
/// `slices` pairs each measurement time with the snapshots drawn there;
/// every slice must be non-empty and share one geometry.
pub fn pmax_heatmap(slices: &[(f64, Vec<Snapshot>)], reference: FlipReference) -> Result<PmaxHeatmap> {
    if slices.is_empty() {
        return Err(Error::invalid("heatmap needs at least one time slice"));
    }
    let geom = slices[0]
        .1
        .first()
        .ok_or_else(|| Error::invalid("empty snapshot slice in heatmap input"))?
        .geometry();
    let n = geom.n_sites();
    let mut times = Vec::with_capacity(slices.len());
    let mut rows = Vec::with_capacity(slices.len());
    for (t, shots) in slices {
        let stats = accumulate_stats(shots, reference)?;
        if shots[0].geometry() != geom {
            return Err(Error::invalid("snapshots from different lattices in one heatmap"));
        }
        let mut row = vec![0.0f64; n + 1];
        for (&s, &p) in &stats.p_smax {
            row[s] = p;
        }
        times.push(*t);
        rows.push(row);
    }
    Ok(PmaxHeatmap { times, n_sites: n, rows })
}
