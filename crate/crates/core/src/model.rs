//! Model parameters, Hamiltonian coupling lists and classical bubble
//! energetics.
//!
//! The Hamiltonian is
//!
//! ```text
//! H = -J sum_<ij> Z_i Z_j  -  g sum_i X_i  -  h sum_i Z_i
//! ```
//!
//! with Pauli matrices (eigenvalues +-1) and `<ij>` the open-boundary
//! nearest-neighbour bonds of a [`LatticeGeometry`]. The model is handed
//! to the rest of the crate in two interchangeable forms: a flat list of
//! [`HamTerm`]s (consumed by the dense reference implementation in
//! [`crate::exact`]) and an MPO compiled from that same list (see
//! [`crate::mpo::hamiltonian_mpo`]).
//!
//! The bubble functions at the bottom implement the classical droplet
//! picture of false-vacuum decay: a domain of true vacuum of radius `R`
//! costs surface energy but gains bulk energy, giving a barrier in 2D and
//! no barrier at all in 1D.

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;

/// Couplings of the transverse-field Ising model with longitudinal bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Ising coupling `J` on nearest-neighbour `Z Z` bonds (`J > 0` is
    /// ferromagnetic).
    pub j: f64,
    /// Transverse field `g` on every site (`X` term).
    pub g: f64,
    /// Longitudinal bias `h` on every site (`Z` term). Positive `h`
    /// favours spin-up.
    pub h: f64,
}

impl ModelParams {
    /// Create a parameter set, rejecting non-finite values.
    pub fn new(j: f64, g: f64, h: f64) -> Result<Self> {
        for (name, v) in [("J", j), ("g", g), ("h", h)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("coupling {name} must be finite, got {v}")));
            }
        }
        Ok(ModelParams { j, g, h })
    }

    /// Same couplings with the longitudinal field replaced by `h`.
    pub fn with_h(self, h: f64) -> Result<Self> {
        ModelParams::new(self.j, self.g, h)
    }
}

/// Single-site Pauli operator label.
///
/// Matrices are written in the crate's physical basis (index 0 = down,
/// 1 = up), so `Z = diag(-1, +1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// 2x2 matrix `[[m00, m01], [m10, m11]]` with row/column 0 = down.
    pub fn matrix(&self) -> [[crate::C64; 2]; 2] {
        use crate::C64;
        let z = |re, im| C64::new(re, im);
        match self {
            Pauli::X => [[z(0.0, 0.0), z(1.0, 0.0)], [z(1.0, 0.0), z(0.0, 0.0)]],
            Pauli::Y => [[z(0.0, 0.0), z(0.0, 1.0)], [z(0.0, -1.0), z(0.0, 0.0)]],
            Pauli::Z => [[z(-1.0, 0.0), z(0.0, 0.0)], [z(0.0, 0.0), z(1.0, 0.0)]],
        }
    }
}

/// One additive term of the Hamiltonian, in chain indices.
///
/// Weights already include the global signs, i.e. the full Hamiltonian is
/// exactly the sum of the listed terms. Terms with zero weight are never
/// emitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HamTerm {
    /// `weight * Z_a Z_b` on a lattice bond (`a < b`).
    ZZ { a: usize, b: usize, weight: f64 },
    /// `weight * X_site`.
    X { site: usize, weight: f64 },
    /// `weight * Z_site`.
    Z { site: usize, weight: f64 },
}

/// Full coupling list of `H` for the given geometry and parameters.
///
/// Bond terms carry weight `-J`, transverse terms `-g`, longitudinal
/// terms `-h`; zero-weight families are omitted. The list order is
/// deterministic: all `ZZ` bonds in [`LatticeGeometry::bonds`] order,
/// then `X` and `Z` site terms in chain order.
pub fn hamiltonian_terms(geom: &LatticeGeometry, p: &ModelParams) -> Vec<HamTerm> {
    let mut terms = Vec::new();
    if p.j != 0.0 {
        for (a, b) in geom.bonds() {
            terms.push(HamTerm::ZZ { a, b, weight: -p.j });
        }
    }
    if p.g != 0.0 {
        for site in 0..geom.n_sites() {
            terms.push(HamTerm::X { site, weight: -p.g });
        }
    }
    if p.h != 0.0 {
        for site in 0..geom.n_sites() {
            terms.push(HamTerm::Z { site, weight: -p.h });
        }
    }
    terms
}

/// Energy of a computational basis state under the diagonal part of the
/// term list (`X` terms have no diagonal matrix element).
///
/// `bits[k] = true` means chain site `k` is spin-up (`Z = +1`). For a
/// product state in the `Z` basis this is the full energy expectation
/// value, i.e. the classical Ising energy.
pub fn diagonal_energy(terms: &[HamTerm], bits: &[bool]) -> f64 {
    let z = |k: usize| if bits[k] { 1.0 } else { -1.0 };
    terms
        .iter()
        .map(|t| match *t {
            HamTerm::ZZ { a, b, weight } => weight * z(a) * z(b),
            HamTerm::Z { site, weight } => weight * z(site),
            HamTerm::X { .. } => 0.0,
        })
        .sum()
}

/// Surface tension and bulk energy gain entering the droplet picture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleParams {
    /// Domain-wall surface tension `sigma` (energy per unit wall length).
    pub surface_tension: f64,
    /// Bulk energy density gain `delta_eps` of true over false vacuum.
    pub bulk_gain: f64,
}

impl BubbleParams {
    /// Create droplet parameters; both must be strictly positive.
    pub fn new(surface_tension: f64, bulk_gain: f64) -> Result<Self> {
        if !(surface_tension > 0.0 && surface_tension.is_finite()) {
            return Err(Error::invalid(format!(
                "surface tension must be positive and finite, got {surface_tension}"
            )));
        }
        if !(bulk_gain > 0.0 && bulk_gain.is_finite()) {
            return Err(Error::invalid(format!(
                "bulk energy gain must be positive and finite, got {bulk_gain}"
            )));
        }
        Ok(BubbleParams { surface_tension, bulk_gain })
    }

    /// Critical radius `sigma / delta_eps` where the 2D bubble energy
    /// peaks.
    pub fn critical_radius(&self) -> f64 {
        self.surface_tension / self.bulk_gain
    }

    /// Barrier height `pi sigma^2 / delta_eps`, the 2D bubble energy at
    /// the critical radius.
    pub fn barrier_height(&self) -> f64 {
        std::f64::consts::PI * self.surface_tension * self.surface_tension / self.bulk_gain
    }
}

/// Energy of a circular true-vacuum bubble of radius `r` in 2D:
/// `2 pi r sigma - pi r^2 delta_eps`.
///
/// Positive near `r = 0`, peaked at the critical radius, negative beyond;
/// this is the nucleation barrier. Errors for negative `r`.
pub fn bubble_energy_2d(p: &BubbleParams, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("bubble radius must be non-negative, got {r}")));
    }
    let pi = std::f64::consts::PI;
    Ok(2.0 * pi * r * p.surface_tension - pi * r * r * p.bulk_gain)
}

/// Energy of a true-vacuum segment of length `len` in 1D:
/// `2 sigma - len * delta_eps`.
///
/// The wall cost is length-independent (two endpoints), so the energy is
/// strictly decreasing in `len`: 1D has no nucleation barrier beyond the
/// fixed two-wall cost. Errors for negative `len`.
pub fn bubble_energy_1d(p: &BubbleParams, len: f64) -> Result<f64> {
    if !(len >= 0.0) {
        return Err(Error::invalid(format!("segment length must be non-negative, got {len}")));
    }
    Ok(2.0 * p.surface_tension - len * p.bulk_gain)
}
