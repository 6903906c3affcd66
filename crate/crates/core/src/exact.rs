//! Dense state vectors and exact spectra on small lattices.
//!
//! This module is the reference implementation: it represents the full
//! many-body wavefunction as `2^N` complex amplitudes and applies the
//! Hamiltonian term by term with bit arithmetic, with no tensor-network
//! approximations anywhere. The MPS machinery in the rest of the crate
//! is validated against it on every lattice small enough to afford the
//! exponential cost.
//!
//! Basis convention (fixed crate-wide, see the crate docs): bit `k` of a
//! basis index is the spin at chain site `k`, `0` meaning down
//! (`Z = -1`). Basis index 0 is the all-down product state.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::linalg;
use crate::model::{hamiltonian_terms, HamTerm, ModelParams};
use crate::C64;

/// Hard cap on lattice sites for dense representations (`2^20`
/// amplitudes, ~16 MiB per state).
pub const MAX_DENSE_SITES: usize = 20;

/// Largest Hilbert-space dimension for which spectra are computed by
/// full dense diagonalisation; above this, Lanczos with deflation is
/// used instead.
const FULL_DIAG_MAX_DIM: usize = 512;

fn check_dense_size(geom: &LatticeGeometry) -> Result<()> {
    if geom.n_sites() > MAX_DENSE_SITES {
        return Err(Error::invalid(format!(
            "dense representation limited to {MAX_DENSE_SITES} sites, got {}",
            geom.n_sites()
        )));
    }
    Ok(())
}

/// A normalised dense wavefunction over all `2^N` basis states.
#[derive(Debug, Clone)]
pub struct DenseState {
    geom: LatticeGeometry,
    amps: Vec<C64>,
}

impl DenseState {
    /// Wrap raw amplitudes, normalising them to unit norm.
    ///
    /// Errors if the length is not `2^N`, any amplitude is non-finite,
    /// or the norm is zero.
    pub fn new(geom: LatticeGeometry, mut amps: Vec<C64>) -> Result<Self> {
        check_dense_size(&geom)?;
        let dim = 1usize << geom.n_sites();
        if amps.len() != dim {
            return Err(Error::invalid(format!(
                "expected {dim} amplitudes for {} sites, got {}",
                geom.n_sites(),
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Numerical("non-finite amplitude in dense state".into()));
        }
        let nrm = linalg::cnorm(&amps);
        if nrm < 1e-300 {
            return Err(Error::invalid("dense state has zero norm"));
        }
        for a in &mut amps {
            *a /= nrm;
        }
        Ok(DenseState { geom, amps })
    }

    /// The computational basis state with the given index.
    pub fn basis_state(geom: LatticeGeometry, index: usize) -> Result<Self> {
        check_dense_size(&geom)?;
        let dim = 1usize << geom.n_sites();
        if index >= dim {
            return Err(Error::invalid(format!("basis index {index} out of range {dim}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(DenseState { geom, amps })
    }

    /// Product state with `bits[k] = true` meaning chain site `k` is up.
    pub fn product_state(geom: LatticeGeometry, bits: &[bool]) -> Result<Self> {
        if bits.len() != geom.n_sites() {
            return Err(Error::invalid(format!(
                "expected {} spins, got {}",
                geom.n_sites(),
                bits.len()
            )));
        }
        let mut index = 0usize;
        for (k, &up) in bits.iter().enumerate() {
            if up {
                index |= 1 << k;
            }
        }
        Self::basis_state(geom, index)
    }

    /// All spins down: the metastable branch once the bias favours up.
    pub fn all_down(geom: LatticeGeometry) -> Result<Self> {
        Self::basis_state(geom, 0)
    }

    /// Lattice this state lives on.
    pub fn geometry(&self) -> LatticeGeometry {
        self.geom
    }

    /// Number of sites.
    pub fn n_sites(&self) -> usize {
        self.geom.n_sites()
    }

    /// Amplitudes in basis order.
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// Euclidean norm (unit by construction, up to roundoff).
    pub fn norm(&self) -> f64 {
        linalg::cnorm(&self.amps)
    }

    /// Inner product `<self|other>`.
    pub fn overlap(&self, other: &DenseState) -> Result<C64> {
        if self.geom != other.geom {
            return Err(Error::invalid("overlap between states on different lattices"));
        }
        Ok(linalg::dotc(&self.amps, &other.amps))
    }

    /// Born-rule probability of each basis outcome.
    pub fn born_probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Expectation value of `Z` at a chain site.
    pub fn expect_z(&self, site: usize) -> Result<f64> {
        if site >= self.n_sites() {
            return Err(Error::invalid(format!("site {site} out of range")));
        }
        let mask = 1usize << site;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let z = if i & mask != 0 { 1.0 } else { -1.0 };
                z * a.norm_sqr()
            })
            .sum())
    }

    /// Expectation value of `X` at a chain site.
    pub fn expect_x(&self, site: usize) -> Result<f64> {
        if site >= self.n_sites() {
            return Err(Error::invalid(format!("site {site} out of range")));
        }
        let mask = 1usize << site;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| (a.conj() * self.amps[i ^ mask]).re)
            .sum())
    }

    /// Expectation value of `Y` at a chain site.
    pub fn expect_y(&self, site: usize) -> Result<f64> {
        if site >= self.n_sites() {
            return Err(Error::invalid(format!("site {site} out of range")));
        }
        let mask = 1usize << site;
        // <i|Y|i^mask> is +i when i has the site down, -i when up.
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let y = if i & mask == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                (a.conj() * y * self.amps[i ^ mask]).re
            })
            .sum())
    }

    /// Site-averaged magnetisation `(1/N) sum_i <Z_i>`.
    pub fn magnetization(&self) -> f64 {
        let n = self.n_sites();
        let mut m = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let ups = (i as u64).count_ones() as f64;
            // sum_k z_k = ups - downs = 2 ups - N
            m += (2.0 * ups - n as f64) * a.norm_sqr();
        }
        m / n as f64
    }

    /// First and second moments of the collective spin `sum_i Z_i`.
    pub fn ztot_moments(&self) -> (f64, f64) {
        let n = self.n_sites() as f64;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let s = 2.0 * (i as u64).count_ones() as f64 - n;
            let p = a.norm_sqr();
            m1 += s * p;
            m2 += s * s * p;
        }
        (m1, m2)
    }

    /// Energy expectation value under `h`.
    pub fn energy(&self, h: &SparseHamiltonian) -> Result<f64> {
        if h.geom != self.geom {
            return Err(Error::invalid("hamiltonian and state on different lattices"));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        h.apply(&self.amps, &mut out);
        Ok(linalg::dotc(&self.amps, &out).re)
    }
}

/// The Hamiltonian applied term-by-term with bit arithmetic.
///
/// Diagonal (`ZZ` and `Z`) contributions are precomputed per basis
/// state; each transverse term becomes one bit-flip mask. Memory is
/// `O(2^N)`, application is `O(2^N * N)`, and no matrix is ever formed
/// unless explicitly requested via [`to_dense_matrix`](Self::to_dense_matrix).
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    geom: LatticeGeometry,
    diag: Vec<f64>,
    flips: Vec<(usize, f64)>,
}

impl SparseHamiltonian {
    /// Build the operator for `geom` and `p`.
    pub fn new(geom: LatticeGeometry, p: &ModelParams) -> Result<Self> {
        check_dense_size(&geom)?;
        let n = geom.n_sites();
        let dim = 1usize << n;
        let terms = hamiltonian_terms(&geom, p);
        let mut diag = vec![0.0f64; dim];
        let mut flips = Vec::new();
        for term in &terms {
            match *term {
                HamTerm::ZZ { a, b, weight } => {
                    let (ma, mb) = (1usize << a, 1usize << b);
                    for (i, d) in diag.iter_mut().enumerate() {
                        let za = if i & ma != 0 { 1.0 } else { -1.0 };
                        let zb = if i & mb != 0 { 1.0 } else { -1.0 };
                        *d += weight * za * zb;
                    }
                }
                HamTerm::Z { site, weight } => {
                    let m = 1usize << site;
                    for (i, d) in diag.iter_mut().enumerate() {
                        let z = if i & m != 0 { 1.0 } else { -1.0 };
                        *d += weight * z;
                    }
                }
                HamTerm::X { site, weight } => flips.push((1usize << site, weight)),
            }
        }
        Ok(SparseHamiltonian { geom, diag, flips })
    }

    /// Lattice this operator acts on.
    pub fn geometry(&self) -> LatticeGeometry {
        self.geom
    }

    /// Hilbert-space dimension `2^N`.
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `out = H * x`.
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.diag[i] * x[i];
        }
        for &(mask, w) in &self.flips {
            for i in 0..x.len() {
                out[i] += w * x[i ^ mask];
            }
        }
    }

    /// Materialise the full matrix (real symmetric in this basis).
    ///
    /// Refuses above `4096 x 4096`; intended for cross-checks against
    /// independently built operators on small lattices.
    pub fn to_dense_matrix(&self) -> Result<DMatrix<f64>> {
        let dim = self.dim();
        if dim > 4096 {
            return Err(Error::invalid(format!(
                "dense matrix limited to dimension 4096, got {dim}"
            )));
        }
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = self.diag[i];
        }
        for &(mask, w) in &self.flips {
            for i in 0..dim {
                m[(i ^ mask, i)] += w;
            }
        }
        Ok(m)
    }
}

/// The `k` lowest eigenpairs of `h`, values ascending.
///
/// Uses full dense diagonalisation up to dimension 512 and Lanczos with
/// deflation restarts beyond; either way every returned pair has
/// residual `||H v - E v|| <= 1e-10`, so exactly degenerate multiplets
/// come out with one orthonormal vector per copy. `seed` only influences
/// solver internals (restart vectors), never the mathematical result.
pub fn lowest_eigenpairs(
    h: &SparseHamiltonian,
    k: usize,
    seed: u64,
) -> Result<Vec<(f64, DenseState)>> {
    let dim = h.dim();
    if k > dim {
        return Err(Error::invalid(format!("requested {k} eigenpairs, dimension is {dim}")));
    }
    let pairs: Vec<(f64, Vec<C64>)> = if dim <= FULL_DIAG_MAX_DIM {
        let m = h.to_dense_matrix()?;
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite"));
        order
            .into_iter()
            .take(k)
            .map(|j| {
                let val = eig.eigenvalues[j];
                let vec: Vec<C64> =
                    eig.eigenvectors.column(j).iter().map(|&x| C64::new(x, 0.0)).collect();
                (val, vec)
            })
            .collect()
    } else {
        linalg::lowest_eigenpairs(|x, out| h.apply(x, out), dim, k, seed, 1e-10)?
    };
    pairs
        .into_iter()
        .map(|(val, vec)| Ok((val, DenseState::new(h.geom, vec)?)))
        .collect()
}

/// Ground state and energy of `h`.
pub fn ground_state(h: &SparseHamiltonian, seed: u64) -> Result<(f64, DenseState)> {
    let mut pairs = lowest_eigenpairs(h, 1, seed)?;
    Ok(pairs.remove(0))
}

/// Evolve `psi0` under `h` and record the state at each requested time.
///
/// `times` must be finite, non-negative and strictly ascending; `t = 0`
/// returns the initial state itself. Small systems use the exact
/// eigendecomposition (no time-step error at any horizon); larger ones
/// take Krylov exponential steps between consecutive output times with
/// per-step tolerance `1e-12`.
pub fn evolve(h: &SparseHamiltonian, psi0: &DenseState, times: &[f64]) -> Result<Vec<DenseState>> {
    if psi0.geom != h.geom {
        return Err(Error::invalid("hamiltonian and state on different lattices"));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("output times must be strictly ascending"));
        }
    }
    if let Some(&t0) = times.first() {
        if !(t0 >= 0.0) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("output times must be finite and non-negative"));
        }
    }

    let dim = h.dim();
    if dim <= FULL_DIAG_MAX_DIM {
        let m = h.to_dense_matrix()?;
        let eig = m.symmetric_eigen();
        // Complex coefficients of psi0 in the (real) eigenbasis.
        let mut coeff = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            let mut c = C64::new(0.0, 0.0);
            for i in 0..dim {
                c += eig.eigenvectors[(i, j)] * psi0.amps[i];
            }
            coeff[j] = c;
        }
        times
            .iter()
            .map(|&t| {
                let mut amps = vec![C64::new(0.0, 0.0); dim];
                for j in 0..dim {
                    let phase = (C64::new(0.0, -t) * eig.eigenvalues[j]).exp();
                    let cj = coeff[j] * phase;
                    for i in 0..dim {
                        amps[i] += eig.eigenvectors[(i, j)] * cj;
                    }
                }
                DenseState::new(h.geom, amps)
            })
            .collect()
    } else {
        let mut out = Vec::with_capacity(times.len());
        let mut current = psi0.amps.clone();
        let mut t_now = 0.0f64;
        let mut apply = |x: &[C64], y: &mut [C64]| h.apply(x, y);
        for &t in times {
            let dt = t - t_now;
            if dt > 0.0 {
                current = linalg::krylov_expm_apply(&mut apply, &current, C64::new(0.0, -dt), 1e-12)?;
            }
            t_now = t;
            out.push(DenseState::new(h.geom, current.clone())?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geom(rows: usize, cols: usize) -> LatticeGeometry {
        LatticeGeometry::new(rows, cols).unwrap()
    }

    fn params(j: f64, g: f64, h: f64) -> ModelParams {
        ModelParams::new(j, g, h).unwrap()
    }

    #[test]
    fn refuses_oversized_lattices() {
        let g = geom(5, 5);
        assert!(SparseHamiltonian::new(g, &params(1.0, 1.0, 0.0)).is_err());
        assert!(DenseState::all_down(g).is_err());
    }

    #[test]
    fn single_site_longitudinal_spectrum() {
        // H = -h Z has eigenvalues -h (up) and +h (down).
        let h = SparseHamiltonian::new(geom(1, 1), &params(0.0, 0.0, 0.3)).unwrap();
        let pairs = lowest_eigenpairs(&h, 2, 0).unwrap();
        assert_relative_eq!(pairs[0].0, -0.3, epsilon = 1e-12);
        assert_relative_eq!(pairs[1].0, 0.3, epsilon = 1e-12);
        // Ground state is spin-up.
        assert_relative_eq!(pairs[0].1.expect_z(0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_site_transverse_spectrum() {
        // H = -g X: eigenvalues -+g, ground state (|down> + |up>)/sqrt(2).
        let h = SparseHamiltonian::new(geom(1, 1), &params(0.0, 0.8, 0.0)).unwrap();
        let (e0, psi) = ground_state(&h, 0).unwrap();
        assert_relative_eq!(e0, -0.8, epsilon = 1e-12);
        assert_relative_eq!(psi.expect_x(0).unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(psi.expect_z(0).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn two_site_spectrum_by_hand() {
        // 1x2 chain at J = 1, g = 1, h = 0. Decoupling the singlet-like
        // combination and diagonalising the remaining 2x2 block by hand
        // gives the spectrum {-sqrt(5), -1, +1, +sqrt(5)}.
        let h = SparseHamiltonian::new(geom(1, 2), &params(1.0, 1.0, 0.0)).unwrap();
        let pairs = lowest_eigenpairs(&h, 4, 0).unwrap();
        let got: Vec<f64> = pairs.iter().map(|(e, _)| *e).collect();
        let sqrt5 = 5.0f64.sqrt();
        let expect = [-sqrt5, -1.0, 1.0, sqrt5];
        for (g, e) in got.iter().zip(expect) {
            assert_relative_eq!(*g, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn classical_2x2_low_spectrum() {
        // g = 0 makes H diagonal. From the classical energies: all-up is
        // -4.4, all-down -3.6, then single flips from all-up at -0.2.
        let h = SparseHamiltonian::new(geom(2, 2), &params(1.0, 0.0, 0.1)).unwrap();
        let pairs = lowest_eigenpairs(&h, 3, 0).unwrap();
        assert_relative_eq!(pairs[0].0, -4.4, epsilon = 1e-12);
        assert_relative_eq!(pairs[1].0, -3.6, epsilon = 1e-12);
        assert_relative_eq!(pairs[2].0, -0.2, epsilon = 1e-12);
        assert_relative_eq!(pairs[0].1.magnetization(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dense_matrix_is_symmetric_and_matches_apply() {
        let h = SparseHamiltonian::new(geom(2, 2), &params(1.1, 0.6, -0.2)).unwrap();
        let m = h.to_dense_matrix().unwrap();
        assert!((m.clone() - m.transpose()).norm() < 1e-14);
        // Matrix-on-basis-vector equals apply().
        for i in 0..h.dim() {
            let e = DenseState::basis_state(h.geometry(), i).unwrap();
            let mut out = vec![C64::new(0.0, 0.0); h.dim()];
            h.apply(e.amplitudes(), &mut out);
            for r in 0..h.dim() {
                assert_relative_eq!(out[r].re, m[(r, i)], epsilon = 1e-13);
                assert_relative_eq!(out[r].im, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn product_state_energy_matches_classical_energy() {
        let g = geom(2, 3);
        let p = params(0.9, 0.4, 0.15);
        let h = SparseHamiltonian::new(g, &p).unwrap();
        let terms = hamiltonian_terms(&g, &p);
        let bits = [true, false, false, true, true, false];
        let psi = DenseState::product_state(g, &bits).unwrap();
        assert_relative_eq!(
            psi.energy(&h).unwrap(),
            crate::model::diagonal_energy(&terms, &bits),
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_site_y_expectation() {
        // (|down> - i |up>)/sqrt(2) is the +1 eigenvector of Y in this
        // basis convention; flipping the phase flips the sign.
        let g1 = geom(1, 1);
        let plus = DenseState::new(g1, vec![C64::new(1.0, 0.0), C64::new(0.0, -1.0)]).unwrap();
        let minus = DenseState::new(g1, vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        assert_relative_eq!(plus.expect_y(0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(minus.expect_y(0).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn ghz_collective_spin_moments() {
        // (|all-down> + |all-up>)/sqrt(2): <sum Z> = 0 and
        // <(sum Z)^2> = N^2, so the variance is N^2.
        let g = geom(2, 2);
        let dim = 1 << 4;
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[0] = C64::new(1.0, 0.0);
        amps[dim - 1] = C64::new(1.0, 0.0);
        let psi = DenseState::new(g, amps).unwrap();
        let (m1, m2) = psi.ztot_moments();
        assert_relative_eq!(m1, 0.0, epsilon = 1e-12);
        assert_relative_eq!(m2, 16.0, epsilon = 1e-12);
        assert_relative_eq!(psi.magnetization(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn born_probabilities_sum_to_one() {
        let h = SparseHamiltonian::new(geom(1, 3), &params(1.0, 0.7, 0.1)).unwrap();
        let (_, psi) = ground_state(&h, 0).unwrap();
        let p = psi.born_probabilities();
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn transverse_only_volution_matches_product_formula() {
        // At J = h = 0 each site precesses independently:
        // |<psi0|psi(t)>|^2 = cos(g t)^(2N) and <Z_i>(t) = -cos(2 g t)
        // for an initial all-down state.
        let g2 = geom(2, 2);
        let gf = 0.7;
        let h = SparseHamiltonian::new(g2, &params(0.0, gf, 0.0)).unwrap();
        let psi0 = DenseState::all_down(g2).unwrap();
        let times = [0.0, 0.3, 0.9, 1.7];
        let states = evolve(&h, &psi0, &times).unwrap();
        for (&t, psi) in times.iter().zip(&states) {
            let ret = psi0.overlap(psi).unwrap().norm_sqr();
            assert_relative_eq!(ret, (gf * t).cos().powi(8), epsilon = 1e-10);
            assert_relative_eq!(psi.magnetization(), -(2.0 * gf * t).cos(), epsilon = 1e-10);
        }
    }

    #[test]
    fn krylov_evolution_path_matches_product_formula() {
        // 1x10 exceeds the full-diagonalisation cutoff, forcing the
        // Krylov stepping path; the analytic product formula still holds.
        let g10 = geom(1, 10);
        let gf = 0.5;
        let h = SparseHamiltonian::new(g10, &params(0.0, gf, 0.0)).unwrap();
        assert!(h.dim() > 512);
        let psi0 = DenseState::all_down(g10).unwrap();
        let times = [0.4, 1.1];
        let states = evolve(&h, &psi0, &times).unwrap();
        for (&t, psi) in times.iter().zip(&states) {
            let ret = psi0.overlap(psi).unwrap().norm_sqr();
            assert_relative_eq!(ret, (gf * t).cos().powi(20), epsilon = 1e-8);
            assert_relative_eq!(psi.norm(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn evolution_conserves_energy() {
        let g2 = geom(2, 2);
        let h = SparseHamiltonian::new(g2, &params(1.0, 1.0, -0.2)).unwrap();
        let psi0 = DenseState::all_down(g2).unwrap();
        let e0 = psi0.energy(&h).unwrap();
        let states = evolve(&h, &psi0, &[2.5]).unwrap();
        assert_relative_eq!(states[0].energy(&h).unwrap(), e0, epsilon = 1e-9);
    }

    #[test]
    fn evolve_rejects_bad_time_grids() {
        let g2 = geom(1, 2);
        let h = SparseHamiltonian::new(g2, &params(1.0, 1.0, 0.0)).unwrap();
        let psi0 = DenseState::all_down(g2).unwrap();
        assert!(evolve(&h, &psi0, &[0.5, 0.5]).is_err());
        assert!(evolve(&h, &psi0, &[-0.1, 0.5]).is_err());
        assert!(evolve(&h, &psi0, &[0.1, f64::NAN]).is_err());
    }

    #[test]
    fn overlap_requires_matching_lattices() {
        let a = DenseState::all_down(geom(1, 2)).unwrap();
        let b = DenseState::all_down(geom(2, 1)).unwrap();
        assert!(a.overlap(&b).is_err());
    }
}
