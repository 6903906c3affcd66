//! Matrix-product states: canonical forms, expectation values, entropy,
//! truncation and perfect Born-rule sampling.
//!
//! A state on `N` chain sites is a train of rank-3 tensors
//! `A_k[a, s, b]` with left bond `a`, physical index `s` (0 = down,
//! 1 = up) and right bond `b`; boundary bonds have dimension 1. Tensors
//! are stored left-fused — as a `(dl * 2) x dr` matrix with row
//! `a + dl * s` — in column-major order, which makes the right-fused
//! view (`dl x (2 * dr)`, column `s + 2 * b`) the *same* buffer, so the
//! two reshapes needed by sweeping algorithms cost one copy and no index
//! shuffling.
//!
//! A state may carry a canonical *center*: every tensor left of it is a
//! left isometry, every tensor right of it a right isometry, and the
//! full norm sits in the center tensor. All public operations keep that
//! bookkeeping consistent or reset it to "unknown".

use nalgebra::{DMatrix, Dyn};
use rand::Rng as _;

use crate::clusters::Snapshot;
use crate::error::{Error, Result};
use crate::exact::DenseState;
use crate::lattice::LatticeGeometry;
use crate::linalg;
use crate::model::Pauli;
use crate::mpo;
use crate::rng::{shot_stream, substream, Rng};
use crate::C64;

/// Default threshold under which singular values are discarded.
pub const DEFAULT_SVD_MIN: f64 = 1e-10;

/// A definite spin orientation for one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Down,
    Up,
}

impl Spin {
    /// Physical-basis index of this orientation (down = 0, up = 1).
    pub fn index(&self) -> usize {
        match self {
            Spin::Down => 0,
            Spin::Up => 1,
        }
    }
}

/// One rank-3 MPS tensor in left-fused storage.
#[derive(Debug, Clone)]
pub(crate) struct SiteTensor {
    dl: usize,
    dr: usize,
    /// `(dl * 2) x dr`, element `(a + dl * s, b)` is `A[a, s, b]`.
    m: DMatrix<C64>,
}

impl SiteTensor {
    pub(crate) fn from_lfused(dl: usize, dr: usize, m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), dl * 2);
        debug_assert_eq!(m.ncols(), dr);
        SiteTensor { dl, dr, m }
    }

    /// Build from the right-fused `dl x (2 * dr)` view; same buffer
    /// layout, so this is a plain reshape.
    pub(crate) fn from_rfused(dl: usize, dr: usize, m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), dl);
        debug_assert_eq!(m.ncols(), 2 * dr);
        SiteTensor { dl, dr, m: m.reshape_generic(Dyn(dl * 2), Dyn(dr)) }
    }

    /// Stack the two physical slices `A[:, s, :]` into one tensor.
    pub(crate) fn from_phys(p0: &DMatrix<C64>, p1: &DMatrix<C64>) -> Self {
        debug_assert_eq!(p0.shape(), p1.shape());
        let (dl, dr) = p0.shape();
        let mut m = DMatrix::zeros(dl * 2, dr);
        m.view_mut((0, 0), (dl, dr)).copy_from(p0);
        m.view_mut((dl, 0), (dl, dr)).copy_from(p1);
        SiteTensor { dl, dr, m }
    }

    pub(crate) fn dl(&self) -> usize {
        self.dl
    }

    pub(crate) fn dr(&self) -> usize {
        self.dr
    }

    pub(crate) fn lfused(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub(crate) fn rfused(&self) -> DMatrix<C64> {
        self.m.clone().reshape_generic(Dyn(self.dl), Dyn(2 * self.dr))
    }

    /// The `dl x dr` slice for one physical index.
    pub(crate) fn phys(&self, s: usize) -> DMatrix<C64> {
        self.m.view((self.dl * s, 0), (self.dl, self.dr)).into_owned()
    }

    /// Contract a matrix onto the left bond: `A'[.., s, ..] = c * A[.., s, ..]`.
    pub(crate) fn absorb_left(&self, c: &DMatrix<C64>) -> SiteTensor {
        debug_assert_eq!(c.ncols(), self.dl);
        SiteTensor::from_rfused(c.nrows(), self.dr, c * self.rfused())
    }

    /// Contract a matrix onto the right bond: `A'[.., s, ..] = A[.., s, ..] * c`.
    pub(crate) fn absorb_right(&self, c: &DMatrix<C64>) -> SiteTensor {
        debug_assert_eq!(c.nrows(), self.dr);
        SiteTensor::from_lfused(self.dl, c.ncols(), &self.m * c)
    }

    /// Frobenius norm of the tensor.
    pub(crate) fn norm(&self) -> f64 {
        self.m.norm()
    }
}

/// Matrix-product state on the snake chain of a 2D lattice.
#[derive(Debug, Clone)]
pub struct MpsState {
    geom: LatticeGeometry,
    tensors: Vec<SiteTensor>,
    /// Canonical center, if established.
    center: Option<usize>,
    chi_max: usize,
    svd_min: f64,
}

impl MpsState {
    // ----- construction ---------------------------------------------------

    /// Product state with the given per-site orientations.
    pub fn product_state(geom: LatticeGeometry, spins: &[Spin]) -> Result<Self> {
        if spins.len() != geom.n_sites() {
            return Err(Error::invalid(format!(
                "expected {} spins for a {} lattice, got {}",
                geom.n_sites(),
                geom.label(),
                spins.len()
            )));
        }
        let tensors = spins
            .iter()
            .map(|s| {
                let mut m = DMatrix::zeros(2, 1);
                m[(s.index(), 0)] = C64::new(1.0, 0.0);
                SiteTensor::from_lfused(1, 1, m)
            })
            .collect();
        Ok(MpsState {
            geom,
            tensors,
            center: Some(0),
            chi_max: usize::MAX,
            svd_min: DEFAULT_SVD_MIN,
        })
    }

    /// All spins down — the false vacuum once the bias favours up.
    pub fn all_down(geom: LatticeGeometry) -> Result<Self> {
        Self::product_state(geom, &vec![Spin::Down; geom.n_sites()])
    }

    /// All spins up.
    pub fn all_up(geom: LatticeGeometry) -> Result<Self> {
        Self::product_state(geom, &vec![Spin::Up; geom.n_sites()])
    }

    /// Set the truncation policy used by operations that compress this
    /// state.
    pub fn with_truncation(mut self, chi_max: usize, svd_min: f64) -> Result<Self> {
        if chi_max == 0 {
            return Err(Error::invalid("chi_max must be at least 1"));
        }
        if !(svd_min >= 0.0) {
            return Err(Error::invalid(format!("svd_min must be non-negative, got {svd_min}")));
        }
        self.chi_max = chi_max;
        self.svd_min = svd_min;
        Ok(self)
    }

    /// Assemble a state from deserialized tensors, validating the bond
    /// structure.
    pub(crate) fn from_raw_parts(
        geom: LatticeGeometry,
        tensors: Vec<SiteTensor>,
        center: Option<usize>,
        chi_max: usize,
        svd_min: f64,
    ) -> Result<Self> {
        let n = geom.n_sites();
        if tensors.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} site tensors for a {} lattice, got {}",
                geom.label(),
                tensors.len()
            )));
        }
        if tensors[0].dl() != 1 || tensors[n - 1].dr() != 1 {
            return Err(Error::invalid("state tensors must have unit boundary bonds"));
        }
        for k in 0..n - 1 {
            if tensors[k].dr() != tensors[k + 1].dl() {
                return Err(Error::invalid(format!(
                    "bond mismatch between sites {k} and {}: {} vs {}",
                    k + 1,
                    tensors[k].dr(),
                    tensors[k + 1].dl()
                )));
            }
        }
        if let Some(c) = center {
            if c >= n {
                return Err(Error::invalid(format!("center {c} out of range for {n} sites")));
            }
        }
        if chi_max == 0 {
            return Err(Error::invalid("chi_max must be at least 1"));
        }
        if !(svd_min >= 0.0) {
            return Err(Error::invalid(format!("svd_min must be non-negative, got {svd_min}")));
        }
        for t in &tensors {
            if t.lfused().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::invalid("state tensors contain non-finite entries"));
            }
        }
        Ok(MpsState { geom, tensors, center, chi_max, svd_min })
    }

    /// Compress a dense state into MPS form by cascaded SVDs.
    ///
    /// Returns the state (left-canonical, center on the last site) and
    /// the total discarded weight; with `chi_max >= 2^(N/2)` and
    /// `svd_min = 0` the conversion is exact.
    pub fn from_dense(dense: &DenseState, chi_max: usize, svd_min: f64) -> Result<(Self, f64)> {
        let geom = dense.geometry();
        let n = geom.n_sites();
        let mut discarded_total = 0.0;
        let mut tensors = Vec::with_capacity(n);
        // Bit k of the basis index is site k, so site 0 varies fastest:
        // viewing the amplitudes column-major with 2 rows puts site 0 on
        // the row index, which is exactly the first unfolding.
        let mut rest = DMatrix::from_column_slice(2, 1 << (n - 1), dense.amplitudes());
        let mut dl = 1usize;
        for _ in 0..n - 1 {
            let t = linalg::svd_trunc(&rest, chi_max, svd_min)?;
            discarded_total += t.discarded;
            let keep = t.s.len();
            tensors.push(SiteTensor::from_lfused(dl, keep, t.u.clone()));
            // Remainder diag(s) * Vt, then pull the next site's physical
            // index out of the column space (a pure reshape).
            let mut rem = t.vt;
            for (r, &sv) in t.s.iter().enumerate() {
                for c in 0..rem.ncols() {
                    rem[(r, c)] *= C64::new(sv, 0.0);
                }
            }
            let cols = rem.ncols();
            rest = rem.reshape_generic(Dyn(keep * 2), Dyn(cols / 2));
            dl = keep;
        }
        tensors.push(SiteTensor::from_lfused(dl, 1, rest));
        let mut out = MpsState { geom, tensors, center: Some(n - 1), chi_max, svd_min };
        out.normalize()?;
        Ok((out, discarded_total))
    }

    /// Contract the full tensor train into a dense state.
    ///
    /// Limited to the dense-representation site cap; mainly used to
    /// cross-check MPS algorithms against the dense reference.
    pub fn to_dense(&self) -> Result<DenseState> {
        let n = self.n_sites();
        if n > crate::exact::MAX_DENSE_SITES {
            return Err(Error::invalid(format!(
                "dense contraction limited to {} sites, got {n}",
                crate::exact::MAX_DENSE_SITES
            )));
        }
        // Accumulator over (already-placed configurations) x (right bond).
        let mut acc = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for (k, t) in self.tensors.iter().enumerate() {
            let rows = 1usize << k;
            let mut next = DMatrix::zeros(rows * 2, t.dr());
            // New configuration index: old bits + 2^k * s.
            next.view_mut((0, 0), (rows, t.dr())).copy_from(&(&acc * t.phys(0)));
            next.view_mut((rows, 0), (rows, t.dr())).copy_from(&(&acc * t.phys(1)));
            acc = next;
        }
        DenseState::new(self.geom, acc.column(0).iter().copied().collect())
    }

    // ----- bookkeeping ----------------------------------------------------

    /// Lattice this state lives on.
    pub fn geometry(&self) -> LatticeGeometry {
        self.geom
    }

    /// Number of chain sites.
    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    /// Interior bond dimensions, left to right (`N - 1` entries).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.n_sites() - 1].iter().map(|t| t.dr()).collect()
    }

    /// Largest interior bond dimension (1 for a single site).
    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Bond-dimension cap carried by this state.
    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    /// Singular-value floor carried by this state.
    pub fn svd_min(&self) -> f64 {
        self.svd_min
    }

    pub(crate) fn tensor(&self, k: usize) -> &SiteTensor {
        &self.tensors[k]
    }

    /// Both physical slices of one site tensor, for environment
    /// contractions.
    pub(crate) fn tensor_pair(&self, k: usize) -> (DMatrix<C64>, DMatrix<C64>) {
        (self.tensors[k].phys(0), self.tensors[k].phys(1))
    }

    pub(crate) fn set_tensor(&mut self, k: usize, t: SiteTensor) {
        self.tensors[k] = t;
    }

    pub(crate) fn center(&self) -> Option<usize> {
        self.center
    }

    pub(crate) fn set_center(&mut self, c: Option<usize>) {
        self.center = c;
    }

    // ----- canonical form -------------------------------------------------

    /// QR-push the center one site to the right (no truncation).
    pub(crate) fn push_center_right(&mut self) -> Result<()> {
        let c = self.center.ok_or_else(|| Error::invalid("state has no canonical center"))?;
        if c + 1 >= self.n_sites() {
            return Err(Error::invalid("center already at the right edge"));
        }
        let t = &self.tensors[c];
        let qr = t.lfused().clone().qr();
        let q = qr.q();
        let r = qr.r();
        let rank = q.ncols();
        self.tensors[c] = SiteTensor::from_lfused(t.dl(), rank, q);
        self.tensors[c + 1] = self.tensors[c + 1].absorb_left(&r);
        self.center = Some(c + 1);
        Ok(())
    }

    /// QR-push the center one site to the left (no truncation).
    pub(crate) fn push_center_left(&mut self) -> Result<()> {
        let c = self.center.ok_or_else(|| Error::invalid("state has no canonical center"))?;
        if c == 0 {
            return Err(Error::invalid("center already at the left edge"));
        }
        let t = &self.tensors[c];
        let qr = t.rfused().adjoint().qr();
        let q = qr.q();
        let r = qr.r();
        let rank = q.ncols();
        self.tensors[c] = SiteTensor::from_rfused(rank, t.dr(), q.adjoint());
        let carry = r.adjoint();
        self.tensors[c - 1] = self.tensors[c - 1].absorb_right(&carry);
        self.center = Some(c - 1);
        Ok(())
    }

    /// Bring the state into mixed-canonical form with the given center.
    ///
    /// If a center is already established this moves it site by site;
    /// otherwise both halves are orthogonalised from scratch. The
    /// represented state is unchanged (QR only, no truncation).
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        let n = self.n_sites();
        if center >= n {
            return Err(Error::invalid(format!("center {center} out of range for {n} sites")));
        }
        match self.center {
            Some(c) if c == center => {}
            Some(c) if c < center => {
                for _ in c..center {
                    self.push_center_right()?;
                }
            }
            Some(c) => {
                for _ in center..c {
                    self.push_center_left()?;
                }
            }
            None => {
                self.center = Some(0);
                for _ in 0..center {
                    self.push_center_right()?;
                }
                self.center = Some(n - 1);
                for _ in center..n - 1 {
                    self.push_center_left()?;
                }
                self.center = Some(center);
            }
        }
        Ok(())
    }

    /// Euclidean norm of the represented state.
    pub fn norm(&self) -> f64 {
        match self.center {
            Some(c) => self.tensors[c].norm(),
            None => self.overlap_unchecked(self).norm().sqrt(),
        }
    }

    /// Scale the state to unit norm (establishing a center if needed).
    pub fn normalize(&mut self) -> Result<()> {
        if self.center.is_none() {
            self.canonicalize(0)?;
        }
        let c = self.center.expect("just established");
        let nrm = self.tensors[c].norm();
        if nrm < 1e-300 {
            return Err(Error::Numerical("cannot normalise a zero-norm state".into()));
        }
        let scaled = self.tensors[c].lfused() / C64::new(nrm, 0.0);
        self.tensors[c] = SiteTensor::from_lfused(self.tensors[c].dl(), self.tensors[c].dr(), scaled);
        Ok(())
    }

    // ----- overlaps and expectation values --------------------------------

    fn overlap_unchecked(&self, other: &MpsState) -> C64 {
        // Left-to-right transfer: v' = sum_s A_s^H v B_s.
        let mut v = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let mut next = DMatrix::zeros(a.dr(), b.dr());
            for s in 0..2 {
                next += a.phys(s).adjoint() * &v * b.phys(s);
            }
            v = next;
        }
        v[(0, 0)]
    }

    /// Inner product `<self|other>` (antilinear in `self`).
    pub fn overlap(&self, other: &MpsState) -> Result<C64> {
        if self.geom != other.geom {
            return Err(Error::invalid("overlap between states on different lattices"));
        }
        Ok(self.overlap_unchecked(other))
    }

    /// Norm-independent expectation value `<O_site>` of a single-site
    /// Pauli operator.
    pub fn expect_local(&self, op: Pauli, site: usize) -> Result<f64> {
        let n = self.n_sites();
        if site >= n {
            return Err(Error::invalid(format!("site {site} out of range for {n} sites")));
        }
        let o = op.matrix();
        // Two synchronised transfer products: one with the operator
        // inserted, one plain (for the squared norm).
        let mut with_op = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let mut plain = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for (k, t) in self.tensors.iter().enumerate() {
            let p0 = t.phys(0);
            let p1 = t.phys(1);
            let mut next_plain = DMatrix::zeros(t.dr(), t.dr());
            next_plain += p0.adjoint() * &plain * &p0;
            next_plain += p1.adjoint() * &plain * &p1;
            let next_op = if k == site {
                let mut acc = DMatrix::zeros(t.dr(), t.dr());
                let phys = [&p0, &p1];
                for (sp, bra) in phys.iter().enumerate() {
                    for (s, ket) in phys.iter().enumerate() {
                        if o[sp][s].norm() != 0.0 {
                            acc += bra.adjoint() * &with_op * *ket * o[sp][s];
                        }
                    }
                }
                acc
            } else {
                let mut acc = DMatrix::zeros(t.dr(), t.dr());
                acc += p0.adjoint() * &with_op * &p0;
                acc += p1.adjoint() * &with_op * &p1;
                acc
            };
            with_op = next_op;
            plain = next_plain;
        }
        let norm2 = plain[(0, 0)].re;
        if norm2 < 1e-300 {
            return Err(Error::Numerical("expectation value on a zero-norm state".into()));
        }
        Ok((with_op[(0, 0)] / norm2).re)
    }

    /// `<Z_k>` for every chain site, by one canonical sweep.
    ///
    /// Equivalent to calling [`expect_local`](Self::expect_local) per
    /// site but `O(N)` cheaper; norm-independent.
    pub fn expect_z_profile(&self) -> Result<Vec<f64>> {
        let n = self.n_sites();
        let mut work = self.clone();
        work.canonicalize(0)?;
        let norm2 = work.tensors[0].norm().powi(2);
        if norm2 < 1e-300 {
            return Err(Error::Numerical("expectation value on a zero-norm state".into()));
        }
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let t = &work.tensors[k];
            let down = t.phys(0).norm_squared();
            let up = t.phys(1).norm_squared();
            out.push((up - down) / norm2);
            if k + 1 < n {
                work.push_center_right()?;
            }
        }
        Ok(out)
    }

    /// First and second moments of the collective spin `sum_i Z_i`.
    ///
    /// The first moment sums the per-site profile; the second contracts
    /// the square of the collective-spin MPO against the state.
    pub fn expect_ztot_moments(&self) -> Result<(f64, f64)> {
        let m1 = self.expect_z_profile()?.iter().sum();
        let sq = mpo::ztot_squared_mpo(self.n_sites());
        let norm2 = self.overlap_unchecked(self).re;
        if norm2 < 1e-300 {
            return Err(Error::Numerical("expectation value on a zero-norm state".into()));
        }
        let m2 = sq.expectation(self)? / norm2;
        Ok((m1, m2))
    }

    // ----- structural operations ------------------------------------------

    /// Linear combination `ca * a + cb * b` as a new MPS.
    ///
    /// Bond dimensions add (block construction); the result has no
    /// canonical center and inherits the stricter truncation policy of
    /// the inputs. The result is *not* normalised.
    pub fn superpose(a: &MpsState, b: &MpsState, ca: C64, cb: C64) -> Result<MpsState> {
        if a.geom != b.geom {
            return Err(Error::invalid("superposing states on different lattices"));
        }
        let n = a.n_sites();
        let mut tensors = Vec::with_capacity(n);
        if n == 1 {
            let m = a.tensors[0].lfused() * ca + b.tensors[0].lfused() * cb;
            tensors.push(SiteTensor::from_lfused(1, 1, m));
        } else {
            for k in 0..n {
                let ta = &a.tensors[k];
                let tb = &b.tensors[k];
                let t = if k == 0 {
                    // Row concatenation on the right bond; coefficients
                    // folded in here.
                    let mut p0 = DMatrix::zeros(1, ta.dr() + tb.dr());
                    let mut p1 = DMatrix::zeros(1, ta.dr() + tb.dr());
                    p0.view_mut((0, 0), (1, ta.dr())).copy_from(&(ta.phys(0) * ca));
                    p0.view_mut((0, ta.dr()), (1, tb.dr())).copy_from(&(tb.phys(0) * cb));
                    p1.view_mut((0, 0), (1, ta.dr())).copy_from(&(ta.phys(1) * ca));
                    p1.view_mut((0, ta.dr()), (1, tb.dr())).copy_from(&(tb.phys(1) * cb));
                    SiteTensor::from_phys(&p0, &p1)
                } else if k == n - 1 {
                    let mut p0 = DMatrix::zeros(ta.dl() + tb.dl(), 1);
                    let mut p1 = DMatrix::zeros(ta.dl() + tb.dl(), 1);
                    p0.view_mut((0, 0), (ta.dl(), 1)).copy_from(&ta.phys(0));
                    p0.view_mut((ta.dl(), 0), (tb.dl(), 1)).copy_from(&tb.phys(0));
                    p1.view_mut((0, 0), (ta.dl(), 1)).copy_from(&ta.phys(1));
                    p1.view_mut((ta.dl(), 0), (tb.dl(), 1)).copy_from(&tb.phys(1));
                    SiteTensor::from_phys(&p0, &p1)
                } else {
                    // Direct (block-diagonal) sum on both bonds.
                    let (dl, dr) = (ta.dl() + tb.dl(), ta.dr() + tb.dr());
                    let mut p0 = DMatrix::zeros(dl, dr);
                    let mut p1 = DMatrix::zeros(dl, dr);
                    p0.view_mut((0, 0), (ta.dl(), ta.dr())).copy_from(&ta.phys(0));
                    p0.view_mut((ta.dl(), ta.dr()), (tb.dl(), tb.dr())).copy_from(&tb.phys(0));
                    p1.view_mut((0, 0), (ta.dl(), ta.dr())).copy_from(&ta.phys(1));
                    p1.view_mut((ta.dl(), ta.dr()), (tb.dl(), tb.dr())).copy_from(&tb.phys(1));
                    SiteTensor::from_phys(&p0, &p1)
                };
                tensors.push(t);
            }
        }
        Ok(MpsState {
            geom: a.geom,
            tensors,
            center: None,
            chi_max: a.chi_max.min(b.chi_max),
            svd_min: a.svd_min.max(b.svd_min),
        })
    }

    /// Compress to at most `chi_max` per bond, dropping singular values
    /// below `svd_min`.
    ///
    /// Returns the compressed, renormalised state plus the discarded
    /// weight per interior bond (squared Schmidt coefficients dropped,
    /// measured on the normalised state). The fidelity loss is bounded
    /// by the summed report; truncating an already-compressed state
    /// again is a no-op.
    pub fn truncated(&self, chi_max: usize, svd_min: f64) -> Result<(MpsState, TruncationReport)> {
        if chi_max == 0 {
            return Err(Error::invalid("chi_max must be at least 1"));
        }
        let n = self.n_sites();
        let mut work = self.clone();
        work.canonicalize(0)?;
        work.normalize()?;
        work.chi_max = chi_max;
        work.svd_min = svd_min;
        let mut per_bond = vec![0.0f64; n.saturating_sub(1)];
        for k in 0..n.saturating_sub(1) {
            // Center at k: SVD its left-fused matrix; U stays as the new
            // left-isometric tensor, diag(s) Vt moves right.
            let t = &work.tensors[k];
            let svd = linalg::svd_trunc(t.lfused(), chi_max, svd_min)?;
            per_bond[k] = svd.discarded;
            let keep = svd.s.len();
            work.tensors[k] = SiteTensor::from_lfused(t.dl(), keep, svd.u.clone());
            let mut carry = svd.vt;
            for (r, &sv) in svd.s.iter().enumerate() {
                for c in 0..carry.ncols() {
                    carry[(r, c)] *= C64::new(sv, 0.0);
                }
            }
            work.tensors[k + 1] = work.tensors[k + 1].absorb_left(&carry);
            work.center = Some(k + 1);
            // Renormalise the carried center so later per-bond weights
            // stay relative to a unit-norm state.
            work.normalize()?;
        }
        let total = per_bond.iter().sum();
        Ok((work, TruncationReport { per_bond, total }))
    }

    // ----- entropy --------------------------------------------------------

    /// Von Neumann entanglement entropy (natural log) across the bond
    /// with `cut` sites to its left (`1 <= cut <= N - 1`).
    pub fn half_chain_entropy(&self, cut: usize) -> Result<f64> {
        let n = self.n_sites();
        if cut == 0 || cut >= n {
            return Err(Error::invalid(format!(
                "cut must split the chain properly: 1 <= cut <= {}, got {cut}",
                n - 1
            )));
        }
        let mut work = self.clone();
        work.canonicalize(cut)?;
        work.normalize()?;
        // With the center at `cut`, its left bond carries the Schmidt
        // decomposition of the bipartition: singular values of the
        // right-fused center are the Schmidt coefficients.
        let svd = work.tensors[cut].rfused().svd(false, false);
        let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
        let mut entropy = 0.0;
        for s in svd.singular_values.iter() {
            let p = s * s / total;
            if p > 1e-16 {
                entropy -= p * p.ln();
            }
        }
        Ok(entropy)
    }

    /// Entropy across the central cut (`floor(N/2)` sites on the left).
    pub fn central_entropy(&self) -> Result<f64> {
        self.half_chain_entropy(self.n_sites() / 2)
    }

    // ----- sampling -------------------------------------------------------

    /// Draw one projective measurement outcome in the `Z` basis.
    ///
    /// Exact (non-Metropolis) sampling: with the state right-canonical,
    /// sweep left to right and draw each spin from its conditional
    /// probability given everything already fixed. This call prepares
    /// the canonical copy itself; use [`sample_snapshots`](Self::sample_snapshots)
    /// to amortise that cost over many shots.
    pub fn sample_snapshot(&self, rng: &mut Rng) -> Result<Snapshot> {
        let mut ready = self.clone();
        ready.canonicalize(0)?;
        ready.sample_prepared(rng)
    }

    /// Draw `shots` independent snapshots deterministically from
    /// (`seed`, `time_index`).
    ///
    /// Shot `j` uses its own counter-based stream
    /// (see [`crate::rng::shot_stream`]), so the result is bitwise
    /// independent of batching and parallel scheduling.
    pub fn sample_snapshots(&self, shots: usize, seed: u64, time_index: usize) -> Result<Vec<Snapshot>> {
        use rayon::prelude::*;
        let mut ready = self.clone();
        ready.canonicalize(0)?;
        (0..shots)
            .into_par_iter()
            .map(|j| {
                let mut rng = substream(seed, shot_stream(time_index, j));
                ready.sample_prepared(&mut rng)
            })
            .collect()
    }

    /// Conditional site-by-site sampling; requires center at site 0.
    fn sample_prepared(&self, rng: &mut Rng) -> Result<Snapshot> {
        debug_assert_eq!(self.center, Some(0));
        let n = self.n_sites();
        let mut bits = Vec::with_capacity(n);
        // Conditioned left boundary vector, kept at unit norm.
        let mut w = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for t in &self.tensors {
            let u0 = &w * t.phys(0);
            let u1 = &w * t.phys(1);
            let q0 = u0.norm_squared();
            let q1 = u1.norm_squared();
            let total = q0 + q1;
            if !(total > 1e-300) || !total.is_finite() {
                return Err(Error::Numerical("sampling hit a zero-probability branch".into()));
            }
            let p_down = q0 / total;
            let up = rng.random::<f64>() >= p_down;
            bits.push(up);
            let (chosen, q) = if up { (u1, q1) } else { (u0, q0) };
            w = chosen / C64::new(q.sqrt(), 0.0);
        }
        Snapshot::from_chain_bits(self.geom, bits)
    }

    // ----- randomised construction ----------------------------------------

    /// Random MPS with bond dimension `chi` whose central-cut entropy
    /// matches `target` to within `tol`.
    ///
    /// The knob is a one-parameter family: a fixed random state `R` is
    /// blended with the all-down product state,
    /// `psi(theta) = cos(theta) |down...> + sin(theta) R`, truncated to
    /// `chi`. The entropy grows continuously from 0, so a bisection on
    /// `theta` lands on the target; `R` is redrawn (up to 8 times) if
    /// its own entropy cannot reach the target at this `chi`. Fully
    /// deterministic for a given generator state.
    pub fn random_with_entropy(
        geom: LatticeGeometry,
        chi: usize,
        target: f64,
        tol: f64,
        rng: &mut Rng,
    ) -> Result<MpsState> {
        let n = geom.n_sites();
        if n < 2 {
            return Err(Error::invalid("entropy targeting needs at least two sites"));
        }
        if chi == 0 {
            return Err(Error::invalid("chi must be at least 1"));
        }
        if !(target >= 0.0 && target.is_finite()) {
            return Err(Error::invalid(format!("target entropy must be finite and >= 0, got {target}")));
        }
        if !(tol > 0.0) {
            return Err(Error::invalid("entropy tolerance must be positive"));
        }
        let product = MpsState::all_down(geom)?;
        if target <= tol {
            return Ok(product);
        }

        let entropy_at = |theta: f64, random: &MpsState| -> Result<(f64, MpsState)> {
            let c = C64::new(theta.cos(), 0.0);
            let s = C64::new(theta.sin(), 0.0);
            let mixed = MpsState::superpose(&product, random, c, s)?;
            let (state, _) = mixed.truncated(chi, 0.0)?;
            let ent = state.central_entropy()?;
            Ok((ent, state))
        };

        for _attempt in 0..8 {
            let random = Self::random_low_bond(geom, chi, rng)?;
            let (hi_entropy, hi_state) = entropy_at(std::f64::consts::FRAC_PI_2, &random)?;
            if hi_entropy + tol < target {
                continue; // this draw cannot reach the target
            }
            if (hi_entropy - target).abs() <= tol {
                return Ok(hi_state);
            }
            let mut lo = 0.0f64;
            let mut hi = std::f64::consts::FRAC_PI_2;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (ent, state) = entropy_at(mid, &random)?;
                if (ent - target).abs() <= tol {
                    return Ok(state);
                }
                if ent < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Err(Error::Convergence {
                message: format!("entropy bisection failed to reach {target} within {tol}"),
                energy_trace: vec![],
            });
        }
        Err(Error::Convergence {
            message: format!(
                "target entropy {target} unreachable at bond dimension {chi} after 8 attempts"
            ),
            energy_trace: vec![],
        })
    }

    /// Random normalised MPS with bond profile capped at `chi`; used as
    /// a bias-free starting point for variational searches.
    pub(crate) fn random_low_bond(geom: LatticeGeometry, chi: usize, rng: &mut Rng) -> Result<MpsState> {
        let n = geom.n_sites();
        // Max useful rank at bond k is min(2^(k+1), 2^(N-1-k)), capped.
        let bond = |k: usize| -> usize {
            let left = 1usize << (k + 1).min(30);
            let right = 1usize << (n - 1 - k).min(30);
            left.min(right).min(chi)
        };
        let mut tensors = Vec::with_capacity(n);
        for k in 0..n {
            let dl = if k == 0 { 1 } else { bond(k - 1) };
            let dr = if k == n - 1 { 1 } else { bond(k) };
            let m = DMatrix::from_fn(dl * 2, dr, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            tensors.push(SiteTensor::from_lfused(dl, dr, m));
        }
        let mut state = MpsState {
            geom,
            tensors,
            center: None,
            chi_max: chi,
            svd_min: DEFAULT_SVD_MIN,
        };
        state.normalize()?;
        Ok(state)
    }
}

/// Discarded weight bookkeeping from a truncation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    /// Discarded weight per interior bond, left to right.
    pub per_bond: Vec<f64>,
    /// Sum over bonds; bounds the fidelity loss of the sweep.
    pub total: f64,
}
