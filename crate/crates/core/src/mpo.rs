//! Matrix-product operators: a finite-state compiler for sums of Pauli
//! terms, expectation values and variances against MPS states, and the
//! environment contractions shared by the sweeping algorithms.
//!
//! An MPO tensor maps a left virtual state to a right virtual state
//! with a 2x2 physical operator attached; tensors here are stored
//! sparsely as `(left, right, op)` triples because Hamiltonian MPOs are
//! mostly zeros. Virtual states follow the usual automaton picture:
//! state 0 is "no operator placed yet" (`ready`), the last state is
//! "term complete" (`done`), and the states in between carry one open
//! long-range bond each. A two-site coupling `Z_a Z_b` occupies exactly
//! the cuts it crosses, so the bond dimension equals the number of
//! simultaneously open couplings plus two — for the snake-ordered 2D
//! lattice that is a few more than the column count, independent of the
//! number of rows.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::model::{hamiltonian_terms, HamTerm, ModelParams, Pauli};
use crate::mps::MpsState;
use crate::C64;

type Op2 = [[C64; 2]; 2];

fn zero_op() -> Op2 {
    [[C64::new(0.0, 0.0); 2]; 2]
}

fn identity_op() -> Op2 {
    let mut o = zero_op();
    o[0][0] = C64::new(1.0, 0.0);
    o[1][1] = C64::new(1.0, 0.0);
    o
}

fn scaled_op(p: Pauli, w: f64) -> Op2 {
    let m = p.matrix();
    let mut o = zero_op();
    for r in 0..2 {
        for c in 0..2 {
            o[r][c] = m[r][c] * w;
        }
    }
    o
}

fn add_assign_op(dst: &mut Op2, src: &Op2) {
    for r in 0..2 {
        for c in 0..2 {
            dst[r][c] += src[r][c];
        }
    }
}

fn op_product(a: &Op2, b: &Op2) -> Op2 {
    let mut o = zero_op();
    for r in 0..2 {
        for c in 0..2 {
            for t in 0..2 {
                o[r][c] += a[r][t] * b[t][c];
            }
        }
    }
    o
}

/// One sparse MPO tensor: `(left_state, right_state, operator)` triples.
#[derive(Debug, Clone)]
pub(crate) struct MpoTensor {
    dl: usize,
    dr: usize,
    entries: Vec<(usize, usize, Op2)>,
}

impl MpoTensor {
    pub(crate) fn entries(&self) -> &[(usize, usize, Op2)] {
        &self.entries
    }
}

/// Matrix-product operator on an `n`-site chain.
#[derive(Debug, Clone)]
pub struct Mpo {
    n: usize,
    tensors: Vec<MpoTensor>,
}

impl Mpo {
    /// Compile a sum of Pauli terms into an MPO.
    ///
    /// Couplings place an unweighted `Z` at their opening site, carry an
    /// identity across intermediate cuts, and close with `weight * Z`;
    /// single-site terms on the same site are merged into one matrix.
    pub fn from_terms(n: usize, terms: &[HamTerm]) -> Result<Mpo> {
        if n == 0 {
            return Err(Error::invalid("an operator needs at least one site"));
        }
        let mut singles: Vec<Op2> = vec![zero_op(); n];
        let mut has_single = vec![false; n];
        let mut bonds: Vec<(usize, usize, f64)> = Vec::new();
        for term in terms {
            match *term {
                HamTerm::ZZ { a, b, weight } => {
                    if a >= b || b >= n {
                        return Err(Error::invalid(format!(
                            "coupling ({a}, {b}) invalid on {n} sites"
                        )));
                    }
                    bonds.push((a, b, weight));
                }
                HamTerm::X { site, weight } => {
                    if site >= n {
                        return Err(Error::invalid(format!("site {site} out of range for {n} sites")));
                    }
                    add_assign_op(&mut singles[site], &scaled_op(Pauli::X, weight));
                    has_single[site] = true;
                }
                HamTerm::Z { site, weight } => {
                    if site >= n {
                        return Err(Error::invalid(format!("site {site} out of range for {n} sites")));
                    }
                    add_assign_op(&mut singles[site], &scaled_op(Pauli::Z, weight));
                    has_single[site] = true;
                }
            }
        }

        // Virtual states per cut: `ready` (cuts 0..n-1), one carrier per
        // coupling crossing the cut (cuts a+1..=b), `done` (cuts 1..=n).
        // Layout: ready first, carriers in coupling order, done last.
        let carriers_at = |cut: usize| -> Vec<usize> {
            bonds
                .iter()
                .enumerate()
                .filter(|(_, &(a, b, _))| a < cut && cut <= b)
                .map(|(i, _)| i)
                .collect()
        };
        let ready_at = |cut: usize| cut < n;

        let mut tensors = Vec::with_capacity(n);
        for k in 0..n {
            let lc = carriers_at(k);
            let rc = carriers_at(k + 1);
            let l_ready = usize::from(ready_at(k));
            let r_ready = usize::from(ready_at(k + 1));
            let dl = lc.len() + l_ready + usize::from(k > 0);
            let dr = rc.len() + r_ready + 1;
            let l_done = dl - 1;
            let r_done = dr - 1;
            let l_carrier =
                |bond: usize| l_ready + lc.iter().position(|&b| b == bond).expect("carrier present");
            let r_carrier =
                |bond: usize| r_ready + rc.iter().position(|&b| b == bond).expect("carrier present");
            let mut entries = Vec::new();
            if ready_at(k) && ready_at(k + 1) {
                entries.push((0, 0, identity_op()));
            }
            if k > 0 {
                entries.push((l_done, r_done, identity_op()));
            }
            if has_single[k] {
                entries.push((0, r_done, singles[k]));
            }
            for (i, &(a, b, w)) in bonds.iter().enumerate() {
                if a == k {
                    entries.push((0, r_carrier(i), scaled_op(Pauli::Z, 1.0)));
                } else if a < k && k < b {
                    entries.push((l_carrier(i), r_carrier(i), identity_op()));
                } else if b == k {
                    entries.push((l_carrier(i), r_done, scaled_op(Pauli::Z, w)));
                }
            }
            tensors.push(MpoTensor { dl, dr, entries });
        }
        Ok(Mpo { n, tensors })
    }

    /// The model Hamiltonian as an MPO over the snake chain.
    pub fn hamiltonian(geom: LatticeGeometry, params: &ModelParams) -> Result<Mpo> {
        Mpo::from_terms(geom.n_sites(), &hamiltonian_terms(&geom, params))
    }

    /// Number of chain sites.
    pub fn n_sites(&self) -> usize {
        self.n
    }

    /// Interior virtual bond dimensions, left to right.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.n - 1].iter().map(|t| t.dr).collect()
    }

    /// Largest virtual bond dimension.
    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub(crate) fn tensor(&self, k: usize) -> &MpoTensor {
        &self.tensors[k]
    }

    /// Raw matrix element `<state|O|state>` (not norm-divided).
    pub fn expectation(&self, state: &MpsState) -> Result<f64> {
        self.check_sites(state)?;
        let mut env = vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))];
        for k in 0..self.n {
            let (a0, a1) = state.tensor_pair(k);
            env = left_env_step(&env, &self.tensors[k], (&a0, &a1));
        }
        debug_assert_eq!(env.len(), 1);
        let val = env[0][(0, 0)];
        debug_assert!(val.im.abs() < 1e-8 * (1.0 + val.re.abs()), "non-Hermitian expectation");
        Ok(val.re)
    }

    /// Raw matrix element `<state|O^2|state>` (not norm-divided).
    pub fn expectation_squared(&self, state: &MpsState) -> Result<f64> {
        self.check_sites(state)?;
        // Stacked environment: one index per MPO copy.
        let mut env = vec![vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))]];
        for k in 0..self.n {
            let t = &self.tensors[k];
            let (a0, a1) = state.tensor_pair(k);
            let dr = a0.ncols();
            let mut next = vec![vec![DMatrix::<C64>::zeros(dr, dr); t.dr]; t.dr];
            for &(u1, v1, ref op1) in &t.entries {
                for &(u2, v2, ref op2) in &t.entries {
                    let combined = op_product(op1, op2);
                    let e = &env[u1][u2];
                    for sp in 0..2 {
                        for s in 0..2 {
                            let c = combined[sp][s];
                            if c.norm() == 0.0 {
                                continue;
                            }
                            let bra = if sp == 0 { &a0 } else { &a1 };
                            let ket = if s == 0 { &a0 } else { &a1 };
                            next[v1][v2] += bra.adjoint() * e * ket * c;
                        }
                    }
                }
            }
            env = next;
        }
        let val = env[0][0][(0, 0)];
        Ok(val.re)
    }

    /// Variance `<O^2> - <O>^2` on the normalised version of `state`.
    pub fn variance(&self, state: &MpsState) -> Result<f64> {
        let norm2 = state.overlap(state)?.re;
        if norm2 < 1e-300 {
            return Err(Error::Numerical("variance of a zero-norm state".into()));
        }
        let mean = self.expectation(state)? / norm2;
        let second = self.expectation_squared(state)? / norm2;
        Ok(second - mean * mean)
    }

    /// Dense matrix form, for cross-checks on small chains.
    pub fn to_dense_matrix(&self) -> Result<DMatrix<C64>> {
        if self.n > 12 {
            return Err(Error::invalid(format!(
                "dense operator limited to 12 sites, got {}",
                self.n
            )));
        }
        // Accumulate per virtual state; bit k of a basis index is site k.
        let mut acc = vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))];
        for t in &self.tensors {
            let dim = acc[0].nrows();
            let mut next = vec![DMatrix::<C64>::zeros(dim * 2, dim * 2); t.dr];
            for &(u, v, ref op) in &t.entries {
                let old = &acc[u];
                for sp in 0..2 {
                    for s in 0..2 {
                        let c = op[sp][s];
                        if c.norm() == 0.0 {
                            continue;
                        }
                        for r in 0..dim {
                            for col in 0..dim {
                                let x = old[(r, col)];
                                if x.norm() != 0.0 {
                                    next[v][(r + dim * sp, col + dim * s)] += x * c;
                                }
                            }
                        }
                    }
                }
            }
            acc = next;
        }
        debug_assert_eq!(acc.len(), 1);
        Ok(acc.pop().expect("single final state"))
    }

    fn check_sites(&self, state: &MpsState) -> Result<()> {
        if state.n_sites() != self.n {
            return Err(Error::invalid(format!(
                "operator on {} sites applied to a {}-site state",
                self.n,
                state.n_sites()
            )));
        }
        Ok(())
    }
}

/// The square of the collective spin, `(sum_i Z_i)^2`, as a bond-3 MPO.
///
/// Expanded as `n * I + 2 * sum_{i<j} Z_i Z_j`: identity closures carry
/// the diagonal `Z_i^2 = I` part and a single carrier state serves every
/// pair because all pairs share the same operator content.
pub fn ztot_squared_mpo(n: usize) -> Mpo {
    assert!(n >= 1);
    if n == 1 {
        // (Z)^2 = I.
        let t = MpoTensor { dl: 1, dr: 1, entries: vec![(0, 0, identity_op())] };
        return Mpo { n, tensors: vec![t] };
    }
    let id = identity_op();
    let z = scaled_op(Pauli::Z, 1.0);
    let z2 = scaled_op(Pauli::Z, 2.0);
    let mut tensors = Vec::with_capacity(n);
    for k in 0..n {
        // States: 0 = ready, 1 = carrying one Z, 2 = done.
        let t = if k == 0 {
            MpoTensor { dl: 1, dr: 3, entries: vec![(0, 0, id), (0, 1, z), (0, 2, id)] }
        } else if k == n - 1 {
            MpoTensor { dl: 3, dr: 1, entries: vec![(0, 0, id), (1, 0, z2), (2, 0, id)] }
        } else {
            MpoTensor {
                dl: 3,
                dr: 3,
                entries: vec![
                    (0, 0, id),
                    (0, 1, z),
                    (0, 2, id),
                    (1, 1, id),
                    (1, 2, z2),
                    (2, 2, id),
                ],
            }
        };
        tensors.push(t);
    }
    Mpo { n, tensors }
}

/// Push a left environment through one site.
///
/// `env[u]` is the `(bra_bond x ket_bond)` block for MPO state `u` at
/// the cut left of the site; the result is the same structure one cut
/// to the right. `phys` holds the site's two physical slices for bra
/// and ket alike (expectation values of one state).
pub(crate) fn left_env_step(
    env: &[DMatrix<C64>],
    t: &MpoTensor,
    phys: (&DMatrix<C64>, &DMatrix<C64>),
) -> Vec<DMatrix<C64>> {
    left_env_step_mixed(env, t, phys, phys)
}

/// Like [`left_env_step`] but with distinct bra and ket site tensors.
pub(crate) fn left_env_step_mixed(
    env: &[DMatrix<C64>],
    t: &MpoTensor,
    bra_phys: (&DMatrix<C64>, &DMatrix<C64>),
    ket_phys: (&DMatrix<C64>, &DMatrix<C64>),
) -> Vec<DMatrix<C64>> {
    let dr_bra = bra_phys.0.ncols();
    let dr_ket = ket_phys.0.ncols();
    let mut next = vec![DMatrix::<C64>::zeros(dr_bra, dr_ket); t.dr];
    for &(u, v, ref op) in &t.entries {
        let e = &env[u];
        for sp in 0..2 {
            for s in 0..2 {
                let c = op[sp][s];
                if c.norm() == 0.0 {
                    continue;
                }
                let bra = if sp == 0 { bra_phys.0 } else { bra_phys.1 };
                let ket = if s == 0 { ket_phys.0 } else { ket_phys.1 };
                next[v] += bra.adjoint() * e * ket * c;
            }
        }
    }
    next
}

/// Push a right environment through one site (mirror of
/// [`left_env_step`]); `env[v]` lives at the cut right of the site.
pub(crate) fn right_env_step(
    env: &[DMatrix<C64>],
    t: &MpoTensor,
    phys: (&DMatrix<C64>, &DMatrix<C64>),
) -> Vec<DMatrix<C64>> {
    let dl = phys.0.nrows();
    let mut next = vec![DMatrix::<C64>::zeros(dl, dl); t.dl];
    for &(u, v, ref op) in &t.entries {
        let e = &env[v];
        for sp in 0..2 {
            for s in 0..2 {
                let c = op[sp][s];
                if c.norm() == 0.0 {
                    continue;
                }
                let bra = if sp == 0 { phys.0 } else { phys.1 };
                let ket = if s == 0 { phys.0 } else { phys.1 };
                next[u] += bra.conjugate() * e * ket.transpose() * c;
            }
        }
    }
    next
}

/// Effective Hamiltonian on a two-site block.
///
/// Acts on vectors packed as `x[a + dl * (s1 + 2 * s2) + 4 * dl * b]`
/// for left bond `a`, physical indices `s1`, `s2` and right bond `b`;
/// the environments close the MPO around sites `k`, `k+1`.
pub(crate) struct TwoSiteOp<'a> {
    pub lenv: &'a [DMatrix<C64>],
    pub renv: &'a [DMatrix<C64>],
    pub wk: &'a MpoTensor,
    pub wk1: &'a MpoTensor,
    pub dl: usize,
    pub dr: usize,
}

impl TwoSiteOp<'_> {
    pub(crate) fn dim(&self) -> usize {
        4 * self.dl * self.dr
    }

    pub(crate) fn apply(&self, x: &[C64], y: &mut [C64]) {
        let (dl, dr) = (self.dl, self.dr);
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let block = |s1: usize, s2: usize| {
            DMatrix::from_fn(dl, dr, |a, b| x[a + dl * (s1 + 2 * s2) + 4 * dl * b])
        };
        let blocks = [[block(0, 0), block(0, 1)], [block(1, 0), block(1, 1)]];

        // Stage 1: absorb the left environment and the first site's
        // operator, accumulated per middle MPO state. Left products are
        // cached because several entries share them.
        let dmid = self.wk.dr;
        let mut lb: Vec<[[Option<DMatrix<C64>>; 2]; 2]> = vec![Default::default(); self.wk.dl];
        let zero = DMatrix::<C64>::zeros(dl, dr);
        let mut mid: Vec<[[DMatrix<C64>; 2]; 2]> = (0..dmid)
            .map(|_| {
                [
                    [zero.clone(), zero.clone()],
                    [zero.clone(), zero.clone()],
                ]
            })
            .collect();
        for &(u, m, ref op) in &self.wk.entries {
            for s1p in 0..2 {
                for s1 in 0..2 {
                    let c = op[s1p][s1];
                    if c.norm() == 0.0 {
                        continue;
                    }
                    for s2 in 0..2 {
                        if lb[u][s1][s2].is_none() {
                            lb[u][s1][s2] = Some(&self.lenv[u] * &blocks[s1][s2]);
                        }
                        mid[m][s1p][s2] += lb[u][s1][s2].as_ref().expect("just filled") * c;
                    }
                }
            }
        }

        // Stage 2: absorb the second site's operator and the right
        // environment (transposed: its rows index the output bond).
        let mut rt: Vec<Option<DMatrix<C64>>> = vec![None; self.wk1.dr];
        let mut out =
            [[zero.clone(), zero.clone()], [zero.clone(), zero.clone()]];
        for &(m, v, ref op) in &self.wk1.entries {
            for s2p in 0..2 {
                for s2 in 0..2 {
                    let c = op[s2p][s2];
                    if c.norm() == 0.0 {
                        continue;
                    }
                    if rt[v].is_none() {
                        rt[v] = Some(self.renv[v].transpose());
                    }
                    let r = rt[v].as_ref().expect("just filled");
                    for s1p in 0..2 {
                        out[s1p][s2p] += &mid[m][s1p][s2] * r * c;
                    }
                }
            }
        }

        for s1 in 0..2 {
            for s2 in 0..2 {
                for b in 0..dr {
                    for a in 0..dl {
                        y[a + dl * (s1 + 2 * s2) + 4 * dl * b] = out[s1][s2][(a, b)];
                    }
                }
            }
        }
    }
}

/// Effective Hamiltonian on a single site, packed as
/// `x[a + dl * s + 2 * dl * b]`.
pub(crate) struct OneSiteOp<'a> {
    pub lenv: &'a [DMatrix<C64>],
    pub renv: &'a [DMatrix<C64>],
    pub w: &'a MpoTensor,
    pub dl: usize,
    pub dr: usize,
}

impl OneSiteOp<'_> {
    pub(crate) fn dim(&self) -> usize {
        2 * self.dl * self.dr
    }

    pub(crate) fn apply(&self, x: &[C64], y: &mut [C64]) {
        let (dl, dr) = (self.dl, self.dr);
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let block =
            |s: usize| DMatrix::from_fn(dl, dr, |a, b| x[a + dl * s + 2 * dl * b]);
        let blocks = [block(0), block(1)];
        let zero = DMatrix::<C64>::zeros(dl, dr);
        let mut out = [zero.clone(), zero];
        for &(u, v, ref op) in &self.w.entries {
            for sp in 0..2 {
                for s in 0..2 {
                    let c = op[sp][s];
                    if c.norm() == 0.0 {
                        continue;
                    }
                    out[sp] += &self.lenv[u] * &blocks[s] * self.renv[v].transpose() * c;
                }
            }
        }
        for s in 0..2 {
            for b in 0..dr {
                for a in 0..dl {
                    y[a + dl * s + 2 * dl * b] = out[s][(a, b)];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{self, DenseState, SparseHamiltonian};
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng as _;

    fn geom(rows: usize, cols: usize) -> LatticeGeometry {
        LatticeGeometry::new(rows, cols).unwrap()
    }

    fn random_dense(g: LatticeGeometry, stream: u64) -> DenseState {
        let mut rng = substream(7, stream);
        let dim = 1usize << g.n_sites();
        let amps: Vec<C64> =
            (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        DenseState::new(g, amps).unwrap()
    }

    #[test]
    fn chain_hamiltonian_has_bond_dimension_three() {
        let p = ModelParams::new(1.0, 0.7, 0.3).unwrap();
        let mpo = Mpo::hamiltonian(geom(1, 5), &p).unwrap();
        assert_eq!(mpo.bond_dims(), vec![3, 3, 3, 3]);
    }

    #[test]
    fn snake_hamiltonian_bond_dimension_is_set_by_columns_not_rows() {
        let p = ModelParams::new(1.0, 0.7, 0.3).unwrap();
        let narrow_tall = Mpo::hamiltonian(geom(6, 2), &p).unwrap();
        let short_wide = Mpo::hamiltonian(geom(2, 3), &p).unwrap();
        // At most: ready + done + one horizontal + one vertical per column.
        assert!(narrow_tall.max_bond_dim() <= 2 + 1 + 2);
        assert!(short_wide.max_bond_dim() <= 2 + 1 + 3);
    }

    #[test]
    fn hamiltonian_mpo_matches_dense_hamiltonian() {
        for (rows, cols) in [(1, 4), (2, 3), (3, 2)] {
            let g = geom(rows, cols);
            let p = ModelParams::new(1.0, 0.55, 0.21).unwrap();
            let mpo = Mpo::hamiltonian(g, &p).unwrap();
            let dense_mpo = mpo.to_dense_matrix().unwrap();
            let h = SparseHamiltonian::new(g, &p).unwrap();
            let dense_h = h.to_dense_matrix().unwrap();
            let mut max_diff = 0.0f64;
            for r in 0..dense_h.nrows() {
                for c in 0..dense_h.ncols() {
                    let want = C64::new(dense_h[(r, c)], 0.0);
                    max_diff = max_diff.max((dense_mpo[(r, c)] - want).norm());
                }
            }
            assert!(max_diff < 1e-12, "{rows}x{cols}: max deviation {max_diff}");
        }
    }

    #[test]
    fn ztot_squared_matches_direct_construction() {
        let n = 4;
        let mpo = ztot_squared_mpo(n);
        assert_eq!(mpo.max_bond_dim(), 3);
        let dense = mpo.to_dense_matrix().unwrap();
        // Oracle: diagonal matrix with (sum_i z_i)^2, z from bit parity.
        for idx in 0..(1usize << n) {
            let ztot = (2 * (idx as u32).count_ones() as i64 - n as i64) as f64;
            for jdx in 0..(1usize << n) {
                let want = if idx == jdx { ztot * ztot } else { 0.0 };
                assert_relative_eq!(dense[(jdx, idx)].re, want, epsilon = 1e-12);
                assert_relative_eq!(dense[(jdx, idx)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn expectation_matches_dense_oracle() {
        let g = geom(2, 2);
        let p = ModelParams::new(1.0, 0.9, 0.15).unwrap();
        let dense = random_dense(g, 1);
        let (mps, _) = MpsState::from_dense(&dense, 16, 0.0).unwrap();
        let mpo = Mpo::hamiltonian(g, &p).unwrap();
        let h = SparseHamiltonian::new(g, &p).unwrap();
        let want = dense.energy(&h).unwrap();
        assert_relative_eq!(mpo.expectation(&mps).unwrap(), want, epsilon = 1e-10);
    }

    #[test]
    fn expectation_squared_and_variance_match_dense_oracle() {
        let g = geom(2, 2);
        let p = ModelParams::new(1.0, 0.9, 0.15).unwrap();
        let dense = random_dense(g, 2);
        let (mps, _) = MpsState::from_dense(&dense, 16, 0.0).unwrap();
        let mpo = Mpo::hamiltonian(g, &p).unwrap();
        let h = SparseHamiltonian::new(g, &p).unwrap();
        // Dense oracle: <H^2> = |H psi|^2 on the normalised state.
        let mut hpsi = vec![C64::new(0.0, 0.0); 16];
        h.apply(dense.amplitudes(), &mut hpsi);
        let want_h2: f64 = hpsi.iter().map(|a| a.norm_sqr()).sum();
        let want_h = dense.energy(&h).unwrap();
        assert_relative_eq!(mpo.expectation_squared(&mps).unwrap(), want_h2, epsilon = 1e-9);
        assert_relative_eq!(
            mpo.variance(&mps).unwrap(),
            want_h2 - want_h * want_h,
            epsilon = 1e-9
        );
    }

    #[test]
    fn eigenstate_variance_vanishes() {
        let g = geom(1, 4);
        let p = ModelParams::new(1.0, 0.8, 0.2).unwrap();
        let h = SparseHamiltonian::new(g, &p).unwrap();
        let (energy, psi) = exact::ground_state(&h, 0).unwrap();
        let (mps, _) = MpsState::from_dense(&psi, 16, 0.0).unwrap();
        let mpo = Mpo::hamiltonian(g, &p).unwrap();
        assert_relative_eq!(mpo.expectation(&mps).unwrap(), energy, epsilon = 1e-9);
        assert!(mpo.variance(&mps).unwrap().abs() < 1e-9);
    }

    #[test]
    fn product_state_energy_matches_classical_diagonal() {
        let g = geom(2, 3);
        let p = ModelParams::new(1.0, 0.4, 0.1).unwrap();
        let mpo = Mpo::hamiltonian(g, &p).unwrap();
        let terms = hamiltonian_terms(&g, &p);
        let down = MpsState::all_down(g).unwrap();
        let want = crate::model::diagonal_energy(&terms, &vec![false; 6]);
        assert_relative_eq!(mpo.expectation(&down).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn env_steps_reproduce_full_expectation() {
        // Pushing left environments all the way right must agree with
        // pushing right environments all the way left.
        let g = geom(1, 4);
        let p = ModelParams::new(1.0, 0.6, 0.25).unwrap();
        let dense = random_dense(g, 3);
        let (mps, _) = MpsState::from_dense(&dense, 16, 0.0).unwrap();
        let mpo = Mpo::hamiltonian(g, &p).unwrap();
        let mut right = vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))];
        for k in (0..4).rev() {
            let (a0, a1) = mps.tensor_pair(k);
            right = right_env_step(&right, mpo.tensor(k), (&a0, &a1));
        }
        let from_right = right[0][(0, 0)].re;
        assert_relative_eq!(from_right, mpo.expectation(&mps).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn effective_operators_close_to_the_full_expectation() {
        // Sandwiching the current block between its own environments
        // must reproduce <psi|H|psi> exactly, for every block position.
        let g = geom(2, 2);
        let p = ModelParams::new(1.0, 0.7, 0.3).unwrap();
        let dense = random_dense(g, 4);
        let (mps, _) = MpsState::from_dense(&dense, 16, 0.0).unwrap();
        let mpo = Mpo::hamiltonian(g, &p).unwrap();
        let n = 4;
        let want = mpo.expectation(&mps).unwrap();
        let norm2 = mps.overlap(&mps).unwrap().re;

        // Left environments at every cut.
        let mut lenvs = vec![vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))]];
        for k in 0..n {
            let (a0, a1) = mps.tensor_pair(k);
            lenvs.push(left_env_step(&lenvs[k], mpo.tensor(k), (&a0, &a1)));
        }
        let mut renvs = vec![Vec::new(); n + 1];
        renvs[n] = vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))];
        for k in (0..n).rev() {
            let (a0, a1) = mps.tensor_pair(k);
            renvs[k] = right_env_step(&renvs[k + 1], mpo.tensor(k), (&a0, &a1));
        }

        for k in 0..n - 1 {
            let tk = mps.tensor_pair(k);
            let tk1 = mps.tensor_pair(k + 1);
            let dl = tk.0.nrows();
            let dr = tk1.0.ncols();
            let op = TwoSiteOp {
                lenv: &lenvs[k],
                renv: &renvs[k + 2],
                wk: mpo.tensor(k),
                wk1: mpo.tensor(k + 1),
                dl,
                dr,
            };
            // Pack the current two-site block.
            let mut theta = vec![C64::new(0.0, 0.0); op.dim()];
            for s1 in 0..2 {
                for s2 in 0..2 {
                    let left = if s1 == 0 { &tk.0 } else { &tk.1 };
                    let right = if s2 == 0 { &tk1.0 } else { &tk1.1 };
                    let prod = left * right;
                    for a in 0..dl {
                        for b in 0..dr {
                            theta[a + dl * (s1 + 2 * s2) + 4 * dl * b] = prod[(a, b)];
                        }
                    }
                }
            }
            let mut ht = vec![C64::new(0.0, 0.0); op.dim()];
            op.apply(&theta, &mut ht);
            let got: C64 = theta.iter().zip(&ht).map(|(t, h)| t.conj() * h).sum();
            assert_relative_eq!(got.re / norm2, want / norm2, epsilon = 1e-10, max_relative = 1e-10);
        }

        for k in 0..n {
            let (a0, a1) = mps.tensor_pair(k);
            let dl = a0.nrows();
            let dr = a0.ncols();
            let op = OneSiteOp { lenv: &lenvs[k], renv: &renvs[k + 1], w: mpo.tensor(k), dl, dr };
            let mut v = vec![C64::new(0.0, 0.0); op.dim()];
            for s in 0..2 {
                let m = if s == 0 { &a0 } else { &a1 };
                for a in 0..dl {
                    for b in 0..dr {
                        v[a + dl * s + 2 * dl * b] = m[(a, b)];
                    }
                }
            }
            let mut hv = vec![C64::new(0.0, 0.0); op.dim()];
            op.apply(&v, &mut hv);
            let got: C64 = v.iter().zip(&hv).map(|(t, h)| t.conj() * h).sum();
            assert_relative_eq!(got.re / norm2, want / norm2, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn invalid_terms_are_rejected() {
        assert!(Mpo::from_terms(3, &[HamTerm::ZZ { a: 2, b: 2, weight: 1.0 }]).is_err());
        assert!(Mpo::from_terms(3, &[HamTerm::ZZ { a: 1, b: 3, weight: 1.0 }]).is_err());
        assert!(Mpo::from_terms(3, &[HamTerm::X { site: 3, weight: 1.0 }]).is_err());
        assert!(Mpo::from_terms(0, &[]).is_err());
        let g = geom(1, 3);
        let p = ModelParams::new(1.0, 0.5, 0.0).unwrap();
        let mpo = Mpo::hamiltonian(g, &p).unwrap();
        let wrong = MpsState::all_down(geom(1, 4)).unwrap();
        assert!(mpo.expectation(&wrong).is_err());
    }
}
