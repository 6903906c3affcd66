//! Real-time evolution by two-site projector-splitting integration.
//!
//! One time step of size `dt` is a palindrome of two half-sweeps: left
//! to right, each two-site window is evolved forward by `dt/2` under
//! its effective Hamiltonian (Krylov exponential, no dense matrices),
//! split by a truncated SVD, and the freshly split single site is
//! evolved *backward* by `dt/2` to cancel the double counting; the
//! right-to-left half-sweep repeats the same moves in mirror order.
//! The palindrome makes the integrator second order in `dt`, and the
//! only non-unitarity is the SVD truncation, whose discarded weight is
//! accumulated as the trajectory's error budget.
//!
//! Environments are recycled across the palindrome: the left-to-right
//! half consumes the right environments refreshed by the previous
//! right-to-left half and rebuilds the left ones, and vice versa.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ModelParams;
use crate::mpo::{self, Mpo, OneSiteOp, TwoSiteOp};
use crate::mps::{MpsState, SiteTensor};
use crate::C64;

/// Knobs for real-time evolution.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionConfig {
    /// Bond-dimension cap during evolution.
    pub chi_max: usize,
    /// Singular values below this are discarded at each split.
    pub svd_min: f64,
    /// Time-step size.
    pub dt: f64,
    /// Relative accuracy of each local Krylov exponential.
    pub krylov_tol: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { chi_max: 64, svd_min: 1e-10, dt: 0.05, krylov_tol: 1e-12 }
    }
}

impl EvolutionConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.chi_max == 0 {
            return Err(Error::Config("chi_max must be at least 1".into()));
        }
        if !(self.svd_min >= 0.0) {
            return Err(Error::Config(format!("svd_min must be non-negative, got {}", self.svd_min)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive and finite, got {}", self.dt)));
        }
        if !(self.krylov_tol > 0.0) {
            return Err(Error::Config("krylov_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Observables recorded along a trajectory at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    /// Evolution time.
    pub time: f64,
    /// Mean site magnetisation `<sum_i Z_i> / N`.
    pub magnetization: f64,
    /// Collective-spin variance `<Z_tot^2> - <Z_tot>^2`.
    pub ztot_variance: f64,
    /// Return probability `|<initial|state(t)>|^2`.
    pub return_probability: f64,
    /// Energy `<H>`.
    pub energy: f64,
    /// Largest bond dimension of the evolved state.
    pub max_bond: usize,
    /// Cumulative truncation weight discarded since `t = 0`.
    pub discarded_weight: f64,
}

/// Step-wise time evolver holding the state and its environments.
pub struct TdvpEngine {
    mpo: Mpo,
    cfg: EvolutionConfig,
    state: MpsState,
    reference: MpsState,
    lenvs: Vec<Vec<DMatrix<C64>>>,
    renvs: Vec<Vec<DMatrix<C64>>>,
    steps: u64,
    discarded: f64,
}

impl TdvpEngine {
    /// Set up evolution of `initial` under the model Hamiltonian.
    ///
    /// The initial state is normalised and kept as the reference for
    /// return-probability measurements.
    pub fn new(params: &ModelParams, initial: &MpsState, cfg: &EvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        let geom = initial.geometry();
        let mpo = Mpo::hamiltonian(geom, params)?;
        let mut state = initial.clone().with_truncation(cfg.chi_max, cfg.svd_min)?;
        state.canonicalize(0)?;
        state.normalize()?;
        let reference = state.clone();
        let n = state.n_sites();
        let ones = || vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))];
        let mut lenvs: Vec<Vec<DMatrix<C64>>> = vec![Vec::new(); n + 1];
        let mut renvs: Vec<Vec<DMatrix<C64>>> = vec![Vec::new(); n + 1];
        lenvs[0] = ones();
        renvs[n] = ones();
        for k in (1..n).rev() {
            let (a0, a1) = state.tensor_pair(k);
            renvs[k] = mpo::right_env_step(&renvs[k + 1], mpo.tensor(k), (&a0, &a1));
        }
        Ok(TdvpEngine { mpo, cfg: *cfg, state, reference, lenvs, renvs, steps: 0, discarded: 0.0 })
    }

    /// The evolved state (unit norm).
    pub fn state(&self) -> &MpsState {
        &self.state
    }

    /// Current time, exactly `steps * dt`.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dt
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Cumulative discarded truncation weight.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded
    }

    /// Advance by one time step `dt`.
    pub fn step(&mut self) -> Result<()> {
        let n = self.state.n_sites();
        let tau = 0.5 * self.cfg.dt;
        if n == 1 {
            // Whole chain inside one site: a single exact exponential.
            self.evolve_site(0, C64::new(0.0, -self.cfg.dt))?;
            self.steps += 1;
            return Ok(());
        }
        // Left-to-right half-sweep at dt/2.
        for k in 0..n - 1 {
            self.evolve_window(k, C64::new(0.0, -tau), true)?;
            let (a0, a1) = self.state.tensor_pair(k);
            self.lenvs[k + 1] = mpo::left_env_step(&self.lenvs[k], self.mpo.tensor(k), (&a0, &a1));
            if k < n - 2 {
                self.evolve_site(k + 1, C64::new(0.0, tau))?;
            }
        }
        // Right-to-left half-sweep at dt/2.
        for k in (0..n - 1).rev() {
            self.evolve_window(k, C64::new(0.0, -tau), false)?;
            let (a0, a1) = self.state.tensor_pair(k + 1);
            self.renvs[k + 1] =
                mpo::right_env_step(&self.renvs[k + 2], self.mpo.tensor(k + 1), (&a0, &a1));
            if k > 0 {
                self.evolve_site(k, C64::new(0.0, tau))?;
            }
        }
        self.steps += 1;
        let norm = self.state.norm();
        if !norm.is_finite() || norm < 1e-8 {
            return Err(Error::Numerical(format!("state norm degenerated to {norm} during a step")));
        }
        Ok(())
    }

    /// Record the standard observables at the current time.
    /// Return probability alone — much cheaper than [`observe`](Self::observe),
    /// for callers polling a threshold every step.
    pub fn return_probability(&self) -> Result<f64> {
        let norm2 = self.state.overlap(&self.state)?.re;
        let p_ret = self.reference.overlap(&self.state)?.norm_sqr() / norm2;
        if !p_ret.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite return probability at t = {}",
                self.time()
            )));
        }
        Ok(p_ret)
    }

    pub fn observe(&self) -> Result<TrajectoryPoint> {
        let n = self.state.n_sites() as f64;
        let (m1, m2) = self.state.expect_ztot_moments()?;
        let norm2 = self.state.overlap(&self.state)?.re;
        let energy = self.mpo.expectation(&self.state)? / norm2;
        let p_ret = self.reference.overlap(&self.state)?.norm_sqr() / norm2;
        let point = TrajectoryPoint {
            time: self.time(),
            magnetization: m1 / n,
            ztot_variance: m2 - m1 * m1,
            return_probability: p_ret,
            energy,
            max_bond: self.state.max_bond_dim(),
            discarded_weight: self.discarded,
        };
        if !point.magnetization.is_finite()
            || !point.ztot_variance.is_finite()
            || !point.return_probability.is_finite()
            || !point.energy.is_finite()
        {
            return Err(Error::Numerical(format!(
                "non-finite observable at t = {}: {point:?}",
                self.time()
            )));
        }
        Ok(point)
    }

    /// Forward-evolve the window `(k, k+1)` and split it, moving the
    /// center right or left.
    fn evolve_window(&mut self, k: usize, scale: C64, to_right: bool) -> Result<()> {
        let dl = self.state.tensor(k).dl();
        let dr = self.state.tensor(k + 1).dr();
        let op = TwoSiteOp {
            lenv: &self.lenvs[k],
            renv: &self.renvs[k + 2],
            wk: self.mpo.tensor(k),
            wk1: self.mpo.tensor(k + 1),
            dl,
            dr,
        };
        let dim = op.dim();
        let mut theta = vec![C64::new(0.0, 0.0); dim];
        for s1 in 0..2 {
            for s2 in 0..2 {
                let prod = self.state.tensor(k).phys(s1) * self.state.tensor(k + 1).phys(s2);
                for a in 0..dl {
                    for b in 0..dr {
                        theta[a + dl * (s1 + 2 * s2) + 4 * dl * b] = prod[(a, b)];
                    }
                }
            }
        }
        let mut apply = |x: &[C64], y: &mut [C64]| op.apply(x, y);
        let evolved = linalg::krylov_expm_apply(&mut apply, &theta, scale, self.cfg.krylov_tol)?;

        let mut mat = DMatrix::<C64>::zeros(dl * 2, 2 * dr);
        for s1 in 0..2 {
            for s2 in 0..2 {
                for a in 0..dl {
                    for b in 0..dr {
                        mat[(a + dl * s1, s2 + 2 * b)] = evolved[a + dl * (s1 + 2 * s2) + 4 * dl * b];
                    }
                }
            }
        }
        let svd = linalg::svd_trunc(&mat, self.cfg.chi_max, self.cfg.svd_min)?;
        self.discarded += svd.discarded;
        let keep = svd.s.len();
        let snorm = svd.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(snorm > 1e-300) {
            return Err(Error::Numerical("window collapsed to zero weight".into()));
        }
        if to_right {
            self.state.set_tensor(k, SiteTensor::from_lfused(dl, keep, svd.u.clone()));
            let mut carry = svd.vt;
            for (r, &sv) in svd.s.iter().enumerate() {
                for c in 0..carry.ncols() {
                    carry[(r, c)] *= C64::new(sv / snorm, 0.0);
                }
            }
            self.state.set_tensor(k + 1, SiteTensor::from_rfused(keep, dr, carry));
            self.state.set_center(Some(k + 1));
        } else {
            self.state.set_tensor(k + 1, SiteTensor::from_rfused(keep, dr, svd.vt.clone()));
            let mut carry = svd.u;
            for (c, &sv) in svd.s.iter().enumerate() {
                for r in 0..carry.nrows() {
                    carry[(r, c)] *= C64::new(sv / snorm, 0.0);
                }
            }
            self.state.set_tensor(k, SiteTensor::from_lfused(dl, keep, carry));
            self.state.set_center(Some(k));
        }
        Ok(())
    }

    /// Evolve the single site `k` in place (used for the backward
    /// half-steps of the palindrome).
    fn evolve_site(&mut self, k: usize, scale: C64) -> Result<()> {
        let t = self.state.tensor(k);
        let (dl, dr) = (t.dl(), t.dr());
        let op = OneSiteOp {
            lenv: &self.lenvs[k],
            renv: &self.renvs[k + 1],
            w: self.mpo.tensor(k),
            dl,
            dr,
        };
        let mut v = vec![C64::new(0.0, 0.0); op.dim()];
        for s in 0..2 {
            let m = t.phys(s);
            for a in 0..dl {
                for b in 0..dr {
                    v[a + dl * s + 2 * dl * b] = m[(a, b)];
                }
            }
        }
        let mut apply = |x: &[C64], y: &mut [C64]| op.apply(x, y);
        let evolved = linalg::krylov_expm_apply(&mut apply, &v, scale, self.cfg.krylov_tol)?;
        let mut m = DMatrix::<C64>::zeros(dl * 2, dr);
        for s in 0..2 {
            for a in 0..dl {
                for b in 0..dr {
                    m[(a + dl * s, b)] = evolved[a + dl * s + 2 * dl * b];
                }
            }
        }
        self.state.set_tensor(k, SiteTensor::from_lfused(dl, dr, m));
        Ok(())
    }
}

/// Evolve to `t_final`, recording observables every `obs_stride` steps
/// (plus the initial and final instants). Returns the recorded points
/// and the final state.
pub fn evolve_trajectory(
    params: &ModelParams,
    initial: &MpsState,
    cfg: &EvolutionConfig,
    t_final: f64,
    obs_stride: usize,
) -> Result<(Vec<TrajectoryPoint>, MpsState)> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::invalid(format!("t_final must be positive and finite, got {t_final}")));
    }
    if obs_stride == 0 {
        return Err(Error::invalid("obs_stride must be at least 1"));
    }
    let n_steps = (t_final / cfg.dt).round().max(1.0) as u64;
    let mut engine = TdvpEngine::new(params, initial, cfg)?;
    let mut points = vec![engine.observe()?];
    for step in 1..=n_steps {
        engine.step()?;
        if step % obs_stride as u64 == 0 || step == n_steps {
            points.push(engine.observe()?);
        }
    }
    let state = engine.state().clone();
    Ok((points, state))
}
