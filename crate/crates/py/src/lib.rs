//! Python bindings for the quench-dynamics toolkit.
//!
//! The module mirrors the Rust API one concept per class: lattice
//! geometry, model couplings, droplet energetics, matrix-product states,
//! variational ground-state search, step-wise time evolution, snapshot
//! statistics, and the dense small-system oracle used for cross-checks.
//!
//! Build `libfvsim.so` with cargo and rename it to `fvsim.so` on the
//! Python path (see `python/smoke_test.py`), or wire the crate into any
//! PEP-517 builder that understands cargo artifacts.

use num_complex::Complex;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fvsim_core::clusters::{cluster_sizes, FlipReference, Snapshot};
use fvsim_core::evolve::{EvolutionConfig, TdvpEngine, TrajectoryPoint};
use fvsim_core::groundstate::{self, DmrgConfig};
use fvsim_core::lattice::LatticeGeometry;
use fvsim_core::model::{self, BubbleParams, ModelParams};
use fvsim_core::mpo::Mpo;
use fvsim_core::mps::{MpsState, Spin};
use fvsim_core::{exact, observables};

/// Map crate errors onto Python exception types by caller reaction:
/// bad arguments become `ValueError`, solver give-ups and numerical
/// faults become `RuntimeError`, I/O stays `OSError`.
fn to_py(e: fvsim_core::Error) -> PyErr {
    use fvsim_core::Error as E;
    match &e {
        E::InvalidInput(_) | E::Config(_) => PyValueError::new_err(e.to_string()),
        E::Convergence { .. } | E::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        E::Io(_) => PyIOError::new_err(e.to_string()),
    }
}

/// A rows-by-columns open-boundary lattice with snake (boustrophedon)
/// ordering between the 2D grid and the 1D chain the tensor methods use.
#[pyclass(name = "Geometry", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyGeometry(LatticeGeometry);

#[pymethods]
impl PyGeometry {
    #[new]
    fn new(rows: usize, cols: usize) -> PyResult<Self> {
        Ok(PyGeometry(LatticeGeometry::new(rows, cols).map_err(to_py)?))
    }

    #[getter]
    fn rows(&self) -> usize {
        self.0.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.0.cols()
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.0.n_sites()
    }

    /// Chain index of grid site `(row, col)`.
    fn snake_index(&self, row: usize, col: usize) -> PyResult<usize> {
        self.0.snake_index(row, col).map_err(to_py)
    }

    /// Grid coordinates `(row, col)` of a chain index.
    fn site_coords(&self, site: usize) -> PyResult<(usize, usize)> {
        self.0.site_coords(site).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Geometry({}, {})", self.0.rows(), self.0.cols())
    }
}

/// Couplings of the Ising Hamiltonian
/// `H = -J sum_<ij> Z_i Z_j - g sum_i X_i - h sum_i Z_i`.
#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams(ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (j=1.0, g=1.0, h=0.0))]
    fn new(j: f64, g: f64, h: f64) -> PyResult<Self> {
        Ok(PyModelParams(ModelParams::new(j, g, h).map_err(to_py)?))
    }

    #[getter]
    fn j(&self) -> f64 {
        self.0.j
    }

    #[getter]
    fn g(&self) -> f64 {
        self.0.g
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(j={}, g={}, h={})", self.0.j, self.0.g, self.0.h)
    }
}

/// Surface tension and bulk gain of a true-vacuum droplet.
#[pyclass(name = "BubbleParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyBubbleParams(BubbleParams);

#[pymethods]
impl PyBubbleParams {
    #[new]
    fn new(surface_tension: f64, bulk_gain: f64) -> PyResult<Self> {
        Ok(PyBubbleParams(BubbleParams::new(surface_tension, bulk_gain).map_err(to_py)?))
    }

    #[getter]
    fn surface_tension(&self) -> f64 {
        self.0.surface_tension
    }

    #[getter]
    fn bulk_gain(&self) -> f64 {
        self.0.bulk_gain
    }

    /// Radius `sigma / delta_eps` where the 2D droplet energy peaks.
    fn critical_radius(&self) -> f64 {
        self.0.critical_radius()
    }

    /// Peak 2D droplet energy `pi sigma^2 / delta_eps`.
    fn barrier_height(&self) -> f64 {
        self.0.barrier_height()
    }

    fn __repr__(&self) -> String {
        format!(
            "BubbleParams(surface_tension={}, bulk_gain={})",
            self.0.surface_tension, self.0.bulk_gain
        )
    }
}

/// Energy of a circular 2D true-vacuum droplet of radius `r`.
#[pyfunction]
fn bubble_energy_2d(params: &PyBubbleParams, r: f64) -> PyResult<f64> {
    model::bubble_energy_2d(&params.0, r).map_err(to_py)
}

/// Energy of a 1D true-vacuum segment of length `length`.
#[pyfunction]
fn bubble_energy_1d(params: &PyBubbleParams, length: f64) -> PyResult<f64> {
    model::bubble_energy_1d(&params.0, length).map_err(to_py)
}

/// A matrix-product state on a snake-ordered lattice.
#[pyclass(name = "MpsState", skip_from_py_object)]
#[derive(Clone)]
struct PyMpsState(MpsState);

#[pymethods]
impl PyMpsState {
    /// Product state with every spin down.
    #[staticmethod]
    fn all_down(geometry: &PyGeometry) -> PyResult<Self> {
        Ok(PyMpsState(MpsState::all_down(geometry.0).map_err(to_py)?))
    }

    /// Product state with every spin up.
    #[staticmethod]
    fn all_up(geometry: &PyGeometry) -> PyResult<Self> {
        Ok(PyMpsState(MpsState::all_up(geometry.0).map_err(to_py)?))
    }

    /// Product state from a chain-ordered list of booleans (True = up).
    #[staticmethod]
    fn product(geometry: &PyGeometry, ups: Vec<bool>) -> PyResult<Self> {
        let spins: Vec<Spin> =
            ups.iter().map(|&up| if up { Spin::Up } else { Spin::Down }).collect();
        Ok(PyMpsState(MpsState::product_state(geometry.0, &spins).map_err(to_py)?))
    }

    #[getter]
    fn geometry(&self) -> PyGeometry {
        PyGeometry(self.0.geometry())
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.0.n_sites()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Bond dimension at each cut, left to right.
    fn bond_dims(&self) -> Vec<usize> {
        self.0.bond_dims()
    }

    /// `<Z_i>` for every chain site.
    fn z_profile(&self) -> PyResult<Vec<f64>> {
        self.0.expect_z_profile().map_err(to_py)
    }

    /// Site-averaged magnetisation.
    fn magnetization(&self) -> PyResult<f64> {
        observables::magnetization(&self.0).map_err(to_py)
    }

    /// Collective-spin variance `<Z_tot^2> - <Z_tot>^2`.
    fn ztot_variance(&self) -> PyResult<f64> {
        observables::ztot_variance(&self.0).map_err(to_py)
    }

    /// Von Neumann entanglement entropy across the central cut.
    fn central_entropy(&self) -> PyResult<f64> {
        self.0.central_entropy().map_err(to_py)
    }

    /// Inner product `<self|other>` as a Python complex.
    fn overlap(&self, other: &PyMpsState) -> PyResult<Complex<f64>> {
        self.0.overlap(&other.0).map_err(to_py)
    }

    /// `<H>` for the given couplings.
    fn energy(&self, params: &PyModelParams) -> PyResult<f64> {
        let mpo = Mpo::hamiltonian(self.0.geometry(), &params.0).map_err(to_py)?;
        mpo.expectation(&self.0).map_err(to_py)
    }

    /// `<H^2> - <H>^2` for the given couplings.
    fn energy_variance(&self, params: &PyModelParams) -> PyResult<f64> {
        let mpo = Mpo::hamiltonian(self.0.geometry(), &params.0).map_err(to_py)?;
        mpo.variance(&self.0).map_err(to_py)
    }

    /// Draw projective S^z snapshots without collapsing the state.
    ///
    /// Returns one chain-ordered boolean list per shot (True = up). The
    /// pair `(seed, stream)` fully determines the outcomes.
    #[pyo3(signature = (shots, seed=0, stream=0))]
    fn sample(&self, shots: usize, seed: u64, stream: usize) -> PyResult<Vec<Vec<bool>>> {
        let snaps = self.0.sample_snapshots(shots, seed, stream).map_err(to_py)?;
        Ok(snaps.into_iter().map(|s| s.chain_bits().to_vec()).collect())
    }

    /// Full state vector as amplitudes in chain-bit basis order
    /// (bit k of the index = chain site k up). Small systems only.
    fn amplitudes(&self) -> PyResult<Vec<Complex<f64>>> {
        Ok(self.0.to_dense().map_err(to_py)?.amplitudes().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "MpsState(geometry={}, max_bond={})",
            self.0.geometry().label(),
            self.0.bond_dims().into_iter().max().unwrap_or(1)
        )
    }
}

/// Result of a variational ground- or excited-state search.
#[pyclass(name = "DmrgResult", frozen)]
struct PyDmrgResult {
    #[pyo3(get)]
    energy: f64,
    #[pyo3(get)]
    variance: f64,
    #[pyo3(get)]
    energy_trace: Vec<f64>,
    #[pyo3(get)]
    sweeps: usize,
    state: MpsState,
}

#[pymethods]
impl PyDmrgResult {
    #[getter]
    fn state(&self) -> PyMpsState {
        PyMpsState(self.state.clone())
    }

    fn __repr__(&self) -> String {
        format!(
            "DmrgResult(energy={:.12}, variance={:.3e}, sweeps={})",
            self.energy, self.variance, self.sweeps
        )
    }
}

fn dmrg_config(chi: usize, svd_min: f64, energy_tol: f64, max_sweeps: usize) -> DmrgConfig {
    DmrgConfig { chi_max: chi, svd_min, energy_tol, max_sweeps }
}

/// Variational ground-state search (two-site sweeps with truncation).
#[pyfunction]
#[pyo3(signature = (geometry, params, chi=64, svd_min=1e-10, energy_tol=1e-10, max_sweeps=40))]
fn dmrg_ground_state(
    geometry: &PyGeometry,
    params: &PyModelParams,
    chi: usize,
    svd_min: f64,
    energy_tol: f64,
    max_sweeps: usize,
) -> PyResult<PyDmrgResult> {
    let res = groundstate::ground_state(
        geometry.0,
        &params.0,
        &dmrg_config(chi, svd_min, energy_tol, max_sweeps),
    )
    .map_err(to_py)?;
    Ok(PyDmrgResult {
        energy: res.energy,
        variance: res.variance,
        energy_trace: res.energy_trace,
        sweeps: res.sweeps,
        state: res.state,
    })
}

/// Lowest `n_states` energy eigenstates, ground state first, found by
/// repeated searches with overlap penalties against earlier levels.
#[pyfunction]
#[pyo3(signature = (geometry, params, n_states, chi=64, svd_min=1e-10, energy_tol=1e-10, max_sweeps=40, seed=1))]
#[allow(clippy::too_many_arguments)]
fn dmrg_excited_states(
    geometry: &PyGeometry,
    params: &PyModelParams,
    n_states: usize,
    chi: usize,
    svd_min: f64,
    energy_tol: f64,
    max_sweeps: usize,
    seed: u64,
) -> PyResult<Vec<PyDmrgResult>> {
    let levels = groundstate::excited_states(
        geometry.0,
        &params.0,
        &dmrg_config(chi, svd_min, energy_tol, max_sweeps),
        n_states,
        seed,
    )
    .map_err(to_py)?;
    Ok(levels
        .into_iter()
        .map(|res| PyDmrgResult {
            energy: res.energy,
            variance: res.variance,
            energy_trace: res.energy_trace,
            sweeps: res.sweeps,
            state: res.state,
        })
        .collect())
}

/// Observables recorded at one instant of a trajectory.
#[pyclass(name = "Observation", frozen)]
struct PyObservation {
    #[pyo3(get)]
    time: f64,
    #[pyo3(get)]
    magnetization: f64,
    #[pyo3(get)]
    ztot_variance: f64,
    #[pyo3(get)]
    return_probability: f64,
    #[pyo3(get)]
    energy: f64,
    #[pyo3(get)]
    max_bond: usize,
    #[pyo3(get)]
    discarded_weight: f64,
}

impl From<TrajectoryPoint> for PyObservation {
    fn from(p: TrajectoryPoint) -> Self {
        PyObservation {
            time: p.time,
            magnetization: p.magnetization,
            ztot_variance: p.ztot_variance,
            return_probability: p.return_probability,
            energy: p.energy,
            max_bond: p.max_bond,
            discarded_weight: p.discarded_weight,
        }
    }
}

#[pymethods]
impl PyObservation {
    fn __repr__(&self) -> String {
        format!(
            "Observation(time={:.4}, magnetization={:.6}, return_probability={:.6}, energy={:.6})",
            self.time, self.magnetization, self.return_probability, self.energy
        )
    }
}

/// Step-wise real-time evolution of an initial state after a quench.
///
/// The initial state is normalised and kept as the reference for
/// return-probability measurements.
#[pyclass(name = "Evolution", unsendable)]
struct PyEvolution {
    engine: TdvpEngine,
    dt: f64,
}

#[pymethods]
impl PyEvolution {
    #[new]
    #[pyo3(signature = (params, initial, dt=0.05, chi=64, svd_min=1e-10, krylov_tol=1e-12))]
    fn new(
        params: &PyModelParams,
        initial: &PyMpsState,
        dt: f64,
        chi: usize,
        svd_min: f64,
        krylov_tol: f64,
    ) -> PyResult<Self> {
        let cfg = EvolutionConfig { chi_max: chi, svd_min, dt, krylov_tol };
        let engine = TdvpEngine::new(&params.0, &initial.0, &cfg).map_err(to_py)?;
        Ok(PyEvolution { engine, dt })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.engine.time()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance by one time step.
    fn step(&mut self) -> PyResult<()> {
        self.engine.step().map_err(to_py)
    }

    /// Advance by `n` time steps.
    fn run(&mut self, n: usize) -> PyResult<()> {
        for _ in 0..n {
            self.engine.step().map_err(to_py)?;
        }
        Ok(())
    }

    /// Squared overlap with the initial state.
    fn return_probability(&self) -> PyResult<f64> {
        self.engine.return_probability().map_err(to_py)
    }

    /// All tracked observables at the current time.
    fn observe(&self) -> PyResult<PyObservation> {
        Ok(self.engine.observe().map_err(to_py)?.into())
    }

    /// Copy of the current state.
    #[getter]
    fn state(&self) -> PyMpsState {
        PyMpsState(self.engine.state().clone())
    }
}

/// Sizes of nearest-neighbour clusters of flipped spins in a snapshot.
///
/// `bits` is chain-ordered (True = up); `reference` names the unflipped
/// background, `"down"` or `"up"`.
#[pyfunction]
#[pyo3(signature = (geometry, bits, reference="down"))]
fn snapshot_cluster_sizes(
    geometry: &PyGeometry,
    bits: Vec<bool>,
    reference: &str,
) -> PyResult<Vec<usize>> {
    let snap = Snapshot::from_chain_bits(geometry.0, bits).map_err(to_py)?;
    let flip = FlipReference::parse(reference).map_err(to_py)?;
    Ok(cluster_sizes(&snap, flip))
}

/// First time `values` (sampled at `times`) drops to `threshold`, with
/// log-linear interpolation between samples; `None` if it never does.
#[pyfunction]
fn first_passage_time(times: Vec<f64>, values: Vec<f64>, threshold: f64) -> PyResult<Option<f64>> {
    Ok(fvsim_core::observables::first_passage_time(&times, &values, threshold)
        .map_err(to_py)?
        .time)
}

/// Lowest `k` exact eigenvalues on a small lattice (dense oracle).
#[pyfunction]
#[pyo3(signature = (geometry, params, k=1, seed=1))]
fn exact_spectrum(
    geometry: &PyGeometry,
    params: &PyModelParams,
    k: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let h = exact::SparseHamiltonian::new(geometry.0, &params.0).map_err(to_py)?;
    let pairs = exact::lowest_eigenpairs(&h, k, seed).map_err(to_py)?;
    Ok(pairs.into_iter().map(|(e, _)| e).collect())
}

/// Exact return-probability curve `|<state|e^{-iHt}|state>|^2` on a small
/// lattice (dense oracle); `times` must be strictly increasing.
#[pyfunction]
fn exact_return_curve(
    params: &PyModelParams,
    state: &PyMpsState,
    times: Vec<f64>,
) -> PyResult<Vec<f64>> {
    let d0 = state.0.to_dense().map_err(to_py)?;
    let h = exact::SparseHamiltonian::new(state.0.geometry(), &params.0).map_err(to_py)?;
    let traj = exact::evolve(&h, &d0, &times).map_err(to_py)?;
    traj.iter().map(|d| Ok(d0.overlap(d).map_err(to_py)?.norm_sqr())).collect()
}

#[pymodule]
fn fvsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyBubbleParams>()?;
    m.add_class::<PyMpsState>()?;
    m.add_class::<PyDmrgResult>()?;
    m.add_class::<PyObservation>()?;
    m.add_class::<PyEvolution>()?;
    m.add_function(wrap_pyfunction!(bubble_energy_2d, m)?)?;
    m.add_function(wrap_pyfunction!(bubble_energy_1d, m)?)?;
    m.add_function(wrap_pyfunction!(dmrg_ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(dmrg_excited_states, m)?)?;
    m.add_function(wrap_pyfunction!(snapshot_cluster_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(first_passage_time, m)?)?;
    m.add_function(wrap_pyfunction!(exact_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(exact_return_curve, m)?)?;
    Ok(())
}
