//! Scalar diagnostics: collective-spin moments of a state and
//! first-passage extraction from decay curves.

use crate::error::{Error, Result};
use crate::exact::DenseState;
use crate::mps::MpsState;

/// Default return-probability threshold for first-passage times,
/// `exp(-4)`.
pub fn default_return_threshold() -> f64 {
    (-4.0f64).exp()
}

/// Anything that can report moments of the collective spin
/// `Z_tot = sum_i Z_i`.
pub trait SpinMoments {
    fn n_sites(&self) -> usize;
    /// `(<Z_tot>, <Z_tot^2>)`.
    fn ztot_mean_and_square(&self) -> Result<(f64, f64)>;
}

impl SpinMoments for MpsState {
    fn n_sites(&self) -> usize {
        MpsState::n_sites(self)
    }

    fn ztot_mean_and_square(&self) -> Result<(f64, f64)> {
        self.expect_ztot_moments()
    }
}

impl SpinMoments for DenseState {
    fn n_sites(&self) -> usize {
        DenseState::n_sites(self)
    }

    fn ztot_mean_and_square(&self) -> Result<(f64, f64)> {
        Ok(self.ztot_moments())
    }
}

/// Mean site magnetisation `<Z_tot> / N`.
pub fn magnetization<S: SpinMoments>(state: &S) -> Result<f64> {
    let (m1, _) = state.ztot_mean_and_square()?;
    Ok(m1 / state.n_sites() as f64)
}

/// Collective-spin variance `<Z_tot^2> - <Z_tot>^2`.
pub fn ztot_variance<S: SpinMoments>(state: &S) -> Result<f64> {
    let (m1, m2) = state.ztot_mean_and_square()?;
    Ok(m2 - m1 * m1)
}

/// Quantum Fisher information of a pure state with respect to the
/// collective spin: `4 Var(Z_tot)`. A multipartite-entanglement witness
/// that grows sharply when bubbles superpose.
pub fn qfi_proxy<S: SpinMoments>(state: &S) -> Result<f64> {
    Ok(4.0 * ztot_variance(state)?)
}

/// A first-passage readout from a sampled decay curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassage {
    /// Threshold the curve was tested against.
    pub threshold: f64,
    /// First time the curve reaches the threshold, interpolated between
    /// samples; `None` if it stays above throughout.
    pub time: Option<f64>,
}

/// Find when `values` (sampled at `times`) first drops to `threshold`.
///
/// Interpolation between the bracketing samples is linear in
/// `log(value)`, which is exact for exponential decay — the expected
/// shape of a metastable survival curve — and the reason the extracted
/// time is grid-insensitive.
pub fn first_passage_time(times: &[f64], values: &[f64], threshold: f64) -> Result<FirstPassage> {
    if times.len() != values.len() {
        return Err(Error::invalid(format!(
            "times ({}) and values ({}) must have equal length",
            times.len(),
            values.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::invalid("first-passage extraction needs at least one sample"));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::invalid(format!("threshold must be positive and finite, got {threshold}")));
    }
    for pair in times.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::invalid("times must be strictly increasing"));
        }
    }
    for (&t, &v) in times.iter().zip(values) {
        if !t.is_finite() || !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!("bad sample ({t}, {v}) in first-passage input")));
        }
    }

    if values[0] <= threshold {
        return Ok(FirstPassage { threshold, time: Some(times[0]) });
    }
    for i in 1..values.len() {
        if values[i] <= threshold {
            let prev = values[i - 1].max(1e-300).ln();
            let here = values[i].max(1e-300).ln();
            let frac = (prev - threshold.ln()) / (prev - here);
            let time = times[i - 1] + (times[i] - times[i - 1]) * frac;
            return Ok(FirstPassage { threshold, time: Some(time) });
        }
    }
    Ok(FirstPassage { threshold, time: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeGeometry;
    use crate::rng::substream;
    use crate::C64;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn threshold_matches_its_closed_form() {
        assert_relative_eq!(default_return_threshold().ln(), -4.0, epsilon = 1e-15);
    }

    #[test]
    fn ghz_moments_through_both_representations() {
        let g = LatticeGeometry::new(2, 2).unwrap();
        let mut amps = vec![C64::new(0.0, 0.0); 16];
        amps[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[15] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let dense = DenseState::new(g, amps).unwrap();
        let (mps, _) = MpsState::from_dense(&dense, 4, 0.0).unwrap();
        for state in [&dense as &dyn SpinMoments, &mps as &dyn SpinMoments] {
            let (m1, m2) = state.ztot_mean_and_square().unwrap();
            assert_relative_eq!(m1, 0.0, epsilon = 1e-10);
            assert_relative_eq!(m2, 16.0, epsilon = 1e-10);
        }
        assert_relative_eq!(magnetization(&dense).unwrap(), 0.0, epsilon = 1e-10);
        assert_relative_eq!(ztot_variance(&dense).unwrap(), 16.0, epsilon = 1e-10);
        assert_relative_eq!(qfi_proxy(&dense).unwrap(), 64.0, epsilon = 1e-10);
        // Maximal for 4 sites: the GHZ state saturates N^2.
        assert_relative_eq!(qfi_proxy(&mps).unwrap(), 64.0, epsilon = 1e-10);
    }

    #[test]
    fn representations_agree_on_random_states() {
        let g = LatticeGeometry::new(1, 4).unwrap();
        let mut rng = substream(3, 0);
        let amps: Vec<C64> =
            (0..16).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let dense = DenseState::new(g, amps).unwrap();
        let (mps, _) = MpsState::from_dense(&dense, 8, 0.0).unwrap();
        assert_relative_eq!(
            magnetization(&dense).unwrap(),
            magnetization(&mps).unwrap(),
            epsilon = 1e-10
        );
        assert_relative_eq!(
            ztot_variance(&dense).unwrap(),
            ztot_variance(&mps).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn exponential_decay_is_recovered_exactly() {
        // Log-linear interpolation is exact on exponentials, however
        // coarse the grid.
        let gamma = 0.9;
        let threshold = default_return_threshold();
        let times: Vec<f64> = (0..15).map(|i| 0.5 * i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| (-gamma * t).exp()).collect();
        let fp = first_passage_time(&times, &values, threshold).unwrap();
        assert_relative_eq!(fp.time.unwrap(), 4.0 / gamma, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn exponential_recovery_is_grid_insensitive(
            gamma in 0.05f64..5.0,
            step in 0.05f64..2.0,
        ) {
            let threshold = default_return_threshold();
            let n = ((4.0 / gamma) / step).ceil() as usize + 2;
            let times: Vec<f64> = (0..n).map(|i| step * i as f64).collect();
            let values: Vec<f64> = times.iter().map(|t| (-gamma * t).exp()).collect();
            let fp = first_passage_time(&times, &values, threshold).unwrap();
            let want = 4.0 / gamma;
            prop_assert!((fp.time.unwrap() - want).abs() < 1e-9 * (1.0 + want));
        }
    }

    #[test]
    fn mean_field_law_inverts_to_unit_passage_time() {
        // For decay exp(-N t^2 / 4) with N = 16, the e^{-4} threshold
        // is met exactly at t = 1.
        let times: Vec<f64> = (0..=20).map(|i| 0.1 * i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| (-16.0 * t * t / 4.0).exp()).collect();
        let fp = first_passage_time(&times, &values, default_return_threshold()).unwrap();
        assert_relative_eq!(fp.time.unwrap(), 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn lower_threshold_never_crosses_earlier(
            raw in proptest::collection::vec(0.01f64..1.0, 2..30),
            theta_lo in 0.02f64..0.5,
            ratio in 1.05f64..10.0,
        ) {
            let times: Vec<f64> = (0..raw.len()).map(|i| i as f64).collect();
            let theta_hi = (theta_lo * ratio).min(0.999);
            let lo = first_passage_time(&times, &raw, theta_lo).unwrap();
            let hi = first_passage_time(&times, &raw, theta_hi).unwrap();
            match (lo.time, hi.time) {
                (Some(t_lo), Some(t_hi)) => prop_assert!(t_lo >= t_hi - 1e-12),
                // Crossing the lower threshold implies crossing the
                // higher one first.
                (Some(_), None) => prop_assert!(false, "lower threshold crossed but higher not"),
                _ => {}
            }
        }
    }

    #[test]
    fn fluctuation_equals_pair_correlator_sum() {
        // Var(Z_tot) must agree with sum_ij (<Z_i Z_j> - <Z_i><Z_j>)
        // assembled from individual correlators.
        let g = LatticeGeometry::new(2, 3).unwrap();
        let mut rng = substream(8, 0);
        let mut amps: Vec<C64> =
            (0..64).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        let z = |k: usize, i: usize| if (k >> i) & 1 == 1 { 1.0 } else { -1.0 };
        let mut zi = [0.0f64; 6];
        let mut zz = [[0.0f64; 6]; 6];
        for (k, a) in amps.iter().enumerate() {
            let w = a.norm_sqr();
            for i in 0..6 {
                zi[i] += w * z(k, i);
                for j in 0..6 {
                    zz[i][j] += w * z(k, i) * z(k, j);
                }
            }
        }
        let mut pair_sum = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                pair_sum += zz[i][j] - zi[i] * zi[j];
            }
        }
        let dense = DenseState::new(g, amps).unwrap();
        let (mps, _) = MpsState::from_dense(&dense, 8, 0.0).unwrap();
        assert_relative_eq!(ztot_variance(&dense).unwrap(), pair_sum, epsilon = 1e-9);
        assert_relative_eq!(ztot_variance(&mps).unwrap(), pair_sum, epsilon = 1e-9);
    }

    #[test]
    fn curve_that_never_crosses_reports_none() {
        let times = [0.0, 1.0, 2.0];
        let values = [1.0, 0.9, 0.8];
        let fp = first_passage_time(&times, &values, 0.5).unwrap();
        assert_eq!(fp.time, None);
        assert_relative_eq!(fp.threshold, 0.5);
    }

    #[test]
    fn crossing_at_the_first_sample_is_immediate() {
        let fp = first_passage_time(&[2.0, 3.0], &[0.01, 0.001], 0.5).unwrap();
        assert_relative_eq!(fp.time.unwrap(), 2.0);
    }

    #[test]
    fn zero_tail_is_handled() {
        let fp = first_passage_time(&[0.0, 1.0], &[1.0, 0.0], 0.5).unwrap();
        let t = fp.time.unwrap();
        assert!((0.0..=1.0).contains(&t), "crossing {t} outside the bracket");
    }

    #[test]
    fn invalid_series_are_rejected() {
        assert!(first_passage_time(&[0.0, 1.0], &[1.0], 0.5).is_err());
        assert!(first_passage_time(&[], &[], 0.5).is_err());
        assert!(first_passage_time(&[0.0, 0.0], &[1.0, 0.4], 0.5).is_err());
        assert!(first_passage_time(&[0.0, 1.0], &[1.0, -0.1], 0.5).is_err());
        assert!(first_passage_time(&[0.0, 1.0], &[1.0, 0.4], 0.0).is_err());
        assert!(first_passage_time(&[0.0, 1.0], &[1.0, f64::NAN], 0.5).is_err());
    }
}
