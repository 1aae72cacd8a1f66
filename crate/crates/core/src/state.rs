//! Mean-field rotor state on the truncated momentum lattice and its
//! elementary observables.
//!
//! The lattice holds the momentum indices m = -M..=M in a contiguous array;
//! array slot `i` always corresponds to m = i - M. All observables below are
//! pure functions of the amplitudes.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Physical parameters of the kicked-rotor model.
///
/// `kick` is the dimensionless kick strength K, `interaction` the
/// dimensionless coupling strength (called epsilon throughout the CLI),
/// `kbar` the effective Planck constant, and `m_max` the momentum
/// truncation half-width M (lattice size 2M+1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kick: f64,
    pub interaction: f64,
    pub kbar: f64,
    pub m_max: usize,
}

impl ModelParams {
    pub fn new(kick: f64, interaction: f64, kbar: f64, m_max: usize) -> Result<Self> {
        if !kick.is_finite() || kick < 0.0 {
            return Err(Error::InvalidParams(format!("K must be >= 0, got {kick}")));
        }
        if !interaction.is_finite() {
            return Err(Error::InvalidParams("epsilon must be finite".into()));
        }
        if !kbar.is_finite() || kbar <= 0.0 {
            return Err(Error::InvalidParams(format!("kbar must be > 0, got {kbar}")));
        }
        if m_max < 1 {
            return Err(Error::InvalidParams("M must be >= 1".into()));
        }
        Ok(Self { kick, interaction, kbar, m_max })
    }

    /// Number of lattice sites, 2M+1.
    pub fn lattice_len(&self) -> usize {
        2 * self.m_max + 1
    }

    /// Momentum index of array slot `i`.
    pub fn m_of(&self, i: usize) -> i64 {
        i as i64 - self.m_max as i64
    }

    /// Array slot of momentum index `m` (caller guarantees |m| <= M).
    pub fn slot_of(&self, m: i64) -> usize {
        (m + self.m_max as i64) as usize
    }

    /// Unkicked energy per rotor averaged over the truncated lattice,
    /// kbar^2/(2M+1) * (M^3/3 + M^2/2 + M/6).
    pub fn infinite_temperature_energy(&self) -> f64 {
        let m = self.m_max as f64;
        self.kbar * self.kbar / (2.0 * m + 1.0) * (m * m * m / 3.0 + m * m / 2.0 + m / 6.0)
    }
}

/// Free convenience wrapper mirroring [`ModelParams::infinite_temperature_energy`].
pub fn infinite_temperature_energy(params: &ModelParams) -> f64 {
    params.infinite_temperature_energy()
}

/// Mean-field state: 2M+1 complex amplitudes indexed by m in [-M, M].
#[derive(Debug, Clone, PartialEq)]
pub struct RotorState {
    params: ModelParams,
    beta: Vec<Complex64>,
}

impl RotorState {
    /// Builds a state from raw amplitudes. The amplitudes must already be
    /// normalized to unity within 1e-10.
    pub fn from_amplitudes(params: ModelParams, beta: Vec<Complex64>) -> Result<Self> {
        if beta.len() != params.lattice_len() {
            return Err(Error::LengthMismatch(format!(
                "expected {} amplitudes, got {}",
                params.lattice_len(),
                beta.len()
            )));
        }
        let state = Self { params, beta };
        let n = state.norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParams(format!(
                "amplitudes not normalized: |beta|^2 = {n}"
            )));
        }
        Ok(state)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.beta
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.beta
    }

    /// Amplitude at momentum index `m`.
    pub fn amplitude(&self, m: i64) -> Complex64 {
        self.beta[self.params.slot_of(m)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.beta.iter().map(|b| b.norm_sqr()).sum()
    }

    /// Unkicked energy per rotor, (kbar^2/2) sum_m m^2 |beta_m|^2.
    pub fn energy(&self) -> f64 {
        let half_kbar_sq = 0.5 * self.params.kbar * self.params.kbar;
        self.beta
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let m = self.params.m_of(i) as f64;
                m * m * b.norm_sqr()
            })
            .sum::<f64>()
            * half_kbar_sq
    }

    /// Nearest-neighbour coherence F = sum_{m=-M}^{M-1} conj(beta_m) beta_{m+1}
    /// (open boundary at the truncation edge).
    pub fn order_parameter(&self) -> Complex64 {
        self.beta
            .windows(2)
            .map(|w| w[0].conj() * w[1])
            .sum()
    }

    /// Larger of the two edge occupations |beta_{-M}|^2, |beta_{M}|^2.
    pub fn edge_occupation(&self) -> f64 {
        let first = self.beta.first().map(|b| b.norm_sqr()).unwrap_or(0.0);
        let last = self.beta.last().map(|b| b.norm_sqr()).unwrap_or(0.0);
        first.max(last)
    }
}

/// State concentrated on a single momentum index: beta_{m0} = 1.
pub fn momentum_eigenstate(params: ModelParams, m0: i64) -> Result<RotorState> {
    if m0.unsigned_abs() as usize > params.m_max {
        return Err(Error::IndexOutOfRange(format!(
            "|m0| = {} exceeds M = {}",
            m0.unsigned_abs(),
            params.m_max
        )));
    }
    let mut beta = vec![Complex64::ZERO; params.lattice_len()];
    beta[params.slot_of(m0)] = Complex64::ONE;
    Ok(RotorState { params, beta })
}

/// Phase-disordered flat state beta_m = exp(-i phi_m)/sqrt(2M+1).
pub fn uniform_phase_state(params: ModelParams, phases: &[f64]) -> Result<RotorState> {
    let len = params.lattice_len();
    if phases.len() != len {
        return Err(Error::LengthMismatch(format!(
            "expected {} phases, got {}",
            len,
            phases.len()
        )));
    }
    let amp = 1.0 / (len as f64).sqrt();
    let beta = phases
        .iter()
        .map(|&phi| Complex64::from_polar(amp, -phi))
        .collect();
    Ok(RotorState { params, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params(m_max: usize) -> ModelParams {
        ModelParams::new(6.0, 0.52, 1.7, m_max).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(6.0, 0.0, 1.7, 0).is_err());
        assert!(ModelParams::new(-1.0, 0.0, 1.7, 4).is_err());
        assert!(ModelParams::new(6.0, 0.0, 0.0, 4).is_err());
        assert!(ModelParams::new(6.0, f64::NAN, 1.7, 4).is_err());
        let p = params(4);
        assert_eq!(p.lattice_len(), 9);
        assert_eq!(p.m_of(0), -4);
        assert_eq!(p.slot_of(4), 8);
    }

    #[test]
    fn momentum_eigenstate_examples() {
        let s = momentum_eigenstate(params(2), 0).unwrap();
        let expect = [0.0, 0.0, 1.0, 0.0, 0.0];
        for (b, e) in s.amplitudes().iter().zip(expect) {
            assert_eq!(b.re, e);
            assert_eq!(b.im, 0.0);
        }
        assert_eq!(s.norm_sqr(), 1.0);

        let s = momentum_eigenstate(params(1), 1).unwrap();
        assert_eq!(s.amplitude(1), Complex64::ONE);
        assert_eq!(s.amplitude(0), Complex64::ZERO);

        assert!(momentum_eigenstate(params(1), 2).is_err());
        assert!(momentum_eigenstate(params(1), -2).is_err());
    }

    #[test]
    fn uniform_phase_state_examples() {
        let s = uniform_phase_state(params(1), &[0.0, 0.0, 0.0]).unwrap();
        let amp = 1.0 / 3f64.sqrt();
        for b in s.amplitudes() {
            assert_abs_diff_eq!(b.re, amp, epsilon = 1e-15);
            assert_abs_diff_eq!(b.im, 0.0, epsilon = 1e-15);
        }

        let s = uniform_phase_state(params(1), &[0.0, std::f64::consts::PI, 0.0]).unwrap();
        assert_abs_diff_eq!(s.amplitude(0).re, -amp, epsilon = 1e-15);

        assert!(uniform_phase_state(params(1), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn constructors_are_normalized() {
        let mut rng = 1234u64;
        for trial in 0..20 {
            let m_max = 1 + (trial % 7);
            let phases: Vec<f64> = (0..2 * m_max + 1)
                .map(|_| {
                    // cheap deterministic pseudo-random phases
                    rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (rng >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU
                })
                .collect();
            let s = uniform_phase_state(params(m_max), &phases).unwrap();
            assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn energy_examples() {
        let s = momentum_eigenstate(params(2), 0).unwrap();
        assert_eq!(s.energy(), 0.0);

        let s = momentum_eigenstate(params(1), 1).unwrap();
        assert_relative_eq!(s.energy(), 1.7 * 1.7 / 2.0, epsilon = 1e-15);
        assert_relative_eq!(s.energy(), 1.445, epsilon = 1e-12);

        let s = uniform_phase_state(params(1), &[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(s.energy(), 1.7 * 1.7 / 2.0 * 2.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn energy_bounded_by_max_eigenvalue() {
        let p = params(3);
        let phases = [0.3, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = uniform_phase_state(p, &phases).unwrap();
        let bound = p.kbar * p.kbar / 2.0 * (p.m_max * p.m_max) as f64;
        assert!(s.energy() <= bound);
    }

    #[test]
    fn order_parameter_examples() {
        let s = momentum_eigenstate(params(2), 0).unwrap();
        assert_eq!(s.order_parameter(), Complex64::ZERO);

        let s = uniform_phase_state(params(1), &[0.0, 0.0, 0.0]).unwrap();
        let f = s.order_parameter();
        assert_relative_eq!(f.re, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.im, 0.0, epsilon = 1e-15);
        assert!(f.norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn order_parameter_real_for_even_real_states() {
        // beta real and even in m -> Im F = 0
        let p = params(2);
        let raw = [0.2, 0.4, 0.5, 0.4, 0.2];
        let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>();
        let beta: Vec<Complex64> = raw
            .iter()
            .map(|&x| Complex64::new(x / norm.sqrt(), 0.0))
            .collect();
        let s = RotorState::from_amplitudes(p, beta).unwrap();
        assert_abs_diff_eq!(s.order_parameter().im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn infinite_temperature_energy_examples() {
        let p = ModelParams::new(6.0, 0.52, 1.7, 1).unwrap();
        assert_relative_eq!(p.infinite_temperature_energy(), 1.7 * 1.7 / 3.0, epsilon = 1e-14);

        let p = ModelParams::new(6.0, 0.52, 1.0, 2).unwrap();
        assert_relative_eq!(p.infinite_temperature_energy(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn infinite_temperature_energy_matches_brute_force() {
        for m_max in 1..40 {
            let p = ModelParams::new(6.0, 0.52, 1.7, m_max).unwrap();
            let brute: f64 = (1..=m_max as i64)
                .map(|m| (m * m) as f64 * p.kbar * p.kbar / (2.0 * m_max as f64 + 1.0))
                .sum();
            assert_relative_eq!(p.infinite_temperature_energy(), brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn from_amplitudes_rejects_unnormalized() {
        let p = params(1);
        let beta = vec![Complex64::new(0.5, 0.0); 3];
        assert!(RotorState::from_amplitudes(p, beta).is_err());
    }
}
