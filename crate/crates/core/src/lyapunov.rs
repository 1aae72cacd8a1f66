//! Largest-Lyapunov-exponent estimation by two-trajectory rescaling.
//!
//! Two nearby trajectories are advanced one period at a time; after each
//! period the separation d_j is recorded and the perturbed trajectory is
//! pulled back along the connecting line to the reference separation
//! sqrt(2)*delta. The running average
//! lambda(T) = (1/T) sum_j log(d_j / (sqrt(2) delta)) converges to the
//! largest exponent on a bounded phase space.
//!
//! The perturbed trajectory is tracked as reference + difference vector. The
//! difference is recomputed by exact subtraction after each period, so the
//! rescaling arithmetic never loses precision to the O(1) reference
//! amplitudes, and the norm-manifold projection can be done in difference
//! space.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::propagator::{KickMethod, Stepper};
use crate::series::{RealSeries, SeriesMeta};
use crate::state::{momentum_eigenstate, uniform_phase_state, ModelParams, RotorState};

/// Initial two-trajectory pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Reference beta_0 = 1; perturbed beta'_0 = sqrt(1-delta^2), beta'_1 = delta.
    MomentumPerturbed,
    /// Reference beta_m = 1/sqrt(2M+1); perturbed reweights m=0 by sqrt(1-delta)
    /// and m=1 by sqrt(1+delta).
    UniformPerturbed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConfig {
    pub delta: f64,
    pub n_periods: u64,
    pub record_every: u64,
    pub pairing: Pairing,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self { delta: 1e-10, n_periods: 10_000, record_every: 100, pairing: Pairing::MomentumPerturbed }
    }
}

impl LyapunovConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1e-2) {
            return Err(Error::InvalidParams(format!(
                "delta must satisfy 0 < delta << 1, got {}",
                self.delta
            )));
        }
        if self.n_periods < 1 || self.record_every < 1 {
            return Err(Error::InvalidParams("n_periods and record_every must be >= 1".into()));
        }
        Ok(())
    }
}

pub struct BenettinOutcome {
    /// Running average lambda(T) on the recording grid.
    pub lambda: RealSeries,
    /// Reference-trajectory energy e(T) on the same grid.
    pub energy: RealSeries,
    /// Reference trajectory after the last period (identical to a plain
    /// evolve run: the rescaling never touches it).
    pub final_reference: RotorState,
    /// Mean of lambda(T) over the final 10% of periods.
    pub plateau: f64,
    /// Number of periods whose separation underflowed to zero (the log-ratio
    /// is counted as zero for those).
    pub zero_distance_periods: u64,
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn diff_norm(delta: &[Complex64]) -> f64 {
    neumaier_sum(delta.iter().map(|d| d.norm_sqr())).sqrt()
}

/// Re(<x, d>) with compensated summation.
fn re_inner(x: &[Complex64], d: &[Complex64]) -> f64 {
    neumaier_sum(x.iter().zip(d).map(|(a, b)| (a.conj() * b).re))
}

/// Scales the difference to length `target` and projects the implied
/// perturbed point back onto the unit-norm manifold, working entirely in
/// difference space. Converges quadratically; tolerance 1e-15 relative.
fn rescale_difference(reference: &[Complex64], delta: &mut [Complex64], target: f64) {
    for _ in 0..3 {
        // normalize the implied point x + delta: |x + d|^2 = 1 + t with
        // t = 2 Re<x,d> + |d|^2 computed directly to avoid cancellation
        let t = 2.0 * re_inner(reference, delta) + neumaier_sum(delta.iter().map(|d| d.norm_sqr()));
        let s = (1.0 + t).sqrt();
        let s_minus_1 = t / (1.0 + s);
        let inv_s = 1.0 / s;
        for (d, &x) in delta.iter_mut().zip(reference) {
            *d = *d * inv_s - x * (s_minus_1 * inv_s);
        }
        // then set the length exactly to the target
        let len = diff_norm(delta);
        let scale = target / len;
        for d in delta.iter_mut() {
            *d *= scale;
        }
        if (t / 2.0).abs() < 1e-15 {
            break;
        }
    }
}

fn initial_pair(params: &ModelParams, cfg: &LyapunovConfig) -> Result<(RotorState, Vec<Complex64>)> {
    let delta = cfg.delta;
    match cfg.pairing {
        Pairing::MomentumPerturbed => {
            let reference = momentum_eigenstate(*params, 0)?;
            let mut perturbed = reference.clone();
            {
                let b = perturbed.amplitudes_mut();
                let slot0 = params.slot_of(0);
                let slot1 = params.slot_of(1);
                b[slot0] = Complex64::new((1.0 - delta * delta).sqrt(), 0.0);
                b[slot1] = Complex64::new(delta, 0.0);
            }
            let diff = perturbed
                .amplitudes()
                .iter()
                .zip(reference.amplitudes())
                .map(|(y, x)| y - x)
                .collect();
            Ok((reference, diff))
        }
        Pairing::UniformPerturbed => {
            let len = params.lattice_len();
            let reference = uniform_phase_state(*params, &vec![0.0; len])?;
            let mut perturbed = reference.clone();
            {
                let amp = 1.0 / (len as f64).sqrt();
                let b = perturbed.amplitudes_mut();
                b[params.slot_of(0)] = Complex64::new(amp * (1.0 - delta).sqrt(), 0.0);
                b[params.slot_of(1)] = Complex64::new(amp * (1.0 + delta).sqrt(), 0.0);
            }
            let diff = perturbed
                .amplitudes()
                .iter()
                .zip(reference.amplitudes())
                .map(|(y, x)| y - x)
                .collect();
            Ok((reference, diff))
        }
    }
}

/// Runs the two-trajectory estimator for `cfg.n_periods` periods.
pub fn benettin_run(params: &ModelParams, cfg: &LyapunovConfig) -> Result<BenettinOutcome> {
    benettin_run_with(params, cfg, KickMethod::Bessel)
}

pub fn benettin_run_with(
    params: &ModelParams,
    cfg: &LyapunovConfig,
    method: KickMethod,
) -> Result<BenettinOutcome> {
    cfg.validate()?;
    let target = std::f64::consts::SQRT_2 * cfg.delta;

    let (mut reference, mut diff) = initial_pair(params, cfg)?;
    // start on-protocol: initial separation equals the rescaling target
    rescale_difference(reference.amplitudes(), &mut diff, target);

    let mut stepper = Stepper::new(params, method);

    let mut meta = SeriesMeta::with_params(*params);
    meta.push_extra("delta", cfg.delta);
    meta.push_extra("pairing", format!("{:?}", cfg.pairing));
    let mut lambda = RealSeries::with_meta("lambda", meta.clone());
    let mut energy = RealSeries::with_meta("energy", meta);

    let mut log_sum = 0.0f64;
    let mut zero_distance_periods = 0u64;
    let plateau_start = cfg.n_periods - cfg.n_periods / 10;
    let mut plateau_sum = 0.0f64;
    let mut plateau_count = 0u64;

    let mut perturbed = reference.clone();
    for period in 1..=cfg.n_periods {
        // materialize the perturbed point, advance both trajectories
        for ((y, &x), &d) in perturbed
            .amplitudes_mut()
            .iter_mut()
            .zip(reference.amplitudes())
            .zip(&diff)
        {
            *y = x + d;
        }
        stepper.step(&mut reference, 0.0);
        stepper.step(&mut perturbed, 0.0);

        for ((d, &y), &x) in diff
            .iter_mut()
            .zip(perturbed.amplitudes())
            .zip(reference.amplitudes())
        {
            *d = y - x;
        }
        let dist = diff_norm(&diff);
        if dist > 0.0 {
            log_sum += (dist / target).ln();
            rescale_difference(reference.amplitudes(), &mut diff, target);
        } else {
            zero_distance_periods += 1;
        }

        let lambda_t = log_sum / period as f64;
        if period >= plateau_start {
            plateau_sum += lambda_t;
            plateau_count += 1;
        }
        if period % cfg.record_every == 0 || period == cfg.n_periods {
            lambda.push(period as f64, lambda_t);
            energy.push(period as f64, reference.energy());
        }
    }

    Ok(BenettinOutcome {
        lambda,
        energy,
        final_reference: reference,
        plateau: plateau_sum / plateau_count.max(1) as f64,
        zero_distance_periods,
    })
}

/// Pairs each lambda(T) sample with the momentum range
/// m(T) = sqrt(2 e(T)) / kbar of the reference trajectory.
pub fn lambda_vs_m(
    lambda: &RealSeries,
    energy: &RealSeries,
    kbar: f64,
) -> Result<Vec<(f64, f64)>> {
    if lambda.times() != energy.times() {
        return Err(Error::LengthMismatch(
            "lambda and energy series must share the time grid".into(),
        ));
    }
    Ok(lambda
        .values()
        .iter()
        .zip(energy.values())
        .map(|(&l, &e)| ((2.0 * e).sqrt() / kbar, l))
        .collect())
}

/// Time up to which mean-field trajectories track the finite-N dynamics,
/// log(N) / (2 lambda). Nonpositive exponents (regular regime) give infinity.
pub fn validity_time(lambda: f64, n_rotors: u64) -> Result<f64> {
    if n_rotors < 2 {
        return Err(Error::InvalidParams("N must be >= 2".into()));
    }
    if lambda <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((n_rotors as f64).ln() / (2.0 * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{evolve, NoiseModel};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params(m_max: usize, interaction: f64) -> ModelParams {
        ModelParams::new(6.0, interaction, 1.7, m_max).unwrap()
    }

    #[test]
    fn rescaling_is_exact() {
        let p = params(16, 0.52);
        let cfg = LyapunovConfig { n_periods: 200, record_every: 50, ..Default::default() };
        let target = std::f64::consts::SQRT_2 * cfg.delta;

        let (mut reference, mut diff) = initial_pair(&p, &cfg).unwrap();
        let mut stepper = Stepper::new(&p, KickMethod::Bessel);
        let mut perturbed = reference.clone();
        rescale_difference(reference.amplitudes(), &mut diff, target);
        for _ in 0..200 {
            for ((y, &x), &d) in perturbed
                .amplitudes_mut()
                .iter_mut()
                .zip(reference.amplitudes())
                .zip(&diff)
            {
                *y = x + d;
            }
            stepper.step(&mut reference, 0.0);
            stepper.step(&mut perturbed, 0.0);
            for ((d, &y), &x) in diff.iter_mut().zip(perturbed.amplitudes()).zip(reference.amplitudes()) {
                *d = y - x;
            }
            rescale_difference(reference.amplitudes(), &mut diff, target);
            let dist = diff_norm(&diff);
            assert!(
                (dist / target - 1.0).abs() < 1e-15,
                "rescaled distance off target by {:e}",
                dist / target - 1.0
            );
            // the implied perturbed point stays on the unit-norm manifold
            let norm: f64 = reference
                .amplitudes()
                .iter()
                .zip(&diff)
                .map(|(&x, &d)| (x + d).norm_sqr())
                .sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_trajectories_give_zero() {
        // a zero perturbation stays zero: every d_j underflows and the
        // log-ratios are counted as zero
        let p = params(8, 0.52);
        let cfg = LyapunovConfig { n_periods: 50, record_every: 10, ..Default::default() };
        let (mut reference, _diff) = initial_pair(&p, &cfg).unwrap();
        let mut diff = vec![Complex64::ZERO; p.lattice_len()];
        let mut stepper = Stepper::new(&p, KickMethod::Bessel);
        let mut perturbed = reference.clone();
        let mut zero_count = 0;
        for _ in 0..50 {
            for ((y, &x), &d) in perturbed
                .amplitudes_mut()
                .iter_mut()
                .zip(reference.amplitudes())
                .zip(&diff)
            {
                *y = x + d;
            }
            stepper.step(&mut reference, 0.0);
            stepper.step(&mut perturbed, 0.0);
            for ((d, &y), &x) in diff.iter_mut().zip(perturbed.amplitudes()).zip(reference.amplitudes()) {
                *d = y - x;
            }
            if diff_norm(&diff) == 0.0 {
                zero_count += 1;
            }
        }
        assert_eq!(zero_count, 50);
    }

    #[test]
    fn reference_trajectory_is_bit_identical_to_plain_evolve() {
        let p = params(12, 0.52);
        let cfg = LyapunovConfig { n_periods: 300, record_every: 100, ..Default::default() };
        let out = benettin_run(&p, &cfg).unwrap();

        let plain = evolve(
            momentum_eigenstate(p, 0).unwrap(),
            300,
            100,
            &NoiseModel::none(),
            KickMethod::Bessel,
        )
        .unwrap();

        for (a, b) in out
            .final_reference
            .amplitudes()
            .iter()
            .zip(plain.final_state.amplitudes())
        {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn linear_dynamics_gives_vanishing_exponent() {
        // interaction off: the map is a fixed unitary, separations cannot
        // grow; lambda(T) sits at the rounding random-walk level ~1e-8
        let p = params(16, 0.0);
        let cfg = LyapunovConfig { n_periods: 2000, record_every: 500, ..Default::default() };
        let out = benettin_run(&p, &cfg).unwrap();
        assert!(out.plateau.abs() < 1e-5, "plateau {}", out.plateau);
        let last = *out.lambda.values().last().unwrap();
        assert!(last.abs() < 1e-5, "lambda(T) = {last}");
    }

    #[test]
    fn chaotic_dynamics_gives_positive_exponent() {
        let p = params(8, 0.52);
        let cfg = LyapunovConfig { n_periods: 3000, record_every: 500, ..Default::default() };
        let out = benettin_run(&p, &cfg).unwrap();
        assert!(out.plateau > 0.01, "plateau {}", out.plateau);
    }

    #[test]
    fn lambda_invariant_under_global_phase_rotation() {
        // rotate both trajectories by a global phase: the evolution is
        // phase-covariant, so every separation (and lambda) is unchanged.
        // Chaos amplifies last-bit rounding by e^{lambda T}, so the check
        // runs over a short horizon.
        let n_periods = 60usize;
        let p = params(8, 0.52);
        let target = std::f64::consts::SQRT_2 * 1e-10;
        let cfg = LyapunovConfig { n_periods: 60, record_every: 60, ..Default::default() };

        let run = |phase: f64| -> f64 {
            let (mut reference, mut diff) = initial_pair(&p, &cfg).unwrap();
            let rot = Complex64::from_polar(1.0, phase);
            for b in reference.amplitudes_mut() {
                *b *= rot;
            }
            for d in diff.iter_mut() {
                *d *= rot;
            }
            rescale_difference(reference.amplitudes(), &mut diff, target);
            let mut stepper = Stepper::new(&p, KickMethod::Bessel);
            let mut perturbed = reference.clone();
            let mut log_sum = 0.0;
            for _ in 0..n_periods {
                for ((y, &x), &d) in perturbed
                    .amplitudes_mut()
                    .iter_mut()
                    .zip(reference.amplitudes())
                    .zip(&diff)
                {
                    *y = x + d;
                }
                stepper.step(&mut reference, 0.0);
                stepper.step(&mut perturbed, 0.0);
                for ((d, &y), &x) in diff.iter_mut().zip(perturbed.amplitudes()).zip(reference.amplitudes()) {
                    *d = y - x;
                }
                log_sum += (diff_norm(&diff) / target).ln();
                rescale_difference(reference.amplitudes(), &mut diff, target);
            }
            log_sum / n_periods as f64
        };

        let base = run(0.0);
        let rotated = run(1.234);
        assert_relative_eq!(base, rotated, max_relative = 1e-3);
    }

    #[test]
    fn bounded_run_converges() {
        let p = params(8, 0.52);
        let long = LyapunovConfig { n_periods: 20_000, record_every: 10_000, ..Default::default() };
        let out = benettin_run(&p, &long).unwrap();
        let lam_half = out.lambda.values()[0]; // T = 10_000
        let lam_full = *out.lambda.values().last().unwrap(); // T = 20_000
        assert!(
            (lam_full - lam_half).abs() < 0.05 * lam_half.abs(),
            "lambda(T) {lam_half} vs lambda(2T) {lam_full}"
        );
    }

    #[test]
    fn pairings_reach_the_same_plateau() {
        let p = params(8, 0.52);
        let mk = |pairing| LyapunovConfig { n_periods: 20_000, record_every: 5_000, pairing, ..Default::default() };
        let a = benettin_run(&p, &mk(Pairing::MomentumPerturbed)).unwrap();
        let b = benettin_run(&p, &mk(Pairing::UniformPerturbed)).unwrap();
        assert!(a.plateau > 0.0 && b.plateau > 0.0);
        assert!(
            (a.plateau - b.plateau).abs() < 0.25 * a.plateau.max(b.plateau),
            "plateaus {} vs {}",
            a.plateau,
            b.plateau
        );
    }

    #[test]
    fn lambda_vs_m_pairs_examples() {
        let mut lam = RealSeries::new("lambda");
        let mut en = RealSeries::new("energy");
        lam.push(1.0, 0.2);
        en.push(1.0, 0.0);
        lam.push(2.0, 0.1);
        en.push(2.0, 1.7 * 1.7 / 2.0);
        let pairs = lambda_vs_m(&lam, &en, 1.7).unwrap();
        assert_abs_diff_eq!(pairs[0].0, 0.0);
        assert_abs_diff_eq!(pairs[1].0, 1.0, epsilon = 1e-14);

        let mut other = RealSeries::new("energy");
        other.push(3.0, 0.0);
        assert!(lambda_vs_m(&lam, &other, 1.7).is_err());
    }

    #[test]
    fn validity_time_examples() {
        let n = std::f64::consts::E.powi(2).round() as u64; // e^2 ~ 7.39 -> 7
        // use exact arithmetic instead: lambda = 0.5, N = e^2 gives t = 2
        let t = validity_time(0.5, n).unwrap();
        assert!((t - (n as f64).ln()).abs() < 1e-12);

        assert_relative_eq!(
            validity_time(0.1, 10_000).unwrap(),
            10_000f64.ln() / 0.2,
            epsilon = 1e-12
        );
        assert!((validity_time(0.1, 10_000).unwrap() - 46.0517018599).abs() < 1e-6);

        assert_eq!(validity_time(0.0, 100).unwrap(), f64::INFINITY);
        assert_eq!(validity_time(-0.3, 100).unwrap(), f64::INFINITY);
        assert!(validity_time(0.5, 1).is_err());
    }

    #[test]
    fn config_validation() {
        let p = params(4, 0.52);
        let bad = LyapunovConfig { delta: 0.0, ..Default::default() };
        assert!(benettin_run(&p, &bad).is_err());
        let bad = LyapunovConfig { n_periods: 0, ..Default::default() };
        assert!(benettin_run(&p, &bad).is_err());
    }
}
