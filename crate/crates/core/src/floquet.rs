//! Single-rotor Floquet operator at zero interaction, its modes, the
//! conserved mode amplitudes |O_j|, and the deviation experiment that probes
//! how fast interactions destroy them.

use ndarray::{Array1, Array2};
use ndarray_linalg::Eig;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::observables::PowerLawFit;
use crate::propagator::{kick_band, KickMethod, Stepper};
use crate::series::SeriesMeta;
use crate::state::{uniform_phase_state, ModelParams, RotorState};

/// Quasienergies mu_j in (-pi, pi] and the orthonormal mode matrix U_{m,j}
/// (columns are Floquet modes in the momentum basis), sorted by quasienergy.
pub struct FloquetSpectrum {
    pub quasienergies: Vec<f64>,
    pub modes: Array2<Complex64>,
}

/// One-period unitary of the uncoupled rotor sampled just after the kick:
/// kick with amplitude K following the free rotation. The matrix is the same
/// periodic-lattice operator the propagator applies, so multiplying a state
/// by it reproduces one propagator step with eps = 0.
pub fn build_floquet_operator(params: &ModelParams) -> Array2<Complex64> {
    let n = params.lattice_len();
    let coeffs = kick_band(params.kick);
    // fold the momentum-transfer coefficients onto the periodic lattice
    let mut circ = vec![Complex64::ZERO; n];
    for k in -(coeffs.n_max() as i64)..=coeffs.n_max() as i64 {
        circ[k.rem_euclid(n as i64) as usize] += coeffs.coeff(k);
    }
    let mut u = Array2::zeros((n, n));
    for col in 0..n {
        let m = col as i64 - params.m_max as i64;
        let free = Complex64::from_polar(1.0, -0.5 * params.kbar * (m * m) as f64);
        for row in 0..n {
            let d = (row as i64 - col as i64).rem_euclid(n as i64) as usize;
            u[(row, col)] = circ[d] * free;
        }
    }
    u
}

fn unitarity_defect(u: &Array2<Complex64>) -> f64 {
    let gram = u.t().mapv(|z| z.conj()).dot(u);
    let mut worst = 0.0f64;
    for ((i, j), v) in gram.indexed_iter() {
        let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
        worst = worst.max((v - target).norm());
    }
    worst
}

/// Eigen-decomposition of a one-period unitary. Quasienergies are the phases
/// of the eigenvalues wrapped to (-pi, pi]; near-degenerate clusters
/// (circular gap < 1e-12) are re-orthonormalized.
pub fn diagonalize_floquet(u: &Array2<Complex64>) -> Result<FloquetSpectrum> {
    let defect = unitarity_defect(u);
    if defect > 1e-8 {
        return Err(Error::Numerical(format!(
            "matrix is not unitary: defect {defect:.3e}"
        )));
    }
    let (vals, vecs) = u
        .eig()
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e}")))?;

    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mu_of = |lam: Complex64| -> f64 {
        let mut mu = -lam.arg();
        if mu <= -std::f64::consts::PI {
            mu += std::f64::consts::TAU;
        }
        mu
    };
    order.sort_by(|&a, &b| mu_of(vals[a]).partial_cmp(&mu_of(vals[b])).unwrap());

    let mut quasienergies = Vec::with_capacity(n);
    let mut modes = Array2::zeros((n, n));
    for (j, &src) in order.iter().enumerate() {
        quasienergies.push(mu_of(vals[src]));
        let mut col = vecs.column(src).to_owned();
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.mapv_inplace(|z| z / norm);
        modes.column_mut(j).assign(&col);
    }

    reorthonormalize_clusters(&mut quasienergies, &mut modes);
    Ok(FloquetSpectrum { quasienergies, modes })
}

/// Width below which quasienergies count as a degenerate cluster. Eigenvector
/// cross-talk of the solver scales like eps/gap, so orthogonalizing clusters
/// up to 1e-6 keeps all residuals below ~1e-9; localized modes at distant
/// lattice sites produce exponentially small splittings well inside this.
const CLUSTER_GAP: f64 = 1e-6;

/// Gram-Schmidt inside clusters of near-degenerate quasienergies (including
/// a cluster straddling the +-pi wrap); eigensolvers return arbitrary or
/// skewed bases in such blocks.
fn reorthonormalize_clusters(mu: &mut [f64], modes: &mut Array2<Complex64>) {
    let n = mu.len();
    if n < 2 {
        return;
    }
    let gap = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(std::f64::consts::TAU - d)
    };

    let orthogonalize = |modes: &mut Array2<Complex64>, cols: &[usize]| {
        for (pos, &j) in cols.iter().enumerate() {
            let mut col = modes.column(j).to_owned();
            for &k in &cols[..pos] {
                let prev = modes.column(k);
                let overlap: Complex64 =
                    prev.iter().zip(col.iter()).map(|(p, c)| p.conj() * c).sum();
                col.iter_mut().zip(prev.iter()).for_each(|(c, p)| *c -= overlap * p);
            }
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            col.mapv_inplace(|z| z / norm);
            modes.column_mut(j).assign(&col);
        }
    };

    let mut first_cluster_end = n;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && gap(mu[end], mu[end - 1]) < CLUSTER_GAP {
            end += 1;
        }
        if start == 0 {
            first_cluster_end = end;
        }
        if end - start > 1 {
            let cols: Vec<usize> = (start..end).collect();
            orthogonalize(modes, &cols);
        }
        start = end;
    }

    // cluster wrapping around +-pi: join the trailing and leading runs
    if n > 2 && gap(mu[0], mu[n - 1]) < CLUSTER_GAP && first_cluster_end < n {
        let mut last_cluster_start = n - 1;
        while last_cluster_start > 0 && gap(mu[last_cluster_start], mu[last_cluster_start - 1]) < CLUSTER_GAP
        {
            last_cluster_start -= 1;
        }
        if last_cluster_start > first_cluster_end {
            let cols: Vec<usize> = (last_cluster_start..n).chain(0..first_cluster_end).collect();
            orthogonalize(modes, &cols);
        }
    }
}

impl FloquetSpectrum {
    pub fn dim(&self) -> usize {
        self.quasienergies.len()
    }

    /// Largest off-diagonal overlap max_{j!=j'} |<V_j, V_j'>|. The Poisson
    /// bracket {|O_j|^2, |O_j'|^2} reduces to exactly this quantity, so its
    /// smallness is what puts the |O_j| in involution.
    pub fn involution_residual(&self) -> f64 {
        let gram = self.modes.t().mapv(|z| z.conj()).dot(&self.modes);
        let mut worst = 0.0f64;
        for ((i, j), v) in gram.indexed_iter() {
            if i != j {
                worst = worst.max(v.norm());
            }
        }
        worst
    }

    /// Worst eigen-residual ||U v_j - e^{-i mu_j} v_j|| over the columns.
    pub fn eigen_residual(&self, u: &Array2<Complex64>) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            let v = self.modes.column(j);
            let uv = u.dot(&v);
            let lam = Complex64::from_polar(1.0, -self.quasienergies[j]);
            let res: f64 = uv
                .iter()
                .zip(v.iter())
                .map(|(a, b)| (a - lam * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(res);
        }
        worst
    }

    /// Parity expectation <v_j | R | v_j> with R the m -> -m reflection;
    /// close to +1 (-1) for even (odd) modes.
    pub fn parity_expectations(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let v = self.modes.column(j);
                (0..n).map(|m| (v[n - 1 - m].conj() * v[m]).re).sum()
            })
            .collect()
    }

    /// Inverse participation ratio 1/sum_m |U_mj|^4 per mode.
    pub fn participation_ratios(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let p4: f64 = self.modes.column(j).iter().map(|z| z.norm_sqr().powi(2)).sum();
                1.0 / p4
            })
            .collect()
    }
}

/// Mode amplitudes O_j = sum_m conj(U_{m,j}) beta_m. Unitarity of the mode
/// matrix makes sum_j |O_j|^2 equal the state norm.
pub fn project_onto_modes(spectrum: &FloquetSpectrum, state: &RotorState) -> Result<Array1<Complex64>> {
    if spectrum.dim() != state.amplitudes().len() {
        return Err(Error::LengthMismatch(format!(
            "spectrum dim {} vs state dim {}",
            spectrum.dim(),
            state.amplitudes().len()
        )));
    }
    let beta = Array1::from(state.amplitudes().to_vec());
    Ok(spectrum.modes.t().mapv(|z| z.conj()).dot(&beta))
}

/// Reconstructs beta = U O; adjoint of [`project_onto_modes`].
pub fn reconstruct_from_modes(spectrum: &FloquetSpectrum, modes_ampl: &Array1<Complex64>) -> Array1<Complex64> {
    spectrum.modes.dot(modes_ampl)
}

/// Configuration of the conserved-quantity deviation experiment.
#[derive(Debug, Clone)]
pub struct NekhoroshevConfig {
    pub eps_list: Vec<f64>,
    pub n_disorder: usize,
    pub n_kicks: u64,
    pub seed: u64,
    /// Exponent b in the deviation-time estimate t* = eps^{b/A} e^{-B/A}.
    pub b: f64,
    /// Lower edge of the power-law fit window.
    pub fit_t_min: f64,
    pub record_every: u64,
}

impl Default for NekhoroshevConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.02, 0.05, 0.1, 0.2],
            n_disorder: 32,
            n_kicks: 10_000,
            seed: 1,
            b: 0.7,
            fit_t_min: 10.0,
            record_every: 1,
        }
    }
}

/// Per-epsilon fitted constants of log eta(t) = A log t + B.
#[derive(Debug, Clone, Copy)]
pub struct EpsFit {
    pub eps: f64,
    pub a_mean: f64,
    pub b_mean: f64,
    pub a_stderr: f64,
    pub b_stderr: f64,
    /// Mean detected end of the power-law window (onset of the plateau).
    pub mean_break_time: f64,
    /// Number of mode fits whose window had to be shrunk below 10 samples
    /// and fell back to the full window.
    pub shrunk_windows: usize,
}

pub struct NekhoroshevResult {
    pub times: Vec<f64>,
    /// Disorder-averaged eta_{j,eps}(t); one (times x modes) matrix per eps.
    pub eta: Vec<Array2<f64>>,
    pub fits: Vec<EpsFit>,
    /// Linear fit of log(-B_eps) vs log(eps); the signed slope is reported
    /// without further interpretation.
    pub exponent_a: Option<PowerLawFit>,
    /// (eps, t*) with t* = eps^{b/A_eps} exp(-B_eps/A_eps).
    pub t_star: Vec<(f64, f64)>,
    pub meta: SeriesMeta,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stream key for (seed, eps index, disorder realization index).
fn realization_seed(seed: u64, eps_idx: usize, realization: usize) -> u64 {
    let mut s = seed;
    let a = splitmix64(&mut s);
    let mut s2 = a ^ (eps_idx as u64).wrapping_mul(0xA0761D6478BD642F);
    let b = splitmix64(&mut s2);
    let mut s3 = b ^ (realization as u64).wrapping_mul(0xE7037ED1A0B428DB);
    splitmix64(&mut s3)
}

/// Accumulated |delta_j(t)| and |O_j(0)| of one disorder realization.
struct RealizationOutcome {
    delta: Array2<f64>,
    o_initial: Vec<f64>,
}

fn run_realization(
    params: &ModelParams,
    spectrum: &FloquetSpectrum,
    times: &[f64],
    n_kicks: u64,
    record_every: u64,
    rng_seed: u64,
) -> RealizationOutcome {
    let n = params.lattice_len();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let phases: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let mut state = uniform_phase_state(*params, &phases).expect("phases sized to lattice");

    let o0 = project_onto_modes(spectrum, &state).expect("dimensions match");
    let o_initial: Vec<f64> = o0.iter().map(|z| z.norm()).collect();

    let mut delta = Array2::zeros((times.len(), n));
    let mut stepper = Stepper::new(params, KickMethod::Bessel);
    let mut row = 0usize;
    for t in 1..=n_kicks {
        stepper.step(&mut state, 0.0);
        if t % record_every == 0 || t == n_kicks {
            let o = project_onto_modes(spectrum, &state).expect("dimensions match");
            for (j, oj) in o.iter().enumerate() {
                delta[(row, j)] = (oj.norm() - o_initial[j]).abs();
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, times.len());
    RealizationOutcome { delta, o_initial }
}

/// Log-spaced subset of indices into `times` for fitting.
fn log_spaced_indices(times: &[f64], t_min: f64, max_points: usize) -> Vec<usize> {
    let mut idx = Vec::new();
    let start = times.partition_point(|&t| t < t_min);
    if start >= times.len() {
        return idx;
    }
    let t0 = times[start].max(1.0);
    let t1 = *times.last().unwrap();
    let n = max_points.max(2);
    let ratio = (t1 / t0).powf(1.0 / (n - 1) as f64);
    let mut target = t0;
    let mut last_pushed = usize::MAX;
    for _ in 0..n {
        let i = times.partition_point(|&t| t < target).min(times.len() - 1);
        if i != last_pushed {
            idx.push(i);
            last_pushed = i;
        }
        target *= ratio;
    }
    idx
}

/// Two-segment fit in log-log: chooses the breakpoint minimizing the total
/// squared residual and returns (A, B, stderr_A, stderr_B, break_time,
/// fell_back) for the rising segment.
fn fit_rise_with_break(
    times: &[f64],
    values: &[f64],
    candidates: &[usize],
) -> Option<(f64, f64, f64, f64, f64, bool)> {
    let pts: Vec<(f64, f64)> = candidates
        .iter()
        .filter(|&&i| values[i] > 0.0)
        .map(|&i| (times[i].ln(), values[i].ln()))
        .collect();
    if pts.len() < 10 {
        return None;
    }

    let ols = |pts: &[(f64, f64)]| -> Option<(f64, f64, f64, f64, f64)> {
        let n = pts.len() as f64;
        if pts.len() < 3 {
            return None;
        }
        let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
        let slope = sxy / sxx;
        let intercept = ym - slope * xm;
        let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se_slope = (ss / (n - 2.0) / sxx).sqrt();
        let se_intercept = se_slope * (sxx / n + xm * xm).sqrt();
        Some((slope, intercept, se_slope, se_intercept, ss))
    };

    let mut best: Option<(f64, usize)> = None;
    // candidate breaks leave at least 5 points on each side
    for cut in 5..pts.len() - 4 {
        let left = ols(&pts[..cut]);
        let right = ols(&pts[cut..]);
        if let (Some(l), Some(r)) = (left, right) {
            let total = l.4 + r.4;
            if best.map_or(true, |(b, _)| total < b) {
                best = Some((total, cut));
            }
        }
    }
    // compare against a single-segment fit: no plateau in the window
    let single = ols(&pts)?;
    let use_single = best.map_or(true, |(b, _)| single.4 <= b * 1.02);
    if use_single {
        let (a, bi, sa, sb, _) = single;
        return Some((a, bi, sa, sb, pts.last().unwrap().0.exp(), false));
    }
    let (_, cut) = best.unwrap();
    if cut < 10 {
        // window shrank too far; fall back to the full window
        let (a, bi, sa, sb, _) = single;
        return Some((a, bi, sa, sb, pts.last().unwrap().0.exp(), true));
    }
    let (a, bi, sa, sb, _) = ols(&pts[..cut]).unwrap();
    Some((a, bi, sa, sb, pts[cut].0.exp(), false))
}

/// Evolves disorder-averaged trajectories at each interaction strength,
/// tracks the deviation of the mode amplitudes from their conserved values,
/// and fits the power-law rise eta(t) ~ e^B t^A per mode.
pub fn nekhoroshev_experiment(
    params: &ModelParams,
    cfg: &NekhoroshevConfig,
) -> Result<NekhoroshevResult> {
    if cfg.eps_list.is_empty() || cfg.eps_list.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidParams("eps_list must contain positive entries".into()));
    }
    if cfg.n_disorder < 1 {
        return Err(Error::InvalidParams("n_disorder must be >= 1".into()));
    }
    if cfg.n_kicks < 1 || cfg.record_every < 1 {
        return Err(Error::InvalidParams("n_kicks and record_every must be >= 1".into()));
    }
    if cfg.b <= 0.0 {
        return Err(Error::InvalidParams("b must be > 0".into()));
    }

    let base = ModelParams::new(params.kick, 0.0, params.kbar, params.m_max)?;
    let u0 = build_floquet_operator(&base);
    let spectrum = diagonalize_floquet(&u0)?;
    let n = base.lattice_len();

    let times: Vec<f64> = (1..=cfg.n_kicks)
        .filter(|t| t % cfg.record_every == 0 || *t == cfg.n_kicks)
        .map(|t| t as f64)
        .collect();

    let mut eta_all = Vec::with_capacity(cfg.eps_list.len());
    let mut fits = Vec::with_capacity(cfg.eps_list.len());

    for (eps_idx, &eps) in cfg.eps_list.iter().enumerate() {
        let run_params = ModelParams::new(params.kick, eps, params.kbar, params.m_max)?;

        let mut delta_sum = Array2::<f64>::zeros((times.len(), n));
        let mut o0_sum = vec![0.0f64; n];
        // deterministic reduction: realizations are computed in parallel in
        // fixed-size batches and summed in index order
        let batch = rayon::current_num_threads().max(1);
        let mut done = 0usize;
        while done < cfg.n_disorder {
            let upto = (done + batch).min(cfg.n_disorder);
            let outcomes: Vec<RealizationOutcome> = (done..upto)
                .into_par_iter()
                .map(|r| {
                    run_realization(
                        &run_params,
                        &spectrum,
                        &times,
                        cfg.n_kicks,
                        cfg.record_every,
                        realization_seed(cfg.seed, eps_idx, r),
                    )
                })
                .collect();
            for out in outcomes {
                delta_sum += &out.delta;
                for (acc, v) in o0_sum.iter_mut().zip(&out.o_initial) {
                    *acc += v;
                }
            }
            done = upto;
        }

        // eta_j(t) = <delta_j>(t) / <|O_j|_{eps=0}>
        let mut eta = delta_sum;
        for (j, &o0) in o0_sum.iter().enumerate() {
            let inv = 1.0 / (o0 / cfg.n_disorder as f64);
            let scale = inv / cfg.n_disorder as f64;
            eta.column_mut(j).mapv_inplace(|v| v * scale);
        }

        let candidates = log_spaced_indices(&times, cfg.fit_t_min, 160);
        let mut a_vals = Vec::with_capacity(n);
        let mut b_vals = Vec::with_capacity(n);
        let mut a_errs = Vec::with_capacity(n);
        let mut b_errs = Vec::with_capacity(n);
        let mut break_sum = 0.0;
        let mut shrunk = 0usize;
        for j in 0..n {
            let col: Vec<f64> = eta.column(j).to_vec();
            if let Some((a, b, sa, sb, brk, fell_back)) = fit_rise_with_break(&times, &col, &candidates) {
                a_vals.push(a);
                b_vals.push(b);
                a_errs.push(sa);
                b_errs.push(sb);
                break_sum += brk;
                if fell_back {
                    shrunk += 1;
                }
            }
        }
        if a_vals.is_empty() {
            return Err(Error::Fit(format!("no mode produced a usable fit at eps = {eps}")));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        fits.push(EpsFit {
            eps,
            a_mean: mean(&a_vals),
            b_mean: mean(&b_vals),
            a_stderr: mean(&a_errs),
            b_stderr: mean(&b_errs),
            mean_break_time: break_sum / a_vals.len() as f64,
            shrunk_windows: shrunk,
        });
        eta_all.push(eta);
    }

    // fit log(-B_eps) against log(eps)
    let exponent_a = {
        let usable: Vec<(f64, f64)> = fits
            .iter()
            .filter(|f| f.b_mean < 0.0)
            .map(|f| (f.eps, -f.b_mean))
            .collect();
        if usable.len() == fits.len() && usable.len() >= 2 {
            ols_loglog(&usable)
        } else {
            None
        }
    };

    let t_star = fits
        .iter()
        .map(|f| {
            let t = f.eps.powf(cfg.b / f.a_mean) * (-f.b_mean / f.a_mean).exp();
            (f.eps, t)
        })
        .collect();

    let mut meta = SeriesMeta::with_params(*params);
    meta.seed = Some(cfg.seed);
    meta.push_extra("n_disorder", cfg.n_disorder);
    meta.push_extra("n_kicks", cfg.n_kicks);
    meta.push_extra("b", cfg.b);

    Ok(NekhoroshevResult { times, eta: eta_all, fits, exponent_a, t_star, meta })
}

fn ols_loglog(points: &[(f64, f64)]) -> Option<PowerLawFit> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if xs.len() > 2 { (ss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Some(PowerLawFit {
        exponent: slope,
        prefactor_log: intercept,
        window: (points[0].0, points[points.len() - 1].0),
        stderr,
    })
}
