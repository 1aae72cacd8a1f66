//! Post-processing of stroboscopic trajectories: coarse-grained noise
//! statistics of the order parameter, log-log power-law fits, and the
//! closed-form slowed-diffusion reference.

use crate::error::{Error, Result};
use crate::series::{ComplexSeries, RealSeries, SeriesMeta};

/// Coarse-graining window (half-width, in kicks) and output stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoarseGrainConfig {
    pub window: u64,
    pub stride: u64,
}

impl CoarseGrainConfig {
    pub fn new(window: u64, stride: u64) -> Result<Self> {
        if window < 1 {
            return Err(Error::InvalidParams("coarse-grain window must be >= 1".into()));
        }
        if stride < 1 {
            return Err(Error::InvalidParams("stride must be >= 1".into()));
        }
        Ok(Self { window, stride })
    }
}

/// Result of an ordinary least-squares fit of log(value) vs log(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor_log: f64,
    pub window: (f64, f64),
    pub stderr: f64,
}

/// Effective noise strength sigma(t) = g eps^2 K^2 * <(Re F)^2> averaged over
/// the window [t - dt, t + dt], emitted on the stride grid. With `centered`
/// the window mean of Re F is subtracted before squaring.
pub fn sigma_series(
    order: &ComplexSeries,
    cfg: &CoarseGrainConfig,
    epsilon: f64,
    kick: f64,
    g: f64,
    centered: bool,
) -> Result<RealSeries> {
    if g <= 0.0 {
        return Err(Error::InvalidParams("normalization g must be > 0".into()));
    }
    let n = order.len();
    let full = 2 * cfg.window as usize + 1;
    if full > n {
        return Err(Error::Series(format!(
            "coarse-grain window 2*{}+1 exceeds series length {}",
            cfg.window, n
        )));
    }
    // The stroboscopic F series is sampled at every kick, so window arithmetic
    // can be done on indices.
    let re: Vec<f64> = order.values().iter().map(|f| f.re).collect();
    let mut prefix_sq = vec![0.0f64; n + 1];
    let mut prefix = vec![0.0f64; n + 1];
    for (i, &x) in re.iter().enumerate() {
        prefix_sq[i + 1] = prefix_sq[i] + x * x;
        prefix[i + 1] = prefix[i] + x;
    }

    let scale = g * epsilon * epsilon * kick * kick;
    let mut meta = order.meta.clone();
    meta.push_extra("coarse_grain_window", cfg.window);
    meta.push_extra("coarse_grain_stride", cfg.stride);
    meta.push_extra("centered", centered);
    let mut out = RealSeries::with_meta("sigma", meta);

    let w = cfg.window as usize;
    let times = order.times();
    let mut center = w;
    while center + w < n {
        let lo = center - w;
        let hi = center + w + 1;
        let count = (hi - lo) as f64;
        let mean_sq = (prefix_sq[hi] - prefix_sq[lo]) / count;
        let value = if centered {
            let mean = (prefix[hi] - prefix[lo]) / count;
            mean_sq - mean * mean
        } else {
            mean_sq
        };
        out.push(times[center], scale * value);
        center += cfg.stride as usize;
    }
    Ok(out)
}

/// Ordinary least squares on (log t, log value) over samples with
/// t in [t_min, t_max]. All values in the window must be positive and the
/// window must hold at least 10 samples.
pub fn fit_power_law(series: &RealSeries, t_min: f64, t_max: f64) -> Result<PowerLawFit> {
    if t_min >= t_max {
        return Err(Error::InvalidParams("fit window requires t_min < t_max".into()));
    }
    let range = series.window_indices(t_min, t_max);
    let times = &series.times()[range.clone()];
    let values = &series.values()[range];
    if times.len() < 10 {
        return Err(Error::Fit(format!(
            "need at least 10 samples in [{t_min}, {t_max}], found {}",
            times.len()
        )));
    }
    if times.iter().any(|&t| t <= 0.0) || values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Fit("nonpositive samples in fit window".into()));
    }

    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate fit window (single time)".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let stderr = if xs.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { 0.0 };

    Ok(PowerLawFit { exponent: slope, prefactor_log: intercept, window: (t_min, t_max), stderr })
}

/// Integrates d(m^2)/dt = D / m from m(0) = m0 and returns m_t^2 sampled at
/// t = 0 plus a geometric grid up to `t_final`. The closed-form solution is
/// [`diffusion_closed_form`].
pub fn diffusion_ode_oracle(d_coeff: f64, m0: f64, t_final: f64) -> Result<RealSeries> {
    if d_coeff <= 0.0 || m0 <= 0.0 || t_final <= 0.0 {
        return Err(Error::InvalidParams("diffusion oracle needs D > 0, m0 > 0, t_final > 0".into()));
    }

    let n_samples = 400usize;
    let t_first = t_final * 1e-4;
    let ratio = (t_final / t_first).powf(1.0 / (n_samples - 1) as f64);
    let mut sample_times = Vec::with_capacity(n_samples + 1);
    sample_times.push(0.0);
    let mut t = t_first;
    for _ in 0..n_samples {
        sample_times.push(t);
        t *= ratio;
    }
    *sample_times.last_mut().unwrap() = t_final;

    let mut meta = SeriesMeta::default();
    meta.push_extra("d_coeff", d_coeff);
    meta.push_extra("m0", m0);
    let mut out = RealSeries::with_meta("m_sq", meta);

    let rhs = |y: f64| d_coeff / y.sqrt();
    let mut y = m0 * m0;
    let mut t_now = 0.0;
    out.push(0.0, y);
    for &t_next in &sample_times[1..] {
        let span = t_next - t_now;
        // step limited by the local growth time scale y^(3/2)/D
        let h_target = (0.02 * y.powf(1.5) / d_coeff).min(span);
        let n_steps = (span / h_target).ceil().max(1.0) as usize;
        let h = span / n_steps as f64;
        for _ in 0..n_steps {
            let k1 = rhs(y);
            let k2 = rhs(y + 0.5 * h * k1);
            let k3 = rhs(y + 0.5 * h * k2);
            let k4 = rhs(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t_now = t_next;
        out.push(t_now, y);
    }
    Ok(out)
}

/// m_t^2 = (m0^3 + 3/2 D t)^(2/3).
pub fn diffusion_closed_form(d_coeff: f64, m0: f64, t: f64) -> f64 {
    (m0.powi(3) + 1.5 * d_coeff * t).powf(2.0 / 3.0)
}

/// Fits the energy growth of a noisy-kick run; the contract for
/// time-translation-invariant kick noise is a diffusive exponent near 1.
/// Flat series (no appreciable growth over the window, e.g. a noiseless
/// localized run) are rejected rather than fitted.
pub fn constant_sigma_check(energy: &RealSeries, t_min: f64, t_max: f64) -> Result<PowerLawFit> {
    let range = energy.window_indices(t_min, t_max);
    let vals = &energy.values()[range];
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::Fit("nonpositive energy in fit window".into()));
    }
    let max = vals.iter().cloned().fold(f64::MIN, f64::max);
    let min = vals.iter().cloned().fold(f64::MAX, f64::min);
    if !vals.is_empty() && max / min < 10f64.powf(0.5) {
        return Err(Error::Fit(format!(
            "energy is flat over the window (dynamic range {:.3} < half a decade); \
             no power law to fit",
            max / min
        )));
    }
    fit_power_law(energy, t_min, t_max)
}
