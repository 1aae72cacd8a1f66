//! Synthetic reference spectra for the level-spacing diagnostics: Poisson
//! (uncorrelated levels, integrable-like) and the circular orthogonal
//! ensemble of symmetric unitaries (ergodic, time-reversal invariant).

use ndarray::Array2;
use ndarray_linalg::{EigVals, QR};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::manybody::QuasienergySpectrum;

/// `dim` quasienergies drawn i.i.d. uniformly on (-pi, pi].
pub fn poisson_spectrum(dim: usize, seed: u64) -> QuasienergySpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = rand::distr::Uniform::new(-std::f64::consts::PI, std::f64::consts::PI).unwrap();
    QuasienergySpectrum::from_phases((0..dim).map(|_| uniform.sample(&mut rng)))
}

/// Quasienergies of one COE matrix U^T U with U Haar-distributed: sample a
/// complex Ginibre matrix, orthonormalize it (QR with the phase convention
/// that makes Q Haar), and symmetrize.
pub fn coe_spectrum(dim: usize, seed: u64) -> Result<QuasienergySpectrum> {
    if dim < 3 {
        return Err(Error::InvalidParams("COE sample needs dim >= 3".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ginibre = Array2::<Complex64>::zeros((dim, dim));
    for v in ginibre.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v = Complex64::new(re, im);
    }
    let (q, r) = ginibre
        .qr()
        .map_err(|e| Error::Linalg(format!("QR failed: {e}")))?;
    // absorb the R diagonal phases so Q is Haar rather than QR-gauge-fixed
    let mut haar = q;
    for (j, mut col) in haar.columns_mut().into_iter().enumerate() {
        let d = r[(j, j)];
        let phase = if d.norm() == 0.0 { Complex64::ONE } else { d / d.norm() };
        col.mapv_inplace(|v| v * phase);
    }

    let symmetric = haar.t().dot(&haar); // U^T U, symmetric unitary
    let vals = symmetric
        .eigvals()
        .map_err(|e| Error::Linalg(format!("COE eigenvalues failed: {e}")))?;
    Ok(QuasienergySpectrum::from_phases(vals.iter().map(|v| v.arg())))
}
