//! Finite-N exact diagonalization in the permutation-symmetric bosonic
//! representation: occupation-number basis on the truncated momentum
//! lattice, reflection-even sector, one-period Floquet operator, and
//! level-spacing statistics of its quasienergies.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::ModelParams;

/// Occupation vector (n_{-M}, ..., n_M) with sum_m n_m = N.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState(pub Vec<u8>);

impl FockState {
    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn reflected(&self) -> FockState {
        let mut occ = self.0.clone();
        occ.reverse();
        FockState(occ)
    }

    pub fn is_self_symmetric(&self) -> bool {
        self.0.iter().eq(self.0.iter().rev())
    }
}

/// All occupation vectors with N bosons on 2M+1 sites, lexicographic order.
pub struct FockBasis {
    pub states: Vec<FockState>,
    index: HashMap<Vec<u8>, usize>,
    pub n_bosons: usize,
    pub m_max: usize,
}

impl FockBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index.get(&state.0).copied()
    }
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Enumerates the number-conserving basis; dimension C(N + 2M, N) is checked
/// against `max_dim` before any allocation.
pub fn enumerate_basis(n_bosons: usize, m_max: usize, max_dim: usize) -> Result<FockBasis> {
    if n_bosons < 1 || m_max < 1 {
        return Err(Error::InvalidParams("need N >= 1 and M >= 1".into()));
    }
    if n_bosons > u8::MAX as usize {
        return Err(Error::InvalidParams("N exceeds occupation storage".into()));
    }
    let sites = 2 * m_max + 1;
    let count = binomial((n_bosons + sites - 1) as u64, n_bosons as u64)
        .ok_or_else(|| Error::DimensionLimit("basis count overflows".into()))?;
    if count as usize > max_dim {
        return Err(Error::DimensionLimit(format!(
            "basis dimension {count} exceeds configured maximum {max_dim}"
        )));
    }

    let mut states = Vec::with_capacity(count as usize);
    let mut occ = vec![0u8; sites];
    // lexicographic ascending: fill from the last site
    fn recurse(states: &mut Vec<FockState>, occ: &mut Vec<u8>, site: usize, remaining: u8) {
        if site + 1 == occ.len() {
            occ[site] = remaining;
            states.push(FockState(occ.clone()));
            occ[site] = 0;
            return;
        }
        for here in 0..=remaining {
            occ[site] = here;
            recurse(states, occ, site + 1, remaining - here);
        }
        occ[site] = 0;
    }
    recurse(&mut states, &mut occ, 0, n_bosons as u8);
    debug_assert_eq!(states.len(), count as usize);

    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.0.clone(), i))
        .collect();
    Ok(FockBasis { states, index, n_bosons, m_max })
}

/// Basis of the sector even under the m -> -m reflection: representatives r
/// with r <= reflect(r), each standing for |r> (self-symmetric) or
/// (|r> + |reflect(r)>)/sqrt(2).
pub struct SymmetricBasis {
    pub reps: Vec<FockState>,
    /// true when the representative pairs with a distinct reflection
    pub paired: Vec<bool>,
    index: HashMap<Vec<u8>, usize>,
    pub n_bosons: usize,
    pub m_max: usize,
}

impl SymmetricBasis {
    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn index_of_rep(&self, rep: &FockState) -> Option<usize> {
        self.index.get(&rep.0).copied()
    }

    fn sites(&self) -> usize {
        2 * self.m_max + 1
    }
}

pub fn project_even_sector(basis: &FockBasis) -> SymmetricBasis {
    let mut reps = Vec::new();
    let mut paired = Vec::new();
    for s in &basis.states {
        let r = s.reflected();
        if s.0 <= r.0 {
            paired.push(s.0 < r.0);
            reps.push(s.clone());
        }
    }
    let index = reps.iter().enumerate().map(|(i, s)| (s.0.clone(), i)).collect();
    SymmetricBasis { reps, paired, index, n_bosons: basis.n_bosons, m_max: basis.m_max }
}

/// Dimension of the odd sector (pairs only), for parity bookkeeping.
pub fn odd_sector_dim(basis: &FockBasis) -> usize {
    basis.states.iter().filter(|s| s.0 < s.reflected().0).count()
}

/// (target occupations, sqrt matrix element) of b^dag_to b_from |occ>.
fn hop(occ: &[u8], from: usize, to: usize) -> Option<(Vec<u8>, f64)> {
    if occ[from] == 0 {
        return None;
    }
    let amp = ((occ[from] as f64) * (occ[to] as f64 + 1.0)).sqrt();
    let mut out = occ.to_vec();
    out[from] -= 1;
    out[to] += 1;
    Some((out, amp))
}

/// Expansion of the total raising hop sum_m b^dag_{m+1} b_m |occ> on the
/// periodic lattice closure.
fn raise_hop(occ: &[u8]) -> Vec<(Vec<u8>, f64)> {
    let sites = occ.len();
    (0..sites)
        .filter_map(|i| hop(occ, i, (i + 1) % sites))
        .collect()
}

/// Expansion of the total lowering hop sum_m b^dag_m b_{m+1} |occ>.
fn lower_hop(occ: &[u8]) -> Vec<(Vec<u8>, f64)> {
    let sites = occ.len();
    (0..sites)
        .filter_map(|i| hop(occ, (i + 1) % sites, i))
        .collect()
}

/// Free part (diagonal in the occupation basis) and the Hermitian kick
/// generator V in the even-sector basis:
/// V = (kbar K / 2) [ sum (b^dag_{m+1} b_m + h.c.)
///     - eps/(4(N-1)) (O^+ O^- + O^- O^+) ]
/// with O^+ = sum_m b^dag_{m+1} b_m, O^- its adjoint.
pub struct HamiltonianParts {
    pub free_diagonal: Vec<f64>,
    pub kick: Array2<f64>,
}

pub fn build_hamiltonian_parts(
    params: &ModelParams,
    basis: &SymmetricBasis,
) -> Result<HamiltonianParts> {
    let n_bosons = basis.n_bosons;
    if n_bosons == 1 && params.interaction != 0.0 {
        return Err(Error::InvalidParams(
            "interaction term is undefined for N = 1 (1/(N-1) factor)".into(),
        ));
    }

    let dim = basis.dim();
    let sites = basis.sites();
    let m_max = basis.m_max as i64;

    let free_diagonal: Vec<f64> = basis
        .reps
        .iter()
        .map(|s| {
            s.0.iter()
                .enumerate()
                .map(|(i, &n)| {
                    let m = (i as i64 - m_max) as f64;
                    m * m * n as f64
                })
                .sum::<f64>()
                * 0.5
                * params.kbar
                * params.kbar
        })
        .collect();

    let hop_coef = 0.5 * params.kbar * params.kick;
    let int_coef = if n_bosons > 1 {
        params.kbar * params.kick * params.interaction / (4.0 * (n_bosons as f64 - 1.0))
    } else {
        0.0
    };

    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut kick = Array2::<f64>::zeros((dim, dim));
    let mut acc = vec![0.0f64; dim];
    let mut touched: Vec<usize> = Vec::with_capacity(4 * sites * sites);

    let deposit = |occ: Vec<u8>, amp: f64, acc: &mut [f64], touched: &mut Vec<usize>,
                   basis: &SymmetricBasis| {
        let state = FockState(occ);
        let refl = state.reflected();
        let rep = if state.0 <= refl.0 { &state } else { &refl };
        let row = basis.index_of_rep(rep).expect("hop target stays in the sector");
        let w_row = if basis.paired[row] { inv_sqrt2 } else { 1.0 };
        if acc[row] == 0.0 {
            touched.push(row);
        }
        acc[row] += w_row * amp;
    };

    for (col, rep) in basis.reps.iter().enumerate() {
        let w_col = if basis.paired[col] { inv_sqrt2 } else { 1.0 };
        let mut components: Vec<(Vec<u8>, f64)> = vec![(rep.0.clone(), w_col)];
        if basis.paired[col] {
            components.push((rep.reflected().0, w_col));
        }

        for (occ, w) in &components {
            // single-boson hops
            for (g, a) in raise_hop(occ).into_iter().chain(lower_hop(occ)) {
                deposit(g, hop_coef * w * a, &mut acc, &mut touched, basis);
            }
            // symmetrized two-boson term
            if int_coef != 0.0 {
                for (g, a) in lower_hop(occ) {
                    for (h, b) in raise_hop(&g) {
                        deposit(h, -int_coef * w * a * b, &mut acc, &mut touched, basis);
                    }
                }
                for (g, a) in raise_hop(occ) {
                    for (h, b) in lower_hop(&g) {
                        deposit(h, -int_coef * w * a * b, &mut acc, &mut touched, basis);
                    }
                }
            }
        }

        for &row in &touched {
            kick[(row, col)] = acc[row];
            acc[row] = 0.0;
        }
        touched.clear();
    }

    Ok(HamiltonianParts { free_diagonal, kick })
}

/// Same kick generator assembled in the full (unprojected) basis; reference
/// path for parity bookkeeping and matrix-element checks.
pub fn kick_matrix_full(params: &ModelParams, basis: &FockBasis) -> Result<Array2<f64>> {
    let n_bosons = basis.n_bosons;
    if n_bosons == 1 && params.interaction != 0.0 {
        return Err(Error::InvalidParams(
            "interaction term is undefined for N = 1 (1/(N-1) factor)".into(),
        ));
    }
    let dim = basis.dim();
    let hop_coef = 0.5 * params.kbar * params.kick;
    let int_coef = if n_bosons > 1 {
        params.kbar * params.kick * params.interaction / (4.0 * (n_bosons as f64 - 1.0))
    } else {
        0.0
    };
    let mut kick = Array2::<f64>::zeros((dim, dim));
    for (col, state) in basis.states.iter().enumerate() {
        let occ = &state.0;
        for (g, a) in raise_hop(occ).into_iter().chain(lower_hop(occ)) {
            let row = basis.index.get(&g).copied().expect("target in basis");
            kick[(row, col)] += hop_coef * a;
        }
        if int_coef != 0.0 {
            for (g, a) in lower_hop(occ) {
                for (h, b) in raise_hop(&g) {
                    let row = basis.index.get(&h).copied().expect("target in basis");
                    kick[(row, col)] -= int_coef * a * b;
                }
            }
            for (g, a) in raise_hop(occ) {
                for (h, b) in lower_hop(&g) {
                    let row = basis.index.get(&h).copied().expect("target in basis");
                    kick[(row, col)] -= int_coef * a * b;
                }
            }
        }
    }
    Ok(kick)
}

/// Eigendecomposition of the K-independent kick generator V(K)/ (kbar K);
/// V is linear in K, so one factorization serves a whole K grid.
pub struct KickEigen {
    pub eigvals: Array1<f64>,
    pub eigvecs: Array2<f64>,
}

/// Factorizes kick/(kbar) for the unit kick strength implied by `parts`
/// having been built at K = 1.
pub fn kick_eigen_from_unit_parts(parts: &HamiltonianParts, kbar: f64) -> Result<KickEigen> {
    let w = parts.kick.mapv(|v| v / kbar);
    let (eigvals, eigvecs) = w
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("kick eigendecomposition failed: {e}")))?;
    Ok(KickEigen { eigvals, eigvecs })
}

/// U(K) = exp(-i K W) exp(-i H_free / kbar) with W = V(K=1)/kbar factorized
/// in `ke`.
pub fn floquet_from_kick_eigen(
    ke: &KickEigen,
    kick_strength: f64,
    free_diagonal: &[f64],
    kbar: f64,
) -> Array2<Complex64> {
    let dim = ke.eigvals.len();
    // exp(-i K W) = P diag(e^{-i K lambda}) P^T, split into real/imag dgemm
    let mut scaled_re = ke.eigvecs.t().to_owned();
    let mut scaled_im = scaled_re.clone();
    for (j, mut row) in scaled_re.outer_iter_mut().enumerate() {
        let c = (kick_strength * ke.eigvals[j]).cos();
        row.mapv_inplace(|v| v * c);
    }
    for (j, mut row) in scaled_im.outer_iter_mut().enumerate() {
        let s = -(kick_strength * ke.eigvals[j]).sin();
        row.mapv_inplace(|v| v * s);
    }
    let re = ke.eigvecs.dot(&scaled_re);
    let im = ke.eigvecs.dot(&scaled_im);

    let mut u = Array2::<Complex64>::zeros((dim, dim));
    for ((i, j), v) in u.indexed_iter_mut() {
        let free = Complex64::from_polar(1.0, -free_diagonal[j] / kbar);
        *v = Complex64::new(re[(i, j)], im[(i, j)]) * free;
    }
    u
}

/// One-period unitary exp(-i V / kbar) exp(-i H_free / kbar) in the
/// even-sector basis.
pub fn build_floquet(params: &ModelParams, basis: &SymmetricBasis) -> Result<Array2<Complex64>> {
    let unit = ModelParams::new(1.0, params.interaction, params.kbar, params.m_max)?;
    let parts = build_hamiltonian_parts(&unit, basis)?;
    let ke = kick_eigen_from_unit_parts(&parts, params.kbar)?;
    // H_free does not depend on K
    Ok(floquet_from_kick_eigen(&ke, params.kick, &parts.free_diagonal, params.kbar))
}

/// Sorted quasienergies in (-pi, pi].
pub struct QuasienergySpectrum {
    pub mu: Vec<f64>,
    pub dim: usize,
}

impl QuasienergySpectrum {
    /// Wraps arbitrary phases into (-pi, pi] and sorts them.
    pub fn from_phases(phases: impl IntoIterator<Item = f64>) -> Self {
        let mut mu: Vec<f64> = phases
            .into_iter()
            .map(|p| {
                let mut x = p.rem_euclid(std::f64::consts::TAU);
                if x > std::f64::consts::PI {
                    x -= std::f64::consts::TAU;
                }
                x
            })
            .collect();
        mu.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dim = mu.len();
        Self { mu, dim }
    }
}

/// Quasienergies of a one-period unitary: phases of its eigenvalues.
pub fn quasienergies(u: &Array2<Complex64>) -> Result<QuasienergySpectrum> {
    let vals = u
        .eigvals()
        .map_err(|e| Error::Linalg(format!("unitary eigenvalues failed: {e}")))?;
    for v in vals.iter() {
        if (v.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "eigenvalue off the unit circle: |lambda| = {}",
                v.norm()
            )));
        }
    }
    Ok(QuasienergySpectrum::from_phases(vals.iter().map(|v| -v.arg())))
}

/// Average ratio of consecutive level spacings,
/// r = 1/(dim-2) sum_a min(s_a, s_{a+1}) / max(s_a, s_{a+1}).
/// Zero spacings (degeneracies) contribute 0; their count is returned too.
pub fn level_spacing_ratio_detailed(spectrum: &QuasienergySpectrum) -> Result<(f64, usize)> {
    let n = spectrum.dim;
    if n < 3 {
        return Err(Error::InvalidParams("need at least 3 levels".into()));
    }
    let mu = &spectrum.mu;
    let mut sum = 0.0;
    let mut zero_spacings = 0usize;
    for a in 0..n - 2 {
        let s1 = mu[a + 1] - mu[a];
        let s2 = mu[a + 2] - mu[a + 1];
        let max = s1.max(s2);
        if max == 0.0 {
            zero_spacings += 1;
            continue; // ratio term counted as 0
        }
        sum += s1.min(s2) / max;
    }
    Ok((sum / (n - 2) as f64, zero_spacings))
}

pub fn level_spacing_ratio(spectrum: &QuasienergySpectrum) -> Result<f64> {
    level_spacing_ratio_detailed(spectrum).map(|(r, _)| r)
}

/// One row of the r-versus-K scan.
#[derive(Debug, Clone, Copy)]
pub struct RScanRow {
    pub kick: f64,
    pub r: f64,
    /// r recomputed with the truncation enlarged to M+2.
    pub r_check: f64,
    pub dim: usize,
    pub converged: bool,
}

/// For each K on the grid: builds the even-sector Floquet operator at
/// truncation M and at M+2, extracts quasienergies, and reports the spacing
/// ratio with a truncation-convergence flag (|r_M - r_{M+2}| < 0.005).
pub fn r_vs_k_scan(
    n_bosons: usize,
    m_max: usize,
    k_grid: &[f64],
    epsilon: f64,
    kbar: f64,
    max_dim: usize,
) -> Result<Vec<RScanRow>> {
    if k_grid.is_empty() {
        return Err(Error::InvalidParams("empty K grid".into()));
    }

    let mut per_m = Vec::new();
    for m in [m_max, m_max + 2] {
        let basis = enumerate_basis(n_bosons, m, max_dim)?;
        let sym = project_even_sector(&basis);
        let unit = ModelParams::new(1.0, epsilon, kbar, m)?;
        let parts = build_hamiltonian_parts(&unit, &sym)?;
        let ke = kick_eigen_from_unit_parts(&parts, kbar)?;
        per_m.push((sym.dim(), parts, ke));
    }

    let mut rows = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        if !(k >= 0.0) {
            return Err(Error::InvalidParams(format!("K must be >= 0, got {k}")));
        }
        let mut r_pair = [0.0f64; 2];
        for (slot, (_, parts, ke)) in per_m.iter().enumerate() {
            let u = floquet_from_kick_eigen(ke, k, &parts.free_diagonal, kbar);
            let spec = quasienergies(&u)?;
            r_pair[slot] = level_spacing_ratio(&spec)?;
        }
        rows.push(RScanRow {
            kick: k,
            r: r_pair[0],
            r_check: r_pair[1],
            dim: per_m[0].0,
            converged: (r_pair[0] - r_pair[1]).abs() < 0.005,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{build_floquet_operator, diagonalize_floquet};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn basis_counts() {
        let b = enumerate_basis(2, 1, 1_000_000).unwrap();
        assert_eq!(b.dim(), 6);
        let b = enumerate_basis(1, 1, 1_000_000).unwrap();
        assert_eq!(b.dim(), 3);
        let b = enumerate_basis(3, 2, 1_000_000).unwrap();
        assert_eq!(b.dim(), 35);
        assert!(enumerate_basis(3, 2, 10).is_err());
    }

    #[test]
    fn basis_is_lexicographic_and_bijective() {
        let b = enumerate_basis(2, 1, 1_000_000).unwrap();
        for w in b.states.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
        for (i, s) in b.states.iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
            assert_eq!(s.0.iter().map(|&x| x as usize).sum::<usize>(), 2);
        }
    }

    #[test]
    fn even_sector_examples() {
        // N=1, M=1: the three single-boson states collapse to dim 2
        let b = enumerate_basis(1, 1, 1_000_000).unwrap();
        let sym = project_even_sector(&b);
        assert_eq!(sym.dim(), 2);

        // N=2, M=1: 6 states -> 4 even
        let b = enumerate_basis(2, 1, 1_000_000).unwrap();
        let sym = project_even_sector(&b);
        assert_eq!(sym.dim(), 4);

        // parity bookkeeping: dim(even) + dim(odd) = dim(full)
        for (n, m) in [(2usize, 2usize), (3, 2), (4, 1), (3, 3)] {
            let b = enumerate_basis(n, m, 1_000_000).unwrap();
            let sym = project_even_sector(&b);
            assert_eq!(sym.dim() + odd_sector_dim(&b), b.dim());
        }
    }

    #[test]
    fn representatives_precede_their_reflections() {
        let b = enumerate_basis(3, 2, 1_000_000).unwrap();
        let sym = project_even_sector(&b);
        for (rep, &paired) in sym.reps.iter().zip(&sym.paired) {
            let refl = rep.reflected();
            assert!(rep.0 <= refl.0);
            assert_eq!(paired, rep.0 < refl.0);
        }
    }

    #[test]
    fn free_diagonal_example() {
        // all bosons at m=0 carry zero free energy
        let b = enumerate_basis(2, 1, 1_000_000).unwrap();
        let sym = project_even_sector(&b);
        let p = ModelParams::new(6.0, 0.0, 1.7, 1).unwrap();
        let parts = build_hamiltonian_parts(&p, &sym).unwrap();
        let idx = sym.index_of_rep(&FockState(vec![0, 2, 0])).unwrap();
        assert_eq!(parts.free_diagonal[idx], 0.0);

        // one boson at each of m = -1, +1: e = kbar^2/2 * 2
        let idx = sym.index_of_rep(&FockState(vec![1, 0, 1])).unwrap();
        assert_relative_eq!(parts.free_diagonal[idx], 1.7 * 1.7, epsilon = 1e-14);
    }

    #[test]
    fn hop_matrix_element_example() {
        // <(0,1,1)| V |(0,2,0)> = sqrt(2 * 1) * kbar K / 2 in the full basis
        let b = enumerate_basis(2, 1, 1_000_000).unwrap();
        let p = ModelParams::new(6.0, 0.0, 1.7, 1).unwrap();
        let v = kick_matrix_full(&p, &b).unwrap();
        let col = b.index_of(&FockState(vec![0, 2, 0])).unwrap();
        let row = b.index_of(&FockState(vec![0, 1, 1])).unwrap();
        assert_relative_eq!(
            v[(row, col)],
            2f64.sqrt() * 1.7 * 6.0 / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kick_matrices_are_symmetric() {
        let p = ModelParams::new(4.0, 0.52, 1.7, 2).unwrap();
        let b = enumerate_basis(3, 2, 1_000_000).unwrap();
        let v = kick_matrix_full(&p, &b).unwrap();
        let mut worst = 0.0f64;
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                worst = worst.max((v[(i, j)] - v[(j, i)]).abs());
            }
        }
        assert!(worst < 1e-12, "full V asymmetry {worst}");

        let sym = project_even_sector(&b);
        let parts = build_hamiltonian_parts(&p, &sym).unwrap();
        let mut worst = 0.0f64;
        for i in 0..sym.dim() {
            for j in 0..sym.dim() {
                worst = worst.max((parts.kick[(i, j)] - parts.kick[(j, i)]).abs());
            }
        }
        assert!(worst < 1e-12, "sector V asymmetry {worst}");
    }

    #[test]
    fn sector_matrix_agrees_with_projected_full_matrix() {
        // project the full V onto the even combinations and compare
        let p = ModelParams::new(3.0, 0.7, 1.7, 2).unwrap();
        let b = enumerate_basis(2, 2, 1_000_000).unwrap();
        let sym = project_even_sector(&b);
        let v_full = kick_matrix_full(&p, &b).unwrap();
        let parts = build_hamiltonian_parts(&p, &sym).unwrap();

        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for (i, rep_i) in sym.reps.iter().enumerate() {
            for (j, rep_j) in sym.reps.iter().enumerate() {
                let mut comps_i = vec![(b.index_of(rep_i).unwrap(), if sym.paired[i] { inv_sqrt2 } else { 1.0 })];
                if sym.paired[i] {
                    comps_i.push((b.index_of(&rep_i.reflected()).unwrap(), inv_sqrt2));
                }
                let mut comps_j = vec![(b.index_of(rep_j).unwrap(), if sym.paired[j] { inv_sqrt2 } else { 1.0 })];
                if sym.paired[j] {
                    comps_j.push((b.index_of(&rep_j.reflected()).unwrap(), inv_sqrt2));
                }
                let mut expect = 0.0;
                for &(fi, wi) in &comps_i {
                    for &(fj, wj) in &comps_j {
                        expect += wi * wj * v_full[(fi, fj)];
                    }
                }
                assert_abs_diff_eq!(parts.kick[(i, j)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn interaction_requires_two_bosons() {
        let p = ModelParams::new(6.0, 0.5, 1.7, 1).unwrap();
        let b = enumerate_basis(1, 1, 1_000_000).unwrap();
        let sym = project_even_sector(&b);
        assert!(build_hamiltonian_parts(&p, &sym).is_err());
        assert!(kick_matrix_full(&p, &b).is_err());
    }

    #[test]
    fn floquet_unitary_and_zero_kick_diagonal() {
        let p = ModelParams::new(0.0, 0.0, 1.7, 2).unwrap();
        let b = enumerate_basis(2, 2, 1_000_000).unwrap();
        let sym = project_even_sector(&b);
        let u = build_floquet(&p, &sym).unwrap();
        // K=0: diagonal phases e^{-i H_free / kbar}
        let parts = build_hamiltonian_parts(&p, &sym).unwrap();
        for ((i, j), v) in u.indexed_iter() {
            if i == j {
                let expect = Complex64::from_polar(1.0, -parts.free_diagonal[i] / p.kbar);
                assert!((v - expect).norm() < 1e-12);
            } else {
                assert!(v.norm() < 1e-12);
            }
        }

        let p = ModelParams::new(4.0, 0.52, 1.7, 2).unwrap();
        let u = build_floquet(&p, &sym).unwrap();
        let gram = u.t().mapv(|z| z.conj()).dot(&u);
        let mut worst = 0.0f64;
        for ((i, j), v) in gram.indexed_iter() {
            let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
            worst = worst.max((v - target).norm());
        }
        assert!(worst < 1e-9, "unitarity defect {worst}");

        let spec = quasienergies(&u).unwrap();
        assert_eq!(spec.dim, sym.dim());
        for w in spec.mu.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn single_boson_reduction_matches_single_rotor_even_sector() {
        // N=1, eps=0: the many-body quasienergies must coincide with the
        // even-parity quasienergies of the single-rotor Floquet operator
        let m_max = 6;
        let p = ModelParams::new(2.5, 0.0, 1.7, m_max).unwrap();

        let b = enumerate_basis(1, m_max, 1_000_000).unwrap();
        let sym = project_even_sector(&b);
        let u = build_floquet(&p, &sym).unwrap();
        let many = quasienergies(&u).unwrap();

        let single = diagonalize_floquet(&build_floquet_operator(&p)).unwrap();
        let parities = single.parity_expectations();
        let mut even: Vec<f64> = single
            .quasienergies
            .iter()
            .zip(&parities)
            .filter(|(_, &pe)| pe > 0.0)
            .map(|(&mu, _)| mu)
            .collect();
        even.sort_by(|a, b| a.partial_cmp(b).unwrap());

        assert_eq!(many.dim, even.len());
        for (a, b) in many.mu.iter().zip(&even) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn spacing_ratio_hand_example() {
        let spec = QuasienergySpectrum::from_phases([0.0, 0.1, 0.2, 0.4]);
        let (r, zeros) = level_spacing_ratio_detailed(&spec).unwrap();
        assert_relative_eq!(r, 0.75, epsilon = 1e-12);
        assert_eq!(zeros, 0);

        let tiny = QuasienergySpectrum::from_phases([0.0, 0.1]);
        assert!(level_spacing_ratio(&tiny).is_err());
    }

    #[test]
    fn spacing_ratio_counts_degeneracies() {
        let spec = QuasienergySpectrum::from_phases([0.0, 0.0, 0.1, 0.3]);
        let (r, zeros) = level_spacing_ratio_detailed(&spec).unwrap();
        assert_eq!(zeros, 0); // first pair has max > 0: term = min/max = 0
        assert_relative_eq!(r, 0.5 / 2.0, epsilon = 1e-12);

        let spec = QuasienergySpectrum::from_phases([0.2, 0.2, 0.2]);
        let (r, zeros) = level_spacing_ratio_detailed(&spec).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(zeros, 1);
    }

    #[test]
    fn spacing_ratio_shift_invariance_up_to_boundary() {
        // shifting all phases moves only the wrap cut; r changes by O(1/N)
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 4000;
        let phases: Vec<f64> = (0..n)
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU - std::f64::consts::PI)
            .collect();
        let base = level_spacing_ratio(&QuasienergySpectrum::from_phases(phases.clone())).unwrap();
        for shift in [0.3, 1.5, 4.0] {
            let shifted = QuasienergySpectrum::from_phases(phases.iter().map(|p| p + shift));
            let r = level_spacing_ratio(&shifted).unwrap();
            assert!(
                (r - base).abs() < 10.0 / n as f64,
                "shift {shift}: r {r} vs base {base}"
            );
        }
    }

    #[test]
    fn k_scan_runs_and_flags_dimensions() {
        let rows = r_vs_k_scan(2, 2, &[0.5, 4.0], 0.52, 1.7, 100_000).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(row.r >= 0.0 && row.r <= 1.0);
            assert!(row.dim > 0);
        }
        assert!(r_vs_k_scan(2, 2, &[], 0.52, 1.7, 100_000).is_err());
    }
}
