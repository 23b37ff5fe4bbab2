//! Fermionic observables through the Jordan–Wigner mapping.
//!
//! Site `i` of the chain is qubit `i`; an occupied site is the excited
//! qubit state, so the number operator is `n_i = (1 − Z_i)/2` and the
//! annihilation operator carries the usual string of Z's on the sites
//! before it.
//!
//! Momenta are measured relative to the minimum of the hopping band
//! (the gauge `c_j → e^{iπ j} c_j`, which flips the sign of the hopping),
//! so the half-filled ground-state Fermi sea occupies `|k| < π/2` and the
//! Fermi jump comes out positive. The sum rule `Σ_k n_k = Tr C` is
//! unaffected by this choice.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::Error;
use crate::qcore::{self, DensityMatrix, QuantumState};

/// Jordan–Wigner annihilation operator for site `i` on `n` sites:
/// `c_i = Z_0 ⋯ Z_{i−1} σ⁻_i`.
pub fn annihilation_operator(n: usize, i: usize) -> Result<DMatrix<C64>, Error> {
    if i >= n {
        return Err(Error::SiteOutOfRange {
            site: i,
            n_sites: n,
        });
    }
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    // lowers the occupied (excited) state onto the empty one
    let sigma_minus = DMatrix::from_row_slice(2, 2, &[zero, one, zero, zero]);
    let mut factors = Vec::with_capacity(n);
    for l in 0..n {
        if l < i {
            factors.push(qcore::pauli_z());
        } else if l == i {
            factors.push(sigma_minus.clone());
        } else {
            factors.push(DMatrix::identity(2, 2));
        }
    }
    Ok(qcore::kron(&factors))
}

fn all_annihilation_operators(n: usize) -> Vec<DMatrix<C64>> {
    (0..n)
        .map(|i| annihilation_operator(n, i).expect("index in range"))
        .collect()
}

/// One-body correlation matrix `C_ij = ⟨c†_i c_j⟩` of a density matrix.
/// Hermitian with site occupations on the diagonal.
pub fn correlation_matrix(rho: &DensityMatrix) -> DMatrix<C64> {
    let n = rho.n_qubits();
    let ops = all_annihilation_operators(n);
    let products: Vec<DMatrix<C64>> = ops.iter().map(|c| c * rho.matrix()).collect();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // Tr(ρ c†_i c_j) = ⟨c_i, c_j ρ⟩_Frobenius
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in ops[i].iter().zip(products[j].iter()) {
                acc += a.conj() * b;
            }
            out[(i, j)] = acc;
        }
    }
    // symmetrize away floating-point asymmetry
    let adj = out.adjoint();
    (out + adj).scale(0.5)
}

/// One-body correlation matrix of a pure state.
pub fn correlation_matrix_pure(psi: &QuantumState) -> DMatrix<C64> {
    let n = psi.n_qubits();
    let ops = all_annihilation_operators(n);
    let vecs: Vec<nalgebra::DVector<C64>> = ops.iter().map(|c| c * psi.amplitudes()).collect();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = vecs[i].dotc(&vecs[j]);
        }
    }
    let adj = out.adjoint();
    (out + adj).scale(0.5)
}

/// Momenta compatible with anti-periodic boundary conditions on
/// `n_sites` sites: every `k` satisfies `e^{ik·n_sites} = −1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    n_sites: usize,
    k: Vec<f64>,
}

impl MomentumGrid {
    /// The full anti-periodic grid `k = (2m+1)π/N` mapped into `(−π, π]`,
    /// ascending. For four sites this is `{−3π/4, −π/4, π/4, 3π/4}`.
    pub fn anti_periodic(n_sites: usize) -> Self {
        let n = n_sites as f64;
        let mut k: Vec<f64> = (0..n_sites)
            .map(|m| {
                let raw = (2 * m + 1) as f64 * std::f64::consts::PI / n;
                if raw > std::f64::consts::PI {
                    raw - 2.0 * std::f64::consts::PI
                } else {
                    raw
                }
            })
            .collect();
        k.sort_by(f64::total_cmp);
        Self { n_sites, k }
    }

    /// A custom grid; every momentum must satisfy anti-periodicity within
    /// 1e-12 and the grid must list one momentum per site.
    pub fn new(n_sites: usize, mut k: Vec<f64>) -> Result<Self, Error> {
        if k.len() != n_sites {
            return Err(Error::GridSize {
                expected: n_sites,
                got: k.len(),
            });
        }
        for &kv in &k {
            let phase = C64::from_polar(1.0, kv * n_sites as f64);
            let deviation = (phase + C64::new(1.0, 0.0)).norm();
            if deviation > 1e-12 {
                return Err(Error::NotAntiPeriodic {
                    k: kv,
                    n_sites,
                    deviation,
                });
            }
        }
        k.sort_by(f64::total_cmp);
        Ok(Self { n_sites, k })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k
    }
}

/// Momentum distribution `n_k = (1/N) Σ_ij C_ij e^{i(k+π)(r_i − r_j)}`
/// (band-minimum gauge; see the module docs). Returns `(k, n_k)` pairs in
/// grid order. Requires `C` Hermitian within 1e-9, which makes every `n_k`
/// real.
pub fn momentum_distribution(
    c: &DMatrix<C64>,
    grid: &MomentumGrid,
) -> Result<Vec<(f64, f64)>, Error> {
    let n = grid.n_sites();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::Core(qcore::Error::DimensionMismatch {
            expected: n,
            got: c.nrows(),
        }));
    }
    let herm_dev = (c - c.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if herm_dev > 1e-9 {
        return Err(Error::NonHermitianCorrelation(herm_dev));
    }
    let mut out = Vec::with_capacity(n);
    for &k in grid.k_values() {
        let kappa = k + std::f64::consts::PI;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let phase = C64::from_polar(1.0, kappa * (i as f64 - j as f64));
                acc += c[(i, j)] * phase;
            }
        }
        out.push((k, acc.re / n as f64));
    }
    Ok(out)
}

/// Total particle number `Tr C`.
pub fn filling(c: &DMatrix<C64>) -> f64 {
    c.diagonal().iter().map(|z| z.re).sum()
}

/// Sharpness of the Fermi surface: mean occupation inside `|k| < π/2`
/// minus mean occupation outside (`|k| > π/2`).
pub fn fermi_jump(nk: &[(f64, f64)]) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mean = |vals: Vec<f64>| {
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let inner = mean(
        nk.iter()
            .filter(|(k, _)| k.abs() < half_pi)
            .map(|&(_, v)| v)
            .collect(),
    );
    let outer = mean(
        nk.iter()
            .filter(|(k, _)| k.abs() > half_pi)
            .map(|&(_, v)| v)
            .collect(),
    );
    inner - outer
}
