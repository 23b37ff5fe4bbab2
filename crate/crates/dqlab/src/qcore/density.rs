//! Density matrices, partial traces, and the standard mixed-state
//! functionals (entropy, purity, fidelity).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::state::{apply_1q, apply_2q, apply_kq};
use super::{
    check_qubit_count, check_targets, spread_bits, Error, HermitianOperator, QuantumState,
    Result, TRACE_TOL, ZERO,
};

/// Eigenvalues of a density matrix may dip this far below zero from rounding
/// before entropy/eigenvalue routines treat them as zero.
pub const EIGENVALUE_FLOOR: f64 = -1e-9;

/// A mixed state: Hermitian, unit trace, positive semidefinite up to
/// [`EIGENVALUE_FLOOR`].
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &QuantumState) -> Self {
        let amps = state.amplitudes();
        let mat = amps * amps.adjoint();
        Self {
            n_qubits: state.n_qubits(),
            mat,
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        Ok(Self {
            n_qubits,
            mat: DMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        })
    }

    /// Wrap an explicit matrix, validating Hermiticity and unit trace.
    /// Positivity is not eigen-checked here; operations that need it
    /// (entropy, tomography projection) handle small negative eigenvalues
    /// explicitly.
    pub fn from_matrix(n_qubits: usize, mat: DMatrix<C64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mat.nrows(),
            });
        }
        let mut herm_dev = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                herm_dev = herm_dev.max((mat[(r, c)] - mat[(c, r)].conj()).norm());
            }
        }
        if herm_dev > 1e-10 {
            return Err(Error::NotHermitian(herm_dev));
        }
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::BadTrace(trace.re));
        }
        Ok(Self { n_qubits, mat })
    }

    /// Internal constructor bypassing validation; used for intermediate
    /// Kraus sums that only become a valid state once fully accumulated.
    pub(crate) fn from_matrix_unchecked(n_qubits: usize, mat: DMatrix<C64>) -> Self {
        debug_assert_eq!(mat.nrows(), 1usize << n_qubits);
        Self { n_qubits, mat }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Diagonal in the computational basis: outcome probabilities.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Tr(rho H)`.
    pub fn expectation(&self, op: &HermitianOperator) -> Result<f64> {
        if op.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: op.dim(),
            });
        }
        // Tr(rho H) = sum_ij rho_ij H_ji
        let mut acc = ZERO;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.mat[(i, j)] * op.matrix()[(j, i)];
            }
        }
        Ok(acc.re)
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity_with_pure(&self, psi: &QuantumState) -> Result<f64> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.dim(),
            });
        }
        let v = &self.mat * psi.amplitudes();
        Ok(psi.amplitudes().dotc(&v).re)
    }

    /// Trace distance `(1/2)‖rho − sigma‖₁`: half the sum of the absolute
    /// eigenvalues of the (Hermitian) difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let diff = &self.mat - &other.mat;
        let se = diff.symmetric_eigen();
        Ok(0.5 * se.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let se = self.mat.clone().symmetric_eigen();
        let mut v: Vec<f64> = se.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Von Neumann entropy in nats. Eigenvalues in `[EIGENVALUE_FLOOR, 0)`
    /// are clamped to zero; anything below the floor indicates a state that
    /// was never physical and panics.
    pub fn von_neumann_entropy(&self) -> f64 {
        let mut s = 0.0;
        for l in self.eigenvalues() {
            assert!(
                l >= EIGENVALUE_FLOOR,
                "density matrix has eigenvalue {l:.3e} below the physical floor"
            );
            if l > 0.0 {
                s -= l * l.ln();
            }
        }
        s
    }

    /// Trace out every qubit not in `keep`; the kept qubits are re-indexed in
    /// the order given (so `keep = [2, 0]` puts old qubit 2 at new position 0).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        check_targets(self.n_qubits, keep)?;
        if keep.is_empty() || keep.len() >= self.n_qubits {
            return Err(Error::BadPartition {
                kept: keep.len(),
                total: self.n_qubits,
            });
        }
        let rest: Vec<usize> = (0..self.n_qubits).filter(|q| !keep.contains(q)).collect();
        let kdim = 1usize << keep.len();
        let mut out = DMatrix::zeros(kdim, kdim);
        for env in 0..(1usize << rest.len()) {
            let base = spread_bits(env, &rest);
            for r in 0..kdim {
                let row = base | spread_bits(r, keep);
                for c in 0..kdim {
                    let col = base | spread_bits(c, keep);
                    out[(r, c)] += self.mat[(row, col)];
                }
            }
        }
        Ok(DensityMatrix {
            n_qubits: keep.len(),
            mat: out,
        })
    }

    /// Conjugate by a full-dimension unitary: `rho -> U rho U^dagger`.
    pub fn conjugate_by(&mut self, u: &DMatrix<C64>) -> Result<()> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        self.mat = u * &self.mat * u.adjoint();
        Ok(())
    }

    /// Apply a local unitary on `targets` from both sides.
    pub fn apply_unitary(&mut self, u: &DMatrix<C64>, targets: &[usize]) -> Result<()> {
        check_targets(self.n_qubits, targets)?;
        let local_dim = 1usize << targets.len();
        if u.nrows() != local_dim || u.ncols() != local_dim {
            return Err(Error::DimensionMismatch {
                expected: local_dim,
                got: u.nrows(),
            });
        }
        self.left_multiply(u, targets);
        self.right_multiply_adjoint(u, targets);
        Ok(())
    }

    /// `rho -> K rho` on the target qubits (no adjoint side).
    pub(crate) fn left_multiply(&mut self, k: &DMatrix<C64>, targets: &[usize]) {
        let dim = self.dim();
        match targets.len() {
            1 => {
                let m = [[k[(0, 0)], k[(0, 1)]], [k[(1, 0)], k[(1, 1)]]];
                for col in self.mat.as_mut_slice().chunks_exact_mut(dim) {
                    apply_1q(col, targets[0], &m);
                }
            }
            2 => {
                let mut m = [[ZERO; 4]; 4];
                for r in 0..4 {
                    for c in 0..4 {
                        m[r][c] = k[(r, c)];
                    }
                }
                for col in self.mat.as_mut_slice().chunks_exact_mut(dim) {
                    apply_2q(col, targets[0], targets[1], &m);
                }
            }
            _ => {
                for col in self.mat.as_mut_slice().chunks_exact_mut(dim) {
                    apply_kq(col, targets, k);
                }
            }
        }
    }

    /// `rho -> rho K^dagger` on the target qubits.
    pub(crate) fn right_multiply_adjoint(&mut self, k: &DMatrix<C64>, targets: &[usize]) {
        // (rho K^dagger)[r, c] = sum_l rho[r, l] conj(K[c, l]): each row of
        // rho transforms like a statevector under conj(K). Work on the
        // transpose-free storage by striding over rows.
        let dim = self.dim();
        let kc = k.map(|z| z.conj());
        let data = self.mat.as_mut_slice();
        match targets.len() {
            1 => {
                let m = [[kc[(0, 0)], kc[(0, 1)]], [kc[(1, 0)], kc[(1, 1)]]];
                let bit = 1usize << targets[0];
                for col in 0..dim {
                    if col & bit == 0 {
                        for row in 0..dim {
                            let i0 = col * dim + row;
                            let i1 = (col | bit) * dim + row;
                            let a0 = data[i0];
                            let a1 = data[i1];
                            data[i0] = m[0][0] * a0 + m[0][1] * a1;
                            data[i1] = m[1][0] * a0 + m[1][1] * a1;
                        }
                    }
                }
            }
            _ => {
                let local_dim = 1usize << targets.len();
                let mask: usize = targets.iter().map(|&q| 1usize << q).sum();
                let mut scratch = vec![ZERO; local_dim];
                for col in 0..dim {
                    if col & mask == 0 {
                        for row in 0..dim {
                            for lr in 0..local_dim {
                                let mut acc = ZERO;
                                for lc in 0..local_dim {
                                    acc += kc[(lr, lc)]
                                        * data[(col | spread_bits(lc, targets)) * dim + row];
                                }
                                scratch[lr] = acc;
                            }
                            for lr in 0..local_dim {
                                data[(col | spread_bits(lr, targets)) * dim + row] = scratch[lr];
                            }
                        }
                    }
                }
            }
        }
    }
}
