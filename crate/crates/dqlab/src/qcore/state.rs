//! Pure states as dense little-endian statevectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::{
    check_qubit_count, check_targets, spread_bits, DensityMatrix, Error, HermitianOperator,
    Result, ZERO,
};

/// A normalized pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amps: DVector<C64>,
}

impl QuantumState {
    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis_state(n_qubits, 0)
    }

    /// The computational basis state `|index>`.
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: index,
            });
        }
        let mut amps = DVector::from_element(dim, ZERO);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Build a state from raw amplitudes, normalizing them. Fails on a zero
    /// vector or a length that is not a power of two within the size cap.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amps.len(),
            });
        }
        let mut amps = DVector::from_vec(amps);
        let norm = amps.norm();
        if norm < 1e-14 {
            return Err(Error::ZeroNorm);
        }
        amps /= C64::new(norm, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wrap an amplitude vector that is already normalized (used by the
    /// integrators, which preserve the norm themselves).
    pub(crate) fn from_vector_unchecked(n_qubits: usize, amps: DVector<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &QuantumState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Probabilities of every computational basis outcome.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Expectation value `<psi|H|psi>`.
    pub fn expectation(&self, op: &HermitianOperator) -> Result<f64> {
        if op.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: 1 << op.n_qubits(),
            });
        }
        let v = op.matrix() * &self.amps;
        Ok(self.amps.dotc(&v).re)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }

    /// Apply a full-dimension unitary in place (no unitarity check; callers
    /// constructing from `HermitianOperator::expm` get unitarity for free).
    pub fn apply_matrix(&mut self, u: &DMatrix<C64>) -> Result<()> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        let new = u * &self.amps;
        self.amps = new;
        Ok(())
    }

    /// Apply a `2^k x 2^k` unitary to the listed target qubits; `targets[0]`
    /// is the least significant bit of the local index.
    pub fn apply_unitary(&mut self, u: &DMatrix<C64>, targets: &[usize]) -> Result<()> {
        check_targets(self.n_qubits, targets)?;
        let local_dim = 1usize << targets.len();
        if u.nrows() != local_dim || u.ncols() != local_dim {
            return Err(Error::DimensionMismatch {
                expected: local_dim,
                got: u.nrows(),
            });
        }
        match targets.len() {
            1 => {
                let m = [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]];
                apply_1q(self.amps.as_mut_slice(), targets[0], &m);
            }
            2 => {
                let mut m = [[ZERO; 4]; 4];
                for r in 0..4 {
                    for c in 0..4 {
                        m[r][c] = u[(r, c)];
                    }
                }
                apply_2q(self.amps.as_mut_slice(), targets[0], targets[1], &m);
            }
            _ => apply_kq(self.amps.as_mut_slice(), targets, u),
        }
        Ok(())
    }

    pub(crate) fn apply_1q(&mut self, q: usize, m: &[[C64; 2]; 2]) {
        apply_1q(self.amps.as_mut_slice(), q, m);
    }

    pub(crate) fn apply_2q(&mut self, qa: usize, qb: usize, m: &[[C64; 4]; 4]) {
        apply_2q(self.amps.as_mut_slice(), qa, qb, m);
    }
}

/// In-place single-qubit update of a statevector slice.
pub(crate) fn apply_1q(amps: &mut [C64], q: usize, m: &[[C64; 2]; 2]) {
    let bit = 1usize << q;
    for base in 0..amps.len() {
        if base & bit == 0 {
            let a0 = amps[base];
            let a1 = amps[base | bit];
            amps[base] = m[0][0] * a0 + m[0][1] * a1;
            amps[base | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// In-place two-qubit update; `qa` is the least significant local bit.
pub(crate) fn apply_2q(amps: &mut [C64], qa: usize, qb: usize, m: &[[C64; 4]; 4]) {
    let ba = 1usize << qa;
    let bb = 1usize << qb;
    for base in 0..amps.len() {
        if base & ba == 0 && base & bb == 0 {
            let idx = [base, base | ba, base | bb, base | ba | bb];
            let a = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
            for r in 0..4 {
                amps[idx[r]] = m[r][0] * a[0] + m[r][1] * a[1] + m[r][2] * a[2] + m[r][3] * a[3];
            }
        }
    }
}

/// Generic k-qubit update used for k > 2.
pub(crate) fn apply_kq(amps: &mut [C64], targets: &[usize], u: &DMatrix<C64>) {
    let k = targets.len();
    let local_dim = 1usize << k;
    let mask: usize = targets.iter().map(|&q| 1usize << q).sum();
    let mut scratch = vec![ZERO; local_dim];
    for base in 0..amps.len() {
        if base & mask == 0 {
            for lr in 0..local_dim {
                let mut acc = ZERO;
                for lc in 0..local_dim {
                    acc += u[(lr, lc)] * amps[base | spread_bits(lc, targets)];
                }
                scratch[lr] = acc;
            }
            for lr in 0..local_dim {
                amps[base | spread_bits(lr, targets)] = scratch[lr];
            }
        }
    }
}
