//! Hermitian operators with exact spectral machinery.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{check_qubit_count, Error, QuantumState, Result, HERMITICITY_TOL};

/// A Hermitian operator on an `n_qubits` register.
///
/// Hermiticity is validated on construction (tolerance
/// [`HERMITICITY_TOL`](super::HERMITICITY_TOL)), so spectral routines can
/// assume a real spectrum and orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    n_qubits: usize,
    mat: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn new(n_qubits: usize, mat: DMatrix<C64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mat.nrows(),
            });
        }
        let mut max_dev = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                max_dev = max_dev.max((mat[(r, c)] - mat[(c, r)].conj()).norm());
            }
        }
        if max_dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian(max_dev));
        }
        Ok(Self { n_qubits, mat })
    }

    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        Ok(Self {
            n_qubits,
            mat: DMatrix::zeros(dim, dim),
        })
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

    /// Eigenvalues in ascending order with matching orthonormal eigenvector
    /// columns.
    pub fn eigendecompose(&self) -> (Vec<f64>, DMatrix<C64>) {
        let se = self.mat.clone().symmetric_eigen();
        let dim = self.dim();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(dim, dim);
        for (col, &i) in order.iter().enumerate() {
            vectors.set_column(col, &se.eigenvectors.column(i));
        }
        (values, vectors)
    }

    /// The unitary `exp(-i * scale * H)`.
    pub fn expm(&self, scale: f64) -> DMatrix<C64> {
        let (values, vectors) = self.eigendecompose();
        let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&l| C64::from_polar(1.0, -scale * l)),
        ));
        &vectors * phases * vectors.adjoint()
    }

    /// Lowest eigenvalue and its eigenvector as a normalized pure state.
    ///
    /// For a degenerate ground space this returns one (deterministic)
    /// eigenvector of the lowest eigenvalue.
    pub fn ground_state(&self) -> (f64, QuantumState) {
        let (values, vectors) = self.eigendecompose();
        let amps: Vec<C64> = vectors.column(0).iter().copied().collect();
        let state = QuantumState::from_amplitudes(self.n_qubits, amps)
            .expect("eigenvector of a validated operator is normalized");
        (values[0], state)
    }

    /// `self + scale * other`, dimension-checked.
    pub fn add_scaled(&self, other: &HermitianOperator, scale: f64) -> Result<HermitianOperator> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(HermitianOperator {
            n_qubits: self.n_qubits,
            mat: &self.mat + other.mat.scale(scale),
        })
    }
}
