//! Completely positive trace-preserving maps in Kraus form.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{check_targets, DensityMatrix, Error, Result, CPTP_TOL};

/// A quantum channel given by Kraus operators `{K_m}` acting on a fixed
/// number of qubits (1 or 2 in practice). `sum_m K_m^dagger K_m = I` is
/// enforced on construction within [`CPTP_TOL`](super::CPTP_TOL).
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    n_target_qubits: usize,
    kraus: Vec<DMatrix<C64>>,
}

impl QuantumChannel {
    pub fn new(kraus: Vec<DMatrix<C64>>) -> Result<Self> {
        let dim = match kraus.first() {
            Some(k) => k.nrows(),
            None => {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: 0,
                })
            }
        };
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: dim,
            });
        }
        let n_target_qubits = dim.trailing_zeros() as usize;
        let mut completeness = DMatrix::<C64>::zeros(dim, dim);
        for k in &kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: k.nrows(),
                });
            }
            completeness += k.adjoint() * k;
        }
        let dev = (&completeness - DMatrix::<C64>::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > CPTP_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self {
            n_target_qubits,
            kraus,
        })
    }

    /// The identity channel on `n` qubits (single Kraus operator `I`).
    pub fn identity(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n_target_qubits: n,
            kraus: vec![DMatrix::identity(dim, dim)],
        }
    }

    pub fn n_target_qubits(&self) -> usize {
        self.n_target_qubits
    }

    pub fn kraus_operators(&self) -> &[DMatrix<C64>] {
        &self.kraus
    }

    /// Apply to `rho` on the listed target qubits:
    /// `rho -> sum_m K_m rho K_m^dagger`.
    pub fn apply(&self, rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        check_targets(rho.n_qubits(), targets)?;
        if targets.len() != self.n_target_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_target_qubits,
                got: targets.len(),
            });
        }
        let mut acc: Option<DensityMatrix> = None;
        for k in &self.kraus {
            let mut term = rho.clone();
            term.left_multiply(k, targets);
            term.right_multiply_adjoint(k, targets);
            acc = Some(match acc {
                None => term,
                Some(a) => {
                    let mat = a.matrix() + term.matrix();
                    // Intermediate sums are not unit-trace; assemble raw.
                    DensityMatrix::from_matrix_unchecked(rho.n_qubits(), mat)
                }
            });
        }
        Ok(acc.expect("at least one Kraus operator"))
    }

    /// Compose with another channel on the same targets: `other` after `self`.
    pub fn then(&self, other: &QuantumChannel) -> Result<QuantumChannel> {
        if other.n_target_qubits != self.n_target_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_target_qubits,
                got: other.n_target_qubits,
            });
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for b in &other.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        QuantumChannel::new(kraus)
    }
}
