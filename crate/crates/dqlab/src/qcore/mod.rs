//! Dense quantum-state primitives: statevectors, density matrices, Hermitian
//! operators, and completely positive maps.
//!
//! Everything here is exact dense linear algebra over `Complex64`. Registers
//! are capped at [`MAX_QUBITS`] qubits (256 amplitudes), which keeps every
//! operation comfortably in the microsecond-to-millisecond range and lets the
//! rest of the crate treat matrix exponentials and eigendecompositions as
//! cheap building blocks.
//!
//! Index convention: basis state `|i>` assigns bit `q` of `i` to qubit `q`
//! (little-endian, qubit 0 least significant). When a gate matrix acts on a
//! list of target qubits, `targets[0]` maps to the least significant bit of
//! the local index into that matrix.

mod channel;
mod density;
mod operator;
mod state;

pub use channel::QuantumChannel;
pub use density::DensityMatrix;
pub use operator::HermitianOperator;
pub use state::QuantumState;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Largest register size the dense representations accept.
pub const MAX_QUBITS: usize = 8;

/// Errors from state and operator construction or application.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("register of {0} qubits exceeds the supported maximum of {max}", max = MAX_QUBITS)]
    TooManyQubits(usize),
    #[error("dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("qubit index {qubit} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("target qubit list contains duplicates: {0:?}")]
    DuplicateTargets(Vec<usize>),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("Kraus operators do not satisfy the completeness relation (max deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("state has vanishing norm")]
    ZeroNorm,
    #[error("trace is {0:.6} but must be 1 within {tol:.1e}", tol = TRACE_TOL)]
    BadTrace(f64),
    #[error("cannot keep {kept} qubits of a {total}-qubit register")]
    BadPartition { kept: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Tolerance for Hermiticity checks on operator construction.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Tolerance on the trace of a density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Tolerance for the Kraus completeness relation.
pub const CPTP_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits(n_qubits));
    }
    Ok(())
}

pub(crate) fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    for &q in targets {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
        }
    }
    for (a, &q) in targets.iter().enumerate() {
        if targets[a + 1..].contains(&q) {
            return Err(Error::DuplicateTargets(targets.to_vec()));
        }
    }
    Ok(())
}

/// 2x2 identity.
pub fn pauli_i() -> DMatrix<C64> {
    DMatrix::identity(2, 2)
}

/// Pauli X.
pub fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// Pauli Y.
pub fn pauli_y() -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO],
    )
}

/// Pauli Z.
pub fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Kronecker product respecting the little-endian qubit order: `kron(&[a, b])`
/// applies `a` to qubit 0 and `b` to qubit 1 of a two-qubit register.
///
/// (nalgebra's `kronecker` puts its first factor on the most significant
/// index, so the slice is folded in reverse.)
pub fn kron(factors: &[DMatrix<C64>]) -> DMatrix<C64> {
    let mut out = DMatrix::identity(1, 1);
    for f in factors.iter().rev() {
        out = out.kronecker(f);
    }
    out
}

/// Embed `op` (acting on `targets`, with `targets[0]` the least significant
/// local bit) into the full `n_qubits` space.
pub fn embed(n_qubits: usize, op: &DMatrix<C64>, targets: &[usize]) -> Result<DMatrix<C64>> {
    check_qubit_count(n_qubits)?;
    check_targets(n_qubits, targets)?;
    let k = targets.len();
    let local_dim = 1usize << k;
    if op.nrows() != local_dim || op.ncols() != local_dim {
        return Err(Error::DimensionMismatch {
            expected: local_dim,
            got: op.nrows(),
        });
    }
    let dim = 1usize << n_qubits;
    let mut out = DMatrix::zeros(dim, dim);
    let rest: Vec<usize> = (0..n_qubits).filter(|q| !targets.contains(q)).collect();
    for env in 0..(1usize << rest.len()) {
        let mut base = 0usize;
        for (pos, &q) in rest.iter().enumerate() {
            if env >> pos & 1 == 1 {
                base |= 1 << q;
            }
        }
        for lr in 0..local_dim {
            let row = base | spread_bits(lr, targets);
            for lc in 0..local_dim {
                let col = base | spread_bits(lc, targets);
                out[(row, col)] = op[(lr, lc)];
            }
        }
    }
    Ok(out)
}

/// Scatter the bits of a local index onto the global bit positions `targets`.
pub(crate) fn spread_bits(local: usize, targets: &[usize]) -> usize {
    let mut out = 0usize;
    for (pos, &q) in targets.iter().enumerate() {
        if local >> pos & 1 == 1 {
            out |= 1 << q;
        }
    }
    out
}

/// Largest element-wise deviation between `a` and `e^{i phi} b`, with the
/// phase chosen from the largest-magnitude entry of `a`. Zero means the two
/// matrices are equal up to a global phase.
pub fn max_deviation_up_to_phase(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in phase comparison");
    let mut best = 0.0f64;
    let mut idx = (0usize, 0usize);
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            if a[(r, c)].norm() > best {
                best = a[(r, c)].norm();
                idx = (r, c);
            }
        }
    }
    if best == 0.0 {
        return b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    let phase = b[idx] / a[idx];
    let phase = if phase.norm() == 0.0 {
        ONE
    } else {
        phase / phase.norm()
    };
    let mut max_dev = 0.0f64;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            max_dev = max_dev.max((a[(r, c)] * phase - b[(r, c)]).norm());
        }
    }
    max_dev
}

/// Render a basis index as a bitstring with qubit 0 leftmost.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parse a bitstring (qubit 0 leftmost) back into a basis index.
pub fn bitstring_index(s: &str) -> Option<usize> {
    let mut idx = 0usize;
    for (q, ch) in s.chars().enumerate() {
        match ch {
            '1' => idx |= 1 << q,
            '0' => {}
            _ => return None,
        }
    }
    Some(idx)
}
