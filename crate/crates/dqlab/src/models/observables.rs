//! Spin observables computed from computational-basis probabilities.
//!
//! All magnetizations are diagonal in the computational basis, so they
//! take a probability vector (`QuantumState::probabilities` or
//! `DensityMatrix::diagonal` real parts) rather than a full state. The
//! spin-up state is the unexcited qubit: `⟨S^z⟩ = +1/2` for `|0⟩`.

use crate::qcore::QuantumState;

fn z_expectation(probs: &[f64], site: usize) -> f64 {
    let mut acc = 0.0;
    for (idx, &p) in probs.iter().enumerate() {
        let bit = (idx >> site) & 1;
        acc += p * if bit == 0 { 1.0 } else { -1.0 };
    }
    acc
}

/// `⟨S^z_site⟩ = ⟨Z_site⟩ / 2`.
pub fn site_magnetization(probs: &[f64], site: usize) -> f64 {
    z_expectation(probs, site) / 2.0
}

/// `Σ_i ⟨S^z_i⟩`.
pub fn total_magnetization(probs: &[f64]) -> f64 {
    let n = probs.len().trailing_zeros() as usize;
    (0..n).map(|i| site_magnetization(probs, i)).sum()
}

/// Alternating-sign magnetization `Σ_i (−1)^{i+1} ⟨S^z_i⟩` with the sign
/// starting at −1 on site 0 (equivalently `(−1)^i` when numbering sites
/// from 1).
pub fn staggered_magnetization(probs: &[f64]) -> f64 {
    let n = probs.len().trailing_zeros() as usize;
    (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            sign * site_magnetization(probs, i)
        })
        .sum()
}

/// Fully polarized product state (every spin up).
pub fn all_up_state(n_qubits: usize) -> Result<QuantumState, crate::qcore::Error> {
    QuantumState::zero(n_qubits)
}

/// Alternating product state `|↑↓↑↓…⟩`: odd-numbered qubits flipped.
pub fn neel_state(n_qubits: usize) -> Result<QuantumState, crate::qcore::Error> {
    let mut index = 0usize;
    for i in (1..n_qubits).step_by(2) {
        index |= 1 << i;
    }
    QuantumState::basis_state(n_qubits, index)
}
