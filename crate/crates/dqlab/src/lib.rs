//! A desk-scale laboratory for digital quantum simulation of driven spin and
//! fermionic lattice models.
//!
//! The crate simulates small quantum registers (up to 8 qubits) exactly, with
//! dense statevectors and density matrices, and layers the full experimental
//! pipeline on top:
//!
//! * [`qcore`] — states, density matrices, Hermitian operators, channels and
//!   the dense linear algebra they need (matrix exponentials, partial traces,
//!   entropies, fidelities).
//! * [`circuit`] — the U3/U1/RY/CX gate set, circuit containers, gate
//!   counting and CNOT folding for noise amplification.
//! * [`qasm`] — a lexer, recursive-descent parser and serializer for the
//!   subset of OpenQASM 2 those gates span.
//! * [`models`] — time-dependent Hamiltonians: a driven two-level system,
//!   pulsed XXZ lattices, and an interaction quench on a four-site ring
//!   with Jordan–Wigner fermionic observables.
//! * [`evolve`] — exact Schrödinger propagation (the in-crate oracle) and a
//!   self-checking symmetric Trotter compiler targeting the gate set.
//! * [`noise`] — device calibration files, depolarizing/damping/dephasing
//!   channels, readout confusion matrices and counts sampling.
//! * [`tomo`] — full state tomography: measurement settings, data collection,
//!   linear inversion and projection back to the physical state space.
//! * [`mitigate`] — readout-error inversion, zero-noise extrapolation and
//!   symmetry-based mitigation.
//! * [`experiment`] — reproducible experiment configs, the four-lane runner
//!   (exact / ideal circuit / noisy / mitigated) and its CSV/JSON outputs.
//!
//! Basis convention used throughout: computational basis states are indexed
//! little-endian, i.e. bit `i` of the index is the state of qubit `i`, and
//! qubit 0 is the least significant bit. Rendered bitstrings put qubit 0
//! leftmost, so the string `"1100"` means qubits 0 and 1 are in `|1>`.
//!
//! With the default `parallel` feature, independent work items (time points,
//! tomography settings, extrapolation branches) run on a rayon pool; the
//! results are bit-identical to the sequential fallback because every random
//! stream is derived from a master seed and a stable task index, never from
//! execution order.

pub mod circuit;
pub mod evolve;
pub mod experiment;
pub mod mitigate;
pub mod models;
pub mod noise;
pub mod par;
pub mod qasm;
pub mod qcore;
pub mod tomo;
