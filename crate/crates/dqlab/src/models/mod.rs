//! Physical systems as time-dependent Hamiltonian builders, plus their
//! observables.
//!
//! Three families are provided:
//!
//! * [`RabiModel`] — a single spin-1/2 in a precessing magnetic field;
//! * [`SpinLattice`] — XXZ-coupled spin-1/2 sites with optional Gaussian
//!   pulse drives and static fields per site;
//! * [`QuenchModel`] — a ring of spins whose Ising coupling switches on at
//!   `t = 0`, the spin picture of an interaction quench for hard-core
//!   fermions under the Jordan–Wigner mapping.
//!
//! Spin operators are `S = σ/2` throughout. Every builder exposes the same
//! two views of the system: the dense Hermitian matrix at a given time
//! ([`Hamiltonian::at`]) and the field/bond term lists
//! ([`TrotterModel::fields`] / [`TrotterModel::bonds`]) that the circuit
//! compiler consumes. Both views are assembled from the same term data, so
//! the compiled circuits and the dense reference evolution always describe
//! the same system.

mod fermion;
mod observables;
mod pulse;
mod quench;
mod rabi;
mod spin;

pub use fermion::{
    annihilation_operator, correlation_matrix, correlation_matrix_pure, fermi_jump, filling,
    momentum_distribution, MomentumGrid,
};
pub use observables::{
    all_up_state, neel_state, site_magnetization, staggered_magnetization, total_magnetization,
};
pub use pulse::{Polarization, PulseWaveform};
pub use quench::{QuenchModel, QuenchSchedule};
pub use rabi::{rabi_hamiltonian, RabiModel, RabiParams};
pub use spin::{spin_hamiltonian, SpinLattice};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::qcore::{self, HermitianOperator};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("site count {got} outside supported range 1..={max}")]
    BadSiteCount { got: usize, max: usize },
    #[error("bond ({i}, {j}) invalid for {n_sites} sites")]
    BadBond { i: usize, j: usize, n_sites: usize },
    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("pulse width tau must be positive, got {0}")]
    BadTau(f64),
    #[error("field magnitude must be non-negative, got {0}")]
    NegativeFieldMagnitude(f64),
    #[error("transverse coupling J_perp must be nonzero")]
    ZeroCoupling,
    #[error("momentum {k} violates anti-periodicity on {n_sites} sites (|e^(ikN)+1| = {deviation:.3e})")]
    NotAntiPeriodic {
        k: f64,
        n_sites: usize,
        deviation: f64,
    },
    #[error("momentum grid lists {got} momenta for {expected} sites")]
    GridSize { expected: usize, got: usize },
    #[error("correlation matrix is not Hermitian (max deviation {0:.3e})")]
    NonHermitianCorrelation(f64),
    #[error(transparent)]
    Core(#[from] qcore::Error),
}

/// Exchange coupling between two sites:
/// `J_perp (SxSx + SySy) + J_z SzSz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondTerm {
    pub i: usize,
    pub j: usize,
    pub j_perp: f64,
    pub j_z: f64,
}

/// Magnetic field on one site: `h · S = (h_x X + h_y Y + h_z Z) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldTerm {
    pub site: usize,
    pub h: [f64; 3],
}

/// A (possibly time-dependent) Hermitian generator of dynamics.
pub trait Hamiltonian {
    fn n_qubits(&self) -> usize;

    /// Dense operator at time `t`.
    fn at(&self, t: f64) -> HermitianOperator;

    /// Returns `true` only if `H(t)` is known to be constant over the whole
    /// closed interval `[t0, t1]`; used as a fast path by the reference
    /// integrator. `false` is always safe.
    fn constant_on(&self, t0: f64, t1: f64) -> bool {
        let _ = (t0, t1);
        false
    }
}

/// A Hamiltonian expressible as two-site exchange bonds plus single-site
/// fields, the shape the gate compiler understands.
pub trait TrotterModel: Hamiltonian {
    fn bonds(&self, t: f64) -> Vec<BondTerm>;
    fn fields(&self, t: f64) -> Vec<FieldTerm>;
}

/// Dense Hermitian matrix for a term list, with `S = σ/2`:
/// bonds contribute `J_perp/4 (XX + YY) + J_z/4 ZZ`, fields `h·σ/2`.
pub fn assemble(n_qubits: usize, bonds: &[BondTerm], fields: &[FieldTerm]) -> HermitianOperator {
    let dim = 1usize << n_qubits;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    let x = qcore::pauli_x();
    let y = qcore::pauli_y();
    let z = qcore::pauli_z();
    for b in bonds {
        let xx = qcore::kron(&[x.clone(), x.clone()]);
        let yy = qcore::kron(&[y.clone(), y.clone()]);
        let zz = qcore::kron(&[z.clone(), z.clone()]);
        let local = xx.scale(b.j_perp / 4.0) + yy.scale(b.j_perp / 4.0) + zz.scale(b.j_z / 4.0);
        let emb = qcore::embed(n_qubits, &local, &[b.i, b.j])
            .expect("bond sites validated at model construction");
        h += emb;
    }
    for f in fields {
        let local = x.scale(f.h[0] / 2.0) + y.scale(f.h[1] / 2.0) + z.scale(f.h[2] / 2.0);
        let emb = qcore::embed(n_qubits, &local, &[f.site])
            .expect("field site validated at model construction");
        h += emb;
    }
    HermitianOperator::new(n_qubits, h).expect("sum of Hermitian terms is Hermitian")
}
