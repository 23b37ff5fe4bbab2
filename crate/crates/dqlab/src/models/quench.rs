//! Interaction quench on a spin ring.
//!
//! Under the Jordan–Wigner mapping, hard-core fermions hopping on a ring
//! with nearest-neighbour repulsion `U` are equivalent to an XXZ spin ring
//! with `J_z = U` (anisotropy `Δ = U / J_perp`). A quench switches the
//! interaction on at `t = 0`: `U(t) = 0` for `t < 0` and `U_final` for
//! `t ≥ 0`, so the pre-quench system is a free-fermion (XX) ring.

use super::{BondTerm, Error, FieldTerm, Hamiltonian, TrotterModel};
use crate::qcore::{self, HermitianOperator};

/// Quench protocol: transverse coupling `j_perp` (fixed), final
/// interaction `u_final` switched on at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchSchedule {
    pub j_perp: f64,
    pub u_final: f64,
}

impl QuenchSchedule {
    pub fn new(j_perp: f64, u_final: f64) -> Result<Self, Error> {
        if j_perp == 0.0 || !j_perp.is_finite() {
            return Err(Error::ZeroCoupling);
        }
        Ok(Self { j_perp, u_final })
    }

    /// Anisotropy `Δ = U_final / J_perp`.
    pub fn anisotropy(&self) -> f64 {
        self.u_final / self.j_perp
    }

    /// Interaction strength at time `t` (the quench happens at `t = 0`).
    pub fn u_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.u_final
        }
    }
}

/// The quench schedule realized on an `n_sites` ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchModel {
    schedule: QuenchSchedule,
    n_sites: usize,
}

impl QuenchModel {
    pub fn new(schedule: QuenchSchedule, n_sites: usize) -> Result<Self, Error> {
        if n_sites < 2 || n_sites > qcore::MAX_QUBITS {
            return Err(Error::BadSiteCount {
                got: n_sites,
                max: qcore::MAX_QUBITS,
            });
        }
        Ok(Self { schedule, n_sites })
    }

    /// The four-site ring used throughout the quench experiments.
    pub fn standard(schedule: QuenchSchedule) -> Self {
        Self::new(schedule, 4).expect("4 sites always valid")
    }

    pub fn schedule(&self) -> &QuenchSchedule {
        &self.schedule
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Ground state of the pre-quench (non-interacting) Hamiltonian.
    pub fn pre_quench_ground_state(&self) -> (f64, qcore::QuantumState) {
        self.at(-1.0).ground_state()
    }
}

impl Hamiltonian for QuenchModel {
    fn n_qubits(&self) -> usize {
        self.n_sites
    }

    fn at(&self, t: f64) -> HermitianOperator {
        super::assemble(self.n_sites, &self.bonds(t), &[])
    }

    fn constant_on(&self, t0: f64, t1: f64) -> bool {
        // piecewise constant with the single switch at t = 0
        self.schedule.u_final == 0.0 || t0 >= 0.0 || t1 < 0.0
    }
}

impl TrotterModel for QuenchModel {
    fn bonds(&self, t: f64) -> Vec<BondTerm> {
        let u = self.schedule.u_at(t);
        let mut bonds: Vec<BondTerm> = (0..self.n_sites - 1)
            .map(|i| BondTerm {
                i,
                j: i + 1,
                j_perp: self.schedule.j_perp,
                j_z: u,
            })
            .collect();
        if self.n_sites > 2 {
            bonds.push(BondTerm {
                i: self.n_sites - 1,
                j: 0,
                j_perp: self.schedule.j_perp,
                j_z: u,
            });
        }
        bonds
    }

    fn fields(&self, _t: f64) -> Vec<FieldTerm> {
        Vec::new()
    }
}
