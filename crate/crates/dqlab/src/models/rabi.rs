//! Single spin-1/2 in a precessing magnetic field.

use super::{assemble, Error, FieldTerm, Hamiltonian, TrotterModel};
use crate::circuit::{Circuit, Gate};
use crate::qcore::{HermitianOperator, QuantumState};

/// Field magnitude `h0`, polar angle `theta` between field and z axis,
/// precession angular velocity `omega`, and the angle `alpha` of the
/// initial y-rotation applied to the polarized state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiParams {
    pub h0: f64,
    pub theta: f64,
    pub omega: f64,
    pub alpha: f64,
}

impl RabiParams {
    pub fn new(h0: f64, theta: f64, omega: f64, alpha: f64) -> Result<Self, Error> {
        if !(h0 >= 0.0) {
            return Err(Error::NegativeFieldMagnitude(h0));
        }
        Ok(Self {
            h0,
            theta,
            omega,
            alpha,
        })
    }
}

/// `H(t) = S · h(t)` with
/// `h(t) = h0 (sinθ cos ωt, sinθ sin ωt, cosθ)` and `S = σ/2`:
/// a field of constant magnitude precessing about z at fixed polar angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiModel {
    params: RabiParams,
}

impl RabiModel {
    pub fn new(params: RabiParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &RabiParams {
        &self.params
    }

    pub fn field_at(&self, t: f64) -> [f64; 3] {
        let p = &self.params;
        let (st, ct) = p.theta.sin_cos();
        let (sw, cw) = (p.omega * t).sin_cos();
        [p.h0 * st * cw, p.h0 * st * sw, p.h0 * ct]
    }

    /// `Ry(alpha)` applied to the polarized state.
    pub fn initial_state(&self) -> QuantumState {
        let mut s = QuantumState::zero(1).expect("single qubit");
        let mut c = Circuit::new(1).expect("single qubit");
        c.push(Gate::Ry {
            theta: self.params.alpha,
            qubit: 0,
        })
        .expect("qubit 0 valid");
        c.apply_to_state(&mut s).expect("matching width");
        s
    }

    /// Circuit preparing [`RabiModel::initial_state`] from the polarized
    /// state.
    pub fn preparation_circuit(&self) -> Circuit {
        let mut c = Circuit::new(1).expect("single qubit");
        c.push(Gate::Ry {
            theta: self.params.alpha,
            qubit: 0,
        })
        .expect("qubit 0 valid");
        c
    }
}

pub fn rabi_hamiltonian(params: &RabiParams, t: f64) -> HermitianOperator {
    RabiModel::new(*params).at(t)
}

impl Hamiltonian for RabiModel {
    fn n_qubits(&self) -> usize {
        1
    }

    fn at(&self, t: f64) -> HermitianOperator {
        assemble(1, &[], &self.fields(t))
    }

    fn constant_on(&self, _t0: f64, _t1: f64) -> bool {
        // the field is static when it has no in-plane component
        self.params.h0 == 0.0 || self.params.theta.sin() == 0.0 || self.params.omega == 0.0
    }
}

impl TrotterModel for RabiModel {
    fn bonds(&self, _t: f64) -> Vec<super::BondTerm> {
        Vec::new()
    }

    fn fields(&self, t: f64) -> Vec<FieldTerm> {
        vec![FieldTerm {
            site: 0,
            h: self.field_at(t),
        }]
    }
}
