//! Gate-level circuits over the `{u3, u1, ry, cx}` set.
//!
//! Matrix conventions follow OpenQASM 2:
//!
//! ```text
//! u3(t,p,l) = [[cos(t/2),            -e^{il} sin(t/2)      ],
//!              [e^{ip} sin(t/2),      e^{i(p+l)} cos(t/2)  ]]
//! u1(l)     = diag(1, e^{il})
//! ry(t)     = u3(t, 0, 0)
//! ```
//!
//! Global phase is deliberately untracked: two circuits that differ by an
//! overall phase produce identical density matrices and identical
//! measurement statistics, which is all the rest of the crate consumes.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::qcore::{self, DensityMatrix, QuantumState};

/// One gate instance, with the qubits it acts on.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    U3 {
        theta: f64,
        phi: f64,
        lambda: f64,
        qubit: usize,
    },
    U1 {
        lambda: f64,
        qubit: usize,
    },
    Ry {
        theta: f64,
        qubit: usize,
    },
    Cx {
        control: usize,
        target: usize,
    },
}

impl Gate {
    /// Qubits this gate touches, control first for `cx`.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::U3 { qubit, .. } | Gate::U1 { qubit, .. } | Gate::Ry { qubit, .. } => {
                vec![qubit]
            }
            Gate::Cx { control, target } => vec![control, target],
        }
    }

    pub fn is_entangling(&self) -> bool {
        matches!(self, Gate::Cx { .. })
    }

    /// The gate's unitary: 2x2 for single-qubit gates, 4x4 for `cx` (in the
    /// local basis where the *control* is the least significant bit).
    pub fn unitary(&self) -> DMatrix<C64> {
        match *self {
            Gate::U3 {
                theta,
                phi,
                lambda,
                ..
            } => u3_matrix(theta, phi, lambda),
            Gate::U1 { lambda, .. } => u1_matrix(lambda),
            Gate::Ry { theta, .. } => u3_matrix(theta, 0.0, 0.0),
            Gate::Cx { .. } => {
                // local bit 0 = control, local bit 1 = target
                let z = C64::new(0.0, 0.0);
                let o = C64::new(1.0, 0.0);
                DMatrix::from_row_slice(
                    4,
                    4,
                    &[
                        o, z, z, z, //
                        z, z, z, o, //
                        z, z, o, z, //
                        z, o, z, z,
                    ],
                )
            }
        }
    }

    /// The gate-wise inverse within the same gate set.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::U3 {
                theta,
                phi,
                lambda,
                qubit,
            } => Gate::U3 {
                theta: -theta,
                phi: -lambda,
                lambda: -phi,
                qubit,
            },
            Gate::U1 { lambda, qubit } => Gate::U1 {
                lambda: -lambda,
                qubit,
            },
            Gate::Ry { theta, qubit } => Gate::Ry {
                theta: -theta,
                qubit,
            },
            Gate::Cx { control, target } => Gate::Cx { control, target },
        }
    }
}

pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> DMatrix<C64> {
    let (ht_sin, ht_cos) = (theta / 2.0).sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(ht_cos, 0.0),
            -C64::from_polar(ht_sin, lambda),
            C64::from_polar(ht_sin, phi),
            C64::from_polar(ht_cos, phi + lambda),
        ],
    )
}

pub fn u1_matrix(lambda: f64) -> DMatrix<C64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::from_polar(1.0, lambda),
    ]))
}

/// Recover `(theta, phi, lambda)` with `u3(theta, phi, lambda)` equal to `u`
/// up to a global phase. `u` must be unitary within `1e-9`.
pub fn u3_angles(u: &DMatrix<C64>) -> Result<(f64, f64, f64), qcore::Error> {
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(qcore::Error::DimensionMismatch {
            expected: 2,
            got: u.nrows(),
        });
    }
    let dev = (u.adjoint() * u - DMatrix::<C64>::identity(2, 2))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(qcore::Error::NotUnitary(dev));
    }
    let c = u[(0, 0)].norm();
    let s = u[(1, 0)].norm();
    let theta = 2.0 * s.atan2(c);
    // Fix the global phase by making the (0,0) entry real and non-negative;
    // in the degenerate theta = pi case use the (1,0) entry instead.
    if c >= 1e-12 {
        let g = u[(0, 0)] / c; // e^{i global}
        let phi = if s >= 1e-12 {
            (u[(1, 0)] / g).arg()
        } else {
            0.0
        };
        let lambda = if s >= 1e-12 {
            (-u[(0, 1)] / g).arg()
        } else {
            (u[(1, 1)] / g).arg()
        };
        Ok((theta, phi, lambda))
    } else {
        // anti-diagonal: only phi - lambda is physical; put it all in phi
        let g = u[(1, 0)] / s;
        let phi = 0.0;
        let lambda = (-u[(0, 1)] / g).arg();
        Ok((theta, phi, lambda))
    }
}

/// Totals per gate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct GateCounts {
    pub single_qubit: usize,
    pub two_qubit: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.single_qubit + self.two_qubit
    }
}

/// An ordered gate list on a fixed-width register. Purely unitary:
/// measurement lives in the sampling layer, not here.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self, qcore::Error> {
        if n_qubits == 0 || n_qubits > qcore::MAX_QUBITS {
            return Err(qcore::Error::TooManyQubits(n_qubits));
        }
        Ok(Self {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    /// Append a gate, validating its qubit indices.
    pub fn push(&mut self, gate: Gate) -> Result<(), qcore::Error> {
        let qs = gate.qubits();
        qcore::check_targets(self.n_qubits, &qs)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Append every gate of `other` (same register width required).
    pub fn extend(&mut self, other: &Circuit) -> Result<(), qcore::Error> {
        if other.n_qubits != self.n_qubits {
            return Err(qcore::Error::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    /// The circuit applying the inverse operation (reversed gate-wise
    /// inverses).
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    pub fn count_gates(&self) -> GateCounts {
        let mut c = GateCounts::default();
        for g in &self.gates {
            if g.is_entangling() {
                c.two_qubit += 1;
            } else {
                c.single_qubit += 1;
            }
        }
        c
    }

    /// Replace each `cx` by `stretch` consecutive copies. `stretch` must be
    /// odd (even counts would change the ideal unitary) and at least 1.
    /// Single-qubit gates are untouched. Used to amplify entangling-gate
    /// noise by a known factor for extrapolation.
    pub fn fold_cnots(&self, stretch: usize) -> Result<Circuit, FoldError> {
        if stretch == 0 || stretch % 2 == 0 {
            return Err(FoldError::EvenStretch(stretch));
        }
        let mut gates = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            match g {
                Gate::Cx { .. } => {
                    for _ in 0..stretch {
                        gates.push(g.clone());
                    }
                }
                _ => gates.push(g.clone()),
            }
        }
        Ok(Circuit {
            n_qubits: self.n_qubits,
            gates,
        })
    }

    /// Run the circuit on a pure state.
    pub fn apply_to_state(&self, state: &mut QuantumState) -> Result<(), qcore::Error> {
        if state.n_qubits() != self.n_qubits {
            return Err(qcore::Error::DimensionMismatch {
                expected: 1 << self.n_qubits,
                got: state.dim(),
            });
        }
        for g in &self.gates {
            apply_gate_state(state, g);
        }
        Ok(())
    }

    /// Run the circuit on a density matrix (noiselessly).
    pub fn apply_to_density(&self, rho: &mut DensityMatrix) -> Result<(), qcore::Error> {
        if rho.n_qubits() != self.n_qubits {
            return Err(qcore::Error::DimensionMismatch {
                expected: 1 << self.n_qubits,
                got: rho.dim(),
            });
        }
        for g in &self.gates {
            let u = g.unitary();
            let qs = g.qubits();
            rho.apply_unitary(&u, &qs)?;
        }
        Ok(())
    }

    /// Dense unitary of the whole circuit (for small registers / checks).
    pub fn unitary(&self) -> Result<DMatrix<C64>, qcore::Error> {
        let dim = 1usize << self.n_qubits;
        let mut u = DMatrix::<C64>::identity(dim, dim);
        for g in &self.gates {
            let full = qcore::embed(self.n_qubits, &g.unitary(), &g.qubits())?;
            u = full * u;
        }
        Ok(u)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FoldError {
    #[error("fold stretch must be odd and >= 1, got {0}")]
    EvenStretch(usize),
}

pub(crate) fn apply_gate_state(state: &mut QuantumState, g: &Gate) {
    match *g {
        Gate::Cx { control, target } => {
            let u = g.unitary();
            let mut m = [[C64::new(0.0, 0.0); 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    m[r][c] = u[(r, c)];
                }
            }
            state.apply_2q(control, target, &m);
        }
        _ => {
            let u = g.unitary();
            let m = [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]];
            state.apply_1q(g.qubits()[0], &m);
        }
    }
}
