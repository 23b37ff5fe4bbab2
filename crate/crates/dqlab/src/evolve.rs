//! Time evolution: a dense reference integrator and a gate compiler.
//!
//! Two evolution paths share the same model description:
//!
//! * [`exact_evolve`] integrates the time-ordered Schrödinger propagator by
//!   multiplying midpoint exponentials `exp(−i H(t_mid) δ)` over substeps,
//!   doubling the substep count until two successive results agree within
//!   [`EXACT_TOLERANCE`]. It serves as the reference every circuit-based
//!   result is compared against.
//! * [`compile_trotter_step`] / [`compile_evolution`] emit gate circuits for
//!   the symmetric (order-2) or plain (order-1) product formula. Bond terms
//!   become explicit CX-based two-qubit gates (2 CX when one of the
//!   couplings vanishes, 3 CX for a general XXZ bond) and field terms
//!   become one `u3` each. Every bond gate is checked at construction
//!   against the dense exponential of its generator, so a decomposition
//!   bug cannot silently produce wrong circuits.
//!
//! The term split groups bonds by the parity of their first site
//! (alternating sublattices of a chain or even ring) with all single-site
//! field terms in between; the order-2 step is the palindrome
//! `odd/2 · fields/2 · even · fields/2 · odd/2` evaluated at the step
//! midpoint. When neighbouring steps end and begin with identical
//! half-layers (time-independent couplings), those halves are merged into
//! one full layer, shrinking the circuit without changing its unitary.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_PI_2;

use crate::circuit::{u3_angles, u3_matrix, Circuit, Gate, GateCounts};
use crate::models::{BondTerm, FieldTerm, TrotterModel};
use crate::qcore::{self, max_deviation_up_to_phase, DensityMatrix, HermitianOperator, QuantumState};

/// Convergence tolerance of the reference integrator (norm difference
/// between successive substep doublings).
pub const EXACT_TOLERANCE: f64 = 1e-9;

/// Substep cap for the reference integrator.
pub const MAX_SUBSTEPS: usize = 1 << 20;

/// Tolerance of the always-on bond-gate self check.
const GATE_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error(
        "reference integrator did not converge: {substeps} substeps leave residual {residual:.3e}"
    )]
    NotConverged { substeps: usize, residual: f64 },
    #[error("substep count must be at least 1")]
    ZeroSubsteps,
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("bond ({i}, {j}) shares site {site} with another bond in the same layer")]
    OverlappingBonds { i: usize, j: usize, site: usize },
    #[error(transparent)]
    Core(#[from] qcore::Error),
}

// ---------------------------------------------------------------------------
// Reference integrator
// ---------------------------------------------------------------------------

/// `out += H · amps` with `H` given as bond and field terms (`S = σ/2`).
fn accumulate_terms(
    bonds: &[BondTerm],
    fields: &[FieldTerm],
    amps: &DVector<C64>,
    out: &mut DVector<C64>,
) {
    let dim = amps.len();
    for b in bonds {
        let (mi, mj) = (1usize << b.i, 1usize << b.j);
        let hop = 0.5 * b.j_perp;
        let zz = 0.25 * b.j_z;
        for x in 0..dim {
            let a = amps[x];
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            let parallel = ((x & mi) == 0) == ((x & mj) == 0);
            if parallel {
                out[x] += a * zz;
            } else {
                out[x] -= a * zz;
                out[x ^ mi ^ mj] += a * hop;
            }
        }
    }
    for f in fields {
        let m = 1usize << f.site;
        let hx = 0.5 * f.h[0];
        let hy = 0.5 * f.h[1];
        let hz = 0.5 * f.h[2];
        for x in 0..dim {
            let a = amps[x];
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            if x & m == 0 {
                out[x] += a * hz;
                out[x ^ m] += a * C64::new(hx, hy);
            } else {
                out[x] -= a * hz;
                out[x ^ m] += a * C64::new(hx, -hy);
            }
        }
    }
}

/// Upper bound on the spectral norm of the term sum (triangle inequality).
fn norm_bound(bonds: &[BondTerm], fields: &[FieldTerm]) -> f64 {
    let b: f64 = bonds
        .iter()
        .map(|b| 0.5 * b.j_perp.abs() + 0.25 * b.j_z.abs())
        .sum();
    let f: f64 = fields
        .iter()
        .map(|f| 0.5 * (f.h[0] * f.h[0] + f.h[1] * f.h[1] + f.h[2] * f.h[2]).sqrt())
        .sum();
    b + f
}

/// In-place `amps ← exp(−i H δ) amps` by Taylor series, splitting into
/// micro-steps so the series argument stays small and well conditioned.
fn apply_exponential(
    bonds: &[BondTerm],
    fields: &[FieldTerm],
    delta: f64,
    amps: &mut DVector<C64>,
    term: &mut DVector<C64>,
    next: &mut DVector<C64>,
) {
    let bound = norm_bound(bonds, fields);
    let micro = ((bound * delta.abs() / 0.5).ceil() as usize).max(1);
    let d = delta / micro as f64;
    for _ in 0..micro {
        term.copy_from(amps);
        for k in 1..=48u32 {
            next.fill(C64::new(0.0, 0.0));
            accumulate_terms(bonds, fields, term, next);
            let scale = C64::new(0.0, -d) / C64::new(k as f64, 0.0);
            next.apply(|z| *z *= scale);
            std::mem::swap(term, next);
            *amps += &*term;
            if term.norm() < 1e-17 {
                break;
            }
        }
    }
}

fn propagate<M: TrotterModel>(
    model: &M,
    mut amps: DVector<C64>,
    t_start: f64,
    t_end: f64,
    substeps: usize,
) -> DVector<C64> {
    let delta = (t_end - t_start) / substeps as f64;
    let mut term = DVector::from_element(amps.len(), C64::new(0.0, 0.0));
    let mut next = term.clone();
    for k in 0..substeps {
        let mid = t_start + (k as f64 + 0.5) * delta;
        let bonds = model.bonds(mid);
        let fields = model.fields(mid);
        apply_exponential(&bonds, &fields, delta, &mut amps, &mut term, &mut next);
    }
    amps
}

/// Reference evolution of a pure state from `t_start` to `t_end`, starting
/// from `substeps` midpoint exponentials and doubling until convergence.
pub fn exact_evolve<M: TrotterModel>(
    model: &M,
    state: &QuantumState,
    t_start: f64,
    t_end: f64,
    substeps: usize,
) -> Result<QuantumState, Error> {
    exact_evolve_capped(model, state, t_start, t_end, substeps, MAX_SUBSTEPS)
}

pub(crate) fn exact_evolve_capped<M: TrotterModel>(
    model: &M,
    state: &QuantumState,
    t_start: f64,
    t_end: f64,
    substeps: usize,
    cap: usize,
) -> Result<QuantumState, Error> {
    if substeps == 0 {
        return Err(Error::ZeroSubsteps);
    }
    let n = model.n_qubits();
    if state.n_qubits() != n {
        return Err(Error::Core(qcore::Error::DimensionMismatch {
            expected: 1 << n,
            got: state.dim(),
        }));
    }
    if t_end == t_start {
        return Ok(state.clone());
    }
    let (lo, hi) = if t_start < t_end {
        (t_start, t_end)
    } else {
        (t_end, t_start)
    };
    if model.constant_on(lo, hi) {
        // time ordering is trivial: one dense exponential
        let u = model.at(0.5 * (lo + hi)).expm(t_end - t_start);
        return Ok(QuantumState::from_vector_unchecked(n, u * state.amplitudes()));
    }
    let mut n_sub = substeps;
    let mut prev = propagate(model, state.amplitudes().clone(), t_start, t_end, n_sub);
    loop {
        let doubled = n_sub * 2;
        let next = propagate(model, state.amplitudes().clone(), t_start, t_end, doubled);
        let residual = (&next - &prev).norm();
        if residual < EXACT_TOLERANCE {
            return Ok(QuantumState::from_vector_unchecked(n, next));
        }
        if doubled * 2 > cap {
            return Err(Error::NotConverged {
                substeps: doubled,
                residual,
            });
        }
        prev = next;
        n_sub = doubled;
    }
}

/// Reference evolution of a density matrix (`ρ → U ρ U†`) with the same
/// convergence scheme as [`exact_evolve`].
pub fn exact_evolve_density<M: TrotterModel>(
    model: &M,
    rho: &DensityMatrix,
    t_start: f64,
    t_end: f64,
    substeps: usize,
) -> Result<DensityMatrix, Error> {
    if substeps == 0 {
        return Err(Error::ZeroSubsteps);
    }
    let n = model.n_qubits();
    if rho.n_qubits() != n {
        return Err(Error::Core(qcore::Error::DimensionMismatch {
            expected: 1 << n,
            got: rho.dim(),
        }));
    }
    if t_end == t_start {
        return Ok(rho.clone());
    }
    let (lo, hi) = if t_start < t_end {
        (t_start, t_end)
    } else {
        (t_end, t_start)
    };
    if model.constant_on(lo, hi) {
        let u = model.at(0.5 * (lo + hi)).expm(t_end - t_start);
        let mat = &u * rho.matrix() * u.adjoint();
        return Ok(DensityMatrix::from_matrix_unchecked(n, mat));
    }
    let conjugate = |substeps: usize| -> DMatrix<C64> {
        // two passes of "evolve every column, then take the adjoint"
        // turn ρ into U ρ U†
        let mut m = rho.matrix().clone();
        for _ in 0..2 {
            let mut evolved = DMatrix::from_element(m.nrows(), m.ncols(), C64::new(0.0, 0.0));
            for c in 0..m.ncols() {
                let col = m.column(c).clone_owned();
                let out = propagate(model, col, t_start, t_end, substeps);
                evolved.set_column(c, &out);
            }
            m = evolved.adjoint();
        }
        m
    };
    let mut n_sub = substeps;
    let mut prev = conjugate(n_sub);
    loop {
        let doubled = n_sub * 2;
        let next = conjugate(doubled);
        let residual = (&next - &prev).norm();
        if residual < EXACT_TOLERANCE {
            return Ok(DensityMatrix::from_matrix_unchecked(n, next));
        }
        if doubled * 2 > MAX_SUBSTEPS {
            return Err(Error::NotConverged {
                substeps: doubled,
                residual,
            });
        }
        prev = next;
        n_sub = doubled;
    }
}

// ---------------------------------------------------------------------------
// Gate construction
// ---------------------------------------------------------------------------

fn rx_gate(theta: f64, qubit: usize) -> Gate {
    Gate::U3 {
        theta,
        phi: -FRAC_PI_2,
        lambda: FRAC_PI_2,
        qubit,
    }
}

fn hadamard(qubit: usize) -> Gate {
    Gate::U3 {
        theta: FRAC_PI_2,
        phi: 0.0,
        lambda: std::f64::consts::PI,
        qubit,
    }
}

/// Gate sequence (application order) realizing `exp(−i dt H_bond)` with
/// `H_bond = J⊥/4 (XX + YY) + Jz/4 ZZ`, verified against the dense
/// exponential before being returned.
fn bond_gates(b: &BondTerm, dt: f64) -> Vec<Gate> {
    let theta_a = 0.5 * b.j_perp * dt;
    let theta_c = 0.5 * b.j_z * dt;
    let (qi, qj) = (b.i, b.j);
    let cx = || Gate::Cx {
        control: qi,
        target: qj,
    };
    let phase = |lambda: f64, qubit: usize| Gate::U1 { lambda, qubit };
    let mut g = Vec::new();
    if theta_a == 0.0 && theta_c == 0.0 {
        return g;
    }
    if theta_a == 0.0 {
        // pure ZZ: CX · Rz_j(θc) · CX
        g.push(cx());
        g.push(phase(theta_c, qj));
        g.push(cx());
    } else if theta_c == 0.0 {
        // XX+YY only: rotate YY into ZZ with Rx(π/2) on both qubits, then
        // CX · (Rx_i ⊗ Rz_j) · CX realizes exp(−i(θa XX + θa ZZ)/2)
        g.push(rx_gate(FRAC_PI_2, qi));
        g.push(rx_gate(FRAC_PI_2, qj));
        g.push(cx());
        g.push(rx_gate(theta_a, qi));
        g.push(phase(theta_a, qj));
        g.push(cx());
        g.push(rx_gate(-FRAC_PI_2, qi));
        g.push(rx_gate(-FRAC_PI_2, qj));
    } else {
        // general XXZ bond, 3 CX: conjugating by CX turns the bond into the
        // commuting sum a·X_i − a·X_i Z_j + c·Z_j, whose exponential needs
        // one CZ sandwich; the trailing CZ·CX pair collapses into a single
        // CX dressed with phase gates.
        g.push(phase(-FRAC_PI_2, qj));
        g.push(cx());
        g.push(phase(FRAC_PI_2, qj));
        g.push(phase(FRAC_PI_2, qi));
        g.push(rx_gate(-theta_a, qi));
        g.push(hadamard(qj));
        g.push(cx());
        g.push(hadamard(qj));
        g.push(phase(theta_c, qj));
        g.push(rx_gate(theta_a, qi));
        g.push(cx());
    }
    let dev = bond_gate_deviation(&g, b, dt);
    assert!(
        dev <= GATE_CHECK_TOL,
        "bond gate decomposition deviates from the dense exponential by {dev:.3e}"
    );
    g
}

/// Deviation (up to global phase) between the emitted bond gates and the
/// dense exponential of the bond generator, on a local two-qubit register.
fn bond_gate_deviation(gates: &[Gate], b: &BondTerm, dt: f64) -> f64 {
    let remap = |q: usize| if q == b.i { 0 } else { 1 };
    let mut local = Circuit::new(2).expect("two-qubit scratch register");
    for g in gates {
        let mapped = match *g {
            Gate::U3 {
                theta,
                phi,
                lambda,
                qubit,
            } => Gate::U3 {
                theta,
                phi,
                lambda,
                qubit: remap(qubit),
            },
            Gate::U1 { lambda, qubit } => Gate::U1 {
                lambda,
                qubit: remap(qubit),
            },
            Gate::Ry { theta, qubit } => Gate::Ry {
                theta,
                qubit: remap(qubit),
            },
            Gate::Cx { control, target } => Gate::Cx {
                control: remap(control),
                target: remap(target),
            },
        };
        local.push(mapped).expect("local indices are 0/1");
    }
    let u = local.unitary().expect("two-qubit circuit");
    let x = qcore::pauli_x();
    let y = qcore::pauli_y();
    let z = qcore::pauli_z();
    let h = qcore::kron(&[x.clone(), x]).scale(0.25 * b.j_perp)
        + qcore::kron(&[y.clone(), y]).scale(0.25 * b.j_perp)
        + qcore::kron(&[z.clone(), z]).scale(0.25 * b.j_z);
    let reference = HermitianOperator::new(2, h)
        .expect("bond generator is Hermitian")
        .expm(dt);
    max_deviation_up_to_phase(&reference, &u)
}

/// One `u3` realizing `exp(−i dt h·σ/2)`; `None` for a vanishing rotation.
fn field_gate(f: &FieldTerm, dt: f64) -> Option<Gate> {
    let mag = (f.h[0] * f.h[0] + f.h[1] * f.h[1] + f.h[2] * f.h[2]).sqrt();
    let phi = 0.5 * mag * dt;
    if phi == 0.0 {
        return None;
    }
    let (nx, ny, nz) = (f.h[0] / mag, f.h[1] / mag, f.h[2] / mag);
    let (s, c) = phi.sin_cos();
    let u = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, -s * nz),
            C64::new(-s * ny, -s * nx),
            C64::new(s * ny, -s * nx),
            C64::new(c, s * nz),
        ],
    );
    let (theta, phi_a, lambda) = u3_angles(&u).expect("rotation is unitary");
    let dev = max_deviation_up_to_phase(&u, &u3_matrix(theta, phi_a, lambda));
    assert!(
        dev <= 1e-9,
        "field gate reconstruction deviates by {dev:.3e}"
    );
    Some(Gate::U3 {
        theta,
        phi: phi_a,
        lambda,
        qubit: f.site,
    })
}

// ---------------------------------------------------------------------------
// Trotter plans and step compilation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrotterOrder {
    First,
    Second,
}

/// Time-discretization plan: product-formula order, step size, step count,
/// and whether identical half-layers at step boundaries are merged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterPlan {
    pub order: TrotterOrder,
    pub dt: f64,
    pub n_steps: usize,
    pub merge_boundaries: bool,
}

impl TrotterPlan {
    pub fn new(order: TrotterOrder, dt: f64, n_steps: usize) -> Result<Self, Error> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::BadTimeStep(dt));
        }
        Ok(Self {
            order,
            dt,
            n_steps,
            merge_boundaries: true,
        })
    }

    /// Emit every half-layer verbatim (naive gate counts).
    pub fn without_merging(mut self) -> Self {
        self.merge_boundaries = false;
        self
    }
}

enum Part {
    /// Outermost palindrome half, carrying its doubled (full-step) variant
    /// for boundary merging.
    Half { half: Vec<Gate>, full: Vec<Gate> },
    Plain(Vec<Gate>),
}

fn check_disjoint(bonds: &[&BondTerm]) -> Result<(), Error> {
    let mut used = std::collections::HashSet::new();
    for b in bonds {
        for site in [b.i, b.j] {
            if !used.insert(site) {
                return Err(Error::OverlappingBonds {
                    i: b.i,
                    j: b.j,
                    site,
                });
            }
        }
    }
    Ok(())
}

fn bond_layer(bonds: &[&BondTerm], dt: f64) -> Vec<Gate> {
    bonds.iter().flat_map(|b| bond_gates(b, dt)).collect()
}

fn field_layer(fields: &[FieldTerm], dt: f64) -> Vec<Gate> {
    fields.iter().filter_map(|f| field_gate(f, dt)).collect()
}

/// Build the layered gate structure of one step starting at time `t`.
fn build_step<M: TrotterModel>(
    model: &M,
    t: f64,
    dt: f64,
    order: TrotterOrder,
) -> Result<Vec<Part>, Error> {
    let mid = t + 0.5 * dt;
    let bonds = model.bonds(mid);
    let fields = model.fields(mid);
    let (odd, even): (Vec<&BondTerm>, Vec<&BondTerm>) =
        bonds.iter().partition(|b| b.i % 2 == 0);
    check_disjoint(&odd)?;
    check_disjoint(&even)?;
    let mut parts = Vec::new();
    match order {
        TrotterOrder::First => {
            for gates in [
                bond_layer(&odd, dt),
                field_layer(&fields, dt),
                bond_layer(&even, dt),
            ] {
                if !gates.is_empty() {
                    parts.push(Part::Plain(gates));
                }
            }
        }
        TrotterOrder::Second => {
            let o_full = bond_layer(&odd, dt);
            let e_full = bond_layer(&even, dt);
            let f_full = field_layer(&fields, dt);
            let has_o = !o_full.is_empty();
            let has_e = !e_full.is_empty();
            let has_f = !f_full.is_empty();
            // Palindrome with empty layers collapsed: adjacent identical
            // halves at the same midpoint combine into a full layer exactly.
            match (has_o, has_f, has_e) {
                (true, true, true) => {
                    let o_half = bond_layer(&odd, 0.5 * dt);
                    let f_half = field_layer(&fields, 0.5 * dt);
                    parts.push(Part::Half {
                        half: o_half.clone(),
                        full: o_full,
                    });
                    parts.push(Part::Plain(f_half.clone()));
                    parts.push(Part::Plain(e_full));
                    parts.push(Part::Plain(f_half));
                    parts.push(Part::Half {
                        half: o_half.clone(),
                        full: bond_layer(&odd, dt),
                    });
                }
                (true, true, false) => {
                    let o_half = bond_layer(&odd, 0.5 * dt);
                    parts.push(Part::Half {
                        half: o_half.clone(),
                        full: o_full,
                    });
                    parts.push(Part::Plain(f_full));
                    parts.push(Part::Half {
                        half: o_half.clone(),
                        full: bond_layer(&odd, dt),
                    });
                }
                (true, false, true) => {
                    let o_half = bond_layer(&odd, 0.5 * dt);
                    parts.push(Part::Half {
                        half: o_half.clone(),
                        full: o_full,
                    });
                    parts.push(Part::Plain(e_full));
                    parts.push(Part::Half {
                        half: o_half.clone(),
                        full: bond_layer(&odd, dt),
                    });
                }
                (true, false, false) => parts.push(Part::Plain(o_full)),
                (false, true, true) => {
                    let f_half = field_layer(&fields, 0.5 * dt);
                    parts.push(Part::Half {
                        half: f_half.clone(),
                        full: f_full,
                    });
                    parts.push(Part::Plain(e_full));
                    parts.push(Part::Half {
                        half: f_half.clone(),
                        full: field_layer(&fields, dt),
                    });
                }
                (false, true, false) => parts.push(Part::Plain(f_full)),
                (false, false, true) => parts.push(Part::Plain(e_full)),
                (false, false, false) => {}
            }
        }
    }
    Ok(parts)
}

fn push_gates(circuit: &mut Circuit, gates: &[Gate]) -> Result<(), Error> {
    for g in gates {
        circuit.push(g.clone()).map_err(Error::Core)?;
    }
    Ok(())
}

/// One Trotter step starting at `t`, flattened to a circuit.
pub fn compile_trotter_step<M: TrotterModel>(
    model: &M,
    t: f64,
    dt: f64,
    order: TrotterOrder,
) -> Result<Circuit, Error> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::BadTimeStep(dt));
    }
    let mut circuit = Circuit::new(model.n_qubits()).map_err(Error::Core)?;
    for part in build_step(model, t, dt, order)? {
        match part {
            Part::Half { half, .. } => push_gates(&mut circuit, &half)?,
            Part::Plain(gates) => push_gates(&mut circuit, &gates)?,
        }
    }
    Ok(circuit)
}

/// The full evolution circuit for `plan.n_steps` steps beginning at
/// `t_start`, with identical half-layers merged across step boundaries
/// (unless disabled in the plan).
pub fn compile_evolution<M: TrotterModel>(
    model: &M,
    t_start: f64,
    plan: &TrotterPlan,
) -> Result<Circuit, Error> {
    let mut circuit = Circuit::new(model.n_qubits()).map_err(Error::Core)?;
    let mut pending: Option<(Vec<Gate>, Vec<Gate>)> = None;
    for k in 0..plan.n_steps {
        let t = t_start + k as f64 * plan.dt;
        let mut parts = build_step(model, t, plan.dt, plan.order)?;
        if let Some((half, full)) = pending.take() {
            let merges = matches!(parts.first(), Some(Part::Half { half: h, .. }) if *h == half);
            if merges {
                push_gates(&mut circuit, &full)?;
                parts.remove(0);
            } else {
                push_gates(&mut circuit, &half)?;
            }
        }
        let n_parts = parts.len();
        for (idx, part) in parts.into_iter().enumerate() {
            match part {
                Part::Half { half, full } => {
                    if idx + 1 == n_parts && plan.merge_boundaries {
                        pending = Some((half, full));
                    } else {
                        push_gates(&mut circuit, &half)?;
                    }
                }
                Part::Plain(gates) => push_gates(&mut circuit, &gates)?,
            }
        }
    }
    if let Some((half, _)) = pending {
        push_gates(&mut circuit, &half)?;
    }
    Ok(circuit)
}

/// Trajectory of a Trotterized evolution: the state after every step,
/// with per-step gate counts (unmerged, as applied).
#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub step_counts: Vec<GateCounts>,
}

/// Apply compiled step circuits sequentially, recording each intermediate
/// state. Boundary merging does not change any recorded state (merged and
/// unmerged circuits share the same unitary), so steps are applied
/// unmerged here.
pub fn evolve_trotterized<M: TrotterModel>(
    model: &M,
    initial: &QuantumState,
    t_start: f64,
    plan: &TrotterPlan,
) -> Result<EvolutionRecord, Error> {
    if initial.n_qubits() != model.n_qubits() {
        return Err(Error::Core(qcore::Error::DimensionMismatch {
            expected: 1 << model.n_qubits(),
            got: initial.dim(),
        }));
    }
    let mut record = EvolutionRecord {
        times: vec![t_start],
        states: vec![initial.clone()],
        step_counts: Vec::new(),
    };
    let mut state = initial.clone();
    for k in 0..plan.n_steps {
        let t = t_start + k as f64 * plan.dt;
        let step = compile_trotter_step(model, t, plan.dt, plan.order)?;
        step.apply_to_state(&mut state).map_err(Error::Core)?;
        record.times.push(t_start + (k + 1) as f64 * plan.dt);
        record.states.push(state.clone());
        record.step_counts.push(step.count_gates());
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        Hamiltonian, Polarization, PulseWaveform, QuenchModel, QuenchSchedule, RabiModel,
        RabiParams, SpinLattice,
    };
    use std::f64::consts::PI;

    fn state_distance(a: &QuantumState, b: &QuantumState) -> f64 {
        (a.amplitudes() - b.amplitudes()).norm()
    }

    /// `min_φ ‖e^{iφ}a − b‖`: compiled circuits reproduce the exact
    /// propagator only up to a global phase (u1 is a phase gate, not Rz),
    /// so circuit-vs-reference comparisons align phases first.
    fn aligned_distance(a: &QuantumState, b: &QuantumState) -> f64 {
        let ov = b.inner(a);
        let phase = if ov.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            ov.conj() / ov.norm()
        };
        (a.amplitudes().map(|z| z * phase) - b.amplitudes()).norm()
    }

    #[test]
    fn zero_hamiltonian_leaves_state_unchanged() {
        let l = SpinLattice::chain(2, 0.0, 0.0).unwrap();
        let s = crate::models::neel_state(2).unwrap();
        let out = exact_evolve(&l, &s, 0.0, 3.0, 1).unwrap();
        assert!(state_distance(&s, &out) < 1e-12);
    }

    #[test]
    fn constant_hamiltonian_matches_dense_exponential() {
        let mut l = SpinLattice::dimer(1.0, 0.4).unwrap();
        l.set_static_field(0, [0.3, 0.0, 0.9]).unwrap();
        let s = crate::models::neel_state(2).unwrap();
        let t = 1.7;
        let out = exact_evolve(&l, &s, 0.0, t, 4).unwrap();
        let u = l.at(0.0).expm(t);
        let expected = u * s.amplitudes();
        assert!((out.amplitudes() - expected).norm() < 1e-12);
    }

    #[test]
    fn driven_integration_agrees_with_dense_reference() {
        // cross-check the sparse Taylor path against step-by-step dense
        // exponentials on a driven dimer
        let mut l = SpinLattice::dimer(1.0, 0.0).unwrap();
        l.set_pulse(
            0,
            PulseWaveform::new(Polarization::Circular, 2.0, 1.0, 0.7, 2.0).unwrap(),
        )
        .unwrap();
        let s = crate::models::all_up_state(2).unwrap();
        let out = exact_evolve(&l, &s, 0.0, 4.0, 16).unwrap();
        // dense fixed-step reference with many substeps
        let n = 1 << 14;
        let delta = 4.0 / n as f64;
        let mut amps = s.amplitudes().clone();
        for k in 0..n {
            let mid = (k as f64 + 0.5) * delta;
            amps = l.at(mid).expm(delta) * amps;
        }
        assert!((out.amplitudes() - amps).norm() < 1e-7);
        assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rabi_flip_probability_matches_rotating_frame_solution() {
        // Closed form: in the frame rotating at ω about z the Hamiltonian
        // is constant, H_rot = [h0 sinθ σx + (h0 cosθ − ω) σz]/2, so
        // ψ(t) = e^{−iωtσz/2} e^{−iH_rot t} Ry(α)|0⟩.
        let params = RabiParams::new(1.0, 2.0, 1.0, 2.0 * PI / 3.0).unwrap();
        let model = RabiModel::new(params);
        let t = PI;
        let evolved = exact_evolve(&model, &model.initial_state(), 0.0, t, 1).unwrap();

        let x = qcore::pauli_x();
        let z = qcore::pauli_z();
        let h_rot = (x.scale(params.h0 * params.theta.sin())
            + z.scale(params.h0 * params.theta.cos() - params.omega))
        .scale(0.5);
        let u_rot = HermitianOperator::new(1, h_rot).unwrap().expm(t);
        let u_frame = HermitianOperator::new(1, z.scale(params.omega / 2.0))
            .unwrap()
            .expm(t);
        let closed = u_frame * u_rot * model.initial_state().amplitudes();
        let p_flip_closed = closed[1].norm_sqr();
        let p_flip = evolved.probabilities()[1];
        assert!(
            (p_flip - p_flip_closed).abs() < 1e-8,
            "flip probability {p_flip} vs closed form {p_flip_closed}"
        );
    }

    #[test]
    fn nonconvergence_is_reported() {
        let mut l = SpinLattice::dimer(1.0, 0.0).unwrap();
        l.set_pulse(
            0,
            PulseWaveform::new(Polarization::Circular, 2.0, 5.0, 0.5, 1.0).unwrap(),
        )
        .unwrap();
        let s = crate::models::all_up_state(2).unwrap();
        let err = exact_evolve_capped(&l, &s, 0.0, 2.0, 1, 4).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }));
        assert!(matches!(
            exact_evolve(&l, &s, 0.0, 1.0, 0),
            Err(Error::ZeroSubsteps)
        ));
    }

    #[test]
    fn density_evolution_matches_pure_evolution() {
        let mut l = SpinLattice::dimer(1.0, 0.3).unwrap();
        l.set_pulse(
            1,
            PulseWaveform::new(Polarization::Linear, 1.2, 1.0, 0.8, 1.0).unwrap(),
        )
        .unwrap();
        let s = crate::models::neel_state(2).unwrap();
        let psi = exact_evolve(&l, &s, 0.0, 2.0, 8).unwrap();
        let rho = exact_evolve_density(&l, &s.to_density(), 0.0, 2.0, 8).unwrap();
        let dev = (rho.matrix() - psi.to_density().matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-8, "density deviation {dev:.3e}");
    }

    #[test]
    fn xx_dimer_step_uses_two_entangling_gates() {
        let l = SpinLattice::dimer(1.0, 0.0).unwrap();
        let c = compile_trotter_step(&l, 0.0, 0.3, TrotterOrder::Second).unwrap();
        assert_eq!(c.count_gates().two_qubit, 2);
        // general XXZ bond needs three
        let lz = SpinLattice::dimer(1.0, 0.5).unwrap();
        let cz = compile_trotter_step(&lz, 0.0, 0.3, TrotterOrder::Second).unwrap();
        assert_eq!(cz.count_gates().two_qubit, 3);
        // pure Ising bond needs two
        let li = SpinLattice::dimer(0.0, 0.5).unwrap();
        let ci = compile_trotter_step(&li, 0.0, 0.3, TrotterOrder::Second).unwrap();
        assert_eq!(ci.count_gates().two_qubit, 2);
    }

    #[test]
    fn commuting_split_is_exact() {
        // J⊥ = 0 plus z-fields: every layer commutes, one step is exact
        let mut l = SpinLattice::chain(3, 0.0, 0.7).unwrap();
        l.set_static_field(0, [0.0, 0.0, 0.9]).unwrap();
        l.set_static_field(2, [0.0, 0.0, -0.4]).unwrap();
        let dt = 0.8;
        let step = compile_trotter_step(&l, 0.0, dt, TrotterOrder::Second).unwrap();
        let mut s = crate::models::neel_state(3).unwrap();
        let exact = exact_evolve(&l, &s, 0.0, dt, 1).unwrap();
        step.apply_to_state(&mut s).unwrap();
        let dev = aligned_distance(&s, &exact);
        assert!(dev < 1e-10, "one commuting step deviates by {dev:.3e}");
    }

    #[test]
    fn order_two_error_ratio_near_four() {
        // constant non-commuting dimer: bond + transverse static field
        let mut l = SpinLattice::dimer(1.0, 0.0).unwrap();
        l.set_static_field(0, [0.0, 0.0, 1.3]).unwrap();
        l.set_static_field(1, [0.7, 0.0, 0.0]).unwrap();
        let s = crate::models::all_up_state(2).unwrap();
        let horizon = 2.0;
        let exact = exact_evolve(&l, &s, 0.0, horizon, 1).unwrap();
        let err_at = |dt: f64| {
            let n = (horizon / dt).round() as usize;
            let plan = TrotterPlan::new(TrotterOrder::Second, dt, n).unwrap();
            let rec = evolve_trotterized(&l, &s, 0.0, &plan).unwrap();
            aligned_distance(rec.states.last().unwrap(), &exact)
        };
        let ratio = err_at(0.2) / err_at(0.1);
        assert!(
            (3.4..=4.6).contains(&ratio),
            "order-2 error ratio {ratio:.3}"
        );
    }

    #[test]
    fn order_one_error_ratio_near_two() {
        let mut l = SpinLattice::dimer(1.0, 0.0).unwrap();
        l.set_static_field(0, [0.0, 0.0, 1.3]).unwrap();
        // a state the leading commutator term does not annihilate
        let s = crate::models::neel_state(2).unwrap();
        let horizon = 2.0;
        let exact = exact_evolve(&l, &s, 0.0, horizon, 1).unwrap();
        let err_at = |dt: f64| {
            let n = (horizon / dt).round() as usize;
            let plan = TrotterPlan::new(TrotterOrder::First, dt, n).unwrap();
            let rec = evolve_trotterized(&l, &s, 0.0, &plan).unwrap();
            aligned_distance(rec.states.last().unwrap(), &exact)
        };
        let ratio = err_at(0.1) / err_at(0.05);
        assert!(
            (1.6..=2.5).contains(&ratio),
            "order-1 error ratio {ratio:.3}"
        );
    }

    #[test]
    fn error_decreases_monotonically_with_dt_on_driven_dimer() {
        let mut l = SpinLattice::dimer(1.0, 0.0).unwrap();
        for site in 0..2 {
            l.set_pulse(
                site,
                PulseWaveform::new(Polarization::Circular, 2.0, 1.0, 0.7, 2.0).unwrap(),
            )
            .unwrap();
        }
        let s = crate::models::all_up_state(2).unwrap();
        let horizon = 4.0;
        let exact = exact_evolve(&l, &s, 0.0, horizon, 16).unwrap();
        let mut last = f64::INFINITY;
        for dt in [0.4, 0.2, 0.1, 0.05] {
            let n = (horizon / dt).round() as usize;
            let plan = TrotterPlan::new(TrotterOrder::Second, dt, n).unwrap();
            let rec = evolve_trotterized(&l, &s, 0.0, &plan).unwrap();
            let err = aligned_distance(rec.states.last().unwrap(), &exact);
            assert!(
                err <= last + 1e-12,
                "error not monotone: {err:.3e} after {last:.3e} at dt={dt}"
            );
            last = err;
        }
    }

    #[test]
    fn compiled_steps_preserve_norm() {
        let mut l = SpinLattice::ring(4, 0.9, 0.2).unwrap();
        l.set_pulse(
            2,
            PulseWaveform::new(Polarization::Circular, 1.5, 1.0, 0.7, 1.0).unwrap(),
        )
        .unwrap();
        let mut s = crate::models::neel_state(4).unwrap();
        for k in 0..6 {
            let c = compile_trotter_step(&l, 0.3 * k as f64, 0.3, TrotterOrder::Second).unwrap();
            c.apply_to_state(&mut s).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trotterized_quench_conserves_particle_number() {
        let m = QuenchModel::standard(QuenchSchedule::new(1.0, 2.0).unwrap());
        let (_, gs) = m.pre_quench_ground_state();
        let plan = TrotterPlan::new(TrotterOrder::Second, 0.2, 5).unwrap();
        let rec = evolve_trotterized(&m, &gs, 0.0, &plan).unwrap();
        let n0 = crate::models::total_magnetization(&gs.probabilities());
        for state in &rec.states {
            let n = crate::models::total_magnetization(&state.probabilities());
            // total S^z is an affine function of particle number
            assert!((n - n0).abs() < 1e-9);
        }
    }

    #[test]
    fn merging_shrinks_circuits_without_changing_the_unitary() {
        let m = QuenchModel::standard(QuenchSchedule::new(1.0, 2.0).unwrap());
        let plan = TrotterPlan::new(TrotterOrder::Second, 0.2, 5).unwrap();
        let merged = compile_evolution(&m, 0.0, &plan).unwrap();
        let naive = compile_evolution(&m, 0.0, &plan.without_merging()).unwrap();
        // ring of 4, XXZ bonds (3 CX each), 2 bonds per parity layer:
        // each unmerged step costs 6+6+6 CX; merging welds the 4 interior
        // boundaries at 6 CX apiece
        assert_eq!(naive.count_gates().two_qubit, 5 * 18);
        assert_eq!(merged.count_gates().two_qubit, 5 * 18 - 4 * 6);
        // bond-gate phases are linear in dt, so the merged circuit equals
        // the naive one as a matrix, not just up to phase
        let dev = (merged.unitary().unwrap() - naive.unitary().unwrap())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12, "merged/naive unitary deviation {dev:.3e}");
    }

    #[test]
    fn merging_applies_to_driven_chains_with_constant_bonds() {
        let mut l = SpinLattice::chain(4, 1.0, 0.0).unwrap();
        l.set_pulse(
            0,
            PulseWaveform::new(Polarization::Linear, PI / 2.0, 1.0, 1.0, 1.5).unwrap(),
        )
        .unwrap();
        let plan = TrotterPlan::new(TrotterOrder::Second, 0.5, 4).unwrap();
        let merged = compile_evolution(&l, 0.0, &plan).unwrap();
        let naive = compile_evolution(&l, 0.0, &plan.without_merging()).unwrap();
        // odd half-layers merge across all 3 interior boundaries (the bond
        // couplings are constant) even though the drive layer changes per
        // step; 2 odd XX bonds × 2 CX per boundary
        assert_eq!(
            naive.count_gates().two_qubit - merged.count_gates().two_qubit,
            3 * 4
        );
        let dev = (merged.unitary().unwrap() - naive.unitary().unwrap())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12, "merged/naive unitary deviation {dev:.3e}");
    }

    #[test]
    fn rabi_step_compiles_to_a_single_u3() {
        let model = RabiModel::new(RabiParams::new(1.0, 2.0, 1.0, 0.5).unwrap());
        let c = compile_trotter_step(&model, 0.0, 0.05, TrotterOrder::Second).unwrap();
        assert_eq!(c.len(), 1);
        assert!(matches!(c.gates()[0], Gate::U3 { .. }));
    }

    #[test]
    fn zero_steps_yield_initial_state_only() {
        let l = SpinLattice::dimer(1.0, 0.0).unwrap();
        let s = crate::models::neel_state(2).unwrap();
        let plan = TrotterPlan::new(TrotterOrder::Second, 0.1, 0).unwrap();
        let rec = evolve_trotterized(&l, &s, 0.0, &plan).unwrap();
        assert_eq!(rec.states.len(), 1);
        assert_eq!(rec.times, vec![0.0]);
        assert!(rec.step_counts.is_empty());
    }

    #[test]
    fn eight_site_edge_driven_chain_gate_count_report() {
        let mut l = SpinLattice::chain(8, 1.0, 0.0).unwrap();
        l.set_pulse(
            0,
            PulseWaveform::new(Polarization::Linear, PI / 2.0, 1.0, 1.0, 1.5).unwrap(),
        )
        .unwrap();
        let plan = TrotterPlan::new(TrotterOrder::Second, 0.875, 8).unwrap();
        let merged = compile_evolution(&l, 0.0, &plan).unwrap();
        let counts = merged.count_gates();
        println!(
            "8-site edge-driven chain, 8 merged order-2 steps: {} entangling / {} single-qubit gates",
            counts.two_qubit, counts.single_qubit
        );
        assert!(counts.two_qubit > 0);
        // merged layout: odd layer (4 bonds) appears 9 times (half at the
        // edges, full in between), even layer (3 bonds) 8 times, 2 CX per
        // XX bond
        assert_eq!(counts.two_qubit, 9 * 4 * 2 + 8 * 3 * 2);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        assert!(matches!(
            TrotterPlan::new(TrotterOrder::Second, 0.0, 3),
            Err(Error::BadTimeStep(_))
        ));
        assert!(matches!(
            TrotterPlan::new(TrotterOrder::Second, -0.1, 3),
            Err(Error::BadTimeStep(_))
        ));
        let l = SpinLattice::dimer(1.0, 0.0).unwrap();
        assert!(compile_trotter_step(&l, 0.0, f64::NAN, TrotterOrder::First).is_err());
    }

    #[test]
    fn overlapping_layer_bonds_are_rejected() {
        // two bonds from site 0 land in the same parity layer
        let mut l = SpinLattice::new(3).unwrap();
        l.add_bond(0, 1, 1.0, 0.0).unwrap();
        l.add_bond(0, 2, 1.0, 0.0).unwrap();
        assert!(matches!(
            compile_trotter_step(&l, 0.0, 0.1, TrotterOrder::Second),
            Err(Error::OverlappingBonds { .. })
        ));
    }
}
