//! Calibration-driven noise: channels, noisy execution, readout confusion,
//! and seeded shot sampling.
//!
//! Calibration snapshots (per-qubit `t1`/`t2` lifetimes, single-qubit and
//! CNOT error rates, readout error rates) load from TOML files; five
//! snapshots of real superconducting devices ship with the crate (see
//! [`BUNDLED_CALIBRATIONS`]). A [`NoiseModel`] maps circuit qubits onto
//! calibrated device qubits and turns the rates into channels:
//!
//! * each gate applies its ideal unitary, then a depolarizing channel with
//!   the reported error rate (single-qubit rate for `u3`/`u1`/`ry`, per-edge
//!   CNOT rate for `cx`),
//! * followed by amplitude damping `p = 1 − exp(−d/t1)` and pure dephasing
//!   with rate `1/T_φ = 1/t2 − 1/(2 t1)` (clamped at zero) for the gate
//!   duration `d` on every qubit the gate touches.
//!
//! Reported error rates are used directly as depolarizing probabilities —
//! an explicit modeling approximation; hardware reports average
//! randomized-benchmarking figures whose exact conversion is out of scope.
//!
//! Readout is a classical confusion matrix `Λ` with `Λ[measured][prepared]`
//! so that `p_observed = Λ · p_ideal` holds literally, built as a tensor
//! product of symmetric per-qubit bit flips. Shot noise comes from seeded
//! multinomial sampling; [`derive_seed`] gives independent streams per task
//! so parallel execution order never changes results.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::circuit::{Circuit, Gate};
use crate::qcore::{self, DensityMatrix, QuantumChannel};

/// Default wall-clock duration of a single-qubit gate, in nanoseconds.
pub const DEFAULT_SINGLE_GATE_NS: f64 = 35.0;

/// Default wall-clock duration of a CNOT, in nanoseconds.
pub const DEFAULT_CX_GATE_NS: f64 = 300.0;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read calibration file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("calibration parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{path}: rate {value} outside [0, 1]")]
    RateOutOfRange { path: String, value: f64 },
    #[error("{path}: value {value} must be positive and finite")]
    NonPositiveValue { path: String, value: f64 },
    #[error("duplicate calibration row for qubit {0}")]
    DuplicateQubit(usize),
    #[error("edge {control} -> {target} references a qubit without a calibration row")]
    UnknownEdgeQubit { control: usize, target: usize },
    #[error("edge {0} -> {0} connects a qubit to itself")]
    SelfEdge(usize),
    #[error("qubit map entry {0} has no calibration row")]
    UnmappedQubit(usize),
    #[error("qubit map lists device qubit {0} twice")]
    DuplicateMapEntry(usize),
    #[error("no bundled calibration named {0:?} (available: toronto_fig1, montreal_fig2bc, toronto_fig2d, montreal_fig2e, bogota_fig3)")]
    UnknownBundle(String),
    #[error("probability vector has {got} entries, expected {expected}")]
    BadProbabilityLength { expected: usize, got: usize },
    #[error("confusion-matrix column {column} sums to {sum}, not 1")]
    BadColumnSum { column: usize, sum: f64 },
    #[error("confusion-matrix entry ({row}, {column}) is negative: {value}")]
    NegativeEntry {
        row: usize,
        column: usize,
        value: f64,
    },
    #[error("shots must be at least 1")]
    ZeroShots,
    #[error(transparent)]
    Core(#[from] qcore::Error),
}

// ---------------------------------------------------------------------------
// Calibration data
// ---------------------------------------------------------------------------

/// One qubit's calibration row: lifetimes in microseconds, error
/// probabilities dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitCalibration {
    pub qubit: usize,
    pub t1_us: f64,
    pub t2_us: f64,
    pub u3_error: f64,
    pub readout_error: f64,
}

/// Directed CNOT error rate between two device qubits.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeCalibration {
    pub control: usize,
    pub target: usize,
    pub cnot_error: f64,
}

/// Gate durations used to scale decoherence, overridable per file.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateDurations {
    #[serde(default = "default_single_ns")]
    pub single_ns: f64,
    #[serde(default = "default_cx_ns")]
    pub cx_ns: f64,
}

fn default_single_ns() -> f64 {
    DEFAULT_SINGLE_GATE_NS
}

fn default_cx_ns() -> f64 {
    DEFAULT_CX_GATE_NS
}

impl Default for GateDurations {
    fn default() -> Self {
        Self {
            single_ns: DEFAULT_SINGLE_GATE_NS,
            cx_ns: DEFAULT_CX_GATE_NS,
        }
    }
}

/// A full device snapshot: per-qubit rows plus directed CNOT edges.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceCalibration {
    pub device: String,
    pub date: String,
    pub qubits: Vec<QubitCalibration>,
    #[serde(default)]
    pub edges: Vec<EdgeCalibration>,
    #[serde(default)]
    pub durations: GateDurations,
}

/// Calibration snapshots bundled with the crate, by name.
pub const BUNDLED_CALIBRATIONS: [(&str, &str); 5] = [
    (
        "toronto_fig1",
        include_str!("../data/calibrations/toronto_fig1.toml"),
    ),
    (
        "montreal_fig2bc",
        include_str!("../data/calibrations/montreal_fig2bc.toml"),
    ),
    (
        "toronto_fig2d",
        include_str!("../data/calibrations/toronto_fig2d.toml"),
    ),
    (
        "montreal_fig2e",
        include_str!("../data/calibrations/montreal_fig2e.toml"),
    ),
    (
        "bogota_fig3",
        include_str!("../data/calibrations/bogota_fig3.toml"),
    ),
];

/// Load one of the bundled calibration snapshots by name.
pub fn bundled_calibration(name: &str) -> Result<DeviceCalibration, Error> {
    let text = BUNDLED_CALIBRATIONS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::UnknownBundle(name.to_string()))?;
    parse_calibration(text)
}

/// Parse and validate a calibration document.
pub fn parse_calibration(text: &str) -> Result<DeviceCalibration, Error> {
    let cal: DeviceCalibration = toml::from_str(text)?;
    validate_calibration(&cal)?;
    Ok(cal)
}

/// Read a calibration file from disk.
pub fn load_calibration(path: &Path) -> Result<DeviceCalibration, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_calibration(&text)
}

fn check_rate(path: String, value: f64) -> Result<(), Error> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(Error::RateOutOfRange { path, value });
    }
    Ok(())
}

fn check_positive(path: String, value: f64) -> Result<(), Error> {
    if !(value > 0.0) {
        return Err(Error::NonPositiveValue { path, value });
    }
    Ok(())
}

fn validate_calibration(cal: &DeviceCalibration) -> Result<(), Error> {
    let mut seen = std::collections::HashSet::new();
    for (k, q) in cal.qubits.iter().enumerate() {
        if !seen.insert(q.qubit) {
            return Err(Error::DuplicateQubit(q.qubit));
        }
        check_positive(format!("qubits[{k}].t1_us"), q.t1_us)?;
        check_positive(format!("qubits[{k}].t2_us"), q.t2_us)?;
        check_rate(format!("qubits[{k}].u3_error"), q.u3_error)?;
        check_rate(format!("qubits[{k}].readout_error"), q.readout_error)?;
    }
    for (k, e) in cal.edges.iter().enumerate() {
        if e.control == e.target {
            return Err(Error::SelfEdge(e.control));
        }
        for q in [e.control, e.target] {
            if !seen.contains(&q) {
                return Err(Error::UnknownEdgeQubit {
                    control: e.control,
                    target: e.target,
                });
            }
        }
        check_rate(format!("edges[{k}].cnot_error"), e.cnot_error)?;
    }
    check_positive("durations.single_ns".into(), cal.durations.single_ns)?;
    check_positive("durations.cx_ns".into(), cal.durations.cx_ns)?;
    Ok(())
}

impl DeviceCalibration {
    /// The calibration row for a device qubit id.
    pub fn qubit(&self, id: usize) -> Option<&QubitCalibration> {
        self.qubits.iter().find(|q| q.qubit == id)
    }
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

/// Single-qubit depolarizing channel:
/// `ρ → (1−p)ρ + (p/3)(XρX + YρY + ZρZ)`.
pub fn depolarizing_1q(p: f64) -> QuantumChannel {
    let mut kraus = vec![DMatrix::<C64>::identity(2, 2).scale((1.0 - p).sqrt())];
    if p > 0.0 {
        let w = (p / 3.0).sqrt();
        kraus.push(qcore::pauli_x().scale(w));
        kraus.push(qcore::pauli_y().scale(w));
        kraus.push(qcore::pauli_z().scale(w));
    }
    QuantumChannel::new(kraus).expect("depolarizing Kraus set is complete")
}

/// Two-qubit depolarizing channel: identity with probability `1−p`, each of
/// the 15 non-identity two-qubit Paulis with probability `p/15`.
pub fn depolarizing_2q(p: f64) -> QuantumChannel {
    let mut kraus = vec![DMatrix::<C64>::identity(4, 4).scale((1.0 - p).sqrt())];
    if p > 0.0 {
        let w = (p / 15.0).sqrt();
        let paulis = [
            qcore::pauli_i(),
            qcore::pauli_x(),
            qcore::pauli_y(),
            qcore::pauli_z(),
        ];
        for a in 0..4 {
            for b in 0..4 {
                if a == 0 && b == 0 {
                    continue;
                }
                kraus.push(qcore::kron(&[paulis[b].clone(), paulis[a].clone()]).scale(w));
            }
        }
    }
    QuantumChannel::new(kraus).expect("depolarizing Kraus set is complete")
}

/// Amplitude damping toward `|0⟩` with excited-state decay probability `p`.
pub fn amplitude_damping(p: f64) -> QuantumChannel {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let k0 = DMatrix::from_row_slice(2, 2, &[o, z, z, C64::new((1.0 - p).sqrt(), 0.0)]);
    if p <= 0.0 {
        return QuantumChannel::new(vec![k0]).expect("identity-like Kraus");
    }
    let k1 = DMatrix::from_row_slice(2, 2, &[z, C64::new(p.sqrt(), 0.0), z, z]);
    QuantumChannel::new(vec![k0, k1]).expect("amplitude-damping Kraus set is complete")
}

/// Pure dephasing: phase flip with probability `q`.
pub fn phase_flip(q: f64) -> QuantumChannel {
    let mut kraus = vec![DMatrix::<C64>::identity(2, 2).scale((1.0 - q).sqrt())];
    if q > 0.0 {
        kraus.push(qcore::pauli_z().scale(q.sqrt()));
    }
    QuantumChannel::new(kraus).expect("phase-flip Kraus set is complete")
}

/// Decay and dephasing probabilities for a gate of duration `duration_ns`
/// on a qubit with lifetimes `t1_us`, `t2_us`.
///
/// Pure dephasing uses `1/T_φ = 1/t2 − 1/(2 t1)`, clamped at zero when the
/// reported `t2` exceeds the amplitude-damping limit `2 t1`; the flip
/// probability is `q = (1 − exp(−d/T_φ))/2`.
pub fn decoherence_probabilities(t1_us: f64, t2_us: f64, duration_ns: f64) -> (f64, f64) {
    let d_us = duration_ns * 1e-3;
    let p_decay = 1.0 - (-d_us / t1_us).exp();
    let inv_t_phi = (1.0 / t2_us - 0.5 / t1_us).max(0.0);
    let q_phase = 0.5 * (1.0 - (-d_us * inv_t_phi).exp());
    (p_decay, q_phase)
}

// ---------------------------------------------------------------------------
// Noise model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct QubitNoise {
    t1_us: f64,
    t2_us: f64,
    u3_error: f64,
    readout_error: f64,
}

/// Gate-level noise for one circuit: per-qubit rates and lifetimes (mapped
/// from device qubits) plus directed CNOT error rates.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    qubits: Vec<QubitNoise>,
    cx_rates: HashMap<(usize, usize), f64>,
    mean_cx_rate: Option<f64>,
    durations: GateDurations,
    device: String,
}

impl NoiseModel {
    /// Map `qubit_map[k]` (a device qubit id) onto circuit qubit `k` and
    /// collect the rates for every calibrated edge among the mapped qubits.
    pub fn from_calibration(cal: &DeviceCalibration, qubit_map: &[usize]) -> Result<Self, Error> {
        qcore::check_qubit_count(qubit_map.len()).map_err(Error::Core)?;
        let mut used = std::collections::HashSet::new();
        let mut qubits = Vec::with_capacity(qubit_map.len());
        for &id in qubit_map {
            if !used.insert(id) {
                return Err(Error::DuplicateMapEntry(id));
            }
            let row = cal.qubit(id).ok_or(Error::UnmappedQubit(id))?;
            qubits.push(QubitNoise {
                t1_us: row.t1_us,
                t2_us: row.t2_us,
                u3_error: row.u3_error,
                readout_error: row.readout_error,
            });
        }
        let index_of = |id: usize| qubit_map.iter().position(|&q| q == id);
        let mut cx_rates = HashMap::new();
        for e in &cal.edges {
            if let (Some(c), Some(t)) = (index_of(e.control), index_of(e.target)) {
                cx_rates.insert((c, t), e.cnot_error);
            }
        }
        let mean_cx_rate = if cal.edges.is_empty() {
            None
        } else {
            Some(cal.edges.iter().map(|e| e.cnot_error).sum::<f64>() / cal.edges.len() as f64)
        };
        Ok(Self {
            qubits,
            cx_rates,
            mean_cx_rate,
            durations: cal.durations,
            device: cal.device.clone(),
        })
    }

    /// A model with zero error rates and infinite lifetimes: noisy
    /// execution reduces to ideal execution.
    pub fn ideal(n_qubits: usize) -> Result<Self, Error> {
        qcore::check_qubit_count(n_qubits).map_err(Error::Core)?;
        Ok(Self {
            qubits: vec![
                QubitNoise {
                    t1_us: f64::INFINITY,
                    t2_us: f64::INFINITY,
                    u3_error: 0.0,
                    readout_error: 0.0,
                };
                n_qubits
            ],
            cx_rates: HashMap::new(),
            mean_cx_rate: Some(0.0),
            durations: GateDurations::default(),
            device: "ideal".into(),
        })
    }

    /// A model with symmetric readout error `epsilon` on every qubit and no
    /// gate noise (useful for isolating readout effects).
    pub fn readout_only(n_qubits: usize, epsilon: f64) -> Result<Self, Error> {
        check_rate("readout epsilon".into(), epsilon)?;
        let mut m = Self::ideal(n_qubits)?;
        for q in &mut m.qubits {
            q.readout_error = epsilon;
        }
        Ok(m)
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn device(&self) -> &str {
        &self.device
    }

    pub fn durations(&self) -> GateDurations {
        self.durations
    }

    /// Per-circuit-qubit readout error rates.
    pub fn readout_rates(&self) -> Vec<f64> {
        self.qubits.iter().map(|q| q.readout_error).collect()
    }

    /// Depolarizing rate for a CNOT between two circuit qubits: the
    /// calibrated directed edge, its reverse, or the device-mean fallback.
    pub fn cx_rate(&self, control: usize, target: usize) -> f64 {
        self.cx_rates
            .get(&(control, target))
            .or_else(|| self.cx_rates.get(&(target, control)))
            .copied()
            .or(self.mean_cx_rate)
            .unwrap_or(0.0)
    }

    /// Human-readable warnings for every distinct CNOT pair in `circuit`
    /// that has no calibrated edge and falls back to the device mean.
    pub fn missing_edge_warnings(&self, circuit: &Circuit) -> Vec<String> {
        let mut missing = std::collections::BTreeSet::new();
        for g in circuit.gates() {
            if let Gate::Cx { control, target } = *g {
                let calibrated = self.cx_rates.contains_key(&(control, target))
                    || self.cx_rates.contains_key(&(target, control));
                if !calibrated {
                    missing.insert((control, target));
                }
            }
        }
        missing
            .into_iter()
            .map(|(c, t)| {
                format!(
                    "no calibrated CNOT edge for circuit qubits {c} -> {t} on {}; using fallback rate {:.3e}",
                    self.device,
                    self.cx_rate(c, t)
                )
            })
            .collect()
    }

    /// The readout confusion matrix implied by this model's per-qubit rates.
    pub fn confusion(&self) -> ConfusionMatrix {
        ConfusionMatrix::tensored(&self.readout_rates()).expect("validated rates")
    }
}

/// Run `circuit` on `rho` with full gate-level noise: per gate, the ideal
/// unitary, a depolarizing channel at the gate's error rate, then
/// amplitude damping and dephasing on the touched qubits for the gate
/// duration. Readout error is *not* applied here; see
/// [`NoiseModel::confusion`] and [`sample_counts`].
pub fn apply_noisy_circuit(
    rho: &DensityMatrix,
    circuit: &Circuit,
    nm: &NoiseModel,
) -> Result<DensityMatrix, Error> {
    let n = nm.n_qubits();
    if circuit.n_qubits() != n || rho.n_qubits() != n {
        return Err(Error::Core(qcore::Error::DimensionMismatch {
            expected: 1 << n,
            got: 1 << circuit.n_qubits(),
        }));
    }
    // per-qubit channels are reused across gates
    let dep1: Vec<QuantumChannel> = nm
        .qubits
        .iter()
        .map(|q| depolarizing_1q(q.u3_error))
        .collect();
    let decohere = |q: &QubitNoise, d_ns: f64| -> QuantumChannel {
        let (p, qp) = decoherence_probabilities(q.t1_us, q.t2_us, d_ns);
        amplitude_damping(p)
            .then(&phase_flip(qp))
            .expect("composition of 1-qubit channels")
    };
    let deco_single: Vec<QuantumChannel> = nm
        .qubits
        .iter()
        .map(|q| decohere(q, nm.durations.single_ns))
        .collect();
    let deco_cx: Vec<QuantumChannel> = nm
        .qubits
        .iter()
        .map(|q| decohere(q, nm.durations.cx_ns))
        .collect();
    let mut dep2: HashMap<(usize, usize), QuantumChannel> = HashMap::new();

    let mut state = rho.clone();
    for g in circuit.gates() {
        let targets = g.qubits();
        state.apply_unitary(&g.unitary(), &targets).map_err(Error::Core)?;
        match *g {
            Gate::Cx { control, target } => {
                let ch = dep2
                    .entry((control, target))
                    .or_insert_with(|| depolarizing_2q(nm.cx_rate(control, target)));
                state = ch.apply(&state, &targets).map_err(Error::Core)?;
                for q in [control, target] {
                    state = deco_cx[q].apply(&state, &[q]).map_err(Error::Core)?;
                }
            }
            _ => {
                let q = targets[0];
                state = dep1[q].apply(&state, &[q]).map_err(Error::Core)?;
                state = deco_single[q].apply(&state, &[q]).map_err(Error::Core)?;
            }
        }
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// Readout confusion
// ---------------------------------------------------------------------------

/// Classical readout map `M[measured][prepared]`; columns are probability
/// distributions and `p_observed = M · p_ideal`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    n_qubits: usize,
    m: DMatrix<f64>,
}

impl ConfusionMatrix {
    /// Wrap an explicit matrix, validating column-stochasticity.
    pub fn from_matrix(n_qubits: usize, m: DMatrix<f64>) -> Result<Self, Error> {
        qcore::check_qubit_count(n_qubits).map_err(Error::Core)?;
        let dim = 1usize << n_qubits;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Core(qcore::Error::DimensionMismatch {
                expected: dim,
                got: m.nrows(),
            }));
        }
        for c in 0..dim {
            let mut sum = 0.0;
            for r in 0..dim {
                let v = m[(r, c)];
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: r,
                        column: c,
                        value: v,
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::BadColumnSum { column: c, sum });
            }
        }
        Ok(Self { n_qubits, m })
    }

    /// Perfect readout.
    pub fn identity(n_qubits: usize) -> Result<Self, Error> {
        qcore::check_qubit_count(n_qubits).map_err(Error::Core)?;
        let dim = 1usize << n_qubits;
        Ok(Self {
            n_qubits,
            m: DMatrix::identity(dim, dim),
        })
    }

    /// Tensor product of symmetric per-qubit bit flips:
    /// `M = ⊗_q [[1−ε_q, ε_q], [ε_q, 1−ε_q]]` in the register's bit order.
    pub fn tensored(epsilons: &[f64]) -> Result<Self, Error> {
        qcore::check_qubit_count(epsilons.len()).map_err(Error::Core)?;
        for (q, &e) in epsilons.iter().enumerate() {
            check_rate(format!("epsilon[{q}]"), e)?;
        }
        let n = epsilons.len();
        let dim = 1usize << n;
        let mut m = DMatrix::zeros(dim, dim);
        for prepared in 0..dim {
            for measured in 0..dim {
                let mut p = 1.0;
                for (q, &e) in epsilons.iter().enumerate() {
                    let same = (prepared >> q) & 1 == (measured >> q) & 1;
                    p *= if same { 1.0 - e } else { e };
                }
                m[(measured, prepared)] = p;
            }
        }
        Ok(Self { n_qubits: n, m })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// `p_observed = M · p_ideal`.
    pub fn apply(&self, probs: &[f64]) -> Result<Vec<f64>, Error> {
        let dim = 1usize << self.n_qubits;
        if probs.len() != dim {
            return Err(Error::BadProbabilityLength {
                expected: dim,
                got: probs.len(),
            });
        }
        let p = nalgebra::DVector::from_column_slice(probs);
        Ok((&self.m * p).iter().copied().collect())
    }
}

/// Analytic confusion matrix for the listed device qubits of a calibration.
pub fn build_confusion(cal: &DeviceCalibration, qubits: &[usize]) -> Result<ConfusionMatrix, Error> {
    let eps = qubits
        .iter()
        .map(|&id| {
            cal.qubit(id)
                .map(|q| q.readout_error)
                .ok_or(Error::UnmappedQubit(id))
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    ConfusionMatrix::tensored(&eps)
}

/// Simulate the readout-calibration procedure: prepare every computational
/// basis state with X gates under the full noise model, measure with
/// readout error and finite shots, and assemble the empirical confusion
/// matrix (columns sum to 1 exactly).
pub fn calibration_experiment(
    nm: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<ConfusionMatrix, Error> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let n = nm.n_qubits();
    let dim = 1usize << n;
    let readout = nm.confusion();
    let mut m = DMatrix::zeros(dim, dim);
    for prepared in 0..dim {
        let mut circuit = Circuit::new(n).map_err(Error::Core)?;
        for q in 0..n {
            if (prepared >> q) & 1 == 1 {
                circuit
                    .push(Gate::U3 {
                        theta: PI,
                        phi: 0.0,
                        lambda: PI,
                        qubit: q,
                    })
                    .map_err(Error::Core)?;
            }
        }
        let rho0 = qcore::QuantumState::zero(n).map_err(Error::Core)?.to_density();
        let noisy = apply_noisy_circuit(&rho0, &circuit, nm)?;
        let p = readout.apply(&clamped_probabilities(&noisy))?;
        let counts = sample_multinomial(&p, shots, derive_seed(seed, prepared as u64));
        for (measured, &c) in counts.iter().enumerate() {
            m[(measured, prepared)] = c as f64 / shots as f64;
        }
    }
    ConfusionMatrix::from_matrix(n, m)
}

// ---------------------------------------------------------------------------
// Shot sampling
// ---------------------------------------------------------------------------

/// Measured shot counts keyed by rendered bitstring (qubit 0 leftmost);
/// zero-count outcomes are omitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsHistogram {
    n_qubits: usize,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl CountsHistogram {
    pub fn from_index_counts(n_qubits: usize, counts: &[u64]) -> Result<Self, Error> {
        qcore::check_qubit_count(n_qubits).map_err(Error::Core)?;
        if counts.len() != 1 << n_qubits {
            return Err(Error::Core(qcore::Error::DimensionMismatch {
                expected: 1 << n_qubits,
                got: counts.len(),
            }));
        }
        let mut map = BTreeMap::new();
        let mut shots = 0;
        for (idx, &c) in counts.iter().enumerate() {
            shots += c;
            if c > 0 {
                map.insert(qcore::bitstring(idx, n_qubits), c);
            }
        }
        Ok(Self {
            n_qubits,
            shots,
            counts: map,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Total number of shots.
    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// Count for a rendered bitstring (0 when absent).
    pub fn get(&self, bitstring: &str) -> u64 {
        self.counts.get(bitstring).copied().unwrap_or(0)
    }

    /// `(bitstring, count)` pairs in lexicographic bitstring order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Empirical outcome frequencies indexed by basis-state index.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut f = vec![0.0; 1 << self.n_qubits];
        for (k, &c) in &self.counts {
            let idx = qcore::bitstring_index(k).expect("histogram keys are valid bitstrings");
            f[idx] = c as f64 / self.shots as f64;
        }
        f
    }
}

/// Diagonal of `rho` with small negative rounding clamped away and the
/// vector renormalized to sum 1.
pub(crate) fn clamped_probabilities(rho: &DensityMatrix) -> Vec<f64> {
    let mut p: Vec<f64> = rho.diagonal().iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        for v in &mut p {
            *v /= total;
        }
    }
    p
}

fn sample_multinomial(probs: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts[idx] += 1;
    }
    counts
}

/// Draw `shots` samples from `Λ · diag(ρ)` with a dedicated RNG stream.
pub fn sample_counts(
    rho: &DensityMatrix,
    lambda: &ConfusionMatrix,
    shots: u64,
    seed: u64,
) -> Result<CountsHistogram, Error> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    if lambda.n_qubits() != rho.n_qubits() {
        return Err(Error::Core(qcore::Error::DimensionMismatch {
            expected: lambda.n_qubits(),
            got: rho.n_qubits(),
        }));
    }
    let p = lambda.apply(&clamped_probabilities(rho))?;
    let counts = sample_multinomial(&p, shots, seed);
    CountsHistogram::from_index_counts(rho.n_qubits(), &counts)
}

/// Derive an independent RNG seed for task number `task` from a master
/// seed (splitmix-style finalizer); parallel tasks seeded this way produce
/// results independent of scheduling order.
pub fn derive_seed(master: u64, task: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(task.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
