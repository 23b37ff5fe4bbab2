//! Experiment configs, the four-lane runner, and its file outputs.
//!
//! An [`ExperimentConfig`] names one of five built-in experiment families
//! and fixes everything a run depends on: model parameters, the Trotter
//! plan, the device calibration, shot count, master seed, and which
//! mitigation stages are enabled. [`run_experiment`] executes the config
//! and returns a [`ResultTable`] with one row per (time point, observable)
//! and four value lanes per row:
//!
//! 1. `exact` — reference Schrödinger evolution of the ideal initial state
//!    (always populated; the yardstick for every other lane);
//! 2. `trotter_ideal` — the compiled circuit applied without noise,
//!    isolating pure time-discretization error;
//! 3. `noisy_raw` — density-matrix simulation under the calibrated noise
//!    model, readout confusion, and finite-shot sampling;
//! 4. `mitigated` — lane 3 post-processed by the enabled mitigation
//!    stages, applied in the fixed order readout inversion → zero-noise
//!    extrapolation → symmetry. The `zne` column holds the intermediate
//!    result right after extrapolation (empty when ZNE is disabled).
//!
//! Every time point is an independent run of the full circuit compiled
//! from `t = 0`, exactly as a hardware experiment would execute it; later
//! points therefore carry deeper circuits and more noise. Lane failures
//! are recorded per row and never abort the other lanes.
//!
//! The fermionic quench family (`E5_quench`) replaces direct sampling with
//! full state tomography at every time point: the noisy lanes reconstruct
//! the density matrix from all `3^n` measurement settings, project it to
//! the physical set, optionally extrapolate each matrix element to zero
//! noise and project onto the conserved particle-number sector, and only
//! then evaluate momentum occupations, filling, Fermi-surface jump, and
//! the half-chain entanglement entropy.
//!
//! [`emit_outputs`] writes three files per run: a CSV of the table, a JSON
//! manifest (config echo, calibration digest, gate counts, warnings — no
//! timestamps), and a plot script that consumes only the CSV. Identical
//! config and seed produce byte-identical files: all randomness flows
//! through counter-derived seeds, so results do not depend on thread
//! scheduling.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::circuit::{Circuit, FoldError, Gate, GateCounts};
use crate::evolve::{self, compile_evolution, exact_evolve, TrotterOrder, TrotterPlan};
use crate::mitigate::{self, InversionMethod};
use crate::models::{
    self, all_up_state, correlation_matrix, correlation_matrix_pure, fermi_jump, filling,
    momentum_distribution, neel_state, Hamiltonian, MomentumGrid, Polarization, PulseWaveform,
    QuenchModel, QuenchSchedule, RabiModel, RabiParams, SpinLattice, TrotterModel,
};
use crate::noise::{
    self, apply_noisy_circuit, bundled_calibration, derive_seed, load_calibration, sample_counts,
    ConfusionMatrix, DeviceCalibration, NoiseModel, BUNDLED_CALIBRATIONS,
};
use crate::par;
use crate::qasm;
use crate::qcore::{self, DensityMatrix, HermitianOperator, QuantumState};
use crate::tomo::{self, TomographyDataset, MAX_TOMOGRAPHY_QUBITS};

/// Version string stamped into every run manifest.
pub const VERSION: &str = concat!("dqlab-v", env!("CARGO_PKG_VERSION"));

/// Default number of measurement samples per histogram.
pub const DEFAULT_SHOTS: u64 = 8192;

/// Default CNOT-fold stretch factor for zero-noise extrapolation.
pub const DEFAULT_ZNE_STRETCH: usize = 3;

/// Calibration name that disables the noise model entirely.
pub const IDEAL_CALIBRATION: &str = "ideal";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown bundled experiment {0:?} (see bundled_experiments())")]
    UnknownBundledExperiment(String),
    #[error("shots must be at least 1")]
    ZeroShots,
    #[error("zne stretch factor must be an odd integer > 1, got {0}")]
    BadZneStretch(usize),
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("qubit map lists {got} device qubits for {expected} model qubits")]
    QubitMapSize { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] models::Error),
    #[error(transparent)]
    Evolve(#[from] evolve::Error),
    #[error(transparent)]
    Noise(#[from] noise::Error),
    #[error(transparent)]
    Tomo(#[from] tomo::Error),
    #[error(transparent)]
    Mitigate(#[from] mitigate::Error),
    #[error(transparent)]
    Qasm(#[from] qasm::Error),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Core(#[from] qcore::Error),
    #[error("manifest serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

/// The five built-in experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    /// One driven spin: occupation probabilities under a precessing field.
    #[serde(rename = "E1_rabi")]
    E1Rabi,
    /// Two exchange-coupled spins hit by a circularly polarized pulse.
    #[serde(rename = "E2_dimer")]
    E2Dimer,
    /// Four-site ring, staggered magnetization after a pulse.
    #[serde(rename = "E3_plaquette")]
    E3Plaquette,
    /// Eight-site chain driven at one edge, site-resolved magnetization.
    #[serde(rename = "E4_chain")]
    E4Chain,
    /// Interaction quench on a four-site fermion ring, observed through
    /// full state tomography.
    #[serde(rename = "E5_quench")]
    E5Quench,
}

impl ExperimentId {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentId::E1Rabi => "E1_rabi",
            ExperimentId::E2Dimer => "E2_dimer",
            ExperimentId::E3Plaquette => "E3_plaquette",
            ExperimentId::E4Chain => "E4_chain",
            ExperimentId::E5Quench => "E5_quench",
        }
    }

    pub fn all() -> [ExperimentId; 5] {
        [
            ExperimentId::E1Rabi,
            ExperimentId::E2Dimer,
            ExperimentId::E3Plaquette,
            ExperimentId::E4Chain,
            ExperimentId::E5Quench,
        ]
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which mitigation stages the mitigated lane applies (in the fixed order
/// readout → ZNE → symmetry).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationToggles {
    #[serde(default)]
    pub readout: bool,
    #[serde(default)]
    pub zne: bool,
    #[serde(default)]
    pub symmetry: bool,
}

/// Time-discretization block of the config; `order` must be 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterSettings {
    pub order: u8,
    pub dt: f64,
    pub n_steps: usize,
}

impl TrotterSettings {
    pub fn plan(&self) -> Result<TrotterPlan, Error> {
        let order = match self.order {
            1 => TrotterOrder::First,
            2 => TrotterOrder::Second,
            other => {
                return Err(Error::BadConfig(format!(
                    "trotter.order must be 1 or 2, got {other}"
                )))
            }
        };
        Ok(TrotterPlan::new(order, self.dt, self.n_steps)?)
    }
}

/// Gaussian-envelope pulse parameters for the lattice experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    /// `"circular"` (rotating in x–y) or `"linear"` (along x).
    pub polarization: String,
    pub h0: f64,
    #[serde(default)]
    pub omega: f64,
    pub tau: f64,
    pub t0: f64,
    /// Site the pulse acts on.
    #[serde(default)]
    pub site: usize,
}

impl PulseParams {
    fn waveform(&self) -> Result<PulseWaveform, Error> {
        let polarization = match self.polarization.as_str() {
            "circular" => Polarization::Circular,
            "linear" => Polarization::Linear,
            other => {
                return Err(Error::BadConfig(format!(
                    "pulse.polarization must be \"circular\" or \"linear\", got {other:?}"
                )))
            }
        };
        Ok(PulseWaveform::new(
            polarization,
            self.h0,
            self.omega,
            self.tau,
            self.t0,
        )?)
    }
}

/// Model parameters. The schema is shared across experiment families;
/// which fields are read (and which defaults apply) depends on the
/// `experiment` id. Unused fields are rejected during validation so a
/// config cannot silently carry ignored numbers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    // Driven single spin (E1): field magnitude, polar angle, precession
    // frequency, and initial y-rotation angle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    // Lattice experiments (E2–E4) and the quench (E5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<usize>,
    /// `"chain"` or `"ring"` (E2–E4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_perp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_z: Option<f64>,
    /// `"all_up"` or `"neel"` (E2–E4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseParams>,
    // Quench-only knobs (E5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_final: Option<f64>,
    /// `"exact"` (inject the reference ground-state amplitudes) or
    /// `"qasm"` (run the bundled preparation circuit under noise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preparation: Option<String>,
    /// `"sampled"` (finite shots per setting) or `"analytic"`
    /// (infinite-shot outcome distributions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tomography: Option<String>,
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

fn default_zne_stretch() -> usize {
    DEFAULT_ZNE_STRETCH
}

/// A complete, reproducible description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Bundled calibration name, path to a calibration file, or
    /// [`IDEAL_CALIBRATION`] for a noise-free run.
    pub calibration: String,
    /// Model qubit `i` runs on calibration row `qubit_map[i]`. Defaults to
    /// the calibration file's row order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_map: Option<Vec<usize>>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_zne_stretch")]
    pub zne_stretch: usize,
    /// Externally logged two-qubit gate count for the same schedule,
    /// echoed into the manifest next to the compiled count for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_two_qubit_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub mitigation: MitigationToggles,
    pub trotter: TrotterSettings,
    #[serde(default)]
    pub model: ModelParams,
}

/// Bundled, ready-to-run configs (name, description, TOML source).
pub const BUNDLED_EXPERIMENTS: [(&str, &str, &str); 5] = [
    (
        "e1_rabi",
        "single driven spin: occupation vs time, readout mitigation",
        include_str!("../data/experiments/e1_rabi.toml"),
    ),
    (
        "e2_dimer",
        "pulsed spin dimer: basis-state populations and total magnetization",
        include_str!("../data/experiments/e2_dimer.toml"),
    ),
    (
        "e3_plaquette",
        "pulsed four-site ring: staggered magnetization, readout + ZNE",
        include_str!("../data/experiments/e3_plaquette.toml"),
    ),
    (
        "e4_chain",
        "edge-driven eight-site chain: site magnetizations, readout + ZNE",
        include_str!("../data/experiments/e4_chain.toml"),
    ),
    (
        "e5_quench",
        "fermion interaction quench: tomography, full mitigation stack",
        include_str!("../data/experiments/e5_quench.toml"),
    ),
];

/// Names and descriptions of the bundled configs.
pub fn bundled_experiments() -> Vec<(&'static str, &'static str)> {
    BUNDLED_EXPERIMENTS
        .iter()
        .map(|&(name, desc, _)| (name, desc))
        .collect()
}

/// Load a bundled config by name (e.g. `"e3_plaquette"`).
pub fn bundled_config(name: &str) -> Result<ExperimentConfig, Error> {
    for (n, _, text) in BUNDLED_EXPERIMENTS {
        if n == name {
            return parse_config(text);
        }
    }
    Err(Error::UnknownBundledExperiment(name.to_string()))
}

/// Parse and validate a config from TOML text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Error> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    validate_config(&cfg)?;
    Ok(cfg)
}

/// Read, parse, and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn validate_config(cfg: &ExperimentConfig) -> Result<(), Error> {
    if cfg.shots == 0 {
        return Err(Error::ZeroShots);
    }
    cfg.trotter.plan()?;
    if cfg.mitigation.zne && (cfg.zne_stretch < 3 || cfg.zne_stretch % 2 == 0) {
        return Err(Error::BadZneStretch(cfg.zne_stretch));
    }
    // Reject parameters that this experiment family would silently ignore.
    let m = &cfg.model;
    let lattice_fields_used = matches!(
        cfg.experiment,
        ExperimentId::E2Dimer | ExperimentId::E3Plaquette | ExperimentId::E4Chain
    );
    let mut stray: Vec<&str> = Vec::new();
    if cfg.experiment != ExperimentId::E1Rabi {
        if m.theta.is_some() {
            stray.push("theta");
        }
        if m.alpha.is_some() {
            stray.push("alpha");
        }
        if m.h0.is_some() {
            stray.push("h0");
        }
        if m.omega.is_some() {
            stray.push("omega");
        }
    }
    if !lattice_fields_used {
        if m.topology.is_some() {
            stray.push("topology");
        }
        if m.j_z.is_some() {
            stray.push("j_z");
        }
        if m.initial_state.is_some() {
            stray.push("initial_state");
        }
        if m.pulse.is_some() {
            stray.push("pulse");
        }
    }
    if cfg.experiment != ExperimentId::E5Quench {
        if m.u_final.is_some() {
            stray.push("u_final");
        }
        if m.preparation.is_some() {
            stray.push("preparation");
        }
        if m.tomography.is_some() {
            stray.push("tomography");
        }
        if cfg.experiment == ExperimentId::E1Rabi {
            if m.n_sites.is_some() {
                stray.push("n_sites");
            }
            if m.j_perp.is_some() {
                stray.push("j_perp");
            }
        }
    }
    if !stray.is_empty() {
        return Err(Error::BadConfig(format!(
            "model parameters {stray:?} are not used by {}",
            cfg.experiment
        )));
    }
    if cfg.experiment == ExperimentId::E5Quench {
        let n = m.n_sites.unwrap_or(4);
        if n > MAX_TOMOGRAPHY_QUBITS {
            return Err(Error::BadConfig(format!(
                "E5_quench performs full tomography and supports at most \
                 {MAX_TOMOGRAPHY_QUBITS} sites, got {n}"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Result table
// ---------------------------------------------------------------------------

/// Value lanes of a [`ResultRow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Exact,
    TrotterIdeal,
    NoisyRaw,
    Mitigated,
    Zne,
}

impl Lane {
    pub fn label(self) -> &'static str {
        match self {
            Lane::Exact => "exact",
            Lane::TrotterIdeal => "trotter_ideal",
            Lane::NoisyRaw => "noisy_raw",
            Lane::Mitigated => "mitigated",
            Lane::Zne => "zne",
        }
    }
}

/// One (time, observable) entry with all lane values. Empty lanes are
/// `None` (disabled stage or recorded failure).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub t: f64,
    pub observable: String,
    pub exact: Option<f64>,
    pub trotter_ideal: Option<f64>,
    pub noisy_raw: Option<f64>,
    pub mitigated: Option<f64>,
    pub zne: Option<f64>,
    pub sigma: Option<f64>,
}

impl ResultRow {
    pub fn lane(&self, lane: Lane) -> Option<f64> {
        match lane {
            Lane::Exact => self.exact,
            Lane::TrotterIdeal => self.trotter_ideal,
            Lane::NoisyRaw => self.noisy_raw,
            Lane::Mitigated => self.mitigated,
            Lane::Zne => self.zne,
        }
    }
}

/// A lane that failed at one time point, with the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneFailure {
    pub t: f64,
    pub lane: String,
    pub message: String,
}

/// Single- and two-qubit gate totals for one circuit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GateCountEntry {
    pub single_qubit: usize,
    pub two_qubit: usize,
}

impl From<GateCounts> for GateCountEntry {
    fn from(c: GateCounts) -> Self {
        GateCountEntry {
            single_qubit: c.single_qubit,
            two_qubit: c.two_qubit,
        }
    }
}

/// Gate accounting for the manifest: the preparation circuit, the
/// full-horizon evolution circuit, its folded variant when ZNE is on, and
/// an optional externally logged reference count.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GateCountReport {
    pub preparation: GateCountEntry,
    pub evolution_stretch_1: GateCountEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution_stretched: Option<GateCountEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zne_stretch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_two_qubit_count: Option<usize>,
}

/// The output of [`run_experiment`]: time-ordered rows plus run metadata.
#[derive(Debug, Clone)]
pub struct ResultTable {
    experiment: ExperimentId,
    observables: Vec<String>,
    rows: Vec<ResultRow>,
    failures: Vec<LaneFailure>,
    gate_counts: GateCountReport,
    warnings: Vec<String>,
    momentum_grid: Option<Vec<f64>>,
    entropy_bipartition: Option<Vec<usize>>,
}

impl ResultTable {
    pub fn experiment(&self) -> ExperimentId {
        self.experiment
    }

    /// Observable names in row order within each time group.
    pub fn observables(&self) -> &[String] {
        &self.observables
    }

    /// Rows sorted by time, then observable order.
    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn failures(&self) -> &[LaneFailure] {
        &self.failures
    }

    pub fn gate_counts(&self) -> &GateCountReport {
        &self.gate_counts
    }

    /// Calibration-coverage warnings (e.g. circuit CNOTs without a
    /// calibrated error rate, falling back to the device mean).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Momentum values behind the `n_k_i` observables (quench runs only).
    pub fn momentum_grid(&self) -> Option<&[f64]> {
        self.momentum_grid.as_deref()
    }

    /// Sites kept by the entropy bipartition (quench runs only).
    pub fn entropy_bipartition(&self) -> Option<&[usize]> {
        self.entropy_bipartition.as_deref()
    }

    /// Time-ordered rows of one observable.
    pub fn series(&self, observable: &str) -> Vec<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.observable == observable)
            .collect()
    }

    /// Mean of `|lane − exact|` over all rows where both are present,
    /// or `None` if no row qualifies.
    pub fn mean_abs_error(&self, lane: Lane) -> Option<f64> {
        let diffs: Vec<f64> = self
            .rows
            .iter()
            .filter_map(|r| Some((r.lane(lane)? - r.exact?).abs()))
            .collect();
        if diffs.is_empty() {
            None
        } else {
            Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
        }
    }

    /// Render the table as CSV with the fixed column order
    /// `t, observable, exact, trotter_ideal, noisy_raw, mitigated, zne,
    /// sigma`. Empty cells stand for absent lane values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,observable,exact,trotter_ideal,noisy_raw,mitigated,zne,sigma\n");
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.t,
                r.observable,
                cell(r.exact),
                cell(r.trotter_ideal),
                cell(r.noisy_raw),
                cell(r.mitigated),
                cell(r.zne),
                cell(r.sigma),
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Calibration resolution and noise setup
// ---------------------------------------------------------------------------

/// Where a run's calibration came from, with enough detail to reproduce
/// and audit it (device name, content digest).
#[derive(Debug, Clone)]
pub struct CalibrationInfo {
    pub source: String,
    pub device: String,
    /// `sha256:<hex>` of the calibration file bytes; `None` for the ideal
    /// (noise-free) pseudo-calibration.
    pub digest: Option<String>,
}

fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

fn resolve_calibration(
    cfg: &ExperimentConfig,
    n_qubits: usize,
) -> Result<(NoiseModel, CalibrationInfo), Error> {
    if cfg.calibration == IDEAL_CALIBRATION {
        let nm = NoiseModel::ideal(n_qubits)?;
        return Ok((
            nm,
            CalibrationInfo {
                source: IDEAL_CALIBRATION.to_string(),
                device: IDEAL_CALIBRATION.to_string(),
                digest: None,
            },
        ));
    }
    let bundled_text = BUNDLED_CALIBRATIONS
        .iter()
        .find(|&&(name, _)| name == cfg.calibration)
        .map(|&(_, text)| text.to_string());
    let (cal, text): (DeviceCalibration, String) = match bundled_text {
        Some(text) => (bundled_calibration(&cfg.calibration)?, text),
        None => {
            let path = Path::new(&cfg.calibration);
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            (load_calibration(path)?, text)
        }
    };
    let default_map: Vec<usize>;
    let map: &[usize] = match &cfg.qubit_map {
        Some(m) => m,
        None => {
            default_map = cal.qubits.iter().map(|q| q.qubit).collect();
            &default_map
        }
    };
    if map.len() < n_qubits {
        return Err(Error::QubitMapSize {
            expected: n_qubits,
            got: map.len(),
        });
    }
    let nm = NoiseModel::from_calibration(&cal, &map[..n_qubits])?;
    Ok((
        nm,
        CalibrationInfo {
            source: cfg.calibration.clone(),
            device: cal.device.clone(),
            digest: Some(sha256_hex(&text)),
        },
    ))
}

// ---------------------------------------------------------------------------
// Observables diagonal in the computational basis (E1–E4)
// ---------------------------------------------------------------------------

/// An observable `O = Σ_i v_i |i⟩⟨i|`: fully described by one value per
/// basis index, so expectation and shot variance follow directly from
/// outcome frequencies.
struct DiagonalObservable {
    name: String,
    values: Vec<f64>,
}

impl DiagonalObservable {
    fn expectation(&self, freqs: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(freqs)
            .map(|(v, f)| v * f)
            .sum::<f64>()
    }

    /// Multinomial standard error of the plug-in estimator at `shots`
    /// samples: `sqrt((E[v²] − E[v]²)/shots)`.
    fn sigma(&self, freqs: &[f64], shots: u64) -> f64 {
        let mean = self.expectation(freqs);
        let mean_sq: f64 = self
            .values
            .iter()
            .zip(freqs)
            .map(|(v, f)| v * v * f)
            .sum::<f64>();
        ((mean_sq - mean * mean).max(0.0) / shots as f64).sqrt()
    }
}

fn excited_population_observable() -> DiagonalObservable {
    DiagonalObservable {
        name: "p_down".to_string(),
        values: vec![0.0, 1.0],
    }
}

fn ground_population_observable() -> DiagonalObservable {
    DiagonalObservable {
        name: "p_up".to_string(),
        values: vec![1.0, 0.0],
    }
}

fn basis_probability_observable(index: usize, n: usize) -> DiagonalObservable {
    let mut values = vec![0.0; 1 << n];
    values[index] = 1.0;
    DiagonalObservable {
        name: format!("p_{}", qcore::bitstring(index, n)),
        values,
    }
}

fn site_z_value(index: usize, site: usize) -> f64 {
    if (index >> site) & 1 == 0 {
        0.5
    } else {
        -0.5
    }
}

fn site_magnetization_observable(site: usize, n: usize) -> DiagonalObservable {
    DiagonalObservable {
        name: format!("sz_site_{site}"),
        values: (0..1 << n).map(|i| site_z_value(i, site)).collect(),
    }
}

fn total_magnetization_observable(n: usize) -> DiagonalObservable {
    DiagonalObservable {
        name: "total_sz".to_string(),
        values: (0..1 << n)
            .map(|i| (0..n).map(|s| site_z_value(i, s)).sum())
            .collect(),
    }
}

/// Alternating-sign magnetization with the sign starting at −1 on site 0,
/// matching [`models::staggered_magnetization`].
fn staggered_magnetization_observable(n: usize) -> DiagonalObservable {
    DiagonalObservable {
        name: "staggered_sz".to_string(),
        values: (0..1 << n)
            .map(|i| {
                (0..n)
                    .map(|s| {
                        let sign = if s % 2 == 0 { -1.0 } else { 1.0 };
                        sign * site_z_value(i, s)
                    })
                    .sum()
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Experiment setup from config
// ---------------------------------------------------------------------------

/// Everything the sampled-observable runner (E1–E4) needs besides the
/// config: the model, ideal initial state, hardware preparation circuit,
/// observable set, and which contiguous observable range forms the
/// site-resolved family eligible for mirror symmetrization.
struct SampledSetup<M> {
    model: M,
    initial: QuantumState,
    prep: Circuit,
    observables: Vec<DiagonalObservable>,
    mirror_family: Option<(usize, usize)>,
}

fn rabi_setup(cfg: &ExperimentConfig) -> Result<SampledSetup<RabiModel>, Error> {
    let m = &cfg.model;
    let params = RabiParams::new(
        m.h0.unwrap_or(1.0),
        m.theta.unwrap_or(2.0),
        m.omega.unwrap_or(1.0),
        m.alpha.unwrap_or(2.0 * std::f64::consts::FRAC_PI_3),
    )?;
    let model = RabiModel::new(params);
    Ok(SampledSetup {
        initial: model.initial_state(),
        prep: model.preparation_circuit(),
        model,
        observables: vec![ground_population_observable(), excited_population_observable()],
        mirror_family: None,
    })
}

/// Circuit preparing a computational-basis product state from `|0…0⟩`:
/// `u3(π, 0, π)` (an X gate) on every excited qubit.
fn basis_preparation_circuit(n: usize, index: usize) -> Result<Circuit, Error> {
    let mut c = Circuit::new(n)?;
    for q in 0..n {
        if (index >> q) & 1 == 1 {
            c.push(Gate::U3 {
                theta: std::f64::consts::PI,
                phi: 0.0,
                lambda: std::f64::consts::PI,
                qubit: q,
            })?;
        }
    }
    Ok(c)
}

fn lattice_setup(cfg: &ExperimentConfig) -> Result<SampledSetup<SpinLattice>, Error> {
    let m = &cfg.model;
    let (default_sites, default_topology, default_initial) = match cfg.experiment {
        ExperimentId::E2Dimer => (2, "chain", "all_up"),
        ExperimentId::E3Plaquette => (4, "ring", "neel"),
        ExperimentId::E4Chain => (8, "chain", "all_up"),
        other => unreachable!("lattice_setup called for {other}"),
    };
    let n = m.n_sites.unwrap_or(default_sites);
    if cfg.experiment == ExperimentId::E2Dimer && n != 2 {
        return Err(Error::BadConfig(format!(
            "E2_dimer is a two-site system, got n_sites = {n}"
        )));
    }
    let j_perp = m.j_perp.unwrap_or(1.0);
    let j_z = m.j_z.unwrap_or(0.0);
    let topology = m.topology.as_deref().unwrap_or(default_topology);
    let mut lattice = match topology {
        "chain" => SpinLattice::chain(n, j_perp, j_z)?,
        "ring" => SpinLattice::ring(n, j_perp, j_z)?,
        other => {
            return Err(Error::BadConfig(format!(
                "topology must be \"chain\" or \"ring\", got {other:?}"
            )))
        }
    };
    if let Some(p) = &m.pulse {
        lattice.set_pulse(p.site, p.waveform()?)?;
    }
    let initial_kind = m.initial_state.as_deref().unwrap_or(default_initial);
    let initial = match initial_kind {
        "all_up" => all_up_state(n)?,
        "neel" => neel_state(n)?,
        other => {
            return Err(Error::BadConfig(format!(
                "initial_state must be \"all_up\" or \"neel\", got {other:?}"
            )))
        }
    };
    let basis_index = initial
        .probabilities()
        .iter()
        .position(|&p| p > 0.5)
        .expect("product initial states have one dominant basis index");
    let prep = basis_preparation_circuit(n, basis_index)?;
    let mut observables = Vec::new();
    let mirror_family;
    match cfg.experiment {
        ExperimentId::E2Dimer => {
            for idx in 0..1 << n {
                observables.push(basis_probability_observable(idx, n));
            }
            let start = observables.len();
            for s in 0..n {
                observables.push(site_magnetization_observable(s, n));
            }
            mirror_family = Some((start, n));
            observables.push(total_magnetization_observable(n));
        }
        ExperimentId::E3Plaquette => {
            for s in 0..n {
                observables.push(site_magnetization_observable(s, n));
            }
            mirror_family = Some((0, n));
            observables.push(staggered_magnetization_observable(n));
        }
        ExperimentId::E4Chain => {
            for s in 0..n {
                observables.push(site_magnetization_observable(s, n));
            }
            mirror_family = Some((0, n));
        }
        _ => unreachable!(),
    }
    Ok(SampledSetup {
        model: lattice,
        initial,
        prep,
        observables,
        mirror_family,
    })
}

// ---------------------------------------------------------------------------
// Four-lane runner, sampled experiments (E1–E4)
// ---------------------------------------------------------------------------

/// Initial number of reference-integrator substeps; the integrator doubles
/// from here until converged.
const EXACT_SUBSTEPS: usize = 8;

struct SampledPoint {
    t: f64,
    exact: Result<Vec<f64>, String>,
    trotter: Result<Vec<f64>, String>,
    noisy: Result<(Vec<f64>, Vec<f64>), String>,
    mitigated: Result<(Vec<f64>, Option<Vec<f64>>), String>,
}

/// Task ids feeding [`derive_seed`]: each (time point, stretch branch)
/// pair samples from its own counter-derived stream, so results are
/// independent of evaluation order.
fn sampling_task(point: usize, branch: u64) -> u64 {
    (point as u64) * 4 + branch
}

fn eval_all(observables: &[DiagonalObservable], freqs: &[f64]) -> Vec<f64> {
    observables.iter().map(|o| o.expectation(freqs)).collect()
}

fn run_sampled<M: TrotterModel + Sync>(
    cfg: &ExperimentConfig,
    setup: SampledSetup<M>,
    nm: NoiseModel,
) -> Result<ResultTable, Error> {
    let plan = cfg.trotter.plan()?;
    let full_circuit = compile_evolution(&setup.model, 0.0, &plan)?;
    let gate_counts = build_gate_report(cfg, &setup.prep, &full_circuit)?;
    let warnings = collect_warnings(&nm, [&setup.prep, &full_circuit]);
    let lambda = nm.confusion();
    let zero = QuantumState::zero(setup.model.n_qubits())?;
    let toggles = cfg.mitigation;
    let stretch = cfg.zne_stretch as f64;

    let points: Vec<usize> = (0..=plan.n_steps).collect();
    let outcomes: Vec<SampledPoint> = par::map(points, |k| {
        let t = k as f64 * plan.dt;
        let step_plan = TrotterPlan { n_steps: k, ..plan };

        let exact = exact_evolve(&setup.model, &setup.initial, 0.0, t, EXACT_SUBSTEPS)
            .map(|psi| eval_all(&setup.observables, &psi.probabilities()))
            .map_err(|e| e.to_string());

        let trotter = compile_evolution(&setup.model, 0.0, &step_plan)
            .map_err(|e| e.to_string())
            .and_then(|circuit| {
                let mut psi = setup.initial.clone();
                circuit
                    .apply_to_state(&mut psi)
                    .map_err(|e| e.to_string())?;
                Ok(eval_all(&setup.observables, &psi.probabilities()))
            });

        // One noisy execution of the full circuit for this time point:
        // noisy preparation, noisy evolution, readout confusion, sampling.
        let run_noisy = |stretch_branch: u64,
                         fold: Option<usize>|
         -> Result<Vec<f64>, String> {
            let circuit = compile_evolution(&setup.model, 0.0, &step_plan)
                .map_err(|e| e.to_string())?;
            let circuit = match fold {
                Some(s) => circuit.fold_cnots(s).map_err(|e| e.to_string())?,
                None => circuit,
            };
            let rho = apply_noisy_circuit(&DensityMatrix::from_pure(&zero), &setup.prep, &nm)
                .and_then(|rho| apply_noisy_circuit(&rho, &circuit, &nm))
                .map_err(|e| e.to_string())?;
            let hist = sample_counts(
                &rho,
                &lambda,
                cfg.shots,
                derive_seed(cfg.seed, sampling_task(k, stretch_branch)),
            )
            .map_err(|e| e.to_string())?;
            Ok(hist.frequencies())
        };

        let noisy_freqs = run_noisy(0, None);
        let noisy = noisy_freqs.as_ref().map_err(Clone::clone).map(|freqs| {
            let values = eval_all(&setup.observables, freqs);
            let sigmas = setup
                .observables
                .iter()
                .map(|o| o.sigma(freqs, cfg.shots))
                .collect();
            (values, sigmas)
        });

        let mitigated = noisy_freqs
            .as_ref()
            .map_err(|e| format!("noisy lane unavailable: {e}"))
            .and_then(|freqs| {
                let corrected = |f: &[f64]| -> Result<Vec<f64>, String> {
                    if toggles.readout {
                        mitigate::mitigate_probabilities(f, &lambda, InversionMethod::Inverse)
                            .map_err(|e| e.to_string())
                    } else {
                        Ok(f.to_vec())
                    }
                };
                let base = eval_all(&setup.observables, &corrected(freqs)?);
                let (mut vals, zne_vals) = if toggles.zne {
                    let stretched_freqs = run_noisy(1, Some(cfg.zne_stretch))?;
                    let stretched = eval_all(&setup.observables, &corrected(&stretched_freqs)?);
                    let extrapolated: Vec<f64> = base
                        .iter()
                        .zip(&stretched)
                        .map(|(&e1, &es)| {
                            mitigate::zne_extrapolate(&[(1.0, e1), (stretch, es)])
                                .map(|z| z.extrapolated())
                                .map_err(|e| e.to_string())
                        })
                        .collect::<Result<_, String>>()?;
                    (extrapolated.clone(), Some(extrapolated))
                } else {
                    (base, None)
                };
                if toggles.symmetry {
                    if let Some((start, len)) = setup.mirror_family {
                        let symmetrized = mitigate::mirror_symmetrize(&vals[start..start + len]);
                        vals[start..start + len].copy_from_slice(&symmetrized);
                    }
                }
                Ok((vals, zne_vals))
            });

        SampledPoint {
            t,
            exact,
            trotter,
            noisy,
            mitigated,
        }
    });

    let observable_names: Vec<String> =
        setup.observables.iter().map(|o| o.name.clone()).collect();
    Ok(assemble_table(
        cfg.experiment,
        observable_names,
        outcomes,
        gate_counts,
        warnings,
        None,
        None,
    ))
}

// ---------------------------------------------------------------------------
// Four-lane runner, tomographic quench (E5)
// ---------------------------------------------------------------------------

enum PrepMode {
    ExactAmplitudes,
    QasmCircuit,
}

enum TomographyMode {
    Sampled,
    Analytic,
}

struct QuenchSetup {
    model: QuenchModel,
    ground: QuantumState,
    prep_mode: PrepMode,
    prep_circuit: Circuit,
    tomography: TomographyMode,
    grid: MomentumGrid,
    keep_sites: Vec<usize>,
    n_particles: usize,
}

fn quench_setup(cfg: &ExperimentConfig) -> Result<QuenchSetup, Error> {
    let m = &cfg.model;
    let n = m.n_sites.unwrap_or(4);
    let schedule = QuenchSchedule::new(m.j_perp.unwrap_or(1.0), m.u_final.unwrap_or(2.0))?;
    let model = QuenchModel::new(schedule, n)?;
    let (_e0, ground) = model.pre_quench_ground_state();
    let prep_mode = match m.preparation.as_deref().unwrap_or("exact") {
        "exact" => PrepMode::ExactAmplitudes,
        "qasm" => PrepMode::QasmCircuit,
        other => {
            return Err(Error::BadConfig(format!(
                "preparation must be \"exact\" or \"qasm\", got {other:?}"
            )))
        }
    };
    let prep_circuit = match prep_mode {
        PrepMode::ExactAmplitudes => Circuit::new(n)?,
        PrepMode::QasmCircuit => {
            let c = qasm::parse_circuit(qasm::GROUND_STATE_PREP_QASM)?;
            if c.n_qubits() != n {
                return Err(Error::BadConfig(format!(
                    "bundled preparation circuit has {} qubits but the quench model has {n}",
                    c.n_qubits()
                )));
            }
            c
        }
    };
    let tomography = match m.tomography.as_deref().unwrap_or("sampled") {
        "sampled" => TomographyMode::Sampled,
        "analytic" => TomographyMode::Analytic,
        other => {
            return Err(Error::BadConfig(format!(
                "tomography must be \"sampled\" or \"analytic\", got {other:?}"
            )))
        }
    };
    let grid = MomentumGrid::anti_periodic(n);
    let keep_sites: Vec<usize> = (0..n / 2).collect();
    let n_particles = filling(&correlation_matrix_pure(&ground)).round() as usize;
    Ok(QuenchSetup {
        model,
        ground,
        prep_mode,
        prep_circuit,
        tomography,
        grid,
        keep_sites,
        n_particles,
    })
}

fn quench_observable_names(setup: &QuenchSetup) -> Vec<String> {
    let mut names: Vec<String> = (0..setup.grid.k_values().len())
        .map(|i| format!("n_k_{i}"))
        .collect();
    names.push("filling".to_string());
    names.push("fermi_jump".to_string());
    names.push("entropy_half".to_string());
    names
}

/// Momentum occupations, filling, jump, and half-system entropy of a
/// state given its fermionic correlation matrix and density matrix.
fn quench_observables(
    corr: &DMatrix<C64>,
    rho: &DensityMatrix,
    grid: &MomentumGrid,
    keep_sites: &[usize],
) -> Result<Vec<f64>, String> {
    let nk = momentum_distribution(corr, grid).map_err(|e| e.to_string())?;
    let mut vals: Vec<f64> = nk.iter().map(|&(_, v)| v).collect();
    vals.push(filling(corr));
    vals.push(fermi_jump(&nk));
    let reduced = rho.partial_trace(keep_sites).map_err(|e| e.to_string())?;
    vals.push(reduced.von_neumann_entropy());
    Ok(vals)
}

fn quench_observables_pure(
    psi: &QuantumState,
    grid: &MomentumGrid,
    keep_sites: &[usize],
) -> Result<Vec<f64>, String> {
    quench_observables(
        &correlation_matrix_pure(psi),
        &psi.to_density(),
        grid,
        keep_sites,
    )
}

/// Per-element two-point extrapolation of reconstructed operators at
/// stretch factors `{1, s}`. Real and imaginary parts extrapolate
/// separately; conjugate symmetry survives exactly, so the result is
/// again Hermitian.
fn extrapolate_reconstruction(
    mu1: &HermitianOperator,
    mu_s: &HermitianOperator,
    stretch: f64,
) -> Result<HermitianOperator, String> {
    let dim = mu1.matrix().nrows();
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for c in 0..dim {
        for r in 0..dim {
            let a = mu1.matrix()[(r, c)];
            let b = mu_s.matrix()[(r, c)];
            let re = mitigate::zne_extrapolate(&[(1.0, a.re), (stretch, b.re)])
                .map_err(|e| e.to_string())?
                .extrapolated();
            let im = mitigate::zne_extrapolate(&[(1.0, a.im), (stretch, b.im)])
                .map_err(|e| e.to_string())?
                .extrapolated();
            out[(r, c)] = C64::new(re, im);
        }
    }
    HermitianOperator::new(mu1.n_qubits(), out).map_err(|e| e.to_string())
}

/// Apply readout inversion to every setting of a tomography dataset.
fn mitigate_dataset(
    ds: &TomographyDataset,
    lambda: &ConfusionMatrix,
) -> Result<TomographyDataset, String> {
    let mitigated: Vec<Vec<f64>> = ds
        .all_frequencies()
        .iter()
        .map(|f| {
            mitigate::mitigate_probabilities(f, lambda, InversionMethod::Inverse)
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    TomographyDataset::from_frequencies(ds.n_qubits(), mitigated).map_err(|e| e.to_string())
}

fn run_quench(cfg: &ExperimentConfig, nm: NoiseModel) -> Result<ResultTable, Error> {
    let setup = quench_setup(cfg)?;
    let plan = cfg.trotter.plan()?;
    let full_circuit = compile_evolution(&setup.model, 0.0, &plan)?;
    let gate_counts = build_gate_report(cfg, &setup.prep_circuit, &full_circuit)?;
    let warnings = collect_warnings(&nm, [&setup.prep_circuit, &full_circuit]);
    let lambda = nm.confusion();
    let toggles = cfg.mitigation;
    let stretch = cfg.zne_stretch as f64;
    let names = quench_observable_names(&setup);

    let points: Vec<usize> = (0..=plan.n_steps).collect();
    let outcomes: Vec<SampledPoint> = par::map(points, |k| {
        let t = k as f64 * plan.dt;
        let step_plan = TrotterPlan { n_steps: k, ..plan };

        let exact = exact_evolve(&setup.model, &setup.ground, 0.0, t, EXACT_SUBSTEPS)
            .map_err(|e| e.to_string())
            .and_then(|psi| quench_observables_pure(&psi, &setup.grid, &setup.keep_sites));

        let trotter = compile_evolution(&setup.model, 0.0, &step_plan)
            .map_err(|e| e.to_string())
            .and_then(|circuit| {
                let mut psi = setup.ground.clone();
                circuit
                    .apply_to_state(&mut psi)
                    .map_err(|e| e.to_string())?;
                quench_observables_pure(&psi, &setup.grid, &setup.keep_sites)
            });

        // Tomographic reconstruction of the noisy state at this time
        // point, optionally with CNOT-folded evolution for ZNE.
        let reconstruct = |branch: u64, fold: Option<usize>| -> Result<TomographyDataset, String> {
            let prepared = match setup.prep_mode {
                PrepMode::ExactAmplitudes => DensityMatrix::from_pure(&setup.ground),
                PrepMode::QasmCircuit => {
                    let zero = QuantumState::zero(setup.model.n_qubits())
                        .map_err(|e| e.to_string())?;
                    apply_noisy_circuit(
                        &DensityMatrix::from_pure(&zero),
                        &setup.prep_circuit,
                        &nm,
                    )
                    .map_err(|e| e.to_string())?
                }
            };
            let circuit = compile_evolution(&setup.model, 0.0, &step_plan)
                .map_err(|e| e.to_string())?;
            let circuit = match fold {
                Some(s) => circuit.fold_cnots(s).map_err(|e| e.to_string())?,
                None => circuit,
            };
            let rho = apply_noisy_circuit(&prepared, &circuit, &nm).map_err(|e| e.to_string())?;
            match setup.tomography {
                TomographyMode::Sampled => tomo::collect(
                    &rho,
                    &nm,
                    cfg.shots,
                    derive_seed(cfg.seed, sampling_task(k, branch)),
                )
                .map_err(|e| e.to_string()),
                TomographyMode::Analytic => {
                    tomo::collect_analytic(&rho, &nm).map_err(|e| e.to_string())
                }
            }
        };

        let base_dataset = reconstruct(0, None);

        // Raw lane: invert the confused frequencies as measured.
        let noisy = base_dataset
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|ds| {
                let mu = tomo::linear_inversion(ds).map_err(|e| e.to_string())?;
                let rho = tomo::psd_project(&mu).map_err(|e| e.to_string())?;
                quench_observables(
                    &correlation_matrix(&rho),
                    &rho,
                    &setup.grid,
                    &setup.keep_sites,
                )
            })
            .map(|vals| (vals, Vec::new()));

        let mitigated = base_dataset
            .as_ref()
            .map_err(|e| format!("noisy lane unavailable: {e}"))
            .and_then(|ds| {
                let corrected = |d: &TomographyDataset| -> Result<TomographyDataset, String> {
                    if toggles.readout {
                        mitigate_dataset(d, &lambda)
                    } else {
                        Ok(d.clone())
                    }
                };
                let mu1 = tomo::linear_inversion(&corrected(ds)?).map_err(|e| e.to_string())?;
                let mu = if toggles.zne {
                    let ds_s = reconstruct(1, Some(cfg.zne_stretch))?;
                    let mu_s =
                        tomo::linear_inversion(&corrected(&ds_s)?).map_err(|e| e.to_string())?;
                    extrapolate_reconstruction(&mu1, &mu_s, stretch)?
                } else {
                    mu1
                };
                let projected = tomo::psd_project(&mu).map_err(|e| e.to_string())?;
                let zne_vals = if toggles.zne {
                    Some(quench_observables(
                        &correlation_matrix(&projected),
                        &projected,
                        &setup.grid,
                        &setup.keep_sites,
                    )?)
                } else {
                    None
                };
                let final_rho = if toggles.symmetry {
                    mitigate::number_sector_project(&projected, setup.n_particles)
                        .map_err(|e| e.to_string())?
                } else {
                    projected
                };
                let vals = quench_observables(
                    &correlation_matrix(&final_rho),
                    &final_rho,
                    &setup.grid,
                    &setup.keep_sites,
                )?;
                Ok((vals, zne_vals))
            });

        SampledPoint {
            t,
            exact,
            trotter,
            noisy,
            mitigated,
        }
    });

    let momentum_grid = Some(setup.grid.k_values().to_vec());
    let bipartition = Some(setup.keep_sites.clone());
    Ok(assemble_table(
        cfg.experiment,
        names,
        outcomes,
        gate_counts,
        warnings,
        momentum_grid,
        bipartition,
    ))
}

// ---------------------------------------------------------------------------
// Shared assembly and the public entry point
// ---------------------------------------------------------------------------

fn build_gate_report(
    cfg: &ExperimentConfig,
    prep: &Circuit,
    full_circuit: &Circuit,
) -> Result<GateCountReport, Error> {
    let (stretched, zne_stretch) = if cfg.mitigation.zne {
        let folded = full_circuit.fold_cnots(cfg.zne_stretch)?;
        (
            Some(GateCountEntry::from(folded.count_gates())),
            Some(cfg.zne_stretch),
        )
    } else {
        (None, None)
    };
    Ok(GateCountReport {
        preparation: prep.count_gates().into(),
        evolution_stretch_1: full_circuit.count_gates().into(),
        evolution_stretched: stretched,
        zne_stretch,
        reference_two_qubit_count: cfg.reference_two_qubit_count,
    })
}

fn collect_warnings<'a>(
    nm: &NoiseModel,
    circuits: impl IntoIterator<Item = &'a Circuit>,
) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for c in circuits {
        for w in nm.missing_edge_warnings(c) {
            if seen.insert(w.clone()) {
                out.push(w);
            }
        }
    }
    out
}

/// Turn per-point lane outcomes into sorted rows plus the failure log.
fn assemble_table(
    experiment: ExperimentId,
    observables: Vec<String>,
    outcomes: Vec<SampledPoint>,
    gate_counts: GateCountReport,
    warnings: Vec<String>,
    momentum_grid: Option<Vec<f64>>,
    entropy_bipartition: Option<Vec<usize>>,
) -> ResultTable {
    let mut rows = Vec::with_capacity(outcomes.len() * observables.len());
    let mut failures = Vec::new();
    for point in &outcomes {
        let mut record = |lane: Lane, err: &String| {
            failures.push(LaneFailure {
                t: point.t,
                lane: lane.label().to_string(),
                message: err.clone(),
            });
        };
        if let Err(e) = &point.exact {
            record(Lane::Exact, e);
        }
        if let Err(e) = &point.trotter {
            record(Lane::TrotterIdeal, e);
        }
        if let Err(e) = &point.noisy {
            record(Lane::NoisyRaw, e);
        }
        if let Err(e) = &point.mitigated {
            record(Lane::Mitigated, e);
        }
        for (j, name) in observables.iter().enumerate() {
            let noisy = point.noisy.as_ref().ok();
            let mitigated = point.mitigated.as_ref().ok();
            rows.push(ResultRow {
                t: point.t,
                observable: name.clone(),
                exact: point.exact.as_ref().ok().map(|v| v[j]),
                trotter_ideal: point.trotter.as_ref().ok().map(|v| v[j]),
                noisy_raw: noisy.map(|(v, _)| v[j]),
                mitigated: mitigated.map(|(v, _)| v[j]),
                zne: mitigated.and_then(|(_, z)| z.as_ref().map(|v| v[j])),
                sigma: noisy.and_then(|(_, s)| s.get(j).copied()),
            });
        }
    }
    ResultTable {
        experiment,
        observables,
        rows,
        failures,
        gate_counts,
        warnings,
        momentum_grid,
        entropy_bipartition,
    }
}

/// Number of model qubits the config's experiment runs on.
pub fn model_qubit_count(cfg: &ExperimentConfig) -> usize {
    match cfg.experiment {
        ExperimentId::E1Rabi => 1,
        ExperimentId::E2Dimer => 2,
        ExperimentId::E3Plaquette | ExperimentId::E5Quench => cfg.model.n_sites.unwrap_or(4),
        ExperimentId::E4Chain => cfg.model.n_sites.unwrap_or(8),
    }
}

/// Resolve the noise model a config would run under, without running the
/// experiment (used to inspect the readout confusion matrix on its own).
pub fn resolve_noise(cfg: &ExperimentConfig) -> Result<(NoiseModel, CalibrationInfo), Error> {
    validate_config(cfg)?;
    resolve_calibration(cfg, model_qubit_count(cfg))
}

/// Execute a validated config end to end and return the result table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable, Error> {
    run_experiment_with_info(cfg).map(|(table, _)| table)
}

/// [`run_experiment`] plus the resolved calibration metadata used for the
/// run (needed by the manifest).
pub fn run_experiment_with_info(
    cfg: &ExperimentConfig,
) -> Result<(ResultTable, CalibrationInfo), Error> {
    validate_config(cfg)?;
    let (nm, info) = resolve_calibration(cfg, model_qubit_count(cfg))?;
    let table = match cfg.experiment {
        ExperimentId::E1Rabi => run_sampled(cfg, rabi_setup(cfg)?, nm)?,
        ExperimentId::E2Dimer | ExperimentId::E3Plaquette | ExperimentId::E4Chain => {
            run_sampled(cfg, lattice_setup(cfg)?, nm)?
        }
        ExperimentId::E5Quench => run_quench(cfg, nm)?,
    };
    Ok((table, info))
}

// ---------------------------------------------------------------------------
// File outputs
// ---------------------------------------------------------------------------

/// Paths written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub plot: PathBuf,
}

const PLOT_SCRIPT: &str = include_str!("../data/plot_results.py");

/// Build the JSON run manifest. Key order is deterministic (serde_json
/// sorts object keys), and no timestamps or machine identifiers are
/// included, so identical runs serialize to identical bytes.
pub fn build_manifest(
    table: &ResultTable,
    cfg: &ExperimentConfig,
    calibration: &CalibrationInfo,
) -> Result<String, Error> {
    let failures: Vec<serde_json::Value> = table
        .failures()
        .iter()
        .map(|f| json!({"t": f.t, "lane": f.lane, "message": f.message}))
        .collect();
    let mut manifest = json!({
        "version": VERSION,
        "experiment": cfg.experiment.label(),
        "seed": cfg.seed,
        "shots": cfg.shots,
        "calibration": {
            "source": calibration.source,
            "device": calibration.device,
            "digest": calibration.digest,
        },
        "config": serde_json::to_value(cfg)?,
        "observables": table.observables(),
        "gate_counts": serde_json::to_value(table.gate_counts())?,
        "warnings": table.warnings(),
        "lane_failures": failures,
        "row_count": table.rows().len(),
    });
    let extras = manifest.as_object_mut().expect("manifest is an object");
    if let Some(grid) = table.momentum_grid() {
        extras.insert("momentum_grid".to_string(), json!(grid));
    }
    if let Some(keep) = table.entropy_bipartition() {
        extras.insert("entropy_bipartition".to_string(), json!(keep));
    }
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    Ok(text)
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    fs::write(path, content).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `results.csv`, `manifest.json`, and `plot_results.py` into
/// `out_dir` (created if missing). Output bytes depend only on the table,
/// config, and calibration metadata.
pub fn emit_outputs(
    table: &ResultTable,
    cfg: &ExperimentConfig,
    calibration: &CalibrationInfo,
    out_dir: &Path,
) -> Result<OutputPaths, Error> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let paths = OutputPaths {
        csv: out_dir.join("results.csv"),
        manifest: out_dir.join("manifest.json"),
        plot: out_dir.join("plot_results.py"),
    };
    write_file(&paths.csv, &table.to_csv())?;
    write_file(&paths.manifest, &build_manifest(table, cfg, calibration)?)?;
    write_file(&paths.plot, PLOT_SCRIPT)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduced(cfg: &mut ExperimentConfig, shots: u64, n_steps: usize) {
        cfg.shots = shots;
        cfg.trotter.n_steps = n_steps;
    }

    #[test]
    fn bundled_configs_parse_and_expose_expected_ids() {
        let ids: Vec<ExperimentId> = BUNDLED_EXPERIMENTS
            .iter()
            .map(|&(name, _, _)| bundled_config(name).unwrap().experiment)
            .collect();
        assert_eq!(ids, ExperimentId::all().to_vec());
        assert!(matches!(
            bundled_config("nope"),
            Err(Error::UnknownBundledExperiment(_))
        ));
        for (name, _, _) in BUNDLED_EXPERIMENTS {
            let cfg = bundled_config(name).unwrap();
            assert_eq!(cfg.shots, DEFAULT_SHOTS, "{name}");
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = bundled_config("e3_plaquette").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut cfg = bundled_config("e1_rabi").unwrap();
        cfg.shots = 0;
        assert!(matches!(validate_config(&cfg), Err(Error::ZeroShots)));

        let mut cfg = bundled_config("e3_plaquette").unwrap();
        cfg.zne_stretch = 2;
        assert!(matches!(
            validate_config(&cfg),
            Err(Error::BadZneStretch(2))
        ));

        let mut cfg = bundled_config("e1_rabi").unwrap();
        cfg.model.u_final = Some(1.0);
        assert!(matches!(validate_config(&cfg), Err(Error::BadConfig(_))));

        let mut cfg = bundled_config("e2_dimer").unwrap();
        cfg.trotter.order = 3;
        assert!(matches!(validate_config(&cfg), Err(Error::BadConfig(_))));

        assert!(parse_config("experiment = \"E1_rabi\"\nbogus = 1").is_err());
    }

    #[test]
    fn qubit_map_shorter_than_model_is_rejected() {
        let mut cfg = bundled_config("e3_plaquette").unwrap();
        cfg.qubit_map = Some(vec![8, 11]);
        reduced(&mut cfg, 16, 1);
        match run_experiment(&cfg) {
            Err(Error::QubitMapSize { expected, got }) => {
                assert_eq!((expected, got), (4, 2));
            }
            other => panic!("expected QubitMapSize error, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_observables_match_probability_based_helpers() {
        let n = 4;
        let staggered = staggered_magnetization_observable(n);
        let total = total_magnetization_observable(n);
        let site1 = site_magnetization_observable(1, n);
        // a deterministic, structureless probability vector
        let mut probs: Vec<f64> = (0..1 << n).map(|i| ((i * 7 + 3) % 11) as f64).collect();
        let norm: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= norm);
        assert!(
            (staggered.expectation(&probs) - models::staggered_magnetization(&probs)).abs()
                < 1e-12
        );
        assert!((total.expectation(&probs) - models::total_magnetization(&probs)).abs() < 1e-12);
        assert!((site1.expectation(&probs) - models::site_magnetization(&probs, 1)).abs() < 1e-12);
    }

    #[test]
    fn ideal_noise_run_matches_exact_within_sampling_error() {
        let mut cfg = bundled_config("e1_rabi").unwrap();
        cfg.calibration = IDEAL_CALIBRATION.to_string();
        reduced(&mut cfg, 8192, 30);
        let table = run_experiment(&cfg).unwrap();
        assert!(table.failures().is_empty(), "{:?}", table.failures());
        for row in table.rows() {
            let exact = row.exact.unwrap();
            let trotter = row.trotter_ideal.unwrap();
            let noisy = row.noisy_raw.unwrap();
            let sigma = row.sigma.unwrap();
            // discretization error at dt = 0.05 is far below this bound
            assert!((trotter - exact).abs() < 5e-3, "t={}", row.t);
            // sampled estimate with no hardware noise: statistical only
            assert!(
                (noisy - trotter).abs() < 5.0 * sigma + 1e-9,
                "t={} noisy={noisy} trotter={trotter} sigma={sigma}",
                row.t
            );
            // identity confusion: readout inversion is a no-op
            assert!((row.mitigated.unwrap() - noisy).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_time_ordered_with_exact_always_present() {
        let mut cfg = bundled_config("e2_dimer").unwrap();
        reduced(&mut cfg, 64, 4);
        let table = run_experiment(&cfg).unwrap();
        assert_eq!(
            table.rows().len(),
            5 * table.observables().len(),
            "one row per (time, observable)"
        );
        for name in table.observables() {
            let series = table.series(name);
            assert_eq!(series.len(), 5);
            for pair in series.windows(2) {
                assert!(pair[0].t < pair[1].t, "times strictly increasing");
            }
            for row in series {
                assert!(row.exact.is_some(), "exact lane populated");
            }
        }
    }

    #[test]
    fn mitigated_lane_beats_raw_on_noisy_dimer() {
        let cfg = bundled_config("e2_dimer").unwrap();
        let table = run_experiment(&cfg).unwrap();
        assert!(table.failures().is_empty(), "{:?}", table.failures());
        let raw = table.mean_abs_error(Lane::NoisyRaw).unwrap();
        let mitigated = table.mean_abs_error(Lane::Mitigated).unwrap();
        assert!(
            mitigated <= raw,
            "mitigated {mitigated} should not exceed raw {raw}"
        );
    }

    #[test]
    fn identical_config_and_seed_reproduce_identical_outputs() {
        let mut cfg = bundled_config("e3_plaquette").unwrap();
        reduced(&mut cfg, 256, 2);
        let (t1, i1) = run_experiment_with_info(&cfg).unwrap();
        let (t2, i2) = run_experiment_with_info(&cfg).unwrap();
        assert_eq!(t1.to_csv(), t2.to_csv());
        assert_eq!(
            build_manifest(&t1, &cfg, &i1).unwrap(),
            build_manifest(&t2, &cfg, &i2).unwrap()
        );
        let mut other = cfg.clone();
        other.seed += 1;
        let t3 = run_experiment(&other).unwrap();
        assert_ne!(t1.to_csv(), t3.to_csv(), "different seed, different samples");
    }

    #[test]
    fn zne_column_tracks_mitigated_when_no_symmetry() {
        let mut cfg = bundled_config("e3_plaquette").unwrap();
        reduced(&mut cfg, 128, 2);
        let table = run_experiment(&cfg).unwrap();
        for row in table.rows() {
            assert_eq!(row.zne, row.mitigated);
            assert!(row.zne.is_some());
        }
        let report = table.gate_counts();
        assert_eq!(report.zne_stretch, Some(3));
        let flat = report.evolution_stretch_1.two_qubit;
        assert_eq!(
            report.evolution_stretched.unwrap().two_qubit,
            3 * flat,
            "folding triples the entangling count"
        );
    }

    #[test]
    fn e4_manifest_logs_reference_count_beside_compiled_count() {
        let mut cfg = bundled_config("e4_chain").unwrap();
        reduced(&mut cfg, 16, 1);
        cfg.mitigation.zne = false;
        let (table, info) = run_experiment_with_info(&cfg).unwrap();
        assert_eq!(table.gate_counts().reference_two_qubit_count, Some(126));
        let manifest = build_manifest(&table, &cfg, &info).unwrap();
        assert!(manifest.contains("\"reference_two_qubit_count\": 126"));
        assert!(manifest.contains("\"two_qubit\""));
        assert!(info.digest.unwrap().starts_with("sha256:"));
        assert_eq!(info.device, "ibmq_montreal");
    }

    #[test]
    fn full_e4_horizon_compiles_to_120_entangling_gates() {
        let cfg = bundled_config("e4_chain").unwrap();
        let setup = lattice_setup(&cfg).unwrap();
        let plan = cfg.trotter.plan().unwrap();
        let circuit = compile_evolution(&setup.model, 0.0, &plan).unwrap();
        assert_eq!(circuit.count_gates().two_qubit, 120);
        assert_eq!(
            circuit.fold_cnots(3).unwrap().count_gates().two_qubit,
            360
        );
    }

    #[test]
    fn quench_with_zero_interaction_keeps_momentum_occupations_constant() {
        let mut cfg = bundled_config("e5_quench").unwrap();
        cfg.model.u_final = Some(0.0);
        cfg.model.tomography = Some("analytic".to_string());
        cfg.calibration = IDEAL_CALIBRATION.to_string();
        cfg.trotter.n_steps = 3;
        let table = run_experiment(&cfg).unwrap();
        assert!(table.failures().is_empty(), "{:?}", table.failures());
        for i in 0..4 {
            let series = table.series(&format!("n_k_{i}"));
            let first = series[0];
            for row in &series {
                assert!(
                    (row.exact.unwrap() - first.exact.unwrap()).abs() < 1e-9,
                    "free evolution conserves n_k (exact lane)"
                );
                // the split into bond layers breaks the conservation law
                // only at the discretization level, not exactly
                assert!(
                    (row.trotter_ideal.unwrap() - first.trotter_ideal.unwrap()).abs() < 1e-4,
                    "free evolution conserves n_k up to Trotter error"
                );
            }
        }
        assert_eq!(table.momentum_grid().unwrap().len(), 4);
        assert_eq!(table.entropy_bipartition().unwrap(), &[0, 1]);
    }

    #[test]
    fn quench_initial_point_reproduces_the_free_fermi_sea() {
        let mut cfg = bundled_config("e5_quench").unwrap();
        cfg.model.tomography = Some("analytic".to_string());
        cfg.calibration = IDEAL_CALIBRATION.to_string();
        cfg.trotter.n_steps = 1;
        let table = run_experiment(&cfg).unwrap();
        let jump = table.series("fermi_jump")[0];
        let filling_row = table.series("filling")[0];
        let entropy = table.series("entropy_half")[0];
        assert!((jump.exact.unwrap() - 1.0).abs() < 1e-9);
        assert!((filling_row.exact.unwrap() - 2.0).abs() < 1e-10);
        assert!(entropy.exact.unwrap() > 0.0);
        // ideal noise + analytic tomography: reconstruction is exact
        assert!((jump.noisy_raw.unwrap() - 1.0).abs() < 1e-8);
        assert!((filling_row.mitigated.unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn sector_projection_pins_mitigated_filling() {
        let mut cfg = bundled_config("e5_quench").unwrap();
        cfg.model.tomography = Some("analytic".to_string());
        cfg.trotter.n_steps = 2;
        let table = run_experiment(&cfg).unwrap();
        assert!(table.failures().is_empty(), "{:?}", table.failures());
        for row in table.series("filling") {
            assert!(
                (row.mitigated.unwrap() - 2.0).abs() < 1e-9,
                "particle-number projection fixes the filling exactly"
            );
            assert!(row.sigma.is_none(), "tomographic rows carry no shot sigma");
        }
    }

    #[test]
    fn emit_outputs_writes_reproducible_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = bundled_config("e1_rabi").unwrap();
        reduced(&mut cfg, 32, 3);
        let (table, info) = run_experiment_with_info(&cfg).unwrap();
        let paths = emit_outputs(&table, &cfg, &info, dir.path()).unwrap();
        let csv1 = fs::read_to_string(&paths.csv).unwrap();
        let manifest1 = fs::read_to_string(&paths.manifest).unwrap();
        let plot1 = fs::read_to_string(&paths.plot).unwrap();
        assert!(csv1.starts_with(
            "t,observable,exact,trotter_ideal,noisy_raw,mitigated,zne,sigma\n"
        ));
        assert!(manifest1.contains("\"version\""));
        assert!(plot1.contains("results.csv"));
        let (table2, info2) = run_experiment_with_info(&cfg).unwrap();
        let paths2 = emit_outputs(&table2, &cfg, &info2, dir.path()).unwrap();
        assert_eq!(csv1, fs::read_to_string(&paths2.csv).unwrap());
        assert_eq!(manifest1, fs::read_to_string(&paths2.manifest).unwrap());
    }

    #[test]
    fn csv_cells_stay_empty_for_disabled_stages() {
        let mut cfg = bundled_config("e1_rabi").unwrap();
        reduced(&mut cfg, 16, 1);
        let table = run_experiment(&cfg).unwrap();
        let csv = table.to_csv();
        for row in table.rows() {
            assert!(row.zne.is_none(), "ZNE disabled for the single-spin run");
        }
        // zne column (7th) empty: ...,mitigated,,sigma
        let second_line = csv.lines().nth(1).unwrap();
        assert_eq!(second_line.split(',').count(), 8);
        assert_eq!(second_line.split(',').nth(6).unwrap(), "");
    }
}
