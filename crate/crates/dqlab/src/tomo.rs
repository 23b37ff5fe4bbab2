//! Full state tomography: measurement settings, simulated data collection,
//! linear inversion, and projection onto the physical state space.
//!
//! Reconstructing an `n`-qubit density matrix takes one measurement setting
//! per string in {X, Y, Z}^n — 3^n circuits, each a layer of single-qubit
//! rotations mapping the chosen local bases onto the computational (Z)
//! basis. [`collect`] simulates those measurement circuits under a noise
//! model and returns per-setting histograms; [`collect_analytic`] skips
//! shot noise and records exact outcome distributions instead.
//!
//! [`linear_inversion`] estimates every Pauli-string expectation from the
//! counts — strings with identity factors are averaged over all compatible
//! settings — and assembles `μ = 2^{-n} Σ_P ⟨P⟩ P`. Finite sampling makes
//! `μ` slightly unphysical (negative eigenvalues), so [`psd_project`] maps
//! it to the closest density matrix in its own eigenbasis by zeroing
//! negative eigenvalues and spreading the deficit over the rest.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::circuit::{Circuit, Gate};
use crate::noise::{self, CountsHistogram, NoiseModel};
use crate::par;
use crate::qcore::{self, DensityMatrix, HermitianOperator};

/// Cost guard for full tomography: 3^6 = 729 settings.
pub const MAX_TOMOGRAPHY_QUBITS: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("tomography over {n} qubits needs 3^{n} settings, above the limit of {limit} qubits")]
    TooManyQubits { n: usize, limit: usize },
    #[error("dataset has {got} settings, expected {expected}")]
    WrongSettingCount { expected: usize, got: usize },
    #[error("setting {setting} has {got} outcome frequencies, expected {expected}")]
    BadFrequencyLength {
        setting: usize,
        expected: usize,
        got: usize,
    },
    #[error("setting {setting} frequencies sum to {sum}, not 1")]
    UnnormalizedFrequencies { setting: usize, sum: f64 },
    #[error("invalid basis letter {0:?} (expected X, Y or Z)")]
    BadBasisLetter(char),
    #[error(transparent)]
    Noise(#[from] noise::Error),
    #[error(transparent)]
    Core(#[from] qcore::Error),
}

/// One local measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementBasis {
    X,
    Y,
    Z,
}

impl MeasurementBasis {
    pub fn letter(self) -> char {
        match self {
            MeasurementBasis::X => 'X',
            MeasurementBasis::Y => 'Y',
            MeasurementBasis::Z => 'Z',
        }
    }

    fn from_letter(c: char) -> Result<Self, Error> {
        match c {
            'X' => Ok(MeasurementBasis::X),
            'Y' => Ok(MeasurementBasis::Y),
            'Z' => Ok(MeasurementBasis::Z),
            other => Err(Error::BadBasisLetter(other)),
        }
    }

    /// The rotation taking this basis to the computational one: a |+⟩
    /// (resp. |+i⟩) eigenstate ends up on |0⟩, so outcome bit 0 means
    /// eigenvalue +1 of the measured Pauli.
    fn rotation(self, qubit: usize) -> Option<Gate> {
        match self {
            // Hadamard
            MeasurementBasis::X => Some(Gate::U3 {
                theta: PI / 2.0,
                phi: 0.0,
                lambda: PI,
                qubit,
            }),
            // Hadamard after S-dagger
            MeasurementBasis::Y => Some(Gate::U3 {
                theta: PI / 2.0,
                phi: 0.0,
                lambda: PI / 2.0,
                qubit,
            }),
            MeasurementBasis::Z => None,
        }
    }
}

/// A basis choice per qubit plus the rotation layer it induces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TomographySetting {
    bases: Vec<MeasurementBasis>,
}

impl TomographySetting {
    pub fn from_label(label: &str) -> Result<Self, Error> {
        let bases = label
            .chars()
            .map(MeasurementBasis::from_letter)
            .collect::<Result<Vec<_>, _>>()?;
        qcore::check_qubit_count(bases.len()).map_err(Error::Core)?;
        Ok(Self { bases })
    }

    pub fn n_qubits(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[MeasurementBasis] {
        &self.bases
    }

    /// Label with qubit 0 leftmost, matching bitstring rendering.
    pub fn label(&self) -> String {
        self.bases.iter().map(|b| b.letter()).collect()
    }

    /// The pre-measurement rotation layer (X → Hadamard, Y → Hadamard after
    /// S-dagger, Z → nothing).
    pub fn rotation_circuit(&self) -> Result<Circuit, qcore::Error> {
        let mut c = Circuit::new(self.n_qubits())?;
        for (q, b) in self.bases.iter().enumerate() {
            if let Some(g) = b.rotation(q) {
                c.push(g)?;
            }
        }
        Ok(c)
    }
}

/// All 3^n measurement settings in lexicographic label order ("XX…X"
/// first, "ZZ…Z" last).
pub fn settings(n_qubits: usize) -> Result<Vec<TomographySetting>, Error> {
    settings_with_limit(n_qubits, MAX_TOMOGRAPHY_QUBITS)
}

/// [`settings`] with an explicit qubit-count ceiling (still capped by the
/// register-size limit).
pub fn settings_with_limit(n_qubits: usize, limit: usize) -> Result<Vec<TomographySetting>, Error> {
    qcore::check_qubit_count(n_qubits).map_err(Error::Core)?;
    if n_qubits > limit {
        return Err(Error::TooManyQubits {
            n: n_qubits,
            limit,
        });
    }
    let total = 3usize.pow(n_qubits as u32);
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        // base-3 digits, qubit 0 as the most significant digit so that
        // counting order equals lexicographic label order
        let mut bases = Vec::with_capacity(n_qubits);
        let mut rem = k;
        let mut place = total / 3;
        for _ in 0..n_qubits {
            let digit = rem / place.max(1);
            rem %= place.max(1);
            place /= 3;
            bases.push(match digit {
                0 => MeasurementBasis::X,
                1 => MeasurementBasis::Y,
                _ => MeasurementBasis::Z,
            });
        }
        out.push(TomographySetting { bases });
    }
    Ok(out)
}

/// Measurement records for all 3^n settings: outcome frequencies always,
/// raw histograms when the data came from finite shots.
#[derive(Debug, Clone)]
pub struct TomographyDataset {
    n_qubits: usize,
    settings: Vec<TomographySetting>,
    frequencies: Vec<Vec<f64>>,
    histograms: Option<Vec<CountsHistogram>>,
    shots_per_setting: Option<u64>,
}

impl TomographyDataset {
    /// Build a dataset from per-setting outcome distributions in
    /// lexicographic setting order. Entries may be negative (readout
    /// mitigation produces quasi-probabilities) but each setting must sum
    /// to 1.
    pub fn from_frequencies(n_qubits: usize, frequencies: Vec<Vec<f64>>) -> Result<Self, Error> {
        let settings = settings(n_qubits)?;
        if frequencies.len() != settings.len() {
            return Err(Error::WrongSettingCount {
                expected: settings.len(),
                got: frequencies.len(),
            });
        }
        let dim = 1usize << n_qubits;
        for (s, f) in frequencies.iter().enumerate() {
            if f.len() != dim {
                return Err(Error::BadFrequencyLength {
                    setting: s,
                    expected: dim,
                    got: f.len(),
                });
            }
            let sum: f64 = f.iter().sum();
            if !(sum.is_finite() && (sum - 1.0).abs() < 1e-9) {
                return Err(Error::UnnormalizedFrequencies { setting: s, sum });
            }
        }
        Ok(Self {
            n_qubits,
            settings,
            frequencies,
            histograms: None,
            shots_per_setting: None,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn settings(&self) -> &[TomographySetting] {
        &self.settings
    }

    pub fn all_frequencies(&self) -> &[Vec<f64>] {
        &self.frequencies
    }

    pub fn frequencies(&self, setting: usize) -> &[f64] {
        &self.frequencies[setting]
    }

    /// Raw histogram for a setting; `None` for analytic datasets.
    pub fn histogram(&self, setting: usize) -> Option<&CountsHistogram> {
        self.histograms.as_ref().map(|h| &h[setting])
    }

    pub fn shots_per_setting(&self) -> Option<u64> {
        self.shots_per_setting
    }

    pub fn setting_index(&self, label: &str) -> Option<usize> {
        self.settings.iter().position(|s| s.label() == label)
    }
}

/// Measure `rho` in every setting with finite shots: the rotation layer
/// runs under the noise model, readout confusion is applied, and each
/// setting samples `shots` outcomes on its own derived RNG stream (setting
/// index = task number), so parallel collection is order-independent.
pub fn collect(
    rho: &DensityMatrix,
    nm: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<TomographyDataset, Error> {
    let n = rho.n_qubits();
    let all = settings(n)?;
    let confusion = nm.confusion();
    let results = par::map(
        all.iter().cloned().enumerate().collect::<Vec<_>>(),
        |(idx, setting)| -> Result<CountsHistogram, Error> {
            let rotation = setting.rotation_circuit().map_err(Error::Core)?;
            let rotated = noise::apply_noisy_circuit(rho, &rotation, nm)?;
            let hist = noise::sample_counts(
                &rotated,
                &confusion,
                shots,
                noise::derive_seed(seed, idx as u64),
            )?;
            Ok(hist)
        },
    );
    let mut histograms = Vec::with_capacity(all.len());
    let mut frequencies = Vec::with_capacity(all.len());
    for r in results {
        let hist = r?;
        frequencies.push(hist.frequencies());
        histograms.push(hist);
    }
    Ok(TomographyDataset {
        n_qubits: n,
        settings: all,
        frequencies,
        histograms: Some(histograms),
        shots_per_setting: Some(shots),
    })
}

/// Infinite-shot variant of [`collect`]: same measurement-path noise and
/// readout confusion, but exact outcome distributions instead of samples.
pub fn collect_analytic(rho: &DensityMatrix, nm: &NoiseModel) -> Result<TomographyDataset, Error> {
    let n = rho.n_qubits();
    let all = settings(n)?;
    let confusion = nm.confusion();
    let results = par::map(
        all.iter().cloned().collect::<Vec<_>>(),
        |setting| -> Result<Vec<f64>, Error> {
            let rotation = setting.rotation_circuit().map_err(Error::Core)?;
            let rotated = noise::apply_noisy_circuit(rho, &rotation, nm)?;
            let p = confusion.apply(&noise::clamped_probabilities(&rotated))?;
            Ok(p)
        },
    );
    let frequencies = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(TomographyDataset {
        n_qubits: n,
        settings: all,
        frequencies,
        histograms: None,
        shots_per_setting: None,
    })
}

/// Dense matrix of a Pauli string given base-4 digits per qubit
/// (0 = I, 1 = X, 2 = Y, 3 = Z; digit `i` acts on qubit `i` = bit `i`).
/// Pauli strings are generalized permutations, so the matrix is filled one
/// entry per column.
fn pauli_string_matrix(digits: &[u8]) -> DMatrix<C64> {
    let n = digits.len();
    let dim = 1usize << n;
    let mut flip = 0usize;
    for (q, &d) in digits.iter().enumerate() {
        if d == 1 || d == 2 {
            flip |= 1 << q;
        }
    }
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let row = col ^ flip;
        let mut val = C64::new(1.0, 0.0);
        for (q, &d) in digits.iter().enumerate() {
            let bit = (col >> q) & 1;
            val *= match (d, bit) {
                (2, 1) => C64::new(0.0, -1.0), // Y[0][1]
                (2, 0) => C64::new(0.0, 1.0),  // Y[1][0]
                (3, 1) => C64::new(-1.0, 0.0),
                _ => C64::new(1.0, 0.0),
            };
        }
        m[(row, col)] = val;
    }
    m
}

/// Estimate every Pauli-string expectation and assemble
/// `μ = 2^{-n} Σ_P ⟨P⟩ P`.
///
/// A string with identity factors is compatible with `3^(#identities)`
/// settings; its expectation averages over all of them. The identity
/// string itself is pinned to 1, so `Tr μ = 1` by construction. `μ` is
/// Hermitian but generally not positive; see [`psd_project`].
pub fn linear_inversion(ds: &TomographyDataset) -> Result<HermitianOperator, Error> {
    let n = ds.n_qubits();
    let dim = 1usize << n;
    let n_strings = 4usize.pow(n as u32);
    let mut sums = vec![0.0f64; n_strings];
    let mut hits = vec![0u32; n_strings];

    for (setting, freqs) in ds.settings().iter().zip(ds.all_frequencies()) {
        // digit per qubit: X = 1, Y = 2, Z = 3 in the base-4 string index
        let digit: Vec<usize> = setting
            .bases()
            .iter()
            .map(|b| match b {
                MeasurementBasis::X => 1,
                MeasurementBasis::Y => 2,
                MeasurementBasis::Z => 3,
            })
            .collect();
        for mask in 0..dim {
            let mut p_idx = 0usize;
            for q in 0..n {
                if (mask >> q) & 1 == 1 {
                    p_idx += digit[q] << (2 * q);
                }
            }
            // outcome bit 0 ↔ eigenvalue +1 on every measured qubit
            let mut e = 0.0;
            for (outcome, &f) in freqs.iter().enumerate() {
                let sign = if (outcome & mask).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                e += sign * f;
            }
            sums[p_idx] += e;
            hits[p_idx] += 1;
        }
    }

    let mut mu = DMatrix::<C64>::zeros(dim, dim);
    let scale = 1.0 / dim as f64;
    for p_idx in 0..n_strings {
        let expectation = if p_idx == 0 {
            1.0
        } else {
            debug_assert!(hits[p_idx] > 0, "setting enumeration missed a string");
            sums[p_idx] / f64::from(hits[p_idx])
        };
        let digits: Vec<u8> = (0..n).map(|q| ((p_idx >> (2 * q)) & 3) as u8).collect();
        mu += pauli_string_matrix(&digits).scale(expectation * scale);
    }
    HermitianOperator::new(n, mu).map_err(Error::Core)
}

/// Zero out negative eigenvalues in ascending order, spreading the
/// accumulated deficit uniformly over the survivors. For a trace-1 input
/// this is the closest probability vector in Euclidean distance.
fn project_eigenvalues(ascending: &[f64]) -> Vec<f64> {
    let d = ascending.len();
    let mut out = vec![0.0; d];
    let mut deficit = 0.0;
    let mut k = 0;
    while k < d {
        let share = deficit / (d - k) as f64;
        if ascending[k] + share < 0.0 {
            deficit += ascending[k];
            k += 1;
        } else {
            for j in k..d {
                out[j] = ascending[j] + share;
            }
            break;
        }
    }
    out
}

/// Closest physical state to a Hermitian, trace-1 reconstruction: keep the
/// eigenbasis, project the spectrum onto the probability simplex. The
/// output is PSD with trace 1 and the map is idempotent on physical
/// states.
pub fn psd_project(mu: &HermitianOperator) -> Result<DensityMatrix, Error> {
    let (values, vectors) = mu.eigendecompose();
    let projected = project_eigenvalues(&values);
    let dim = values.len();
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        projected.iter().map(|&l| C64::new(l, 0.0)),
    ));
    let rho = &vectors * diag * vectors.adjoint();
    DensityMatrix::from_matrix(mu.n_qubits(), rho).map_err(Error::Core)
}
