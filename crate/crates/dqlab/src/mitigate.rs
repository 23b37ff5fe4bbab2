//! Error-mitigation post-processors: readout-error inversion, zero-noise
//! extrapolation, and symmetry-based corrections.
//!
//! All three act on classical results — count histograms, expectation
//! values, or reconstructed density matrices — never on the quantum
//! simulation itself:
//!
//! * [`mitigate_readout`] undoes the readout confusion matrix `Λ` by
//!   applying its inverse (or Moore–Penrose pseudoinverse) to measured
//!   frequencies, yielding quasi-probabilities that may dip slightly
//!   negative; those are preserved by default since downstream averages
//!   remain unbiased ([`clamp_probabilities`] is the opt-in cleanup).
//! * [`zne_extrapolate`] fits a line through expectation values measured
//!   at several noise-stretch factors (CNOT folding provides the stretch;
//!   see `Circuit::fold_cnots`) and reads off the zero-noise intercept.
//!   The default two-point set {1, 3} gives `E0 = (3·E(1) − E(3))/2`.
//! * [`mirror_symmetrize`] averages site-resolved values with their mirror
//!   images for models whose dynamics conserve reflection symmetry, and
//!   [`number_sector_project`] restores a conserved particle number by
//!   projecting a density matrix onto one Hamming-weight sector.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::noise::{ConfusionMatrix, CountsHistogram};
use crate::qcore::{self, DensityMatrix};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("confusion matrix is singular; use the pseudoinverse method")]
    SingularMatrix,
    #[error("pseudoinverse computation failed: {0}")]
    PseudoinverseFailed(String),
    #[error("mitigated distribution sums to {0:.3e} and cannot be renormalized")]
    CannotRenormalize(f64),
    #[error("probability vector has {got} entries, expected {expected}")]
    BadProbabilityLength { expected: usize, got: usize },
    #[error("zero-noise extrapolation needs at least two stretch factors, got {0}")]
    TooFewStretchFactors(usize),
    #[error("duplicate stretch factor {0}")]
    DuplicateStretch(f64),
    #[error("stretch factor {0} is not positive and finite")]
    BadStretch(f64),
    #[error("state has no weight in the {n_particles}-particle sector (trace {trace:.3e})")]
    EmptySector { n_particles: usize, trace: f64 },
    #[error(transparent)]
    Core(#[from] qcore::Error),
}

/// How to invert the confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InversionMethod {
    /// Exact inverse; fails on singular matrices.
    #[default]
    Inverse,
    /// Moore–Penrose pseudoinverse: least-squares solution, tolerant of
    /// singular or ill-conditioned matrices.
    Pseudoinverse,
}

/// Undo readout confusion on measured outcome frequencies:
/// `p̂ = Λ⁻¹ · p_measured`, renormalized to sum 1. Entries may come out
/// slightly negative; they are reported as-is.
pub fn mitigate_probabilities(
    measured: &[f64],
    lambda: &ConfusionMatrix,
    method: InversionMethod,
) -> Result<Vec<f64>, Error> {
    let dim = 1usize << lambda.n_qubits();
    if measured.len() != dim {
        return Err(Error::BadProbabilityLength {
            expected: dim,
            got: measured.len(),
        });
    }
    let inv = match method {
        InversionMethod::Inverse => lambda
            .matrix()
            .clone()
            .try_inverse()
            .ok_or(Error::SingularMatrix)?,
        InversionMethod::Pseudoinverse => lambda
            .matrix()
            .clone()
            .svd(true, true)
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::PseudoinverseFailed(e.to_string()))?,
    };
    let p = &inv * DVector::from_column_slice(measured);
    let sum: f64 = p.iter().sum();
    if !(sum.is_finite() && sum.abs() > 1e-9) {
        return Err(Error::CannotRenormalize(sum));
    }
    Ok(p.iter().map(|v| v / sum).collect())
}

/// [`mitigate_probabilities`] on a histogram's empirical frequencies.
pub fn mitigate_readout(
    counts: &CountsHistogram,
    lambda: &ConfusionMatrix,
    method: InversionMethod,
) -> Result<Vec<f64>, Error> {
    mitigate_probabilities(&counts.frequencies(), lambda, method)
}

/// Clamp negative quasi-probabilities to zero and renormalize — the
/// optional cleanup after [`mitigate_readout`].
pub fn clamp_probabilities(p: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = p.iter().map(|&v| v.max(0.0)).collect();
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        for v in &mut out {
            *v /= sum;
        }
    }
    out
}

/// A zero-noise extrapolation: the stretch factors and expectations that
/// went in, and the linear fit's intercept at zero noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ZneEstimate {
    stretches: Vec<f64>,
    expectations: Vec<f64>,
    extrapolated: f64,
    slope: f64,
}

impl ZneEstimate {
    pub fn stretches(&self) -> &[f64] {
        &self.stretches
    }

    pub fn expectations(&self) -> &[f64] {
        &self.expectations
    }

    /// The zero-noise estimate `E0`.
    pub fn extrapolated(&self) -> f64 {
        self.extrapolated
    }

    /// Fitted change of the expectation per unit stretch.
    pub fn slope(&self) -> f64 {
        self.slope
    }
}

/// Least-squares line through `(stretch, expectation)` points, evaluated
/// at stretch 0. With the default points {1, 3} this is Richardson's
/// two-point rule `E0 = (3·E(1) − E(3))/2`.
pub fn zne_extrapolate(points: &[(f64, f64)]) -> Result<ZneEstimate, Error> {
    if points.len() < 2 {
        return Err(Error::TooFewStretchFactors(points.len()));
    }
    for (i, &(c, _)) in points.iter().enumerate() {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::BadStretch(c));
        }
        if points[..i].iter().any(|&(prev, _)| prev == c) {
            return Err(Error::DuplicateStretch(c));
        }
    }
    let n = points.len() as f64;
    let sum_c: f64 = points.iter().map(|&(c, _)| c).sum();
    let sum_e: f64 = points.iter().map(|&(_, e)| e).sum();
    let sum_cc: f64 = points.iter().map(|&(c, _)| c * c).sum();
    let sum_ce: f64 = points.iter().map(|&(c, e)| c * e).sum();
    let denom = n * sum_cc - sum_c * sum_c;
    let slope = (n * sum_ce - sum_c * sum_e) / denom;
    let intercept = (sum_e - slope * sum_c) / n;
    Ok(ZneEstimate {
        stretches: points.iter().map(|&(c, _)| c).collect(),
        expectations: points.iter().map(|&(_, e)| e).collect(),
        extrapolated: intercept,
        slope,
    })
}

/// Average site-resolved values with their mirror images:
/// `v'_i = (v_i + v_{L−1−i}) / 2`.
pub fn mirror_symmetrize(site_values: &[f64]) -> Vec<f64> {
    let l = site_values.len();
    (0..l)
        .map(|i| 0.5 * (site_values[i] + site_values[l - 1 - i]))
        .collect()
}

/// Project onto the fixed-particle-number sector and renormalize:
/// `ρ' = PρP / Tr(PρP)` with `P` spanning the Hamming-weight-`n_particles`
/// basis states.
pub fn number_sector_project(
    rho: &DensityMatrix,
    n_particles: usize,
) -> Result<DensityMatrix, Error> {
    let dim = 1usize << rho.n_qubits();
    let in_sector: Vec<bool> = (0..dim)
        .map(|idx| idx.count_ones() as usize == n_particles)
        .collect();
    let mut trace = 0.0;
    for idx in 0..dim {
        if in_sector[idx] {
            trace += rho.matrix()[(idx, idx)].re;
        }
    }
    if trace < 1e-12 {
        return Err(Error::EmptySector { n_particles, trace });
    }
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    let scale = 1.0 / trace;
    for r in 0..dim {
        if !in_sector[r] {
            continue;
        }
        for c in 0..dim {
            if in_sector[c] {
                out[(r, c)] = rho.matrix()[(r, c)].scale(scale);
            }
        }
    }
    DensityMatrix::from_matrix(rho.n_qubits(), out).map_err(Error::Core)
}
