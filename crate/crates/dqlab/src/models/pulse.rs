//! Gaussian-envelope drive pulses.

use super::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    /// Field rotates in the x–y plane under the envelope.
    Circular,
    /// Field points along x only.
    Linear,
}

/// A Gaussian pulse `env(t) = h0 · exp(−(t−t0)² / (2τ²))` with carrier
/// frequency `omega`, centred at `t0`.
///
/// Circular polarization yields `(env·cos ω(t−t0), env·sin ω(t−t0))`;
/// linear polarization applies the bare envelope along x: `(env, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseWaveform {
    pub polarization: Polarization,
    pub h0: f64,
    pub omega: f64,
    pub tau: f64,
    pub t0: f64,
}

impl PulseWaveform {
    pub fn new(
        polarization: Polarization,
        h0: f64,
        omega: f64,
        tau: f64,
        t0: f64,
    ) -> Result<Self, Error> {
        if !(tau > 0.0) {
            return Err(Error::BadTau(tau));
        }
        Ok(Self {
            polarization,
            h0,
            omega,
            tau,
            t0,
        })
    }

    /// In-plane field components `(H_x, H_y)` at time `t`.
    pub fn field_at(&self, t: f64) -> (f64, f64) {
        let dt = t - self.t0;
        let env = self.h0 * (-dt * dt / (2.0 * self.tau * self.tau)).exp();
        match self.polarization {
            Polarization::Circular => {
                let (s, c) = (self.omega * dt).sin_cos();
                (env * c, env * s)
            }
            Polarization::Linear => (env, 0.0),
        }
    }
}
