//! XXZ spin-1/2 lattices with per-site drives.

use super::{
    assemble, BondTerm, Error, FieldTerm, Hamiltonian, PulseWaveform, TrotterModel,
};
use crate::qcore::{self, HermitianOperator};

/// Spin-1/2 sites coupled by XXZ exchange bonds, each site optionally
/// carrying a static field and/or a Gaussian drive pulse.
///
/// `H(t) = Σ_bonds [J⊥ (SxSx + SySy) + Jz SzSz]
///        + Σ_sites (h_static + h_pulse(t)) · S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinLattice {
    n_sites: usize,
    bonds: Vec<BondTerm>,
    site_pulses: Vec<Option<PulseWaveform>>,
    static_fields: Vec<[f64; 3]>,
}

impl SpinLattice {
    pub fn new(n_sites: usize) -> Result<Self, Error> {
        if n_sites == 0 || n_sites > qcore::MAX_QUBITS {
            return Err(Error::BadSiteCount {
                got: n_sites,
                max: qcore::MAX_QUBITS,
            });
        }
        Ok(Self {
            n_sites,
            bonds: Vec::new(),
            site_pulses: vec![None; n_sites],
            static_fields: vec![[0.0; 3]; n_sites],
        })
    }

    /// Open chain with nearest-neighbour bonds `(i, i+1)`.
    pub fn chain(n_sites: usize, j_perp: f64, j_z: f64) -> Result<Self, Error> {
        let mut l = Self::new(n_sites)?;
        for i in 0..n_sites.saturating_sub(1) {
            l.add_bond(i, i + 1, j_perp, j_z)?;
        }
        Ok(l)
    }

    /// Periodic chain: the open chain plus the wrap-around bond
    /// `(n_sites − 1, 0)`.
    pub fn ring(n_sites: usize, j_perp: f64, j_z: f64) -> Result<Self, Error> {
        let mut l = Self::chain(n_sites, j_perp, j_z)?;
        if n_sites > 2 {
            l.add_bond(n_sites - 1, 0, j_perp, j_z)?;
        }
        Ok(l)
    }

    /// Two coupled sites.
    pub fn dimer(j_perp: f64, j_z: f64) -> Result<Self, Error> {
        Self::chain(2, j_perp, j_z)
    }

    pub fn add_bond(&mut self, i: usize, j: usize, j_perp: f64, j_z: f64) -> Result<(), Error> {
        if i == j || i >= self.n_sites || j >= self.n_sites {
            return Err(Error::BadBond {
                i,
                j,
                n_sites: self.n_sites,
            });
        }
        self.bonds.push(BondTerm { i, j, j_perp, j_z });
        Ok(())
    }

    pub fn set_pulse(&mut self, site: usize, pulse: PulseWaveform) -> Result<(), Error> {
        self.check_site(site)?;
        self.site_pulses[site] = Some(pulse);
        Ok(())
    }

    pub fn set_static_field(&mut self, site: usize, h: [f64; 3]) -> Result<(), Error> {
        self.check_site(site)?;
        self.static_fields[site] = h;
        Ok(())
    }

    fn check_site(&self, site: usize) -> Result<(), Error> {
        if site >= self.n_sites {
            return Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            });
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn bond_list(&self) -> &[BondTerm] {
        &self.bonds
    }

    pub fn pulse(&self, site: usize) -> Option<&PulseWaveform> {
        self.site_pulses.get(site).and_then(Option::as_ref)
    }
}

pub fn spin_hamiltonian(lattice: &SpinLattice, t: f64) -> HermitianOperator {
    lattice.at(t)
}

impl Hamiltonian for SpinLattice {
    fn n_qubits(&self) -> usize {
        self.n_sites
    }

    fn at(&self, t: f64) -> HermitianOperator {
        assemble(self.n_sites, &self.bonds(t), &self.fields(t))
    }

    fn constant_on(&self, _t0: f64, _t1: f64) -> bool {
        self.site_pulses.iter().all(Option::is_none)
    }
}

impl TrotterModel for SpinLattice {
    fn bonds(&self, _t: f64) -> Vec<BondTerm> {
        self.bonds.clone()
    }

    fn fields(&self, t: f64) -> Vec<FieldTerm> {
        let mut out = Vec::new();
        for site in 0..self.n_sites {
            let mut h = self.static_fields[site];
            if let Some(p) = &self.site_pulses[site] {
                let (hx, hy) = p.field_at(t);
                h[0] += hx;
                h[1] += hy;
            }
            if h != [0.0; 3] {
                out.push(FieldTerm { site, h });
            }
        }
        out
    }
}
