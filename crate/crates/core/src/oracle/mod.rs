//! Brute-force density-matrix simulation of small spin systems running literal
//! pulse sequences. Every analytic model in [`crate::signal`] is checked
//! against this.
//!
//! Each spin is a two-level system. The NV center enters as its ms = 0 / −1
//! pair (|0⟩ = ms 0), reporters are S = 1/2 and protons I = 1/2. Basis index
//! bits are ordered with spin 0 as the most significant bit; bit value 0 is
//! spin-up (Sz = +1/2).

mod engine;
mod experiments;
mod hamiltonian;
mod sequence;

pub use engine::{run_sequence, DensityMatrix, OracleResult, OracleRunner};
pub use experiments::{
    oracle_bath_limit, oracle_deer_trace, oracle_echo_trace, BathLimitConfig, FlipModel,
};
pub use hamiltonian::{build_hamiltonian, is_hermitian, Operator};
pub use sequence::{Axis, Channel, Element, InitialSpin, Observable, Pulse, PulseSequence};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::physics::{dipolar_coupling_ee, FieldSetting, PhysicalConstants, Vec3};

/// Largest number of spins the dense representation accepts (dimension 4096).
pub const MAX_SPINS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    /// NV ms = 0 / −1 effective two-level system.
    Nv,
    /// Surface reporter electron, S = 1/2.
    Electron,
    Proton,
}

impl Species {
    pub fn name(self) -> &'static str {
        match self {
            Species::Nv => "nv",
            Species::Electron => "electron",
            Species::Proton => "proton",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpin {
    pub species: Species,
    /// nm
    pub position: Vec3,
}

/// Pairwise interaction, rad/μs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// d·Sz_i·Sz_j, with the NV's Sz replaced by ms = Sz − 1/2.
    Ising(f64),
    /// Like-spin secular dipolar d·(Sz Sz − (Sx Sx + Sy Sy)/2).
    SecularDipolar(f64),
    /// Electron–proton a·Sz·Iz + b·Sz·(cosφ·Ix + sinφ·Iy).
    Hyperfine { a: f64, b: f64, phi: f64 },
}

/// Whether electron and NV Zeeman terms are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    /// Electron and NV Zeeman terms removed; protons keep ωn·Iz.
    #[default]
    Rotating,
    /// All Zeeman terms present; only instantaneous pulses are allowed.
    Lab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSystem {
    pub spins: Vec<OracleSpin>,
    pub field: FieldSetting,
    pub frame: Frame,
    couplings: BTreeMap<(usize, usize), Coupling>,
    /// Nuclear Zeeman frequency override, rad/μs.
    pub omega_n: Option<f64>,
}

impl OracleSystem {
    pub fn new(field: FieldSetting) -> Self {
        Self {
            spins: Vec::new(),
            field,
            frame: Frame::Rotating,
            couplings: BTreeMap::new(),
            omega_n: None,
        }
    }

    /// Adds a spin and returns its index.
    pub fn add_spin(&mut self, species: Species, position: Vec3) -> usize {
        self.spins.push(OracleSpin { species, position });
        self.spins.len() - 1
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn dimension(&self) -> Result<usize> {
        if self.spins.len() > MAX_SPINS {
            return Err(Error::DimensionLimit {
                spins: self.spins.len(),
                max: MAX_SPINS,
            });
        }
        Ok(1 << self.spins.len())
    }

    pub fn indices_of(&self, species: Species) -> Vec<usize> {
        (0..self.spins.len())
            .filter(|&i| self.spins[i].species == species)
            .collect()
    }

    /// Sets (or replaces) the coupling between `i` and `j`.
    pub fn set_coupling(&mut self, i: usize, j: usize, coupling: Coupling) -> Result<()> {
        self.check_pair(i, j)?;
        if let Coupling::Hyperfine { .. } = coupling {
            let kinds = (self.spins[i].species, self.spins[j].species);
            if !matches!(
                kinds,
                (Species::Electron | Species::Nv, Species::Proton)
                    | (Species::Proton, Species::Electron | Species::Nv)
            ) {
                return Err(Error::InvalidArgument(
                    "hyperfine couplings join an electron to a proton".into(),
                ));
            }
        }
        self.couplings.insert((i.min(j), i.max(j)), coupling);
        Ok(())
    }

    pub fn clear_coupling(&mut self, i: usize, j: usize) {
        self.couplings.remove(&(i.min(j), i.max(j)));
    }

    pub fn coupling(&self, i: usize, j: usize) -> Option<Coupling> {
        self.couplings.get(&(i.min(j), i.max(j))).copied()
    }

    /// All couplings as ((i, j), coupling) with i < j.
    pub fn couplings(&self) -> impl Iterator<Item = ((usize, usize), Coupling)> + '_ {
        self.couplings.iter().map(|(k, v)| (*k, *v))
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j || i >= self.spins.len() || j >= self.spins.len() {
            return Err(Error::InvalidArgument(format!(
                "invalid spin pair ({i}, {j}) for a system of {} spins",
                self.spins.len()
            )));
        }
        Ok(())
    }

    /// Derives every coupling from positions.
    ///
    /// NV–electron pairs get the secular Ising term, electron pairs the
    /// like-spin secular dipolar term, electron–proton pairs the point-dipole
    /// hyperfine term plus `contact_a0` (override per pair with
    /// [`OracleSystem::set_coupling`]). NV–proton and proton–proton pairs are
    /// left uncoupled.
    pub fn derive_couplings(&mut self, c: &PhysicalConstants, contact_a0: f64) -> Result<()> {
        self.couplings.clear();
        let n = self.spins.len();
        for i in 0..n {
            for j in i + 1..n {
                let (si, sj) = (self.spins[i], self.spins[j]);
                let coupling = match (si.species, sj.species) {
                    (Species::Nv, Species::Electron) | (Species::Electron, Species::Nv) => {
                        Some(Coupling::Ising(dipolar_coupling_ee(
                            c,
                            &si.position,
                            &sj.position,
                            &self.field,
                        )?))
                    }
                    (Species::Electron, Species::Electron) => Some(Coupling::SecularDipolar(
                        dipolar_coupling_ee(c, &si.position, &sj.position, &self.field)?,
                    )),
                    (Species::Electron, Species::Proton) => Some(self.point_hyperfine(
                        c,
                        &si.position,
                        &sj.position,
                        contact_a0,
                    )?),
                    (Species::Proton, Species::Electron) => Some(self.point_hyperfine(
                        c,
                        &sj.position,
                        &si.position,
                        contact_a0,
                    )?),
                    _ => None,
                };
                if let Some(coupling) = coupling {
                    self.couplings.insert((i, j), coupling);
                }
            }
        }
        Ok(())
    }

    fn point_hyperfine(
        &self,
        c: &PhysicalConstants,
        electron: &Vec3,
        proton: &Vec3,
        a0: f64,
    ) -> Result<Coupling> {
        let sep = proton - electron;
        let r = sep.norm();
        if r < crate::physics::MIN_SITE_SEPARATION {
            return Err(Error::DegenerateRadius(r));
        }
        let z = self.field.direction();
        let cos = sep.dot(&z) / r;
        let k = c.k_ep() / (r * r * r);
        let transverse = sep - z * sep.dot(&z);
        let (ex, ey) = transverse_basis(&z);
        let phi = transverse.dot(&ey).atan2(transverse.dot(&ex));
        let sin = transverse.norm() / r;
        // a negative pseudo-secular term is folded into φ + π
        let b_signed = 3.0 * k * cos * sin;
        Ok(Coupling::Hyperfine {
            a: a0 + k * (1.0 - 3.0 * cos * cos),
            b: b_signed.abs(),
            phi: if b_signed < 0.0 {
                phi + std::f64::consts::PI
            } else {
                phi
            },
        })
    }

    /// Proton Larmor frequency used for the nuclear Zeeman term.
    pub fn larmor(&self, c: &PhysicalConstants) -> f64 {
        self.omega_n
            .unwrap_or_else(|| c.gamma_p * self.field.magnitude())
    }

    /// Reporter with protons attached by explicit (a, b) couplings.
    ///
    /// Spin 0 is the reporter, spins 1.. are the protons; each proton's
    /// transverse coupling is placed along x.
    pub fn reporter_with_protons(field: FieldSetting, omega_n: f64, protons: &[crate::HyperfineParams]) -> Self {
        let mut sys = Self::new(field);
        sys.omega_n = Some(omega_n);
        let e = sys.add_spin(Species::Electron, Vec3::zeros());
        for (k, p) in protons.iter().enumerate() {
            let idx = sys.add_spin(Species::Proton, Vec3::new(0.3 * (k + 1) as f64, 0.0, 0.0));
            sys.couplings.insert(
                (e, idx),
                Coupling::Hyperfine {
                    a: p.a,
                    b: p.b,
                    phi: 0.0,
                },
            );
        }
        sys
    }
}

/// Orthonormal pair spanning the plane perpendicular to `z`.
pub(crate) fn transverse_basis(z: &Vec3) -> (Vec3, Vec3) {
    let seed = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let ex = (seed - z * z.dot(&seed)).normalize();
    (ex, z.cross(&ex))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::hyperfine_from_geometry;

    #[test]
    fn derived_hyperfine_matches_geometry_formula() {
        let c = PhysicalConstants::default();
        let field = FieldSetting::new(600.0, Vec3::z()).unwrap();
        let mut sys = OracleSystem::new(field);
        let e = sys.add_spin(Species::Electron, Vec3::new(1.0, 1.0, 3.0));
        let th = 35f64.to_radians();
        let p = sys.add_spin(
            Species::Proton,
            Vec3::new(1.0 + 0.25 * th.sin(), 1.0, 3.0 + 0.25 * th.cos()),
        );
        sys.derive_couplings(&c, 4.0).unwrap();
        let expect = hyperfine_from_geometry(&c, 0.25, 35.0, 4.0).unwrap();
        match sys.coupling(e, p).unwrap() {
            Coupling::Hyperfine { a, b, .. } => {
                assert!((a - expect.a).abs() < 1e-10);
                assert!((b - expect.b).abs() < 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_limit() {
        let field = FieldSetting::new(100.0, Vec3::z()).unwrap();
        let mut sys = OracleSystem::new(field);
        for k in 0..13 {
            sys.add_spin(Species::Proton, Vec3::new(k as f64, 0.0, 0.0));
        }
        assert!(matches!(sys.dimension(), Err(Error::DimensionLimit { spins: 13, .. })));
    }

    #[test]
    fn hyperfine_requires_electron_proton_pair() {
        let field = FieldSetting::new(100.0, Vec3::z()).unwrap();
        let mut sys = OracleSystem::new(field);
        let a = sys.add_spin(Species::Proton, Vec3::zeros());
        let b = sys.add_spin(Species::Proton, Vec3::x());
        let bad = Coupling::Hyperfine { a: 1.0, b: 1.0, phi: 0.0 };
        assert!(sys.set_coupling(a, b, bad).is_err());
        assert!(sys.set_coupling(a, a, Coupling::Ising(1.0)).is_err());
    }
}
