//! Level structure, couplings and geometry for the NV / reporter / proton system.

mod constants;
pub(crate) mod hyperfine;
mod zeeman;

pub use constants::{
    PhysicalConstants, CONSTANTS_ENV_VAR, CONSTANTS_VERSION, DEFAULT_CONSTANTS_FILE,
};
pub use hyperfine::{
    eseem_frequencies, geometry_from_hyperfine, hyperfine_from_eseem, hyperfine_from_geometry,
    A0Range, EseemFrequencies, GeometryEstimate, ProtonPosition, SignHypothesis,
};
pub use zeeman::{
    dipolar_coupling_ee, geometry_factor_for_separation, larmor_proton, min_separation_from_t1,
    zeeman_nv, zeeman_nv_branches, zeeman_reporter, DEFAULT_MISALIGNMENT_LIMIT_DEG,
    MAX_FIELD_GAUSS,
};

use nalgebra::{Rotation3, Unit, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Closest two sites may sit, nm.
pub const MIN_SITE_SEPARATION: f64 = 0.05;

/// Unit vector along the NV (111) axis in a frame whose z axis is the (100) surface normal.
pub fn default_nv_axis() -> Vec3 {
    Vec3::new(1.0, 1.0, 1.0).normalize()
}

/// Static field: magnitude in G and a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSetting {
    magnitude: f64,
    direction: Vec3,
}

impl FieldSetting {
    /// Normalizes `direction`; rejects a zero vector or negative magnitude.
    pub fn new(magnitude: f64, direction: Vec3) -> Result<Self> {
        if !(magnitude >= 0.0) || !magnitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "field magnitude must be finite and >= 0, got {magnitude}"
            )));
        }
        let norm = direction.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument(
                "field direction must be a non-zero vector".into(),
            ));
        }
        Ok(Self {
            magnitude,
            direction: direction / norm,
        })
    }

    /// Field of `magnitude` along the default NV axis.
    pub fn along_nv(magnitude: f64) -> Result<Self> {
        Self::new(magnitude, default_nv_axis())
    }

    /// Field tilted by `polar_deg` away from `axis`, at azimuth `azimuth_deg` about it.
    pub fn tilted(magnitude: f64, axis: &Vec3, polar_deg: f64, azimuth_deg: f64) -> Result<Self> {
        let axis = axis.normalize();
        // any vector not parallel to the axis seeds the transverse basis
        let seed = if axis.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
        let e1 = (seed - axis * axis.dot(&seed)).normalize();
        let e2 = axis.cross(&e1);
        let (p, q) = (polar_deg.to_radians(), azimuth_deg.to_radians());
        let dir = axis * p.cos() + (e1 * q.cos() + e2 * q.sin()) * p.sin();
        Self::new(magnitude, dir)
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn with_magnitude(&self, magnitude: f64) -> Result<Self> {
        Self::new(magnitude, self.direction)
    }

    /// Same field with its direction rotated.
    pub fn rotated(&self, rotation: &Rotation3<f64>) -> Self {
        Self {
            magnitude: self.magnitude,
            direction: rotation * self.direction,
        }
    }

    /// Angle between the field direction and `axis`, degrees.
    pub fn angle_to_deg(&self, axis: &Vec3) -> f64 {
        let c = self.direction.dot(&axis.normalize()).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }
}

/// Geometric scene: NV at the origin, surface plane at z = depth.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    pub nv_position: Vec3,
    pub nv_axis: Vec3,
    pub reporter_sites: Vec<Vec3>,
    /// Proton positions; relative to their coupled reporter when used for hyperfine geometry.
    pub proton_sites: Vec<Vec3>,
    pub field: FieldSetting,
}

impl SpinSystem {
    /// NV at the origin along the default (111) axis, no sites yet.
    pub fn new(field: FieldSetting) -> Self {
        Self {
            nv_position: Vec3::zeros(),
            nv_axis: default_nv_axis(),
            reporter_sites: Vec::new(),
            proton_sites: Vec::new(),
            field,
        }
    }

    pub fn with_reporters(mut self, sites: impl IntoIterator<Item = Vec3>) -> Self {
        self.reporter_sites.extend(sites);
        self
    }

    pub fn with_field(&self, field: FieldSetting) -> Self {
        Self {
            field,
            ..self.clone()
        }
    }

    /// Checks the surface-plane and minimum-separation invariants.
    ///
    /// Reporters must sit on `surface_z` within `roughness`; proton sites are
    /// reporter-relative and only checked for coincidence.
    pub fn validate(&self, surface_z: f64, roughness: f64) -> Result<()> {
        if (self.nv_axis.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("nv_axis must be a unit vector".into()));
        }
        for (i, s) in self.reporter_sites.iter().enumerate() {
            if (s.z - surface_z).abs() > roughness {
                return Err(Error::InvalidArgument(format!(
                    "reporter {i} at z = {} nm is off the surface plane z = {surface_z} nm",
                    s.z
                )));
            }
        }
        let mut all: Vec<Vec3> = vec![self.nv_position];
        all.extend(self.reporter_sites.iter().copied());
        check_separations(&all)?;
        check_separations(&self.proton_sites)
    }
}

fn check_separations(sites: &[Vec3]) -> Result<()> {
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            let d = (a - b).norm();
            if d <= MIN_SITE_SEPARATION {
                return Err(Error::CoincidentSites {
                    distance: d,
                    min: MIN_SITE_SEPARATION,
                });
            }
        }
    }
    Ok(())
}

/// Rotation by `angle_deg` about `axis` (right-handed).
pub fn rotation_about(axis: &Vec3, angle_deg: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle_deg.to_radians())
}

/// Reporter–proton hyperfine couplings, all rad/μs.
///
/// `a` is the secular term including the contact part `a0`; `b` is the
/// pseudo-secular term, kept non-negative (its sign folds into the azimuth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineParams {
    pub a: f64,
    pub b: f64,
    pub a0: f64,
}

impl HyperfineParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b: b.abs(), a0: 0.0 }
    }
}
