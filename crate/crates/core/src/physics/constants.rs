//! Physical constants and the versioned constants file that pins them.
//!
//! Internal units: angular frequencies in rad/μs, fields in G, distances in nm.
//! Every factor of 2π lives here; call sites never multiply by 2π themselves.

use std::path::Path;

use crate::error::{Error, Result};

/// Text of the constants file shipped with the crate.
pub const DEFAULT_CONSTANTS_FILE: &str = include_str!("../../constants/physical_constants.txt");

/// Environment variable naming a constants file that replaces the built-in one.
pub const CONSTANTS_ENV_VAR: &str = "REPORTER_CONSTANTS";

/// Constants-file format version understood by this build.
pub const CONSTANTS_VERSION: u32 = 1;

/// (rad/μs per G)² × J·s × T·m/A → rad·nm³/μs.
///
/// γ[rad/(μs·G)] = 1e10 γ[rad/(s·T)], and rad·m³/s → rad·nm³/μs is 1e21.
const DIPOLAR_UNIT_SCALE: f64 = 1e41;

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalConstants {
    pub version: u32,
    /// NV zero-field splitting Δ, rad/μs.
    pub delta_nv: f64,
    /// Electron gyromagnetic ratio, rad/(μs·G).
    pub gamma_e: f64,
    /// Proton gyromagnetic ratio, rad/(μs·G).
    pub gamma_p: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// μ0/4π, T·m/A.
    pub mu0_over_4pi: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::parse(DEFAULT_CONSTANTS_FILE).expect("built-in constants file is valid")
    }
}

impl PhysicalConstants {
    /// Constants from `$REPORTER_CONSTANTS` if set, else the built-in file.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONSTANTS_ENV_VAR) {
            Some(path) => Self::load(path),
            None => Ok(Self::default()),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut values = [None; 5];
        const KEYS: [&str; 5] = ["delta_nv", "gamma_e", "gamma_p", "hbar", "mu0_over_4pi"];

        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Schema {
                message: format!("expected `key = value`, found `{line}`"),
                line: Some(idx + 1),
                field: None,
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad_number = || Error::Schema {
                message: format!("`{value}` is not a number"),
                line: Some(idx + 1),
                field: Some(key.to_string()),
            };
            if key == "version" {
                version = Some(value.parse::<u32>().map_err(|_| bad_number())?);
                continue;
            }
            let slot = KEYS.iter().position(|k| *k == key).ok_or_else(|| Error::Schema {
                message: format!("unknown constant `{key}`"),
                line: Some(idx + 1),
                field: Some(key.to_string()),
            })?;
            let v: f64 = value.parse().map_err(|_| bad_number())?;
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Schema {
                    message: format!("constant must be positive and finite, got {v}"),
                    line: Some(idx + 1),
                    field: Some(key.to_string()),
                });
            }
            values[slot] = Some(v);
        }

        let version = version.ok_or_else(|| Error::missing_field("version"))?;
        if version != CONSTANTS_VERSION {
            return Err(Error::VersionMismatch {
                kind: "constants file".into(),
                found: version,
                expected: CONSTANTS_VERSION,
            });
        }
        let get = |i: usize| values[i].ok_or_else(|| Error::missing_field(KEYS[i]));
        Ok(Self {
            version,
            delta_nv: get(0)?,
            gamma_e: get(1)?,
            gamma_p: get(2)?,
            hbar: get(3)?,
            mu0_over_4pi: get(4)?,
        })
    }

    /// Dipolar prefactor (μ0/4π)ħγ_iγ_j in rad·nm³/μs.
    pub fn dipolar_prefactor(&self, gamma_i: f64, gamma_j: f64) -> f64 {
        self.mu0_over_4pi * self.hbar * gamma_i * gamma_j * DIPOLAR_UNIT_SCALE
    }

    /// Electron–electron dipolar prefactor, rad·nm³/μs.
    pub fn k_ee(&self) -> f64 {
        self.dipolar_prefactor(self.gamma_e, self.gamma_e)
    }

    /// Electron–proton dipolar prefactor, rad·nm³/μs.
    pub fn k_ep(&self) -> f64 {
        self.dipolar_prefactor(self.gamma_e, self.gamma_p)
    }
}
