//! Versioned TOML experiment configuration.
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [scene]
//! field_gauss = 619.0
//! reporters = [[0.0, 0.0, 4.0]]      # nm, NV at the origin
//!
//! [[scene.protons]]                  # either couplings ...
//! a = 66.0
//! b = 52.0
//! # ... or geometry: r_nm = 0.22, theta_deg = 26.0, a0 = 0.0
//!
//! [sequence]
//! model = "eseem"
//!
//! [grid]
//! start = 0.0
//! stop = 2.0
//! points = 200
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::noise::NoiseModel;
use crate::error::{Error, Result};
use crate::oracle::{
    oracle_deer_trace, oracle_echo_trace, run_sequence, Axis, Channel, Coupling, FlipModel, Frame,
    InitialSpin, Observable, OracleSystem, PulseSequence, Species,
};
use crate::physics::{
    default_nv_axis, hyperfine_from_geometry, FieldSetting, HyperfineParams, PhysicalConstants,
    SpinSystem, Vec3,
};
use crate::signal::{
    bath_echo, deer_signal, deer_spectrum, eseem_multi, linspace, nv_echo, reporter_echo_combined,
    reporter_rabi, reporter_t1, BathParams, DecoherenceParams, SignalTrace,
};

pub const CONFIG_VERSION: u32 = 1;

/// Named analytic models a config can request.
pub const MODEL_IDS: [&str; 9] = [
    "deer",
    "deer_spectrum",
    "rabi",
    "t1",
    "nv_echo",
    "eseem",
    "bath",
    "combined",
    "custom",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub scene: SceneSpec,
    pub sequence: SequenceSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub decoherence: DecoherenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath: Option<BathSpec>,
    #[serde(default)]
    pub oracle: OracleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub field_gauss: f64,
    /// Defaults to the NV axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nv_axis: Option<[f64; 3]>,
    /// Reporter positions, nm; the NV is at the origin.
    #[serde(default)]
    pub reporters: Vec<[f64; 3]>,
    /// Protons on the first reporter.
    #[serde(default)]
    pub protons: Vec<ProtonSpec>,
    /// Overrides γp·B, rad/μs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtonSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[serde(default)]
    pub a0: f64,
    /// Azimuth of the transverse coupling (oracle only), degrees.
    #[serde(default)]
    pub phi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub model: String,
    #[serde(default = "one")]
    pub flip_prob: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// rad/μs
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_freq: Option<f64>,
    /// NV echo time of a DEER spectrum, μs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_nv: Option<f64>,
    /// rad/μs
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth: Option<f64>,
    /// Explicit pulse list for `model = "custom"` (oracle only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub elements: Vec<ElementSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ElementSpec {
    Delay {
        duration: f64,
    },
    Pulse {
        channel: String,
        #[serde(default = "axis_x")]
        axis: String,
        angle: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration: Option<f64>,
    },
    Readout {
        channel: String,
    },
}

fn axis_x() -> String {
    "x".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// Decay constants, μs; `inf` disables a decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceSpec {
    pub t2_nv: f64,
    pub t2_s: f64,
    pub t1_s: f64,
    pub rabi_decay: f64,
    pub stretch_exponent: f64,
}

impl Default for DecoherenceSpec {
    fn default() -> Self {
        let d = DecoherenceParams::default();
        Self {
            t2_nv: d.t2_nv,
            t2_s: d.t2_s,
            t1_s: d.t1_s,
            rabi_decay: d.rabi_decay,
            stretch_exponent: d.stretch_exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    /// G
    pub b_rms: f64,
    /// Defaults to the proton Larmor frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    /// "rotating" or "lab".
    pub frame: String,
    /// "stochastic" or "rotation".
    pub flip_model: String,
    /// Keep reporter–reporter dipolar terms (absent from the analytic DEER model).
    pub reporter_couplings: bool,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            frame: "rotating".into(),
            flip_model: "stochastic".into(),
            reporter_couplings: false,
        }
    }
}

/// Schema error from a TOML parse failure, with line and field where known.
pub(crate) fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let message = e.message().to_string();
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let field = ["missing field `", "unknown field `"]
        .iter()
        .find_map(|p| message.split(p).nth(1))
        .and_then(|rest| rest.split('`').next())
        .map(str::to_string);
    Error::Schema {
        message,
        line,
        field,
    }
}

fn field_error(field: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        message: message.into(),
        line: None,
        field: Some(field.into()),
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::schema(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::VersionMismatch {
                kind: "experiment config".into(),
                found: self.version,
                expected: CONFIG_VERSION,
            });
        }
        if !MODEL_IDS.contains(&self.sequence.model.as_str()) {
            return Err(field_error(
                "sequence.model",
                format!("unknown model `{}` (one of {})", self.sequence.model, MODEL_IDS.join(", ")),
            ));
        }
        if self.grid.points == 0 || !(self.grid.stop >= self.grid.start) {
            return Err(field_error("grid", "need points >= 1 and stop >= start"));
        }
        self.noise.validate()?;
        self.field()?;
        self.decoherence().validate().map_err(|e| field_error("decoherence", e.to_string()))?;
        if !matches!(self.oracle.frame.as_str(), "rotating" | "lab") {
            return Err(field_error("oracle.frame", "expected `rotating` or `lab`"));
        }
        if !matches!(self.oracle.flip_model.as_str(), "stochastic" | "rotation") {
            return Err(field_error("oracle.flip_model", "expected `stochastic` or `rotation`"));
        }
        Ok(())
    }

    pub fn field(&self) -> Result<FieldSetting> {
        let dir = self
            .scene
            .field_direction
            .map(vec3)
            .unwrap_or_else(|| self.nv_axis());
        FieldSetting::new(self.scene.field_gauss, dir)
            .map_err(|e| field_error("scene.field_gauss", e.to_string()))
    }

    pub fn nv_axis(&self) -> Vec3 {
        self.scene
            .nv_axis
            .map(|v| vec3(v).normalize())
            .unwrap_or_else(default_nv_axis)
    }

    pub fn abscissa(&self) -> Vec<f64> {
        linspace(self.grid.start, self.grid.stop, self.grid.points)
    }

    pub fn decoherence(&self) -> DecoherenceParams {
        let d = &self.decoherence;
        DecoherenceParams {
            t2_nv: d.t2_nv,
            t2_s: d.t2_s,
            t1_s: d.t1_s,
            rabi_decay: d.rabi_decay,
            stretch_exponent: d.stretch_exponent,
        }
    }

    pub fn spin_system(&self) -> Result<SpinSystem> {
        let mut s = SpinSystem::new(self.field()?).with_reporters(self.scene.reporters.iter().map(|v| vec3(*v)));
        s.nv_axis = self.nv_axis();
        Ok(s)
    }

    pub fn omega_n(&self, c: &PhysicalConstants) -> f64 {
        self.scene
            .omega_n
            .unwrap_or(c.gamma_p * self.scene.field_gauss)
    }

    /// Proton couplings with their azimuths, radians.
    pub fn protons(&self, c: &PhysicalConstants) -> Result<Vec<(HyperfineParams, f64)>> {
        self.scene
            .protons
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let h = match (p.a, p.b, p.r_nm, p.theta_deg) {
                    (Some(a), Some(b), None, None) => HyperfineParams {
                        a,
                        b: b.abs(),
                        a0: p.a0,
                    },
                    (None, None, Some(r), Some(th)) => hyperfine_from_geometry(c, r, th, p.a0)?,
                    _ => {
                        return Err(field_error(
                            &format!("scene.protons[{i}]"),
                            "give either `a` and `b` or `r_nm` and `theta_deg`",
                        ))
                    }
                };
                Ok((h, p.phi_deg.to_radians()))
            })
            .collect()
    }

    pub fn bath(&self, c: &PhysicalConstants) -> Result<BathParams> {
        let b = self
            .bath
            .as_ref()
            .ok_or_else(|| Error::missing_field("bath"))?;
        Ok(BathParams {
            b_rms: b.b_rms,
            omega_n: b.omega_n.unwrap_or_else(|| self.omega_n(c)),
        })
    }

    fn require_reporters(&self) -> Result<()> {
        if self.scene.reporters.is_empty() {
            return Err(field_error("scene.reporters", "this model needs at least one reporter"));
        }
        Ok(())
    }

    fn require_protons(&self) -> Result<()> {
        if self.scene.protons.is_empty() {
            return Err(field_error("scene.protons", "this model needs at least one proton"));
        }
        Ok(())
    }

    /// Noiseless analytic trace of `model` (the config's own when None).
    pub fn model_trace(&self, c: &PhysicalConstants, model: Option<&str>) -> Result<SignalTrace> {
        let model = model.unwrap_or(&self.sequence.model);
        let seq = &self.sequence;
        let dec = self.decoherence();
        let amp = seq.amplitude;
        let t = self.abscissa();
        let wn = self.omega_n(c);
        match model {
            "deer" => {
                self.require_reporters()?;
                let sys = self.spin_system()?;
                SignalTrace::try_from_fn(t, |x| Ok(amp * deer_signal(c, x, &sys, seq.flip_prob, &dec)?))
            }
            "deer_spectrum" => {
                self.require_reporters()?;
                let sys = self.spin_system()?;
                let t_nv = seq.t_nv.ok_or_else(|| Error::missing_field("sequence.t_nv"))?;
                let lw = seq
                    .linewidth
                    .ok_or_else(|| Error::missing_field("sequence.linewidth"))?;
                SignalTrace::try_from_fn(t, |w| {
                    Ok(amp * deer_spectrum(c, w, &sys, t_nv, seq.flip_prob, lw, &dec)?)
                })
            }
            "rabi" => {
                let f = seq
                    .rabi_freq
                    .ok_or_else(|| Error::missing_field("sequence.rabi_freq"))?;
                SignalTrace::from_fn(t, |x| amp * reporter_rabi(x, f, &dec))
            }
            "t1" => SignalTrace::from_fn(t, |x| amp * reporter_t1(x, &dec)),
            "nv_echo" => SignalTrace::from_fn(t, |x| amp * nv_echo(x, &dec)),
            "eseem" => {
                self.require_protons()?;
                let protons: Vec<(HyperfineParams, f64)> =
                    self.protons(c)?.into_iter().map(|(h, _)| (h, wn)).collect();
                SignalTrace::try_from_fn(t, |x| Ok(amp * eseem_multi(x, &protons)?))
            }
            "bath" => {
                let bath = self.bath(c)?;
                SignalTrace::from_fn(t, |x| amp * bath_echo(c, x, &bath, &dec))
            }
            "combined" => {
                let bath = self.bath(c)?;
                let protons: Vec<(HyperfineParams, f64)> =
                    self.protons(c)?.into_iter().map(|(h, _)| (h, wn)).collect();
                SignalTrace::from_fn(t, |x| amp * reporter_echo_combined(c, x, &protons, &bath, &dec))
            }
            "custom" => Err(field_error(
                "sequence.model",
                "a custom pulse list has no analytic model; run it through the oracle",
            )),
            other => Err(field_error("sequence.model", format!("unknown model `{other}`"))),
        }
    }

    /// Density-matrix trace of the configured experiment, ideal pulses, no decay.
    pub fn oracle_trace(&self, c: &PhysicalConstants) -> Result<SignalTrace> {
        let frame = if self.oracle.frame == "lab" {
            Frame::Lab
        } else {
            Frame::Rotating
        };
        match self.sequence.model.as_str() {
            "deer" => {
                self.require_reporters()?;
                let mut sys = self.oracle_system(c, true, false)?;
                sys.frame = frame;
                let model = if self.oracle.flip_model == "rotation" {
                    FlipModel::Rotation
                } else {
                    FlipModel::Stochastic
                };
                oracle_deer_trace(c, &sys, &self.abscissa(), self.sequence.flip_prob, model)
            }
            "eseem" => {
                self.require_protons()?;
                let mut sys = self.oracle_system(c, false, true)?;
                sys.frame = frame;
                oracle_echo_trace(c, &sys, &self.abscissa(), 0)
            }
            "custom" => {
                let mut sys = self.oracle_system(c, true, true)?;
                sys.frame = frame;
                let seq = self.pulse_sequence()?;
                let initial: Vec<InitialSpin> = sys
                    .spins
                    .iter()
                    .map(|s| {
                        if s.species == Species::Nv {
                            InitialSpin::Up
                        } else {
                            InitialSpin::Mixed
                        }
                    })
                    .collect();
                // a custom sequence is a single shot: one point per grid entry
                let r = run_sequence(c, &sys, &seq, &initial)?;
                SignalTrace::new(self.abscissa(), vec![r.expectation; self.grid.points], Vec::new())
            }
            other => Err(field_error(
                "sequence.model",
                format!("the oracle runs `deer`, `eseem` and `custom` sequences, not `{other}`"),
            )),
        }
    }

    /// Oracle spins: optional NV at the origin, the reporters, then the protons
    /// bound to the first reporter (a bare reporter is added if none is listed).
    pub fn oracle_system(&self, c: &PhysicalConstants, with_nv: bool, with_protons: bool) -> Result<OracleSystem> {
        let field = self.field()?;
        let mut sys = OracleSystem::new(field);
        sys.omega_n = self.scene.omega_n;
        if with_nv {
            sys.add_spin(Species::Nv, Vec3::zeros());
        }
        let first = sys.len();
        for r in &self.scene.reporters {
            sys.add_spin(Species::Electron, vec3(*r));
        }
        let protons = if with_protons { self.protons(c)? } else { Vec::new() };
        if !protons.is_empty() && self.scene.reporters.is_empty() {
            sys.add_spin(Species::Electron, Vec3::new(0.0, 0.0, 1.0));
        }
        sys.dimension()?;
        let proton_start = sys.len() + protons.len();
        if proton_start > crate::oracle::MAX_SPINS {
            return Err(Error::DimensionLimit {
                spins: proton_start,
                max: crate::oracle::MAX_SPINS,
            });
        }
        sys.derive_couplings(c, 0.0)?;
        if !self.oracle.reporter_couplings {
            let electrons = sys.indices_of(Species::Electron);
            for (k, &i) in electrons.iter().enumerate() {
                for &j in &electrons[k + 1..] {
                    sys.clear_coupling(i, j);
                }
            }
        }
        let reporter = first;
        for (k, (h, phi)) in protons.iter().enumerate() {
            let base = sys.spins[reporter].position;
            let p = sys.add_spin(Species::Proton, base + Vec3::new(0.0, 0.3 * (k + 1) as f64, 0.0));
            sys.set_coupling(
                reporter,
                p,
                Coupling::Hyperfine {
                    a: h.a,
                    b: h.b,
                    phi: *phi,
                },
            )?;
        }
        Ok(sys)
    }

    pub fn pulse_sequence(&self) -> Result<PulseSequence> {
        let mut seq = PulseSequence::new();
        for (i, e) in self.sequence.elements.iter().enumerate() {
            let at = |what: &str| format!("sequence.elements[{i}].{what}");
            seq = match e {
                ElementSpec::Delay { duration } => seq.delay(*duration),
                ElementSpec::Pulse {
                    channel,
                    axis,
                    angle,
                    duration,
                } => {
                    let ch: Channel = channel.parse().map_err(|e: Error| field_error(&at("channel"), e.to_string()))?;
                    let ax = match axis.as_str() {
                        "x" => Axis::X,
                        "y" => Axis::Y,
                        "-x" => Axis::MinusX,
                        "-y" => Axis::MinusY,
                        other => return Err(field_error(&at("axis"), format!("unknown axis `{other}`"))),
                    };
                    match duration {
                        Some(d) => seq.finite_pulse(ch, ax, *angle, *d),
                        None => seq.pulse(ch, ax, *angle),
                    }
                }
                ElementSpec::Readout { channel } => {
                    let ch: Channel = channel.parse().map_err(|e: Error| field_error(&at("channel"), e.to_string()))?;
                    seq.readout(Observable::Polarization(ch))
                }
            };
        }
        seq.validate()?;
        Ok(seq)
    }
}
