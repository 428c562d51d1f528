use std::fmt;
use std::str::FromStr;

use super::{OracleSystem, Species};
use crate::error::{Error, Result};

/// Spins a pulse acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Species(Species),
    Spin(usize),
}

impl Channel {
    pub const NV: Channel = Channel::Species(Species::Nv);
    pub const REPORTER: Channel = Channel::Species(Species::Electron);
    pub const PROTON: Channel = Channel::Species(Species::Proton);

    /// Spin indices addressed in `system`; an empty set is an error.
    pub fn resolve(&self, system: &OracleSystem) -> Result<Vec<usize>> {
        let spins = match *self {
            Channel::Species(s) => system.indices_of(s),
            Channel::Spin(i) if i < system.len() => vec![i],
            Channel::Spin(_) => Vec::new(),
        };
        if spins.is_empty() {
            return Err(Error::UnknownChannel(self.to_string()));
        }
        Ok(spins)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Species(Species::Nv) => f.write_str("nv"),
            Channel::Species(Species::Electron) => f.write_str("reporter"),
            Channel::Species(Species::Proton) => f.write_str("proton"),
            Channel::Spin(i) => write!(f, "spin:{i}"),
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nv" => Ok(Channel::NV),
            "reporter" | "electron" => Ok(Channel::REPORTER),
            "proton" => Ok(Channel::PROTON),
            _ => s
                .strip_prefix("spin:")
                .and_then(|i| i.parse().ok())
                .map(Channel::Spin)
                .ok_or_else(|| Error::UnknownChannel(s.to_string())),
        }
    }
}

/// Rotation axis in the transverse plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    X,
    Y,
    MinusX,
    MinusY,
    /// Arbitrary phase φ: axis cosφ·x + sinφ·y.
    Phase(f64),
}

impl Axis {
    pub fn phase(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            Axis::X => 0.0,
            Axis::Y => FRAC_PI_2,
            Axis::MinusX => PI,
            Axis::MinusY => -FRAC_PI_2,
            Axis::Phase(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub channel: Channel,
    pub axis: Axis,
    /// Rotation angle, radians.
    pub angle: f64,
    /// None for an instantaneous pulse, else the duration in μs.
    pub duration: Option<f64>,
}

/// Quantity measured by the final readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// ⟨2Sz⟩ averaged over the channel's spins, in [−1, 1].
    Polarization(Channel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    /// Free evolution, μs.
    Delay(f64),
    Pulse(Pulse),
    /// π about x applied independently to each spin of the channel with the given probability.
    StochasticFlip { channel: Channel, probability: f64 },
    Readout(Observable),
}

/// Initial state of one spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSpin {
    Up,
    Down,
    Mixed,
}

/// Ordered pulses and delays ending in exactly one readout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence {
    pub elements: Vec<Element>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delay(mut self, t: f64) -> Self {
        self.elements.push(Element::Delay(t));
        self
    }

    /// Instantaneous rotation.
    pub fn pulse(mut self, channel: Channel, axis: Axis, angle: f64) -> Self {
        self.elements.push(Element::Pulse(Pulse {
            channel,
            axis,
            angle,
            duration: None,
        }));
        self
    }

    /// Rotation driven over `duration` μs (rotating frame only).
    pub fn finite_pulse(mut self, channel: Channel, axis: Axis, angle: f64, duration: f64) -> Self {
        self.elements.push(Element::Pulse(Pulse {
            channel,
            axis,
            angle,
            duration: Some(duration),
        }));
        self
    }

    pub fn stochastic_flip(mut self, channel: Channel, probability: f64) -> Self {
        self.elements.push(Element::StochasticFlip {
            channel,
            probability,
        });
        self
    }

    pub fn readout(mut self, observable: Observable) -> Self {
        self.elements.push(Element::Readout(observable));
        self
    }

    /// π/2 − t/2 − π − t/2 − π/2 on `channel`, read out on the same channel.
    pub fn hahn_echo(channel: Channel, total: f64) -> Self {
        use std::f64::consts::{FRAC_PI_2, PI};
        Self::new()
            .pulse(channel, Axis::X, FRAC_PI_2)
            .delay(0.5 * total)
            .pulse(channel, Axis::X, PI)
            .delay(0.5 * total)
            .pulse(channel, Axis::X, FRAC_PI_2)
            .readout(Observable::Polarization(channel))
    }

    pub fn readout_observable(&self) -> Option<Observable> {
        match self.elements.last() {
            Some(Element::Readout(o)) => Some(*o),
            _ => None,
        }
    }

    /// Exactly one readout, last; durations, angles and probabilities sane.
    pub fn validate(&self) -> Result<()> {
        let readouts = self
            .elements
            .iter()
            .filter(|e| matches!(e, Element::Readout(_)))
            .count();
        if readouts != 1 || self.readout_observable().is_none() {
            return Err(Error::InvalidArgument(
                "a pulse sequence needs exactly one readout, at the end".into(),
            ));
        }
        for e in &self.elements {
            match *e {
                Element::Delay(t) if !(t >= 0.0) || !t.is_finite() => {
                    return Err(Error::InvalidArgument(format!("negative delay {t}")))
                }
                Element::Pulse(p) => {
                    if !p.angle.is_finite() {
                        return Err(Error::InvalidArgument("non-finite pulse angle".into()));
                    }
                    if let Some(d) = p.duration {
                        if !(d >= 0.0) || !d.is_finite() {
                            return Err(Error::InvalidArgument(format!(
                                "negative pulse duration {d}"
                            )));
                        }
                    }
                }
                Element::StochasticFlip { probability, .. }
                    if !(0.0..=1.0).contains(&probability) =>
                {
                    return Err(Error::InvalidArgument(format!(
                        "flip probability {probability} outside [0, 1]"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
