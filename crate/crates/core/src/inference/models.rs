use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::physics::{HyperfineParams, PhysicalConstants};
use crate::signal::{
    bath_echo, deer_from_couplings, eseem_single, nv_echo, reporter_rabi, reporter_t1, BathParams,
    DecoherenceParams, SignalTrace,
};

/// Fittable analytic trace families.
///
/// Every model is `amplitude` times the corresponding signal model; the
/// echo-type models decay with a simple exponential (stretch exponent 1)
/// except `nv_echo`, which fits the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceModel {
    /// amplitude, t1_s
    T1,
    /// amplitude, rabi_freq, rabi_decay
    Rabi,
    /// amplitude, t2_nv, stretch_exponent
    NvEcho,
    /// amplitude, flip_prob, t2_nv, d1..dn
    Deer { reporters: usize },
    /// amplitude, omega_n, t2_s, a1, b1, ..
    Eseem { protons: usize },
    /// amplitude, b_rms, omega_n, t2_s
    Bath,
    /// amplitude, omega_n, b_rms, t2_s, a1, b1, ..
    Combined { protons: usize },
}

impl TraceModel {
    pub fn parameter_names(&self) -> Vec<String> {
        let fixed: &[&str] = match self {
            TraceModel::T1 => &["amplitude", "t1_s"],
            TraceModel::Rabi => &["amplitude", "rabi_freq", "rabi_decay"],
            TraceModel::NvEcho => &["amplitude", "t2_nv", "stretch_exponent"],
            TraceModel::Deer { .. } => &["amplitude", "flip_prob", "t2_nv"],
            TraceModel::Eseem { .. } => &["amplitude", "omega_n", "t2_s"],
            TraceModel::Bath => &["amplitude", "b_rms", "omega_n", "t2_s"],
            TraceModel::Combined { .. } => &["amplitude", "omega_n", "b_rms", "t2_s"],
        };
        let mut names: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
        match *self {
            TraceModel::Deer { reporters } => {
                names.extend((1..=reporters).map(|i| format!("d{i}")));
            }
            TraceModel::Eseem { protons } | TraceModel::Combined { protons } => {
                for i in 1..=protons {
                    names.push(format!("a{i}"));
                    names.push(format!("b{i}"));
                }
            }
            _ => {}
        }
        names
    }

    /// Default (lower, upper) bounds for a parameter of this model.
    pub fn default_bounds(name: &str) -> (f64, f64) {
        match name {
            "amplitude" => (0.0, 2.0),
            "flip_prob" => (0.0, 1.0),
            "stretch_exponent" => (1.0, 3.0),
            "t1_s" | "t2_nv" | "t2_s" | "rabi_decay" => (1e-3, 1e5),
            "rabi_freq" | "omega_n" => (0.0, 200.0),
            "b_rms" => (0.0, 100.0),
            n if n.starts_with('d') => (-1000.0, 1000.0),
            // the sign of a is not observable in the echo
            n if n.starts_with('a') || n.starts_with('b') => (0.0, 1000.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Starting point used when the caller supplies none.
    pub fn default_init(name: &str) -> f64 {
        match name {
            "amplitude" | "flip_prob" | "stretch_exponent" => 1.0,
            "t1_s" => 20.0,
            "t2_nv" => 5.0,
            "t2_s" => 2.0,
            "rabi_decay" => 1.0,
            "rabi_freq" => 10.0,
            "omega_n" => 10.0,
            "b_rms" => 0.1,
            n if n.starts_with('d') => 1.0,
            n if n.starts_with('a') || n.starts_with('b') => 30.0,
            _ => 0.0,
        }
    }

    /// Model value at abscissa `t` for parameters in [`Self::parameter_names`] order.
    pub fn evaluate(&self, c: &PhysicalConstants, t: f64, p: &[f64]) -> f64 {
        let mut dec = DecoherenceParams::none();
        let body = match *self {
            TraceModel::T1 => {
                dec.t1_s = p[1];
                reporter_t1(t, &dec)
            }
            TraceModel::Rabi => {
                dec.rabi_decay = p[2];
                reporter_rabi(t, p[1], &dec)
            }
            TraceModel::NvEcho => {
                dec.t2_nv = p[1];
                dec.stretch_exponent = p[2];
                nv_echo(t, &dec)
            }
            TraceModel::Deer { .. } => {
                dec.t2_nv = p[2];
                deer_from_couplings(t, &p[3..], p[1], &dec)
            }
            TraceModel::Eseem { .. } => {
                let (wn, t2) = (p[1], p[2]);
                hyperfine_pairs(&p[3..])
                    .map(|h| eseem_single(t, &h, wn))
                    .product::<f64>()
                    * (-t / t2).exp()
            }
            TraceModel::Bath => {
                dec.t2_s = p[3];
                let bath = BathParams {
                    b_rms: p[1],
                    omega_n: p[2],
                };
                bath_echo(c, t, &bath, &dec)
            }
            TraceModel::Combined { .. } => {
                let (wn, b_rms) = (p[1], p[2]);
                dec.t2_s = p[3];
                let bath = BathParams {
                    b_rms,
                    omega_n: wn,
                };
                hyperfine_pairs(&p[4..])
                    .map(|h| eseem_single(t, &h, wn))
                    .product::<f64>()
                    * bath_echo(c, t, &bath, &dec)
            }
        };
        p[0] * body
    }

    /// Noiseless trace on `abscissa`.
    pub fn trace(&self, c: &PhysicalConstants, abscissa: Vec<f64>, p: &[f64]) -> Result<SignalTrace> {
        let expected = self.parameter_names().len();
        if p.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "model {self} takes {expected} parameters, got {}",
                p.len()
            )));
        }
        SignalTrace::from_fn(abscissa, |t| self.evaluate(c, t, p))
    }
}

fn hyperfine_pairs(p: &[f64]) -> impl Iterator<Item = HyperfineParams> + '_ {
    p.chunks_exact(2).map(|ab| HyperfineParams::new(ab[0], ab[1]))
}

impl fmt::Display for TraceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceModel::T1 => f.write_str("t1"),
            TraceModel::Rabi => f.write_str("rabi"),
            TraceModel::NvEcho => f.write_str("nv_echo"),
            TraceModel::Deer { reporters } => write!(f, "deer{reporters}"),
            TraceModel::Eseem { protons } => write!(f, "eseem{protons}"),
            TraceModel::Bath => f.write_str("bath"),
            TraceModel::Combined { protons } => write!(f, "combined{protons}"),
        }
    }
}

impl FromStr for TraceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let counted = |prefix: &str| -> Option<usize> {
            let rest = s.strip_prefix(prefix)?;
            if rest.is_empty() {
                return Some(1);
            }
            rest.parse().ok().filter(|n| (1..=8).contains(n))
        };
        Ok(match s {
            "t1" => TraceModel::T1,
            "rabi" => TraceModel::Rabi,
            "nv_echo" => TraceModel::NvEcho,
            "bath" => TraceModel::Bath,
            _ => {
                if let Some(n) = counted("deer") {
                    TraceModel::Deer { reporters: n }
                } else if let Some(n) = counted("eseem") {
                    TraceModel::Eseem { protons: n }
                } else if let Some(n) = counted("combined") {
                    TraceModel::Combined { protons: n }
                } else {
                    return Err(Error::InvalidArgument(format!("unknown model id '{s}'")));
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ["t1", "rabi", "nv_echo", "deer1", "deer3", "eseem1", "eseem2", "bath", "combined2"] {
            assert_eq!(id.parse::<TraceModel>().unwrap().to_string(), id);
        }
        assert_eq!("deer".parse::<TraceModel>().unwrap(), TraceModel::Deer { reporters: 1 });
        assert!("eseem0".parse::<TraceModel>().is_err());
        assert!("gauss".parse::<TraceModel>().is_err());
    }

    #[test]
    fn parameter_layout() {
        assert_eq!(
            TraceModel::Combined { protons: 2 }.parameter_names(),
            ["amplitude", "omega_n", "b_rms", "t2_s", "a1", "b1", "a2", "b2"]
        );
    }

    #[test]
    fn values_agree_with_signal_models() {
        let c = PhysicalConstants::default();
        let v = TraceModel::T1.evaluate(&c, 29.4, &[1.0, 29.4]);
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        let h = HyperfineParams::new(66.0, 52.0);
        let wn = 16.568382664;
        let e = TraceModel::Eseem { protons: 1 }.evaluate(&c, 0.3, &[1.0, wn, f64::INFINITY, 66.0, 52.0]);
        assert!((e - eseem_single(0.3, &h, wn)).abs() < 1e-15);
        let d = TraceModel::Deer { reporters: 2 }.evaluate(&c, 1.0, &[1.0, 1.0, f64::INFINITY, 2.0, 4.0]);
        assert!((d - 1f64.cos() * 2f64.cos()).abs() < 1e-15);
        assert!(TraceModel::Bath.trace(&c, vec![0.0, 1.0], &[1.0]).is_err());
    }
}
