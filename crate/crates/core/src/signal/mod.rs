//! Closed-form signals for the NV echo, DEER, reporter Rabi / T1 and reporter
//! echo sequences.
//!
//! All signals use the population convention scaled to [−1, +1]. For echo
//! sequences that is 2V − 1 where V is the probability of returning to the
//! initial state, i.e. the echo amplitude.

mod models;

pub use models::*;

use crate::error::{Error, Result};

/// Abscissa / signal / sigma series exchanged between simulation, noise and fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    /// Times in μs, or field in G for scans.
    pub abscissa: Vec<f64>,
    pub signal: Vec<f64>,
    /// Per-point standard deviation; empty for noiseless model traces.
    pub sigma: Vec<f64>,
}

impl SignalTrace {
    pub fn new(abscissa: Vec<f64>, signal: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let trace = Self {
            abscissa,
            signal,
            sigma,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Evaluates `f` on every abscissa point; sigma left empty.
    pub fn from_fn(abscissa: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let signal = abscissa.iter().map(|&t| f(t)).collect();
        Self::new(abscissa, signal, Vec::new())
    }

    /// Like [`SignalTrace::from_fn`] for fallible models.
    pub fn try_from_fn(abscissa: Vec<f64>, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let signal = abscissa.iter().map(|&t| f(t)).collect::<Result<_>>()?;
        Self::new(abscissa, signal, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    pub fn has_sigma(&self) -> bool {
        !self.sigma.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.abscissa.len();
        if self.signal.len() != n || (!self.sigma.is_empty() && self.sigma.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "trace columns differ in length: {} abscissa, {} signal, {} sigma",
                n,
                self.signal.len(),
                self.sigma.len()
            )));
        }
        if let Some(i) = self.abscissa.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "abscissa not strictly increasing at index {}",
                i + 1
            )));
        }
        for (i, &y) in self.signal.iter().enumerate() {
            let slack = self.sigma.get(i).map_or(0.0, |s| 5.0 * s) + 1e-9;
            if !y.is_finite() || y.abs() > 1.0 + slack {
                return Err(Error::InvalidArgument(format!(
                    "signal value {y} at index {i} is outside [-1, 1] beyond 5 sigma"
                )));
            }
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Phenomenological decay constants, μs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceParams {
    pub t2_nv: f64,
    /// Reporter echo decay.
    pub t2_s: f64,
    pub t1_s: f64,
    pub rabi_decay: f64,
    pub stretch_exponent: f64,
}

impl Default for DecoherenceParams {
    fn default() -> Self {
        Self {
            t2_nv: 5.0,
            t2_s: 2.0,
            t1_s: 29.4,
            rabi_decay: 1.0,
            stretch_exponent: 1.0,
        }
    }
}

impl DecoherenceParams {
    /// No decay at all; used when comparing against the oracle.
    pub fn none() -> Self {
        Self {
            t2_nv: f64::INFINITY,
            t2_s: f64::INFINITY,
            t1_s: f64::INFINITY,
            rabi_decay: f64::INFINITY,
            stretch_exponent: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.t2_nv, self.t2_s, self.t1_s, self.rabi_decay];
        if all.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument(
                "decay times must be positive".into(),
            ));
        }
        if !(1.0..=3.0).contains(&self.stretch_exponent) {
            return Err(Error::InvalidArgument(format!(
                "stretch exponent {} outside [1, 3]",
                self.stretch_exponent
            )));
        }
        Ok(())
    }
}

/// Semiclassical proton bath seen by a reporter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    /// rms bath field at the reporter, G.
    pub b_rms: f64,
    /// Bath precession frequency, rad/μs.
    pub omega_n: f64,
}
