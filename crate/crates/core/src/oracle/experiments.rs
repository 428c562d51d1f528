use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::engine::OracleRunner;
use super::sequence::{Axis, Channel, InitialSpin, Observable, PulseSequence};
use super::{Coupling, OracleSystem, Species};
use crate::error::{Error, Result};
use crate::physics::{FieldSetting, PhysicalConstants, Vec3};
use crate::signal::SignalTrace;

/// How an imperfect reporter π pulse is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlipModel {
    /// Coherent rotation by arccos(1 − 2p) about x.
    Rotation,
    /// π applied with probability p, identity otherwise.
    #[default]
    Stochastic,
}

fn deer_sequence(t_nv: f64, flip_prob: f64, model: FlipModel) -> PulseSequence {
    let seq = PulseSequence::new()
        .pulse(Channel::NV, Axis::X, FRAC_PI_2)
        .delay(0.5 * t_nv)
        .pulse(Channel::NV, Axis::X, PI);
    let seq = match model {
        FlipModel::Rotation => {
            seq.pulse(Channel::REPORTER, Axis::X, (1.0 - 2.0 * flip_prob).acos())
        }
        FlipModel::Stochastic => seq.stochastic_flip(Channel::REPORTER, flip_prob),
    };
    seq.delay(0.5 * t_nv)
        .pulse(Channel::NV, Axis::X, FRAC_PI_2)
        .readout(Observable::Polarization(Channel::NV))
}

/// Executes the DEER sequence at every `t_nv` with thermal reporters.
pub fn oracle_deer_trace(
    c: &PhysicalConstants,
    system: &OracleSystem,
    grid: &[f64],
    flip_prob: f64,
    model: FlipModel,
) -> Result<SignalTrace> {
    crate::signal::check_probability(flip_prob)?;
    if system.indices_of(Species::Nv).len() != 1 || system.indices_of(Species::Electron).is_empty() {
        return Err(Error::InvalidArgument(
            "DEER needs exactly one NV and at least one reporter".into(),
        ));
    }
    let runner = OracleRunner::new(c, system)?;
    let initial = runner.thermal_initial();
    let signal = grid
        .par_iter()
        .map(|&t| {
            runner
                .run(&deer_sequence(t, flip_prob, model), &initial)
                .map(|r| r.expectation)
        })
        .collect::<Result<Vec<_>>>()?;
    SignalTrace::new(grid.to_vec(), signal, Vec::new())
}

/// Hahn echo on one reporter (polarized up) versus full echo time.
pub fn oracle_echo_trace(
    c: &PhysicalConstants,
    system: &OracleSystem,
    grid: &[f64],
    reporter: usize,
) -> Result<SignalTrace> {
    if system.spins.get(reporter).map(|s| s.species) != Some(Species::Electron) {
        return Err(Error::InvalidArgument(format!(
            "spin {reporter} is not a reporter"
        )));
    }
    let runner = OracleRunner::new(c, system)?;
    let mut initial = runner.thermal_initial();
    initial[reporter] = InitialSpin::Up;
    let channel = Channel::Spin(reporter);
    let signal = grid
        .par_iter()
        .map(|&t| {
            runner
                .run(&PulseSequence::hahn_echo(channel, t), &initial)
                .map(|r| r.expectation)
        })
        .collect::<Result<Vec<_>>>()?;
    SignalTrace::new(grid.to_vec(), signal, Vec::new())
}

/// Ensemble of a reporter with several weakly coupled, randomly placed protons.
#[derive(Debug, Clone, PartialEq)]
pub struct BathLimitConfig {
    pub n_protons: usize,
    /// √(Σ b_i²) each configuration is scaled to, rad/μs.
    pub coupling_scale: f64,
    pub omega_n: f64,
    pub grid: Vec<f64>,
    pub configurations: usize,
    pub seed: u64,
}

/// Echo trace averaged over random proton configurations.
///
/// Positions are drawn on the upper hemisphere at 0.4–0.8 nm; the point-dipole
/// couplings of each draw are rescaled together so that √(Σ b_i²) equals
/// `coupling_scale`, which is γe·b_rms in the semiclassical bath model.
pub fn oracle_bath_limit(c: &PhysicalConstants, cfg: &BathLimitConfig) -> Result<SignalTrace> {
    const MAX_BATH_PROTONS: usize = 10;
    if cfg.n_protons > MAX_BATH_PROTONS {
        return Err(Error::DimensionLimit {
            spins: cfg.n_protons + 1,
            max: MAX_BATH_PROTONS + 1,
        });
    }
    if cfg.configurations == 0 {
        return Err(Error::InvalidArgument("need at least one configuration".into()));
    }
    let field = FieldSetting::new(cfg.omega_n / c.gamma_p, Vec3::z())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sum = vec![0.0; cfg.grid.len()];
    for _ in 0..cfg.configurations {
        let mut sys = OracleSystem::new(field);
        sys.omega_n = Some(cfg.omega_n);
        let e = sys.add_spin(Species::Electron, Vec3::zeros());
        let mut raw = Vec::with_capacity(cfg.n_protons);
        for _ in 0..cfg.n_protons {
            let cos: f64 = rng.gen_range(0.0..1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let r: f64 = rng.gen_range(0.4..0.8);
            let sin = (1.0 - cos * cos).sqrt();
            let k = c.k_ep() / (r * r * r);
            raw.push((k * (1.0 - 3.0 * cos * cos), 3.0 * k * cos * sin, phi));
        }
        let norm = raw.iter().map(|(_, b, _)| b * b).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { cfg.coupling_scale / norm } else { 0.0 };
        for (k, (a, b, phi)) in raw.into_iter().enumerate() {
            let p = sys.add_spin(Species::Proton, Vec3::new(1.0 + k as f64, 0.0, 0.0));
            sys.set_coupling(
                e,
                p,
                Coupling::Hyperfine {
                    a: a * scale,
                    b: b * scale,
                    phi,
                },
            )?;
        }
        let trace = oracle_echo_trace(c, &sys, &cfg.grid, e)?;
        for (acc, v) in sum.iter_mut().zip(&trace.signal) {
            *acc += v;
        }
    }
    let n = cfg.configurations as f64;
    SignalTrace::new(
        cfg.grid.clone(),
        sum.into_iter().map(|s| s / n).collect(),
        Vec::new(),
    )
}
