use super::{BathParams, DecoherenceParams};
use crate::error::{Error, Result};
use crate::physics::{
    dipolar_coupling_ee, eseem_frequencies, zeeman_reporter, HyperfineParams, PhysicalConstants,
    SpinSystem,
};

fn stretched(t: f64, tau: f64, p: f64) -> f64 {
    (-(t / tau).powf(p)).exp()
}

/// NV Hahn-echo envelope exp(−(t/T2)^p).
pub fn nv_echo(t_nv: f64, dec: &DecoherenceParams) -> f64 {
    stretched(t_nv, dec.t2_nv, dec.stretch_exponent)
}

/// Secular NV–reporter couplings of a scene, one per reporter, rad/μs.
pub fn deer_couplings(c: &PhysicalConstants, system: &SpinSystem) -> Result<Vec<f64>> {
    system
        .reporter_sites
        .iter()
        .map(|site| dipolar_coupling_ee(c, &system.nv_position, site, &system.field))
        .collect()
}

/// DEER signal for precomputed couplings.
///
/// Each thermal reporter flipped with probability `flip_prob` contributes
/// 1 − p + p·cos(d·t/2).
pub fn deer_from_couplings(t_nv: f64, couplings: &[f64], flip_prob: f64, dec: &DecoherenceParams) -> f64 {
    couplings.iter().fold(nv_echo(t_nv, dec), |acc, &d| {
        acc * (1.0 - flip_prob + flip_prob * (0.5 * d * t_nv).cos())
    })
}

pub fn deer_signal(
    c: &PhysicalConstants,
    t_nv: f64,
    system: &SpinSystem,
    flip_prob: f64,
    dec: &DecoherenceParams,
) -> Result<f64> {
    check_probability(flip_prob)?;
    Ok(deer_from_couplings(t_nv, &deer_couplings(c, system)?, flip_prob, dec))
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "flip probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Damped reporter Rabi oscillation cos(Ω·t)·exp(−t/τ).
pub fn reporter_rabi(t_r: f64, rabi_freq: f64, dec: &DecoherenceParams) -> f64 {
    (rabi_freq * t_r).cos() * (-t_r / dec.rabi_decay).exp()
}

/// Reporter population relaxation exp(−t/T1).
pub fn reporter_t1(t_p: f64, dec: &DecoherenceParams) -> f64 {
    (-t_p / dec.t1_s).exp()
}

/// Two-pulse ESEEM echo amplitude for one proton; `t_s` is the full echo time.
///
/// The return probability is V = 1 − (k/4)(1 − cos ω⁺τ)(1 − cos ω⁻τ) with
/// τ = t_s/2, and the signal is 2V − 1.
pub fn eseem_single(t_s: f64, params: &HyperfineParams, omega_n: f64) -> f64 {
    let f = eseem_frequencies(params, omega_n);
    let tau = 0.5 * t_s;
    let v = 1.0 - 0.25 * f.depth_k * (1.0 - (f.omega_plus * tau).cos()) * (1.0 - (f.omega_minus * tau).cos());
    2.0 * v - 1.0
}

/// Several protons on one reporter: the echo amplitudes multiply.
pub fn eseem_multi(t_s: f64, protons: &[(HyperfineParams, f64)]) -> Result<f64> {
    if protons.is_empty() {
        return Err(Error::InvalidArgument(
            "eseem_multi needs at least one proton".into(),
        ));
    }
    Ok(eseem_product(t_s, protons))
}

fn eseem_product(t_s: f64, protons: &[(HyperfineParams, f64)]) -> f64 {
    protons
        .iter()
        .map(|(p, wn)| eseem_single(t_s, p, *wn))
        .product()
}

/// Reporter echo under a classical field oscillating at ωn with rms amplitude `b_rms`.
///
/// exp(−2(γe·b_rms/ωn)²·sin⁴(ωn·t_s/4)) times the reporter echo decay; the
/// collapses sit at t_s = 2πk/ωn for odd k.
pub fn bath_echo(c: &PhysicalConstants, t_s: f64, bath: &BathParams, dec: &DecoherenceParams) -> f64 {
    bath_modulation(c, t_s, bath) * stretched(t_s, dec.t2_s, dec.stretch_exponent)
}

fn bath_modulation(c: &PhysicalConstants, t_s: f64, bath: &BathParams) -> f64 {
    // a static field is fully refocused
    if bath.b_rms == 0.0 || bath.omega_n == 0.0 {
        return 1.0;
    }
    let x = c.gamma_e * bath.b_rms / bath.omega_n;
    let s = (0.25 * bath.omega_n * t_s).sin();
    (-2.0 * x * x * s.powi(4)).exp()
}

/// Coherent protons, semiclassical bath and echo decay together.
pub fn reporter_echo_combined(
    c: &PhysicalConstants,
    t_s: f64,
    protons: &[(HyperfineParams, f64)],
    bath: &BathParams,
    dec: &DecoherenceParams,
) -> f64 {
    eseem_product(t_s, protons) * bath_echo(c, t_s, bath, dec)
}

/// DEER signal versus reporter drive frequency at fixed `t_nv`.
///
/// A Lorentzian (FWHM `linewidth`) centred on γe·B interpolates between the
/// plain echo off resonance and the full DEER signal on resonance.
pub fn deer_spectrum(
    c: &PhysicalConstants,
    omega_drive: f64,
    system: &SpinSystem,
    t_nv: f64,
    flip_prob: f64,
    linewidth: f64,
    dec: &DecoherenceParams,
) -> Result<f64> {
    if !(linewidth > 0.0) {
        return Err(Error::InvalidArgument("linewidth must be positive".into()));
    }
    let center = zeeman_reporter(c, &system.field);
    let half = 0.5 * linewidth;
    let detuning = omega_drive - center;
    let lorentz = half * half / (detuning * detuning + half * half);
    let echo = nv_echo(t_nv, dec);
    let dip = echo - deer_signal(c, t_nv, system, flip_prob, dec)?;
    Ok(echo - lorentz * dip)
}
