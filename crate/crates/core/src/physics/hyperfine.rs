//! Hyperfine coupling ↔ proton geometry, and the two-pulse ESEEM frequencies.
//!
//! With the dipolar scale K = k_ep/r³ the couplings are
//! a = a0 + K(1 − 3cos²θ) and b = 3K·cosθ·sinθ. Writing u = cos2θ, v = sin2θ
//! turns these into a − a0 = −K(1 + 3u)/2 and b = 3Kv/2, and u² + v² = 1 gives
//! the quadratic 2K² − (a − a0)K − ((a − a0)² + b²) = 0 with one positive root.

use super::{HyperfineParams, PhysicalConstants, MIN_SITE_SEPARATION};
use crate::error::{Error, Result};

/// θ closer than this to 0° or 90° marks a degenerate inversion, degrees.
const DEGENERATE_ANGLE_DEG: f64 = 1e-3;

/// Hyperfine couplings of a proton at distance `r` (nm) and polar angle
/// `theta_deg` from the field, plus contact term `a0`.
pub fn hyperfine_from_geometry(
    c: &PhysicalConstants,
    r: f64,
    theta_deg: f64,
    a0: f64,
) -> Result<HyperfineParams> {
    if !(r >= MIN_SITE_SEPARATION) {
        return Err(Error::DegenerateRadius(r));
    }
    if !(0.0..=180.0).contains(&theta_deg) {
        return Err(Error::InvalidArgument(format!(
            "theta must lie in [0, 180] deg, got {theta_deg}"
        )));
    }
    let k = c.k_ep() / (r * r * r);
    let (s, cs) = theta_deg.to_radians().sin_cos();
    Ok(HyperfineParams {
        a: a0 + k * (1.0 - 3.0 * cs * cs),
        b: (3.0 * k * cs * s).abs(),
        a0,
    })
}

/// Which sign of the secular coupling a candidate geometry assumes.
///
/// Echo modulation only fixes |a|, so inversion is carried out for both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignHypothesis {
    Positive,
    Negative,
}

impl SignHypothesis {
    pub const BOTH: [SignHypothesis; 2] = [SignHypothesis::Positive, SignHypothesis::Negative];

    pub fn apply(self, a: f64) -> f64 {
        match self {
            SignHypothesis::Positive => a.abs(),
            SignHypothesis::Negative => -a.abs(),
        }
    }

    pub fn of(a: f64) -> Self {
        if a < 0.0 {
            SignHypothesis::Negative
        } else {
            SignHypothesis::Positive
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SignHypothesis::Positive => "positive",
            SignHypothesis::Negative => "negative",
        }
    }
}

/// Proton position relative to its reporter: distance (nm) and polar angle (deg).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtonPosition {
    pub r: f64,
    pub theta_deg: f64,
}

impl ProtonPosition {
    /// In-plane coordinates (r·sinθ, r·cosθ) used for the half-plane maps.
    pub fn half_plane(&self) -> (f64, f64) {
        let (s, c) = self.theta_deg.to_radians().sin_cos();
        (self.r * s, self.r * c)
    }
}

/// Contact-term interval, rad/μs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A0Range {
    pub lo: f64,
    pub hi: f64,
}

impl A0Range {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "a0 range [{lo}, {hi}] is empty"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn exact(a0: f64) -> Self {
        Self { lo: a0, hi: a0 }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `n` evenly spaced values covering the interval (one value if it is a point).
    pub fn samples(&self, n: usize) -> Vec<f64> {
        if self.lo == self.hi || n < 2 {
            return vec![self.midpoint()];
        }
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// One sign hypothesis of [`geometry_from_hyperfine`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryEstimate {
    pub sign: SignHypothesis,
    /// Solution at the a0 midpoint.
    pub point: ProtonPosition,
    /// Solutions swept across the a0 interval.
    pub contour: Vec<ProtonPosition>,
    /// θ sits at a branch endpoint (b → 0).
    pub degenerate: bool,
}

/// Solves a single (a − a0, b) pair for (r, θ) with θ ∈ (0°, 90°].
pub(crate) fn invert_dipolar(c: &PhysicalConstants, a_dip: f64, b: f64) -> Result<ProtonPosition> {
    if !(b > 0.0) || !a_dip.is_finite() || !b.is_finite() {
        return Err(Error::NoSolution(format!(
            "pseudo-secular coupling must be positive and finite, got b = {b}"
        )));
    }
    let k = (a_dip + (9.0 * a_dip * a_dip + 8.0 * b * b).sqrt()) / 4.0;
    if !(k > 0.0) {
        return Err(Error::NoSolution(format!(
            "no positive dipolar scale for a - a0 = {a_dip}, b = {b}"
        )));
    }
    let u = (-2.0 * a_dip - k) / (3.0 * k);
    let v = 2.0 * b / (3.0 * k);
    let theta = 0.5 * v.atan2(u);
    Ok(ProtonPosition {
        r: (c.k_ep() / k).cbrt(),
        theta_deg: theta.to_degrees(),
    })
}

/// Inverts measured couplings to proton geometry for both signs of `a`.
///
/// The contact term is swept over `a0_range` (`contour_samples` points); the
/// returned point estimate uses the interval midpoint. The first entry is the
/// hypothesis matching the sign of `params.a`.
pub fn geometry_from_hyperfine(
    c: &PhysicalConstants,
    params: &HyperfineParams,
    a0_range: A0Range,
    contour_samples: usize,
) -> Result<Vec<GeometryEstimate>> {
    if !(params.b > 0.0) || !(params.a.abs() + params.b > 0.0) {
        return Err(Error::NoSolution(format!(
            "b must be positive, got {}",
            params.b
        )));
    }
    let own = SignHypothesis::of(params.a);
    let order = [
        own,
        match own {
            SignHypothesis::Positive => SignHypothesis::Negative,
            SignHypothesis::Negative => SignHypothesis::Positive,
        },
    ];
    order
        .into_iter()
        .map(|sign| {
            let a = sign.apply(params.a);
            let point = invert_dipolar(c, a - a0_range.midpoint(), params.b)?;
            let contour = a0_range
                .samples(contour_samples)
                .into_iter()
                .map(|a0| invert_dipolar(c, a - a0, params.b))
                .collect::<Result<Vec<_>>>()?;
            let degenerate = point.theta_deg < DEGENERATE_ANGLE_DEG
                || (90.0 - point.theta_deg).abs() < DEGENERATE_ANGLE_DEG;
            Ok(GeometryEstimate {
                sign,
                point,
                contour,
                degenerate,
            })
        })
        .collect()
}

/// ESEEM branch frequencies and depth for one proton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EseemFrequencies {
    /// √((a/2 − ωn)² + b²/4), rad/μs.
    pub omega_plus: f64,
    /// √((a/2 + ωn)² + b²/4), rad/μs.
    pub omega_minus: f64,
    /// Two-pulse modulation depth k = (b·ωn / ω⁺ω⁻)².
    pub depth_k: f64,
    /// 2b·ωn / ω⁺ω⁻, the commonly quoted depth scaling (reported for reference).
    pub depth_scaling: f64,
}

pub fn eseem_frequencies(params: &HyperfineParams, omega_n: f64) -> EseemFrequencies {
    let (a, b) = (params.a, params.b);
    let quarter_b2 = 0.25 * b * b;
    let omega_plus = ((0.5 * a - omega_n).powi(2) + quarter_b2).sqrt();
    let omega_minus = ((0.5 * a + omega_n).powi(2) + quarter_b2).sqrt();
    let prod = omega_plus * omega_minus;
    let ratio = if prod > 0.0 { b * omega_n / prod } else { 0.0 };
    EseemFrequencies {
        omega_plus,
        omega_minus,
        depth_k: ratio * ratio,
        depth_scaling: 2.0 * ratio,
    }
}

/// Recovers (a, b) from measured branch frequencies at Larmor frequency `omega_n`.
///
/// Uses ω⁺² − ω⁻² = −2a·ωn; the contact term is not separable and is left at 0.
pub fn hyperfine_from_eseem(omega_plus: f64, omega_minus: f64, omega_n: f64) -> Result<HyperfineParams> {
    if !(omega_n > 0.0) {
        return Err(Error::InvalidArgument(
            "Larmor frequency must be positive to invert ESEEM frequencies".into(),
        ));
    }
    let a = (omega_minus * omega_minus - omega_plus * omega_plus) / (2.0 * omega_n);
    let quarter_b2 = omega_plus * omega_plus - (0.5 * a - omega_n).powi(2);
    if quarter_b2 < 0.0 {
        return Err(Error::NoSolution(format!(
            "frequencies {omega_plus}, {omega_minus} imply b² < 0 at ωn = {omega_n}"
        )));
    }
    Ok(HyperfineParams {
        a,
        b: 2.0 * quarter_b2.sqrt(),
        a0: 0.0,
    })
}
