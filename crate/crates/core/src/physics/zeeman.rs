use super::{FieldSetting, PhysicalConstants, Vec3, MIN_SITE_SEPARATION};
use crate::error::{Error, Result};

/// Upper end of the field window the two-level NV formulas are used in, G.
pub const MAX_FIELD_GAUSS: f64 = 1500.0;

pub const DEFAULT_MISALIGNMENT_LIMIT_DEG: f64 = 5.0;

/// NV ms=0 ↔ ms=−1 transition, Δ − γe·B, rad/μs.
///
/// The linear formula only holds for fields along the NV axis; directions more
/// than `limit_deg` off axis are rejected.
pub fn zeeman_nv(
    c: &PhysicalConstants,
    field: &FieldSetting,
    nv_axis: &Vec3,
    limit_deg: f64,
) -> Result<f64> {
    check_window(field)?;
    let angle = field.angle_to_deg(nv_axis);
    if angle > limit_deg {
        return Err(Error::FieldMisaligned {
            angle_deg: angle,
            limit_deg,
        });
    }
    Ok(c.delta_nv - c.gamma_e * field.magnitude())
}

/// Both NV branches (ms=0↔−1, ms=0↔+1), for Zeeman diagrams.
pub fn zeeman_nv_branches(
    c: &PhysicalConstants,
    field: &FieldSetting,
    nv_axis: &Vec3,
    limit_deg: f64,
) -> Result<(f64, f64)> {
    let lower = zeeman_nv(c, field, nv_axis, limit_deg)?;
    Ok((lower, c.delta_nv + c.gamma_e * field.magnitude()))
}

fn check_window(field: &FieldSetting) -> Result<()> {
    if field.magnitude() > MAX_FIELD_GAUSS {
        return Err(Error::FieldOutOfRange(field.magnitude()));
    }
    Ok(())
}

/// Reporter (g = 2, S = 1/2) transition γe·B, rad/μs.
pub fn zeeman_reporter(c: &PhysicalConstants, field: &FieldSetting) -> f64 {
    c.gamma_e * field.magnitude()
}

/// Proton Larmor frequency γp·B, rad/μs.
pub fn larmor_proton(c: &PhysicalConstants, field: &FieldSetting) -> f64 {
    c.gamma_p * field.magnitude()
}

/// Secular electron–electron dipolar coupling k_ee(1 − 3cos²θ)/r³, rad/μs,
/// with θ measured between the separation and the field direction.
pub fn dipolar_coupling_ee(
    c: &PhysicalConstants,
    site_i: &Vec3,
    site_j: &Vec3,
    field: &FieldSetting,
) -> Result<f64> {
    let sep = site_i - site_j;
    let r = sep.norm();
    if r < MIN_SITE_SEPARATION {
        return Err(Error::CoincidentSites {
            distance: r,
            min: MIN_SITE_SEPARATION,
        });
    }
    let cos = sep.dot(&field.direction()) / r;
    Ok(c.k_ee() * (1.0 - 3.0 * cos * cos) / (r * r * r))
}

/// Smallest mean reporter separation compatible with a population lifetime `t1_s`.
///
/// Equates the flip-flop rate k_ee/(g·r³) to 1/T1, so r = (g·k_ee·T1)^(1/3).
pub fn min_separation_from_t1(
    c: &PhysicalConstants,
    t1_s: f64,
    geometry_factor: f64,
) -> Result<f64> {
    if !(t1_s > 0.0) || !(geometry_factor > 0.0) {
        return Err(Error::InvalidArgument(
            "t1_s and geometry_factor must be positive".into(),
        ));
    }
    Ok((geometry_factor * c.k_ee() * t1_s).cbrt())
}

/// Inverse of [`min_separation_from_t1`]: the geometry factor mapping `t1_s` to `r`.
pub fn geometry_factor_for_separation(c: &PhysicalConstants, t1_s: f64, r: f64) -> f64 {
    r.powi(3) / (c.k_ee() * t1_s)
}

#[cfg(test)]
mod tests {
    use super::super::default_nv_axis;
    use super::*;
    use std::f64::consts::PI;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn field(b: f64) -> FieldSetting {
        FieldSetting::along_nv(b).unwrap()
    }

    #[test]
    fn nv_transition() {
        let c = consts();
        let ax = default_nv_axis();
        assert_eq!(zeeman_nv(&c, &field(0.0), &ax, 5.0).unwrap(), 2.0 * PI * 2870.0);
        // Δ − γe·B from the quoted constants
        let f383 = zeeman_nv(&c, &field(383.0), &ax, 5.0).unwrap();
        assert!((f383 - 11_294.653_908_186).abs() < 1e-6);
        let f619 = zeeman_nv(&c, &field(619.0), &ax, 5.0).unwrap();
        assert!((f619 - 7_142.725_057_202).abs() < 1e-6);
    }

    #[test]
    fn nv_transition_rejects_misaligned_and_strong_fields() {
        let c = consts();
        let ax = default_nv_axis();
        let tilted = FieldSetting::tilted(300.0, &ax, 8.0, 0.0).unwrap();
        assert!(matches!(
            zeeman_nv(&c, &tilted, &ax, 5.0),
            Err(Error::FieldMisaligned { .. })
        ));
        let small_tilt = FieldSetting::tilted(300.0, &ax, 3.0, 0.0).unwrap();
        assert!(zeeman_nv(&c, &small_tilt, &ax, 5.0).is_ok());
        assert!(matches!(
            zeeman_nv(&c, &field(1600.0), &ax, 5.0),
            Err(Error::FieldOutOfRange(_))
        ));
    }

    #[test]
    fn upper_branch_mirrors_lower() {
        let c = consts();
        let (lo, hi) = zeeman_nv_branches(&c, &field(200.0), &default_nv_axis(), 5.0).unwrap();
        assert!((lo + hi - 2.0 * c.delta_nv).abs() < 1e-9);
    }

    #[test]
    fn reporter_and_proton_frequencies() {
        let c = consts();
        assert_eq!(zeeman_reporter(&c, &field(0.0)), 0.0);
        assert!((zeeman_reporter(&c, &field(383.0)) - 6_738.087_923_419).abs() < 1e-6);
        let slope = zeeman_reporter(&c, &field(101.0)) - zeeman_reporter(&c, &field(100.0));
        assert!((slope - 2.0 * PI * 2.8).abs() < 1e-9);

        assert_eq!(larmor_proton(&c, &field(0.0)), 0.0);
        assert!((larmor_proton(&c, &field(383.0)) - 10.251_519_483).abs() < 1e-8);
        assert!((larmor_proton(&c, &field(619.0)) - 16.568_382_664).abs() < 1e-8);
    }

    #[test]
    fn dipolar_examples() {
        let c = consts();
        let b = FieldSetting::new(100.0, Vec3::z()).unwrap();
        let origin = Vec3::zeros();
        let perp = dipolar_coupling_ee(&c, &Vec3::new(3.0, 0.0, 0.0), &origin, &b).unwrap();
        assert!((perp - 12.088_939_281_79).abs() < 1e-9);
        let par = dipolar_coupling_ee(&c, &Vec3::new(0.0, 0.0, 3.0), &origin, &b).unwrap();
        assert!((par + 24.177_878_563_58).abs() < 1e-9);

        let magic = (1.0 / 3.0f64.sqrt()).acos();
        for r in [0.5, 2.0, 7.0] {
            let site = Vec3::new(r * magic.sin(), 0.0, r * magic.cos());
            let d = dipolar_coupling_ee(&c, &site, &origin, &b).unwrap();
            assert!(d.abs() < 1e-12);
        }
        assert!(dipolar_coupling_ee(&c, &origin, &Vec3::new(0.01, 0.0, 0.0), &b).is_err());
    }

    #[test]
    fn angular_factor_averages_to_zero() {
        // Gauss–Legendre style check via composite Simpson on cosθ ∈ [−1, 1].
        let n = 2000;
        let h = 2.0 / n as f64;
        let f = |x: f64| 1.0 - 3.0 * x * x;
        let mut s = f(-1.0) + f(1.0);
        for i in 1..n {
            let x = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        let avg = s * h / 3.0 / 2.0;
        assert!(avg.abs() < 1e-10);
    }

    #[test]
    fn min_separation() {
        let c = consts();
        let r = min_separation_from_t1(&c, 29.4, 0.25).unwrap();
        assert!((r - 13.386_892_210).abs() < 1e-6);
        let g = geometry_factor_for_separation(&c, 29.4, 5.0);
        assert!((g - 0.013_025_989_45).abs() < 1e-9);
        assert!((min_separation_from_t1(&c, 29.4, g).unwrap() - 5.0).abs() < 1e-12);
        assert!(min_separation_from_t1(&c, 30.0, 0.25).unwrap() > r);
        assert!(min_separation_from_t1(&c, 0.0, 0.25).is_err());
    }
}
