use reporter_core::inference::{field_cone, localize_reporters, DepthSpec, Grid2D, MultiAngleDataset, ReporterConfig};
use reporter_core::io::{synthesize_trace, NoiseModel};
use reporter_core::physics::default_nv_axis;
use reporter_core::signal::linspace;
use reporter_core::{DecoherenceParams, FieldSetting, PhysicalConstants, SpinSystem, Vec3};

fn rot_z(v: &Vec3) -> Vec3 {
    Vec3::new(-v.y, v.x, v.z)
}

fn noisy(c: &PhysicalConstants, site: Vec3, fields: &[FieldSetting], seed: u64) -> MultiAngleDataset {
    let scene = SpinSystem::new(fields[0]).with_reporters([site]);
    let clean = MultiAngleDataset::simulate(c, &scene, fields, &linspace(0.0, 4.0, 60), 1.0, &DecoherenceParams::default()).unwrap();
    let entries = clean
        .entries
        .iter()
        .enumerate()
        .map(|(i, (f, t))| (*f, synthesize_trace(t, &NoiseModel::default(), seed + i as u64).unwrap()))
        .collect();
    MultiAngleDataset::new(entries).unwrap()
}

// Rotating the reporter and every field direction by 90° about the surface
// normal must rotate the recovered map with them.
#[test]
fn map_rotates_with_scene() {
    let c = PhysicalConstants::default();
    let fields = field_cone(300.0, &default_nv_axis(), 30.0, 5).unwrap();
    let turned: Vec<_> = fields
        .iter()
        .map(|f| FieldSetting::new(f.magnitude(), rot_z(&f.direction())).unwrap())
        .collect();
    let site = Vec3::new(2.0, -1.0, 4.0);

    let mut cfg = ReporterConfig::new(1, Grid2D::surface(4.0, 0.5).unwrap());
    cfg.depth = DepthSpec::Fixed(4.0);
    let step = cfg.grid.x.step();

    let a = localize_reporters(&c, &noisy(&c, site, &fields, 40), &cfg).unwrap();
    let b = localize_reporters(&c, &noisy(&c, rot_z(&site), &turned, 40), &cfg).unwrap();
    let (ax, ay) = a.maps[0].argmax_position();
    let (bx, by) = b.maps[0].argmax_position();
    let expected = rot_z(&Vec3::new(ax, ay, 0.0));
    assert!((bx - expected.x).abs() <= step + 1e-9, "{bx} vs {}", expected.x);
    assert!((by - expected.y).abs() <= step + 1e-9, "{by} vs {}", expected.y);
    assert!((a.maps[0].total() - 1.0).abs() < 1e-9);
    assert!((b.maps[0].total() - 1.0).abs() < 1e-9);
}

#[test]
fn single_reporter_recovered_within_two_cells() {
    let c = PhysicalConstants::default();
    let fields = field_cone(300.0, &default_nv_axis(), 30.0, 7).unwrap();
    let site = Vec3::new(2.5, -1.5, 4.0);
    let cfg = ReporterConfig::new(1, Grid2D::surface(5.0, 0.5).unwrap());
    let out = localize_reporters(&c, &noisy(&c, site, &fields, 3), &cfg).unwrap();
    assert!(out.is_complete());
    let (x, y) = out.maps[0].argmax_position();
    assert!((x - site.x).abs() <= 1.0 + 1e-9 && (y - site.y).abs() <= 1.0 + 1e-9, "({x}, {y})");
    assert!((out.fit.depth - 4.0).abs() < 0.5, "depth {}", out.fit.depth);
}
