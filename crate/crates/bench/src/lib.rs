//! Shared inputs for the benchmarks under `benches/`.

use reporter_core::inference::{field_cone, MultiAngleDataset};
use reporter_core::io::{synthesize_trace, NoiseModel};
use reporter_core::physics::default_nv_axis;
use reporter_core::signal::linspace;
use reporter_core::{DecoherenceParams, HyperfineParams, PhysicalConstants, SpinSystem, Vec3};

/// One resolved proton at 619 G.
pub fn nv_a() -> (HyperfineParams, f64) {
    let c = PhysicalConstants::default();
    (HyperfineParams::new(66.0, 52.0), c.gamma_p * 619.0)
}

/// Noisy DEER traces of `sites` at `angles` field directions on a 30° cone.
pub fn deer_dataset(sites: &[Vec3], angles: usize, seed: u64) -> MultiAngleDataset {
    let c = PhysicalConstants::default();
    let fields = field_cone(300.0, &default_nv_axis(), 30.0, angles).unwrap();
    let scene = SpinSystem::new(fields[0]).with_reporters(sites.iter().copied());
    let clean = MultiAngleDataset::simulate(
        &c,
        &scene,
        &fields,
        &linspace(0.0, 4.0, 60),
        1.0,
        &DecoherenceParams::default(),
    )
    .unwrap();
    let entries = clean
        .entries
        .iter()
        .enumerate()
        .map(|(i, (f, t))| (*f, synthesize_trace(t, &NoiseModel::default(), seed + i as u64).unwrap()))
        .collect();
    MultiAngleDataset::new(entries).unwrap()
}
