use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalTrace;

/// Photon shot noise of an averaged optical readout.
///
/// σ = 1/(contrast·√(repetitions·photons_per_readout)) per point. The
/// contrast and photon yield defaults are typical NV calibration values, not
/// measured ones; with 5×10⁶ repetitions they give σ ≈ 0.105.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub repetitions: f64,
    pub contrast: f64,
    pub photons_per_readout: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            repetitions: 5e6,
            contrast: 0.03,
            photons_per_readout: 0.02,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.repetitions > 0.0
            && self.photons_per_readout > 0.0
            && self.contrast > 0.0
            && self.contrast <= 1.0;
        if !ok {
            return Err(Error::Schema {
                message: "noise: repetitions and photons_per_readout must be positive, contrast in (0, 1]".into(),
                line: None,
                field: Some("noise".into()),
            });
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        1.0 / (self.contrast * (self.repetitions * self.photons_per_readout).sqrt())
    }
}

/// Adds independent Gaussian noise of the model's σ to a noiseless trace.
///
/// Deterministic in `seed`: the same inputs give bit-identical output.
pub fn synthesize_trace(model: &SignalTrace, noise: &NoiseModel, seed: u64) -> Result<SignalTrace> {
    noise.validate()?;
    if model.has_sigma() {
        return Err(Error::InvalidArgument(
            "synthesize_trace expects a noiseless model trace".into(),
        ));
    }
    let sigma = noise.sigma();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = model
        .signal
        .iter()
        .map(|&y| {
            let z: f64 = StandardNormal.sample(&mut rng);
            y + sigma * z
        })
        .collect();
    SignalTrace::new(model.abscissa.clone(), signal, vec![sigma; model.len()])
}
