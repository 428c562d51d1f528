use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::map::{Grid2D, GridAxis, ProbabilityMap};
use crate::error::{Error, Result};
use crate::physics::hyperfine::invert_dipolar;
use crate::physics::{A0Range, HyperfineParams, PhysicalConstants, ProtonPosition, SignHypothesis};

#[derive(Debug, Clone, PartialEq)]
pub struct ProtonMapConfig {
    pub samples: usize,
    pub seed: u64,
    /// Axes r·sinθ and r·cosθ, nm.
    pub grid: Grid2D,
    /// Central credible level of the reported intervals.
    pub level: f64,
}

impl Default for ProtonMapConfig {
    fn default() -> Self {
        Self {
            samples: 20_000,
            seed: 0,
            grid: Grid2D::new(
                GridAxis::new("r_sin_theta_nm", 0.0, 0.5, 101).expect("static axis"),
                GridAxis::new("r_cos_theta_nm", 0.0, 0.5, 101).expect("static axis"),
            ),
            level: 0.6827,
        }
    }
}

/// Central interval with its median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lo: f64,
    pub median: f64,
    pub hi: f64,
}

impl CredibleInterval {
    fn from_samples(mut v: Vec<f64>, level: f64) -> Self {
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let idx = (p * (v.len() - 1) as f64).round() as usize;
            v[idx.min(v.len() - 1)]
        };
        let tail = 0.5 * (1.0 - level);
        Self {
            lo: q(tail),
            median: q(0.5),
            hi: q(1.0 - tail),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlaps(&self, lo: f64, hi: f64) -> bool {
        self.lo <= hi && lo <= self.hi
    }
}

/// Localization result for one sign hypothesis of a.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtonBranch {
    pub sign: SignHypothesis,
    /// Inversion of the nominal couplings at the a0 midpoint.
    pub point: Option<ProtonPosition>,
    pub map: ProbabilityMap,
    /// nm
    pub r: CredibleInterval,
    pub theta_deg: CredibleInterval,
    /// Samples that inverted and fell on the grid.
    pub accepted: usize,
}

/// Propagates (a, b) uncertainty and the contact-term interval to proton position maps.
///
/// (a, b) are drawn from a Gaussian with covariance `cov` (order a, b), a0
/// uniformly from `a0`; each draw is inverted under both sign hypotheses and
/// histogrammed on the (r·sinθ, r·cosθ) half plane. Branches whose draws all
/// fail to invert are left out; if none survive the call fails.
pub fn localize_protons(
    c: &PhysicalConstants,
    params: &HyperfineParams,
    cov: [[f64; 2]; 2],
    a0: A0Range,
    cfg: &ProtonMapConfig,
) -> Result<Vec<ProtonBranch>> {
    let (l11, l21, l22) = cholesky2(cov)?;
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<(f64, f64, f64)> = (0..cfg.samples)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let a = params.a + l11 * z1;
            let b = params.b + l21 * z1 + l22 * z2;
            let contact = if a0.hi > a0.lo { rng.gen_range(a0.lo..=a0.hi) } else { a0.lo };
            (a, b.abs(), contact)
        })
        .collect();

    let own = SignHypothesis::of(params.a);
    let order = if own == SignHypothesis::Positive {
        SignHypothesis::BOTH
    } else {
        [SignHypothesis::Negative, SignHypothesis::Positive]
    };
    let mut branches = Vec::new();
    for sign in order {
        let mut weights = vec![0.0; cfg.grid.len()];
        let (mut rs, mut thetas) = (Vec::new(), Vec::new());
        for &(a, b, contact) in &draws {
            let Ok(pos) = invert_dipolar(c, sign.apply(a) - contact, b) else {
                continue;
            };
            let (x, y) = pos.half_plane();
            if let Some(k) = cfg.grid.locate(x, y) {
                weights[k] += 1.0;
                rs.push(pos.r);
                thetas.push(pos.theta_deg);
            }
        }
        if rs.is_empty() {
            continue;
        }
        let label = format!("proton {} branch", sign.label());
        branches.push(ProtonBranch {
            sign,
            point: invert_dipolar(c, sign.apply(params.a) - a0.midpoint(), params.b).ok(),
            map: ProbabilityMap::from_weights(cfg.grid.clone(), weights, &label)?,
            accepted: rs.len(),
            r: CredibleInterval::from_samples(rs, cfg.level),
            theta_deg: CredibleInterval::from_samples(thetas, cfg.level),
        });
    }
    if branches.is_empty() {
        return Err(Error::NoSolution(
            "no sampled coupling inverts to a position on the grid".into(),
        ));
    }
    Ok(branches)
}

fn cholesky2(cov: [[f64; 2]; 2]) -> Result<(f64, f64, f64)> {
    let [[caa, cab], [cba, cbb]] = cov;
    let tol = 1e-12 * (caa.abs() + cbb.abs()).max(1e-300);
    if !(caa >= 0.0 && cbb >= 0.0) || (cab - cba).abs() > tol || !cab.is_finite() {
        return Err(Error::InvalidArgument(
            "covariance must be symmetric with non-negative variances".into(),
        ));
    }
    let l11 = caa.sqrt();
    let l21 = if l11 > 0.0 { cab / l11 } else { 0.0 };
    let rest = cbb - l21 * l21;
    if rest < -tol {
        return Err(Error::InvalidArgument("covariance is not positive semidefinite".into()));
    }
    Ok((l11, l21, rest.max(0.0).sqrt()))
}
