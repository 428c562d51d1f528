use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lm::{covariance, minimize_multistart, Bounds, LeastSquares, LmConfig};
use super::models::TraceModel;
use crate::error::{Error, Result};
use crate::physics::PhysicalConstants;
use crate::signal::SignalTrace;

/// Weighted least-squares fit of one [`TraceModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub model: TraceModel,
    /// Starting values; free parameters not listed use the model default.
    pub init: BTreeMap<String, f64>,
    /// Overrides for the model's default bounds.
    pub bounds: BTreeMap<String, (f64, f64)>,
    /// Parameters held at a value.
    pub fixed: BTreeMap<String, f64>,
    /// Total starts, the first at `init`.
    pub starts: usize,
    /// Relative jitter of the additional starts.
    pub jitter: f64,
    pub seed: u64,
    pub lm: LmConfig,
}

impl FitSpec {
    pub fn new(model: TraceModel) -> Self {
        Self {
            model,
            init: BTreeMap::new(),
            bounds: BTreeMap::new(),
            fixed: BTreeMap::new(),
            starts: 8,
            jitter: 0.3,
            seed: 0,
            lm: LmConfig::default(),
        }
    }

    pub fn init(mut self, name: &str, value: f64) -> Self {
        self.init.insert(name.into(), value);
        self
    }

    pub fn fix(mut self, name: &str, value: f64) -> Self {
        self.fixed.insert(name.into(), value);
        self
    }

    pub fn bound(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.bounds.insert(name.into(), (lo, hi));
        self
    }

    pub fn starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check_names(&self) -> Result<()> {
        let names = self.model.parameter_names();
        for key in self.init.keys().chain(self.bounds.keys()).chain(self.fixed.keys()) {
            if !names.contains(key) {
                return Err(Error::InvalidArgument(format!(
                    "model {} has no parameter '{key}'",
                    self.model
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    /// All parameters, free and fixed.
    pub parameters: BTreeMap<String, f64>,
    /// Names of the fitted parameters, in covariance order.
    pub free: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
    /// Covariance came from a pseudo-inverse.
    pub singular: bool,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }

    /// 1σ uncertainty of a free parameter.
    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        let i = self.free.iter().position(|n| n == name)?;
        Some(self.covariance[i][i].max(0.0).sqrt())
    }

    /// 2×2 covariance block of two free parameters.
    pub fn covariance_of(&self, x: &str, y: &str) -> Option<[[f64; 2]; 2]> {
        let i = self.free.iter().position(|n| n == x)?;
        let j = self.free.iter().position(|n| n == y)?;
        let c = &self.covariance;
        Some([[c[i][i], c[i][j]], [c[j][i], c[j][j]]])
    }

    /// Parameters in the model's declared order.
    pub fn ordered(&self, model: TraceModel) -> Option<Vec<f64>> {
        model
            .parameter_names()
            .iter()
            .map(|n| self.value(n))
            .collect()
    }
}

struct TraceProblem<'a> {
    c: &'a PhysicalConstants,
    model: TraceModel,
    data: &'a SignalTrace,
    weights: Vec<f64>,
    /// Full parameter vector with fixed entries filled in.
    template: Vec<f64>,
    free: Vec<usize>,
}

impl TraceProblem<'_> {
    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.template.clone();
        for (k, &i) in self.free.iter().enumerate() {
            p[i] = x[k];
        }
        p
    }
}

impl LeastSquares for TraceProblem<'_> {
    fn residual_count(&self) -> usize {
        self.data.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let p = self.full(x);
        for (i, o) in out.iter_mut().enumerate() {
            let t = self.data.abscissa[i];
            *o = (self.data.signal[i] - self.model.evaluate(self.c, t, &p)) * self.weights[i];
        }
    }
}

fn weights(data: &SignalTrace) -> Result<Vec<f64>> {
    if !data.has_sigma() {
        // noiseless traces are fitted with unit sigmas
        return Ok(vec![1.0; data.len()]);
    }
    data.sigma
        .iter()
        .map(|&s| {
            if s > 0.0 {
                Ok(1.0 / s)
            } else {
                Err(Error::InvalidArgument(format!("sigma {s} must be positive")))
            }
        })
        .collect()
}

/// Fits `spec.model` to `data` by bounded Levenberg–Marquardt from a jittered
/// set of starts; the covariance is (JᵀWJ)⁻¹ at the best optimum.
pub fn fit_trace(c: &PhysicalConstants, spec: &FitSpec, data: &SignalTrace) -> Result<FitResult> {
    spec.check_names()?;
    data.validate()?;
    let names = spec.model.parameter_names();
    let mut template = Vec::with_capacity(names.len());
    let mut free = Vec::new();
    let (mut lower, mut upper) = (Vec::new(), Vec::new());
    for (i, name) in names.iter().enumerate() {
        if let Some(&v) = spec.fixed.get(name) {
            template.push(v);
            continue;
        }
        let (lo, hi) = spec
            .bounds
            .get(name)
            .copied()
            .unwrap_or_else(|| TraceModel::default_bounds(name));
        let init = spec
            .init
            .get(name)
            .copied()
            .unwrap_or_else(|| TraceModel::default_init(name).clamp(lo, hi));
        if !(lo <= init && init <= hi) {
            return Err(Error::InvalidArgument(format!(
                "initial {name} = {init} outside [{lo}, {hi}]"
            )));
        }
        template.push(init);
        free.push(i);
        lower.push(lo);
        upper.push(hi);
    }
    let n_free = free.len();
    if data.len() <= n_free {
        return Err(Error::ZeroDof {
            points: data.len(),
            params: n_free,
        });
    }
    let bounds = Bounds::new(lower, upper)?;
    let x0: Vec<f64> = free.iter().map(|&i| template[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut starts = vec![x0.clone()];
    for _ in 1..spec.starts.max(1) {
        let mut s: Vec<f64> = x0
            .iter()
            .map(|v| v * (1.0 + spec.jitter * rng.gen_range(-1.0..1.0)))
            .collect();
        bounds.clamp(&mut s);
        starts.push(s);
    }
    let problem = TraceProblem {
        c,
        model: spec.model,
        data,
        weights: weights(data)?,
        template,
        free: free.clone(),
    };
    let best = minimize_multistart(&problem, &starts, &bounds, &spec.lm)?;
    let (cov, singular) = covariance(&best.normal);
    let full = problem.full(&best.x);
    let dof = data.len() - n_free;
    Ok(FitResult {
        model: spec.model.to_string(),
        parameters: names.iter().cloned().zip(full).collect(),
        free: free.iter().map(|&i| names[i].clone()).collect(),
        covariance: rows(&cov),
        chi2: best.chi2,
        reduced_chi2: best.chi2 / dof as f64,
        dof,
        singular,
    })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Σ((y − m)/σ)² / (N − n_params).
pub fn reduced_chi2(data: &SignalTrace, model: &[f64], n_params: usize) -> Result<f64> {
    if model.len() != data.len() {
        return Err(Error::InvalidArgument(format!(
            "model has {} points, data {}",
            model.len(),
            data.len()
        )));
    }
    if !data.has_sigma() || data.sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument(
            "reduced chi-squared needs positive sigmas".into(),
        ));
    }
    if data.len() <= n_params {
        return Err(Error::ZeroDof {
            points: data.len(),
            params: n_params,
        });
    }
    let chi2: f64 = data
        .signal
        .iter()
        .zip(model)
        .zip(&data.sigma)
        .map(|((y, m), s)| ((y - m) / s).powi(2))
        .sum();
    Ok(chi2 / (data.len() - n_params) as f64)
}

/// Larmor-frequency measurement at one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LarmorPoint {
    /// G
    pub field: f64,
    /// rad/μs
    pub omega_n: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GyromagneticFit {
    /// rad/(μs·G)
    pub slope: f64,
    pub sigma: f64,
    /// None without degrees of freedom.
    pub reduced_chi2: Option<f64>,
    pub dof: usize,
    /// Fewer than two points: the slope rests on a single measurement.
    pub low_dof: bool,
}

/// Weighted straight line through the origin, ωn = γ·B.
pub fn fit_gyromagnetic(points: &[LarmorPoint]) -> Result<GyromagneticFit> {
    if points.iter().any(|p| !(p.sigma > 0.0)) {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    let sxx: f64 = points.iter().map(|p| (p.field / p.sigma).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument(
            "degenerate abscissa: no nonzero field".into(),
        ));
    }
    let sxy: f64 = points
        .iter()
        .map(|p| p.field * p.omega_n / (p.sigma * p.sigma))
        .sum();
    let slope = sxy / sxx;
    let dof = points.len() - 1;
    let reduced_chi2 = (dof > 0).then(|| {
        points
            .iter()
            .map(|p| ((p.omega_n - slope * p.field) / p.sigma).powi(2))
            .sum::<f64>()
            / dof as f64
    });
    Ok(GyromagneticFit {
        slope,
        sigma: sxx.recip().sqrt(),
        reduced_chi2,
        dof,
        low_dof: points.len() < 2,
    })
}
