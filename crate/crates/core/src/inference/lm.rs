//! Bounded Levenberg–Marquardt on weighted residuals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A residual vector r(x) whose squared norm is χ².
pub trait LeastSquares {
    fn residual_count(&self) -> usize;

    fn residuals(&self, x: &[f64], out: &mut [f64]);

    /// ∂r/∂x, shape (residual_count, x.len()). Central differences unless overridden.
    fn jacobian(&self, x: &[f64], bounds: &Bounds, jac: &mut DMatrix<f64>) {
        numeric_jacobian(self, x, bounds, jac)
    }
}

pub(crate) fn numeric_jacobian<P: LeastSquares + ?Sized>(
    p: &P,
    x: &[f64],
    bounds: &Bounds,
    jac: &mut DMatrix<f64>,
) {
    let m = p.residual_count();
    let mut xp = x.to_vec();
    let mut hi = vec![0.0; m];
    let mut lo = vec![0.0; m];
    for j in 0..x.len() {
        let h = 6e-6 * x[j].abs().max(1e-3);
        let up = (x[j] + h).min(bounds.upper[j]);
        let down = (x[j] - h).max(bounds.lower[j]);
        xp[j] = up;
        p.residuals(&xp, &mut hi);
        xp[j] = down;
        p.residuals(&xp, &mut lo);
        xp[j] = x[j];
        let span = up - down;
        for i in 0..m {
            jac[(i, j)] = if span > 0.0 { (hi[i] - lo[i]) / span } else { 0.0 };
        }
    }
}

/// Box constraints; infinite entries leave a side open.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("inconsistent bounds".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| v >= l && v <= u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Relative χ² decrease below which an accepted step ends the search.
    pub ftol: f64,
    /// Relative step size below which the search ends.
    pub xtol: f64,
    pub lambda_init: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            ftol: 1e-13,
            xtol: 1e-12,
            lambda_init: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub chi2: f64,
    /// JᵀJ at `x`.
    pub normal: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes |r(x)|² inside `bounds` starting from `x0`.
pub fn minimize<P: LeastSquares + ?Sized>(
    problem: &P,
    x0: &[f64],
    bounds: &Bounds,
    cfg: &LmConfig,
) -> LmOutcome {
    let n = x0.len();
    let m = problem.residual_count();
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut r = vec![0.0; m];
    problem.residuals(&x, &mut r);
    let mut chi2 = sum_sq(&r);
    let mut jac = DMatrix::zeros(m, n);
    let mut lambda = cfg.lambda_init;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;

    if !chi2.is_finite() {
        return LmOutcome {
            x,
            chi2,
            normal: DMatrix::zeros(n, n),
            iterations,
            converged,
        };
    }

    while iterations < cfg.max_iterations && n > 0 {
        iterations += 1;
        problem.jacobian(&x, bounds, &mut jac);
        let normal = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        if grad.amax() <= 1e-15 * (1.0 + chi2) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = normal.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * normal[(i, i)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            for i in 0..n {
                trial[i] = x[i] + step[i];
            }
            bounds.clamp(&mut trial);
            problem.residuals(&trial, &mut r_trial);
            let chi2_trial = sum_sq(&r_trial);
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                let moved = trial
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs() / (b.abs() + 1e-9))
                    .fold(0.0, f64::max);
                let drop = chi2 - chi2_trial;
                x.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                chi2 = chi2_trial;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                if drop <= cfg.ftol * chi2.max(1e-300) || moved <= cfg.xtol || chi2 == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        // no descent direction left: a minimum to working precision
        if !accepted {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    if n == 0 {
        converged = true;
    }
    problem.jacobian(&x, bounds, &mut jac);
    LmOutcome {
        x,
        chi2,
        normal: jac.transpose() * &jac,
        iterations,
        converged,
    }
}

/// Runs [`minimize`] from each start and keeps the lowest converged χ².
pub fn minimize_multistart<P: LeastSquares + ?Sized>(
    problem: &P,
    starts: &[Vec<f64>],
    bounds: &Bounds,
    cfg: &LmConfig,
) -> Result<LmOutcome> {
    starts
        .iter()
        .map(|s| minimize(problem, s, bounds, cfg))
        .filter(|o| o.converged && o.chi2.is_finite())
        .min_by(|a, b| a.chi2.total_cmp(&b.chi2))
        .ok_or(Error::NonConvergence {
            restarts: starts.len(),
        })
}

/// Covariance (JᵀJ)⁻¹ via eigendecomposition; near-null directions are
/// dropped (pseudo-inverse) and reported through the flag.
pub fn covariance(normal: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = normal.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), false);
    }
    let sym = 0.5 * (normal + normal.transpose());
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let cutoff = top * 1e-13;
    let mut singular = !(top > 0.0);
    let mut inv = DVector::zeros(n);
    for i in 0..n {
        let l = eig.eigenvalues[i];
        if l > cutoff && l > 0.0 {
            inv[i] = 1.0 / l;
        } else {
            singular = true;
        }
    }
    let v = &eig.eigenvectors;
    let cov = v * DMatrix::from_diagonal(&inv) * v.transpose();
    (0.5 * (&cov + cov.transpose()), singular)
}

pub(crate) fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exp {
        t: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquares for Exp {
        fn residual_count(&self) -> usize {
            self.t.len()
        }
        fn residuals(&self, x: &[f64], out: &mut [f64]) {
            for (i, (&t, &y)) in self.t.iter().zip(&self.y).enumerate() {
                out[i] = y - x[0] * (-t / x[1]).exp();
            }
        }
    }

    fn exp_problem() -> Exp {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 2.0).collect();
        let y = t.iter().map(|t| 0.8 * (-t / 29.4f64).exp()).collect();
        Exp { t, y }
    }

    #[test]
    fn recovers_exponential() {
        let p = exp_problem();
        let b = Bounds::new(vec![0.0, 0.1], vec![2.0, 1e3]).unwrap();
        let out = minimize(&p, &[0.3, 5.0], &b, &LmConfig::default());
        assert!(out.converged);
        assert!((out.x[0] - 0.8).abs() < 1e-9);
        assert!((out.x[1] - 29.4).abs() < 1e-7);
        assert!(out.chi2 < 1e-20);
    }

    #[test]
    fn respects_bounds() {
        let p = exp_problem();
        let b = Bounds::new(vec![0.0, 0.1], vec![0.5, 1e3]).unwrap();
        let out = minimize(&p, &[0.3, 5.0], &b, &LmConfig::default());
        assert!(out.converged);
        assert_eq!(out.x[0], 0.5);
        assert!(b.contains(&out.x));
    }

    #[test]
    fn covariance_of_line_fit() {
        // y = m·x with unit sigmas: var(m) = 1/Σx²
        let normal = DMatrix::from_element(1, 1, 14.0);
        let (cov, singular) = covariance(&normal);
        assert!(!singular);
        assert!((cov[(0, 0)] - 1.0 / 14.0).abs() < 1e-15);
        let degenerate = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (cov, singular) = covariance(&degenerate);
        assert!(singular);
        assert!((cov[(0, 0)] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn multistart_reports_non_convergence() {
        struct Nan;
        impl LeastSquares for Nan {
            fn residual_count(&self) -> usize {
                1
            }
            fn residuals(&self, _: &[f64], out: &mut [f64]) {
                out[0] = f64::NAN;
            }
        }
        let err = minimize_multistart(&Nan, &[vec![1.0], vec![2.0]], &Bounds::unbounded(1), &LmConfig::default());
        assert!(matches!(err, Err(Error::NonConvergence { restarts: 2 })));
    }
}
