use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evenly spaced cell centres from `min` to `max` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn new(name: &str, min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "axis {name}: need n >= 2 and min < max"
            )));
        }
        Ok(Self {
            name: name.into(),
            min,
            max,
            n,
        })
    }

    /// Axis with the given cell spacing, symmetric about zero.
    pub fn centered(name: &str, half_width: f64, step: f64) -> Result<Self> {
        let cells = (half_width / step).round() as usize;
        Self::new(name, -(cells as f64) * step, cells as f64 * step, 2 * cells + 1)
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + self.step() * i as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `v`, if on the axis.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        let f = (v - self.min) / self.step();
        let i = f.round();
        (i >= 0.0 && i < self.n as f64).then_some(i as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x: GridAxis,
    pub y: GridAxis,
}

impl Grid2D {
    pub fn new(x: GridAxis, y: GridAxis) -> Self {
        Self { x, y }
    }

    /// Square surface-plane grid, nm.
    pub fn surface(half_width: f64, step: f64) -> Result<Self> {
        Ok(Self::new(
            GridAxis::centered("x_nm", half_width, step)?,
            GridAxis::centered("y_nm", half_width, step)?,
        ))
    }

    pub fn len(&self) -> usize {
        self.x.n * self.y.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major: x varies fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.x.n + ix
    }

    pub fn cell(&self, k: usize) -> (usize, usize) {
        (k % self.x.n, k / self.x.n)
    }

    pub fn center(&self, k: usize) -> (f64, f64) {
        let (ix, iy) = self.cell(k);
        (self.x.center(ix), self.y.center(iy))
    }

    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        Some(self.index(self.x.index_of(x)?, self.y.index_of(y)?))
    }
}

/// Normalized density over a [`Grid2D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMap {
    pub grid: Grid2D,
    /// Row-major, sums to one.
    pub density: Vec<f64>,
    pub label: String,
}

impl ProbabilityMap {
    /// Normalizes non-negative weights; fails on an all-zero or non-finite input.
    pub fn from_weights(grid: Grid2D, weights: Vec<f64>, label: &str) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for a grid of {} cells",
                weights.len(),
                grid.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NoSolution("map carries no weight".into()));
        }
        let mut density: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // fold the rounding residue into the largest cell
        let residue = 1.0 - density.iter().sum::<f64>();
        let k = argmax(&density);
        density[k] = (density[k] + residue).max(0.0);
        Ok(Self {
            grid,
            density,
            label: label.into(),
        })
    }

    /// Likelihood map exp(−(χ² − χ²min)/2); infinite χ² cells get zero weight.
    pub fn from_chi2(grid: Grid2D, chi2: &[f64], label: &str) -> Result<Self> {
        let min = chi2.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(Error::NoSolution("no finite chi-squared cell".into()));
        }
        let w = chi2
            .iter()
            .map(|&v| if v.is_finite() { (-(v - min) / 2.0).exp() } else { 0.0 })
            .collect();
        Self::from_weights(grid, w, label)
    }

    /// Equal-weight superposition of maps on the same grid.
    pub fn superpose(maps: &[ProbabilityMap], label: &str) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to superpose".into()))?;
        if maps.iter().any(|m| m.grid != first.grid) {
            return Err(Error::InvalidArgument("maps live on different grids".into()));
        }
        let w = (0..first.density.len())
            .map(|k| maps.iter().map(|m| m.density[k]).sum())
            .collect();
        Self::from_weights(first.grid.clone(), w, label)
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.density)
    }

    pub fn argmax_position(&self) -> (f64, f64) {
        self.grid.center(self.argmax())
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.grid.x.n];
        for (k, d) in self.density.iter().enumerate() {
            m[self.grid.cell(k).0] += d;
        }
        m
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.grid.y.n];
        for (k, d) in self.density.iter().enumerate() {
            m[self.grid.cell(k).1] += d;
        }
        m
    }

    /// Highest-density cells holding at least `level` of the mass.
    pub fn credible_region(&self, level: f64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.density.len()).collect();
        order.sort_by(|&a, &b| self.density[b].total_cmp(&self.density[a]).then(a.cmp(&b)));
        let mut acc = 0.0;
        let mut out = Vec::new();
        for k in order {
            if acc >= level {
                break;
            }
            acc += self.density[k];
            out.push(k);
        }
        out
    }

    /// Mean position and its standard deviations.
    pub fn moments(&self) -> ((f64, f64), (f64, f64)) {
        let (mut mx, mut my) = (0.0, 0.0);
        for (k, d) in self.density.iter().enumerate() {
            let (x, y) = self.grid.center(k);
            mx += d * x;
            my += d * y;
        }
        let (mut vx, mut vy) = (0.0, 0.0);
        for (k, d) in self.density.iter().enumerate() {
            let (x, y) = self.grid.center(k);
            vx += d * (x - mx).powi(2);
            vy += d * (y - my).powi(2);
        }
        ((mx, my), (vx.sqrt(), vy.sqrt()))
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn axis_geometry() {
        let a = GridAxis::centered("x", 5.0, 0.5).unwrap();
        assert_eq!(a.n, 21);
        assert_eq!(a.center(10), 0.0);
        assert_eq!(a.index_of(1.2), Some(12));
        assert_eq!(a.index_of(7.0), None);
        assert!(GridAxis::new("x", 1.0, 1.0, 5).is_err());
    }

    #[test]
    fn chi2_map_peaks_at_minimum() {
        let g = Grid2D::surface(1.0, 0.5).unwrap();
        let mut chi2 = vec![100.0; g.len()];
        chi2[7] = 3.0;
        chi2[8] = f64::INFINITY;
        let m = ProbabilityMap::from_chi2(g, &chi2, "t").unwrap();
        assert_eq!(m.argmax(), 7);
        assert_eq!(m.density[8], 0.0);
        assert!((m.total() - 1.0).abs() < 1e-12);
        assert_eq!(m.credible_region(0.9), vec![7]);
        assert!(ProbabilityMap::from_chi2(m.grid.clone(), &[f64::INFINITY; 25], "t").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            rng_seed: proptest::test_runner::RngSeed::Fixed(13),
            ..ProptestConfig::default()
        })]

        #[test]
        fn maps_are_normalized(
            chi2 in prop::collection::vec(0.0f64..5000.0, 36),
            scale in 1e-3f64..1e3,
        ) {
            let g = Grid2D::new(
                GridAxis::new("x", 0.0, 5.0, 6).unwrap(),
                GridAxis::new("y", 0.0, 5.0, 6).unwrap(),
            );
            let m = ProbabilityMap::from_chi2(g.clone(), &chi2, "p").unwrap();
            prop_assert!((m.total() - 1.0).abs() < 1e-9);
            prop_assert!(m.density.iter().all(|d| d.is_finite() && *d >= 0.0));
            let w: Vec<f64> = chi2.iter().map(|c| c * scale).collect();
            let m2 = ProbabilityMap::from_weights(g, w, "w").unwrap();
            prop_assert!((m2.total() - 1.0).abs() < 1e-9);
            let both = ProbabilityMap::superpose(&[m, m2], "s").unwrap();
            prop_assert!((both.total() - 1.0).abs() < 1e-9);
            prop_assert!((both.marginal_x().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
