//! Reporter positions from DEER traces recorded at several field directions.
//!
//! The NV sits at the origin and the reporters on the plane z = depth. For
//! field direction n̂ a reporter at s contributes 1 − p + p·cos(d·t/2) with
//! d = k_ee(|s|² − 3(s·n̂)²)/|s|⁵, on top of the NV echo envelope.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::lm::{minimize, Bounds, LeastSquares, LmConfig, LmOutcome};
use super::map::{Grid2D, ProbabilityMap};
use crate::error::{Error, Result};
use crate::physics::{FieldSetting, PhysicalConstants, SpinSystem, Vec3};
use crate::signal::{deer_signal, nv_echo, DecoherenceParams, SignalTrace};

/// DEER traces at distinct field directions.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAngleDataset {
    pub entries: Vec<(FieldSetting, SignalTrace)>,
}

impl MultiAngleDataset {
    pub fn new(entries: Vec<(FieldSetting, SignalTrace)>) -> Result<Self> {
        let ds = Self { entries };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let dirs: Vec<Vec3> = self.entries.iter().map(|(f, _)| f.direction()).collect();
        let distinct = dirs
            .iter()
            .enumerate()
            .any(|(i, a)| dirs[..i].iter().all(|b| a.dot(b) < 1.0 - 1e-9) && i > 0);
        if self.entries.len() < 2 || !distinct {
            return Err(Error::InvalidArgument(
                "a multi-angle dataset needs at least two distinct field directions".into(),
            ));
        }
        for (_, t) in &self.entries {
            t.validate()?;
            if t.is_empty() {
                return Err(Error::InvalidArgument("empty DEER trace".into()));
            }
        }
        Ok(())
    }

    /// Noiseless DEER traces of `scene` at each field.
    pub fn simulate(
        c: &PhysicalConstants,
        scene: &SpinSystem,
        fields: &[FieldSetting],
        t_nv: &[f64],
        flip_prob: f64,
        dec: &DecoherenceParams,
    ) -> Result<Self> {
        let entries = fields
            .iter()
            .map(|f| {
                let s = scene.with_field(*f);
                let trace = SignalTrace::try_from_fn(t_nv.to_vec(), |t| {
                    deer_signal(c, t, &s, flip_prob, dec)
                })?;
                Ok((*f, trace))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn point_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }
}

/// `count` field directions on a cone of half-angle `polar_deg` about `axis`.
pub fn field_cone(magnitude: f64, axis: &Vec3, polar_deg: f64, count: usize) -> Result<Vec<FieldSetting>> {
    (0..count)
        .map(|i| FieldSetting::tilted(magnitude, axis, polar_deg, 360.0 * i as f64 / count as f64))
        .collect()
}

/// NV depth below the surface plane, nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthSpec {
    Fixed(f64),
    /// Fitted as a nuisance parameter inside the interval.
    Profile { lo: f64, hi: f64 },
}

impl Default for DepthSpec {
    fn default() -> Self {
        DepthSpec::Profile { lo: 2.0, hi: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReporterConfig {
    pub n_spins: usize,
    /// Surface-plane grid, nm.
    pub grid: Grid2D,
    pub depth: DepthSpec,
    /// Reporter flip probability; None fits it in [0, 1].
    pub flip_prob: Option<f64>,
    /// Only `t2_nv` and `stretch_exponent` are used.
    pub decoherence: DecoherenceParams,
    /// Starts per nuisance reporter in each profile optimization.
    pub starts_per_spin: usize,
    /// Jitter of the extra starts, nm.
    pub jitter: f64,
    /// Rounds of re-placing each reporter after the greedy build-up.
    pub refine_sweeps: usize,
    /// Cap on profile cells (over all spins); None is unlimited.
    pub budget: Option<usize>,
    pub seed: u64,
    pub lm: LmConfig,
}

impl ReporterConfig {
    pub fn new(n_spins: usize, grid: Grid2D) -> Self {
        Self {
            n_spins,
            grid,
            depth: DepthSpec::default(),
            flip_prob: None,
            decoherence: DecoherenceParams::default(),
            starts_per_spin: 2,
            jitter: 1.0,
            refine_sweeps: 2,
            budget: None,
            seed: 0,
            lm: LmConfig {
                max_iterations: 100,
                ftol: 1e-10,
                xtol: 1e-10,
                lambda_init: 1e-3,
            },
        }
    }
}

/// Joint best fit of all reporters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReporterFit {
    /// (x, y, depth), nm.
    pub sites: Vec<Vec3>,
    pub depth: f64,
    pub flip_prob: f64,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReporterLocalization {
    pub fit: ReporterFit,
    /// Profile-likelihood map per reporter, in `fit.sites` order.
    pub maps: Vec<ProbabilityMap>,
    /// Equal-weight superposition of `maps`.
    pub combined: ProbabilityMap,
    /// Profile cells evaluated and requested.
    pub evaluated: usize,
    pub total: usize,
}

impl ReporterLocalization {
    pub fn is_complete(&self) -> bool {
        self.evaluated == self.total
    }

    /// Budget-exceeded error when the maps are partial.
    pub fn check(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::BudgetExceeded {
                evaluated: self.evaluated,
                total: self.total,
            })
        }
    }
}

struct Prepared {
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    env: Vec<f64>,
    angle: Vec<usize>,
    dirs: Vec<Vec3>,
    k_ee: f64,
}

impl Prepared {
    fn new(c: &PhysicalConstants, data: &MultiAngleDataset, dec: &DecoherenceParams) -> Result<Self> {
        let mut p = Prepared {
            t: Vec::new(),
            y: Vec::new(),
            w: Vec::new(),
            env: Vec::new(),
            angle: Vec::new(),
            dirs: Vec::new(),
            k_ee: c.k_ee(),
        };
        for (a, (field, trace)) in data.entries.iter().enumerate() {
            p.dirs.push(field.direction());
            for i in 0..trace.len() {
                let t = trace.abscissa[i];
                p.t.push(t);
                p.y.push(trace.signal[i]);
                p.env.push(nv_echo(t, dec));
                p.angle.push(a);
                p.w.push(if trace.has_sigma() {
                    let s = trace.sigma[i];
                    if !(s > 0.0) {
                        return Err(Error::InvalidArgument("sigma must be positive".into()));
                    }
                    1.0 / s
                } else {
                    1.0
                });
            }
        }
        Ok(p)
    }

    fn len(&self) -> usize {
        self.t.len()
    }

    /// Coupling and its gradient with respect to the site position.
    fn coupling(&self, s: &Vec3, dir: &Vec3) -> (f64, Vec3) {
        let r2 = s.norm_squared();
        let u = s.dot(dir);
        let r5 = r2 * r2 * r2.sqrt();
        let num = r2 - 3.0 * u * u;
        let d = self.k_ee * num / r5;
        let grad = self.k_ee * ((2.0 * s - 6.0 * u * dir) / r5 - 5.0 * num * s / (r5 * r2));
        (d, grad)
    }

    /// couplings[site][angle]
    fn couplings(&self, sites: &[(f64, f64)], depth: f64) -> Vec<Vec<(f64, Vec3)>> {
        sites
            .iter()
            .map(|&(x, y)| {
                let s = Vec3::new(x, y, depth);
                self.dirs.iter().map(|n| self.coupling(&s, n)).collect()
            })
            .collect()
    }

    fn chi2(&self, sites: &[(f64, f64)], p: f64, depth: f64) -> f64 {
        let d = self.couplings(sites, depth);
        (0..self.len())
            .map(|i| {
                let a = self.angle[i];
                let m = d.iter().fold(self.env[i], |acc, ds| {
                    acc * (1.0 - p + p * (0.5 * ds[a].0 * self.t[i]).cos())
                });
                ((self.y[i] - m) * self.w[i]).powi(2)
            })
            .sum()
    }
}

/// Sites held fixed plus free sites and nuisances packed into x:
/// [x₁, y₁, …, (p), (depth)].
struct DeerProblem<'a> {
    data: &'a Prepared,
    fixed: Vec<(f64, f64)>,
    n_free: usize,
    flip: Option<f64>,
    depth: Option<f64>,
}

impl DeerProblem<'_> {
    fn unpack(&self, x: &[f64]) -> (Vec<(f64, f64)>, f64, f64) {
        let mut sites = self.fixed.clone();
        for j in 0..self.n_free {
            sites.push((x[2 * j], x[2 * j + 1]));
        }
        let mut k = 2 * self.n_free;
        let p = self.flip.unwrap_or_else(|| {
            k += 1;
            x[k - 1]
        });
        let depth = self.depth.unwrap_or_else(|| x[k]);
        (sites, p, depth)
    }

    fn dims(&self) -> usize {
        2 * self.n_free + usize::from(self.flip.is_none()) + usize::from(self.depth.is_none())
    }
}

impl LeastSquares for DeerProblem<'_> {
    fn residual_count(&self) -> usize {
        self.data.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let (sites, p, depth) = self.unpack(x);
        let d = self.data.couplings(&sites, depth);
        let data = self.data;
        for (i, o) in out.iter_mut().enumerate() {
            let a = data.angle[i];
            let m = d.iter().fold(data.env[i], |acc, ds| {
                acc * (1.0 - p + p * (0.5 * ds[a].0 * data.t[i]).cos())
            });
            *o = (data.y[i] - m) * data.w[i];
        }
    }

    fn jacobian(&self, x: &[f64], _: &Bounds, jac: &mut DMatrix<f64>) {
        let (sites, p, depth) = self.unpack(x);
        let d = self.data.couplings(&sites, depth);
        let data = self.data;
        let n_sites = sites.len();
        let n_fixed = self.fixed.len();
        let p_col = self.flip.is_none().then_some(2 * self.n_free);
        let h_col = self
            .depth
            .is_none()
            .then(|| 2 * self.n_free + usize::from(self.flip.is_none()));
        let mut f = vec![0.0; n_sites];
        let mut cosv = vec![0.0; n_sites];
        let mut sinv = vec![0.0; n_sites];
        for i in 0..data.len() {
            let a = data.angle[i];
            let t = data.t[i];
            for j in 0..n_sites {
                let (s, c) = (0.5 * d[j][a].0 * t).sin_cos();
                cosv[j] = c;
                sinv[j] = s;
                f[j] = 1.0 - p + p * c;
            }
            let scale = -data.w[i] * data.env[i];
            let mut dp = 0.0;
            let mut dh = 0.0;
            for j in 0..n_sites {
                let others: f64 = (0..n_sites).filter(|&k| k != j).map(|k| f[k]).product();
                let dfd = -p * sinv[j] * 0.5 * t;
                let grad = &d[j][a].1;
                if j >= n_fixed {
                    let col = 2 * (j - n_fixed);
                    jac[(i, col)] = scale * others * dfd * grad.x;
                    jac[(i, col + 1)] = scale * others * dfd * grad.y;
                }
                dp += others * (cosv[j] - 1.0);
                dh += others * dfd * grad.z;
            }
            if let Some(col) = p_col {
                jac[(i, col)] = scale * dp;
            }
            if let Some(col) = h_col {
                jac[(i, col)] = scale * dh;
            }
        }
    }
}

struct Search<'a> {
    data: Prepared,
    cfg: &'a ReporterConfig,
    lower_xy: (f64, f64),
    upper_xy: (f64, f64),
}

#[derive(Debug, Clone)]
struct State {
    sites: Vec<(f64, f64)>,
    p: f64,
    depth: f64,
    chi2: f64,
}

impl Search<'_> {
    fn problem(&self, fixed: Vec<(f64, f64)>, n_free: usize) -> DeerProblem<'_> {
        DeerProblem {
            data: &self.data,
            fixed,
            n_free,
            flip: self.cfg.flip_prob,
            depth: match self.cfg.depth {
                DepthSpec::Fixed(h) => Some(h),
                DepthSpec::Profile { .. } => None,
            },
        }
    }

    fn bounds(&self, n_free: usize) -> Bounds {
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for _ in 0..n_free {
            lo.extend([self.lower_xy.0, self.lower_xy.1]);
            hi.extend([self.upper_xy.0, self.upper_xy.1]);
        }
        if self.cfg.flip_prob.is_none() {
            lo.push(0.0);
            hi.push(1.0);
        }
        if let DepthSpec::Profile { lo: a, hi: b } = self.cfg.depth {
            lo.push(a);
            hi.push(b);
        }
        Bounds { lower: lo, upper: hi }
    }

    fn pack(&self, free: &[(f64, f64)], p: f64, depth: f64) -> Vec<f64> {
        let mut x: Vec<f64> = free.iter().flat_map(|&(a, b)| [a, b]).collect();
        if self.cfg.flip_prob.is_none() {
            x.push(p);
        }
        if matches!(self.cfg.depth, DepthSpec::Profile { .. }) {
            x.push(depth);
        }
        x
    }

    fn depth_levels(&self) -> Vec<f64> {
        match self.cfg.depth {
            DepthSpec::Fixed(h) => vec![h],
            DepthSpec::Profile { lo, hi } => (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect(),
        }
    }

    /// Joint refinement of every site and nuisance from `start`.
    fn refine(&self, start: &State) -> State {
        let n = start.sites.len();
        let prob = self.problem(Vec::new(), n);
        let out = minimize(&prob, &self.pack(&start.sites, start.p, start.depth), &self.bounds(n), &self.cfg.lm);
        let (sites, p, depth) = prob.unpack(&out.x);
        State {
            sites,
            p,
            depth,
            chi2: out.chi2,
        }
    }

    /// Best placements of one more site next to `others`, by grid scan then refinement.
    fn place(&self, others: &[(f64, f64)], p: f64) -> State {
        let grid = &self.cfg.grid;
        let mut scored: Vec<(f64, usize, f64)> = self
            .depth_levels()
            .into_iter()
            .flat_map(|h| {
                (0..grid.len()).into_par_iter().map(move |k| (k, h)).collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(k, h)| {
                let mut sites = others.to_vec();
                sites.push(grid.center(k));
                (self.data.chi2(&sites, p, h), k, h)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // a few well-separated candidates
        let step = grid.x.step().max(grid.y.step());
        let mut picks: Vec<(usize, f64)> = Vec::new();
        for &(_, k, h) in &scored {
            let (x, y) = grid.center(k);
            if picks.iter().all(|&(q, _)| {
                let (qx, qy) = grid.center(q);
                (qx - x).hypot(qy - y) > 2.5 * step
            }) {
                picks.push((k, h));
            }
            if picks.len() == 3 {
                break;
            }
        }
        picks
            .into_iter()
            .map(|(k, h)| {
                let mut sites = others.to_vec();
                sites.push(grid.center(k));
                self.refine(&State {
                    sites,
                    p,
                    depth: h,
                    chi2: f64::INFINITY,
                })
            })
            .min_by(|a, b| a.chi2.total_cmp(&b.chi2))
            .expect("grid is never empty")
    }

    fn global_fit(&self) -> State {
        let p0 = self.cfg.flip_prob.unwrap_or(1.0);
        let mut state = State {
            sites: Vec::new(),
            p: p0,
            depth: self.depth_levels()[0],
            chi2: f64::INFINITY,
        };
        for _ in 0..self.cfg.n_spins {
            state = self.place(&state.sites, state.p);
        }
        for _ in 0..self.cfg.refine_sweeps {
            let mut improved = false;
            for k in 0..state.sites.len() {
                let mut others = state.sites.clone();
                others.remove(k);
                let candidate = self.place(&others, state.p);
                if candidate.chi2 < state.chi2 * (1.0 - 1e-9) {
                    state = candidate;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        state
    }

    /// Bounds for profiling `spin`: every other reporter stays in a box around
    /// its best-fit site, half as wide as the gap to its nearest neighbour
    /// (0.5–2 nm). Reporters are interchangeable, so without the boxes a free
    /// reporter can take over the pinned one's site and every map would show
    /// all reporters.
    fn anchored_bounds(&self, best: &State, spin: usize) -> Bounds {
        let mut b = self.bounds(best.sites.len() - 1);
        let mut col = 0;
        for (j, &(x, y)) in best.sites.iter().enumerate() {
            if j == spin {
                continue;
            }
            let gap = best
                .sites
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &(u, v))| (u - x).hypot(v - y))
                .fold(f64::INFINITY, f64::min);
            let half = (0.5 * gap).clamp(0.5, 2.0);
            b.lower[col] = b.lower[col].max(x - half);
            b.upper[col] = b.upper[col].min(x + half);
            b.lower[col + 1] = b.lower[col + 1].max(y - half);
            b.upper[col + 1] = b.upper[col + 1].min(y + half);
            col += 2;
        }
        b
    }

    /// Minimum χ² with site `spin` pinned at grid cell `cell`.
    fn profile(&self, best: &State, spin: usize, cell: usize) -> f64 {
        let pinned = self.cfg.grid.center(cell);
        let others: Vec<(f64, f64)> = best
            .sites
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != spin)
            .map(|(_, s)| *s)
            .collect();
        let prob = self.problem(vec![pinned], others.len());
        if prob.dims() == 0 {
            return self.data.chi2(&[pinned], best.p, best.depth);
        }
        let bounds = self.anchored_bounds(best, spin);
        let mut starts = vec![self.pack(&others, best.p, best.depth)];
        if !others.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream((spin * self.cfg.grid.len() + cell) as u64);
            let extra = self.cfg.starts_per_spin.saturating_sub(1) * others.len();
            for _ in 0..extra {
                let jittered: Vec<(f64, f64)> = others
                    .iter()
                    .map(|&(x, y)| {
                        (
                            x + self.cfg.jitter * rng.gen_range(-1.0..1.0),
                            y + self.cfg.jitter * rng.gen_range(-1.0..1.0),
                        )
                    })
                    .collect();
                let mut s = self.pack(&jittered, best.p, best.depth);
                bounds.clamp(&mut s);
                starts.push(s);
            }
        }
        starts
            .iter()
            .map(|s| minimize(&prob, s, &bounds, &self.cfg.lm))
            .filter(|o: &LmOutcome| o.chi2.is_finite())
            .map(|o| o.chi2)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Profile-likelihood localization of `cfg.n_spins` reporters.
///
/// A greedy grid search followed by joint refinement gives the best-fit
/// scene; then for each reporter and grid cell the reporter is pinned to the
/// cell, the others and the nuisance parameters are re-optimized from the best
/// fit (plus jittered starts), and the minimum χ² becomes the map weight
/// exp(−χ²/2). Cells beyond `cfg.budget` are left at zero weight and the
/// result reports itself as partial.
pub fn localize_reporters(
    c: &PhysicalConstants,
    data: &MultiAngleDataset,
    cfg: &ReporterConfig,
) -> Result<ReporterLocalization> {
    data.validate()?;
    if cfg.n_spins == 0 {
        return Err(Error::InvalidArgument("need at least one reporter".into()));
    }
    match cfg.depth {
        DepthSpec::Fixed(h) if !(h > 0.0) => {
            return Err(Error::InvalidArgument(format!("NV depth {h} must be positive")))
        }
        DepthSpec::Profile { lo, hi } if !(lo > 0.0 && hi >= lo) => {
            return Err(Error::InvalidArgument(format!("bad depth interval [{lo}, {hi}]")))
        }
        _ => {}
    }
    if let Some(p) = cfg.flip_prob {
        crate::signal::check_probability(p)?;
    }
    let grid = &cfg.grid;
    let search = Search {
        data: Prepared::new(c, data, &cfg.decoherence)?,
        cfg,
        lower_xy: (grid.x.min, grid.y.min),
        upper_xy: (grid.x.max, grid.y.max),
    };
    let n_params = 2 * cfg.n_spins
        + usize::from(cfg.flip_prob.is_none())
        + usize::from(matches!(cfg.depth, DepthSpec::Profile { .. }));
    let points = search.data.len();
    if points <= n_params {
        return Err(Error::ZeroDof {
            points,
            params: n_params,
        });
    }
    let best = search.global_fit();

    let cells = grid.len();
    let total = cfg.n_spins * cells;
    let evaluated = cfg.budget.map_or(total, |b| b.min(total));
    let chi2: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|job| {
            if job < evaluated {
                search.profile(&best, job / cells, job % cells)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let maps = (0..cfg.n_spins)
        .map(|k| {
            let slice = &chi2[k * cells..(k + 1) * cells];
            if slice.iter().any(|v| v.is_finite()) {
                ProbabilityMap::from_chi2(grid.clone(), slice, &format!("reporter {}", k + 1))
            } else {
                // nothing evaluated for this spin: uniform placeholder
                ProbabilityMap::from_weights(grid.clone(), vec![1.0; cells], &format!("reporter {} (unevaluated)", k + 1))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let combined = ProbabilityMap::superpose(&maps, "reporters")?;
    let dof = points - n_params;
    Ok(ReporterLocalization {
        fit: ReporterFit {
            sites: best.sites.iter().map(|&(x, y)| Vec3::new(x, y, best.depth)).collect(),
            depth: best.depth,
            flip_prob: best.p,
            chi2: best.chi2,
            reduced_chi2: best.chi2 / dof as f64,
            dof,
        },
        maps,
        combined,
        evaluated,
        total,
    })
}
