use nalgebra::DVector;

use super::hamiltonian::{build_hamiltonian, collective, is_hermitian, spin_half, Operator, C64};
use super::sequence::{Element, InitialSpin, Observable, PulseSequence};
use super::{Frame, OracleSystem, Species};
use crate::error::{Error, Result};
use crate::physics::PhysicalConstants;

/// Density operator of an n-spin system.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: Operator,
    pub spins: usize,
}

impl DensityMatrix {
    /// Product state built from per-spin initial states.
    pub fn product(states: &[InitialSpin]) -> Self {
        let n = states.len();
        let dim = 1usize << n;
        let mut rho = Operator::zeros(dim, dim);
        for i in 0..dim {
            let p: f64 = states
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let up = (i >> (n - 1 - k)) & 1 == 0;
                    match (s, up) {
                        (InitialSpin::Mixed, _) => 0.5,
                        (InitialSpin::Up, true) | (InitialSpin::Down, false) => 1.0,
                        _ => 0.0,
                    }
                })
                .product();
            rho[(i, i)] = C64::new(p, 0.0);
        }
        Self { rho, spins: n }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Tr ρ², assuming ρ is Hermitian.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        is_hermitian(&self.rho, tol)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.rho.diagonal().iter().map(|z| z.re).collect()
    }

    /// ⟨2Sz⟩ of one spin.
    pub fn polarization(&self, spin: usize) -> f64 {
        let shift = self.spins - 1 - spin;
        self.rho
            .diagonal()
            .iter()
            .enumerate()
            .map(|(i, z)| if (i >> shift) & 1 == 0 { z.re } else { -z.re })
            .sum()
    }

    /// Applies the single-spin unitary `g` to `spin`: ρ → GρG†.
    fn apply_single(&mut self, spin: usize, g: &[[C64; 2]; 2]) {
        let dim = self.rho.nrows();
        let mask = 1usize << (self.spins - 1 - spin);
        for col in 0..dim {
            for i0 in (0..dim).filter(|i| i & mask == 0) {
                let i1 = i0 | mask;
                let (x0, x1) = (self.rho[(i0, col)], self.rho[(i1, col)]);
                self.rho[(i0, col)] = g[0][0] * x0 + g[0][1] * x1;
                self.rho[(i1, col)] = g[1][0] * x0 + g[1][1] * x1;
            }
        }
        for row in 0..dim {
            for j0 in (0..dim).filter(|j| j & mask == 0) {
                let j1 = j0 | mask;
                let (x0, x1) = (self.rho[(row, j0)], self.rho[(row, j1)]);
                self.rho[(row, j0)] = x0 * g[0][0].conj() + x1 * g[0][1].conj();
                self.rho[(row, j1)] = x0 * g[1][0].conj() + x1 * g[1][1].conj();
            }
        }
    }
}

/// exp(−iθ(cosφ·Sx + sinφ·Sy))
fn rotation(angle: f64, phase: f64) -> [[C64; 2]; 2] {
    let (s, c) = (0.5 * angle).sin_cos();
    let e = C64::from_polar(1.0, phase);
    let mi = C64::new(0.0, -s);
    [[C64::new(c, 0.0), mi * e.conj()], [mi * e, C64::new(c, 0.0)]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Readout expectation in [−1, 1].
    pub expectation: f64,
    /// Diagonal of the final density operator.
    pub populations: Vec<f64>,
    pub purity: f64,
    pub trace: f64,
    pub final_state: DensityMatrix,
}

/// Eigendecomposition of a time-independent Hamiltonian.
#[derive(Debug, Clone)]
pub(crate) struct Propagator {
    vectors: Operator,
    values: DVector<f64>,
}

impl Propagator {
    pub(crate) fn new(h: Operator) -> Self {
        let eig = h.symmetric_eigen();
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        }
    }

    /// exp(−iHt)
    pub(crate) fn unitary(&self, t: f64) -> Operator {
        let phases = self.values.map(|e| C64::from_polar(1.0, -e * t));
        let mut scaled = self.vectors.clone();
        for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *p;
        }
        scaled * self.vectors.adjoint()
    }

    pub(crate) fn evolve(&self, state: &mut DensityMatrix, t: f64) {
        if t == 0.0 {
            return;
        }
        let u = self.unitary(t);
        state.rho = &u * &state.rho * u.adjoint();
    }
}

/// A system with its static Hamiltonian diagonalized once, reusable across runs.
#[derive(Debug, Clone)]
pub struct OracleRunner<'a> {
    c: &'a PhysicalConstants,
    system: &'a OracleSystem,
    hamiltonian: Operator,
    free: Propagator,
}

impl<'a> OracleRunner<'a> {
    pub fn new(c: &'a PhysicalConstants, system: &'a OracleSystem) -> Result<Self> {
        let hamiltonian = build_hamiltonian(c, system)?;
        Ok(Self {
            c,
            system,
            free: Propagator::new(hamiltonian.clone()),
            hamiltonian,
        })
    }

    /// Initial state with the NV in ms = 0 and everything else unpolarized.
    pub fn thermal_initial(&self) -> Vec<InitialSpin> {
        self.system
            .spins
            .iter()
            .map(|s| match s.species {
                Species::Nv => InitialSpin::Up,
                _ => InitialSpin::Mixed,
            })
            .collect()
    }

    pub fn run(&self, seq: &PulseSequence, initial: &[InitialSpin]) -> Result<OracleResult> {
        seq.validate()?;
        if initial.len() != self.system.len() {
            return Err(Error::InvalidArgument(format!(
                "initial state lists {} spins, system has {}",
                initial.len(),
                self.system.len()
            )));
        }
        let mut state = DensityMatrix::product(initial);
        let mut expectation = None;
        for element in &seq.elements {
            match *element {
                Element::Delay(t) => self.free.evolve(&mut state, t),
                Element::Pulse(p) => {
                    let spins = p.channel.resolve(self.system)?;
                    match p.duration {
                        Some(d) if d > 0.0 => {
                            if self.system.frame == Frame::Lab {
                                return Err(Error::InvalidArgument(
                                    "finite-duration pulses need the rotating frame".into(),
                                ));
                            }
                            let drive = collective(
                                self.system.len(),
                                &spins,
                                &spin_half::transverse(p.axis.phase()),
                                p.angle / d,
                            );
                            Propagator::new(&self.hamiltonian + drive).evolve(&mut state, d);
                        }
                        _ => {
                            let g = rotation(p.angle, p.axis.phase());
                            for s in spins {
                                state.apply_single(s, &g);
                            }
                        }
                    }
                }
                Element::StochasticFlip {
                    channel,
                    probability,
                } => {
                    let g = rotation(std::f64::consts::PI, 0.0);
                    for s in channel.resolve(self.system)? {
                        let mut flipped = state.clone();
                        flipped.apply_single(s, &g);
                        state.rho = state.rho.scale(1.0 - probability) + flipped.rho.scale(probability);
                    }
                }
                Element::Readout(Observable::Polarization(channel)) => {
                    let spins = channel.resolve(self.system)?;
                    let total: f64 = spins.iter().map(|&s| state.polarization(s)).sum();
                    expectation = Some(total / spins.len() as f64);
                }
            }
        }
        Ok(OracleResult {
            expectation: expectation.expect("validated sequence ends in a readout"),
            populations: state.populations(),
            purity: state.purity(),
            trace: state.trace(),
            final_state: state,
        })
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn constants(&self) -> &PhysicalConstants {
        self.c
    }
}

/// Runs `seq` on `system` from a product initial state.
pub fn run_sequence(
    c: &PhysicalConstants,
    system: &OracleSystem,
    seq: &PulseSequence,
    initial: &[InitialSpin],
) -> Result<OracleResult> {
    OracleRunner::new(c, system)?.run(seq, initial)
}
