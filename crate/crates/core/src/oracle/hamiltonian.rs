use nalgebra::{Complex, DMatrix};

use super::{Coupling, Frame, OracleSystem, Species};
use crate::error::Result;
use crate::physics::PhysicalConstants;

pub type C64 = Complex<f64>;
/// Dense operator on the full Hilbert space.
pub type Operator = DMatrix<C64>;

/// 2×2 single-spin matrices in the {up, down} basis.
pub(crate) mod spin_half {
    use super::C64;

    pub type M2 = [[C64; 2]; 2];

    const fn c(re: f64, im: f64) -> C64 {
        C64 { re, im }
    }

    pub const SX: M2 = [[c(0.0, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.0, 0.0)]];
    pub const SY: M2 = [[c(0.0, 0.0), c(0.0, -0.5)], [c(0.0, 0.5), c(0.0, 0.0)]];
    pub const SZ: M2 = [[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.5, 0.0)]];

    /// NV ms operator for the {ms 0, ms −1} pair: Sz − 1/2.
    pub const MS: M2 = [[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];

    /// cosφ·Sx + sinφ·Sy
    pub fn transverse(phi: f64) -> M2 {
        let (s, co) = phi.sin_cos();
        [
            [c(0.0, 0.0), c(0.5 * co, -0.5 * s)],
            [c(0.5 * co, 0.5 * s), c(0.0, 0.0)],
        ]
    }
}

use spin_half::M2;

/// Adds `scale · op` acting on `spin` to `h`.
fn add_single(h: &mut Operator, n: usize, spin: usize, op: &M2, scale: f64) {
    let dim = h.nrows();
    let shift = n - 1 - spin;
    for i in 0..dim {
        let bi = (i >> shift) & 1;
        for bj in 0..2 {
            let v = op[bi][bj];
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let j = (i & !(1 << shift)) | (bj << shift);
            h[(i, j)] += v * scale;
        }
    }
}

/// Adds `scale · (op_a ⊗ op_b)` acting on spins `a` and `b`.
fn add_pair(h: &mut Operator, n: usize, a: usize, op_a: &M2, b: usize, op_b: &M2, scale: f64) {
    let dim = h.nrows();
    let (sa, sb) = (n - 1 - a, n - 1 - b);
    for i in 0..dim {
        let (ba, bb) = ((i >> sa) & 1, (i >> sb) & 1);
        for ja in 0..2 {
            let va = op_a[ba][ja];
            if va.re == 0.0 && va.im == 0.0 {
                continue;
            }
            for jb in 0..2 {
                let vb = op_b[bb][jb];
                if vb.re == 0.0 && vb.im == 0.0 {
                    continue;
                }
                let j = (i & !(1 << sa) & !(1 << sb)) | (ja << sa) | (jb << sb);
                h[(i, j)] += va * vb * scale;
            }
        }
    }
}

/// Sum of `scale · op` over the listed spins, as a full operator.
pub(crate) fn collective(n: usize, spins: &[usize], op: &M2, scale: f64) -> Operator {
    let mut h = Operator::zeros(1 << n, 1 << n);
    for &s in spins {
        add_single(&mut h, n, s, op, scale);
    }
    h
}

/// Static Hamiltonian of `system`, rad/μs.
///
/// Protons always keep ωn·Iz. In the lab frame the NV contributes
/// (Δ − γe·B)·|ms −1⟩⟨ms −1| and each electron γe·B·Sz.
pub fn build_hamiltonian(c: &PhysicalConstants, system: &OracleSystem) -> Result<Operator> {
    let dim = system.dimension()?;
    let n = system.len();
    let mut h = Operator::zeros(dim, dim);
    let omega_n = system.larmor(c);
    let b = system.field.magnitude();
    for (k, spin) in system.spins.iter().enumerate() {
        match (spin.species, system.frame) {
            (Species::Proton, _) => add_single(&mut h, n, k, &spin_half::SZ, omega_n),
            (Species::Electron, Frame::Lab) => {
                add_single(&mut h, n, k, &spin_half::SZ, c.gamma_e * b)
            }
            (Species::Nv, Frame::Lab) => {
                add_single(&mut h, n, k, &spin_half::MS, -(c.delta_nv - c.gamma_e * b))
            }
            _ => {}
        }
    }
    for ((i, j), coupling) in system.couplings() {
        let op_for = |k: usize| {
            if system.spins[k].species == Species::Nv {
                spin_half::MS
            } else {
                spin_half::SZ
            }
        };
        match coupling {
            Coupling::Ising(d) => add_pair(&mut h, n, i, &op_for(i), j, &op_for(j), d),
            Coupling::SecularDipolar(d) => {
                add_pair(&mut h, n, i, &spin_half::SZ, j, &spin_half::SZ, d);
                add_pair(&mut h, n, i, &spin_half::SX, j, &spin_half::SX, -0.5 * d);
                add_pair(&mut h, n, i, &spin_half::SY, j, &spin_half::SY, -0.5 * d);
            }
            Coupling::Hyperfine { a, b, phi } => {
                let (e, p) = if system.spins[i].species == Species::Proton {
                    (j, i)
                } else {
                    (i, j)
                };
                let ez = op_for(e);
                add_pair(&mut h, n, e, &ez, p, &spin_half::SZ, a);
                add_pair(&mut h, n, e, &ez, p, &spin_half::transverse(phi), b);
            }
        }
    }
    Ok(h)
}

/// Largest |M − M†| element is below `tol`.
pub fn is_hermitian(m: &Operator, tol: f64) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    (0..n).all(|i| (0..=i).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() < tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{eseem_frequencies, FieldSetting, HyperfineParams, Vec3};

    fn eigenvalues(h: &Operator) -> Vec<f64> {
        let mut e: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn single_proton_zeeman_doublet() {
        let c = PhysicalConstants::default();
        let field = FieldSetting::new(500.0, Vec3::z()).unwrap();
        let mut sys = OracleSystem::new(field);
        sys.add_spin(Species::Proton, Vec3::zeros());
        let h = build_hamiltonian(&c, &sys).unwrap();
        let e = eigenvalues(&h);
        assert!((e[1] - e[0] - c.gamma_p * 500.0).abs() < 1e-12);
    }

    #[test]
    fn manifold_splittings_are_eseem_frequencies() {
        let c = PhysicalConstants::default();
        let field = FieldSetting::new(619.0, Vec3::z()).unwrap();
        let wn = 16.568_382_663_914_136;
        let p = HyperfineParams::new(66.0, 52.0);
        let sys = OracleSystem::reporter_with_protons(field, wn, &[p]);
        let h = build_hamiltonian(&c, &sys).unwrap();
        assert!(is_hermitian(&h, 1e-12));
        // Sz is conserved: the up and down manifolds are the 2×2 diagonal blocks
        let split = |r: usize| {
            let block = h.view((r, r), (2, 2)).into_owned();
            let e = eigenvalues(&block);
            e[1] - e[0]
        };
        let mut got = [split(0), split(2)];
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let f = eseem_frequencies(&p, wn);
        assert!((got[0] - f.omega_plus).abs() < 1e-10, "{got:?}");
        assert!((got[1] - f.omega_minus).abs() < 1e-10);
        assert!((got[0] - 30.757_081_270).abs() < 1e-8);
        assert!((got[1] - 55.973_427_266).abs() < 1e-8);
    }

    #[test]
    fn uncoupled_terms_commute() {
        let c = PhysicalConstants::default();
        let field = FieldSetting::new(619.0, Vec3::z()).unwrap();
        let sys = OracleSystem::reporter_with_protons(
            field,
            16.0,
            &[HyperfineParams::new(0.0, 0.0), HyperfineParams::new(0.0, 0.0)],
        );
        let h = build_hamiltonian(&c, &sys).unwrap();
        // a sum of Zeeman terms is diagonal in the product basis
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if i != j {
                    assert_eq!(h[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn nv_ms_operator() {
        let c = PhysicalConstants::default();
        let field = FieldSetting::new(100.0, Vec3::z()).unwrap();
        let mut sys = OracleSystem::new(field);
        let nv = sys.add_spin(Species::Nv, Vec3::zeros());
        let e = sys.add_spin(Species::Electron, Vec3::new(3.0, 0.0, 0.0));
        sys.set_coupling(nv, e, Coupling::Ising(2.0)).unwrap();
        let h = build_hamiltonian(&c, &sys).unwrap();
        // basis |ms, s⟩: |0,↑⟩ |0,↓⟩ |−1,↑⟩ |−1,↓⟩ → d·ms·s = 0, 0, −1, +1
        let diag: Vec<f64> = (0..4).map(|i| h[(i, i)].re).collect();
        assert_eq!(diag, vec![0.0, 0.0, -1.0, 1.0]);
    }
}
