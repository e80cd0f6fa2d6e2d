use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use num_complex::Complex64;

use super::{FieldConfig, SpinSystem};
use crate::error::{invalid, Error, Result};

type CMatrix = DMatrix<Complex64>;

/// Cartesian spin operators `[Sx, Sy, Sz]` for spin `two_s / 2` in the
/// `|m = s, s-1, ..., -s>` basis.
pub fn spin_operators(two_s: u32) -> [CMatrix; 3] {
    let dim = two_s as usize + 1;
    let s = two_s as f64 / 2.0;
    let m = |k: usize| s - k as f64;
    let mut sx = CMatrix::zeros(dim, dim);
    let mut sy = CMatrix::zeros(dim, dim);
    let mut sz = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        sz[(k, k)] = Complex64::new(m(k), 0.0);
        if k + 1 < dim {
            // <m+1| S+ |m> with m = m(k+1)
            let mk = m(k + 1);
            let c = (s * (s + 1.0) - mk * (mk + 1.0)).sqrt();
            sx[(k, k + 1)] = Complex64::new(c / 2.0, 0.0);
            sx[(k + 1, k)] = Complex64::new(c / 2.0, 0.0);
            sy[(k, k + 1)] = Complex64::new(0.0, -c / 2.0);
            sy[(k + 1, k)] = Complex64::new(0.0, c / 2.0);
        }
    }
    [sx, sy, sz]
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Electron spin operators embedded in the electron ⊗ nuclear product space.
pub(crate) fn electron_operators(system: &dyn SpinSystem) -> [CMatrix; 3] {
    let id_n = CMatrix::identity(system.nuclear_spin().multiplicity(), system.nuclear_spin().multiplicity());
    spin_operators(1).map(|s| kron(&s, &id_n))
}

/// Spin Hamiltonian `B·γ·S + I·A·S + γn B·I` in Hz, product basis
/// (electron index major).
pub fn build_hamiltonian(system: &dyn SpinSystem, field: &FieldConfig) -> Result<CMatrix> {
    field.validate()?;
    let two_i = system.nuclear_spin().twice();
    let hyperfine = system.hyperfine_matrix();
    if two_i > 0 && hyperfine.is_none() {
        return Err(invalid("hyperfine", format!("{}: I > 0 without hyperfine tensor", system.label())));
    }
    Ok(hamiltonian_at(system, &field.vector()))
}

pub(crate) fn hamiltonian_at(system: &dyn SpinSystem, b: &Vector3<f64>) -> CMatrix {
    let two_i = system.nuclear_spin().twice();
    let dn = two_i as usize + 1;
    let dim = 2 * dn;
    let s_ops = spin_operators(1);
    let i_ops = spin_operators(two_i);
    let id_s = CMatrix::identity(2, 2);
    let id_n = CMatrix::identity(dn, dn);
    let se: Vec<CMatrix> = s_ops.iter().map(|s| kron(s, &id_n)).collect();

    let mut h = CMatrix::zeros(dim, dim);
    let bg = b.transpose() * system.gyro_matrix();
    for k in 0..3 {
        if bg[k] != 0.0 {
            h += &se[k] * Complex64::new(bg[k], 0.0);
        }
    }
    if two_i > 0 {
        let ie: Vec<CMatrix> = i_ops.iter().map(|i| kron(&id_s, i)).collect();
        if let Some(a) = system.hyperfine_matrix() {
            for j in 0..3 {
                for k in 0..3 {
                    if a[(j, k)] != 0.0 {
                        h += (&ie[j] * &se[k]) * Complex64::new(a[(j, k)], 0.0);
                    }
                }
            }
        }
        let gn = system.gamma_nuclear();
        for j in 0..3 {
            if b[j] != 0.0 && gn != 0.0 {
                h += &ie[j] * Complex64::new(gn * b[j], 0.0);
            }
        }
    }
    h
}

/// Eigen-decomposition with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct Levels {
    /// Hz.
    pub energies: Vec<f64>,
    /// Column `k` is the eigenvector of `energies[k]`.
    pub vectors: CMatrix,
}

impl Levels {
    /// `|<lower| op |upper>|`.
    pub fn matrix_element(&self, op: &CMatrix, lower: usize, upper: usize) -> f64 {
        let l = self.vectors.column(lower);
        let u = self.vectors.column(upper);
        (l.adjoint() * op * u)[(0, 0)].norm()
    }

    /// Complex vector `<lower| S_k |upper>` for the electron spin.
    pub fn electron_transition_vector(
        &self,
        s_ops: &[CMatrix; 3],
        lower: usize,
        upper: usize,
    ) -> [Complex64; 3] {
        let l = self.vectors.column(lower);
        let u = self.vectors.column(upper);
        [0, 1, 2].map(|k| (l.adjoint() * &s_ops[k] * u)[(0, 0)])
    }
}

pub fn eigen_levels(h: &CMatrix) -> Result<Levels> {
    let n = h.nrows();
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let eig = SymmetricEigen::try_new(h.clone(), scale * 1e-15, 10_000)
        .ok_or_else(|| Error::EigenSolve(format!("{n}x{n} Hermitian matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Levels { energies, vectors })
}

/// `‖H − H†‖ ≤ tol · ‖H‖` (Frobenius norms).
pub fn is_hermitian(h: &CMatrix, tol: f64) -> bool {
    (h - h.adjoint()).norm() <= tol * h.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::species::{FieldConfig, SpeciesRegistry};

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn spin_operators_satisfy_angular_momentum_algebra() {
        for two_s in 1..=7 {
            let [sx, sy, sz] = spin_operators(two_s);
            let i = Complex64::new(0.0, 1.0);
            assert!((commutator(&sx, &sy) - &sz * i).norm() < 1e-12);
            let s = two_s as f64 / 2.0;
            let s2 = &sx * &sx + &sy * &sy + &sz * &sz;
            let id = CMatrix::identity(two_s as usize + 1, two_s as usize + 1);
            assert!((s2 - id * Complex64::new(s * (s + 1.0), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn kramers_degeneracy_at_zero_field() {
        let reg = SpeciesRegistry::builtin();
        // only half-integer total spin (electron 1/2 plus integer I) is protected
        for sp in reg.species().iter().filter(|s| s.nuclear_spin.twice() % 2 == 0) {
            let h = build_hamiltonian(sp, &FieldConfig::new(0.0, 0.0, 0.0).unwrap()).unwrap();
            let lv = eigen_levels(&h).unwrap();
            let scale = lv.energies.iter().map(|e| e.abs()).fold(1.0, f64::max);
            let mut k = 0;
            while k < lv.energies.len() {
                assert!(k + 1 < lv.energies.len(), "{}", sp.name);
                assert!((lv.energies[k] - lv.energies[k + 1]).abs() < 1e-9 * scale, "{}", sp.name);
                let mut j = k + 2;
                while j < lv.energies.len() && (lv.energies[j] - lv.energies[k]).abs() < 1e-9 * scale {
                    j += 1;
                }
                k = j;
            }
        }
    }

    #[test]
    fn erbium_splitting_is_gamma_perp_times_field() {
        let reg = SpeciesRegistry::builtin();
        let er = reg.species_named("Er").unwrap();
        let b = 6.999e9 / 117.3e9;
        let h = build_hamiltonian(er, &FieldConfig::new(b, 20.0, 0.0).unwrap()).unwrap();
        let lv = eigen_levels(&h).unwrap();
        assert!(((lv.energies[1] - lv.energies[0]) - 6.999e9).abs() < 1e-3);
        assert!((b * 1e3 - 59.668).abs() < 1e-3);
    }

    #[test]
    fn dimension_matches_nuclear_multiplicity() {
        let reg = SpeciesRegistry::builtin();
        let nd = reg.species_named("143Nd").unwrap();
        let h = build_hamiltonian(nd, &FieldConfig::new(0.1, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(h.nrows(), 16);
        assert_eq!(nd.dimension(), 16);
    }

    #[test]
    fn missing_hyperfine_is_rejected() {
        let reg = SpeciesRegistry::builtin();
        let mut nd = reg.species_named("143Nd").unwrap().clone();
        nd.hyperfine = None;
        assert!(build_hamiltonian(&nd, &FieldConfig { b0: 0.1, phi_deg: 0.0, theta_c_deg: 0.0 }).is_err());
        assert!(build_hamiltonian(&nd, &FieldConfig { b0: -0.1, phi_deg: 0.0, theta_c_deg: 0.0 }).is_err());
    }
}
