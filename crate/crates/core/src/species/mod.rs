//! Spin-Hamiltonian parameters of paramagnetic species and the level
//! structure derived from them: energy levels, resonance fields and
//! rotation patterns.
//!
//! Energies are expressed in Hz (energy / h), fields in tesla and
//! gyromagnetic ratios in Hz/T throughout this module.

mod hamiltonian;
mod registry;
mod rotation;
mod transitions;

pub use hamiltonian::{build_hamiltonian, eigen_levels, is_hermitian, spin_operators, Levels};
pub use registry::SpeciesRegistry;
pub use rotation::{rotation_pattern, write_rotation_csv, RotationRow, RotationSubject};
pub use transitions::{transition_fields, SearchOptions, Transition};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::MU_B_OVER_H;
use crate::error::{check, invalid, Result};

/// Axial gyromagnetic tensor of an S4 site, diagonal in the (a, b, c) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GyroTensor {
    /// Along the crystal c axis, Hz/T.
    pub gamma_parallel: f64,
    /// In the a-b plane, Hz/T.
    pub gamma_perp: f64,
}

impl GyroTensor {
    pub fn new(gamma_parallel: f64, gamma_perp: f64) -> Result<Self> {
        check("gamma_parallel", gamma_parallel, gamma_parallel >= 0.0, "must be >= 0")?;
        check("gamma_perp", gamma_perp, gamma_perp >= 0.0, "must be >= 0")?;
        Ok(Self { gamma_parallel, gamma_perp })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.gamma_perp, self.gamma_perp, self.gamma_parallel))
    }
}

/// Axial hyperfine tensor, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineTensor {
    pub a_parallel: f64,
    pub a_perp: f64,
}

impl HyperfineTensor {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.a_perp, self.a_perp, self.a_parallel))
    }
}

/// Nuclear spin quantum number stored as `2I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NuclearSpin(u32);

impl NuclearSpin {
    pub const ZERO: NuclearSpin = NuclearSpin(0);

    pub fn from_twice(two_i: u32) -> Self {
        NuclearSpin(two_i)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Number of nuclear sublevels, `2I + 1`.
    pub fn multiplicity(self) -> usize {
        self.0 as usize + 1
    }

    /// Parses `"0"`, `"7/2"`, `"3.5"` style notation.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let twice = if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| invalid("nuclear_spin", s))?;
            match den.trim() {
                "2" => num,
                "1" => 2 * num,
                _ => return Err(invalid("nuclear_spin", format!("{s}: denominator must be 1 or 2"))),
            }
        } else {
            let v: f64 = s.parse().map_err(|_| invalid("nuclear_spin", s))?;
            let t = 2.0 * v;
            if v < 0.0 || (t - t.round()).abs() > 1e-9 {
                return Err(invalid("nuclear_spin", format!("{s}: not a non-negative half-integer")));
            }
            t.round() as u32
        };
        Ok(NuclearSpin(twice))
    }
}

impl std::fmt::Display for NuclearSpin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Effective spin-1/2 species, optionally carrying a nuclear spin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSpecies {
    pub name: String,
    pub nuclear_spin: NuclearSpin,
    pub gyro: GyroTensor,
    pub hyperfine: Option<HyperfineTensor>,
    /// Nuclear gyromagnetic ratio, Hz/T.
    pub gamma_nuclear: f64,
    /// Natural abundance, fraction in [0, 1].
    pub abundance: f64,
}

impl SpinSpecies {
    /// An isotope without nuclear spin.
    pub fn electronic(name: impl Into<String>, gyro: GyroTensor, abundance: f64) -> Self {
        SpinSpecies {
            name: name.into(),
            nuclear_spin: NuclearSpin::ZERO,
            gyro,
            hyperfine: None,
            gamma_nuclear: 0.0,
            abundance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check("gamma_parallel", self.gyro.gamma_parallel, self.gyro.gamma_parallel >= 0.0, "must be >= 0")?;
        check("gamma_perp", self.gyro.gamma_perp, self.gyro.gamma_perp >= 0.0, "must be >= 0")?;
        check("abundance", self.abundance, (0.0..=1.0).contains(&self.abundance), "must lie in [0, 1]")?;
        match (self.nuclear_spin.twice() > 0, self.hyperfine.is_some()) {
            (true, false) => Err(invalid("hyperfine", format!("{}: I > 0 requires a hyperfine tensor", self.name))),
            (false, true) => Err(invalid("hyperfine", format!("{}: hyperfine tensor given for I = 0", self.name))),
            _ => Ok(()),
        }
    }

    /// Dimension of the full electron-nuclear Hilbert space, `2(2I+1)`.
    pub fn dimension(&self) -> usize {
        2 * self.nuclear_spin.multiplicity()
    }
}

/// Orthorhombic Kramers doublet given by principal g-values and the polar
/// angles (degrees, relative to c and a) of its principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicDoublet {
    pub name: String,
    pub principal_g: [f64; 3],
    /// `(theta_k, phi_k)` in degrees.
    pub principal_directions: [(f64, f64); 3],
    /// Whether this doublet is the ground state of the ion.
    #[serde(default)]
    pub ground: bool,
}

/// Number of rotation-related sites generated by 90° turns about c.
pub const DOUBLET_SITES: usize = 4;

impl AnisotropicDoublet {
    pub fn principal_axes(&self) -> [Vector3<f64>; 3] {
        self.principal_directions.map(|(theta, phi)| {
            let (t, p) = (theta.to_radians(), phi.to_radians());
            Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
        })
    }

    /// Largest deviation from orthogonality between principal axes, degrees.
    pub fn orthogonality_defect_deg(&self) -> f64 {
        let ax = self.principal_axes();
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let angle = ax[i].dot(&ax[j]).clamp(-1.0, 1.0).acos().to_degrees();
                worst = worst.max((angle - 90.0).abs());
            }
        }
        worst
    }

    /// Nearest orthonormal frame to the tabulated axes (polar decomposition).
    ///
    /// The rounded table angles leave the axes a fraction of a degree off
    /// orthogonal. For a nearly isotropic doublet that defect alone would
    /// move the tensor eigenvalues by more than the g anisotropy itself.
    pub fn orthonormal_axes(&self) -> [Vector3<f64>; 3] {
        let ax = self.principal_axes();
        let m = Matrix3::from_columns(&ax);
        let svd = m.svd(true, true);
        let q = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
        [q.column(0).into_owned(), q.column(1).into_owned(), q.column(2).into_owned()]
    }

    /// Principal axes of rotation-related site `site` (turned by `site × 90°` about c).
    pub fn site_axes(&self, site: usize) -> [Vector3<f64>; 3] {
        let rot = c_rotation(site);
        self.orthonormal_axes().map(|n| rot * n)
    }

    /// Gyromagnetic tensor (Hz/T) of one rotation-related site.
    pub fn site_gyro_matrix(&self, site: usize) -> Matrix3<f64> {
        let axes = self.site_axes(site);
        let mut m = Matrix3::zeros();
        for (g, n) in self.principal_g.iter().zip(axes.iter()) {
            m += n * n.transpose() * (g * MU_B_OVER_H);
        }
        m
    }

    /// Effective g-factor `|g · b|` for field direction `b` on site `site`.
    pub fn effective_g(&self, site: usize, b: &Vector3<f64>) -> f64 {
        (self.site_gyro_matrix(site) * b.normalize()).norm() / MU_B_OVER_H
    }
}

fn c_rotation(site: usize) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), (site % DOUBLET_SITES) as f64 * std::f64::consts::FRAC_PI_2)
}

/// Static field: magnitude and orientation relative to the crystal axes.
///
/// The field lies in the sample plane at angle `phi` from the a axis. The
/// sample normal is tilted by `theta_c` from c, modelled as a rotation of
/// the sample plane about the b axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Tesla.
    pub b0: f64,
    pub phi_deg: f64,
    pub theta_c_deg: f64,
}

impl FieldConfig {
    pub fn new(b0: f64, phi_deg: f64, theta_c_deg: f64) -> Result<Self> {
        let f = FieldConfig { b0, phi_deg, theta_c_deg };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        check("b0", self.b0, self.b0 >= 0.0, "field magnitude must be >= 0")?;
        check("phi", self.phi_deg, true, "")?;
        check("theta_c", self.theta_c_deg, true, "")
    }

    pub fn direction(&self) -> Vector3<f64> {
        field_direction(self.phi_deg, self.theta_c_deg)
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.direction() * self.b0
    }

    /// In-plane unit vector perpendicular to the field.
    pub fn transverse_direction(&self) -> Vector3<f64> {
        field_direction(self.phi_deg + 90.0, self.theta_c_deg)
    }
}

pub fn field_direction(phi_deg: f64, theta_c_deg: f64) -> Vector3<f64> {
    let (p, t) = (phi_deg.to_radians(), theta_c_deg.to_radians());
    Vector3::new(p.cos() * t.cos(), p.sin(), -p.cos() * t.sin())
}

/// Anything whose spin Hamiltonian can be assembled.
pub trait SpinSystem: Sync {
    fn label(&self) -> String;
    /// Electron gyromagnetic tensor in the crystal frame, Hz/T.
    fn gyro_matrix(&self) -> Matrix3<f64>;
    fn nuclear_spin(&self) -> NuclearSpin;
    /// Hyperfine tensor in Hz, required when `I > 0`.
    fn hyperfine_matrix(&self) -> Option<Matrix3<f64>>;
    fn gamma_nuclear(&self) -> f64;

    fn dimension(&self) -> usize {
        2 * self.nuclear_spin().multiplicity()
    }
}

impl SpinSystem for SpinSpecies {
    fn label(&self) -> String {
        self.name.clone()
    }
    fn gyro_matrix(&self) -> Matrix3<f64> {
        self.gyro.matrix()
    }
    fn nuclear_spin(&self) -> NuclearSpin {
        self.nuclear_spin
    }
    fn hyperfine_matrix(&self) -> Option<Matrix3<f64>> {
        self.hyperfine.map(|h| h.matrix())
    }
    fn gamma_nuclear(&self) -> f64 {
        self.gamma_nuclear
    }
}

/// One of the four rotation-related sites of an [`AnisotropicDoublet`].
#[derive(Debug, Clone, Copy)]
pub struct DoubletSite<'a> {
    pub doublet: &'a AnisotropicDoublet,
    pub site: usize,
}

impl SpinSystem for DoubletSite<'_> {
    fn label(&self) -> String {
        format!("{} site {}", self.doublet.name, self.site)
    }
    fn gyro_matrix(&self) -> Matrix3<f64> {
        self.doublet.site_gyro_matrix(self.site)
    }
    fn nuclear_spin(&self) -> NuclearSpin {
        NuclearSpin::ZERO
    }
    fn hyperfine_matrix(&self) -> Option<Matrix3<f64>> {
        None
    }
    fn gamma_nuclear(&self) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nuclear_spin_parsing() {
        assert_eq!(NuclearSpin::parse("7/2").unwrap().twice(), 7);
        assert_eq!(NuclearSpin::parse("0").unwrap().twice(), 0);
        assert_eq!(NuclearSpin::parse("2.5").unwrap().twice(), 5);
        assert_eq!(NuclearSpin::parse("1/1").unwrap().twice(), 2);
        assert!(NuclearSpin::parse("0.3").is_err());
        assert!(NuclearSpin::parse("-1").is_err());
        assert_eq!(NuclearSpin::from_twice(7).to_string(), "7/2");
    }

    #[test]
    fn four_c_rotations_return_original_axes() {
        let reg = SpeciesRegistry::builtin();
        for d in reg.doublets() {
            let base = d.site_axes(0);
            let back = {
                let r = c_rotation(1);
                let mut ax = base;
                for _ in 0..4 {
                    ax = ax.map(|n| r * n);
                }
                ax
            };
            for (a, b) in base.iter().zip(back.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
            assert_eq!(d.site_gyro_matrix(4), d.site_gyro_matrix(0));
        }
    }

    #[test]
    fn tabulated_doublet_axes_are_orthogonal_within_two_degrees() {
        for d in SpeciesRegistry::builtin().doublets() {
            assert!(d.orthogonality_defect_deg() < 2.0, "{}: {}", d.name, d.orthogonality_defect_deg());
        }
    }

    #[test]
    fn orthonormalized_frame_stays_close_to_table() {
        for d in SpeciesRegistry::builtin().doublets() {
            let q = d.orthonormal_axes();
            for (a, b) in q.iter().zip(d.principal_axes().iter()) {
                assert!(a.dot(b).clamp(-1.0, 1.0).acos().to_degrees() < 1.0, "{}", d.name);
            }
            let m = Matrix3::from_columns(&q);
            assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-12);
            let eig = d.site_gyro_matrix(0).symmetric_eigen().eigenvalues / MU_B_OVER_H;
            let mut got: Vec<f64> = eig.iter().copied().collect();
            let mut want = d.principal_g.to_vec();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn field_direction_is_unit_and_in_plane_without_tilt() {
        let f = FieldConfig::new(0.1, 37.0, 0.0).unwrap();
        assert!((f.direction().norm() - 1.0).abs() < 1e-15);
        assert_eq!(f.direction().z, 0.0);
        assert!(f.direction().dot(&f.transverse_direction()).abs() < 1e-15);
        let tilted = FieldConfig::new(0.1, 37.0, 3.0).unwrap();
        assert!(tilted.direction().dot(&tilted.transverse_direction()).abs() < 1e-15);
    }

    #[test]
    fn rejects_inconsistent_species() {
        let mut s = SpinSpecies::electronic("x", GyroTensor::new(1.0, 1.0).unwrap(), 0.5);
        s.nuclear_spin = NuclearSpin::from_twice(1);
        assert!(s.validate().is_err());
        assert!(FieldConfig::new(-1.0, 0.0, 0.0).is_err());
        assert!(GyroTensor::new(-1.0, 0.0).is_err());
    }
}
