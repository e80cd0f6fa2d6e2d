use std::path::Path;

use serde::Deserialize;

use super::{AnisotropicDoublet, GyroTensor, HyperfineTensor, NuclearSpin, SpinSpecies};
use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../../data/species.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    species: Vec<SpeciesEntry>,
    #[serde(default)]
    doublet: Vec<DoubletEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesEntry {
    name: String,
    nuclear_spin: String,
    abundance: f64,
    gamma_parallel_ghz_per_t: f64,
    gamma_perp_ghz_per_t: f64,
    a_parallel_mhz: Option<f64>,
    a_perp_mhz: Option<f64>,
    #[serde(default)]
    gamma_nuclear_mhz_per_t: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DoubletEntry {
    name: String,
    #[serde(default)]
    ground: bool,
    principal_g: [f64; 3],
    principal_directions: [[f64; 2]; 3],
}

/// Collection of species and Fe-type doublets, loadable from TOML.
#[derive(Debug, Clone, Default)]
pub struct SpeciesRegistry {
    species: Vec<SpinSpecies>,
    doublets: Vec<AnisotropicDoublet>,
}

impl SpeciesRegistry {
    /// The parameter table shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN).expect("bundled species table parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut species = Vec::with_capacity(file.species.len());
        for e in file.species {
            let hyperfine = match (e.a_parallel_mhz, e.a_perp_mhz) {
                (Some(a), Some(b)) => Some(HyperfineTensor { a_parallel: a * 1e6, a_perp: b * 1e6 }),
                (None, None) => None,
                _ => return Err(Error::Config(format!("{}: both hyperfine components required", e.name))),
            };
            let s = SpinSpecies {
                gyro: GyroTensor::new(e.gamma_parallel_ghz_per_t * 1e9, e.gamma_perp_ghz_per_t * 1e9)?,
                nuclear_spin: NuclearSpin::parse(&e.nuclear_spin)?,
                hyperfine,
                gamma_nuclear: e.gamma_nuclear_mhz_per_t * 1e6,
                abundance: e.abundance,
                name: e.name,
            };
            s.validate()?;
            species.push(s);
        }
        let doublets = file
            .doublet
            .into_iter()
            .map(|d| AnisotropicDoublet {
                name: d.name,
                principal_g: d.principal_g,
                principal_directions: d.principal_directions.map(|[t, p]| (t, p)),
                ground: d.ground,
            })
            .collect();
        Ok(SpeciesRegistry { species, doublets })
    }

    pub fn species(&self) -> &[SpinSpecies] {
        &self.species
    }

    pub fn doublets(&self) -> &[AnisotropicDoublet] {
        &self.doublets
    }

    pub fn species_named(&self, name: &str) -> Option<&SpinSpecies> {
        self.species.iter().find(|s| s.name == name)
    }

    pub fn doublet_named(&self, name: &str) -> Option<&AnisotropicDoublet> {
        self.doublets.iter().find(|d| d.name == name)
    }

    pub fn ground_doublet(&self) -> Option<&AnisotropicDoublet> {
        self.doublets.iter().find(|d| d.ground)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_is_complete() {
        let reg = SpeciesRegistry::builtin();
        assert_eq!(reg.species().len(), 8);
        assert_eq!(reg.doublets().len(), 3);
        assert_eq!(reg.ground_doublet().unwrap().name, "Fe-upper");
        let er167 = reg.species_named("167Er").unwrap();
        assert_eq!(er167.nuclear_spin.twice(), 7);
        assert_eq!(er167.hyperfine.unwrap().a_perp, 873e6);
        assert_eq!(reg.species_named("Er").unwrap().gyro.gamma_perp, 117.3e9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = "[[species]]\nname='x'\nnuclear_spin='0'\nabundance=1.0\ngamma_parallel_ghz_per_t=1\ngamma_perp_ghz_per_t=1\ncolour='red'\n";
        assert!(SpeciesRegistry::from_toml_str(bad).is_err());
    }

    #[test]
    fn half_specified_hyperfine_is_rejected() {
        let bad = "[[species]]\nname='x'\nnuclear_spin='1/2'\nabundance=1.0\ngamma_parallel_ghz_per_t=1\ngamma_perp_ghz_per_t=1\na_perp_mhz=3\n";
        assert!(SpeciesRegistry::from_toml_str(bad).is_err());
    }
}
