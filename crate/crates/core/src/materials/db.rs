use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParticleSpec, SubstrateMaterial};
use crate::error::{Error, Result};

const DEFAULT_DB: &str = include_str!("../../data/materials.json");

/// Named substrates and particles. Keys are sorted so serialisation is
/// canonical.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDb {
    #[serde(default)]
    pub substrates: BTreeMap<String, SubstrateMaterial>,
    #[serde(default)]
    pub particles: BTreeMap<String, ParticleSpec>,
}

impl MaterialDb {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in &self.substrates {
            s.validate(&format!("substrates.{name}"))?;
        }
        for (name, p) in &self.particles {
            p.validate(&format!("particles.{name}"))?;
        }
        Ok(())
    }

    /// Parse and validate a database document. Blank input is an empty db.
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(MaterialDb::default());
        }
        let db: MaterialDb = serde_json::from_str(text).map_err(|e| Error::config(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        ))?;
        db.validate()?;
        Ok(db)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn substrate(&self, name: &str) -> Result<&SubstrateMaterial> {
        self.substrates
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn particle(&self, name: &str) -> Result<&ParticleSpec> {
        self.particles
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }
}

/// Built-in calibration database (InSb substrate, seven polar particles).
pub fn default_db() -> MaterialDb {
    MaterialDb::from_json(DEFAULT_DB).expect("bundled material database is valid")
}

pub fn load_material_db(path: impl AsRef<Path>) -> Result<MaterialDb> {
    MaterialDb::load(path)
}
