//! Data-driven robot catalog: one TOML document per robot.

use std::collections::BTreeMap;
use std::path::Path;

use super::RobotModel;
use crate::error::{Error, Result};
use crate::scalar::Real;

const BUILTIN: [(&str, &str); 4] = [
    ("planar_2r", include_str!("../../robots/planar_2r.toml")),
    ("small", include_str!("../../robots/small.toml")),
    ("medium", include_str!("../../robots/medium.toml")),
    ("large", include_str!("../../robots/large.toml")),
];

/// Parse and validate a single robot document.
pub fn parse_robot<T: Real>(text: &str) -> Result<RobotModel<T>> {
    let model: RobotModel<T> = toml::from_str(text).map_err(|e| Error::Catalog(e.message().to_string()))?;
    model
        .validate()
        .map_err(|e| Error::Catalog(format!("robot `{}`: {e}", model.name)))?;
    Ok(model)
}

/// Serialize a robot back into the catalog document format.
pub fn robot_to_toml<T: Real>(model: &RobotModel<T>) -> Result<String> {
    toml::to_string(model).map_err(|e| Error::Catalog(e.to_string()))
}

#[derive(Debug, Clone, Default)]
pub struct Catalog<T: Real = f64> {
    robots: BTreeMap<String, RobotModel<T>>,
}

impl<T: Real> Catalog<T> {
    /// The robots shipped with the crate.
    pub fn builtin() -> Self {
        let mut cat = Self::default();
        for (file, text) in BUILTIN {
            let model = parse_robot(text).unwrap_or_else(|e| panic!("builtin robot {file}: {e}"));
            cat.insert(model);
        }
        cat
    }

    /// Every `*.toml` file in `dir`, in file name order. A robot whose name
    /// repeats a previous one replaces it.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut cat = Self::default();
        cat.extend_from_dir(dir)?;
        Ok(cat)
    }

    pub fn extend_from_dir(&mut self, dir: &Path) -> Result<()> {
        let mut files: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        for path in files {
            let text = std::fs::read_to_string(&path)?;
            let model = parse_robot(&text)
                .map_err(|e| Error::Catalog(format!("{}: {e}", path.display())))?;
            self.insert(model);
        }
        Ok(())
    }

    pub fn insert(&mut self, model: RobotModel<T>) {
        self.robots.insert(model.name.clone(), model);
    }

    pub fn get(&self, name: &str) -> Option<&RobotModel<T>> {
        self.robots.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&RobotModel<T>> {
        self.get(name)
            .ok_or_else(|| Error::Catalog(format!("unknown robot `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.robots.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RobotModel<T>> {
        self.robots.values()
    }
}
