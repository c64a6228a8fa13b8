//! Structure files: TOML frames with polynomial literals in `z1, ..., zn`.

use std::path::Path;

use rank2sr_core::structures::SRStructure;
use rank2sr_core::PolyVecField;
use serde::Deserialize;

use crate::error::{CliError, Result};

const BUILTIN: [(&str, &str); 9] = [
    ("heisenberg", include_str!("../structures/heisenberg.toml")),
    ("martinet", include_str!("../structures/martinet.toml")),
    ("engel", include_str!("../structures/engel.toml")),
    ("free2", include_str!("../structures/free2.toml")),
    ("free3", include_str!("../structures/free3.toml")),
    ("free4", include_str!("../structures/free4.toml")),
    ("martinet-cubic", include_str!("../structures/martinet-cubic.toml")),
    ("engel-perturbed", include_str!("../structures/engel-perturbed.toml")),
    ("free4-perturbed", include_str!("../structures/free4-perturbed.toml")),
];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub weights: Option<Vec<u32>>,
    pub frame: Vec<Vec<String>>,
}

impl StructureFile {
    pub fn build(&self) -> Result<SRStructure> {
        let frame = self
            .frame
            .iter()
            .map(|f| PolyVecField::from_literals(f))
            .collect::<rank2sr_core::Result<Vec<_>>>()
            .map_err(|e| CliError::Config(format!("structure `{}`: {e}", self.name)))?;
        SRStructure::new(self.name.clone(), frame, self.weights.clone())
            .map_err(|e| CliError::Config(format!("structure `{}`: {e}", self.name)))
    }
}

pub fn parse_structure_file(src: &str) -> Result<StructureFile> {
    toml::from_str(src).map_err(|e| CliError::Config(format!("structure file: {e}")))
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn builtin_file(name: &str) -> Option<StructureFile> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, src)| parse_structure_file(src).expect("shipped structure files parse"))
}

pub fn builtin(name: &str) -> Result<SRStructure> {
    builtin_file(name).ok_or_else(|| CliError::Config(format!("unknown builtin structure `{name}`")))?.build()
}

pub fn load_file(path: &Path) -> Result<SRStructure> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("structure file {}: {e}", path.display())))?;
    parse_structure_file(&src)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_files_match_core_builtins() {
        for name in builtin_names() {
            let s = builtin(name).unwrap();
            let c = SRStructure::builtin(name).unwrap();
            assert_eq!(s.frame(), c.frame(), "{name}");
            assert_eq!(s.weights(), c.weights(), "{name}");
        }
        assert_eq!(builtin_names().count(), SRStructure::BUILTIN_NAMES.len());
    }

    #[test]
    fn bad_files_are_config_errors() {
        assert!(matches!(parse_structure_file("name = 3"), Err(CliError::Config(_))));
        let f = parse_structure_file("name = \"x\"\nframe = [[\"1\", \"z9\"], [\"0\", \"1\"]]").unwrap();
        assert!(matches!(f.build(), Err(CliError::Config(_))));
        assert!(matches!(builtin("nope"), Err(CliError::Config(_))));
    }
}
