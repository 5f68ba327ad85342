//! Categorical variable schemas.
//!
//! A [`Schema`] is an ordered list of named categorical variables, each with a
//! fixed, ordered set of level codes. Schema order is canonical: datasets,
//! CPTs, and model strings all index variables through it regardless of how a
//! source file happens to order its columns.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One categorical variable: a name and its ordered level codes.
///
/// Level codes are case-sensitive exact strings and must be distinct. A
/// variable needs at least two levels to carry any information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    name: String,
    levels: Vec<String>,
}

impl VariableSpec {
    pub fn new(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        let name = name.into();
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        if name.is_empty() {
            return Err(Error::SchemaMismatch("variable name is empty".into()));
        }
        if levels.len() < 2 {
            return Err(Error::SchemaMismatch(format!(
                "variable {name:?} needs at least 2 levels, got {}",
                levels.len()
            )));
        }
        for (i, level) in levels.iter().enumerate() {
            if levels[..i].contains(level) {
                return Err(Error::SchemaMismatch(format!(
                    "variable {name:?} has duplicate level {level:?}"
                )));
            }
        }
        Ok(VariableSpec { name, levels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    /// Number of levels (the cardinality r).
    pub fn cardinality(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, code: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == code)
    }
}

/// An ordered collection of variables with distinct names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    variables: Vec<VariableSpec>,
    by_name: HashMap<String, usize>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::SchemaMismatch("schema has no variables".into()));
        }
        let mut by_name = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            if by_name.insert(v.name.clone(), i).is_some() {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate variable name {:?}",
                    v.name
                )));
            }
        }
        Ok(Schema { variables, by_name })
    }

    /// The ten three-level facade variables and their coding.
    ///
    /// TR and MD grade the traditional and modern feeling (strong / medium /
    /// none), CE the stage of cultural evolution (beginning / evolving /
    /// complete), B, T, C the strength of Buddhist, Taoist, and Confucian
    /// decoration (strong / none / weak), and DC, DO, PL, RF classify the
    /// decoration, door, pillar, and roof styles (French / Chinese / hybrid).
    pub fn facade() -> Schema {
        let spec =
            |name: &str, levels: [&str; 3]| VariableSpec::new(name, levels).expect("static schema");
        Schema::new(vec![
            spec("TR", ["TR_S", "TR_M", "TR_N"]),
            spec("MD", ["MD_S", "MD_M", "MD_N"]),
            spec("CE", ["C_B", "C_E", "C_C"]),
            spec("B", ["B_S", "B_N", "B_W"]),
            spec("T", ["T_S", "T_N", "T_W"]),
            spec("C", ["C_S", "C_N", "C_W"]),
            spec("DC", ["DC_FR", "DC_CN", "DC_HY"]),
            spec("DO", ["DO_FR", "DO_CN", "DO_HY"]),
            spec("PL", ["PL_FR", "PL_CN", "PL_HY"]),
            spec("RF", ["RF_FR", "RF_CN", "RF_HY"]),
        ])
        .expect("static schema")
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &VariableSpec {
        &self.variables[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Product of all cardinalities: the size of the joint state space.
    pub fn joint_state_count(&self) -> usize {
        self.variables
            .iter()
            .fold(1usize, |acc, v| acc.saturating_mul(v.cardinality()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SchemaFile {
            variables: self.variables.clone(),
        })
        .expect("schema serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Schema> {
        let file: SchemaFile = serde_json::from_str(text)?;
        for v in &file.variables {
            // Re-run constructor validation on externally supplied specs.
            VariableSpec::new(v.name.clone(), v.levels.clone())?;
        }
        Schema::new(file.variables)
    }
}

/// On-disk JSON form: `{"variables": [{"name": ..., "levels": [...]}, ...]}`.
#[derive(Serialize, Deserialize)]
struct SchemaFile {
    variables: Vec<VariableSpec>,
}
