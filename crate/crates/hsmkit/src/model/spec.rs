use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tables::{check_schema_version, default_schema_version, validate_variables, VariableSpec, DEFAULT_CONDITION};

/// How a variable's eigenbasis relates to its slot's reference basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameSpec {
    /// The slot's own basis; projectors are diagonal indicators.
    Reference,
    /// `U = exp(−iH)` with a free Hermitian `H` (`N_s² − 1` parameters).
    RotatedFull,
    /// Real 2×2 rotation by angle `π·θ` (one parameter).
    RotatedPlanar,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub reference_variable: String,
    #[serde(default = "one")]
    pub multiplicity: usize,
}

fn one() -> usize {
    1
}

impl SlotSpec {
    pub fn new(reference_variable: impl Into<String>) -> Self {
        Self {
            reference_variable: reference_variable.into(),
            multiplicity: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub slot: usize,
    pub frame: FrameSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateField {
    Real,
    #[default]
    Complex,
}

fn default_conditions() -> Vec<String> {
    vec![DEFAULT_CONDITION.to_string()]
}

fn default_true() -> bool {
    true
}

fn default_name() -> String {
    "hsm".to_string()
}

/// Compatibility structure of an HSM model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    #[serde(default = "default_name")]
    pub name: String,
    pub variables: Vec<VariableSpec>,
    pub slots: Vec<SlotSpec>,
    pub assignment: BTreeMap<String, Assignment>,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<String>,
    #[serde(default = "default_true")]
    pub shared_rotations: bool,
    #[serde(default)]
    pub state_field: StateField,
}

impl ModelSpec {
    pub(crate) fn validate(&self) -> Result<()> {
        check_schema_version(&self.schema_version)?;
        validate_variables(&self.variables)?;
        if self.slots.is_empty() {
            return Err(Error::validation("a model needs at least one slot"));
        }
        if self.conditions.is_empty() {
            return Err(Error::validation("a model needs at least one condition"));
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if self.conditions[..i].contains(c) {
                return Err(Error::validation(format!("condition {c:?} is listed twice")));
            }
        }
        for name in self.assignment.keys() {
            if !self.variables.iter().any(|v| &v.name == name) {
                return Err(Error::validation(format!("assignment names unknown variable {name}")));
            }
        }
        for (s, slot) in self.slots.iter().enumerate() {
            if slot.multiplicity == 0 {
                return Err(Error::validation(format!("slot {s} has zero multiplicity")));
            }
            match self.assignment.get(&slot.reference_variable) {
                Some(Assignment {
                    slot: a,
                    frame: FrameSpec::Reference,
                }) if *a == s => {}
                _ => {
                    return Err(Error::validation(format!(
                        "slot {s}: reference variable {} must be assigned to slot {s} with a reference frame",
                        slot.reference_variable
                    )))
                }
            }
        }
        for v in &self.variables {
            let a = self
                .assignment
                .get(&v.name)
                .ok_or_else(|| Error::validation(format!("variable {} is not assigned to a slot", v.name)))?;
            if a.slot >= self.slots.len() {
                return Err(Error::validation(format!("variable {} is assigned to missing slot {}", v.name, a.slot)));
            }
            if a.frame == FrameSpec::Reference && self.slots[a.slot].reference_variable != v.name {
                return Err(Error::validation(format!(
                    "variable {} uses the reference frame of slot {} but is not that slot's reference variable",
                    v.name, a.slot
                )));
            }
        }
        Ok(())
    }
}
