//! Contingency tables gathered under measurement contexts.
//!
//! A table's cells are ordered lexicographically over its context, with the
//! first-measured variable varying slowest and value index 0 being the first
//! listed label. For a binary pair with labels `[yes, no]` that gives
//! `YY, YN, NY, NN`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current major.minor of every file format this crate writes.
pub const SCHEMA_VERSION: &str = "1.0";

pub(crate) fn default_schema_version() -> String {
    SCHEMA_VERSION.to_string()
}

/// Accepts any `1.x` version string.
pub(crate) fn check_schema_version(version: &str) -> Result<()> {
    let major = version.split('.').next().unwrap_or("");
    if major == "1" {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "unsupported schema_version {version:?} (this build reads major version 1)"
        )))
    }
}

pub const DEFAULT_CONDITION: &str = "default";

pub(crate) fn default_conditions() -> Vec<String> {
    vec![DEFAULT_CONDITION.to_string()]
}

fn default_condition() -> String {
    DEFAULT_CONDITION.to_string()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub values: Vec<String>,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, values: &[&str]) -> Self {
        Self {
            name: name.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    /// A yes/no variable, yes first.
    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, &["yes", "no"])
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }
}

/// Checks names are unique and every variable has at least two values.
pub(crate) fn validate_variables(variables: &[VariableSpec]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::new();
    for (i, v) in variables.iter().enumerate() {
        if v.name.is_empty() {
            return Err(Error::validation(format!("variable {i} has an empty name")));
        }
        if v.values.len() < 2 {
            return Err(Error::validation(format!("variable {} needs at least two values", v.name)));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &v.values {
            if !seen.insert(label) {
                return Err(Error::validation(format!("variable {} repeats value {label:?}", v.name)));
            }
        }
        if index.insert(v.name.clone(), i).is_some() {
            return Err(Error::validation(format!("variable {} is declared twice", v.name)));
        }
    }
    Ok(index)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    #[serde(default = "default_condition")]
    pub condition: String,
    pub context: Vec<String>,
    /// Nonnegative cell counts. Fractional counts are allowed so that published
    /// relative frequencies can be stored exactly.
    pub counts: Vec<f64>,
    /// Set when the counts pool every presentation order of the context; the
    /// cells are still labelled in the order given by `context`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pooled_orders: bool,
}

impl Table {
    pub fn new(condition: impl Into<String>, context: &[&str], counts: Vec<f64>) -> Self {
        Self {
            condition: condition.into(),
            context: context.iter().map(|s| s.to_string()).collect(),
            counts,
            pooled_orders: false,
        }
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total();
        self.counts.iter().map(|c| c / total).collect()
    }

    /// `"A,H"` style name of the context.
    pub fn context_key(&self) -> String {
        self.context.join(",")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableCollection {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub variables: Vec<VariableSpec>,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<String>,
    pub tables: Vec<Table>,
}

impl TableCollection {
    pub fn new(variables: Vec<VariableSpec>, conditions: Vec<String>, tables: Vec<Table>) -> Result<Self> {
        let c = Self {
            schema_version: SCHEMA_VERSION.to_string(),
            variables,
            conditions,
            tables,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_schema_version(&self.schema_version)?;
        validate_variables(&self.variables)?;
        if self.conditions.is_empty() {
            return Err(Error::validation("at least one condition is required"));
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if self.conditions[..i].contains(c) {
                return Err(Error::validation(format!("condition {c:?} is listed twice")));
            }
        }
        for (t, table) in self.tables.iter().enumerate() {
            let at = || format!("table {t} ({}, context {})", table.condition, table.context_key());
            if !self.conditions.contains(&table.condition) {
                return Err(Error::validation(format!("{}: unknown condition", at())));
            }
            if table.context.is_empty() {
                return Err(Error::validation(format!("{}: empty context", at())));
            }
            let cards = self
                .cardinalities(&table.context)
                .map_err(|e| Error::validation(format!("{}: {e}", at())))?;
            let cells: usize = cards.iter().product();
            if table.counts.len() != cells {
                return Err(Error::validation(format!(
                    "{}: expected {cells} counts, found {}",
                    at(),
                    table.counts.len()
                )));
            }
            if let Some(bad) = table.counts.iter().find(|c| !c.is_finite() || **c < 0.0) {
                return Err(Error::validation(format!("{}: count {bad} is not a nonnegative number", at())));
            }
        }
        Ok(())
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Value counts of the named variables; errors on unknown or repeated names.
    pub fn cardinalities(&self, context: &[String]) -> Result<Vec<usize>> {
        context_cardinalities(&self.variables, context)
    }

    /// Cell labels of a table in cell order, e.g. `YY, YN, NY, NN`.
    pub fn cell_labels(&self, table: &Table) -> Result<Vec<String>> {
        cell_labels(&self.variables, &table.context)
    }

    pub fn total_count(&self) -> f64 {
        self.tables.iter().map(Table::total).sum()
    }

    /// Tables restricted to the given conditions and contexts (each context as `"A,H"`).
    pub fn subset(&self, contexts: &[&str]) -> Self {
        Self {
            tables: self
                .tables
                .iter()
                .filter(|t| contexts.contains(&t.context_key().as_str()))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    pub fn counts(&self) -> Vec<&[f64]> {
        self.tables.iter().map(|t| t.counts.as_slice()).collect()
    }
}

pub(crate) fn context_cardinalities(variables: &[VariableSpec], context: &[String]) -> Result<Vec<usize>> {
    let mut cards = Vec::with_capacity(context.len());
    for (i, name) in context.iter().enumerate() {
        if context[..i].contains(name) {
            return Err(Error::validation(format!("variable {name} appears twice in the context")));
        }
        let v = variables
            .iter()
            .find(|v| &v.name == name)
            .ok_or_else(|| Error::validation(format!("unknown variable {name}")))?;
        cards.push(v.cardinality());
    }
    Ok(cards)
}

/// Short labels for a variable's values: upper-cased first characters when
/// those are distinct, otherwise the full labels.
fn short_labels(v: &VariableSpec) -> Vec<String> {
    let firsts: Vec<String> = v
        .values
        .iter()
        .map(|l| l.chars().next().map(|c| c.to_uppercase().collect()).unwrap_or_default())
        .collect();
    let mut sorted = firsts.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() == firsts.len() && firsts.iter().all(|f| !f.is_empty()) {
        firsts
    } else {
        v.values.clone()
    }
}

pub(crate) fn cell_labels(variables: &[VariableSpec], context: &[String]) -> Result<Vec<String>> {
    context_cardinalities(variables, context)?;
    let per_var: Vec<Vec<String>> = context
        .iter()
        .map(|n| short_labels(variables.iter().find(|v| &v.name == n).expect("checked above")))
        .collect();
    let compact = per_var.iter().all(|labels| labels.iter().all(|l| l.chars().count() == 1));
    let sep = if compact { "" } else { "|" };
    let mut out = vec![String::new()];
    for (k, labels) in per_var.iter().enumerate() {
        out = out
            .iter()
            .flat_map(|prefix| {
                labels.iter().map(move |l| {
                    if k == 0 {
                        l.clone()
                    } else {
                        format!("{prefix}{sep}{l}")
                    }
                })
            })
            .collect();
    }
    Ok(out)
}

/// Index of the cell for outcome `values` (one value index per context variable).
pub fn cell_index(cards: &[usize], values: &[usize]) -> usize {
    cards.iter().zip(values).fold(0, |acc, (&n, &v)| acc * n + v)
}

/// Inverse of [`cell_index`].
pub fn cell_values(cards: &[usize], mut index: usize) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for k in (0..cards.len()).rev() {
        out[k] = index % cards[k];
        index /= cards[k];
    }
    out
}
