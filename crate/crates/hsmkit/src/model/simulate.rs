use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::HsmModel;
use crate::error::{Error, Result};
use crate::tables::{check_schema_version, default_schema_version, Table, TableCollection, DEFAULT_CONDITION};

fn default_condition() -> String {
    DEFAULT_CONDITION.to_string()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRow {
    #[serde(default = "default_condition")]
    pub condition: String,
    pub context: Vec<String>,
    pub n: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pooled_orders: bool,
}

impl DesignRow {
    pub fn new(condition: &str, context: &[&str], n: u64) -> Self {
        Self {
            condition: condition.to_string(),
            context: context.iter().map(|s| s.to_string()).collect(),
            n,
            pooled_orders: false,
        }
    }
}

/// Which tables to simulate and how many observations each gets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Design {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub rows: Vec<DesignRow>,
}

impl Design {
    pub fn new(rows: Vec<DesignRow>) -> Self {
        Self {
            schema_version: default_schema_version(),
            rows,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_schema_version(&self.schema_version)?;
        if let Some((i, _)) = self.rows.iter().enumerate().find(|(_, r)| r.n == 0) {
            return Err(Error::validation(format!("design row {i} asks for zero observations")));
        }
        Ok(())
    }
}

/// One multinomial draw by successive binomials.
pub(crate) fn multinomial(n: u64, probs: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; probs.len()];
    let mut remaining = n;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = remaining as f64;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng);
        out[i] = k as f64;
        remaining -= k;
        mass -= p;
    }
    out
}

impl HsmModel {
    /// Draws one multinomial table per design row from the model's predictions.
    ///
    /// Rows are drawn in order from a single `ChaCha8Rng::seed_from_u64(seed)`.
    pub fn simulate_counts(&self, params: &[f64], design: &Design, seed: u64) -> Result<TableCollection> {
        design.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tables = Vec::with_capacity(design.rows.len());
        for row in &design.rows {
            let probs = self.predict(params, &row.condition, &row.context, row.pooled_orders)?;
            tables.push(Table {
                condition: row.condition.clone(),
                context: row.context.clone(),
                counts: multinomial(row.n, &probs, &mut rng),
                pooled_orders: row.pooled_orders,
            });
        }
        TableCollection::new(self.spec.variables.clone(), self.spec.conditions.clone(), tables)
    }
}
