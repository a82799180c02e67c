//! Classical comparison models: saturated, full joint distribution, and a
//! small Bayes net for four binary attributes.

mod bayesnet;
mod joint;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{g_squared, FitResult};
use crate::tables::{cell_index, cell_values, TableCollection, VariableSpec};

pub use bayesnet::{bayesnet_fit, bayesnet_predict, BayesNetFit, BayesNetPsa, PSA_VARIABLES};
pub use joint::{joint_fit, joint_predict, JointFit, JointModel};

/// Marginal over `context` of a joint table on `variables` (lexicographic,
/// first variable slowest). Cells follow the context's order.
pub(crate) fn marginalize<S: AsRef<str>>(variables: &[VariableSpec], joint: &[f64], context: &[S]) -> Result<Vec<f64>> {
    if context.is_empty() {
        return Err(Error::validation("a context needs at least one variable"));
    }
    let cards: Vec<usize> = variables.iter().map(VariableSpec::cardinality).collect();
    let mut positions = Vec::with_capacity(context.len());
    for (i, name) in context.iter().enumerate() {
        let name = name.as_ref();
        let pos = variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::validation(format!("unknown variable {name}")))?;
        if positions.contains(&pos) {
            return Err(Error::validation(format!("variable {} appears twice in the context", context[i].as_ref())));
        }
        positions.push(pos);
    }
    let ctx_cards: Vec<usize> = positions.iter().map(|&p| cards[p]).collect();
    let mut out = vec![0.0; ctx_cards.iter().product()];
    let mut picked = vec![0; positions.len()];
    for (j, &p) in joint.iter().enumerate() {
        let values = cell_values(&cards, j);
        for (k, &pos) in positions.iter().enumerate() {
            picked[k] = values[pos];
        }
        out[cell_index(&ctx_cards, &picked)] += p;
    }
    Ok(out)
}

/// Per-table relative frequencies, the maximum-likelihood saturated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturatedModel {
    pub tables: Vec<Vec<f64>>,
}

/// Fits the saturated model. `params` in the result are every cell's relative
/// frequency, table by table; `n_params` counts the free ones.
pub fn saturated_fit(tables: &TableCollection) -> Result<(SaturatedModel, FitResult)> {
    tables.validate()?;
    if tables.tables.is_empty() {
        return Err(Error::validation("the saturated model needs at least one table"));
    }
    for (i, t) in tables.tables.iter().enumerate() {
        if !(t.total() > 0.0) {
            return Err(Error::validation(format!("table {i} ({}) has no observations", t.context_key())));
        }
    }
    let freqs: Vec<Vec<f64>> = tables.tables.iter().map(|t| t.frequencies()).collect();
    let g2 = g_squared(&freqs, &tables.counts())?;
    let n_params = tables.tables.iter().map(|t| t.counts.len() - 1).sum();
    let fit = FitResult::new(freqs.concat(), g2, n_params, tables.total_count(), 0, vec![g2]);
    Ok((SaturatedModel { tables: freqs }, fit))
}

/// `Σ (cells − 1) − model_params` for a design given as per-table variable
/// cardinalities. Zero or negative values mean the design cannot test the model.
pub fn df_for_design(design: &[Vec<usize>], model_params: usize) -> i64 {
    let saturated: usize = design.iter().map(|cards| cards.iter().product::<usize>() - 1).sum();
    saturated as i64 - model_params as i64
}

/// Cardinalities of each table of a collection, for [`df_for_design`].
pub fn design_of(tables: &TableCollection) -> Result<Vec<Vec<usize>>> {
    tables.tables.iter().map(|t| tables.cardinalities(&t.context)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::artificial_tables;
    use crate::tables::Table;
    use approx::assert_abs_diff_eq;

    #[test]
    fn saturated_counts() {
        let (_, fit) = saturated_fit(&artificial_tables()).unwrap();
        assert_eq!(fit.n_params, 24);
        let one = TableCollection::new(
            vec![VariableSpec::binary("A"), VariableSpec::binary("B")],
            vec!["default".into()],
            vec![Table::new("default", &["A", "B"], vec![25.0; 4])],
        )
        .unwrap();
        let (model, fit) = saturated_fit(&one).unwrap();
        assert_eq!(model.tables[0], vec![0.25; 4]);
        assert_abs_diff_eq!(fit.g2, 277.2589, epsilon = 1e-4);
    }

    #[test]
    fn saturated_zero_cells_and_errors() {
        let vars = vec![VariableSpec::binary("A")];
        let c = TableCollection::new(vars.clone(), vec!["default".into()], vec![Table::new("default", &["A"], vec![0.0, 10.0])]).unwrap();
        assert_eq!(saturated_fit(&c).unwrap().1.g2, 0.0);
        let empty = TableCollection::new(vars.clone(), vec!["default".into()], vec![]).unwrap();
        assert!(saturated_fit(&empty).is_err());
        let zero = TableCollection::new(vars, vec!["default".into()], vec![Table::new("default", &["A"], vec![0.0, 0.0])]).unwrap();
        assert!(saturated_fit(&zero).is_err());
    }

    #[test]
    fn degrees_of_freedom() {
        assert_eq!(df_for_design(&design_of(&artificial_tables()).unwrap(), 15), 9);
        assert_eq!(df_for_design(&[vec![2], vec![2], vec![2, 2]], 3), 2);
        assert_eq!(df_for_design(&[vec![9, 9], vec![9, 9]], 80), 80);
        assert_eq!(df_for_design(&vec![vec![2, 2]; 4], 15), -3);
    }

    #[test]
    fn marginalize_errors() {
        let vars = vec![VariableSpec::binary("A"), VariableSpec::binary("B")];
        let joint = [0.25; 4];
        assert!(marginalize(&vars, &joint, &["C"]).is_err());
        assert!(marginalize(&vars, &joint, &["A", "A"]).is_err());
        assert!(marginalize::<&str>(&vars, &joint, &[]).is_err());
        assert_eq!(marginalize(&vars, &[0.1, 0.2, 0.3, 0.4], &["B", "A"]).unwrap(), vec![0.1, 0.3, 0.2, 0.4]);
    }
}
