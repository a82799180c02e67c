//! Fit reports and the workflows behind the command-line tool: fitting any
//! model to a collection, comparing fits, predicting new contexts and fitting
//! many individuals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bayesnet_fit, bayesnet_predict, joint_fit, joint_predict, saturated_fit, BayesNetPsa, JointModel};
use crate::diagnostics::{marginal_invariance_report, order_effect_report, DiagnosticReport};
use crate::error::{Error, Result};
use crate::estimation::{bic, FitResult, OptimizerConfig};
use crate::model::{HsmModel, ModelSpec};
use crate::tables::{cell_labels, check_schema_version, default_schema_version, Table, TableCollection, VariableSpec};

/// Version of this library, recorded in every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Which model to fit.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelChoice {
    Hsm(ModelSpec),
    Joint,
    Saturated,
    BayesnetPsa,
}

impl ModelChoice {
    /// `"joint"`, `"saturated"` or `"bayesnet-psa"`; anything else is `None`.
    pub fn baseline(name: &str) -> Option<Self> {
        match name {
            "joint" => Some(Self::Joint),
            "saturated" => Some(Self::Saturated),
            "bayesnet-psa" => Some(Self::BayesnetPsa),
            _ => None,
        }
    }

    pub fn id(&self) -> String {
        match self {
            Self::Hsm(spec) => spec.name.clone(),
            Self::Joint => "joint".into(),
            Self::Saturated => "saturated".into(),
            Self::BayesnetPsa => "bayesnet-psa".into(),
        }
    }
}

/// The fitted model, enough to predict tables without refitting. Parameters
/// live in the report's [`FitResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Hsm { spec: ModelSpec },
    /// One joint distribution per condition, in condition order.
    Joint { models: Vec<JointModel> },
    /// Predicts only the tables it was fitted to.
    Saturated,
    BayesnetPsa { model: BayesNetPsa },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedTable {
    pub condition: String,
    pub context: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pooled_orders: bool,
    pub cell_labels: Vec<String>,
    /// Observed counts.
    pub observed: Vec<f64>,
    /// Predicted cell probabilities.
    pub predicted: Vec<f64>,
}

impl PredictedTable {
    pub fn context_key(&self) -> String {
        self.context.join(",")
    }

    pub fn observed_frequencies(&self) -> Vec<f64> {
        let total: f64 = self.observed.iter().sum();
        self.observed.iter().map(|c| c / total).collect()
    }
}

/// Everything needed to reproduce, inspect and reuse a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub tool_version: String,
    pub model_id: String,
    pub variables: Vec<VariableSpec>,
    pub conditions: Vec<String>,
    pub fit: FitResult,
    pub model: FittedModel,
    pub tables: Vec<PredictedTable>,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticReport>,
    pub config: OptimizerConfig,
    pub seed: u64,
}

fn predicted_tables(tables: &TableCollection, predicted: Vec<Vec<f64>>) -> Result<Vec<PredictedTable>> {
    tables
        .tables
        .iter()
        .zip(predicted)
        .map(|(t, p)| {
            Ok(PredictedTable {
                condition: t.condition.clone(),
                context: t.context.clone(),
                pooled_orders: t.pooled_orders,
                cell_labels: tables.cell_labels(t)?,
                observed: t.counts.clone(),
                predicted: p,
            })
        })
        .collect()
}

/// Order-effect and marginal-invariance checks of the data, one per variable.
pub fn data_diagnostics(tables: &TableCollection) -> Result<Vec<DiagnosticReport>> {
    let mut out = vec![order_effect_report(tables)?];
    for v in &tables.variables {
        out.push(marginal_invariance_report(tables, &v.name)?);
    }
    Ok(out)
}

/// Fits `choice` to `tables` and assembles the report, with the data
/// diagnostics attached.
pub fn fit_report(tables: &TableCollection, choice: &ModelChoice, config: &OptimizerConfig) -> Result<FitReport> {
    tables.validate()?;
    config.validate()?;
    let (fit, model, predicted) = match choice {
        ModelChoice::Hsm(spec) => {
            let hsm = HsmModel::new(spec.clone())?;
            let fit = hsm.fit(tables, config)?;
            let predicted = hsm.predict_collection(&fit.params, tables)?;
            (fit, FittedModel::Hsm { spec: spec.clone() }, predicted)
        }
        ModelChoice::Joint => {
            let jf = joint_fit(tables, config)?;
            let predicted = tables
                .tables
                .iter()
                .map(|t| {
                    let c = condition_position(&tables.conditions, &t.condition)?;
                    joint_predict(&jf.models[c], &t.context)
                })
                .collect::<Result<_>>()?;
            (jf.fit, FittedModel::Joint { models: jf.models }, predicted)
        }
        ModelChoice::Saturated => {
            let (sat, fit) = saturated_fit(tables)?;
            (fit, FittedModel::Saturated, sat.tables)
        }
        ModelChoice::BayesnetPsa => {
            let bf = bayesnet_fit(tables, config)?;
            let predicted = tables
                .tables
                .iter()
                .map(|t| bayesnet_predict(&bf.model, &t.condition, &t.context))
                .collect::<Result<_>>()?;
            (bf.fit, FittedModel::BayesnetPsa { model: bf.model }, predicted)
        }
    };
    Ok(FitReport {
        schema_version: default_schema_version(),
        tool_version: TOOL_VERSION.to_string(),
        model_id: choice.id(),
        variables: tables.variables.clone(),
        conditions: tables.conditions.clone(),
        fit,
        model,
        tables: predicted_tables(tables, predicted)?,
        diagnostics: data_diagnostics(tables)?,
        config: config.clone(),
        seed: config.seed,
    })
}

fn condition_position(conditions: &[String], condition: &str) -> Result<usize> {
    conditions
        .iter()
        .position(|c| c == condition)
        .ok_or_else(|| Error::validation(format!("unknown condition {condition:?}")))
}

impl FitReport {
    pub fn validate(&self) -> Result<()> {
        check_schema_version(&self.schema_version)
    }

    /// Cell probabilities of `context` in `condition`, including contexts that
    /// were not part of the fitted design. `pooled` averages over every
    /// measurement order (only order-sensitive models are affected).
    pub fn predict<S: AsRef<str>>(&self, condition: &str, context: &[S], pooled: bool) -> Result<Vec<f64>> {
        let c = condition_position(&self.conditions, condition)?;
        match &self.model {
            FittedModel::Hsm { spec } => {
                let hsm = HsmModel::new(spec.clone())?;
                if pooled {
                    hsm.predict_pooled(&self.fit.params, condition, context)
                } else {
                    hsm.predict_context(&self.fit.params, condition, context)
                }
            }
            FittedModel::Joint { models } => joint_predict(&models[c], context),
            FittedModel::BayesnetPsa { model } => bayesnet_predict(model, condition, context),
            FittedModel::Saturated => {
                let wanted: Vec<&str> = context.iter().map(AsRef::as_ref).collect();
                self.tables
                    .iter()
                    .find(|t| t.condition == condition && t.context == wanted && t.pooled_orders == pooled)
                    .map(|t| t.predicted.clone())
                    .ok_or_else(|| {
                        Error::validation(format!(
                            "the saturated model only predicts the tables it was fitted to; {} is not one of them",
                            wanted.join(",")
                        ))
                    })
            }
        }
    }

    /// Cell labels of `context` under this report's variables.
    pub fn cell_labels<S: AsRef<str>>(&self, context: &[S]) -> Result<Vec<String>> {
        let context: Vec<String> = context.iter().map(|s| s.as_ref().to_string()).collect();
        cell_labels(&self.variables, &context)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model_id: String,
    pub g2: f64,
    pub n_params: usize,
    pub bic: f64,
    /// `G²` above the smallest `G²` in the comparison.
    pub delta_g2: f64,
    /// BIC above the smallest BIC in the comparison.
    pub delta_bic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub n_obs: f64,
    pub rows: Vec<ComparisonRow>,
}

/// G², parameter count, BIC and differences for reports fitted to the same data.
pub fn compare(reports: &[FitReport]) -> Result<Comparison> {
    let first = reports.first().ok_or_else(|| Error::validation("nothing to compare"))?;
    let n_obs = first.fit.n_obs;
    for r in reports {
        if r.fit.n_obs != n_obs || r.tables.len() != first.tables.len() {
            return Err(Error::validation(format!(
                "model {} was fitted to different data than {}",
                r.model_id, first.model_id
            )));
        }
    }
    let best_g2 = reports.iter().map(|r| r.fit.g2).fold(f64::INFINITY, f64::min);
    let best_bic = reports.iter().map(|r| r.fit.bic).fold(f64::INFINITY, f64::min);
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            model_id: r.model_id.clone(),
            g2: r.fit.g2,
            n_params: r.fit.n_params,
            bic: r.fit.bic,
            delta_g2: r.fit.g2 - best_g2,
            delta_bic: r.fit.bic - best_bic,
        })
        .collect();
    Ok(Comparison {
        schema_version: default_schema_version(),
        n_obs,
        rows,
    })
}

/// Tables of many individuals who share variables and conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelData {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub variables: Vec<VariableSpec>,
    #[serde(default = "crate::tables::default_conditions")]
    pub conditions: Vec<String>,
    pub individuals: Vec<Individual>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Individual {
    pub id: String,
    pub tables: Vec<Table>,
}

impl PanelData {
    pub fn collection(&self, index: usize) -> Result<TableCollection> {
        let ind = self
            .individuals
            .get(index)
            .ok_or_else(|| Error::validation(format!("no individual at index {index}")))?;
        TableCollection::new(self.variables.clone(), self.conditions.clone(), ind.tables.clone())
            .map_err(|e| Error::validation(format!("individual {:?}: {e}", ind.id)))
    }

    pub fn validate(&self) -> Result<()> {
        check_schema_version(&self.schema_version)?;
        if self.individuals.is_empty() {
            return Err(Error::validation("the panel has no individuals"));
        }
        for i in 0..self.individuals.len() {
            self.collection(i)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndividualFit {
    pub id: String,
    pub fit: FitResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelReport {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub tool_version: String,
    pub model_id: String,
    pub individuals: Vec<IndividualFit>,
    pub config: OptimizerConfig,
    pub seed: u64,
}

/// Fits every individual separately with the same configuration. Individuals
/// run concurrently; results do not depend on scheduling.
pub fn fit_individuals(panel: &PanelData, choice: &ModelChoice, config: &OptimizerConfig) -> Result<PanelReport> {
    panel.validate()?;
    config.validate()?;
    let fits: Vec<IndividualFit> = (0..panel.individuals.len())
        .into_par_iter()
        .map(|i| {
            let tables = panel.collection(i)?;
            let report = fit_report(&tables, choice, config)?;
            Ok(IndividualFit {
                id: panel.individuals[i].id.clone(),
                fit: report.fit,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PanelReport {
        schema_version: default_schema_version(),
        tool_version: TOOL_VERSION.to_string(),
        model_id: choice.id(),
        individuals: fits,
        config: config.clone(),
        seed: config.seed,
    })
}

/// A set of diagnostics run on one collection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBundle {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub tool_version: String,
    pub reports: Vec<DiagnosticReport>,
}

impl DiagnosticsBundle {
    pub fn new(reports: Vec<DiagnosticReport>) -> Self {
        Self {
            schema_version: default_schema_version(),
            tool_version: TOOL_VERSION.to_string(),
            reports,
        }
    }
}

/// BIC of `fit` recomputed from its parts.
pub fn recompute_bic(fit: &FitResult) -> f64 {
    bic(fit.g2, fit.n_params, fit.n_obs)
}
