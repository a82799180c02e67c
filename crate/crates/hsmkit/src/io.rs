//! Reading and writing the JSON, TOML and CSV files used by the tool.
//!
//! Every JSON file carries a `schema_version`; loaders accept major version 1.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::OptimizerConfig;
use crate::model::{Design, ModelSpec};
use crate::report::{Comparison, FitReport, PanelData, PanelReport};
use crate::tables::{check_schema_version, default_schema_version, TableCollection};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Parses JSON, reporting the line and column of any syntax or field error.
pub fn from_json_str<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| parse_error(path, e.to_string()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json_str(path, &read(path)?)
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| parse_error(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_tables(path: &Path) -> Result<TableCollection> {
    let tables: TableCollection = read_json(path)?;
    tables.validate()?;
    Ok(tables)
}

pub fn load_model_spec(path: &Path) -> Result<ModelSpec> {
    let spec: ModelSpec = read_json(path)?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_design(path: &Path) -> Result<Design> {
    let design: Design = read_json(path)?;
    design.validate()?;
    Ok(design)
}

pub fn load_panel(path: &Path) -> Result<PanelData> {
    let panel: PanelData = read_json(path)?;
    panel.validate()?;
    Ok(panel)
}

/// An optimizer configuration file, and whether it chose a seed itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigFile {
    pub config: OptimizerConfig,
    pub seed_given: bool,
}

/// Reads an optimizer configuration. Files ending in `.toml` are TOML,
/// anything else JSON; field names match [`OptimizerConfig`].
pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = read(path)?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let (config, seed_given) = if is_toml {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_error(path, e.to_string()))?;
        let seed_given = table.contains_key("seed");
        let config: OptimizerConfig = table.try_into().map_err(|e: toml::de::Error| parse_error(path, e.to_string()))?;
        (config, seed_given)
    } else {
        let value: serde_json::Value = from_json_str(path, &text)?;
        let seed_given = value.get("seed").is_some();
        let config: OptimizerConfig = serde_json::from_value(value).map_err(|e| parse_error(path, e.to_string()))?;
        (config, seed_given)
    };
    config.validate()?;
    Ok(ConfigFile { config, seed_given })
}

/// A parameter vector on its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub params: Vec<f64>,
}

/// Reads parameters from a bare JSON array, a [`ParamsFile`], or a fit report.
pub fn load_params(path: &Path) -> Result<Vec<f64>> {
    let value: serde_json::Value = read_json(path)?;
    let params = if value.is_array() {
        serde_json::from_value(value).map_err(|e| parse_error(path, e.to_string()))?
    } else if value.get("fit").is_some() {
        let report: FitReport = serde_json::from_value(value).map_err(|e| parse_error(path, e.to_string()))?;
        report.validate()?;
        report.fit.params
    } else {
        let file: ParamsFile = serde_json::from_value(value).map_err(|e| parse_error(path, e.to_string()))?;
        check_schema_version(&file.schema_version)?;
        file.params
    };
    Ok(params)
}

pub fn save_report(report: &FitReport, path: &Path) -> Result<()> {
    save_json(report, path)
}

pub fn load_report(path: &Path) -> Result<FitReport> {
    let report: FitReport = read_json(path)?;
    report.validate()?;
    Ok(report)
}

pub fn save_panel_report(report: &PanelReport, path: &Path) -> Result<()> {
    save_json(report, path)
}

pub fn save_comparison(comparison: &Comparison, path: &Path) -> Result<()> {
    save_json(comparison, path)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked by is_io_error"),
        }
    } else {
        parse_error(path, e.to_string())
    }
}

#[derive(Serialize)]
struct CellRow<'a> {
    condition: &'a str,
    context: String,
    cell_label: &'a str,
    observed: f64,
    predicted: f64,
}

/// One CSV row per cell: `condition, context, cell_label, observed, predicted`,
/// where `observed` is the cell's relative frequency.
pub fn write_cells_csv<W: Write>(report: &FitReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in &report.tables {
        let context = t.context_key();
        for ((label, obs), pred) in t.cell_labels.iter().zip(t.observed_frequencies()).zip(&t.predicted) {
            w.serialize(CellRow {
                condition: &t.condition,
                context: context.clone(),
                cell_label: label,
                observed: obs,
                predicted: *pred,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(report: &FitReport, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_cells_csv(report, file).map_err(|e| csv_error(path, e))
}

#[derive(Serialize)]
struct IndividualRow<'a> {
    id: &'a str,
    g2: f64,
    n_params: usize,
    n_obs: f64,
    bic: f64,
}

/// One row per individual: `id, g2, n_params, n_obs, bic`.
pub fn export_panel_csv(report: &PanelReport, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for ind in &report.individuals {
        w.serialize(IndividualRow {
            id: &ind.id,
            g2: ind.fit.g2,
            n_params: ind.fit.n_params,
            n_obs: ind.fit.n_obs,
            bic: ind.fit.bic,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
