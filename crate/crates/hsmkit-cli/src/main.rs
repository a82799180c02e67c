//! `hsmkit`: fit, diagnose, compare, predict and simulate from the command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 optimization failure, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hsmkit::diagnostics::{
    chsh_statistic, joint_consistency_test, marginal_invariance_report, order_effect_report, ChshCoding, ChshQuadruple,
};
use hsmkit::estimation::OptimizerConfig;
use hsmkit::io;
use hsmkit::report::{compare, fit_individuals, fit_report, DiagnosticsBundle, FitReport, ModelChoice};
use hsmkit::{Error, Result};

const SEED_ENV: &str = "HSMKIT_SEED";

#[derive(Parser)]
#[command(name = "hsmkit", version, about = "Quantum-probability models for collections of contingency tables")]
struct Cli {
    /// Worker threads for parallel work (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Optim {
    /// Optimizer settings, TOML (`.toml`) or JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed. Falls back to the config file, then HSMKIT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a table collection.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Model spec file, or one of joint, saturated, bayesnet-psa.
        #[arg(long)]
        model: String,
        #[command(flatten)]
        optim: Optim,
        /// Report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one CSV row per cell (or per individual).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// The data file holds many individuals; fit each one.
        #[arg(long)]
        per_individual: bool,
    },
    /// Run consistency diagnostics on a table collection.
    Diagnose {
        #[arg(long)]
        data: PathBuf,
        /// CHSH pairs, e.g. A:I,H:I,H:U,A:U.
        #[arg(long)]
        chsh: Option<ChshQuadruple>,
        /// correlation or product.
        #[arg(long, default_value = "correlation")]
        coding: ChshCoding,
        /// Condition for the CHSH statistic (default: the first).
        #[arg(long)]
        condition: Option<String>,
        /// Variables to check for marginal invariance (default: all). Repeatable.
        #[arg(long = "variable")]
        variables: Vec<String>,
        /// Skip the joint-distribution likelihood-ratio test.
        #[arg(long)]
        no_joint_test: bool,
        #[command(flatten)]
        optim: Optim,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit several models to the same data and tabulate G², BIC and ΔBIC.
    Compare {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated model spec files or baseline names.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<String>,
        #[command(flatten)]
        optim: Optim,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict a context, including ones absent from the fitted data.
    Predict {
        /// A report written by `fit`.
        #[arg(long)]
        fit: PathBuf,
        /// Variables in measurement order, e.g. "A,H".
        #[arg(long)]
        context: String,
        #[arg(long)]
        condition: Option<String>,
        /// Average over every measurement order.
        #[arg(long)]
        pooled: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw multinomial counts from a model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Parameters: JSON array, params file or fit report.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Validation(format!("{SEED_ENV}={s:?} is not a nonnegative integer"))),
        Err(_) => Ok(None),
    }
}

impl Optim {
    fn resolve(&self) -> Result<OptimizerConfig> {
        let (mut config, file_seed) = match &self.config {
            Some(path) => {
                let file = io::load_config(path)?;
                let seed = file.seed_given.then_some(file.config.seed);
                (file.config, seed)
            }
            None => (OptimizerConfig::default(), None),
        };
        config.seed = match (self.seed, file_seed) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => env_seed()?.unwrap_or(0),
        };
        Ok(config)
    }
}

fn model_choice(name: &str) -> Result<ModelChoice> {
    let path = Path::new(name);
    match ModelChoice::baseline(name) {
        Some(choice) if !path.exists() => Ok(choice),
        _ => Ok(ModelChoice::Hsm(io::load_model_spec(path)?)),
    }
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => io::save_json(value, path),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn summarize(report: &FitReport) {
    let f = &report.fit;
    eprintln!(
        "{}: G² = {:.4}, parameters = {}, BIC = {:.4}, observations = {}",
        report.model_id, f.g2, f.n_params, f.bic, f.n_obs
    );
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Fit {
            data,
            model,
            optim,
            out,
            csv,
            per_individual,
        } => {
            let config = optim.resolve()?;
            let choice = model_choice(&model)?;
            if per_individual {
                let panel = io::load_panel(&data)?;
                let report = fit_individuals(&panel, &choice, &config)?;
                eprintln!("{}: fitted {} individuals", report.model_id, report.individuals.len());
                if let Some(path) = csv {
                    io::export_panel_csv(&report, &path)?;
                }
                emit(&report, out.as_deref())
            } else {
                let tables = io::load_tables(&data)?;
                let report = fit_report(&tables, &choice, &config)?;
                summarize(&report);
                if let Some(path) = csv {
                    io::export_csv(&report, &path)?;
                }
                emit(&report, out.as_deref())
            }
        }
        Command::Diagnose {
            data,
            chsh,
            coding,
            condition,
            variables,
            no_joint_test,
            optim,
            out,
        } => {
            let tables = io::load_tables(&data)?;
            let mut reports = Vec::new();
            if let Some(q) = &chsh {
                reports.push(chsh_statistic(&tables, q, coding, condition.as_deref())?);
            }
            let variables = if variables.is_empty() {
                tables.variables.iter().map(|v| v.name.clone()).collect()
            } else {
                variables
            };
            for v in &variables {
                reports.push(marginal_invariance_report(&tables, v)?);
            }
            reports.push(order_effect_report(&tables)?);
            if !no_joint_test {
                reports.push(joint_consistency_test(&tables, &optim.resolve()?)?);
            }
            for r in &reports {
                let main = ["chsh", "max_discrepancy", "g2_diff", "g2"]
                    .iter()
                    .find_map(|k| r.statistic(k).map(|v| format!("{k} = {v:.4}")))
                    .unwrap_or_default();
                eprintln!("{:?}: {:?} {main}", r.kind, r.verdict);
            }
            emit(&DiagnosticsBundle::new(reports), out.as_deref())
        }
        Command::Compare { data, models, optim, out } => {
            let tables = io::load_tables(&data)?;
            let config = optim.resolve()?;
            let reports = models
                .iter()
                .map(|m| fit_report(&tables, &model_choice(m)?, &config))
                .collect::<Result<Vec<_>>>()?;
            let comparison = compare(&reports)?;
            eprintln!("{:<28} {:>12} {:>6} {:>12} {:>10} {:>10}", "model", "G²", "params", "BIC", "ΔG²", "ΔBIC");
            for r in &comparison.rows {
                eprintln!(
                    "{:<28} {:>12.4} {:>6} {:>12.4} {:>10.4} {:>10.4}",
                    r.model_id, r.g2, r.n_params, r.bic, r.delta_g2, r.delta_bic
                );
            }
            emit(&comparison, out.as_deref())
        }
        Command::Predict {
            fit,
            context,
            condition,
            pooled,
            out,
        } => {
            let report = io::load_report(&fit)?;
            let context: Vec<&str> = context.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            let condition = condition.unwrap_or_else(|| report.conditions[0].clone());
            let probabilities = report.predict(&condition, &context, pooled)?;
            let labels = report.cell_labels(&context)?;
            let value = serde_json::json!({
                "schema_version": hsmkit::tables::SCHEMA_VERSION,
                "model_id": report.model_id,
                "condition": condition,
                "context": context,
                "pooled_orders": pooled,
                "cell_labels": labels,
                "probabilities": probabilities,
            });
            emit(&value, out.as_deref())
        }
        Command::Simulate {
            model,
            params,
            design,
            seed,
            out,
        } => {
            let spec = io::load_model_spec(&model)?;
            let hsm = hsmkit::model::HsmModel::new(spec)?;
            let params = io::load_params(&params)?;
            let design = io::load_design(&design)?;
            let seed = match seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or(0),
            };
            let tables = hsm.simulate_counts(&params, &design, seed)?;
            emit(&tables, out.as_deref())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Optimization { .. } => 2,
        Error::Io { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
