use serde::{Deserialize, Serialize};

use super::joint::softmax_pinned;
use super::marginalize;
use crate::error::{Error, Result};
use crate::estimation::{minimize, FitResult, OptimizerConfig};
use crate::tables::{TableCollection, VariableSpec};

/// Variable names of the network, in the order of its implied joint table.
pub const PSA_VARIABLES: [&str; 4] = ["P", "B", "I", "L"];

const LOGIT_BOUND: f64 = 12.0;

/// Informative (I) and Believable (B) are exogenous with a joint distribution
/// per condition; Persuasive (P) and Likable (L) are independent given (I, B),
/// with conditionals shared across conditions.
///
/// Every four-entry block is indexed by `2·i + b` with 0 meaning yes, so an
/// exogenous block reads like an `I,B` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesNetPsa {
    pub conditions: Vec<String>,
    /// `π(I, B | condition)`, one block per condition.
    pub exogenous: Vec<[f64; 4]>,
    /// `π(P = yes | I, B)`.
    pub persuasive: [f64; 4],
    /// `π(L = yes | I, B)`.
    pub likable: [f64; 4],
}

fn probability(p: f64) -> bool {
    p.is_finite() && (0.0..=1.0).contains(&p)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

impl BayesNetPsa {
    pub fn new(conditions: Vec<String>, exogenous: Vec<[f64; 4]>, persuasive: [f64; 4], likable: [f64; 4]) -> Result<Self> {
        if conditions.is_empty() || conditions.len() != exogenous.len() {
            return Err(Error::validation("need one exogenous block per condition"));
        }
        for block in &exogenous {
            if !block.iter().all(|&p| probability(p)) || (block.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                return Err(Error::validation("exogenous blocks must be distributions"));
            }
        }
        if !persuasive.iter().chain(&likable).all(|&p| probability(p)) {
            return Err(Error::validation("conditional probabilities must lie in [0, 1]"));
        }
        Ok(Self {
            conditions,
            exogenous,
            persuasive,
            likable,
        })
    }

    pub fn param_count(&self) -> usize {
        3 * self.conditions.len() + 8
    }

    pub fn variables() -> Vec<VariableSpec> {
        PSA_VARIABLES.iter().map(|n| VariableSpec::binary(*n)).collect()
    }

    /// Builds a model from its free parameters: per condition, three log-odds
    /// of the exogenous block against its last cell; then four logits for P
    /// and four for L.
    pub fn from_params(conditions: Vec<String>, params: &[f64]) -> Result<Self> {
        let c = conditions.len();
        if params.len() != 3 * c + 8 {
            return Err(Error::validation(format!("expected {} parameters, got {}", 3 * c + 8, params.len())));
        }
        let exogenous = params[..3 * c]
            .chunks(3)
            .map(|x| {
                let p = softmax_pinned(x);
                [p[0], p[1], p[2], p[3]]
            })
            .collect();
        let cond = |off: usize| -> [f64; 4] { std::array::from_fn(|k| sigmoid(params[3 * c + off + k])) };
        Self::new(conditions, exogenous, cond(0), cond(4))
    }

    /// Inverse of [`from_params`](Self::from_params), up to clamping at 1e-12.
    pub fn to_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for block in &self.exogenous {
            let last = block[3].max(1e-12);
            out.extend(block[..3].iter().map(|p| (p.max(1e-12) / last).ln()));
        }
        out.extend(self.persuasive.iter().map(|&p| logit(p)));
        out.extend(self.likable.iter().map(|&p| logit(p)));
        out
    }

    /// Implied 16-cell joint over (P, B, I, L), first variable slowest.
    pub fn joint(&self, condition: &str) -> Result<Vec<f64>> {
        let c = self
            .conditions
            .iter()
            .position(|x| x == condition)
            .ok_or_else(|| Error::validation(format!("unknown condition {condition:?}")))?;
        let ex = &self.exogenous[c];
        let mut out = vec![0.0; 16];
        for p in 0..2 {
            for b in 0..2 {
                for i in 0..2 {
                    for l in 0..2 {
                        let k = 2 * i + b;
                        let pp = if p == 0 { self.persuasive[k] } else { 1.0 - self.persuasive[k] };
                        let pl = if l == 0 { self.likable[k] } else { 1.0 - self.likable[k] };
                        out[8 * p + 4 * b + 2 * i + l] = ex[k] * pp * pl;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Table for `context` (any subset of P, B, I, L, in any order) under `condition`.
pub fn bayesnet_predict<S: AsRef<str>>(model: &BayesNetPsa, condition: &str, context: &[S]) -> Result<Vec<f64>> {
    marginalize(&BayesNetPsa::variables(), &model.joint(condition)?, context)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesNetFit {
    pub model: BayesNetPsa,
    pub fit: FitResult,
}

fn check_psa_tables(tables: &TableCollection) -> Result<()> {
    tables.validate()?;
    let mut names: Vec<&str> = tables.variables.iter().map(|v| v.name.as_str()).collect();
    names.sort_unstable();
    let mut want = PSA_VARIABLES;
    want.sort_unstable();
    if names != want || tables.variables.iter().any(|v| v.cardinality() != 2) {
        return Err(Error::validation("the Bayes net needs exactly the binary variables P, B, I and L"));
    }
    if tables.tables.is_empty() {
        return Err(Error::validation("the Bayes net needs at least one table"));
    }
    Ok(())
}

/// Maximum-likelihood fit over the logit parameterization of
/// [`BayesNetPsa::from_params`].
pub fn bayesnet_fit(tables: &TableCollection, config: &OptimizerConfig) -> Result<BayesNetFit> {
    check_psa_tables(tables)?;
    let conditions = tables.conditions.clone();
    let vars = BayesNetPsa::variables();
    // Table cells are marginals of the joint; precompute which joint cell feeds which table cell.
    let maps: Vec<(usize, Vec<usize>)> = tables
        .tables
        .iter()
        .map(|t| {
            let c = conditions.iter().position(|x| x == &t.condition).expect("validated");
            let map = (0..16)
                .map(|j| {
                    let mut unit = vec![0.0; 16];
                    unit[j] = 1.0;
                    let m = marginalize(&vars, &unit, &t.context).expect("validated");
                    m.iter().position(|&x| x == 1.0).expect("one cell")
                })
                .collect();
            (c, map)
        })
        .collect();

    let objective = |x: &[f64]| -> f64 {
        let Ok(model) = BayesNetPsa::from_params(conditions.clone(), x) else {
            return f64::INFINITY;
        };
        let joints: Vec<Vec<f64>> = conditions.iter().map(|c| model.joint(c).expect("known")).collect();
        let mut total = 0.0;
        for ((c, map), t) in maps.iter().zip(&tables.tables) {
            let mut m = vec![0.0; t.counts.len()];
            for (j, &cell) in map.iter().enumerate() {
                m[cell] += joints[*c][j];
            }
            for (p, n) in m.iter().zip(&t.counts) {
                if *n > 0.0 {
                    total += n * p.max(crate::estimation::PROBABILITY_FLOOR).ln();
                }
            }
        }
        -2.0 * total
    };

    let n_params = 3 * conditions.len() + 8;
    let best = minimize(objective, &vec![(-LOGIT_BOUND, LOGIT_BOUND); n_params], config)?;
    let model = BayesNetPsa::from_params(conditions, &best.x)?;
    let fit = FitResult::new(best.x, best.value, n_params, tables.total_count().max(1.0), best.evaluations, best.per_restart);
    Ok(BayesNetFit { model, fit })
}
