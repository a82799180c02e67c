use serde::{Deserialize, Serialize};

use super::marginalize;
use crate::error::{Error, Result};
use crate::estimation::{check_bounds, run_restart, FitResult, OptimizerConfig, PROBABILITY_FLOOR};
use crate::tables::{cell_index, cell_values, TableCollection, VariableSpec};

/// Bound on the free log-odds used while searching the simplex.
const LOGIT_BOUND: f64 = 12.0;
const EM_MAX_ITERATIONS: usize = 200_000;
const EM_TOLERANCE: f64 = 1e-13;

/// One probability per combination of values of `variables`, lexicographic
/// with the first variable slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub variables: Vec<VariableSpec>,
    pub probabilities: Vec<f64>,
}

impl JointModel {
    pub fn new(variables: Vec<VariableSpec>, probabilities: Vec<f64>) -> Result<Self> {
        crate::tables::validate_variables(&variables)?;
        let cells: usize = variables.iter().map(VariableSpec::cardinality).product();
        if probabilities.len() != cells {
            return Err(Error::validation(format!("a joint over these variables has {cells} cells, got {}", probabilities.len())));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::validation("joint probabilities must be nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::validation(format!("joint probabilities sum to {total}")));
        }
        Ok(Self { variables, probabilities })
    }

    pub fn uniform(variables: Vec<VariableSpec>) -> Result<Self> {
        let cells: usize = variables.iter().map(VariableSpec::cardinality).product();
        Self::new(variables, vec![1.0 / cells as f64; cells])
    }

    /// Softmax of `free` with an implicit zero for the last cell.
    pub fn from_logits(variables: Vec<VariableSpec>, free: &[f64]) -> Result<Self> {
        let probabilities = softmax_pinned(free);
        Self::new(variables, probabilities)
    }

    /// `ln(π_j / π_last)` for every cell but the last.
    pub fn logits(&self) -> Vec<f64> {
        let last = self.probabilities.last().copied().unwrap_or(1.0).max(PROBABILITY_FLOOR);
        self.probabilities[..self.probabilities.len() - 1]
            .iter()
            .map(|p| (p.max(PROBABILITY_FLOOR) / last).ln())
            .collect()
    }

    pub fn free_param_count(&self) -> usize {
        self.probabilities.len() - 1
    }
}

pub(crate) fn softmax_pinned(free: &[f64]) -> Vec<f64> {
    let max = free.iter().copied().fold(0.0f64, f64::max);
    let mut out: Vec<f64> = free.iter().map(|x| (x - max).exp()).collect();
    out.push((-max).exp());
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Marginal of the joint over `context`. The cell values do not depend on
/// the order of `context`; only their arrangement does.
pub fn joint_predict<S: AsRef<str>>(model: &JointModel, context: &[S]) -> Result<Vec<f64>> {
    marginalize(&model.variables, &model.probabilities, context)
}

/// Joint fit of a collection: one [`JointModel`] per condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointFit {
    pub models: Vec<JointModel>,
    pub fit: FitResult,
}

struct Compiled {
    /// For each table, the table cell of every joint cell.
    maps: Vec<Vec<usize>>,
    counts: Vec<Vec<f64>>,
}

fn compile(variables: &[VariableSpec], tables: &TableCollection, condition: &str) -> Result<Compiled> {
    let cards: Vec<usize> = variables.iter().map(VariableSpec::cardinality).collect();
    let cells: usize = cards.iter().product();
    let mut maps = Vec::new();
    let mut counts = Vec::new();
    for t in tables.tables.iter().filter(|t| t.condition == condition) {
        let positions: Vec<usize> = t
            .context
            .iter()
            .map(|n| variables.iter().position(|v| &v.name == n).expect("validated"))
            .collect();
        let ctx_cards: Vec<usize> = positions.iter().map(|&p| cards[p]).collect();
        let map = (0..cells)
            .map(|j| {
                let v = cell_values(&cards, j);
                let picked: Vec<usize> = positions.iter().map(|&p| v[p]).collect();
                cell_index(&ctx_cards, &picked)
            })
            .collect();
        maps.push(map);
        counts.push(t.counts.clone());
    }
    Ok(Compiled { maps, counts })
}

impl Compiled {
    fn marginals(&self, joint: &[f64]) -> Vec<Vec<f64>> {
        self.maps
            .iter()
            .zip(&self.counts)
            .map(|(map, counts)| {
                let mut m = vec![0.0; counts.len()];
                for (j, &c) in map.iter().enumerate() {
                    m[c] += joint[j];
                }
                m
            })
            .collect()
    }

    fn g2(&self, joint: &[f64]) -> f64 {
        let mut total = 0.0;
        for (m, counts) in self.marginals(joint).iter().zip(&self.counts) {
            for (p, n) in m.iter().zip(counts) {
                if *n > 0.0 {
                    total += n * p.max(PROBABILITY_FLOOR).ln();
                }
            }
        }
        -2.0 * total
    }

    /// Expectation–maximization for a joint seen only through marginals. The
    /// log-likelihood is concave in the joint, so this climbs to the global
    /// maximum from any interior start.
    fn em(&self, start: &[f64]) -> Vec<f64> {
        let total: f64 = self.counts.iter().flatten().sum();
        if total <= 0.0 {
            return start.to_vec();
        }
        let mut joint = start.to_vec();
        let mut previous = self.g2(&joint);
        for _ in 0..EM_MAX_ITERATIONS {
            let marginals = self.marginals(&joint);
            let mut next = vec![0.0; joint.len()];
            for ((map, counts), m) in self.maps.iter().zip(&self.counts).zip(&marginals) {
                for (j, &c) in map.iter().enumerate() {
                    if counts[c] > 0.0 && m[c] > 0.0 {
                        next[j] += counts[c] * joint[j] / m[c];
                    }
                }
            }
            let s: f64 = next.iter().sum();
            next.iter_mut().for_each(|p| *p /= s);
            let g = self.g2(&next);
            joint = next;
            if (previous - g).abs() <= EM_TOLERANCE * (1.0 + g.abs()) {
                break;
            }
            previous = g;
        }
        joint
    }
}

/// Maximum-likelihood joint distribution per condition over all variables of
/// the collection. Each swarm restart searches normalized exponentials of the
/// free log-odds; its best point is then refined by expectation–maximization.
///
/// Condition `c` uses seed `config.seed + c`. `per_restart_g2` sums the refined
/// restart values over conditions.
pub fn joint_fit(tables: &TableCollection, config: &OptimizerConfig) -> Result<JointFit> {
    tables.validate()?;
    config.validate()?;
    if tables.tables.is_empty() {
        return Err(Error::validation("joint fitting needs at least one table"));
    }
    let variables = tables.variables.clone();
    let cells: usize = variables.iter().map(VariableSpec::cardinality).product();
    let n_free = cells - 1;
    let bounds = vec![(-LOGIT_BOUND, LOGIT_BOUND); n_free];
    check_bounds(&bounds)?;

    let mut models = Vec::new();
    let mut params = Vec::new();
    let mut evaluations = 0;
    let mut per_restart_g2 = vec![0.0; config.restarts];
    for (c, condition) in tables.conditions.iter().enumerate() {
        let compiled = compile(&variables, tables, condition)?;
        let objective = |x: &[f64]| compiled.g2(&softmax_pinned(x));
        let cfg = OptimizerConfig {
            seed: config.seed.wrapping_add(c as u64),
            ..config.clone()
        };
        let mut best: Option<(Vec<f64>, f64)> = None;
        for (r, total) in per_restart_g2.iter_mut().enumerate() {
            let run = run_restart(&objective, &bounds, &cfg, r);
            evaluations += run.evaluations;
            let swarm_joint = softmax_pinned(&run.x);
            let refined = compiled.em(&swarm_joint);
            let g = compiled.g2(&refined);
            let (joint, value) = if g <= run.value { (refined, g) } else { (swarm_joint, run.value) };
            *total += value;
            if best.as_ref().is_none_or(|(_, b)| value < *b) {
                best = Some((joint, value));
            }
        }
        let (joint, value) = best.expect("at least one restart");
        if !value.is_finite() {
            return Err(Error::Optimization {
                message: format!("joint fit for condition {condition:?} did not reach a finite likelihood"),
                best_value: value,
                best_params: joint,
            });
        }
        let model = JointModel::new(variables.clone(), joint)?;
        params.extend(model.logits());
        models.push(model);
    }
    let g2 = models
        .iter()
        .zip(&tables.conditions)
        .map(|(m, cond)| compile(&variables, tables, cond).map(|c| c.g2(&m.probabilities)))
        .sum::<Result<f64>>()?;
    let fit = FitResult::new(params, g2, tables.conditions.len() * n_free, tables.total_count().max(1.0), evaluations, per_restart_g2);
    Ok(JointFit { models, fit })
}
