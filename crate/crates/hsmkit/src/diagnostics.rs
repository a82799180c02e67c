//! Consistency checks on raw tables and the likelihood-ratio tests built on them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{design_of, df_for_design, joint_fit, saturated_fit};
use crate::error::{Error, Result};
use crate::estimation::{chi2_cdf, chi2_pvalue, OptimizerConfig};
use crate::tables::{cell_index, cell_values, Table, TableCollection};

/// Significance level used for verdicts of inferential checks.
pub const ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Chsh,
    MarginalInvariance,
    OrderEffect,
    JointTest,
    LackOfFit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violated,
    Consistent,
    Inconclusive,
}

/// One line of a report's breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detail {
    pub item: String,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Detail {
    fn new(item: impl Into<String>, values: &[(&str, f64)]) -> Self {
        Self {
            item: item.into(),
            values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub kind: DiagnosticKind,
    pub statistics: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub details: Vec<Detail>,
}

impl DiagnosticReport {
    fn new(kind: DiagnosticKind, statistics: &[(&str, f64)], verdict: Verdict, details: Vec<Detail>) -> Self {
        Self {
            kind,
            statistics: statistics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            verdict,
            details,
        }
    }

    pub fn statistic(&self, name: &str) -> Option<f64> {
        self.statistics.get(name).copied()
    }

    pub fn detail(&self, item: &str) -> Option<&Detail> {
        self.details.iter().find(|d| d.item == item)
    }
}

fn verdict_from_p(p: f64) -> Verdict {
    if p < ALPHA {
        Verdict::Violated
    } else {
        Verdict::Consistent
    }
}

/// `2·Σ O·ln(O/E)` for an `r × c` table of counts, with independence-model
/// expectations. Returns `(G², df)`; empty rows and columns are dropped.
pub fn homogeneity_g2(rows: &[Vec<f64>]) -> (f64, usize) {
    let row_totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let ncols = rows.first().map_or(0, Vec::len);
    let col_totals: Vec<f64> = (0..ncols).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    let grand: f64 = row_totals.iter().sum();
    if grand <= 0.0 {
        return (0.0, 0);
    }
    let mut g = 0.0;
    for (r, row) in rows.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            if o > 0.0 {
                let e = row_totals[r] * col_totals[j] / grand;
                g += o * (o / e).ln();
            }
        }
    }
    let live_rows = row_totals.iter().filter(|&&t| t > 0.0).count();
    let live_cols = col_totals.iter().filter(|&&t| t > 0.0).count();
    ((2.0 * g).max(0.0), live_rows.saturating_sub(1) * live_cols.saturating_sub(1))
}

/// Pearson `Σ (O − E)² / E`.
pub fn pearson_chi2(observed: &[f64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() {
        return Err(Error::validation("observed and expected frequencies differ in length"));
    }
    let mut total = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if !(e > 0.0) {
            return Err(Error::validation("expected frequencies must be positive"));
        }
        total += (o - e).powi(2) / e;
    }
    Ok(total)
}

/// How pairwise expectations are scored in the CHSH statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChshCoding {
    /// Outcomes coded ±1: `E = p(YY) + p(NN) − p(YN) − p(NY)`; bound `[−2, 2]`.
    #[default]
    Correlation,
    /// Outcomes coded 1/0: `E = p(YY)`; bound `[−1, 2]`.
    Product,
}

impl ChshCoding {
    fn bounds(self) -> (f64, f64) {
        match self {
            ChshCoding::Correlation => (-2.0, 2.0),
            ChshCoding::Product => (-1.0, 2.0),
        }
    }

    fn code(self) -> f64 {
        match self {
            ChshCoding::Correlation => 0.0,
            ChshCoding::Product => 1.0,
        }
    }
}

impl FromStr for ChshCoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(Self::Correlation),
            "product" => Ok(Self::Product),
            _ => Err(Error::validation(format!("unknown CHSH coding {s:?} (use correlation or product)"))),
        }
    }
}

/// Four pairs `(x1,y1), (x2,y1), (x2,y2), (x1,y2)` entering
/// `CHSH = E1 + E2 + E3 − E4`, written `"x1:y1,x2:y1,x2:y2,x1:y2"`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChshQuadruple {
    pub pairs: [(String, String); 4],
}

impl FromStr for ChshQuadruple {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("CHSH quadruple {s:?} must look like A:I,H:I,H:U,A:U"));
        let pairs: Vec<(String, String)> = s
            .split(',')
            .map(|p| {
                let (x, y) = p.trim().split_once(':').ok_or_else(bad)?;
                Ok((x.trim().to_string(), y.trim().to_string()))
            })
            .collect::<Result<_>>()?;
        let pairs: [(String, String); 4] = pairs.try_into().map_err(|_| bad())?;
        let q = Self { pairs };
        q.check()?;
        Ok(q)
    }
}

impl fmt::Display for ChshQuadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(x, y)| format!("{x}:{y}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl ChshQuadruple {
    fn check(&self) -> Result<()> {
        let [(x1, y1), (x2, y1b), (x2b, y2), (x1b, y2b)] = &self.pairs;
        let ok = x1 == x1b && x2 == x2b && y1 == y1b && y2 == y2b && x1 != x2 && y1 != y2 && ![x1, x2].contains(&y1) && ![x1, x2].contains(&y2);
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "CHSH quadruple {self} does not follow the pattern x1:y1,x2:y1,x2:y2,x1:y2"
            )))
        }
    }
}

/// Frequencies of the binary pair `(x, y)` as `[YY, YN, NY, NN]` with `x` first,
/// from a table measuring `x` then `y` or, failing that, `y` then `x`.
fn pair_frequencies(tables: &TableCollection, condition: &str, x: &str, y: &str) -> Result<(Vec<f64>, String)> {
    for v in [x, y] {
        let spec = tables.variable(v).ok_or_else(|| Error::validation(format!("unknown variable {v}")))?;
        if spec.cardinality() != 2 {
            return Err(Error::validation(format!("CHSH needs binary variables; {v} has {} values", spec.cardinality())));
        }
    }
    let find = |a: &str, b: &str| {
        tables
            .tables
            .iter()
            .find(|t| t.condition == condition && t.context.len() == 2 && t.context[0] == a && t.context[1] == b)
    };
    if let Some(t) = find(x, y) {
        return Ok((t.frequencies(), t.context_key()));
    }
    if let Some(t) = find(y, x) {
        let f = t.frequencies();
        return Ok((vec![f[0], f[2], f[1], f[3]], t.context_key()));
    }
    Err(Error::validation(format!("no table measures the pair {x},{y} in condition {condition:?}")))
}

/// CHSH statistic of one condition's tables (the first condition when `None`).
pub fn chsh_statistic(tables: &TableCollection, quadruple: &ChshQuadruple, coding: ChshCoding, condition: Option<&str>) -> Result<DiagnosticReport> {
    tables.validate()?;
    quadruple.check()?;
    let condition = condition.unwrap_or(&tables.conditions[0]);
    let mut details = Vec::with_capacity(4);
    let mut total = 0.0;
    for (k, (x, y)) in quadruple.pairs.iter().enumerate() {
        let (f, source) = pair_frequencies(tables, condition, x, y)?;
        let e = match coding {
            ChshCoding::Correlation => f[0] + f[3] - f[1] - f[2],
            ChshCoding::Product => f[0],
        };
        let sign = if k == 3 { -1.0 } else { 1.0 };
        total += sign * e;
        details.push(Detail::new(format!("{x}:{y}"), &[("expectation", e), ("sign", sign)]).with_note(format!("from table {source}")));
    }
    let (lo, hi) = coding.bounds();
    let verdict = if total < lo || total > hi { Verdict::Violated } else { Verdict::Consistent };
    Ok(DiagnosticReport::new(
        DiagnosticKind::Chsh,
        &[("chsh", total), ("bound_lower", lo), ("bound_upper", hi), ("coding", coding.code())],
        verdict,
        details,
    ))
}

/// Position of `variable` in the table's context, if present.
fn position(table: &Table, variable: &str) -> Option<usize> {
    table.context.iter().position(|v| v == variable)
}

fn marginal_counts(tables: &TableCollection, table: &Table, pos: usize) -> Result<Vec<f64>> {
    let cards = tables.cardinalities(&table.context)?;
    let mut out = vec![0.0; cards[pos]];
    for (i, &n) in table.counts.iter().enumerate() {
        out[cell_values(&cards, i)[pos]] += n;
    }
    Ok(out)
}

/// One-way distribution of `variable` in every context containing it, per
/// condition, with the largest total-variation gap and a G² test of equal
/// marginals.
pub fn marginal_invariance_report(tables: &TableCollection, variable: &str) -> Result<DiagnosticReport> {
    tables.validate()?;
    let spec = tables
        .variable(variable)
        .ok_or_else(|| Error::validation(format!("unknown variable {variable}")))?;
    let labels = &spec.values;
    let mut details = Vec::new();
    let (mut max_tv, mut g2, mut df, mut groups) = (0.0f64, 0.0, 0usize, 0usize);
    for condition in &tables.conditions {
        let mut rows = Vec::new();
        let mut dists: Vec<Vec<f64>> = Vec::new();
        for t in tables.tables.iter().filter(|t| &t.condition == condition) {
            let Some(pos) = position(t, variable) else { continue };
            let counts = marginal_counts(tables, t, pos)?;
            let total: f64 = counts.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let dist: Vec<f64> = counts.iter().map(|c| c / total).collect();
            let mut values: Vec<(&str, f64)> = labels.iter().map(String::as_str).zip(dist.iter().copied()).collect();
            values.push(("n", total));
            let item = if tables.conditions.len() > 1 {
                format!("{condition}/{}", t.context_key())
            } else {
                t.context_key()
            };
            details.push(Detail::new(item, &values));
            rows.push(counts);
            dists.push(dist);
        }
        for i in 0..dists.len() {
            for j in i + 1..dists.len() {
                let tv = 0.5 * dists[i].iter().zip(&dists[j]).map(|(a, b)| (a - b).abs()).sum::<f64>();
                max_tv = max_tv.max(tv);
            }
        }
        if rows.len() >= 2 {
            let (g, d) = homogeneity_g2(&rows);
            g2 += g;
            df += d;
            groups += 1;
        }
    }
    if groups == 0 {
        return Ok(DiagnosticReport::new(
            DiagnosticKind::MarginalInvariance,
            &[("max_discrepancy", 0.0)],
            Verdict::Inconclusive,
            vec![Detail::new(variable, &[]).with_note("the variable appears in fewer than two contexts of any condition")],
        ));
    }
    let p = if df > 0 { chi2_pvalue(g2, df as u32) } else { 1.0 };
    Ok(DiagnosticReport::new(
        DiagnosticKind::MarginalInvariance,
        &[("max_discrepancy", max_tv), ("g2", g2), ("df", df as f64), ("p_value", p), ("alpha", ALPHA)],
        verdict_from_p(p),
        details,
    ))
}

/// Compares every context with each reordering of it present in the same
/// condition (order-pooled tables are skipped).
pub fn order_effect_report(tables: &TableCollection) -> Result<DiagnosticReport> {
    tables.validate()?;
    let mut details = Vec::new();
    let (mut g2, mut df, mut max_diff) = (0.0, 0usize, 0.0f64);
    for (i, a) in tables.tables.iter().enumerate() {
        for b in tables.tables.iter().skip(i + 1) {
            if a.pooled_orders || b.pooled_orders || a.condition != b.condition || a.context == b.context || a.context.len() != b.context.len() {
                continue;
            }
            // For each variable of `a`, its position in `b`.
            let Some(perm) = a.context.iter().map(|v| position(b, v)).collect::<Option<Vec<_>>>() else {
                continue;
            };
            let cards_a = tables.cardinalities(&a.context)?;
            let cards_b = tables.cardinalities(&b.context)?;
            let (fa, fb) = (a.frequencies(), b.frequencies());
            let mut aligned_b = vec![0.0; a.counts.len()];
            let mut diffs = Vec::with_capacity(a.counts.len());
            for cell in 0..a.counts.len() {
                let va = cell_values(&cards_a, cell);
                let mut vb = vec![0; va.len()];
                for (k, &p) in perm.iter().enumerate() {
                    vb[p] = va[k];
                }
                let j = cell_index(&cards_b, &vb);
                aligned_b[cell] = b.counts[j];
                diffs.push(fa[cell] - fb[j]);
            }
            let (g, d) = homogeneity_g2(&[a.counts.clone(), aligned_b]);
            let p = if d > 0 { chi2_pvalue(g, d as u32) } else { 1.0 };
            g2 += g;
            df += d;
            let pair_max = diffs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            max_diff = max_diff.max(pair_max);
            let labels = tables.cell_labels(a)?;
            let mut values: Vec<(String, f64)> = labels.iter().zip(&diffs).map(|(l, d)| (format!("diff_{l}"), *d)).collect();
            values.extend([("g2".to_string(), g), ("df".to_string(), d as f64), ("p_value".to_string(), p)]);
            let values: Vec<(&str, f64)> = values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            let item = if tables.conditions.len() > 1 {
                format!("{}/{} vs {}", a.condition, a.context_key(), b.context_key())
            } else {
                format!("{} vs {}", a.context_key(), b.context_key())
            };
            details.push(Detail::new(item, &values));
        }
    }
    if details.is_empty() {
        return Ok(DiagnosticReport::new(
            DiagnosticKind::OrderEffect,
            &[],
            Verdict::Inconclusive,
            vec![Detail::new("tables", &[]).with_note("no context appears in more than one order")],
        ));
    }
    let p = if df > 0 { chi2_pvalue(g2, df as u32) } else { 1.0 };
    Ok(DiagnosticReport::new(
        DiagnosticKind::OrderEffect,
        &[("max_abs_difference", max_diff), ("g2", g2), ("df", df as f64), ("p_value", p), ("alpha", ALPHA)],
        verdict_from_p(p),
        details,
    ))
}

/// Likelihood-ratio test of the saturated model against a single joint
/// distribution per condition.
pub fn joint_consistency_test(tables: &TableCollection, config: &OptimizerConfig) -> Result<DiagnosticReport> {
    let (_, sat) = saturated_fit(tables)?;
    let joint = joint_fit(tables, config)?;
    let diff = (joint.fit.g2 - sat.g2).max(0.0);
    let df = df_for_design(&design_of(tables)?, joint.fit.n_params);
    let mut stats = vec![
        ("g2_saturated", sat.g2),
        ("g2_joint", joint.fit.g2),
        ("g2_diff", diff),
        ("df", df as f64),
        ("params_saturated", sat.n_params as f64),
        ("params_joint", joint.fit.n_params as f64),
    ];
    if df <= 0 {
        let note = format!(
            "the design has {} free cell probabilities but the joint model has {} parameters, so it cannot be tested",
            sat.n_params, joint.fit.n_params
        );
        return Ok(DiagnosticReport::new(
            DiagnosticKind::JointTest,
            &stats,
            Verdict::Inconclusive,
            vec![Detail::new("design", &[("df", df as f64)]).with_note(note)],
        ));
    }
    let p = chi2_pvalue(diff, df as u32);
    stats.extend([("p_value", p), ("alpha", ALPHA)]);
    Ok(DiagnosticReport::new(DiagnosticKind::JointTest, &stats, verdict_from_p(p), vec![]))
}

fn check_cutoffs(cutoffs: &[f64]) -> Result<()> {
    if cutoffs.len() < 3 {
        return Err(Error::validation("need at least three cutoffs (two bins)"));
    }
    if cutoffs.iter().any(|c| !c.is_finite() || *c < 0.0) || cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("cutoffs must be nonnegative and strictly ascending"));
    }
    Ok(())
}

/// Expected bin frequencies for `n` draws from `χ²(df)` truncated to
/// `[cutoffs[0], cutoffs[last]]`.
pub fn lack_of_fit_expected(n: f64, cutoffs: &[f64], df: u32) -> Result<Vec<f64>> {
    check_cutoffs(cutoffs)?;
    if df == 0 {
        return Err(Error::validation("degrees of freedom must be positive"));
    }
    let cdf: Vec<f64> = cutoffs.iter().map(|&c| chi2_cdf(c, df)).collect();
    let range = cdf[cdf.len() - 1] - cdf[0];
    if !(range > 0.0) {
        return Err(Error::validation("the cutoff range has zero probability"));
    }
    Ok(cdf.windows(2).map(|w| n * (w[1] - w[0]) / range).collect())
}

/// Pearson test of observed bin counts against the truncated `χ²(df)`.
pub fn lack_of_fit_counts(observed: &[f64], cutoffs: &[f64], df: u32) -> Result<DiagnosticReport> {
    check_cutoffs(cutoffs)?;
    if observed.len() != cutoffs.len() - 1 {
        return Err(Error::validation(format!("{} cutoffs define {} bins, got {} counts", cutoffs.len(), cutoffs.len() - 1, observed.len())));
    }
    let n: f64 = observed.iter().sum();
    if !(n > 0.0) {
        return Err(Error::validation("no observations to bin"));
    }
    let expected = lack_of_fit_expected(n, cutoffs, df)?;
    let stat = pearson_chi2(observed, &expected)?;
    let bins = observed.len();
    let p = chi2_pvalue(stat, (bins - 1) as u32);
    let details = (0..bins)
        .map(|k| {
            Detail::new(
                format!("[{}, {})", cutoffs[k], cutoffs[k + 1]),
                &[("observed", observed[k]), ("expected", expected[k])],
            )
        })
        .collect();
    Ok(DiagnosticReport::new(
        DiagnosticKind::LackOfFit,
        &[
            ("pearson", stat),
            ("df", (bins - 1) as f64),
            ("p_value", p),
            ("n", n),
            ("reference_df", df as f64),
            ("alpha", ALPHA),
        ],
        verdict_from_p(p),
        details,
    ))
}

/// Bins `g2diffs` by `cutoffs` and compares the histogram with `χ²(df)`.
/// Values at or above the last cutoff fall in the last bin.
pub fn lack_of_fit_histogram(g2diffs: &[f64], cutoffs: &[f64], df: u32) -> Result<DiagnosticReport> {
    check_cutoffs(cutoffs)?;
    if g2diffs.is_empty() {
        return Err(Error::validation("no G² differences to bin"));
    }
    if g2diffs.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::validation("G² differences must be finite and nonnegative"));
    }
    let bins = cutoffs.len() - 1;
    let mut observed = vec![0.0; bins];
    let mut below = 0usize;
    for &g in g2diffs {
        if g < cutoffs[0] {
            below += 1;
            continue;
        }
        let k = (0..bins).find(|&k| g < cutoffs[k + 1]).unwrap_or(bins - 1);
        observed[k] += 1.0;
    }
    let mut report = lack_of_fit_counts(&observed, cutoffs, df)?;
    if below > 0 {
        report
            .details
            .push(Detail::new("below_first_cutoff", &[("count", below as f64)]).with_note("excluded from the histogram"));
    }
    Ok(report)
}
