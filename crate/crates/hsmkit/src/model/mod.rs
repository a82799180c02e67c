//! HSM models: a compatibility structure compiled into a parameterized family
//! of states and projectors.
//!
//! # Parameter layout
//!
//! A parameter vector holds one state block per condition, in condition order,
//! followed by rotation blocks. With `shared_rotations` there is one group of
//! rotation blocks; otherwise one group per condition, in condition order.
//! Inside a group, rotated variables appear in slot order and, within a slot,
//! in the order they are declared in `variables`.
//!
//! State blocks are described in [`ModelSpec`]'s `state_field`: a complex state
//! of dimension `N` uses `2(N−1)` values and a real one `N−1`. A full rotation
//! of a slot of dimension `d` uses `d²−1` values (see [`hermitian_from_params`])
//! and a planar rotation uses a single `θ ∈ [0, 1]`.

mod params;
mod simulate;
mod spec;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::estimation::{g_squared, minimize, FitResult, OptimizerConfig};
use crate::linalg::{unitary_from_hermitian, Complex, ComplexMatrix};
use crate::quantum::{embed_in_slots, indicator_projector, rotate_projector, Projector, StateVector};
use crate::tables::{context_cardinalities, Table, TableCollection, VariableSpec};

pub use params::{hermitian_from_params, planar_rotation, transition_matrix, HERMITIAN_BOUND};
pub use simulate::{Design, DesignRow};
pub use spec::{Assignment, FrameSpec, ModelSpec, SlotSpec, StateField};

#[derive(Clone, Debug)]
struct CompiledVariable {
    slot: usize,
    frame: FrameSpec,
    n_values: usize,
    /// Eigen-indices per value inside the slot.
    block: usize,
    /// Offset of this variable's rotation block within a rotation group.
    rotation_offset: usize,
}

/// A validated [`ModelSpec`] with its derived dimensions and parameter layout.
#[derive(Clone, Debug)]
pub struct HsmModel {
    spec: ModelSpec,
    slot_dims: Vec<usize>,
    dim: usize,
    vars: Vec<CompiledVariable>,
    index: HashMap<String, usize>,
    state_len: usize,
    group_len: usize,
}

/// Projectors of every variable and value for one condition.
#[derive(Clone, Debug)]
pub struct ProjectorSet {
    names: Vec<String>,
    projectors: Vec<Vec<Projector>>,
}

impl ProjectorSet {
    /// Projectors of a variable, one per value.
    pub fn of(&self, variable: &str) -> Option<&[Projector]> {
        let i = self.names.iter().position(|n| n == variable)?;
        Some(&self.projectors[i])
    }

    pub fn get(&self, variable: &str, value: usize) -> Option<&Projector> {
        self.of(variable)?.get(value)
    }
}

impl HsmModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let index: HashMap<String, usize> = spec.variables.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        let slot_dims: Vec<usize> = spec
            .slots
            .iter()
            .map(|s| spec.variables[index[&s.reference_variable]].cardinality() * s.multiplicity)
            .collect();
        let dim: usize = slot_dims.iter().product();
        if dim < 2 {
            return Err(Error::validation("the model's Hilbert space must have dimension at least 2"));
        }

        let mut vars: Vec<CompiledVariable> = spec
            .variables
            .iter()
            .map(|v| {
                let a = spec.assignment[&v.name];
                let d = slot_dims[a.slot];
                if d % v.cardinality() != 0 {
                    return Err(Error::validation(format!(
                        "variable {} has {} values, which do not divide slot dimension {d}",
                        v.name,
                        v.cardinality()
                    )));
                }
                if a.frame == FrameSpec::RotatedPlanar && d != 2 {
                    return Err(Error::validation(format!(
                        "variable {} uses a planar rotation but slot {} has dimension {d}",
                        v.name, a.slot
                    )));
                }
                Ok(CompiledVariable {
                    slot: a.slot,
                    frame: a.frame,
                    n_values: v.cardinality(),
                    block: d / v.cardinality(),
                    rotation_offset: 0,
                })
            })
            .collect::<Result<_>>()?;

        let mut group_len = 0;
        for slot in 0..slot_dims.len() {
            for var in vars.iter_mut().filter(|v| v.slot == slot) {
                var.rotation_offset = group_len;
                group_len += match var.frame {
                    FrameSpec::Reference => 0,
                    FrameSpec::RotatedFull => params::hermitian_param_count(slot_dims[slot]),
                    FrameSpec::RotatedPlanar => 1,
                };
            }
        }

        Ok(Self {
            state_len: params::state_param_count(spec.state_field, dim),
            spec,
            slot_dims,
            dim,
            vars,
            index,
            group_len,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Dimension `N` of the Hilbert space.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slot_dims(&self) -> &[usize] {
        &self.slot_dims
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.spec.variables
    }

    pub fn conditions(&self) -> &[String] {
        &self.spec.conditions
    }

    fn n_groups(&self) -> usize {
        if self.spec.shared_rotations {
            1
        } else {
            self.spec.conditions.len()
        }
    }

    pub fn param_count(&self) -> usize {
        self.spec.conditions.len() * self.state_len + self.n_groups() * self.group_len
    }

    /// Number of values in each condition's state block.
    pub fn state_param_count(&self) -> usize {
        self.state_len
    }

    /// Number of values in one rotation group.
    pub fn rotation_param_count(&self) -> usize {
        self.group_len
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = Vec::with_capacity(self.param_count());
        for _ in &self.spec.conditions {
            b.extend(params::state_bounds(self.spec.state_field, self.dim));
        }
        for _ in 0..self.n_groups() {
            for slot in 0..self.slot_dims.len() {
                for var in self.vars.iter().filter(|v| v.slot == slot) {
                    match var.frame {
                        FrameSpec::Reference => {}
                        FrameSpec::RotatedFull => b.extend(params::hermitian_bounds(self.slot_dims[slot])),
                        FrameSpec::RotatedPlanar => b.push((0.0, 1.0)),
                    }
                }
            }
        }
        b
    }

    pub fn condition_index(&self, condition: &str) -> Result<usize> {
        self.spec
            .conditions
            .iter()
            .position(|c| c == condition)
            .ok_or_else(|| Error::validation(format!("unknown condition {condition:?}")))
    }

    fn variable_index(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::validation(format!("unknown variable {name}")))
    }

    fn check_len(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::validation(format!(
                "parameter vector has {} values, the model needs {}",
                params.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    pub fn unpack_state(&self, params: &[f64], condition: &str) -> Result<StateVector> {
        self.check_len(params)?;
        let c = self.condition_index(condition)?;
        params::unpack_state(self.spec.state_field, self.dim, &params[c * self.state_len..(c + 1) * self.state_len])
    }

    /// State block reproducing `psi` (up to a global phase).
    pub fn pack_state(&self, psi: &StateVector) -> Result<Vec<f64>> {
        if psi.dim() != self.dim {
            return Err(Error::shape(format!("state has dimension {}, model has {}", psi.dim(), self.dim)));
        }
        params::pack_state(self.spec.state_field, psi)
    }

    /// Assembles a full parameter vector from per-condition state blocks and
    /// rotation groups.
    pub fn assemble(&self, states: &[Vec<f64>], rotations: &[Vec<f64>]) -> Result<Vec<f64>> {
        if states.len() != self.spec.conditions.len() || rotations.len() != self.n_groups() {
            return Err(Error::validation(format!(
                "expected {} state blocks and {} rotation groups",
                self.spec.conditions.len(),
                self.n_groups()
            )));
        }
        let mut out = Vec::with_capacity(self.param_count());
        for s in states {
            if s.len() != self.state_len {
                return Err(Error::validation("state block has the wrong length"));
            }
            out.extend(s);
        }
        for r in rotations {
            if r.len() != self.group_len {
                return Err(Error::validation("rotation group has the wrong length"));
            }
            out.extend(r);
        }
        Ok(out)
    }

    fn rotation_block<'a>(&self, params: &'a [f64], condition: usize, var: usize) -> &'a [f64] {
        let group = if self.spec.shared_rotations { 0 } else { condition };
        let start = self.spec.conditions.len() * self.state_len + group * self.group_len + self.vars[var].rotation_offset;
        let len = match self.vars[var].frame {
            FrameSpec::Reference => 0,
            FrameSpec::RotatedFull => params::hermitian_param_count(self.slot_dims[self.vars[var].slot]),
            FrameSpec::RotatedPlanar => 1,
        };
        &params[start..start + len]
    }

    /// Slot-level unitary taking the slot's reference basis to the variable's basis.
    pub fn rotation_unitary(&self, params: &[f64], condition: &str, variable: &str) -> Result<ComplexMatrix> {
        self.check_len(params)?;
        let c = self.condition_index(condition)?;
        let v = self.variable_index(variable)?;
        self.unitary_for(params, c, v)
    }

    fn unitary_for(&self, params: &[f64], condition: usize, var: usize) -> Result<ComplexMatrix> {
        let d = self.slot_dims[self.vars[var].slot];
        let block = self.rotation_block(params, condition, var);
        match self.vars[var].frame {
            FrameSpec::Reference => Ok(ComplexMatrix::identity(d)),
            FrameSpec::RotatedFull => unitary_from_hermitian(&hermitian_from_params(d, block)?),
            FrameSpec::RotatedPlanar => Ok(planar_rotation(block[0])),
        }
    }

    fn projectors_for(&self, params: &[f64], condition: usize) -> Result<Vec<Vec<Projector>>> {
        self.vars
            .iter()
            .enumerate()
            .map(|(i, var)| {
                let d = self.slot_dims[var.slot];
                let u = self.unitary_for(params, condition, i)?;
                (0..var.n_values)
                    .map(|k| {
                        let ones: Vec<usize> = (k * var.block..(k + 1) * var.block).collect();
                        let m = indicator_projector(d, &ones)?;
                        let local = if var.frame == FrameSpec::Reference { m } else { rotate_projector(&u, &m)? };
                        embed_in_slots(&local, var.slot, &self.slot_dims)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn build_projectors(&self, params: &[f64], condition: &str) -> Result<ProjectorSet> {
        self.check_len(params)?;
        let c = self.condition_index(condition)?;
        Ok(ProjectorSet {
            names: self.spec.variables.iter().map(|v| v.name.clone()).collect(),
            projectors: self.projectors_for(params, c)?,
        })
    }

    fn context_indices<S: AsRef<str>>(&self, context: &[S]) -> Result<Vec<usize>> {
        if context.is_empty() {
            return Err(Error::validation("a context needs at least one variable"));
        }
        let idx = context.iter().map(|n| self.variable_index(n.as_ref())).collect::<Result<Vec<_>>>()?;
        for (i, v) in idx.iter().enumerate() {
            if idx[..i].contains(v) {
                return Err(Error::validation(format!("variable {} appears twice in the context", context[i].as_ref())));
            }
        }
        Ok(idx)
    }

    /// Probability table of measuring `context` in the given order.
    pub fn predict_context<S: AsRef<str>>(&self, params: &[f64], condition: &str, context: &[S]) -> Result<Vec<f64>> {
        self.predict(params, condition, context, false)
    }

    /// Like [`predict_context`](Self::predict_context) but averaged over every
    /// presentation order, with cells still labelled in the given order.
    pub fn predict_pooled<S: AsRef<str>>(&self, params: &[f64], condition: &str, context: &[S]) -> Result<Vec<f64>> {
        self.predict(params, condition, context, true)
    }

    /// Prediction matching a table's condition, context and pooling flag.
    pub fn predict_table(&self, params: &[f64], table: &Table) -> Result<Vec<f64>> {
        self.predict(params, &table.condition, &table.context, table.pooled_orders)
    }

    fn predict<S: AsRef<str>>(&self, params: &[f64], condition: &str, context: &[S], pooled: bool) -> Result<Vec<f64>> {
        self.check_len(params)?;
        let c = self.condition_index(condition)?;
        let vars = self.context_indices(context)?;
        let psi = self.unpack_state(params, condition)?;
        let projectors = self.projectors_for(params, c)?;
        Ok(self.predict_compiled(psi.coords(), &projectors, &vars, pooled))
    }

    fn predict_compiled(&self, psi: &[Complex], projectors: &[Vec<Projector>], vars: &[usize], pooled: bool) -> Vec<f64> {
        let cards: Vec<usize> = vars.iter().map(|&v| self.vars[v].n_values).collect();
        if !pooled || vars.len() == 1 {
            return sequence_table(psi, projectors, vars);
        }
        let orders = permutations(vars.len());
        let mut out = vec![0.0; cards.iter().product()];
        for order in &orders {
            let permuted: Vec<usize> = order.iter().map(|&k| vars[k]).collect();
            let table = sequence_table(psi, projectors, &permuted);
            let pcards: Vec<usize> = order.iter().map(|&k| cards[k]).collect();
            for (i, p) in table.iter().enumerate() {
                let pv = crate::tables::cell_values(&pcards, i);
                let mut values = vec![0; vars.len()];
                for (pos, &k) in order.iter().enumerate() {
                    values[k] = pv[pos];
                }
                out[crate::tables::cell_index(&cards, &values)] += p / orders.len() as f64;
            }
        }
        out
    }

    /// Distribution of one variable measured alone.
    pub fn alone_probabilities(&self, params: &[f64], condition: &str, variable: &str) -> Result<Vec<f64>> {
        self.predict_context(params, condition, &[variable])
    }

    fn check_tables(&self, tables: &TableCollection) -> Result<()> {
        tables.validate()?;
        for (t, table) in tables.tables.iter().enumerate() {
            self.condition_index(&table.condition)
                .map_err(|e| Error::validation(format!("table {t}: {e}")))?;
            let theirs = context_cardinalities(&tables.variables, &table.context)?;
            let ours = context_cardinalities(&self.spec.variables, &table.context)
                .map_err(|e| Error::validation(format!("table {t}: {e}")))?;
            if theirs != ours {
                return Err(Error::validation(format!(
                    "table {t}: variable cardinalities differ between data and model"
                )));
            }
        }
        Ok(())
    }

    /// Predicted tables for every table of a collection.
    pub fn predict_collection(&self, params: &[f64], tables: &TableCollection) -> Result<Vec<Vec<f64>>> {
        self.check_tables(tables)?;
        tables.tables.iter().map(|t| self.predict_table(params, t)).collect()
    }

    /// `G²` of `params` against a collection.
    pub fn g_squared(&self, params: &[f64], tables: &TableCollection) -> Result<f64> {
        let predicted = self.predict_collection(params, tables)?;
        g_squared(&predicted, &tables.counts())
    }

    /// Maximum-likelihood fit to `tables`.
    pub fn fit(&self, tables: &TableCollection, config: &OptimizerConfig) -> Result<FitResult> {
        self.check_tables(tables)?;
        let compiled: Vec<(usize, Vec<usize>, bool, &[f64])> = tables
            .tables
            .iter()
            .map(|t| {
                Ok((
                    self.condition_index(&t.condition)?,
                    self.context_indices(&t.context)?,
                    t.pooled_orders,
                    t.counts.as_slice(),
                ))
            })
            .collect::<Result<_>>()?;
        let n_conditions = self.spec.conditions.len();

        let objective = |x: &[f64]| -> f64 {
            let mut total = 0.0;
            for c in 0..n_conditions {
                let Ok(psi) = params::unpack_state(self.spec.state_field, self.dim, &x[c * self.state_len..(c + 1) * self.state_len]) else {
                    return f64::INFINITY;
                };
                let Ok(projectors) = self.projectors_for(x, c) else {
                    return f64::INFINITY;
                };
                for (tc, vars, pooled, counts) in &compiled {
                    if *tc != c {
                        continue;
                    }
                    let p = self.predict_compiled(psi.coords(), &projectors, vars, *pooled);
                    for (pi, ni) in p.iter().zip(counts.iter()) {
                        if *ni > 0.0 {
                            total += ni * pi.max(crate::estimation::PROBABILITY_FLOOR).ln();
                        }
                    }
                }
            }
            -2.0 * total
        };

        let best = minimize(objective, &self.bounds(), config)?;
        Ok(FitResult::new(
            best.x,
            best.value,
            self.param_count(),
            tables.total_count().max(1.0),
            best.evaluations,
            best.per_restart,
        ))
    }
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Cell probabilities of a measurement sequence, first variable slowest.
fn sequence_table(psi: &[Complex], projectors: &[Vec<Projector>], vars: &[usize]) -> Vec<f64> {
    fn rec(v: &[Complex], projectors: &[Vec<Projector>], vars: &[usize], out: &mut Vec<f64>) {
        match vars.split_first() {
            None => out.push(v.iter().map(|c| c.norm_sqr()).sum()),
            Some((&first, rest)) => {
                for p in &projectors[first] {
                    let w = p.apply(v).expect("projector dimensions match the state");
                    rec(&w, projectors, rest, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(psi, projectors, vars, &mut out);
    out
}
