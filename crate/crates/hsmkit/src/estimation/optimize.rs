//! Bounded global minimization: particle swarm with restarts, followed by a
//! Nelder–Mead polish of each restart's best point.
//!
//! # Determinism
//!
//! Restart `r` draws every random number from `ChaCha8Rng::seed_from_u64(seed)`
//! switched to stream `r` (`set_stream(r)`), so restarts are independent
//! substreams of one seed and the whole run is a pure function of
//! `(objective, bounds, config)`. When `parallel` is set, particle evaluations
//! run on the rayon pool, but random draws and best-point reductions stay in
//! particle-index order, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub restarts: usize,
    pub seed: u64,
    pub polish: bool,
    pub polish_tolerance: f64,
    /// A restart stops early once the swarm best has not improved for this many
    /// iterations. Zero disables the check.
    pub stall_iterations: usize,
    /// Evaluate particles of one generation concurrently.
    pub parallel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            swarm_size: 40,
            iterations: 2000,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            restarts: 10,
            seed: 0,
            polish: true,
            polish_tolerance: 1e-10,
            stall_iterations: 300,
            parallel: false,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::validation("swarm_size must be at least 2"));
        }
        if self.iterations < 1 {
            return Err(Error::validation("iterations must be at least 1"));
        }
        if self.restarts < 1 {
            return Err(Error::validation("restarts must be at least 1"));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
            ("polish_tolerance", self.polish_tolerance),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(format!("{name} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

/// Outcome of [`minimize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
    /// Final (polished) value of each restart, in restart order.
    pub per_restart: Vec<f64>,
    /// Swarm best after initialization and after every iteration, per restart.
    pub traces: Vec<Vec<f64>>,
}

pub(crate) fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::validation("optimization needs at least one parameter"));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::validation(format!("bounds for parameter {i} are invalid: [{lo}, {hi}]")));
        }
    }
    Ok(())
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `objective` over the box `bounds`.
///
/// The objective may return `+∞` (or NaN, treated as `+∞`) for infeasible points.
pub fn minimize<F>(objective: F, bounds: &[(f64, f64)], config: &OptimizerConfig) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    check_bounds(bounds)?;

    let mut evaluations = 0u64;
    let mut per_restart = Vec::with_capacity(config.restarts);
    let mut traces = Vec::with_capacity(config.restarts);
    let mut best: Option<(Vec<f64>, f64)> = None;

    for restart in 0..config.restarts {
        let run = run_restart(&objective, bounds, config, restart);
        evaluations += run.evaluations;
        per_restart.push(run.value);
        traces.push(run.trace);
        if best.as_ref().is_none_or(|(_, b)| run.value < *b) {
            best = Some((run.x, run.value));
        }
    }

    let (x, value) = best.expect("at least one restart");
    if !value.is_finite() {
        return Err(Error::Optimization {
            message: format!("all {} restarts ended with a non-finite objective", config.restarts),
            best_value: value,
            best_params: x,
        });
    }
    Ok(Minimum {
        x,
        value,
        evaluations,
        per_restart,
        traces,
    })
}

/// One restart: swarm on substream `restart`, then the optional polish.
pub(crate) struct RestartOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
    pub trace: Vec<f64>,
}

/// Runs restart `restart` of [`minimize`] on its own. Callers must have
/// validated `config` and `bounds`.
pub(crate) fn run_restart<F>(objective: &F, bounds: &[(f64, f64)], config: &OptimizerConfig, restart: usize) -> RestartOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);
    let swarm = run_swarm(objective, bounds, config, &mut rng);
    let mut evaluations = swarm.evaluations;
    let (mut x, mut value) = (swarm.best_x, swarm.best_value);
    if config.polish && value.is_finite() {
        let polished = polish(objective, &x, value, bounds, config.polish_tolerance);
        evaluations += polished.evaluations;
        if polished.value < value {
            x = polished.x;
            value = polished.value;
        }
    }
    RestartOutcome {
        x,
        value,
        evaluations,
        trace: swarm.trace,
    }
}

struct SwarmOutcome {
    best_x: Vec<f64>,
    best_value: f64,
    evaluations: u64,
    trace: Vec<f64>,
}

fn evaluate_all<F>(objective: &F, positions: &[Vec<f64>], parallel: bool) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if parallel {
        positions.par_iter().map(|p| sanitize(objective(p))).collect()
    } else {
        positions.iter().map(|p| sanitize(objective(p))).collect()
    }
}

fn run_swarm<F>(objective: &F, bounds: &[(f64, f64)], config: &OptimizerConfig, rng: &mut ChaCha8Rng) -> SwarmOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = bounds.len();
    let n = config.swarm_size;
    let vmax: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (hi - lo)).collect();

    let mut positions: Vec<Vec<f64>> = (0..n)
        .map(|_| bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
        .collect();
    let mut velocities: Vec<Vec<f64>> = (0..n)
        .map(|_| vmax.iter().map(|&m| 0.2 * m * (2.0 * rng.random::<f64>() - 1.0)).collect())
        .collect();

    let values = evaluate_all(objective, &positions, config.parallel);
    let mut evaluations = n as u64;
    let mut pbest = positions.clone();
    let mut pbest_val = values;

    let mut g = 0;
    for i in 1..n {
        if pbest_val[i] < pbest_val[g] {
            g = i;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gbest_val = pbest_val[g];
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(gbest_val);
    let mut stall = 0usize;

    for _ in 0..config.iterations {
        for i in 0..n {
            let (x, v) = (&mut positions[i], &mut velocities[i]);
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let mut vel = config.inertia * v[d]
                    + config.cognitive * r1 * (pbest[i][d] - x[d])
                    + config.social * r2 * (gbest[d] - x[d]);
                vel = vel.clamp(-vmax[d], vmax[d]);
                let (lo, hi) = bounds[d];
                let mut pos = x[d] + vel;
                if pos < lo {
                    pos = lo;
                    vel = 0.0;
                } else if pos > hi {
                    pos = hi;
                    vel = 0.0;
                }
                x[d] = pos;
                v[d] = vel;
            }
        }

        let values = evaluate_all(objective, &positions, config.parallel);
        evaluations += n as u64;
        let previous = gbest_val;
        for i in 0..n {
            if values[i] < pbest_val[i] {
                pbest_val[i] = values[i];
                pbest[i].clone_from(&positions[i]);
                if values[i] < gbest_val {
                    gbest_val = values[i];
                    gbest.clone_from(&positions[i]);
                }
            }
        }
        trace.push(gbest_val);

        let improved = previous - gbest_val > 1e-12 * (1.0 + gbest_val.abs());
        stall = if improved || !gbest_val.is_finite() { 0 } else { stall + 1 };
        if config.stall_iterations > 0 && stall >= config.stall_iterations {
            break;
        }
    }

    SwarmOutcome {
        best_x: gbest,
        best_value: gbest_val,
        evaluations,
        trace,
    }
}

struct Polished {
    x: Vec<f64>,
    value: f64,
    evaluations: u64,
}

/// Repeated bounded Nelder–Mead from `x0`, restarting the simplex until a
/// restart no longer improves the value by more than `tolerance`.
fn polish<F>(objective: &F, x0: &[f64], f0: f64, bounds: &[(f64, f64)], tolerance: f64) -> Polished
where
    F: Fn(&[f64]) -> f64,
{
    const MAX_ROUNDS: usize = 8;
    let mut x = x0.to_vec();
    let mut value = f0;
    let mut evaluations = 0;
    for _ in 0..MAX_ROUNDS {
        let (nx, nv, evals) = nelder_mead(objective, &x, value, bounds, tolerance);
        evaluations += evals;
        let gain = value - nv;
        if nv < value {
            x = nx;
            value = nv;
        }
        if !(gain > tolerance) {
            break;
        }
    }
    Polished { x, value, evaluations }
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn nelder_mead<F>(objective: &F, x0: &[f64], f0: f64, bounds: &[(f64, f64)], tolerance: f64) -> (Vec<f64>, f64, u64)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    let max_evals = 400 * (dim as u64 + 1);
    let evals = std::cell::Cell::new(0u64);
    let eval = |p: &[f64]| {
        evals.set(evals.get() + 1);
        sanitize(objective(p))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f0));
    for d in 0..dim {
        let (lo, hi) = bounds[d];
        let step = 0.05 * (hi - lo);
        let mut p = x0.to_vec();
        p[d] = if p[d] + step <= hi { p[d] + step } else { p[d] - step };
        if step == 0.0 {
            p[d] = lo;
        }
        let f = eval(&p);
        simplex.push((p, f));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() <= tolerance || evals.get() >= max_evals {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (p, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / dim as f64;
            }
        }
        let toward = |t: f64, from: &[f64]| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(from).map(|(c, w)| c + t * (w - c)).collect();
            clamp_into(&mut p, bounds);
            p
        };

        let worst_point = simplex[dim].0.clone();
        let reflected = toward(-1.0, &worst_point);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = toward(-2.0, &worst_point);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst {
            let p = toward(-0.5, &worst_point);
            let f = eval(&p);
            (p, f)
        } else {
            let p = toward(0.5, &worst_point);
            let f = eval(&p);
            (p, f)
        };
        if fc < worst.min(fr) {
            simplex[dim] = (contracted, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let anchor = simplex[0].0.clone();
        for (p, f) in simplex.iter_mut().skip(1) {
            for (v, a) in p.iter_mut().zip(&anchor) {
                *v = a + 0.5 * (*v - a);
            }
            *f = eval(p);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    (x, f, evals.get())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            iterations: 300,
            restarts: 3,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn shifted_sphere() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>();
        let m = minimize(f, &[(0.0, 1.0); 3], &quick()).unwrap();
        for v in &m.x {
            assert!((v - 0.3).abs() < 1e-6, "{:?}", m.x);
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[(-2.0, 2.0); 2], &OptimizerConfig::default()).unwrap();
        assert!(m.value <= 1e-6, "value {}", m.value);
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + (x[1] - 0.2).powi(2) + x[2].cos();
        let cfg = quick().with_seed(42);
        let a = minimize(f, &[(-3.0, 3.0); 3], &cfg).unwrap();
        let b = minimize(f, &[(-3.0, 3.0); 3], &cfg).unwrap();
        assert_eq!(a, b);
        let par = minimize(f, &[(-3.0, 3.0); 3], &OptimizerConfig { parallel: true, ..cfg }).unwrap();
        assert_eq!(a.x, par.x);
        assert_eq!(a.value.to_bits(), par.value.to_bits());
    }

    #[test]
    fn infinite_everywhere_is_an_error() {
        let err = minimize(|_| f64::INFINITY, &[(0.0, 1.0)], &quick()).unwrap_err();
        assert!(matches!(err, Error::Optimization { .. }));
    }

    #[test]
    fn routes_around_infeasible_regions() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { (x[0] - 0.7).powi(2) };
        let m = minimize(f, &[(0.0, 1.0)], &quick()).unwrap();
        assert!((m.x[0] - 0.7).abs() < 1e-5);
    }

    #[test]
    fn invalid_inputs() {
        let f = |x: &[f64]| x[0];
        assert!(minimize(f, &[(1.0, 0.0)], &quick()).is_err());
        assert!(minimize(f, &[], &quick()).is_err());
        let bad = OptimizerConfig { swarm_size: 1, ..quick() };
        assert!(minimize(f, &[(0.0, 1.0)], &bad).is_err());
    }

    #[test]
    fn reported_value_matches_objective_at_returned_point() {
        let f = |x: &[f64]| (x[0] - 1.0).abs() + (x[1] + 0.5).powi(2);
        let m = minimize(f, &[(-2.0, 2.0); 2], &quick()).unwrap();
        assert_eq!(m.value, f(&m.x));
        assert_eq!(m.value, m.per_restart.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn best_so_far_is_monotone_and_never_beaten_by_samples(
            seed in any::<u64>(), a in -1.0..1.0f64, b in -1.0..1.0f64
        ) {
            let f = |x: &[f64]| (x[0] - a).powi(2) + (x[1] - b).powi(2) + 0.1 * (5.0 * x[0]).sin();
            let cfg = OptimizerConfig { iterations: 40, restarts: 2, swarm_size: 8, seed, ..OptimizerConfig::default() };
            let m = minimize(f, &[(-2.0, 2.0); 2], &cfg).unwrap();
            for trace in &m.traces {
                prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
                prop_assert!(m.value <= *trace.last().unwrap());
            }
            let again = minimize(f, &[(-2.0, 2.0); 2], &cfg).unwrap();
            prop_assert_eq!(m, again);
        }
    }
}
