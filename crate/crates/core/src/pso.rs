//! Particle swarm search over RIS phases with stagnation-driven inertia.
//!
//! Fitness is minimized; for rate maximization it is the negated closed-form
//! sum rate. Random coefficients are drawn sequentially from one generator and
//! fitness values are evaluated in parallel, so a run is reproducible from its
//! seed for any thread count.

use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{wrap_angle, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::LinkGains;
use crate::phases::{project_discrete, PhaseVector};
use crate::rate::{AnalyticRates, MomentModel};

/// How a particle is kept inside the phase box after a move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Clamp to `[0, 2π]` and zero the velocity component that hit the wall.
    Absorb,
    /// Reduce the position modulo `2π`.
    Wrap,
    /// Reduce modulo `2π` and zero the velocity component that crossed the seam.
    /// Without the reset an inertia above one pins |v| at `v_max = 2π`, a
    /// move that leaves the particle where it was.
    #[default]
    WrapReset,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absorb" => Ok(Boundary::Absorb),
            "wrap" => Ok(Boundary::Wrap),
            "wrap-reset" => Ok(Boundary::WrapReset),
            other => Err(Error::InvalidConfig(format!("unknown PSO boundary `{other}` (absorb|wrap)"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Absorb => "absorb",
            Boundary::Wrap => "wrap",
            Boundary::WrapReset => "wrap-reset",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub v_max: f64,
    /// Initial inertia weight.
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub inertia_bounds: (f64, f64),
    /// Draw `r1`, `r2` per coordinate instead of per particle.
    pub per_dimension_random: bool,
    /// Reset the stagnation counter before every adjustment.
    pub memoryless_stagnation: bool,
    pub boundary: Boundary,
}

impl PsoParams {
    /// `L = min(100, 10N)`, `T = 200N`, `v_max = 2π`, `ω = 0.9`, `c1 = c2 = 1.49`.
    pub fn reference(n: usize) -> Self {
        Self {
            swarm_size: (10 * n).min(100),
            iterations: 200 * n,
            v_max: TAU,
            inertia: 0.9,
            c1: 1.49,
            c2: 1.49,
            inertia_bounds: (0.1, 1.1),
            per_dimension_random: false,
            memoryless_stagnation: false,
            boundary: Boundary::WrapReset,
        }
    }

    /// Caps the iteration count.
    pub fn with_budget(mut self, max_iterations: Option<usize>) -> Self {
        if let Some(cap) = max_iterations {
            self.iterations = self.iterations.min(cap);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.inertia_bounds;
        if self.swarm_size == 0 {
            return Err(Error::InvalidConfig("PSO swarm size must be >= 1".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::InvalidConfig("PSO v_max must be > 0".into()));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::InvalidConfig("PSO acceleration constants must be >= 0".into()));
        }
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidConfig(format!("bad inertia bounds [{lo}, {hi}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsoState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best: Vec<Vec<f64>>,
    pub personal_fitness: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_fitness: f64,
    pub inertia: f64,
    pub stagnation: u32,
    /// Whether the last iteration strictly improved the global best.
    pub improved: bool,
    pub iteration: usize,
}

impl PsoState {
    /// Uniform positions on `[0, 2π)^N`, uniform velocities on `[-v_max, v_max]^N`.
    pub fn initialize<F>(dim: usize, params: &PsoParams, objective: &F, rng: &mut impl Rng) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        params.validate()?;
        let mut positions = Vec::with_capacity(params.swarm_size);
        let mut velocities = Vec::with_capacity(params.swarm_size);
        for _ in 0..params.swarm_size {
            positions.push((0..dim).map(|_| wrap_angle(rng.random::<f64>() * TAU)).collect::<Vec<_>>());
            velocities.push(
                (0..dim)
                    .map(|_| rng.random_range(-params.v_max..=params.v_max))
                    .collect::<Vec<_>>(),
            );
        }
        let fitness = evaluate_all(&positions, objective)?;
        let best = argmin(&fitness);
        Ok(Self {
            global_best: positions[best].clone(),
            global_fitness: fitness[best],
            personal_best: positions.clone(),
            personal_fitness: fitness,
            positions,
            velocities,
            inertia: params.inertia,
            stagnation: 0,
            improved: false,
            iteration: 0,
        })
    }
}

fn evaluate_all<F>(positions: &[Vec<f64>], objective: &F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    positions.par_iter().map(|p| objective(p)).collect()
}

/// First index of the smallest value.
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// One velocity/position move plus personal- and global-best bookkeeping.
/// Sets `state.improved`; does not touch the inertia.
pub fn pso_step<F>(state: &mut PsoState, params: &PsoParams, objective: &F, rng: &mut impl Rng) -> Result<()>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let dim = state.global_best.len();
    let omega = state.inertia;
    for i in 0..state.positions.len() {
        let (mut r1, mut r2) = (rng.random::<f64>(), rng.random::<f64>());
        for d in 0..dim {
            if params.per_dimension_random && d > 0 {
                r1 = rng.random();
                r2 = rng.random();
            }
            let x = state.positions[i][d];
            let v = omega * state.velocities[i][d]
                + params.c1 * r1 * (state.personal_best[i][d] - x)
                + params.c2 * r2 * (state.global_best[d] - x);
            let v = v.clamp(-params.v_max, params.v_max);
            let (x, v) = match params.boundary {
                Boundary::Wrap => (wrap_angle(x + v), v),
                Boundary::WrapReset if !(0.0..TAU).contains(&(x + v)) => (wrap_angle(x + v), 0.0),
                Boundary::WrapReset => (x + v, v),
                Boundary::Absorb if x + v < 0.0 => (0.0, 0.0),
                Boundary::Absorb if x + v > TAU => (TAU, 0.0),
                Boundary::Absorb => (x + v, v),
            };
            state.velocities[i][d] = v;
            state.positions[i][d] = x;
        }
    }
    let fitness = evaluate_all(&state.positions, objective)?;
    for (i, f) in fitness.iter().enumerate() {
        if *f < state.personal_fitness[i] {
            state.personal_fitness[i] = *f;
            state.personal_best[i] = state.positions[i].clone();
        }
    }
    let best = argmin(&state.personal_fitness);
    state.improved = state.personal_fitness[best] < state.global_fitness;
    if state.improved {
        state.global_fitness = state.personal_fitness[best];
        state.global_best = state.personal_best[best].clone();
    }
    state.iteration += 1;
    Ok(())
}

/// Stagnation counter and inertia update after an iteration.
///
/// No improvement: the counter grows and the inertia is left alone.
/// Improvement: the counter shrinks by one (floored at 0), then the inertia
/// doubles if the counter is below 2 or halves if it is above 5. The inertia
/// is clamped to the configured bounds afterwards.
pub fn adjust_adaptive_parameter(state: &mut PsoState, params: &PsoParams) {
    if params.memoryless_stagnation {
        state.stagnation = 0;
    }
    if !state.improved {
        state.stagnation += 1;
        return;
    }
    state.stagnation = state.stagnation.saturating_sub(1);
    if state.stagnation < 2 {
        state.inertia *= 2.0;
    } else if state.stagnation > 5 {
        state.inertia /= 2.0;
    }
    let (lo, hi) = params.inertia_bounds;
    state.inertia = state.inertia.clamp(lo, hi);
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsoOutcome {
    pub best: PhaseVector,
    pub best_fitness: f64,
    /// Global-best fitness after initialization and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub swarm_size: usize,
}

/// Full swarm run: initialize, then `params.iterations` steps with inertia
/// adaptation.
pub fn pso_minimize<F>(dim: usize, params: &PsoParams, objective: &F, rng: &mut impl Rng) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let mut state = PsoState::initialize(dim, params, objective, rng)?;
    let mut trace = Vec::with_capacity(params.iterations + 1);
    trace.push(state.global_fitness);
    for _ in 0..params.iterations {
        pso_step(&mut state, params, objective, rng)?;
        adjust_adaptive_parameter(&mut state, params);
        trace.push(state.global_fitness);
    }
    Ok(PsoOutcome {
        best: PhaseVector::continuous(state.global_best),
        best_fitness: state.global_fitness,
        trace,
        iterations: params.iterations,
        swarm_size: params.swarm_size,
    })
}

/// Negated closed-form sum rate.
pub fn fitness(phases: &PhaseVector, config: &ScenarioConfig, gains: &LinkGains, model: MomentModel) -> Result<f64> {
    Ok(-AnalyticRates::new(config, gains, model)?.sum_rate(phases.as_slice())?)
}

/// Objective closure over a prepared evaluator.
pub fn sum_rate_objective(rates: &AnalyticRates) -> impl Fn(&[f64]) -> Result<f64> + Sync + '_ {
    move |theta| Ok(-rates.sum_rate(theta)?)
}

/// Optimized phases for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDesign {
    pub phases: PhaseVector,
    pub sum_rate: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub swarm_size: usize,
}

/// Maximizes the closed-form sum rate over continuous phases.
pub fn pso_optimize(rates: &AnalyticRates, params: &PsoParams, rng: &mut impl Rng) -> Result<PhaseDesign> {
    let objective = sum_rate_objective(rates);
    let out = pso_minimize(rates.elements(), params, &objective, rng)?;
    Ok(PhaseDesign {
        phases: out.best,
        sum_rate: -out.best_fitness,
        trace: out.trace,
        iterations: out.iterations,
        swarm_size: out.swarm_size,
    })
}

/// Projects a continuous design onto the `B`-bit grid, optionally followed by
/// a coordinate-wise search over neighbouring grid points.
pub fn discrete_design(
    rates: &AnalyticRates,
    continuous: &PhaseVector,
    bits: u32,
    local_search_passes: usize,
) -> Result<(PhaseVector, f64)> {
    let mut phases = project_discrete(continuous, bits)?;
    let mut best = rates.sum_rate(phases.as_slice())?;
    let levels = 1u64 << bits;
    let step = TAU / levels as f64;
    for _ in 0..local_search_passes {
        let mut moved = false;
        let mut idx: Vec<u64> = phases.as_slice().iter().map(|t| (t / step).round() as u64 % levels).collect();
        for n in 0..idx.len() {
            let here = idx[n];
            for cand in [(here + 1) % levels, (here + levels - 1) % levels] {
                idx[n] = cand;
                let trial = PhaseVector::from_grid_indices(&idx, bits)?;
                let r = rates.sum_rate(trial.as_slice())?;
                if r > best {
                    best = r;
                    phases = trial;
                    moved = true;
                    break;
                }
                idx[n] = here;
            }
            idx = phases.as_slice().iter().map(|t| (t / step).round() as u64 % levels).collect();
        }
        if !moved {
            break;
        }
    }
    Ok((phases, best))
}
