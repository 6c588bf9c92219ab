//! Closed-loop rollouts.

use rand::Rng;

use crate::controllers::{ConditioningVector, Policy};
use crate::plant::{
    apply_force_noise, plant_force, rk4_step, sample_force_bias, sample_initial_state, NoiseScales, PlantParams,
    SimLimits, State,
};

/// Time-indexed record of one closed-loop episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub initial: State,
    /// Planned number of control ticks.
    pub steps: usize,
    /// Post-step states `s(1) ..`; shorter than `steps` when the episode diverged.
    pub states: Vec<State>,
    /// Applied controller-frame forces after bias and saturation.
    pub forces: Vec<f64>,
    /// Per-tick `∂f/∂(x, v, θ, ω)`.
    pub sensitivities: Vec<[f64; 4]>,
    pub bias: f64,
    pub diverged: bool,
}

impl EpisodeTrace {
    /// Initial state followed by all post-step states.
    pub fn full_states(&self) -> impl Iterator<Item = &State> {
        std::iter::once(&self.initial).chain(self.states.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSpec {
    pub steps: usize,
    pub noise: NoiseScales,
    pub limits: SimLimits,
}

/// Rolls out from a given initial state and bias force.
pub fn run_episode_from(
    policy: &mut dyn Policy,
    plant: &PlantParams,
    cond: &ConditioningVector,
    initial: State,
    bias: f64,
    steps: usize,
    lim: &SimLimits,
) -> EpisodeTrace {
    policy.reset();
    let mut trace = EpisodeTrace {
        initial,
        steps,
        states: Vec::with_capacity(steps),
        forces: Vec::with_capacity(steps),
        sensitivities: Vec::with_capacity(steps),
        bias,
        diverged: false,
    };
    let mut s = initial;
    for _ in 0..steps {
        let out = policy.step(&s, cond);
        trace.sensitivities.push(out.sensitivity);
        let f = apply_force_noise(out.force, bias, lim);
        trace.forces.push(f);
        match rk4_step(&s, plant_force(f), plant, lim) {
            Ok(next) => {
                trace.states.push(next);
                s = next;
            }
            Err(_) => {
                trace.diverged = true;
                break;
            }
        }
    }
    trace
}

/// Samples the initial state and bias force from `rng`, then rolls out.
pub fn run_episode<R: Rng + ?Sized>(
    policy: &mut dyn Policy,
    plant: &PlantParams,
    cond: &ConditioningVector,
    spec: &EpisodeSpec,
    rng: &mut R,
) -> EpisodeTrace {
    let initial = sample_initial_state(rng, &spec.noise);
    let bias = sample_force_bias(rng, &spec.noise);
    run_episode_from(policy, plant, cond, initial, bias, spec.steps, &spec.limits)
}
