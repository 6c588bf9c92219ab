//! State-tracking and gain-regularization losses.

use serde::{Deserialize, Serialize};

use super::episode::EpisodeTrace;
use crate::controllers::GainSet;
use crate::error::{Error, Result};

/// Per-term ceiling on `|s| / s_base`; also the value charged for every step
/// a diverged episode did not reach.
pub const DIVERGENCE_CAP: f64 = 10.0;

/// Reference scales normalizing each state in the loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseScales {
    pub x: f64,
    pub v: f64,
    pub theta: f64,
    pub omega: f64,
}

impl Default for BaseScales {
    fn default() -> Self {
        Self {
            x: 2.0,
            v: 5.0,
            theta: 2.0 * std::f64::consts::PI,
            omega: 2.0 * std::f64::consts::PI,
        }
    }
}

impl BaseScales {
    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.v, self.theta, self.omega]
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("base.x", self.x),
            ("base.v", self.v),
            ("base.theta", self.theta),
            ("base.omega", self.omega),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(k, "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn capped_term(s: f64, base: f64) -> f64 {
    let t = s.abs() / base;
    if t.is_finite() {
        t.min(DIVERGENCE_CAP)
    } else {
        DIVERGENCE_CAP
    }
}

/// Mean of `|s(t)| / s_base` over batch items and the post-step states of
/// each trace. Steps missing from diverged traces count as [`DIVERGENCE_CAP`].
pub fn state_loss(traces: &[EpisodeTrace], base: &BaseScales) -> Result<[f64; 4]> {
    let first = traces.first().ok_or(Error::Empty("trace batch"))?;
    let len = first.steps;
    if len == 0 {
        return Err(Error::Empty("trace"));
    }
    if let Some(t) = traces.iter().find(|t| t.steps != len) {
        return Err(Error::Dimension {
            what: "trace length",
            expected: len,
            got: t.steps,
        });
    }
    let b = base.as_array();
    let mut sums = [0.0; 4];
    for tr in traces {
        for s in &tr.states {
            let a = s.to_array();
            for j in 0..4 {
                sums[j] += capped_term(a[j], b[j]);
            }
        }
        let missing = (len - tr.states.len()) as f64;
        for sum in sums.iter_mut() {
            *sum += missing * DIVERGENCE_CAP;
        }
    }
    let n = (traces.len() * len) as f64;
    Ok(sums.map(|s| s / n))
}

/// `g_s = -E_{b,t}[∂f/∂s]`.
pub fn equivalent_gains(sens: &[[f64; 4]]) -> Result<[f64; 4]> {
    if sens.is_empty() {
        return Err(Error::Empty("sensitivities"));
    }
    let mut sum = [0.0; 4];
    for s in sens {
        for j in 0..4 {
            sum[j] += s[j];
        }
    }
    let n = sens.len() as f64;
    Ok(sum.map(|v| -v / n))
}

/// `(1/4) Σ_s |g_s - k_s|` for already-averaged equivalent gains.
pub fn gain_deviation(gains: &[f64; 4], k: &GainSet) -> f64 {
    let target = k.nominal();
    gains.iter().zip(target).map(|(g, k)| (g - k).abs()).sum::<f64>() / 4.0
}

/// Gain-regularization loss from per-step sensitivities pooled over batch and time.
pub fn gain_loss(sens: &[[f64; 4]], k: &GainSet) -> Result<f64> {
    Ok(gain_deviation(&equivalent_gains(sens)?, k))
}

pub fn total_loss(state: &[f64; 4], l_grad: f64, gc_enabled: bool) -> f64 {
    total_loss_weighted(state, l_grad, gc_enabled, 1.0)
}

pub fn total_loss_weighted(state: &[f64; 4], l_grad: f64, gc_enabled: bool, weight: f64) -> f64 {
    let s: f64 = state.iter().sum();
    if gc_enabled {
        s + weight * l_grad
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::State;

    fn trace(states: Vec<State>) -> EpisodeTrace {
        EpisodeTrace {
            initial: State::ZERO,
            steps: states.len(),
            states,
            forces: vec![],
            sensitivities: vec![],
            bias: 0.0,
            diverged: false,
        }
    }

    #[test]
    fn zero_trajectories_have_zero_loss() {
        let t = trace(vec![State::ZERO; 5]);
        assert_eq!(state_loss(&[t.clone(), t], &BaseScales::default()).unwrap(), [0.0; 4]);
    }

    #[test]
    fn constant_position_at_base_gives_unit_loss() {
        let t = trace(vec![State::new(2.0, 0.0, 0.0, 0.0); 7]);
        let l = state_loss(&[t], &BaseScales::default()).unwrap();
        assert_eq!(l[0], 1.0);
    }

    #[test]
    fn two_episode_hand_computed_means() {
        let base = BaseScales {
            x: 2.0,
            v: 5.0,
            theta: 1.0,
            omega: 4.0,
        };
        let a = trace(vec![
            State::new(1.0, -5.0, 0.5, 0.0),
            State::new(-2.0, 0.0, 0.25, 4.0),
            State::new(0.0, 10.0, 0.0, -8.0),
        ]);
        let b = trace(vec![
            State::new(4.0, 0.0, -1.0, 2.0),
            State::new(0.0, 0.0, 0.0, 0.0),
            State::new(1.0, 5.0, 0.25, 0.0),
        ]);
        let l = state_loss(&[a, b], &base).unwrap();
        // x: (0.5 + 1 + 0 + 2 + 0 + 0.5) / 6
        assert!((l[0] - 4.0 / 6.0).abs() < 1e-15);
        // v: (1 + 0 + 2 + 0 + 0 + 1) / 6
        assert!((l[1] - 4.0 / 6.0).abs() < 1e-15);
        // θ: (0.5 + 0.25 + 0 + 1 + 0 + 0.25) / 6
        assert!((l[2] - 2.0 / 6.0).abs() < 1e-15);
        // ω: (0 + 1 + 2 + 0.5 + 0 + 0) / 6
        assert!((l[3] - 3.5 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empty_or_ragged_batches_are_errors() {
        assert!(state_loss(&[], &BaseScales::default()).is_err());
        let a = trace(vec![State::ZERO; 3]);
        let b = trace(vec![State::ZERO; 4]);
        assert!(state_loss(&[a, b], &BaseScales::default()).is_err());
    }

    #[test]
    fn diverged_steps_are_charged_the_cap() {
        let mut t = trace(vec![State::ZERO]);
        t.steps = 4;
        t.diverged = true;
        let l = state_loss(&[t], &BaseScales::default()).unwrap();
        assert_eq!(l, [7.5; 4]);
    }

    #[test]
    fn gain_loss_examples() {
        let k = GainSet::default();
        let at = |g: [f64; 4]| gain_loss(&[g.map(|v| -v)], &k).unwrap();
        assert_eq!(at([13.0, 15.0, 31.0, 1.6]), 0.0);
        assert!((at([13.0, 15.0, 31.0, 2.6]) - 0.25).abs() < 1e-15);
        assert!((gain_loss(&[[0.0; 4]; 3], &k).unwrap() - 15.15).abs() < 1e-12);
        assert!(gain_loss(&[], &k).is_err());
    }

    #[test]
    fn gains_average_over_samples() {
        let g = equivalent_gains(&[[-1.0, -2.0, -3.0, -4.0], [-3.0, -2.0, -1.0, 0.0]]).unwrap();
        assert_eq!(g, [2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn total_loss_examples() {
        let s = [0.1, 0.2, 0.3, 0.4];
        assert!((total_loss(&s, 0.5, true) - 1.5).abs() < 1e-15);
        assert!((total_loss(&s, 0.5, false) - 1.0).abs() < 1e-15);
        assert_eq!(total_loss(&[0.0; 4], 0.0, true), 0.0);
    }
}
