//! Analytic gradient versus central finite differences.

use super::bptt::{loss_and_grad, loss_only, EpisodeInput, LossSpec};
use crate::controllers::RnnController;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub inputs: Vec<EpisodeInput>,
    pub spec: LossSpec,
    /// Finite-difference step.
    pub step: f64,
    /// Gradients smaller than this in both estimates are compared absolutely.
    pub floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Flat parameter index (A, B, C, b1, b2 order) of the worst entry.
    pub worst_index: usize,
    pub n_params: usize,
    pub max_abs_grad: f64,
    pub loss: f64,
}

/// Compares `∂L/∂w` against central differences for every trainable weight,
/// holding the recurrence rescaling fixed as the backward pass does.
pub fn gradient_check(ctrl: &RnnController, cfg: &GradCheckConfig) -> GradCheckReport {
    let (loss, grads) = loss_and_grad(ctrl, &cfg.inputs, &cfg.spec);
    let analytic = grads.flatten();
    let mut work = ctrl.clone();
    let mut max_rel = 0.0f64;
    let mut worst = 0;
    let mut max_abs = 0.0f64;
    let mut index = 0;
    for slot in 0..5 {
        let len = work.params_mut()[slot].len();
        for k in 0..len {
            let orig = work.params_mut()[slot][k];
            let h = cfg.step * orig.abs().max(1.0);
            work.params_mut()[slot][k] = orig + h;
            work.apply_frozen_scale();
            let lp = loss_only(&work, &cfg.inputs, &cfg.spec).total;
            work.params_mut()[slot][k] = orig - h;
            work.apply_frozen_scale();
            let lm = loss_only(&work, &cfg.inputs, &cfg.spec).total;
            work.params_mut()[slot][k] = orig;
            work.apply_frozen_scale();

            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[index];
            let denom = a.abs().max(numeric.abs()).max(cfg.floor);
            let rel = if a.is_finite() && numeric.is_finite() {
                (a - numeric).abs() / denom
            } else {
                f64::INFINITY
            };
            if rel > max_rel || rel.is_nan() {
                max_rel = rel;
                worst = index;
            }
            max_abs = max_abs.max(a.abs());
            index += 1;
        }
    }
    GradCheckReport {
        max_rel_err: max_rel,
        worst_index: worst,
        n_params: index,
        max_abs_grad: max_abs,
        loss: loss.total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{ConditioningVector, GainSet};
    use crate::plant::{PlantParams, SimLimits, State};
    use crate::training::loss::BaseScales;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(gc: bool) -> GradCheckConfig {
        let nominal = PlantParams::nominal();
        let other = PlantParams::from_total(0.55, 0.3, 0.07, 2.2, 0.01).unwrap();
        let inputs = vec![
            EpisodeInput {
                plant: nominal,
                cond: ConditioningVector::from_plant(&nominal),
                initial: State::new(0.02, -0.05, 0.12, 0.3),
                bias: 0.4,
            },
            EpisodeInput {
                plant: other,
                cond: ConditioningVector::from_plant(&other),
                initial: State::new(-0.1, 0.2, -0.2, -0.5),
                bias: -0.7,
            },
        ];
        GradCheckConfig {
            inputs,
            spec: LossSpec {
                steps: 10,
                limits: SimLimits::default(),
                base: BaseScales::default(),
                gains: GainSet::default(),
                gc_enabled: gc,
                gc_weight: 1.0,
            },
            step: 1e-6,
            floor: 1e-8,
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let ctrl = RnnController::init_weights(&mut ChaCha8Rng::seed_from_u64(11), 6, 9, 5.0).unwrap();
        for gc in [false, true] {
            let r = gradient_check(&ctrl, &config(gc));
            assert_eq!(r.n_params, ctrl.n_params());
            assert!(r.max_abs_grad > 0.0);
            assert!(r.max_rel_err < 1e-4, "gc={gc}: {r:?}");
        }
    }

    #[test]
    fn gradient_holds_with_active_recurrence_rescaling() {
        let mut ctrl = RnnController::init_weights(&mut ChaCha8Rng::seed_from_u64(5), 6, 9, 5.0).unwrap();
        ctrl.a_raw.iter_mut().for_each(|a| *a *= 4.0);
        ctrl.refresh_stabilization();
        assert!(ctrl.a_scale() > 1.0);
        let r = gradient_check(&ctrl, &config(true));
        assert!(r.max_rel_err < 1e-4, "{r:?}");
    }
}
