//! Curriculum training of the conditioned RNN with optional gain regularization.

pub mod bptt;
pub mod dr;
pub mod episode;
pub mod gradcheck;
pub mod log;
pub mod loss;
pub mod schedule;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bptt::{loss_and_grad, loss_only, Adam, BatchLoss, EpisodeInput, Grads, LossSpec};
pub use dr::{sample_plant, DrRanges};
pub use episode::{run_episode, run_episode_from, EpisodeSpec, EpisodeTrace};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use log::{CsvLogWriter, EpochRecord, ItemPlant, TrainLog};
pub use loss::{equivalent_gains, gain_loss, state_loss, total_loss, BaseScales, DIVERGENCE_CAP};
pub use schedule::{CurriculumSchedule, ScheduleValues};

use crate::controllers::{ConditioningVector, GainSet, RnnController, DEFAULT_C_OUT, N_COND, N_STATE};
use crate::error::{Error, Result};
use crate::plant::{sample_force_bias, sample_initial_state, NoiseScales, PlantParams, SimLimits};

pub const DEFAULT_GRAD_CLIP: f64 = 100.0;

/// Consecutive non-finite epochs tolerated before training aborts.
pub const MAX_NONFINITE_EPOCHS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub n_hidden: usize,
    pub conditioning: bool,
    pub c_out: f64,
    pub batch: usize,
    pub gc_enabled: bool,
    pub gc_weight: f64,
    pub dr_enabled: bool,
    /// Rescales the gradient to this Euclidean norm when it is larger.
    pub grad_clip: Option<f64>,
    pub gains: GainSet,
    pub schedule: CurriculumSchedule,
    /// Initial-state noise for x, v and ω; the θ and force scales come from the schedule.
    pub noise: NoiseScales,
    pub limits: SimLimits,
    pub base: BaseScales,
    pub dr: DrRanges,
    pub nominal: PlantParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 1000,
            n_hidden: crate::controllers::DEFAULT_HIDDEN,
            conditioning: true,
            c_out: DEFAULT_C_OUT,
            batch: 16,
            gc_enabled: true,
            gc_weight: 1.0,
            dr_enabled: true,
            grad_clip: Some(DEFAULT_GRAD_CLIP),
            gains: GainSet::default(),
            schedule: CurriculumSchedule::default(),
            noise: NoiseScales::default(),
            limits: SimLimits::default(),
            base: BaseScales::default(),
            dr: DrRanges::default(),
            nominal: PlantParams::nominal(),
        }
    }
}

impl TrainConfig {
    /// Desk-scale settings: 32 hidden units, 300 epochs, episodes capped at 200 ticks.
    pub fn desk() -> Self {
        Self {
            epochs: 300,
            n_hidden: 32,
            schedule: CurriculumSchedule {
                steps_cap: Some(200),
                ..CurriculumSchedule::default()
            },
            ..Self::default()
        }
    }

    pub fn n_inputs(&self) -> usize {
        N_STATE + if self.conditioning { N_COND } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_hidden == 0 {
            return Err(Error::invalid("train.n_hidden", "must be >= 1"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("train.batch", "must be >= 1"));
        }
        if !(self.c_out.is_finite() && self.c_out > 0.0) {
            return Err(Error::invalid("train.c_out", "must be > 0"));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid("train.grad_clip", "must be > 0"));
            }
        }
        if !(self.gc_weight.is_finite() && self.gc_weight >= 0.0) {
            return Err(Error::invalid("train.gc_weight", "must be >= 0"));
        }
        self.gains.validate()?;
        self.schedule.validate()?;
        self.noise.validate()?;
        self.limits.validate()?;
        self.base.validate()?;
        self.dr.validate()?;
        self.nominal.validate()?;
        Ok(())
    }

    pub fn loss_spec(&self, steps: usize) -> LossSpec {
        LossSpec {
            steps,
            limits: self.limits,
            base: self.base,
            gains: self.gains,
            gc_enabled: self.gc_enabled,
            gc_weight: self.gc_weight,
        }
    }

    /// Deterministic RNG for batch item `item` of `epoch`, independent of scheduling.
    pub fn episode_rng(&self, epoch: usize, item: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((epoch * self.batch + item) as u64 + 1);
        rng
    }

    pub fn init_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);
        rng
    }

    /// Draws the plant, initial state and bias force of one batch item.
    pub fn episode_input(&self, sched: &ScheduleValues, item: usize) -> EpisodeInput {
        let mut rng = self.episode_rng(sched.epoch, item);
        let plant = sample_plant(&mut rng, &self.dr, sched.dr_active && self.dr_enabled, &self.nominal);
        let scales = NoiseScales {
            theta: sched.theta_scale,
            force: sched.f_scale,
            ..self.noise
        };
        let initial = sample_initial_state(&mut rng, &scales);
        let bias = sample_force_bias(&mut rng, &scales);
        EpisodeInput {
            plant,
            cond: ConditioningVector::from_plant(&plant),
            initial,
            bias,
        }
    }
}

/// Trains from a fresh initialization, calling `observe` after every epoch.
pub fn train_with<F>(cfg: &TrainConfig, observe: F) -> Result<(RnnController, TrainLog)>
where
    F: FnMut(&EpochRecord) -> Result<()>,
{
    cfg.validate()?;
    let ctrl = RnnController::init_weights(&mut cfg.init_rng(), cfg.n_hidden, cfg.n_inputs(), cfg.c_out)?;
    train_from(cfg, ctrl, observe)
}

/// Trains starting from the given weights.
pub fn train_from<F>(cfg: &TrainConfig, mut ctrl: RnnController, mut observe: F) -> Result<(RnnController, TrainLog)>
where
    F: FnMut(&EpochRecord) -> Result<()>,
{
    cfg.validate()?;
    if ctrl.n_hidden() != cfg.n_hidden || ctrl.n_inputs() != cfg.n_inputs() {
        return Err(Error::Dimension {
            what: "initial controller",
            expected: cfg.n_hidden * cfg.n_inputs(),
            got: ctrl.n_hidden() * ctrl.n_inputs(),
        });
    }
    let mut opt = Adam::new(ctrl.n_params());
    let mut log = TrainLog::new(cfg.batch);
    let mut bad_streak = 0;

    for epoch in 0..cfg.epochs {
        let sched = cfg.schedule.at(epoch);
        let inputs: Vec<EpisodeInput> = (0..cfg.batch).map(|b| cfg.episode_input(&sched, b)).collect();
        let spec = cfg.loss_spec(sched.steps);
        let (loss, mut grads) = loss_and_grad(&ctrl, &inputs, &spec);

        let grad_norm = grads.norm();
        let finite = loss.total.is_finite() && grad_norm.is_finite();
        if finite {
            if let Some(clip) = cfg.grad_clip {
                if grad_norm > clip {
                    grads.scale(clip / grad_norm);
                }
            }
            opt.step(&mut ctrl, &grads, sched.lr);
            bad_streak = 0;
        } else {
            bad_streak += 1;
        }
        let rec = EpochRecord::new(&sched, &loss, cfg.gc_enabled, cfg.gc_weight, finite, grad_norm, &inputs);
        observe(&rec)?;
        log.push(rec);
        if bad_streak >= MAX_NONFINITE_EPOCHS {
            return Err(Error::TrainingAborted {
                epoch,
                reason: format!("{bad_streak} consecutive non-finite losses or gradients"),
            });
        }
    }
    Ok((ctrl, log))
}

pub fn train(cfg: &TrainConfig) -> Result<(RnnController, TrainLog)> {
    train_with(cfg, |_| Ok(()))
}
