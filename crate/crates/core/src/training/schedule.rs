use serde::{Deserialize, Serialize};

/// Continuous curriculum: short, quiet, nominal-plant episodes during
/// pretraining, then linearly growing horizons and initial-angle noise with
/// force bias and plant randomization switched on. Epochs past the finetune
/// end keep the final values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumSchedule {
    pub n_pretrain_end: usize,
    pub n_finetune_end: usize,
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    pub steps_start: usize,
    pub steps_end: usize,
    pub theta_start: f64,
    pub theta_end: f64,
    pub f_scale_finetune: f64,
    /// Optional hard cap on the episode length.
    pub steps_cap: Option<usize>,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        Self {
            n_pretrain_end: 50,
            n_finetune_end: 1000,
            lr_pretrain: 5e-4,
            lr_finetune: 3e-4,
            steps_start: 50,
            steps_end: 500,
            theta_start: 0.1,
            theta_end: 0.6,
            f_scale_finetune: 1.0,
            steps_cap: None,
        }
    }
}

/// Schedule values in effect for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValues {
    pub epoch: usize,
    pub steps: usize,
    pub theta_scale: f64,
    pub f_scale: f64,
    pub dr_active: bool,
    pub lr: f64,
}

impl CurriculumSchedule {
    pub fn in_pretrain(&self, n: usize) -> bool {
        n < self.n_pretrain_end
    }

    /// Episode length in control ticks.
    pub fn steps(&self, n: usize) -> usize {
        let raw = if self.in_pretrain(n) {
            self.steps_start
        } else {
            let span = self.n_finetune_end - self.n_pretrain_end;
            let grow = (n - self.n_pretrain_end) * (self.steps_end - self.steps_start) / span;
            (grow + self.steps_start).min(self.steps_end)
        };
        match self.steps_cap {
            Some(cap) => raw.min(cap),
            None => raw,
        }
    }

    /// Initial-angle noise scale [rad].
    pub fn theta_scale(&self, n: usize) -> f64 {
        if self.in_pretrain(n) {
            return self.theta_start;
        }
        let span = (self.n_finetune_end - self.n_pretrain_end) as f64;
        let frac = (n - self.n_pretrain_end) as f64 / span;
        if frac >= 1.0 {
            self.theta_end
        } else {
            (self.theta_start + frac * (self.theta_end - self.theta_start)).min(self.theta_end)
        }
    }

    pub fn f_scale(&self, n: usize) -> f64 {
        if self.in_pretrain(n) {
            0.0
        } else {
            self.f_scale_finetune
        }
    }

    pub fn dr_active(&self, n: usize) -> bool {
        !self.in_pretrain(n)
    }

    pub fn lr(&self, n: usize) -> f64 {
        if self.in_pretrain(n) {
            self.lr_pretrain
        } else {
            self.lr_finetune
        }
    }

    pub fn at(&self, n: usize) -> ScheduleValues {
        ScheduleValues {
            epoch: n,
            steps: self.steps(n),
            theta_scale: self.theta_scale(n),
            f_scale: self.f_scale(n),
            dr_active: self.dr_active(n),
            lr: self.lr(n),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if self.n_finetune_end <= self.n_pretrain_end {
            return Err(Error::invalid("schedule.n_finetune_end", "must exceed n_pretrain_end"));
        }
        if self.steps_start == 0 || self.steps_end < self.steps_start {
            return Err(Error::invalid(
                "schedule.steps_end",
                "need 1 <= steps_start <= steps_end",
            ));
        }
        if self.steps_cap == Some(0) {
            return Err(Error::invalid("schedule.steps_cap", "must be >= 1"));
        }
        if !(self.theta_start >= 0.0 && self.theta_end >= self.theta_start) {
            return Err(Error::invalid(
                "schedule.theta_end",
                "need 0 <= theta_start <= theta_end",
            ));
        }
        if self.theta_end > crate::plant::THETA_NOISE_MAX {
            return Err(Error::invalid("schedule.theta_end", "must not exceed 35 degrees"));
        }
        for (k, v) in [
            ("schedule.lr_pretrain", self.lr_pretrain),
            ("schedule.lr_finetune", self.lr_finetune),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(k, "must be finite and > 0"));
            }
        }
        if !(self.f_scale_finetune.is_finite() && self.f_scale_finetune >= 0.0) {
            return Err(Error::invalid("schedule.f_scale_finetune", "must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pretrain_values() {
        let s = CurriculumSchedule::default();
        for n in [0, 49] {
            let v = s.at(n);
            assert_eq!(v.steps, 50);
            assert_eq!(v.theta_scale, 0.1);
            assert_eq!(v.lr, 5e-4);
            assert_eq!(v.f_scale, 0.0);
            assert!(!v.dr_active);
        }
    }

    #[test]
    fn endpoints_are_exact() {
        let s = CurriculumSchedule::default();
        assert_eq!(s.steps(50), 50);
        assert_eq!(s.steps(525), 275);
        assert_eq!(s.steps(1000), 500);
        assert_eq!(s.theta_scale(50), 0.1);
        assert_eq!(s.theta_scale(1000), 0.6);
        assert_eq!(s.lr(49), 5e-4);
        assert_eq!(s.lr(50), 3e-4);
        assert_eq!(s.steps(3900), 500);
        assert_eq!(s.theta_scale(3900), 0.6);
    }

    #[test]
    fn floor_matches_table_formula() {
        let s = CurriculumSchedule::default();
        for n in 50..1200usize {
            let want = ((((n - 50) as f64) * 450.0 / 950.0 + 50.0).floor() as usize).min(500);
            assert_eq!(s.steps(n), want, "n = {n}");
        }
    }

    #[test]
    fn monotone_and_capped() {
        let s = CurriculumSchedule {
            steps_cap: Some(200),
            ..Default::default()
        };
        let mut last = (0, 0.0);
        for n in 0..2000 {
            let v = s.at(n);
            assert!(v.steps >= last.0 && v.theta_scale >= last.1);
            assert!(v.steps <= 200);
            last = (v.steps, v.theta_scale);
        }
    }
}
