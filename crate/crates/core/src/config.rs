//! Experiment configuration files.
//!
//! A config is a JSON object whose sections are all optional; missing values
//! take their defaults and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controllers::{GainSet, DEFAULT_C_OUT, DEFAULT_HIDDEN};
use crate::deploy::{
    EmulatorConfig, JitterSpec, MotorModel, C_EMP_DR, C_EMP_GC_DR, C_EMP_PROPORTIONAL, DEFAULT_EMA_ALPHA, DEFAULT_V_BAT,
};
use crate::error::{Error, Result};
use crate::evaluation::{AlignConfig, ContextMode, Plane, Signal, SweepSpec};
use crate::plant::{NoiseScales, PlantParams, SimLimits};
use crate::training::{BaseScales, CurriculumSchedule, DrRanges, TrainConfig, DEFAULT_GRAD_CLIP};

/// Prefixes the key of a parameter error with its config section.
fn scoped(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParam { key, msg } => Error::Config(format!("`{section}.{key}`: {msg}")),
        other => Error::Config(format!("`{section}`: {other}")),
    }
}

/// Plant values that replace the nominal ones. Changing `total_mass`, `m` or
/// `l` recomputes the cart mass and, unless `j` is given, the rod inertia.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantOverrides {
    pub total_mass: Option<f64>,
    pub m: Option<f64>,
    pub l: Option<f64>,
    pub j: Option<f64>,
    pub g: Option<f64>,
    pub d_c: Option<f64>,
    pub d_p: Option<f64>,
}

impl PlantOverrides {
    pub fn apply(&self, base: &PlantParams) -> Result<PlantParams> {
        let mut p = PlantParams::from_total(
            self.total_mass.unwrap_or(base.total_mass),
            self.m.unwrap_or(base.m),
            self.l.unwrap_or(base.l),
            self.d_c.unwrap_or(base.d_c),
            self.d_p.unwrap_or(base.d_p),
        )?;
        let geometry_changed = self.total_mass.is_some() || self.m.is_some() || self.l.is_some();
        let j = self.j.unwrap_or(if geometry_changed { p.j } else { base.j });
        p = p.with_inertia(j)?;
        p.with_gravity(self.g.unwrap_or(base.g))
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Proportional,
    #[default]
    Rnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub n_hidden: usize,
    /// Append the plant parameters to the network input.
    pub conditioning: bool,
    pub c_out: f64,
    /// Proportional gains, also the targets of the gain term.
    pub gains: GainSet,
    /// Weight file for evaluation commands.
    pub weights: Option<PathBuf>,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Rnn,
            n_hidden: DEFAULT_HIDDEN,
            conditioning: true,
            c_out: DEFAULT_C_OUT,
            gains: GainSet::default(),
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSpec {
    pub epochs: usize,
    pub batch: usize,
    pub gc_enabled: bool,
    pub gc_weight: f64,
    pub dr_enabled: bool,
    pub grad_clip: Option<f64>,
    pub schedule: CurriculumSchedule,
    pub noise: NoiseScales,
    pub limits: SimLimits,
    pub base: BaseScales,
    pub dr: DrRanges,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch: t.batch,
            gc_enabled: t.gc_enabled,
            gc_weight: t.gc_weight,
            dr_enabled: t.dr_enabled,
            grad_clip: Some(DEFAULT_GRAD_CLIP),
            schedule: t.schedule,
            noise: t.noise,
            limits: t.limits,
            base: t.base,
            dr: t.dr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSpec {
    /// `mm` or `dd`.
    pub plane: String,
    /// `matched`, `nominal`, `2x` or `far`; the plane's default when absent.
    pub context: Option<String>,
    /// Points per sweep axis.
    pub grid: usize,
    pub band_fraction: f64,
    pub theta0: f64,
    pub steps: usize,
    /// `theta` or `omega`.
    pub signal: String,
    /// Moving-average window for gain traces [epochs].
    pub smoothing_window: usize,
    pub align: AlignConfig,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self {
            plane: "mm".into(),
            context: None,
            grid: 11,
            band_fraction: 0.05,
            theta0: 0.1,
            steps: 500,
            signal: "theta".into(),
            smoothing_window: 50,
            align: AlignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeploySpec {
    /// Correction factor of the inverse motor model; chosen by controller kind when absent.
    pub c_emp: Option<f64>,
    /// Correction factor of the motor that drives the plant; equals `c_emp` when absent.
    pub plant_c_emp: Option<f64>,
    pub v_bat: f64,
    pub ema_alpha: f64,
    pub jitter: JitterSpec,
    pub duration: f64,
}

impl Default for DeploySpec {
    fn default() -> Self {
        Self {
            c_emp: None,
            plant_c_emp: None,
            v_bat: DEFAULT_V_BAT,
            ema_alpha: DEFAULT_EMA_ALPHA,
            jitter: JitterSpec::default(),
            duration: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub plant: PlantOverrides,
    pub controller: ControllerSpec,
    pub training: TrainingSpec,
    pub evaluation: EvaluationSpec,
    pub deploy: DeploySpec,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Pretty JSON with every default spelled out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of [`Self::to_json`], hex encoded.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.plant_params()?;
        let c = &self.controller;
        if c.n_hidden == 0 {
            return Err(Error::Config("`controller.n_hidden`: must be >= 1".into()));
        }
        if !(c.c_out.is_finite() && c.c_out > 0.0) {
            return Err(Error::Config("`controller.c_out`: must be finite and > 0".into()));
        }
        c.gains.validate().map_err(|e| scoped("controller.gains", e))?;
        self.train_config().validate().map_err(|e| match e {
            Error::InvalidParam { key, msg } => {
                Error::Config(format!("`training.{}`: {msg}", key.trim_start_matches("train.")))
            }
            other => scoped("training", other),
        })?;
        self.sweep_spec().map_err(|e| scoped("evaluation", e))?;
        self.signal().map_err(|e| scoped("evaluation", e))?;
        let a = &self.evaluation.align;
        for (k, v, hi) in [
            ("prominence_fraction", a.prominence_fraction, 1.0),
            ("match_window", a.match_window, f64::INFINITY),
            ("tail_fraction", a.tail_fraction, 1.0),
        ] {
            if !(v > 0.0 && v <= hi) {
                return Err(Error::Config(format!("`evaluation.align.{k}`: out of range")));
            }
        }
        if self.evaluation.smoothing_window == 0 {
            return Err(Error::Config("`evaluation.smoothing_window`: must be >= 1".into()));
        }
        self.emulator_config()
            .and_then(|e| e.validate())
            .map_err(|e| scoped("deploy", e))?;
        Ok(())
    }

    pub fn plant_params(&self) -> Result<PlantParams> {
        self.plant.apply(&PlantParams::nominal()).map_err(|e| match e {
            Error::InvalidParam { key, msg } => Error::Config(format!("`plant.{key}`: {msg}")),
            Error::DegeneratePlant(msg) => Error::Config(format!("`plant`: {msg}")),
            other => scoped("plant", other),
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            seed: self.seed,
            epochs: t.epochs,
            n_hidden: self.controller.n_hidden,
            conditioning: self.controller.conditioning,
            c_out: self.controller.c_out,
            batch: t.batch,
            gc_enabled: t.gc_enabled,
            gc_weight: t.gc_weight,
            dr_enabled: t.dr_enabled,
            grad_clip: t.grad_clip,
            gains: self.controller.gains,
            schedule: t.schedule,
            noise: t.noise,
            limits: t.limits,
            base: t.base,
            dr: t.dr,
            nominal: self.plant_params().unwrap_or_default(),
        }
    }

    pub fn plane(&self) -> Result<Plane> {
        self.evaluation.plane.parse()
    }

    pub fn signal(&self) -> Result<Signal> {
        self.evaluation.signal.parse()
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let e = &self.evaluation;
        let mut spec = SweepSpec::new(self.plane()?, e.grid);
        if let Some(c) = &e.context {
            spec.context = c.parse::<ContextMode>()?;
        }
        spec.base = self.plant_params()?;
        spec.band_fraction = e.band_fraction;
        spec.theta0 = e.theta0;
        spec.steps = e.steps;
        spec.limits = self.training.limits;
        spec.validate()?;
        Ok(spec)
    }

    pub fn emulator_config(&self) -> Result<EmulatorConfig> {
        let d = &self.deploy;
        let default_c_emp = match (self.controller.kind, self.training.gc_enabled) {
            (ControllerKind::Proportional, _) => C_EMP_PROPORTIONAL,
            (ControllerKind::Rnn, true) => C_EMP_GC_DR,
            (ControllerKind::Rnn, false) => C_EMP_DR,
        };
        let motor = MotorModel::with_c_emp(d.c_emp.unwrap_or(default_c_emp))?;
        let plant_motor = d.plant_c_emp.map(MotorModel::with_c_emp).transpose()?;
        Ok(EmulatorConfig {
            motor,
            plant_motor,
            v_bat: d.v_bat,
            ema_alpha: d.ema_alpha,
            jitter: d.jitter,
            duration: d.duration,
            seed: self.seed,
        })
    }

    /// Output directory: the config value, then `SIMGAP_OUT_DIR`, then `out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

pub const OUT_DIR_ENV: &str = "SIMGAP_OUT_DIR";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let t = cfg.train_config();
        assert_eq!(t, TrainConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_json(r#"{"training": {"epochz": 5}}"#).unwrap_err();
        assert!(err.to_string().contains("epochz"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"sed": 1}"#).unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");
    }

    #[test]
    fn invalid_value_is_named() {
        for (text, key) in [
            (r#"{"training": {"batch": 0}}"#, "training.batch"),
            (r#"{"plant": {"m": 0.5}}"#, "plant.m"),
            (r#"{"evaluation": {"plane": "xy"}}"#, "evaluation.plane"),
            (r#"{"evaluation": {"context": "3x"}}"#, "evaluation.context"),
            (r#"{"deploy": {"ema_alpha": 0}}"#, "deploy.ema_alpha"),
            (
                r#"{"controller": {"gains": {"k_x": {"lower": 5, "nominal": 1, "upper": 9}}}}"#,
                "controller.gains",
            ),
        ] {
            let err = ExperimentConfig::from_json(text);
            let msg = err.expect_err(text).to_string();
            assert!(msg.contains(key), "{text}: {msg}");
        }
    }

    #[test]
    fn json_roundtrip_and_stable_hash() {
        let mut cfg = ExperimentConfig {
            seed: 7,
            ..ExperimentConfig::default()
        };
        cfg.plant.d_c = Some(6.0);
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.sha256(), cfg.sha256());
        assert_ne!(ExperimentConfig::default().sha256(), cfg.sha256());
    }

    #[test]
    fn plant_overrides_recompute_derived_values() {
        let o = PlantOverrides {
            total_mass: Some(0.6),
            ..Default::default()
        };
        let p = o.apply(&PlantParams::nominal()).unwrap();
        assert_eq!(p.total_mass, 0.6);
        assert!((p.m_c - 0.3).abs() < 1e-15);
        assert_eq!(
            PlantOverrides::default().apply(&PlantParams::nominal()).unwrap(),
            PlantParams::nominal()
        );
    }

    #[test]
    fn c_emp_follows_controller_kind() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.emulator_config().unwrap().motor.c_emp, C_EMP_GC_DR);
        cfg.training.gc_enabled = false;
        assert_eq!(cfg.emulator_config().unwrap().motor.c_emp, C_EMP_DR);
        cfg.controller.kind = ControllerKind::Proportional;
        assert_eq!(cfg.emulator_config().unwrap().motor.c_emp, C_EMP_PROPORTIONAL);
        cfg.deploy.c_emp = Some(1.0);
        assert_eq!(cfg.emulator_config().unwrap().motor.c_emp, 1.0);
    }
}
