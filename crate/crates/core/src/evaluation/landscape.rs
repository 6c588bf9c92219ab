//! Per-plant state-loss maps with the last training batch overlaid.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::sweep::{CellStatus, ContextMode, Plane};
use crate::controllers::AnyController;
use crate::error::{Error, Result};
use crate::plant::{sample_initial_state, NoiseScales, PlantParams, SimLimits, State};
use crate::training::{run_episode_from, state_loss, BaseScales, TrainLog};

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSpec {
    pub plane: Plane,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub base: PlantParams,
    pub context: ContextMode,
    /// Initial states shared by every cell.
    pub initial: Vec<State>,
    pub steps: usize,
    pub limits: SimLimits,
    pub scales: BaseScales,
}

impl LandscapeSpec {
    /// `batch` initial states drawn once from `seed` with the given noise.
    pub fn new(plane: Plane, n: usize, batch: usize, noise: &NoiseScales, seed: u64) -> Self {
        let sweep = super::sweep::SweepSpec::new(plane, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            plane,
            axis1: sweep.axis1,
            axis2: sweep.axis2,
            base: sweep.base,
            context: sweep.context,
            initial: (0..batch).map(|_| sample_initial_state(&mut rng, noise)).collect(),
            steps: sweep.steps,
            limits: sweep.limits,
            scales: BaseScales::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeCell {
    pub a: f64,
    pub b: f64,
    pub status: CellStatus,
    /// `(L_x, L_v, L_θ, L_ω)`; `None` for invalid cells.
    pub losses: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub axis_names: [String; 2],
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub cells: Vec<LandscapeCell>,
    /// `(axis1, axis2)` coordinates of the overlaid training samples.
    pub overlay: Vec<(f64, f64)>,
}

impl Landscape {
    pub fn omega_matrix(&self) -> Vec<Vec<Option<f64>>> {
        self.cells
            .chunks(self.axis2.len())
            .map(|r| r.iter().map(|c| c.losses.map(|l| l[3])).collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            self.axis_names[0].as_str(),
            self.axis_names[1].as_str(),
            "L_x",
            "L_v",
            "L_theta",
            "L_omega",
            "status",
        ])?;
        for c in &self.cells {
            let mut row = vec![c.a.to_string(), c.b.to_string()];
            match c.losses {
                Some(l) => row.extend(l.iter().map(f64::to_string)),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            row.push(c.status.to_string());
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| Error::io("<landscape>", e))?;
        Ok(())
    }

    pub fn write_overlay_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([self.axis_names[0].as_str(), self.axis_names[1].as_str()])?;
        for (a, b) in &self.overlay {
            wr.write_record([a.to_string(), b.to_string()])?;
        }
        wr.flush().map_err(|e| Error::io("<landscape overlay>", e))?;
        Ok(())
    }

    pub fn save(&self, grid: &Path, overlay: &Path) -> Result<()> {
        let f = std::fs::File::create(grid).map_err(|e| Error::io(grid, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let f = std::fs::File::create(overlay).map_err(|e| Error::io(overlay, e))?;
        self.write_overlay_csv(std::io::BufWriter::new(f))
    }
}

/// Final-epoch sample coordinates in the plane's axes, in batch order.
pub fn overlay_from_log(log: &TrainLog, plane: Plane) -> Vec<(f64, f64)> {
    log.last()
        .map(|rec| {
            rec.plants
                .iter()
                .map(|p| match plane {
                    Plane::MassMass => (p.total_mass, p.m),
                    Plane::DampingDamping => (p.d_c, p.d_p),
                })
                .collect()
        })
        .unwrap_or_default()
}

fn landscape_cell(ctrl: &AnyController, spec: &LandscapeSpec, a: f64, b: f64) -> LandscapeCell {
    let invalid = LandscapeCell {
        a,
        b,
        status: CellStatus::Invalid,
        losses: None,
    };
    let Ok(plant) = spec.plane.plant(&spec.base, a, b) else {
        return invalid;
    };
    let Ok(cond) = spec.context.conditioning(&plant) else {
        return invalid;
    };
    let mut policy = ctrl.policy();
    let traces: Vec<_> = spec
        .initial
        .iter()
        .map(|s0| run_episode_from(policy.as_mut(), &plant, &cond, *s0, 0.0, spec.steps, &spec.limits))
        .collect();
    let diverged = traces.iter().any(|t| t.diverged);
    match state_loss(&traces, &spec.scales) {
        Ok(l) => LandscapeCell {
            a,
            b,
            status: if diverged {
                CellStatus::Diverged
            } else {
                CellStatus::Settled
            },
            losses: Some(l),
        },
        Err(_) => invalid,
    }
}

pub fn loss_landscape(ctrl: &AnyController, spec: &LandscapeSpec, log: Option<&TrainLog>) -> Result<Landscape> {
    if spec.axis1.is_empty() || spec.axis2.is_empty() || spec.initial.is_empty() || spec.steps == 0 {
        return Err(Error::Empty("landscape grid or initial states"));
    }
    spec.limits.validate()?;
    spec.scales.validate()?;
    let n2 = spec.axis2.len();
    let cells = (0..spec.axis1.len() * n2)
        .into_par_iter()
        .map(|k| landscape_cell(ctrl, spec, spec.axis1[k / n2], spec.axis2[k % n2]))
        .collect();
    let names = spec.plane.axis_names();
    Ok(Landscape {
        axis_names: [names[0].to_string(), names[1].to_string()],
        axis1: spec.axis1.clone(),
        axis2: spec.axis2.clone(),
        cells,
        overlay: log.map(|l| overlay_from_log(l, spec.plane)).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{GainSet, RnnController};
    use crate::training::log::{EpochRecord, ItemPlant};
    use crate::training::DIVERGENCE_CAP;

    fn spec() -> LandscapeSpec {
        let mut s = LandscapeSpec::new(Plane::MassMass, 3, 4, &NoiseScales::default(), 3);
        s.steps = 200;
        s
    }

    #[test]
    fn zero_controller_equals_uncontrolled_plant() {
        let s = spec();
        let zero = AnyController::Rnn(RnnController::zeros(4, 9, 300.0));
        let free = AnyController::Proportional(GainSet::from_nominal([0.0; 4]));
        let a = loss_landscape(&zero, &s, None).unwrap();
        let b = loss_landscape(&free, &s, None).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn stabilized_cells_are_cheaper_and_losses_capped() {
        let s = spec();
        let p = loss_landscape(&AnyController::Proportional(GainSet::default()), &s, None).unwrap();
        let z = loss_landscape(&AnyController::Proportional(GainSet::from_nominal([0.0; 4])), &s, None).unwrap();
        let (cp, cz) = (p.cells[4], z.cells[4]);
        assert!(cp.losses.unwrap()[3] < cz.losses.unwrap()[3]);
        for c in z.cells.iter().filter_map(|c| c.losses) {
            assert!(c.iter().all(|v| *v <= DIVERGENCE_CAP));
        }
    }

    #[test]
    fn overlay_is_verbatim() {
        let mut log = TrainLog::new(2);
        let plants = vec![
            ItemPlant {
                total_mass: 0.31,
                m: 0.2,
                l: 0.05,
                d_c: 3.0,
                d_p: 0.007,
            },
            ItemPlant {
                total_mass: 0.77,
                m: 0.5,
                l: 0.05,
                d_c: 3.0,
                d_p: 0.007,
            },
        ];
        log.push(EpochRecord {
            epoch: 0,
            steps: 50,
            theta_scale: 0.1,
            f_scale: 0.0,
            dr_active: true,
            lr: 1e-3,
            total: 1.0,
            state: [0.0; 4],
            gains: [0.0; 4],
            l_grad: 0.0,
            updated: true,
            diverged: 0,
            grad_norm: 0.0,
            plants,
        });
        assert_eq!(overlay_from_log(&log, Plane::MassMass), vec![(0.31, 0.2), (0.77, 0.5)]);
    }
}
