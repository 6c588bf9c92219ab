//! Settling-time maps over two plant parameters.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::settling::{settling_of, SettlingResult};
use super::trajectory::{Signal, TrajectoryLog};
use crate::controllers::{AnyController, ConditioningVector, N_COND};
use crate::error::{Error, Result};
use crate::plant::{PlantParams, SimLimits, State, DC_NOM, DP_NOM};
use crate::training::run_episode_from;

/// Damping context used for the out-of-domain experiments.
pub const FAR_DAMPING: (f64, f64) = (17.06351, 0.024376);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// Total mass `M` against pole mass `m`.
    MassMass,
    /// Cart damping `D_c` against pivot damping `D_p`.
    DampingDamping,
}

impl Plane {
    pub fn axis_names(self) -> [&'static str; 2] {
        match self {
            Plane::MassMass => ["M", "m"],
            Plane::DampingDamping => ["D_c", "D_p"],
        }
    }

    /// Default axis ranges covering the randomization domain.
    pub fn default_range(self) -> [(f64, f64); 2] {
        match self {
            Plane::MassMass => [(0.2, 0.8), (0.08, 0.64)],
            Plane::DampingDamping => [(0.5 * DC_NOM, 2.0 * DC_NOM), (0.5 * DP_NOM, 2.0 * DP_NOM)],
        }
    }

    /// Plant at one grid point; other parameters come from `base`.
    pub fn plant(self, base: &PlantParams, a: f64, b: f64) -> Result<PlantParams> {
        match self {
            Plane::MassMass => PlantParams::from_total(a, b, base.l, base.d_c, base.d_p),
            Plane::DampingDamping => base.with_damping(a, b),
        }
    }
}

impl FromStr for Plane {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mm" => Ok(Plane::MassMass),
            "dd" => Ok(Plane::DampingDamping),
            _ => Err(Error::invalid("plane", format!("'{s}' is not one of mm, dd"))),
        }
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plane::MassMass => "mm",
            Plane::DampingDamping => "dd",
        })
    }
}

/// What the controller is told about the plant at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContextMode {
    /// True parameters of the cell.
    Matched,
    Nominal,
    /// Nominal masses and length with doubled damping.
    TwiceDamping,
    /// Nominal masses and length with the out-of-domain damping pair.
    Far,
    /// Fixed physical values `(M, m, l, D_c, D_p)`.
    Explicit([f64; N_COND]),
}

impl ContextMode {
    pub fn conditioning(&self, cell: &PlantParams) -> Result<ConditioningVector> {
        let nominal = ConditioningVector::nominal().physical();
        match self {
            ContextMode::Matched => Ok(ConditioningVector::from_plant(cell)),
            ContextMode::Nominal => Ok(ConditioningVector::nominal()),
            ContextMode::TwiceDamping => {
                ConditioningVector::from_physical([nominal[0], nominal[1], nominal[2], 2.0 * DC_NOM, 2.0 * DP_NOM])
            }
            ContextMode::Far => {
                ConditioningVector::from_physical([nominal[0], nominal[1], nominal[2], FAR_DAMPING.0, FAR_DAMPING.1])
            }
            ContextMode::Explicit(v) => ConditioningVector::from_physical(*v),
        }
    }

    /// Physical context values; `Matched` reports the cell itself.
    pub fn physical(&self, cell: &PlantParams) -> Result<[f64; N_COND]> {
        match self {
            ContextMode::Matched => Ok([cell.total_mass, cell.m, cell.l, cell.d_c, cell.d_p]),
            ContextMode::Explicit(v) => Ok(*v),
            ContextMode::TwiceDamping => {
                let n = ConditioningVector::nominal().physical();
                Ok([n[0], n[1], n[2], 2.0 * DC_NOM, 2.0 * DP_NOM])
            }
            ContextMode::Far => {
                let n = ConditioningVector::nominal().physical();
                Ok([n[0], n[1], n[2], FAR_DAMPING.0, FAR_DAMPING.1])
            }
            ContextMode::Nominal => Ok(ConditioningVector::nominal().physical()),
        }
    }
}

impl FromStr for ContextMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matched" => Ok(ContextMode::Matched),
            "nominal" => Ok(ContextMode::Nominal),
            "2x" => Ok(ContextMode::TwiceDamping),
            "far" => Ok(ContextMode::Far),
            _ => Err(Error::invalid(
                "context",
                format!("'{s}' is not one of nominal, 2x, far, matched"),
            )),
        }
    }
}

/// Evenly spaced samples from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub plane: Plane,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub base: PlantParams,
    pub context: ContextMode,
    pub theta0: f64,
    pub steps: usize,
    pub limits: SimLimits,
    pub band_fraction: f64,
    pub signal: Signal,
}

impl SweepSpec {
    pub fn new(plane: Plane, n: usize) -> Self {
        let [(a0, a1), (b0, b1)] = plane.default_range();
        Self {
            plane,
            axis1: linspace(a0, a1, n),
            axis2: linspace(b0, b1, n),
            base: PlantParams::nominal(),
            context: match plane {
                Plane::MassMass => ContextMode::Matched,
                Plane::DampingDamping => ContextMode::Nominal,
            },
            theta0: 0.1,
            steps: 500,
            limits: SimLimits::default(),
            band_fraction: 0.05,
            signal: Signal::Theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("axis1", &self.axis1), ("axis2", &self.axis2)] {
            if axis.is_empty() {
                return Err(Error::invalid(name, "must contain at least one value"));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) || axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and strictly increasing"));
            }
        }
        if !self.theta0.is_finite() {
            return Err(Error::invalid("theta0", "must be finite"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be >= 1"));
        }
        if !(self.band_fraction > 0.0 && self.band_fraction < 1.0) {
            return Err(Error::invalid("band_fraction", "must lie in (0, 1)"));
        }
        self.limits.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Settled,
    NotSettled,
    Diverged,
    Invalid,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Settled => "settled",
            CellStatus::NotSettled => "did-not-settle",
            CellStatus::Diverged => "diverged",
            CellStatus::Invalid => "invalid",
        })
    }
}

impl FromStr for CellStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "settled" => Ok(CellStatus::Settled),
            "did-not-settle" => Ok(CellStatus::NotSettled),
            "diverged" => Ok(CellStatus::Diverged),
            "invalid" => Ok(CellStatus::Invalid),
            _ => Err(Error::format("sweep grid", format!("unknown status '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub a: f64,
    pub b: f64,
    pub status: CellStatus,
    pub settling_time: Option<f64>,
    pub peak_time: Option<f64>,
    /// Physical context `(M, m, l, D_c, D_p)` given to the controller.
    pub context: [f64; N_COND],
}

/// Cells are stored row-major with `axis1` as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axis_names: [String; 2],
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[i * self.axis2.len() + j]
    }

    pub fn settled_count(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Settled).count()
    }

    /// Settling times as an `axis1 × axis2` matrix; unsettled cells are `None`.
    pub fn matrix(&self) -> Vec<Vec<Option<f64>>> {
        self.cells
            .chunks(self.axis2.len())
            .map(|r| r.iter().map(|c| c.settling_time).collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            self.axis_names[0].as_str(),
            self.axis_names[1].as_str(),
            "settling_time_s",
            "peak_time_s",
            "status",
            "ctx_M",
            "ctx_m",
            "ctx_l",
            "ctx_D_c",
            "ctx_D_p",
        ])?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for c in &self.cells {
            let mut row = vec![
                c.a.to_string(),
                c.b.to_string(),
                opt(c.settling_time),
                opt(c.peak_time),
                c.status.to_string(),
            ];
            row.extend(c.context.iter().map(f64::to_string));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| Error::io("<sweep grid>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let h = rd.headers()?.clone();
        if h.len() != 10 || &h[2] != "settling_time_s" || &h[4] != "status" {
            return Err(Error::format("sweep grid", "unexpected header"));
        }
        let axis_names = [h[0].to_string(), h[1].to_string()];
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::format("sweep grid", format!("bad number '{s}'")))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let mut cells = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let mut context = [0.0; N_COND];
            for (k, c) in context.iter_mut().enumerate() {
                *c = num(&rec[5 + k])?;
            }
            cells.push(SweepCell {
                a: num(&rec[0])?,
                b: num(&rec[1])?,
                settling_time: opt(&rec[2])?,
                peak_time: opt(&rec[3])?,
                status: rec[4].parse()?,
                context,
            });
        }
        let mut axis1: Vec<f64> = Vec::new();
        let mut axis2: Vec<f64> = Vec::new();
        for c in &cells {
            if !axis1.contains(&c.a) {
                axis1.push(c.a);
            }
            if axis1.len() == 1 && !axis2.contains(&c.b) {
                axis2.push(c.b);
            }
        }
        if axis1.len() * axis2.len() != cells.len() {
            return Err(Error::format("sweep grid", "rows do not form a full grid"));
        }
        Ok(Self {
            axis_names,
            axis1,
            axis2,
            cells,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

fn invalid_cell(a: f64, b: f64) -> SweepCell {
    SweepCell {
        a,
        b,
        status: CellStatus::Invalid,
        settling_time: None,
        peak_time: None,
        context: [f64::NAN; N_COND],
    }
}

/// Rolls out one noise-free episode per cell from `θ = θ0` and measures settling.
pub fn evaluate_cell(ctrl: &AnyController, spec: &SweepSpec, a: f64, b: f64) -> SweepCell {
    let Ok(plant) = spec.plane.plant(&spec.base, a, b) else {
        return invalid_cell(a, b);
    };
    let (Ok(cond), Ok(context)) = (spec.context.conditioning(&plant), spec.context.physical(&plant)) else {
        return invalid_cell(a, b);
    };
    let mut policy = ctrl.policy();
    let init = State::new(0.0, 0.0, spec.theta0, 0.0);
    let trace = run_episode_from(policy.as_mut(), &plant, &cond, init, 0.0, spec.steps, &spec.limits);
    let log = TrajectoryLog::from_trace(&trace, spec.limits.dt);
    let r: Option<SettlingResult> = settling_of(&log.t, log.signal(spec.signal), spec.band_fraction).ok();
    let (status, settling_time) = match (trace.diverged, r.and_then(|r| r.settling_time)) {
        (true, _) => (CellStatus::Diverged, None),
        (false, Some(ts)) => (CellStatus::Settled, Some(ts)),
        (false, None) => (CellStatus::NotSettled, None),
    };
    SweepCell {
        a,
        b,
        status,
        settling_time,
        peak_time: r.map(|r| r.peak_time),
        context,
    }
}

pub fn sweep(ctrl: &AnyController, spec: &SweepSpec) -> Result<SweepGrid> {
    spec.validate()?;
    let n2 = spec.axis2.len();
    let cells = (0..spec.axis1.len() * n2)
        .into_par_iter()
        .map(|k| evaluate_cell(ctrl, spec, spec.axis1[k / n2], spec.axis2[k % n2]))
        .collect();
    let names = spec.plane.axis_names();
    Ok(SweepGrid {
        axis_names: [names[0].to_string(), names[1].to_string()],
        axis1: spec.axis1.clone(),
        axis2: spec.axis2.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::GainSet;

    fn prop() -> AnyController {
        AnyController::Proportional(GainSet::default())
    }

    #[test]
    fn nominal_cell_settles_and_degenerate_cell_is_invalid() {
        let mut spec = SweepSpec::new(Plane::MassMass, 3);
        spec.axis1 = vec![0.3, 0.4, 0.5];
        spec.axis2 = vec![0.2, 0.3, 0.4];
        let g = sweep(&prop(), &spec).unwrap();
        assert_eq!(g.cells.len(), 9);
        assert_eq!(g.cell(1, 1).status, CellStatus::Settled);
        assert!(g.cell(1, 1).settling_time.unwrap() < 5.0);
        assert_eq!(g.cell(1, 2).status, CellStatus::Invalid);
        assert_eq!(g.cell(0, 1).status, CellStatus::Invalid);
    }

    #[test]
    fn sweep_is_repeatable_and_order_free() {
        let spec = SweepSpec::new(Plane::DampingDamping, 3);
        let a = sweep(&prop(), &spec).unwrap();
        let b = sweep(&prop(), &spec).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let cell = evaluate_cell(&prop(), &spec, spec.axis1[2], spec.axis2[0]);
        assert_eq!(format!("{:?}", a.cell(2, 0)), format!("{cell:?}"));
    }

    #[test]
    fn far_context_columns_are_exact() {
        let mut spec = SweepSpec::new(Plane::DampingDamping, 2);
        spec.context = ContextMode::Far;
        let g = sweep(&prop(), &spec).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert!(row.ends_with(",17.06351,0.024376"), "{row}");
        let back = SweepGrid::read_csv(buf.as_slice()).unwrap();
        assert_eq!(format!("{back:?}"), format!("{g:?}"));
    }
}
