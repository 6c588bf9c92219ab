//! Per-epoch training records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use super::bptt::{BatchLoss, EpisodeInput};
use super::schedule::ScheduleValues;
use crate::error::{Error, Result};

/// Plant parameters drawn for one batch item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemPlant {
    pub total_mass: f64,
    pub m: f64,
    pub l: f64,
    pub d_c: f64,
    pub d_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub theta_scale: f64,
    pub f_scale: f64,
    pub dr_active: bool,
    pub lr: f64,
    pub total: f64,
    pub state: [f64; 4],
    pub gains: [f64; 4],
    /// Weighted gain term as it entered the total; 0 when the term is disabled.
    pub l_grad: f64,
    pub updated: bool,
    pub diverged: usize,
    /// Euclidean norm of the full gradient.
    pub grad_norm: f64,
    pub plants: Vec<ItemPlant>,
}

impl EpochRecord {
    pub fn new(
        sched: &ScheduleValues,
        loss: &BatchLoss,
        gc_enabled: bool,
        gc_weight: f64,
        updated: bool,
        grad_norm: f64,
        inputs: &[EpisodeInput],
    ) -> Self {
        Self {
            epoch: sched.epoch,
            steps: sched.steps,
            theta_scale: sched.theta_scale,
            f_scale: sched.f_scale,
            dr_active: sched.dr_active,
            lr: sched.lr,
            total: loss.total,
            state: loss.state,
            gains: loss.gains,
            l_grad: if gc_enabled { gc_weight * loss.l_grad } else { 0.0 },
            updated,
            diverged: loss.diverged,
            grad_norm,
            plants: inputs
                .iter()
                .map(|i| ItemPlant {
                    total_mass: i.plant.total_mass,
                    m: i.plant.m,
                    l: i.plant.l,
                    d_c: i.plant.d_c,
                    d_p: i.plant.d_p,
                })
                .collect(),
        }
    }
}

const FIXED_COLUMNS: [&str; 19] = [
    "epoch",
    "steps",
    "theta_scale",
    "f_scale",
    "dr_active",
    "lr",
    "total",
    "L_x",
    "L_v",
    "L_theta",
    "L_omega",
    "g_x",
    "g_v",
    "g_theta",
    "g_omega",
    "l_grad",
    "updated",
    "diverged",
    "grad_norm",
];

const ITEM_FIELDS: [&str; 5] = ["M", "m", "l", "Dc", "Dp"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub batch: usize,
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn new(batch: usize) -> Self {
        Self {
            batch,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, rec: EpochRecord) {
        self.records.push(rec);
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn header(batch: usize) -> Vec<String> {
        let mut h: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        for i in 0..batch {
            for f in ITEM_FIELDS {
                h.push(format!("{f}_{i}"));
            }
        }
        h
    }

    pub fn row(rec: &EpochRecord) -> Vec<String> {
        let mut r = vec![
            rec.epoch.to_string(),
            rec.steps.to_string(),
            rec.theta_scale.to_string(),
            rec.f_scale.to_string(),
            u8::from(rec.dr_active).to_string(),
            rec.lr.to_string(),
            rec.total.to_string(),
        ];
        r.extend(rec.state.iter().map(f64::to_string));
        r.extend(rec.gains.iter().map(f64::to_string));
        r.push(rec.l_grad.to_string());
        r.push(u8::from(rec.updated).to_string());
        r.push(rec.diverged.to_string());
        r.push(rec.grad_norm.to_string());
        for p in &rec.plants {
            r.extend([p.total_mass, p.m, p.l, p.d_c, p.d_p].iter().map(f64::to_string));
        }
        r
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::header(self.batch))?;
        for rec in &self.records {
            wr.write_record(Self::row(rec))?;
        }
        wr.flush().map_err(|e| Error::io("<train log>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let n = header.len();
        if n < FIXED_COLUMNS.len() || !(n - FIXED_COLUMNS.len()).is_multiple_of(ITEM_FIELDS.len()) {
            return Err(Error::format("train log", format!("unexpected column count {n}")));
        }
        for (i, name) in FIXED_COLUMNS.iter().enumerate() {
            if &header[i] != *name {
                return Err(Error::format(
                    "train log",
                    format!("column {i} is '{}', expected '{name}'", &header[i]),
                ));
            }
        }
        let batch = (n - FIXED_COLUMNS.len()) / ITEM_FIELDS.len();
        let mut log = TrainLog::new(batch);
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i].trim().parse::<f64>().map_err(|_| {
                    Error::format("train log", format!("row {}: bad number in '{}'", line + 1, &header[i]))
                })
            };
            let int = |i: usize| -> Result<usize> {
                rec[i].trim().parse::<usize>().map_err(|_| {
                    Error::format(
                        "train log",
                        format!("row {}: bad integer in '{}'", line + 1, &header[i]),
                    )
                })
            };
            let plants = (0..batch)
                .map(|b| {
                    let o = FIXED_COLUMNS.len() + b * ITEM_FIELDS.len();
                    Ok(ItemPlant {
                        total_mass: num(o)?,
                        m: num(o + 1)?,
                        l: num(o + 2)?,
                        d_c: num(o + 3)?,
                        d_p: num(o + 4)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            log.push(EpochRecord {
                epoch: int(0)?,
                steps: int(1)?,
                theta_scale: num(2)?,
                f_scale: num(3)?,
                dr_active: int(4)? != 0,
                lr: num(5)?,
                total: num(6)?,
                state: [num(7)?, num(8)?, num(9)?, num(10)?],
                gains: [num(11)?, num(12)?, num(13)?, num(14)?],
                l_grad: num(15)?,
                updated: int(16)? != 0,
                diverged: int(17)?,
                grad_norm: num(18)?,
                plants,
            });
        }
        Ok(log)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

/// Streams records to a CSV file as they are produced.
pub struct CsvLogWriter<W: Write> {
    wr: csv::Writer<W>,
}

impl<W: Write> CsvLogWriter<W> {
    pub fn new(w: W, batch: usize) -> Result<Self> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(TrainLog::header(batch))?;
        Ok(Self { wr })
    }

    pub fn write(&mut self, rec: &EpochRecord) -> Result<()> {
        self.wr.write_record(TrainLog::row(rec))?;
        self.wr.flush().map_err(|e| Error::io("<train log>", e))?;
        Ok(())
    }
}
