//! Smoothed equivalent-gain traces from a training log.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::training::TrainLog;

/// Trailing moving average; the first `window - 1` outputs average what is available.
pub fn moving_average(y: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(y.len());
    let mut sum = 0.0;
    for i in 0..y.len() {
        sum += y[i];
        if i >= w {
            sum -= y[i - w];
        }
        let n = (i + 1).min(w);
        out.push(if w == 1 { y[i] } else { sum / n as f64 });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainTrace {
    pub window: usize,
    pub epoch: Vec<usize>,
    /// `[g_x, g_v, g_θ, g_ω]` per epoch after smoothing.
    pub gains: Vec<[f64; 4]>,
}

const COLUMNS: [&str; 5] = ["epoch", "g_x", "g_v", "g_theta", "g_omega"];

impl GainTrace {
    pub fn from_log(log: &TrainLog, window: usize) -> Result<Self> {
        if log.records.is_empty() {
            return Err(Error::Empty("training log"));
        }
        if window == 0 {
            return Err(Error::invalid("window", "must be >= 1"));
        }
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|k| moving_average(&log.records.iter().map(|r| r.gains[k]).collect::<Vec<_>>(), window))
            .collect();
        Ok(Self {
            window,
            epoch: log.records.iter().map(|r| r.epoch).collect(),
            gains: (0..log.records.len())
                .map(|i| [cols[0][i], cols[1][i], cols[2][i], cols[3][i]])
                .collect(),
        })
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.gains.iter().map(|g| g[k]).collect()
    }

    pub fn max(&self, k: usize) -> f64 {
        self.gains.iter().map(|g| g[k]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn last(&self) -> [f64; 4] {
        *self.gains.last().expect("trace is non-empty")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(COLUMNS)?;
        for (e, g) in self.epoch.iter().zip(&self.gains) {
            let mut row = vec![e.to_string()];
            row.extend(g.iter().map(f64::to_string));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| Error::io("<gain trace>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads a trace; the window is not stored and is reported as 1.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().ne(COLUMNS) {
            return Err(Error::format("gain trace", "unexpected header"));
        }
        let mut t = Self {
            window: 1,
            epoch: Vec::new(),
            gains: Vec::new(),
        };
        for rec in rd.records() {
            let rec = rec?;
            let bad = || Error::format("gain trace", "bad number");
            t.epoch.push(rec[0].parse().map_err(|_| bad())?);
            let mut g = [0.0; 4];
            for k in 0..4 {
                g[k] = rec[k + 1].parse().map_err(|_| bad())?;
            }
            t.gains.push(g);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_values() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(moving_average(&y, 1), y.to_vec());
        assert_eq!(moving_average(&y, 2), vec![1.0, 1.5, 2.5, 3.5, 4.5]);
        assert_eq!(moving_average(&y, 10), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert!(moving_average(&[], 3).is_empty());
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(GainTrace::from_log(&TrainLog::new(4), 5).is_err());
    }
}
