//! Peak-based comparison of a simulated and a recorded transient.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::peaks::{detect_peaks, Peak};
use super::trajectory::{Signal, TrajectoryLog};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignConfig {
    /// Peak prominence threshold as a fraction of each log's `max|signal|`.
    pub prominence_fraction: f64,
    /// Largest time difference at which two peaks may be matched [s].
    pub match_window: f64,
    /// Trailing share of the record used for the oscillation score.
    pub tail_fraction: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            prominence_fraction: 0.1,
            match_window: 0.5,
            tail_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPeak {
    pub t_sim: f64,
    /// Recorded peak time after removing the offset.
    pub t_real: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub signal: Signal,
    /// Recorded reference-peak time minus simulated reference-peak time.
    pub offset: f64,
    pub n_peaks_sim: usize,
    pub n_peaks_real: usize,
    pub matched: Vec<MatchedPeak>,
    pub unmatched_sim: Vec<f64>,
    pub unmatched_real: Vec<f64>,
    pub decay_rate_sim: Option<f64>,
    pub decay_rate_real: Option<f64>,
    pub decay_ratio: Option<f64>,
    pub oscillation_sim: f64,
    pub oscillation_real: f64,
}

impl GapReport {
    pub fn mean_abs_delta(&self) -> f64 {
        if self.matched.is_empty() {
            0.0
        } else {
            self.matched.iter().map(|m| m.delta.abs()).sum::<f64>() / self.matched.len() as f64
        }
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        vec![
            ("signal".into(), self.signal.to_string()),
            ("offset_s".into(), self.offset.to_string()),
            ("n_peaks_sim".into(), self.n_peaks_sim.to_string()),
            ("n_peaks_real".into(), self.n_peaks_real.to_string()),
            ("n_matched".into(), self.matched.len().to_string()),
            ("mean_abs_delta_s".into(), self.mean_abs_delta().to_string()),
            (
                "matched_t_sim".into(),
                list(&self.matched.iter().map(|m| m.t_sim).collect::<Vec<_>>()),
            ),
            (
                "matched_t_real".into(),
                list(&self.matched.iter().map(|m| m.t_real).collect::<Vec<_>>()),
            ),
            (
                "matched_delta_s".into(),
                list(&self.matched.iter().map(|m| m.delta).collect::<Vec<_>>()),
            ),
            ("unmatched_sim".into(), list(&self.unmatched_sim)),
            ("unmatched_real".into(), list(&self.unmatched_real)),
            ("decay_rate_sim".into(), opt(self.decay_rate_sim)),
            ("decay_rate_real".into(), opt(self.decay_rate_real)),
            ("decay_ratio".into(), opt(self.decay_ratio)),
            ("oscillation_score_sim".into(), self.oscillation_sim.to_string()),
            ("oscillation_score_real".into(), self.oscillation_real.to_string()),
        ]
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in self.to_pairs() {
            writeln!(w, "{k}={v}").map_err(|e| Error::io("<gap report>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text).map_err(|e| Error::io("<gap report>", e))?;
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("gap report", format!("line without '=': {line}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            map.get(k)
                .ok_or_else(|| Error::format("gap report", format!("missing key '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::format("gap report", format!("bad number for '{k}'")))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            let v = get(k)?;
            if v == "none" {
                Ok(None)
            } else {
                v.parse()
                    .map(Some)
                    .map_err(|_| Error::format("gap report", format!("bad number for '{k}'")))
            }
        };
        let list = |k: &str| -> Result<Vec<f64>> {
            let v = get(k)?;
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(';')
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::format("gap report", format!("bad list for '{k}'")))
                })
                .collect()
        };
        let count = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::format("gap report", format!("bad count for '{k}'")))
        };
        let (ts, tr, dl) = (
            list("matched_t_sim")?,
            list("matched_t_real")?,
            list("matched_delta_s")?,
        );
        if ts.len() != tr.len() || ts.len() != dl.len() || ts.len() != count("n_matched")? {
            return Err(Error::format("gap report", "matched lists disagree in length"));
        }
        Ok(Self {
            signal: get("signal")?.parse()?,
            offset: num("offset_s")?,
            n_peaks_sim: count("n_peaks_sim")?,
            n_peaks_real: count("n_peaks_real")?,
            matched: ts
                .into_iter()
                .zip(tr)
                .zip(dl)
                .map(|((t_sim, t_real), delta)| MatchedPeak { t_sim, t_real, delta })
                .collect(),
            unmatched_sim: list("unmatched_sim")?,
            unmatched_real: list("unmatched_real")?,
            decay_rate_sim: opt("decay_rate_sim")?,
            decay_rate_real: opt("decay_rate_real")?,
            decay_ratio: opt("decay_ratio")?,
            oscillation_sim: num("oscillation_score_sim")?,
            oscillation_real: num("oscillation_score_real")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(f)
    }
}

fn log_peaks(log: &TrajectoryLog, signal: Signal, cfg: &AlignConfig) -> Vec<Peak> {
    let max = log.signal(signal).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    detect_peaks(log, signal, cfg.prominence_fraction * max)
}

/// Most prominent peak, earliest on ties.
fn reference(peaks: &[Peak]) -> &Peak {
    let mut best = &peaks[0];
    for p in &peaks[1..] {
        if p.prominence > best.prominence {
            best = p;
        }
    }
    best
}

/// Exponential decay rate from a least-squares line through `ln|peak|` against time.
fn decay_rate(peaks: &[Peak]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = peaks
        .iter()
        .filter(|p| p.magnitude > 0.0)
        .map(|p| (p.time, p.magnitude.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

/// RMS over the trailing `tail_fraction` of the record, relative to the first peak.
fn oscillation_score(log: &TrajectoryLog, signal: Signal, first_peak: f64, tail_fraction: f64) -> f64 {
    let y = log.signal(signal);
    let t0 = log.t[log.len() - 1] - tail_fraction * log.duration();
    let tail: Vec<f64> = log
        .t
        .iter()
        .zip(y)
        .filter(|(t, _)| **t >= t0)
        .map(|(_, v)| *v)
        .collect();
    let rms = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
    if first_peak > 0.0 {
        rms / first_peak
    } else {
        0.0
    }
}

pub fn align_and_compare(
    sim: &TrajectoryLog,
    real: &TrajectoryLog,
    signal: Signal,
    cfg: &AlignConfig,
) -> Result<GapReport> {
    let ps = log_peaks(sim, signal, cfg);
    let pr = log_peaks(real, signal, cfg);
    if ps.is_empty() {
        return Err(Error::NoPeaks("simulated"));
    }
    if pr.is_empty() {
        return Err(Error::NoPeaks("recorded"));
    }
    let (rs, rr) = (reference(&ps), reference(&pr));
    let offset = rr.time - rs.time;

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in ps.iter().enumerate() {
        for (j, b) in pr.iter().enumerate() {
            let d = (b.time - offset) - a.time;
            if d.abs() <= cfg.match_window {
                pairs.push((d.abs(), i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let (mut used_s, mut used_r) = (vec![false; ps.len()], vec![false; pr.len()]);
    let mut matched = Vec::new();
    for (_, i, j) in pairs {
        if !used_s[i] && !used_r[j] {
            used_s[i] = true;
            used_r[j] = true;
            let t_real = pr[j].time - offset;
            matched.push(MatchedPeak {
                t_sim: ps[i].time,
                t_real,
                delta: t_real - ps[i].time,
            });
        }
    }
    matched.sort_by(|a, b| a.t_sim.total_cmp(&b.t_sim));

    let ds = decay_rate(&ps[ps.iter().position(|p| p.index == rs.index).unwrap_or(0)..]);
    let dr = decay_rate(&pr[pr.iter().position(|p| p.index == rr.index).unwrap_or(0)..]);
    let decay_ratio = match (ds, dr) {
        (Some(a), Some(b)) if a != 0.0 => Some(b / a),
        _ => None,
    };
    Ok(GapReport {
        signal,
        offset,
        n_peaks_sim: ps.len(),
        n_peaks_real: pr.len(),
        matched,
        unmatched_sim: ps
            .iter()
            .zip(&used_s)
            .filter(|(_, u)| !**u)
            .map(|(p, _)| p.time)
            .collect(),
        unmatched_real: pr
            .iter()
            .zip(&used_r)
            .filter(|(_, u)| !**u)
            .map(|(p, _)| p.time)
            .collect(),
        decay_rate_sim: ds,
        decay_rate_real: dr,
        decay_ratio,
        oscillation_sim: oscillation_score(sim, signal, ps[0].magnitude, cfg.tail_fraction),
        oscillation_real: oscillation_score(real, signal, pr[0].magnitude, cfg.tail_fraction),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::trajectory::Source;

    fn damped(shift: f64, extra: impl Fn(f64) -> f64) -> TrajectoryLog {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.01).collect();
        let w: Vec<f64> = t
            .iter()
            .map(|&t| {
                let s = t - shift;
                let base = if s < 0.0 {
                    0.0
                } else {
                    (-1.2 * s).exp() * (2.0 * std::f64::consts::PI * 1.3 * s).sin()
                };
                base + extra(t)
            })
            .collect();
        TrajectoryLog::new(Source::Sim, t, vec![0.0; w.len()], w).unwrap()
    }

    #[test]
    fn self_comparison_is_zero_gap() {
        let a = damped(0.0, |_| 0.0);
        let r = align_and_compare(&a, &a, Signal::Omega, &AlignConfig::default()).unwrap();
        assert_eq!(r.offset, 0.0);
        assert!(r.matched.iter().all(|m| m.delta == 0.0));
        assert_eq!(r.decay_ratio, Some(1.0));
        assert_eq!(r.oscillation_sim, r.oscillation_real);
    }

    #[test]
    fn recovers_shift_and_its_negation() {
        let a = damped(0.3, |_| 0.0);
        let b = damped(0.5, |_| 0.0);
        let cfg = AlignConfig::default();
        let r = align_and_compare(&a, &b, Signal::Omega, &cfg).unwrap();
        assert!((r.offset - 0.2).abs() <= 0.01 + 1e-12, "{}", r.offset);
        assert!(r.mean_abs_delta() <= 0.01 + 1e-12);
        let back = align_and_compare(&b, &a, Signal::Omega, &cfg).unwrap();
        assert!((back.offset + r.offset).abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn report_roundtrip() {
        let a = damped(0.0, |_| 0.0);
        let b = damped(0.1, |t| 0.05 * (2.0 * std::f64::consts::PI * 5.0 * t).sin());
        let r = align_and_compare(&a, &b, Signal::Omega, &AlignConfig::default()).unwrap();
        let mut buf = Vec::new();
        r.write(&mut buf).unwrap();
        assert_eq!(GapReport::read(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn flat_logs_have_no_peaks() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let flat = TrajectoryLog::new(Source::Sim, t.clone(), vec![0.0; 10], vec![0.0; 10]).unwrap();
        assert!(matches!(
            align_and_compare(&flat, &flat, Signal::Omega, &AlignConfig::default()),
            Err(Error::NoPeaks(_))
        ));
    }
}
