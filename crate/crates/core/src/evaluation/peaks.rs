//! Prominence-filtered peaks of `|signal|`.

use super::trajectory::{Signal, TrajectoryLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub time: f64,
    /// Signed signal value.
    pub value: f64,
    pub magnitude: f64,
    pub prominence: f64,
}

pub fn detect_peaks(log: &TrajectoryLog, signal: Signal, min_prominence: f64) -> Vec<Peak> {
    peaks_of(&log.t, log.signal(signal), min_prominence)
}

/// Local maxima of `|y|` whose prominence is at least `min_prominence`.
///
/// A flat top counts once, at its first sample. Prominence is the height above
/// the higher of the two minima found by walking outward until a strictly
/// higher sample or the end of the record.
pub fn peaks_of(t: &[f64], y: &[f64], min_prominence: f64) -> Vec<Peak> {
    let a: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let n = a.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if a[i] > a[i - 1] {
            let mut j = i;
            while j + 1 < n && a[j + 1] == a[i] {
                j += 1;
            }
            if j + 1 < n && a[j + 1] < a[i] {
                let h = a[i];
                let mut left_min = h;
                for k in (0..i).rev() {
                    if a[k] > h {
                        break;
                    }
                    left_min = left_min.min(a[k]);
                }
                let mut right_min = h;
                for &v in &a[j + 1..] {
                    if v > h {
                        break;
                    }
                    right_min = right_min.min(v);
                }
                let prominence = h - left_min.max(right_min);
                if prominence >= min_prominence {
                    out.push(Peak {
                        index: i,
                        time: t[i],
                        value: y[i],
                        magnitude: h,
                        prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}
