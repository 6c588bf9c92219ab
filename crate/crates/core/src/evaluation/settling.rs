//! Band settling time of a transient.

pub use super::trajectory::Signal;
use super::trajectory::TrajectoryLog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlingResult {
    /// Earliest time after which the signal stays in the band; `None` if it never does.
    pub settling_time: Option<f64>,
    /// Time of the largest `|signal|`, earliest on ties.
    pub peak_time: f64,
    /// Signed signal value at `peak_time`.
    pub peak_value: f64,
    /// Half-width of the band.
    pub band: f64,
}

/// The band is `band_fraction · max|signal|`. An identically zero signal
/// settles at the first time stamp with a zero band.
pub fn settling_time(log: &TrajectoryLog, signal: Signal, band_fraction: f64) -> Result<SettlingResult> {
    if log.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    if !(band_fraction > 0.0 && band_fraction < 1.0) {
        return Err(Error::invalid("band_fraction", "must lie in (0, 1)"));
    }
    settling_of(&log.t, log.signal(signal), band_fraction)
}

pub(crate) fn settling_of(t: &[f64], y: &[f64], band_fraction: f64) -> Result<SettlingResult> {
    if t.is_empty() || t.len() != y.len() {
        return Err(Error::Empty("trajectory"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("settling signal"));
    }
    let mut peak = 0;
    for (i, v) in y.iter().enumerate() {
        if v.abs() > y[peak].abs() {
            peak = i;
        }
    }
    let band = band_fraction * y[peak].abs();
    let settling_time = match y.iter().rposition(|v| v.abs() > band) {
        None => Some(t[0]),
        Some(i) if i + 1 < t.len() => Some(t[i + 1]),
        Some(_) => None,
    };
    Ok(SettlingResult {
        settling_time,
        peak_time: t[peak],
        peak_value: y[peak],
        band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(dt: f64, n: usize, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let y = t.iter().map(|&t| f(t)).collect();
        (t, y)
    }

    #[test]
    fn exponential_decay_settles_at_ln20() {
        let dt = 1e-3;
        let (t, y) = series(dt, 8000, |t| 0.1 * (-t).exp());
        let r = settling_of(&t, &y, 0.05).unwrap();
        let ts = r.settling_time.unwrap();
        assert!((ts - 20f64.ln()).abs() <= dt, "{ts}");
        assert_eq!(r.peak_time, 0.0);
        assert_eq!(r.peak_value, 0.1);
    }

    #[test]
    fn constant_signal_does_not_settle() {
        let (t, y) = series(0.01, 100, |_| 0.3);
        assert_eq!(settling_of(&t, &y, 0.05).unwrap().settling_time, None);
    }

    #[test]
    fn late_excursion_pushes_settling_past_it() {
        let (t, y) = series(0.01, 800, |t| {
            if (4.0..4.05).contains(&t) {
                0.5
            } else {
                (-3.0 * t).exp()
            }
        });
        let ts = settling_of(&t, &y, 0.05).unwrap().settling_time.unwrap();
        assert!(ts > 4.0);
    }

    #[test]
    fn zero_signal_settles_immediately() {
        let (t, y) = series(0.01, 10, |_| 0.0);
        let r = settling_of(&t, &y, 0.05).unwrap();
        assert_eq!(r.settling_time, Some(0.0));
        assert_eq!(r.band, 0.0);
    }

    #[test]
    fn wider_band_never_settles_later() {
        let (t, y) = series(0.01, 600, |t| (-0.8 * t).exp() * (7.0 * t).cos());
        let mut prev = f64::INFINITY;
        for frac in [0.01, 0.02, 0.05, 0.1, 0.2, 0.5] {
            let ts = settling_of(&t, &y, frac)
                .unwrap()
                .settling_time
                .unwrap_or(f64::INFINITY);
            assert!(ts <= prev);
            prev = ts;
        }
    }
}
