use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::plant::{rod_inertia, PlantParams};

/// Multiplicative uniform ranges for plant randomization. The pole mass is
/// drawn as a fraction of the sampled total mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrRanges {
    pub total_mass: (f64, f64),
    pub pole_fraction_scale: f64,
    pub pole_fraction: (f64, f64),
    pub length: (f64, f64),
    pub d_c: (f64, f64),
    pub d_p: (f64, f64),
    /// Fixed pole inertia; `None` applies the uniform-rod rule to each sample.
    pub inertia: Option<f64>,
}

impl Default for DrRanges {
    fn default() -> Self {
        Self {
            total_mass: (0.5, 2.0),
            pole_fraction_scale: 0.8,
            pole_fraction: (0.5, 1.0),
            length: (0.5, 2.0),
            d_c: (0.5, 2.0),
            d_p: (0.5, 2.0),
            inertia: None,
        }
    }
}

impl DrRanges {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        for (k, (lo, hi)) in [
            ("dr.total_mass", self.total_mass),
            ("dr.pole_fraction", self.pole_fraction),
            ("dr.length", self.length),
            ("dr.d_c", self.d_c),
            ("dr.d_p", self.d_p),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::invalid(k, "range must satisfy 0 < lo <= hi"));
            }
        }
        if !(self.pole_fraction_scale > 0.0 && self.pole_fraction_scale * self.pole_fraction.1 < 1.0) {
            return Err(Error::invalid(
                "dr.pole_fraction_scale",
                "scaled pole fraction must stay below 1",
            ));
        }
        if let Some(j) = self.inertia {
            if !(j.is_finite() && j >= 0.0) {
                return Err(Error::invalid("dr.inertia", "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Returns `nominal` when inactive; otherwise scales the nominal total mass,
/// length and dampings, draws the pole mass as a fraction of the total, and
/// recomputes the cart mass and inertia.
pub fn sample_plant<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &DrRanges,
    active: bool,
    nominal: &PlantParams,
) -> PlantParams {
    if !active {
        return *nominal;
    }
    let total_mass = uniform(rng, ranges.total_mass) * nominal.total_mass;
    let m = ranges.pole_fraction_scale * uniform(rng, ranges.pole_fraction) * total_mass;
    let l = uniform(rng, ranges.length) * nominal.l;
    let d_c = uniform(rng, ranges.d_c) * nominal.d_c;
    let d_p = uniform(rng, ranges.d_p) * nominal.d_p;
    PlantParams {
        m,
        m_c: total_mass - m,
        total_mass,
        l,
        j: ranges.inertia.unwrap_or_else(|| rod_inertia(m, l)),
        g: nominal.g,
        d_c,
        d_p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inactive_returns_nominal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = sample_plant(&mut rng, &DrRanges::default(), false, &PlantParams::nominal());
        assert_eq!((p.total_mass, p.m, p.l, p.d_c, p.d_p), (0.4, 0.3, 0.05, 3.0, 0.007));
    }

    #[test]
    fn active_samples_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let nom = PlantParams::nominal();
        for _ in 0..100_000 {
            let p = sample_plant(&mut rng, &DrRanges::default(), true, &nom);
            assert!((0.2..=0.8).contains(&p.total_mass));
            let frac = p.m / p.total_mass;
            assert!((0.4..=0.8).contains(&frac));
            assert!(p.m_c > 0.0);
            p.validate().unwrap();
        }
    }
}
