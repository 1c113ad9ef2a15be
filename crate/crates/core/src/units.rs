//! Conversion between SI and the scaled unit system (time in `1/Gamma`,
//! length in `L`).

use serde::{Deserialize, Serialize};

use crate::model::{Config, LevelSystem, Units};

/// Multiplicative factors applied to times and lengths; derived quantities
/// follow from these two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    time: f64,
    length: f64,
}

impl Scaling {
    pub(crate) fn from_si(sys: &LevelSystem) -> Self {
        Self { time: sys.gamma, length: 1.0 / sys.length }
    }

    pub fn time(&self, t: f64) -> f64 {
        t * self.time
    }

    pub fn length(&self, z: f64) -> f64 {
        z * self.length
    }

    pub fn rate(&self, r: f64) -> f64 {
        r / self.time
    }

    pub fn velocity(&self, v: f64) -> f64 {
        v * self.length / self.time
    }

    pub fn wavenumber(&self, k: f64) -> f64 {
        k / self.length
    }

    pub fn inverse(&self) -> Self {
        Self { time: 1.0 / self.time, length: 1.0 / self.length }
    }
}

/// The SI reference values that define the scaled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    /// Excited-state decay rate in 1/s.
    pub gamma: f64,
    /// Medium length in m.
    pub length: f64,
}

impl UnitScale {
    pub fn of(cfg: &Config) -> Self {
        Self { gamma: cfg.system.gamma, length: cfg.system.length }
    }

    fn scaling(&self) -> Scaling {
        Scaling { time: self.gamma, length: 1.0 / self.length }
    }

    /// SI configuration to scaled units. Already-scaled input is returned as is.
    pub fn to_scaled(&self, cfg: &Config) -> Config {
        let mut out = cfg.clone();
        if cfg.units == Units::Si {
            out.rescale(&self.scaling());
            out.units = Units::Scaled;
        }
        out
    }

    pub fn to_si(&self, cfg: &Config) -> Config {
        let mut out = cfg.clone();
        if cfg.units == Units::Scaled {
            out.rescale(&self.scaling().inverse());
            out.units = Units::Si;
        }
        out
    }

    pub fn time_to_si(&self, t: f64) -> f64 {
        t / self.gamma
    }

    pub fn rate_to_si(&self, r: f64) -> f64 {
        r * self.gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::minimal;
    use crate::model::{validate, Envelope, PumpProfile};
    use proptest::prelude::*;

    fn si_config(gamma: f64, length: f64, omega: f64, t0: f64) -> Config {
        let mut c = minimal();
        c.units = Units::Si;
        c.system.gamma = gamma;
        c.system.length = length;
        c.system.g = vec![0.3 * gamma, 0.7 * gamma];
        c.geometry.c = 2.0 * length * gamma;
        c.pumps = vec![
            PumpProfile::Constant { amplitude: omega * gamma },
            PumpProfile::TanhRamp { from: 0.0, to: omega * gamma, t_switch: t0 / gamma, ramp_time: 2.0 / gamma },
        ];
        c.probes.boundary[0] = Envelope::Gaussian { peak: 1.0, phase: 0.2, center: t0 / gamma, width: 3.0 / gamma };
        c.grid.dt = 0.01 / gamma;
        c.grid.t_max = 1.0 / gamma;
        c
    }

    #[test]
    fn si_values_land_on_scaled_grid() {
        let c = si_config(6.0e6, 0.02, 1.5, 4.0);
        let v = validate(&c).unwrap();
        let s = &v.config;
        assert_eq!(s.units, Units::Scaled);
        assert!((s.system.gamma - 1.0).abs() < 1e-12);
        assert!((s.system.length - 1.0).abs() < 1e-12);
        assert!((s.geometry.c - 2.0).abs() < 1e-12);
        assert!((s.grid.dt - 0.01).abs() < 1e-12);
        assert!((s.pumps[0].at(0.0) - 1.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn si_round_trip(gamma in 1.0e3f64..1.0e9, length in 1.0e-4f64..1.0, omega in 0.1f64..10.0, t0 in 1.0f64..50.0) {
            let c = si_config(gamma, length, omega, t0);
            let scale = UnitScale::of(&c);
            let back = scale.to_si(&scale.to_scaled(&c));
            let a = serde_json::to_value(&c).unwrap();
            let b = serde_json::to_value(&back).unwrap();
            fn close(a: &serde_json::Value, b: &serde_json::Value) -> bool {
                use serde_json::Value::*;
                match (a, b) {
                    (Number(x), Number(y)) => {
                        let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
                        (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300)
                    }
                    (Array(x), Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| close(p, q)),
                    (Object(x), Object(y)) => x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| close(v, w))),
                    _ => a == b,
                }
            }
            prop_assert!(close(&a, &b));
        }
    }
}
