//! Spatial interference of the probe components of a stationary pulse.
//!
//! Components share one slowly varying envelope and carry signed wave
//! numbers: forward channels `+k`, backward channels `-k`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::Error;
use crate::metrics::{fwhm, upper_envelope};
use crate::model::{Direction, LevelSystem, PropagationGeometry, C64};
use crate::polariton::{mixing_phi, mixing_theta, photonic_weights, stationarity_pump};

/// Minimum grid points per shortest beat period.
pub const MIN_POINTS_PER_BEAT: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub amplitude: C64,
    pub k: f64,
}

/// Shortest beat period among all component pairs, if any pair beats.
pub fn shortest_beat(components: &[Component]) -> Option<f64> {
    let mut kmax: f64 = 0.0;
    for (i, a) in components.iter().enumerate() {
        for b in &components[i + 1..] {
            kmax = kmax.max((a.k - b.k).abs());
        }
    }
    (kmax > 0.0).then(|| 2.0 * PI / kmax)
}

/// `I(z) = |sum_s A_s env(z) exp(i k_s z)|^2` on a uniform grid.
pub fn interference_profile(
    components: &[Component],
    envelope: impl Fn(f64) -> f64,
    z: &[f64],
) -> Result<Vec<f64>, Error> {
    if let (Some(beat), Some(dz)) = (shortest_beat(components), z.get(1).map(|z1| z1 - z[0])) {
        if dz * MIN_POINTS_PER_BEAT > beat {
            let need = ((z[z.len() - 1] - z[0]) * MIN_POINTS_PER_BEAT / beat).ceil() as usize + 1;
            return Err(Error::Experiment(format!(
                "carrier under-resolved: shortest beat period {beat:.4e} needs dz <= {:.4e} (at least {need} grid points)",
                beat / MIN_POINTS_PER_BEAT
            )));
        }
    }
    Ok(z.iter()
        .map(|&z| {
            let s: C64 = components.iter().map(|c| c.amplitude * C64::from_polar(1.0, c.k * z)).sum();
            s.norm_sqr() * envelope(z).powi(2)
        })
        .collect())
}

/// Stationary probe components for an `m`-level set with equal couplings:
/// channels `1..m-3` forward, channel `m-2` backward, the backward pump at
/// the zero-velocity value and amplitudes `cos(theta) * weight_l`, normalized
/// to unit total power. `m = 3` stands for the standing-wave case with two
/// equal counter-propagating components. Carriers are spaced by
/// `spacing * carrier_k` around channel 2.
pub fn stationary_components(m: usize, carrier_k: f64, spacing: f64) -> Result<Vec<Component>, Error> {
    if m < 3 {
        return Err(Error::Experiment(format!("m must be >= 3, got {m}")));
    }
    if m == 3 {
        let a = C64::new(0.5f64.sqrt(), 0.0);
        return Ok(vec![Component { amplitude: a, k: carrier_k }, Component { amplitude: a, k: -carrier_k }]);
    }
    let ch = m - 2;
    let sys = LevelSystem { m, g: vec![1.0; ch], gamma: 1.0, gamma_ce: None, n_atoms: 1.0, length: 1.0 };
    let mut omegas = vec![1.0; ch];
    omegas[ch - 1] = stationarity_pump(&sys, &omegas[..ch - 1])?;
    let theta = mixing_theta(&sys, &omegas)?;
    let w = photonic_weights(&mixing_phi(&sys, &omegas)?);
    let geom = stationary_geometry(ch);
    let amps: Vec<f64> = w.iter().map(|w| theta.cos() * w).collect();
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok((0..ch)
        .map(|s| Component {
            amplitude: C64::new(amps[s] / norm, 0.0),
            k: geom.directions[s].sign() * carrier_k * (1.0 + spacing * (s as f64 - 1.0)),
        })
        .collect())
}

fn stationary_geometry(ch: usize) -> PropagationGeometry {
    let mut directions = vec![Direction::Forward; ch];
    directions[ch - 1] = Direction::Backward;
    PropagationGeometry { directions, nu: None, c: 1.0, pump_wavevectors: None }
}

/// Widths of one profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileWidths {
    pub m: usize,
    /// FWHM of the central fringe.
    pub fringe_fwhm: f64,
    /// FWHM of the upper envelope through the fringe maxima.
    pub envelope_fwhm: f64,
    pub peak: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub z: Vec<f64>,
    pub profiles: Vec<(usize, Vec<f64>)>,
    pub widths: Vec<ProfileWidths>,
}

/// Profiles for every `m` in `levels` under the envelope `exp(-z^2)`, each
/// scaled to unit integrated power.
pub fn localization_profiles(
    levels: &[usize],
    carrier_k: f64,
    spacing: f64,
    half_width: f64,
    points_per_period: usize,
) -> Result<ProfileSet, Error> {
    let kmax = carrier_k * (1.0 + spacing * levels.iter().map(|&m| m.saturating_sub(3) as f64).fold(1.0, f64::max));
    let period = 2.0 * PI / (2.0 * kmax.abs());
    let dz_target = period / points_per_period.max(MIN_POINTS_PER_BEAT as usize) as f64;
    let n = (2.0 * half_width / dz_target).ceil() as usize + 1;
    let z: Vec<f64> = (0..n).map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64).collect();
    let dz = z[1] - z[0];
    let mut profiles = Vec::new();
    let mut widths = Vec::new();
    for &m in levels {
        let comps = stationary_components(m, carrier_k, spacing)?;
        let mut i = interference_profile(&comps, |z| (-z * z).exp(), &z)?;
        let raw_power = crate::dynamics::trapezoid(&i, dz);
        i.iter_mut().for_each(|v| *v /= raw_power);
        let env = upper_envelope(&z, &i);
        widths.push(ProfileWidths {
            m,
            fringe_fwhm: fwhm(&z, &i).unwrap_or(f64::NAN),
            envelope_fwhm: fwhm(&z, &env).unwrap_or(f64::NAN),
            peak: i.iter().cloned().fold(0.0, f64::max),
            power: crate::dynamics::trapezoid(&i, dz),
        });
        profiles.push((m, i));
    }
    Ok(ProfileSet { z, profiles, widths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn single_component_is_envelope() {
        let z = grid(201, -2.0, 2.0);
        let c = [Component { amplitude: C64::new(0.6, 0.8), k: 37.0 }];
        let i = interference_profile(&c, |z| (-z * z).exp(), &z).unwrap();
        for (zi, ii) in z.iter().zip(&i) {
            assert!((ii - (-2.0 * zi * zi).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn standing_wave() {
        let k = 5.0;
        let z = grid(2001, -2.0, 2.0);
        let a = C64::new(1.0, 0.0);
        let c = [Component { amplitude: a, k }, Component { amplitude: a, k: -k }];
        let i = interference_profile(&c, |_| 1.0, &z).unwrap();
        for (zi, ii) in z.iter().zip(&i) {
            assert!((ii - 4.0 * (k * zi).cos().powi(2)).abs() < 1e-12);
        }
        // period pi/k: fringe FWHM is half a period
        let w = fwhm(&z[900..1101], &i[900..1101]).unwrap();
        assert!((w - PI / (2.0 * k)).abs() < 1e-4);
    }

    #[test]
    fn under_resolved_grid_names_density() {
        let z = grid(11, -1.0, 1.0);
        let c = [Component { amplitude: C64::new(1.0, 0.0), k: 50.0 }, Component { amplitude: C64::new(1.0, 0.0), k: -50.0 }];
        let e = interference_profile(&c, |_| 1.0, &z).unwrap_err();
        assert!(e.to_string().contains("grid points"));
    }

    #[test]
    fn five_level_weights_follow_stationary_mixing() {
        // Equal couplings, forward pumps 1, backward sqrt(2): phi_1 = pi/4,
        // phi_2 = atan(sqrt 2 / sqrt 2) = pi/4.
        let c = stationary_components(5, 100.0, 0.01).unwrap();
        let a: Vec<f64> = c.iter().map(|c| c.amplitude.re).collect();
        assert!((a[0] - 0.5).abs() < 1e-12 && (a[1] - 0.5).abs() < 1e-12);
        assert!((a[2] - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.iter().map(|c| c.k.signum()).collect::<Vec<_>>(), vec![1.0, 1.0, -1.0]);
        assert!((c[0].k - 99.0).abs() < 1e-12 && (c[2].k + 101.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn power_is_invariant_under_carrier_relabeling(
            k in proptest::collection::vec(-30.0f64..30.0, 3),
            phase in 0.0f64..std::f64::consts::TAU,
            perm in 0usize..6,
        ) {
            let z = grid(8001, -4.0, 4.0);
            let order = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]][perm];
            let amp = C64::from_polar(1.0, phase);
            let comps = |ks: [f64; 3]| ks.iter().map(|&k| Component { amplitude: amp, k }).collect::<Vec<_>>();
            let a = interference_profile(&comps([k[0], k[1], k[2]]), |z| (-z * z).exp(), &z).unwrap();
            let b = interference_profile(&comps([k[order[0]], k[order[1]], k[order[2]]]), |z| (-z * z).exp(), &z).unwrap();
            let dz = z[1] - z[0];
            let (pa, pb) = (crate::dynamics::trapezoid(&a, dz), crate::dynamics::trapezoid(&b, dz));
            prop_assert!((pa - pb).abs() <= 1e-9 * pa.max(1.0));
        }
    }
}
