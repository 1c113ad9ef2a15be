//! Mixing angles, the dark/bright polariton basis, normal fields, decay
//! rates, group velocity and the zero-velocity pump condition.
//!
//! Most closed forms are evaluated through the ratios `x_s = Omega_s / g_s`,
//! which turns every angle into a spherical coordinate of the vector `x` and
//! keeps products of many couplings out of the arithmetic. Pair indices `j`
//! are zero-based: pair `j` couples channels `j` and `j + 1`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::PolaritonError;
use crate::model::{omega_total, FieldState, LevelSystem, PropagationGeometry, C64};

type Result<T> = std::result::Result<T, PolaritonError>;

fn ratios(sys: &LevelSystem, omegas: &[f64]) -> Vec<f64> {
    omegas.iter().zip(&sys.g).map(|(o, g)| o / g).collect()
}

fn check_dims(sys: &LevelSystem, omegas: &[f64]) -> Result<()> {
    if omegas.len() != sys.channels() || sys.g.len() != sys.channels() {
        return Err(PolaritonError::Argument(format!(
            "expected {} pump amplitudes and couplings, got {} and {}",
            sys.channels(),
            omegas.len(),
            sys.g.len()
        )));
    }
    Ok(())
}

/// `tan theta = prod(g) sqrt(N) / sqrt(sum_j Omega_j^2 prod_{l != j} g_l^2)`.
pub fn mixing_theta(sys: &LevelSystem, omegas: &[f64]) -> Result<f64> {
    check_dims(sys, omegas)?;
    if omega_total(omegas) == 0.0 {
        return Err(PolaritonError::Storage);
    }
    let den = ratios(sys, omegas).iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(sys.n_atoms.sqrt().atan2(den))
}

/// The `m - 3` angles `phi_j`.
pub fn mixing_phi(sys: &LevelSystem, omegas: &[f64]) -> Result<Vec<f64>> {
    check_dims(sys, omegas)?;
    let x = ratios(sys, omegas);
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(x.len().saturating_sub(1));
    for j in 0..x.len().saturating_sub(1) {
        acc += x[j] * x[j];
        if acc == 0.0 {
            return Err(PolaritonError::Undefined(format!("phi_{}", j + 1)));
        }
        out.push(x[j + 1].atan2(acc.sqrt()));
    }
    Ok(out)
}

/// `tan phi_{j,j+1} = g_j Omega_{j+1} / (g_{j+1} Omega_j)`.
pub fn pair_angle(j: usize, sys: &LevelSystem, omegas: &[f64]) -> Result<f64> {
    check_dims(sys, omegas)?;
    if j + 1 >= sys.channels() {
        return Err(PolaritonError::Argument(format!("pair index {j} out of range")));
    }
    let num = sys.g[j] * omegas[j + 1];
    let den = sys.g[j + 1] * omegas[j];
    if num == 0.0 && den == 0.0 {
        return Err(PolaritonError::Undefined(format!("phi_{{{},{}}}", j + 1, j + 2)));
    }
    Ok(num.atan2(den))
}

/// `cos alpha_sigma` for the first `sigma + 1` channels (zero-based `sigma`).
pub fn cos_alpha(sys: &LevelSystem, geom: &PropagationGeometry, omegas: &[f64], sigma: usize) -> Result<f64> {
    check_dims(sys, omegas)?;
    if sigma >= sys.channels() {
        return Err(PolaritonError::Argument(format!("channel index {sigma} out of range")));
    }
    let x = ratios(sys, omegas);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..=sigma {
        let w = x[j] * x[j];
        num += geom.directions[j].sign() * w;
        den += w;
    }
    if den == 0.0 {
        return Err(PolaritonError::Storage);
    }
    Ok(num / den)
}

/// Group velocity of the dark-state polariton, flagged during storage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupVelocity {
    pub value: f64,
    pub storage: bool,
}

/// `V_g = c cos^2(theta) cos(alpha_{m-2})`; zero by convention during storage.
pub fn group_velocity(sys: &LevelSystem, geom: &PropagationGeometry, omegas: &[f64]) -> Result<GroupVelocity> {
    match mixing_theta(sys, omegas) {
        Ok(theta) => {
            let ca = cos_alpha(sys, geom, omegas, sys.channels() - 1)?;
            Ok(GroupVelocity { value: geom.c * theta.cos().powi(2) * ca, storage: false })
        }
        Err(PolaritonError::Storage) => Ok(GroupVelocity { value: 0.0, storage: true }),
        Err(e) => Err(e),
    }
}

/// Pump amplitude of the last (backward) channel that stops the polariton:
/// `Omega_{m-2}^2 = g_{m-2}^2 sum_j Omega_j^2 / g_j^2`.
pub fn stationarity_pump(sys: &LevelSystem, forward: &[f64]) -> Result<f64> {
    let ch = sys.channels();
    if forward.len() + 1 != ch {
        return Err(PolaritonError::Argument(format!("expected {} forward pumps, got {}", ch - 1, forward.len())));
    }
    let s: f64 = forward.iter().zip(&sys.g).map(|(o, g)| (o / g).powi(2)).sum();
    if s == 0.0 {
        return Err(PolaritonError::Degenerate("all forward pumps are zero; the stationarity pump is 0".into()));
    }
    Ok(sys.g[ch - 1] * s.sqrt())
}

/// The stationarity condition exactly as it is usually printed,
/// `sum_j g_{m-2}^2 Omega_j^2 / g_j^2`. It is not dimensionally an amplitude
/// and only agrees with [`stationarity_pump`] when that sum equals 1 or 0.
pub fn stationarity_pump_printed(sys: &LevelSystem, forward: &[f64]) -> f64 {
    let gl = sys.g[sys.channels() - 1];
    forward.iter().zip(&sys.g).map(|(o, g)| gl * gl / (g * g) * o * o).sum()
}

/// `tan^2 beta_j` for pair `j`.
fn tan2_beta(j: usize, sys: &LevelSystem, omegas: &[f64]) -> Result<f64> {
    check_dims(sys, omegas)?;
    if j + 1 >= sys.channels() {
        return Err(PolaritonError::Argument(format!("pair index {j} out of range")));
    }
    let o0 = omega_total(omegas);
    if o0 == 0.0 {
        return Err(PolaritonError::Storage);
    }
    let (gj, gk) = (sys.g[j], sys.g[j + 1]);
    let (oj, ok) = (omegas[j], omegas[j + 1]);
    let mix = gj * gj * ok * ok + gk * gk * oj * oj;
    if mix == 0.0 {
        return Err(PolaritonError::Undefined(format!("beta_{}", j + 1)));
    }
    Ok(sys.n_atoms * oj * oj * ok * ok * (gj * gj - gk * gk).powi(2) / (mix * o0.powi(4)))
}

pub fn beta_angle(j: usize, sys: &LevelSystem, omegas: &[f64]) -> Result<f64> {
    Ok(tan2_beta(j, sys, omegas)?.sqrt().atan())
}

/// Absorption rate of the normal field `G_{j,j+1}`.
pub fn g_decay_rate(j: usize, sys: &LevelSystem, omegas: &[f64]) -> Result<f64> {
    let cos2_beta = 1.0 / (1.0 + tan2_beta(j, sys, omegas)?);
    let (gj, gk) = (sys.g[j], sys.g[j + 1]);
    let (oj, ok) = (omegas[j], omegas[j + 1]);
    let o0_sq = omegas.iter().map(|o| o * o).sum::<f64>();
    Ok((gj * gj * ok * ok + gk * gk * oj * oj) * sys.n_atoms * cos2_beta / (sys.gamma * o0_sq))
}

/// `tau = sqrt(sum_j 1/g_j^2) / (sqrt(N) T)`.
pub fn adiabatic_tau(sys: &LevelSystem, t_char: f64) -> f64 {
    let s: f64 = sys.g.iter().map(|g| 1.0 / (g * g)).sum();
    s.sqrt() / (sys.n_atoms.sqrt() * t_char)
}

/// All angles of one pump configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingAngles {
    pub theta: f64,
    pub phi: Vec<f64>,
    pub phi_pair: Vec<f64>,
    pub beta: Vec<f64>,
    pub cos_alpha: Vec<f64>,
}

impl MixingAngles {
    pub fn compute(sys: &LevelSystem, geom: &PropagationGeometry, omegas: &[f64]) -> Result<Self> {
        let theta = mixing_theta(sys, omegas)?;
        let phi = mixing_phi(sys, omegas)?;
        let pairs = sys.channels() - 1;
        let phi_pair = (0..pairs).map(|j| pair_angle(j, sys, omegas)).collect::<Result<Vec<_>>>()?;
        let beta = (0..pairs).map(|j| beta_angle(j, sys, omegas)).collect::<Result<Vec<_>>>()?;
        let cos_alpha = (0..sys.channels()).map(|s| cos_alpha(sys, geom, omegas, s)).collect::<Result<Vec<_>>>()?;
        Ok(Self { theta, phi, phi_pair, beta, cos_alpha })
    }

    /// Angles that only fix the basis (`theta`, `phi_j`, `phi_{j,j+1}`).
    pub fn from_parts(theta: f64, phi: Vec<f64>, phi_pair: Vec<f64>) -> Self {
        let n = phi_pair.len();
        Self { theta, phi, phi_pair, beta: vec![0.0; n], cos_alpha: vec![] }
    }

    pub fn channels(&self) -> usize {
        self.phi.len() + 1
    }
}

/// Unit photonic direction of the dark state: `u_1 = prod cos phi_j`,
/// `u_l = sin phi_{l-1} prod_{j >= l} cos phi_j`.
pub fn photonic_weights(phi: &[f64]) -> Vec<f64> {
    (0..=phi.len())
        .map(|l| {
            let lead = if l == 0 { 1.0 } else { phi[l - 1].sin() };
            lead * phi[l..].iter().map(|p| p.cos()).product::<f64>()
        })
        .collect()
}

/// Orthogonal change of basis from `(E_1..E_{m-2}, sqrt(N) sigma_bc)` to
/// `(Psi, Phi, s_1..s_{m-3})`; rows are the new fields.
pub fn basis_matrix(angles: &MixingAngles) -> Array2<f64> {
    let ch = angles.channels();
    let n = ch + 1;
    let (st, ct) = angles.theta.sin_cos();
    let u = photonic_weights(&angles.phi);
    let mut m = Array2::<f64>::zeros((n, n));
    for l in 0..ch {
        m[[0, l]] = ct * u[l];
        m[[1, l]] = st * u[l];
    }
    m[[0, ch]] = -st;
    m[[1, ch]] = ct;
    for k in 0..ch - 1 {
        let row = 2 + k;
        let (sk, ck) = angles.phi[k].sin_cos();
        // -sin(phi_k) times the unit vector spanned by the first k+1 channels.
        let head = photonic_weights(&angles.phi[..k]);
        for (l, h) in head.iter().enumerate() {
            m[[row, l]] = -sk * h;
        }
        m[[row, k + 1]] = ck;
    }
    reorthonormalize(&mut m, 1e-13);
    m
}

/// Gram-Schmidt over the rows, in order. Rows already orthonormal to `tol`
/// are left untouched.
fn reorthonormalize(m: &mut Array2<f64>, tol: f64) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let d: f64 = (0..n).map(|c| m[[i, c]] * m[[j, c]]).sum();
            if d.abs() > tol {
                for c in 0..n {
                    m[[i, c]] -= d * m[[j, c]];
                }
            }
        }
        let norm: f64 = (0..n).map(|c| m[[i, c]].powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol {
            for c in 0..n {
                m[[i, c]] /= norm;
            }
        }
    }
}

/// Fields of one snapshot in the polariton basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PolaritonView {
    pub psi: Array1<C64>,
    pub phi: Array1<C64>,
    /// Orthonormal photonic combinations, one row per `k`.
    pub s_hat: Array2<C64>,
    /// Normal fields `G_{j,j+1}`, one row per pair.
    pub g: Array2<C64>,
    /// Companion fields `E_{j,j+1}`, one row per pair.
    pub e_pair: Array2<C64>,
}

/// Apply [`basis_matrix`] at every grid point and build the normal fields.
pub fn to_polaritons(state: &FieldState, angles: &MixingAngles, n_atoms: f64) -> PolaritonView {
    let ch = state.e.nrows();
    let nz = state.e.ncols();
    let m = basis_matrix(angles);
    let sqrt_n = n_atoms.sqrt();
    let mut psi = Array1::zeros(nz);
    let mut phi = Array1::zeros(nz);
    let mut s_hat = Array2::zeros((ch - 1, nz));
    let mut g = Array2::zeros((ch - 1, nz));
    let mut e_pair = Array2::zeros((ch - 1, nz));
    let mut x = vec![C64::new(0.0, 0.0); ch + 1];
    for i in 0..nz {
        for s in 0..ch {
            x[s] = state.e[[s, i]];
        }
        x[ch] = state.sigma_bc[i] * sqrt_n;
        let row = |r: usize| -> C64 { (0..=ch).map(|c| x[c] * m[[r, c]]).sum() };
        psi[i] = row(0);
        phi[i] = row(1);
        for k in 0..ch - 1 {
            s_hat[[k, i]] = row(2 + k);
            let (sp, cp) = angles.phi_pair[k].sin_cos();
            g[[k, i]] = -sp * x[k] + cp * x[k + 1];
            e_pair[[k, i]] = cp * x[k] + sp * x[k + 1];
        }
    }
    PolaritonView { psi, phi, s_hat, g, e_pair }
}

/// Inverse of [`to_polaritons`]: returns `(E, sigma_bc)`.
pub fn from_polaritons(view: &PolaritonView, angles: &MixingAngles, n_atoms: f64) -> (Array2<C64>, Array1<C64>) {
    let ch = angles.channels();
    let nz = view.psi.len();
    let m = basis_matrix(angles);
    let sqrt_n = n_atoms.sqrt();
    let mut e = Array2::zeros((ch, nz));
    let mut sbc = Array1::zeros(nz);
    let mut y = vec![C64::new(0.0, 0.0); ch + 1];
    for i in 0..nz {
        y[0] = view.psi[i];
        y[1] = view.phi[i];
        for k in 0..ch - 1 {
            y[2 + k] = view.s_hat[[k, i]];
        }
        for c in 0..=ch {
            let v: C64 = (0..=ch).map(|r| y[r] * m[[r, c]]).sum();
            if c < ch {
                e[[c, i]] = v;
            } else {
                sbc[i] = v / sqrt_n;
            }
        }
    }
    (e, sbc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorMode {
    Linear,
    WithNonlinear,
    WithTimeDerivative,
}

/// First-order adiabatic estimate of `sigma_bc` from the probe fields.
/// `de_dt` is required for [`PredictorMode::WithTimeDerivative`].
pub fn adiabatic_sigma_bc(
    e: &Array2<C64>,
    sys: &LevelSystem,
    omegas: &[f64],
    mode: PredictorMode,
    de_dt: Option<&Array2<C64>>,
) -> Result<Array1<C64>> {
    check_dims(sys, omegas)?;
    let o2 = omegas.iter().map(|o| o * o).sum::<f64>();
    if o2 == 0.0 {
        return Err(PolaritonError::Storage);
    }
    let o4 = o2 * o2;
    let ch = sys.channels();
    let nz = e.ncols();
    let w: Vec<f64> = (0..ch).map(|s| sys.g[s] * omegas[s]).collect();
    let mut out = Array1::zeros(nz);
    for i in 0..nz {
        let lin: C64 = (0..ch).map(|s| e[[s, i]] * w[s]).sum();
        let mut v = -lin / o2;
        match mode {
            PredictorMode::Linear => {}
            PredictorMode::WithNonlinear => {
                let a: C64 = (0..ch).map(|j| e[[j, i]].conj() * sys.g[j]).sum();
                let b: C64 = (0..ch).map(|k| e[[k, i]] * sys.g[k]).sum();
                v -= a * b * lin / o4;
            }
            PredictorMode::WithTimeDerivative => {
                let d = de_dt.ok_or_else(|| PolaritonError::Argument("time derivative required".into()))?;
                let dt_term: C64 = (0..ch).map(|s| d[[s, i]] * w[s]).sum();
                v += dt_term * sys.gamma / o4;
            }
        }
        out[i] = v;
    }
    Ok(out)
}
