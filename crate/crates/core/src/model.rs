//! Domain types and the JSON configuration schema.
//!
//! Everything downstream of [`validate`] works in the scaled unit system:
//! time in units of `1/Gamma`, length in units of the medium length `L`.
//! Probe envelopes carry arbitrary amplitude units; only ratios and shapes
//! are physical.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ValidationErrors;
use crate::units::Scaling;

pub type C64 = Complex64;

/// Largest accepted `dt * optical_depth * Gamma` for the quasi-static scheme.
/// The frozen-field splitting loses stability somewhere above 20.
pub const QUASI_STATIC_DT_OD_LIMIT: f64 = 10.0;

/// Largest accepted `dt * Gamma`.
pub const MAX_DT_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Scaled,
    Si,
}

/// Atomic medium: level count, couplings, decay rates, atom number and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSystem {
    pub m: usize,
    pub g: Vec<f64>,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_ce: Option<f64>,
    pub n_atoms: f64,
    pub length: f64,
}

impl LevelSystem {
    pub fn channels(&self) -> usize {
        self.m.saturating_sub(2)
    }

    pub fn gamma_ce(&self) -> f64 {
        self.gamma_ce.unwrap_or(self.gamma)
    }

    /// Resonant optical depth of channel `s` without pumps, `g^2 N L / (c Gamma)`.
    pub fn optical_depth(&self, s: usize, c: f64) -> f64 {
        self.g[s] * self.g[s] * self.n_atoms * self.length / (c * self.gamma)
    }
}

/// Sign of the probe wave vector, `nu / k_p = d c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

impl TryFrom<i64> for Direction {
    type Error = String;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Direction::Forward),
            -1 => Ok(Direction::Backward),
            other => Err(format!("direction must be +1 or -1, got {other}")),
        }
    }
}

impl From<Direction> for i64 {
    fn from(d: Direction) -> i64 {
        match d {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

/// Which end of the medium a channel is injected from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Start,
    End,
}

impl From<Direction> for Side {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Forward => Side::Start,
            Direction::Backward => Side::End,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationGeometry {
    pub directions: Vec<Direction>,
    /// Carrier frequencies; only used by interference profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    /// Vacuum light speed in simulation units.
    pub c: f64,
    /// Pump wave vectors. Recorded, never used by the envelope equations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_wavevectors: Option<Vec<f64>>,
}

fn smooth_step(x: f64) -> f64 {
    0.5 * (1.0 + x.tanh())
}

/// Time profile of one pump Rabi frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PumpProfile {
    Constant { amplitude: f64 },
    TanhRamp { from: f64, to: f64, t_switch: f64, ramp_time: f64 },
    OffOn { amplitude: f64, t_on: f64, ramp_time: f64 },
    OnOffOn { amplitude: f64, t_off: f64, t_on: f64, ramp_time: f64 },
}

impl PumpProfile {
    pub fn at(&self, t: f64) -> f64 {
        let v = match *self {
            PumpProfile::Constant { amplitude } => amplitude,
            PumpProfile::TanhRamp { from, to, t_switch, ramp_time } => {
                from + (to - from) * smooth_step((t - t_switch) / ramp_time)
            }
            PumpProfile::OffOn { amplitude, t_on, ramp_time } => {
                amplitude * smooth_step((t - t_on) / ramp_time)
            }
            PumpProfile::OnOffOn { amplitude, t_off, t_on, ramp_time } => {
                amplitude
                    * (1.0 - smooth_step((t - t_off) / ramp_time)
                        + smooth_step((t - t_on) / ramp_time))
            }
        };
        v.max(0.0)
    }

    /// Amplitude reached after every switch has completed.
    pub fn final_amplitude(&self) -> f64 {
        match *self {
            PumpProfile::Constant { amplitude } => amplitude,
            PumpProfile::TanhRamp { to, .. } => to,
            PumpProfile::OffOn { amplitude, .. } => amplitude,
            PumpProfile::OnOffOn { amplitude, .. } => amplitude,
        }
    }

    pub fn set_final_amplitude(&mut self, value: f64) {
        match self {
            PumpProfile::Constant { amplitude } => *amplitude = value,
            PumpProfile::TanhRamp { to, .. } => *to = value,
            PumpProfile::OffOn { amplitude, .. } => *amplitude = value,
            PumpProfile::OnOffOn { amplitude, .. } => *amplitude = value,
        }
    }

    pub fn ramp_time(&self) -> Option<f64> {
        match *self {
            PumpProfile::Constant { .. } => None,
            PumpProfile::TanhRamp { ramp_time, .. }
            | PumpProfile::OffOn { ramp_time, .. }
            | PumpProfile::OnOffOn { ramp_time, .. } => Some(ramp_time),
        }
    }

    pub fn set_ramp_time(&mut self, value: f64) {
        match self {
            PumpProfile::Constant { .. } => {}
            PumpProfile::TanhRamp { ramp_time, .. }
            | PumpProfile::OffOn { ramp_time, .. }
            | PumpProfile::OnOffOn { ramp_time, .. } => *ramp_time = value,
        }
    }

    /// Replace any switching with the amplitude the profile settles to.
    pub fn held_constant(&self) -> PumpProfile {
        PumpProfile::Constant { amplitude: self.final_amplitude() }
    }

    fn amplitudes(&self) -> Vec<f64> {
        match *self {
            PumpProfile::Constant { amplitude } => vec![amplitude],
            PumpProfile::TanhRamp { from, to, .. } => vec![from, to],
            PumpProfile::OffOn { amplitude, .. } | PumpProfile::OnOffOn { amplitude, .. } => {
                vec![amplitude]
            }
        }
    }

    fn rescale(&mut self, s: &Scaling) {
        match self {
            PumpProfile::Constant { amplitude } => *amplitude = s.rate(*amplitude),
            PumpProfile::TanhRamp { from, to, t_switch, ramp_time } => {
                *from = s.rate(*from);
                *to = s.rate(*to);
                *t_switch = s.time(*t_switch);
                *ramp_time = s.time(*ramp_time);
            }
            PumpProfile::OffOn { amplitude, t_on, ramp_time } => {
                *amplitude = s.rate(*amplitude);
                *t_on = s.time(*t_on);
                *ramp_time = s.time(*ramp_time);
            }
            PumpProfile::OnOffOn { amplitude, t_off, t_on, ramp_time } => {
                *amplitude = s.rate(*amplitude);
                *t_off = s.time(*t_off);
                *t_on = s.time(*t_on);
                *ramp_time = s.time(*ramp_time);
            }
        }
    }
}

/// A complex envelope of one real variable (time at a boundary, or position).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Zero,
    /// `peak * exp(i phase) * exp(-((x - center) / width)^2)`
    Gaussian {
        peak: f64,
        #[serde(default)]
        phase: f64,
        center: f64,
        width: f64,
    },
}

impl Envelope {
    pub fn at(&self, x: f64) -> C64 {
        match *self {
            Envelope::Zero => C64::new(0.0, 0.0),
            Envelope::Gaussian { peak, phase, center, width } => {
                let u = (x - center) / width;
                C64::from_polar(peak * (-u * u).exp(), phase)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Envelope::Zero) || matches!(self, Envelope::Gaussian { peak, .. } if *peak == 0.0)
    }

    /// Multiply by a complex scalar.
    pub fn scaled(&self, factor: C64) -> Envelope {
        match *self {
            Envelope::Zero => Envelope::Zero,
            Envelope::Gaussian { peak, phase, center, width } => {
                let a = C64::from_polar(peak, phase) * factor;
                Envelope::Gaussian { peak: a.norm(), phase: a.arg(), center, width }
            }
        }
    }

    pub fn width(&self) -> Option<f64> {
        match *self {
            Envelope::Zero => None,
            Envelope::Gaussian { width, .. } => Some(width),
        }
    }

    fn rescale_axis(&mut self, f: impl Fn(f64) -> f64) {
        if let Envelope::Gaussian { center, width, .. } = self {
            *center = f(*center);
            *width = f(*width);
        }
    }
}

/// Initial in-medium content at `t = 0`. Defaults to the ground state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialState {
    /// Per-channel probe envelopes over z (characteristics scheme only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Envelope>>,
    /// Stored spin-wave profile over z.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_bc: Option<Envelope>,
}

/// Probe boundary envelopes (functions of time) plus optional initial content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeInput {
    pub boundary: Vec<Envelope>,
    #[serde(default)]
    pub initial: InitialState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    QuasiStatic,
    Characteristics,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quasi-static" | "quasi_static" => Ok(Scheme::QuasiStatic),
            "characteristics" => Ok(Scheme::Characteristics),
            _ => Err(format!("unknown scheme '{s}' (quasi-static | characteristics)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOptions {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub include_sigma_ce: bool,
    /// Use the summed coupling `i (sum_s g_s E_s) sigma_cb` in every
    /// `sigma_ce` equation instead of the per-channel term.
    #[serde(default)]
    pub literal_ce_sum: bool,
    /// Total pump amplitude below which a snapshot is flagged as storage.
    #[serde(default = "default_storage_tolerance")]
    pub storage_tolerance: f64,
}

fn default_storage_tolerance() -> f64 {
    1e-9
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Linear,
            include_sigma_ce: false,
            literal_ce_sum: false,
            storage_tolerance: default_storage_tolerance(),
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub nz: usize,
    pub dt: f64,
    pub t_max: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "one")]
    pub sample_stride: usize,
    #[serde(default)]
    pub options: SchemeOptions,
}

impl SimGrid {
    pub fn dz(&self, length: f64) -> f64 {
        length / (self.nz as f64 - 1.0)
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

fn default_true() -> bool {
    true
}

fn default_imbalance() -> f64 {
    0.1
}

fn default_spacing() -> f64 {
    0.01
}

fn default_levels() -> Vec<usize> {
    vec![3, 4, 5]
}

fn default_points_per_period() -> usize {
    32
}

/// Scenario selection plus its scenario-specific parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    /// Plain integration, no metrics beyond the excitation monitor.
    #[default]
    Raw,
    PulseMatching {
        #[serde(default = "default_true")]
        prematched_control: bool,
    },
    SlowLight,
    StorageRetrieval {
        /// Ramp time of the sudden-switch control run, if requested.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sudden_ramp_time: Option<f64>,
    },
    StationaryPulse {
        hold_start: f64,
        #[serde(default = "default_imbalance")]
        imbalance: f64,
    },
    BspAdiabaticity {
        ramp_times: Vec<f64>,
        /// Start of the window in which the peak BSP ratio is taken.
        window_start: f64,
    },
    Interference {
        #[serde(default = "default_levels")]
        levels: Vec<usize>,
        /// Wave number of the middle carrier, in inverse envelope units.
        carrier_k: f64,
        /// Carrier spacing as a fraction of the middle carrier.
        #[serde(default = "default_spacing")]
        spacing: f64,
        half_width: f64,
        #[serde(default = "default_points_per_period")]
        points_per_period: usize,
    },
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::Raw => "raw",
            ExperimentSpec::PulseMatching { .. } => "pulse_matching",
            ExperimentSpec::SlowLight => "slow_light",
            ExperimentSpec::StorageRetrieval { .. } => "storage_retrieval",
            ExperimentSpec::StationaryPulse { .. } => "stationary_pulse",
            ExperimentSpec::BspAdiabaticity { .. } => "bsp_adiabaticity",
            ExperimentSpec::Interference { .. } => "interference",
        }
    }

    fn rescale(&mut self, s: &Scaling) {
        match self {
            ExperimentSpec::StorageRetrieval { sudden_ramp_time: Some(t) } => *t = s.time(*t),
            ExperimentSpec::StationaryPulse { hold_start, .. } => *hold_start = s.time(*hold_start),
            ExperimentSpec::BspAdiabaticity { ramp_times, window_start } => {
                for t in ramp_times.iter_mut() {
                    *t = s.time(*t);
                }
                *window_start = s.time(*window_start);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Bin,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "bin" => Ok(Format::Bin),
            _ => Err(format!("unknown format '{s}' (csv | bin)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub write_trajectory: bool,
}

/// A complete run configuration as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    #[serde(default)]
    pub units: Units,
    pub system: LevelSystem,
    pub geometry: PropagationGeometry,
    pub pumps: Vec<PumpProfile>,
    pub probes: ProbeInput,
    pub grid: SimGrid,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Pump amplitudes at time `t`.
    pub fn pumps_at(&self, t: f64) -> Vec<f64> {
        self.pumps.iter().map(|p| p.at(t)).collect()
    }

    pub fn final_pumps(&self) -> Vec<f64> {
        self.pumps.iter().map(PumpProfile::final_amplitude).collect()
    }

    /// Apply a unit rescaling to every dimensional quantity.
    pub(crate) fn rescale(&mut self, s: &Scaling) {
        let sys = &mut self.system;
        sys.g.iter_mut().for_each(|g| *g = s.rate(*g));
        sys.gamma = s.rate(sys.gamma);
        sys.gamma_ce = sys.gamma_ce.map(|v| s.rate(v));
        sys.length = s.length(sys.length);
        let geo = &mut self.geometry;
        geo.c = s.velocity(geo.c);
        if let Some(nu) = geo.nu.as_mut() {
            nu.iter_mut().for_each(|v| *v = s.rate(*v));
        }
        if let Some(k) = geo.pump_wavevectors.as_mut() {
            k.iter_mut().for_each(|v| *v = s.wavenumber(*v));
        }
        self.pumps.iter_mut().for_each(|p| p.rescale(s));
        self.probes.boundary.iter_mut().for_each(|e| e.rescale_axis(|x| s.time(x)));
        if let Some(p) = self.probes.initial.probes.as_mut() {
            p.iter_mut().for_each(|e| e.rescale_axis(|x| s.length(x)));
        }
        if let Some(e) = self.probes.initial.sigma_bc.as_mut() {
            e.rescale_axis(|x| s.length(x));
        }
        self.grid.dt = s.time(self.grid.dt);
        self.grid.t_max = s.time(self.grid.t_max);
        self.grid.options.storage_tolerance = s.rate(self.grid.options.storage_tolerance);
        self.experiment.rescale(s);
    }
}

/// Total pump Rabi frequency `sqrt(sum Omega_s^2)`.
pub fn omega_total(omegas: &[f64]) -> f64 {
    omegas.iter().map(|o| o * o).sum::<f64>().sqrt()
}

/// Probe envelopes and atomic coherences on the z-grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    /// `(m-2) x Nz` probe envelopes.
    pub e: Array2<C64>,
    pub sigma_bc: Array1<C64>,
    pub sigma_be: Array2<C64>,
    pub sigma_ce: Array2<C64>,
}

impl FieldState {
    pub fn zeros(channels: usize, nz: usize) -> Self {
        Self {
            t: 0.0,
            e: Array2::zeros((channels, nz)),
            sigma_bc: Array1::zeros(nz),
            sigma_be: Array2::zeros((channels, nz)),
            sigma_ce: Array2::zeros((channels, nz)),
        }
    }

    pub fn nz(&self) -> usize {
        self.sigma_bc.len()
    }

    pub fn channels(&self) -> usize {
        self.e.nrows()
    }

    /// `sum_s |sigma_be_s|^2 + |sigma_bc|^2` at grid point `i`.
    pub fn excitation(&self, i: usize) -> f64 {
        self.sigma_be.column(i).iter().map(|v| v.norm_sqr()).sum::<f64>() + self.sigma_bc[i].norm_sqr()
    }

    pub fn max_excitation(&self) -> f64 {
        (0..self.nz()).map(|i| self.excitation(i)).fold(0.0, f64::max)
    }

    /// Position of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        let bad = |v: &C64| !(v.re.is_finite() && v.im.is_finite());
        (0..self.nz()).find(|&i| {
            bad(&self.sigma_bc[i])
                || self.e.column(i).iter().any(bad)
                || self.sigma_be.column(i).iter().any(bad)
                || self.sigma_ce.column(i).iter().any(bad)
        })
    }
}

/// A configuration that satisfies every invariant, in scaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidConfig {
    pub config: Config,
    pub dz: f64,
    pub injection: Vec<Side>,
}

impl ValidConfig {
    pub fn system(&self) -> &LevelSystem {
        &self.config.system
    }

    pub fn geometry(&self) -> &PropagationGeometry {
        &self.config.geometry
    }

    pub fn grid(&self) -> &SimGrid {
        &self.config.grid
    }

    pub fn channels(&self) -> usize {
        self.config.system.channels()
    }

    /// Grid coordinates in units of the medium length.
    pub fn z(&self) -> Vec<f64> {
        (0..self.config.grid.nz).map(|i| i as f64 * self.dz).collect()
    }

    /// Largest single-channel optical depth.
    pub fn max_optical_depth(&self) -> f64 {
        let sys = &self.config.system;
        (0..sys.channels())
            .map(|s| sys.optical_depth(s, self.config.geometry.c))
            .fold(0.0, f64::max)
    }
}

fn positive(errs: &mut ValidationErrors, path: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        errs.push(path, format!("must be finite and > 0, got {v}"));
    }
}

fn nonnegative(errs: &mut ValidationErrors, path: &str, v: f64) {
    if !(v.is_finite() && v >= 0.0) {
        errs.push(path, format!("must be finite and >= 0, got {v}"));
    }
}

fn check_len(errs: &mut ValidationErrors, path: &str, len: usize, want: usize) -> bool {
    if len != want {
        errs.push(path, format!("expected {want} entries (m-2), got {len}"));
        false
    } else {
        true
    }
}

fn check_envelope(errs: &mut ValidationErrors, path: &str, e: &Envelope) {
    if let Envelope::Gaussian { peak, phase, center, width } = *e {
        nonnegative(errs, &format!("{path}.peak"), peak);
        if !phase.is_finite() || !center.is_finite() {
            errs.push(path, "phase and center must be finite");
        }
        positive(errs, &format!("{path}.width"), width);
    }
}

/// Check every invariant, convert to scaled units and fill in derived values.
pub fn validate(raw: &Config) -> Result<ValidConfig, ValidationErrors> {
    let mut errs = ValidationErrors::default();
    let mut cfg = raw.clone();

    let sys = &cfg.system;
    if sys.m < 3 {
        errs.push("system.m", format!("m must be ≥ 3, got {}", sys.m));
        return Err(errs);
    }
    let ch = sys.channels();
    if check_len(&mut errs, "system.g", sys.g.len(), ch) {
        for (i, g) in sys.g.iter().enumerate() {
            positive(&mut errs, &format!("system.g[{i}]"), *g);
        }
    }
    positive(&mut errs, "system.gamma", sys.gamma);
    if let Some(v) = sys.gamma_ce {
        positive(&mut errs, "system.gamma_ce", v);
    }
    positive(&mut errs, "system.n_atoms", sys.n_atoms);
    positive(&mut errs, "system.length", sys.length);
    if !errs.is_empty() {
        return Err(errs);
    }

    if cfg.units == Units::Si {
        let s = Scaling::from_si(&cfg.system);
        cfg.rescale(&s);
        cfg.units = Units::Scaled;
    }

    let geo = &cfg.geometry;
    check_len(&mut errs, "geometry.directions", geo.directions.len(), ch);
    positive(&mut errs, "geometry.c", geo.c);
    if let Some(nu) = &geo.nu {
        if check_len(&mut errs, "geometry.nu", nu.len(), ch) {
            for (i, v) in nu.iter().enumerate() {
                positive(&mut errs, &format!("geometry.nu[{i}]"), *v);
            }
        }
    }
    if let Some(k) = &geo.pump_wavevectors {
        check_len(&mut errs, "geometry.pump_wavevectors", k.len(), ch);
    }

    if check_len(&mut errs, "pumps", cfg.pumps.len(), ch) {
        for (i, p) in cfg.pumps.iter().enumerate() {
            let path = format!("pumps[{i}]");
            for a in p.amplitudes() {
                nonnegative(&mut errs, &format!("{path}.amplitude"), a);
            }
            if let Some(r) = p.ramp_time() {
                positive(&mut errs, &format!("{path}.ramp_time"), r);
            }
            if let PumpProfile::OnOffOn { t_off, t_on, .. } = *p {
                if !(t_on > t_off) {
                    errs.push(&path, format!("t_on ({t_on}) must be after t_off ({t_off})"));
                }
            }
        }
        if cfg.pumps.iter().all(|p| p.amplitudes().iter().all(|a| *a == 0.0)) {
            errs.push("pumps", "all pumps are identically zero; storage is only legal as an interval");
        }
    }

    if check_len(&mut errs, "probes.boundary", cfg.probes.boundary.len(), ch) {
        for (i, e) in cfg.probes.boundary.iter().enumerate() {
            check_envelope(&mut errs, &format!("probes.boundary[{i}]"), e);
        }
    }
    if let Some(init) = &cfg.probes.initial.probes {
        if check_len(&mut errs, "probes.initial.probes", init.len(), ch) {
            for (i, e) in init.iter().enumerate() {
                check_envelope(&mut errs, &format!("probes.initial.probes[{i}]"), e);
            }
        }
        if cfg.grid.scheme == Scheme::QuasiStatic && init.iter().any(|e| !e.is_zero()) {
            errs.push(
                "probes.initial.probes",
                "initial probe content needs the characteristics scheme (quasi-static fields are slaved to the coherences)",
            );
        }
    }
    if let Some(e) = &cfg.probes.initial.sigma_bc {
        check_envelope(&mut errs, "probes.initial.sigma_bc", e);
    }

    let grid = &cfg.grid;
    if grid.nz < 16 {
        errs.push("grid.nz", format!("need at least 16 grid points, got {}", grid.nz));
    }
    positive(&mut errs, "grid.dt", grid.dt);
    positive(&mut errs, "grid.t_max", grid.t_max);
    if grid.sample_stride == 0 {
        errs.push("grid.sample_stride", "must be ≥ 1");
    }
    positive(&mut errs, "grid.options.storage_tolerance", grid.options.storage_tolerance);
    if grid.options.mode == Mode::Nonlinear && !grid.options.include_sigma_ce {
        errs.push("grid.options.include_sigma_ce", "nonlinear mode requires include_sigma_ce = true");
    }
    let gamma = cfg.system.gamma;
    if grid.dt * gamma > MAX_DT_GAMMA {
        errs.push(
            "grid.dt",
            format!("dt·Γ = {:.3} exceeds the stability limit {MAX_DT_GAMMA}", grid.dt * gamma),
        );
    }
    if !errs.is_empty() {
        return Err(errs);
    }

    let dz = grid.dz(cfg.system.length);
    match grid.scheme {
        Scheme::Characteristics => {
            let cdt = cfg.geometry.c * grid.dt;
            if ((dz - cdt) / dz).abs() > 1e-9 {
                errs.push(
                    "grid.dt",
                    format!("characteristics scheme requires the CFL-exact constraint dz = c·dt (dz = {dz}, c·dt = {cdt})"),
                );
            }
        }
        Scheme::QuasiStatic => {
            let od = (0..ch)
                .map(|s| cfg.system.optical_depth(s, cfg.geometry.c))
                .fold(0.0, f64::max);
            let x = grid.dt * od * gamma;
            if x > QUASI_STATIC_DT_OD_LIMIT {
                errs.push(
                    "grid.dt",
                    format!("quasi-static stability needs dt·OD·Γ ≤ {QUASI_STATIC_DT_OD_LIMIT}, got {x:.3} (OD = {od:.1})"),
                );
            }
        }
    }
    if let ExperimentSpec::StationaryPulse { imbalance, .. } = cfg.experiment {
        if !(0.0..1.0).contains(&imbalance) {
            errs.push("experiment.imbalance", "must lie in [0, 1)");
        }
    }
    if let ExperimentSpec::BspAdiabaticity { ramp_times, .. } = &cfg.experiment {
        if ramp_times.len() < 2 {
            errs.push("experiment.ramp_times", "need at least two ramp times");
        }
        for (i, t) in ramp_times.iter().enumerate() {
            positive(&mut errs, &format!("experiment.ramp_times[{i}]"), *t);
        }
    }
    if !errs.is_empty() {
        return Err(errs);
    }

    let injection = cfg.geometry.directions.iter().map(|d| Side::from(*d)).collect();
    Ok(ValidConfig { config: cfg, dz, injection })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn minimal() -> Config {
        Config {
            units: Units::Scaled,
            system: LevelSystem { m: 4, g: vec![1.0, 1.0], gamma: 1.0, gamma_ce: None, n_atoms: 1.0, length: 1.0 },
            geometry: PropagationGeometry {
                directions: vec![Direction::Forward, Direction::Forward],
                nu: None,
                c: 1.0,
                pump_wavevectors: None,
            },
            pumps: vec![PumpProfile::Constant { amplitude: 1.0 }; 2],
            probes: ProbeInput { boundary: vec![Envelope::Zero; 2], initial: InitialState::default() },
            grid: SimGrid {
                nz: 32,
                dt: 0.01,
                t_max: 1.0,
                scheme: Scheme::QuasiStatic,
                sample_stride: 10,
                options: SchemeOptions::default(),
            },
            experiment: ExperimentSpec::Raw,
            output: OutputSpec::default(),
        }
    }

    #[test]
    fn minimal_config_is_accepted() {
        let v = validate(&minimal()).unwrap();
        assert_eq!(v.injection, vec![Side::Start, Side::Start]);
        assert!((v.dz - 1.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_two_level_system() {
        let mut c = minimal();
        c.system.m = 2;
        let e = validate(&c).unwrap_err();
        assert!(e.mentions("m must be ≥ 3"));
    }

    #[test]
    fn reports_every_violation_with_path() {
        let mut c = minimal();
        c.system.g = vec![1.0, -1.0];
        c.system.gamma = 0.0;
        c.system.n_atoms = -3.0;
        let e = validate(&c).unwrap_err();
        assert!(e.mentions("system.g[1]"));
        assert!(e.mentions("system.gamma"));
        assert!(e.mentions("system.n_atoms"));
        assert_eq!(e.0.len(), 3);
    }

    #[test]
    fn rejects_large_time_step() {
        let mut c = minimal();
        c.grid.dt = 0.6;
        assert!(validate(&c).unwrap_err().mentions("stability"));
    }

    #[test]
    fn characteristics_needs_exact_cfl() {
        let mut c = minimal();
        c.grid.scheme = Scheme::Characteristics;
        c.grid.dt = 0.01;
        let e = validate(&c).unwrap_err();
        assert!(e.mentions("CFL-exact"));
        c.grid.dt = 1.0 / 31.0 / 1.0 * 0.5;
        c.geometry.c = 2.0;
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn quasi_static_optical_depth_bound() {
        let mut c = minimal();
        c.system.n_atoms = 5000.0;
        c.grid.dt = 0.01;
        assert!(validate(&c).unwrap_err().mentions("dt·OD·Γ"));
        c.grid.dt = 0.001;
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn nonlinear_requires_sigma_ce() {
        let mut c = minimal();
        c.grid.options.mode = Mode::Nonlinear;
        assert!(validate(&c).unwrap_err().mentions("include_sigma_ce"));
        c.grid.options.include_sigma_ce = true;
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn channel_count_mismatch() {
        let mut c = minimal();
        c.pumps.pop();
        c.probes.boundary.push(Envelope::Zero);
        let e = validate(&c).unwrap_err();
        assert!(e.mentions("pumps"));
        assert!(e.mentions("probes.boundary"));
    }

    #[test]
    fn all_pumps_zero_rejected() {
        let mut c = minimal();
        c.pumps = vec![PumpProfile::Constant { amplitude: 0.0 }; 2];
        assert!(validate(&c).unwrap_err().mentions("identically zero"));
    }

    #[test]
    fn validate_is_idempotent() {
        let v1 = validate(&minimal()).unwrap();
        let v2 = validate(&v1.config).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn omega_total_examples() {
        assert_eq!(omega_total(&[3.0, 4.0]), 5.0);
        assert_eq!(omega_total(&[2.5, 0.0, 0.0]), 2.5);
        assert!((omega_total(&[1.0, 1.0, 1.0]) - 1.7320508075688772).abs() < 1e-15);
    }

    #[test]
    fn pump_profiles_are_continuous_and_nonnegative() {
        let p = PumpProfile::OnOffOn { amplitude: 2.0, t_off: 25.0, t_on: 75.0, ramp_time: 1.0 };
        // tanh saturates to exactly +-1 in double precision beyond |x| ~ 19
        assert_eq!(p.at(0.0), 2.0);
        assert_eq!(p.at(50.0), 0.0);
        assert_eq!(p.at(100.0), 2.0);
        let mut t = 0.0;
        let mut prev = p.at(0.0);
        while t < 100.0 {
            t += 0.01;
            let v = p.at(t);
            assert!(v >= 0.0);
            assert!((v - prev).abs() < 0.02);
            prev = v;
        }
        let r = PumpProfile::TanhRamp { from: 1.0, to: 3.0, t_switch: 5.0, ramp_time: 0.5 };
        assert!((r.at(5.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn directions_parse_from_signs() {
        let d: Vec<Direction> = serde_json::from_str("[1, -1]").unwrap();
        assert_eq!(d, vec![Direction::Forward, Direction::Backward]);
        assert!(serde_json::from_str::<Vec<Direction>>("[0]").is_err());
    }
}
