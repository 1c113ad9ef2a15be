//! Time integration of the probe propagation equations coupled to the
//! mean-field atomic equations.
//!
//! Each step is Lie-split: the probe fields are updated first, then the
//! coherences are advanced by one RK4 step with the probe field frozen.
//! Two field solvers are available:
//!
//! * quasi-static: `d_s c dE_s/dz = i g_s N sigma_be_s`, the time derivative of
//!   the field is dropped and `E` is rebuilt from the coherences by cumulative
//!   trapezoidal quadrature from the injection side;
//! * characteristics: the full `(dt + d_s c dz) E_s = i g_s N sigma_be_s`,
//!   advected exactly one cell per step (`dz = c dt`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::Error;
use crate::model::{
    omega_total, Direction, FieldState, LevelSystem, Mode, PropagationGeometry, Scheme, ValidConfig, C64,
};
pub use crate::model::SchemeOptions;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Excitation fraction above which a run is aborted.
pub const EXCITATION_ABORT: f64 = 1.0;
/// Excitation fraction above which a run carries a low-excitation warning.
pub const EXCITATION_WARN: f64 = 0.1;

/// Pump amplitudes at the three RK4 stage times `t`, `t + dt/2`, `t + dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePumps {
    pub start: Vec<f64>,
    pub mid: Vec<f64>,
    pub end: Vec<f64>,
}

impl StagePumps {
    pub fn constant(omegas: &[f64]) -> Self {
        Self { start: omegas.to_vec(), mid: omegas.to_vec(), end: omegas.to_vec() }
    }

    fn at(cfg: &crate::model::Config, t: f64, dt: f64) -> Self {
        Self { start: cfg.pumps_at(t), mid: cfg.pumps_at(t + 0.5 * dt), end: cfg.pumps_at(t + dt) }
    }
}

struct AtomParams<'a> {
    ch: usize,
    g: &'a [f64],
    gamma: f64,
    gamma_ce: f64,
    nonlinear: bool,
    with_ce: bool,
    literal_sum: bool,
}

impl<'a> AtomParams<'a> {
    fn new(sys: &'a LevelSystem, opts: &SchemeOptions) -> Self {
        Self {
            ch: sys.channels(),
            g: &sys.g,
            gamma: sys.gamma,
            gamma_ce: sys.gamma_ce(),
            nonlinear: opts.mode == Mode::Nonlinear,
            with_ce: opts.include_sigma_ce || opts.mode == Mode::Nonlinear,
            literal_sum: opts.literal_ce_sum,
        }
    }

    fn nvar(&self) -> usize {
        if self.with_ce {
            2 * self.ch + 1
        } else {
            self.ch + 1
        }
    }

    /// Layout of `y`: `[sigma_be_1..ch, sigma_bc, sigma_ce_1..ch]`.
    fn rhs(&self, y: &[C64], e: &[C64], om: &[f64], dy: &mut [C64]) {
        let ch = self.ch;
        let sbc = y[ch];
        let mut d_bc = C64::new(0.0, 0.0);
        for s in 0..ch {
            dy[s] = -self.gamma * y[s] + I * (self.g[s] * e[s] + om[s] * sbc);
            d_bc += I * om[s] * y[s];
        }
        if self.nonlinear {
            for s in 0..ch {
                d_bc -= I * self.g[s] * e[s] * y[ch + 1 + s].conj();
            }
        }
        dy[ch] = d_bc;
        if self.with_ce {
            let scb = sbc.conj();
            let summed: C64 = (0..ch).map(|s| self.g[s] * e[s]).sum();
            for s in 0..ch {
                let drive = if self.literal_sum { summed } else { self.g[s] * e[s] };
                dy[ch + 1 + s] = -self.gamma_ce * y[ch + 1 + s] + I * drive * scb;
            }
        }
    }
}

/// Advance the coherences of `state` by one RK4 step with the probe field
/// held at `drive`. Returns the first grid index holding a non-finite value.
fn advance_atoms(
    state: &mut FieldState,
    drive: &Array2<C64>,
    pumps: &StagePumps,
    sys: &LevelSystem,
    opts: &SchemeOptions,
    dt: f64,
) -> Result<(), usize> {
    let p = AtomParams::new(sys, opts);
    let (ch, n) = (p.ch, p.nvar());
    let zero = C64::new(0.0, 0.0);
    let mut y = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut k = [vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]];
    let mut e = vec![zero; ch];
    for i in 0..state.nz() {
        for s in 0..ch {
            y[s] = state.sigma_be[[s, i]];
            e[s] = drive[[s, i]];
            if p.with_ce {
                y[ch + 1 + s] = state.sigma_ce[[s, i]];
            }
        }
        y[ch] = state.sigma_bc[i];

        p.rhs(&y, &e, &pumps.start, &mut k[0]);
        for v in 0..n {
            tmp[v] = y[v] + 0.5 * dt * k[0][v];
        }
        p.rhs(&tmp, &e, &pumps.mid, &mut k[1]);
        for v in 0..n {
            tmp[v] = y[v] + 0.5 * dt * k[1][v];
        }
        p.rhs(&tmp, &e, &pumps.mid, &mut k[2]);
        for v in 0..n {
            tmp[v] = y[v] + dt * k[2][v];
        }
        p.rhs(&tmp, &e, &pumps.end, &mut k[3]);
        for v in 0..n {
            y[v] += dt / 6.0 * (k[0][v] + 2.0 * k[1][v] + 2.0 * k[2][v] + k[3][v]);
        }

        if y.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(i);
        }
        for s in 0..ch {
            state.sigma_be[[s, i]] = y[s];
            if p.with_ce {
                state.sigma_ce[[s, i]] = y[ch + 1 + s];
            }
        }
        state.sigma_bc[i] = y[ch];
    }
    state.t += dt;
    Ok(())
}

/// One RK4 step of the atomic equations with the probe envelopes in
/// `state.e` held fixed over the step.
pub fn step_atoms(
    state: &mut FieldState,
    pumps: &StagePumps,
    sys: &LevelSystem,
    opts: &SchemeOptions,
    dt: f64,
) -> Result<(), Error> {
    let drive = state.e.clone();
    advance_atoms(state, &drive, pumps, sys, opts, dt)
        .map_err(|index| Error::Numerical { step: 0, index, what: "non-finite coherence".into() })
}

/// Rebuild every probe envelope from the current `sigma_be` and the
/// boundary values at the injection side.
pub fn step_fields_quasistatic(
    e: &mut Array2<C64>,
    sigma_be: &Array2<C64>,
    sys: &LevelSystem,
    geom: &PropagationGeometry,
    boundary: &[C64],
    dz: f64,
) {
    let nz = e.ncols();
    for s in 0..sys.channels() {
        let half = I * sys.g[s] * sys.n_atoms / geom.c * (0.5 * dz);
        match geom.directions[s] {
            Direction::Forward => {
                e[[s, 0]] = boundary[s];
                for k in 1..nz {
                    e[[s, k]] = e[[s, k - 1]] + half * (sigma_be[[s, k - 1]] + sigma_be[[s, k]]);
                }
            }
            Direction::Backward => {
                e[[s, nz - 1]] = boundary[s];
                for k in (0..nz - 1).rev() {
                    e[[s, k]] = e[[s, k + 1]] + half * (sigma_be[[s, k]] + sigma_be[[s, k + 1]]);
                }
            }
        }
    }
}

/// Shift every envelope one cell along its direction and add the
/// polarization source accumulated along the characteristic. `boundary`
/// holds the injected values at the new time level.
pub fn step_fields_characteristics(
    e: &mut Array2<C64>,
    sigma_be: &Array2<C64>,
    sys: &LevelSystem,
    geom: &PropagationGeometry,
    boundary: &[C64],
    dt: f64,
) {
    let nz = e.ncols();
    for s in 0..sys.channels() {
        let half = I * sys.g[s] * sys.n_atoms * (0.5 * dt);
        match geom.directions[s] {
            Direction::Forward => {
                for k in (1..nz).rev() {
                    e[[s, k]] = e[[s, k - 1]] + half * (sigma_be[[s, k - 1]] + sigma_be[[s, k]]);
                }
                e[[s, 0]] = boundary[s];
            }
            Direction::Backward => {
                for k in 0..nz - 1 {
                    e[[s, k]] = e[[s, k + 1]] + half * (sigma_be[[s, k]] + sigma_be[[s, k + 1]]);
                }
                e[[s, nz - 1]] = boundary[s];
            }
        }
    }
}

/// One recorded instant of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: FieldState,
    pub pumps: Vec<f64>,
    /// All pumps below the storage tolerance; mixing angles are undefined.
    pub storage: bool,
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        self.state.t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub scheme: Scheme,
    pub steps: usize,
    pub dt: f64,
    pub dz: f64,
    pub nz: usize,
    pub sample_stride: usize,
    pub max_excitation: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub meta: RunMeta,
    pub z: Vec<f64>,
    pub directions: Vec<Direction>,
    /// Wall-clock seconds; kept out of every deterministic artifact.
    pub wall_time: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Snapshot::t).collect()
    }

    /// Field of channel `s` at its exit boundary, one value per snapshot.
    pub fn exit_field(&self, s: usize) -> Vec<C64> {
        let nz = self.z.len();
        let idx = match self.directions[s] {
            Direction::Forward => nz - 1,
            Direction::Backward => 0,
        };
        self.snapshots.iter().map(|sn| sn.state.e[[s, idx]]).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
}

/// A run that stopped early; `partial` ends at the last good snapshot.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = self.partial.snapshots.last().map(|s| s.t());
        write!(f, "{} (last good snapshot at t = {:?})", self.error, t)
    }
}

impl std::error::Error for RunFailure {}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

fn boundary_values(cfg: &crate::model::Config, t: f64) -> Vec<C64> {
    cfg.probes.boundary.iter().map(|b| b.at(t)).collect()
}

/// Ground state plus any configured in-medium seeds.
pub fn initial_state(v: &ValidConfig) -> FieldState {
    let cfg = &v.config;
    let ch = v.channels();
    let z = v.z();
    let mut st = FieldState::zeros(ch, z.len());
    if let Some(env) = &cfg.probes.initial.sigma_bc {
        for (i, zi) in z.iter().enumerate() {
            st.sigma_bc[i] = env.at(*zi);
        }
    }
    if let Some(seeds) = &cfg.probes.initial.probes {
        for (s, env) in seeds.iter().enumerate() {
            for (i, zi) in z.iter().enumerate() {
                st.e[[s, i]] = env.at(*zi);
            }
        }
    }
    st
}

/// Integrate a validated configuration from the ground state to `t_max`.
pub fn run(v: &ValidConfig) -> Result<Trajectory, RunFailure> {
    let started = Instant::now();
    let cfg = &v.config;
    let sys = &cfg.system;
    let geom = &cfg.geometry;
    let grid = &cfg.grid;
    let opts = &grid.options;
    let (dt, dz) = (grid.dt, v.dz);
    let steps = grid.steps();
    let nz = grid.nz;

    let mut state = initial_state(v);
    if grid.scheme == Scheme::Characteristics {
        let b = boundary_values(cfg, 0.0);
        for s in 0..v.channels() {
            let idx = if geom.directions[s] == Direction::Forward { 0 } else { nz - 1 };
            state.e[[s, idx]] = b[s];
        }
    }

    let mut traj = Trajectory {
        snapshots: Vec::with_capacity(steps / grid.sample_stride + 1),
        meta: RunMeta {
            scheme: grid.scheme,
            steps,
            dt,
            dz,
            nz,
            sample_stride: grid.sample_stride,
            max_excitation: 0.0,
            warnings: Vec::new(),
        },
        z: v.z(),
        directions: geom.directions.clone(),
        wall_time: 0.0,
    };
    let fail = |mut traj: Trajectory, error: Error, started: Instant| {
        traj.wall_time = started.elapsed().as_secs_f64();
        Err(RunFailure { error, partial: traj })
    };

    for n in 0..=steps {
        let t = n as f64 * dt;
        state.t = t;
        if grid.scheme == Scheme::QuasiStatic {
            step_fields_quasistatic(&mut state.e, &state.sigma_be, sys, geom, &boundary_values(cfg, t), dz);
        }
        if let Some(index) = state.first_non_finite() {
            return fail(traj, Error::Numerical { step: n, index, what: "non-finite value".into() }, started);
        }
        let exc = state.max_excitation();
        if exc > EXCITATION_ABORT {
            let index = (0..nz).find(|&i| state.excitation(i) > EXCITATION_ABORT).unwrap_or(0);
            let what = format!("excitation fraction {exc:.3} exceeds 1 (low-excitation model invalid)");
            return fail(traj, Error::Numerical { step: n, index, what }, started);
        }
        if exc > traj.meta.max_excitation {
            if exc > EXCITATION_WARN && traj.meta.max_excitation <= EXCITATION_WARN {
                traj.meta.warnings.push(format!("excitation fraction {exc:.3} above {EXCITATION_WARN} at t = {t}"));
            }
            traj.meta.max_excitation = exc;
        }
        if n % grid.sample_stride == 0 {
            let pumps = cfg.pumps_at(t);
            let storage = omega_total(&pumps) <= opts.storage_tolerance;
            traj.snapshots.push(Snapshot { state: state.clone(), pumps, storage });
        }
        if n == steps {
            break;
        }

        let pumps = StagePumps::at(cfg, t, dt);
        let res = match grid.scheme {
            Scheme::QuasiStatic => {
                let drive = state.e.clone();
                advance_atoms(&mut state, &drive, &pumps, sys, opts, dt)
            }
            Scheme::Characteristics => {
                let old = state.e.clone();
                step_fields_characteristics(&mut state.e, &state.sigma_be, sys, geom, &boundary_values(cfg, t + dt), dt);
                // The atoms see the field averaged over the step.
                let drive = (&old + &state.e) * C64::new(0.5, 0.0);
                advance_atoms(&mut state, &drive, &pumps, sys, opts, dt)
            }
        };
        if let Err(index) = res {
            return fail(traj, Error::Numerical { step: n, index, what: "non-finite coherence".into() }, started);
        }
    }
    traj.wall_time = started.elapsed().as_secs_f64();
    Ok(traj)
}

fn snapshot_columns(traj: &Trajectory, snap: &Snapshot) -> (Vec<String>, Vec<Vec<f64>>) {
    let ch = snap.state.channels();
    let mut names = vec!["z".to_string()];
    let mut cols = vec![traj.z.clone()];
    for s in 0..ch {
        names.push(format!("re_e{}", s + 1));
        names.push(format!("im_e{}", s + 1));
        cols.push(snap.state.e.row(s).iter().map(|v| v.re).collect());
        cols.push(snap.state.e.row(s).iter().map(|v| v.im).collect());
    }
    names.push("re_sigma_bc".into());
    names.push("im_sigma_bc".into());
    cols.push(snap.state.sigma_bc.iter().map(|v| v.re).collect());
    cols.push(snap.state.sigma_bc.iter().map(|v| v.im).collect());
    names.push("excitation".into());
    cols.push((0..snap.state.nz()).map(|i| snap.state.excitation(i)).collect());
    (names, cols)
}

#[derive(Serialize)]
struct SnapshotLine<'a> {
    index: usize,
    t: f64,
    storage: bool,
    pumps: &'a [f64],
    file: Option<String>,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Write `trajectory.jsonl` plus one CSV per snapshot into `dir`.
pub fn write_csv(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>, Error> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let meta_path = dir.join("trajectory.jsonl");
    let mut meta = BufWriter::new(File::create(&meta_path).map_err(|e| io_err(&meta_path, e))?);
    writeln!(meta, "{}", serde_json::to_string(&traj.meta)?).map_err(|e| io_err(&meta_path, e))?;
    let mut written = vec![meta_path.clone()];
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:05}.csv");
        let path = dir.join(&name);
        let (names, cols) = snapshot_columns(traj, snap);
        let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
        writeln!(w, "{}", names.join(",")).map_err(|e| io_err(&path, e))?;
        for i in 0..traj.z.len() {
            let row: Vec<String> = cols.iter().map(|c| format!("{:.17e}", c[i])).collect();
            writeln!(w, "{}", row.join(",")).map_err(|e| io_err(&path, e))?;
        }
        let line = SnapshotLine { index: k, t: snap.t(), storage: snap.storage, pumps: &snap.pumps, file: Some(name) };
        writeln!(meta, "{}", serde_json::to_string(&line)?).map_err(|e| io_err(&meta_path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct BinHeader<'a> {
    meta: &'a RunMeta,
    columns: Vec<String>,
    rows_per_snapshot: usize,
    snapshots: Vec<SnapshotLine<'a>>,
    layout: &'static str,
}

/// Single binary dump: an 8-byte little-endian header length, the JSON
/// header, then every snapshot's columns as contiguous little-endian f64.
pub fn write_bin(traj: &Trajectory, path: &Path) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let columns = traj.snapshots.first().map(|s| snapshot_columns(traj, s).0).unwrap_or_default();
    let header = BinHeader {
        meta: &traj.meta,
        columns,
        rows_per_snapshot: traj.z.len(),
        snapshots: traj
            .snapshots
            .iter()
            .enumerate()
            .map(|(k, s)| SnapshotLine { index: k, t: s.t(), storage: s.storage, pumps: &s.pumps, file: None })
            .collect(),
        layout: "snapshot-major, column-major within snapshot, f64 little-endian",
    };
    let head = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    put(&(head.len() as u64).to_le_bytes())?;
    put(&head)?;
    for snap in &traj.snapshots {
        for col in snapshot_columns(traj, snap).1 {
            for v in col {
                put(&v.to_le_bytes())?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Trapezoidal `int |f|^2 dz` over a uniform grid.
pub fn l2_sq(values: impl Iterator<Item = C64>, dz: f64) -> f64 {
    let v: Vec<f64> = values.map(|c| c.norm_sqr()).collect();
    trapezoid(&v, dz)
}

pub fn trapezoid(v: &[f64], dx: f64) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        n => dx * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1])),
    }
}

/// Convenience for tests and experiments: a column vector as `Array1`.
pub fn column(a: &Array2<C64>, s: usize) -> Array1<C64> {
    a.row(s).to_owned()
}
