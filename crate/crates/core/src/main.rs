use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use eitlab::dynamics::{write_bin, write_csv};
use eitlab::experiments::{derived_quantities, run_experiment};
use eitlab::model::{validate, Config, Direction, Format, LevelSystem, PropagationGeometry, Scheme};
use eitlab::polariton::{self, MixingAngles};
use eitlab::profile::localization_profiles;
use eitlab::report::{config_hash, Table, Timing};
use eitlab::report::RunManifest;
use eitlab::sweep::{parse_values, run_sweep, sweep_csv};
use eitlab::{presets, Error};

const EXIT_FAIL: u8 = 2;
const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "eitlab", version, about = "Maxwell-Bloch simulations of multi-level EIT")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a configuration and run its experiment.
    Run(RunArgs),
    /// Run one member per value of a configuration parameter.
    Sweep(SweepArgs),
    /// Evaluate an analytic formula and print JSON.
    Check(CheckArgs),
    /// Write interference profiles of stationary probe components.
    Profile(ProfileArgs),
    /// List the shipped presets.
    Presets,
}

#[derive(Args)]
struct Source {
    /// Configuration file (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Name of a shipped preset.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory (default: $EITLAB_OUT or ./eitlab-out, plus the config name).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectory format.
    #[arg(long)]
    format: Option<Format>,
    /// Override the integration scheme (quasi-static | characteristics).
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Always write the trajectory.
    #[arg(long)]
    trajectory: bool,
    /// Validate and print derived quantities without integrating.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// Dotted path of the swept parameter, e.g. pumps.1.amplitude.
    #[arg(long)]
    param: String,
    /// Values: `1,2,3` or JSON entries such as `[3],[4],[5]`.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Maximum concurrent member runs (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Formula name; an unknown name lists the available ones.
    formula: String,
    /// Couplings g, comma separated (one per channel).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    g: Vec<f64>,
    /// Pump amplitudes, comma separated (default: all 1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    omega: Vec<f64>,
    /// Direction signs, comma separated (default: all +1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    d: Vec<i64>,
    /// Atom number N.
    #[arg(long, default_value_t = 1.0)]
    n: f64,
    /// Excited-state decay rate.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Vacuum light speed.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// One-based pair or channel index.
    #[arg(long, default_value_t = 1)]
    j: usize,
    /// Characteristic time for the adiabatic parameter.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    levels: Vec<usize>,
    /// Wave number of the middle carrier (inverse envelope units).
    #[arg(long, default_value_t = 200.0)]
    carrier_k: f64,
    /// Carrier spacing relative to the middle carrier.
    #[arg(long, default_value_t = 0.01)]
    spacing: f64,
    #[arg(long, default_value_t = 3.0)]
    half_width: f64,
    #[arg(long, default_value_t = 32)]
    points_per_period: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Profile(a) => cmd_profile(a),
        Cmd::Presets => {
            for n in presets::NAMES {
                println!("{n}");
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Raw document text plus a short name for the output directory.
fn load_source(s: &Source) -> Result<(String, String), Error> {
    match (&s.config, &s.preset) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            let stem = p.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            Ok((text, stem))
        }
        (None, Some(name)) => {
            let text = presets::source(name).ok_or_else(|| {
                Error::Experiment(format!("unknown preset '{name}'; available: {}", presets::NAMES.join(", ")))
            })?;
            Ok((text.to_string(), name.clone()))
        }
        (None, None) => Err(Error::Experiment("either --config or --preset is required".into())),
    }
}

fn output_dir(explicit: Option<&Path>, cfg_dir: Option<&str>, name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let root = std::env::var_os("EITLAB_OUT").map_or_else(|| PathBuf::from("eitlab-out"), PathBuf::from);
    root.join(cfg_dir.unwrap_or(name))
}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn cmd_run(a: RunArgs) -> Result<bool, Error> {
    let started = (now_unix(), Instant::now());
    let (text, name) = load_source(&a.source)?;
    let mut cfg = Config::from_json(&text)?;
    if let Some(s) = a.scheme {
        cfg.grid.scheme = s;
    }
    let v = validate(&cfg)?;
    if a.dry_run {
        println!("{}", serde_json::to_string_pretty(&derived_quantities(&v))?);
        return Ok(true);
    }

    let outcome = run_experiment(&v)?;
    let mut report = outcome.report;
    let dir = output_dir(a.out.as_deref(), cfg.output.dir.as_deref(), &name);
    let mut files = report.write(&dir)?;
    let want_traj = a.trajectory || cfg.output.write_trajectory || report.experiment == "raw";
    if let (true, Some(traj)) = (want_traj, outcome.trajectory.as_ref()) {
        match a.format.unwrap_or(cfg.output.format) {
            Format::Csv => files.extend(write_csv(traj, &dir.join("trajectory"))?),
            Format::Bin => {
                let p = dir.join("trajectory.bin");
                write_bin(traj, &p)?;
                files.push(p);
            }
        }
    }
    let timing = Timing { started_unix: started.0, wall_seconds: started.1.elapsed().as_secs_f64() };
    let mut manifest = RunManifest::new("run", config_hash(&text)?, timing);
    manifest.add_files(&dir, &files)?;
    manifest.write(&dir)?;

    for (k, m) in &report.metrics {
        let flag = match m.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "info",
        };
        match m.predicted {
            Some(p) => println!("{flag:>4}  {k}: {:.6e} (predicted {p:.6e})", m.measured),
            None => println!("{flag:>4}  {k}: {:.6e}", m.measured),
        }
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    let passed = report.passed();
    println!("{}: {} -> {}", report.experiment, if passed { "PASS" } else { "FAIL" }, dir.display());
    Ok(passed)
}

fn cmd_sweep(a: SweepArgs) -> Result<bool, Error> {
    let started = (now_unix(), Instant::now());
    let (text, name) = load_source(&a.source)?;
    let doc: Value = serde_json::from_str(&text)?;
    let values = parse_values(&a.values)?;
    let rows = run_sweep(&doc, &a.param, &values, a.jobs)?;
    let dir = output_dir(a.out.as_deref(), None, &format!("{name}_sweep"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("sweep.csv");
    std::fs::write(&path, sweep_csv(&a.param, &rows)).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let timing = Timing { started_unix: started.0, wall_seconds: started.1.elapsed().as_secs_f64() };
    let mut manifest = RunManifest::new("sweep", config_hash(&text)?, timing);
    manifest.add_files(&dir, std::slice::from_ref(&path))?;
    manifest.write(&dir)?;
    let mut all = true;
    for r in &rows {
        match &r.result {
            Ok(rep) => {
                all &= rep.passed();
                println!("{} {} = {}: {}", r.index, a.param, r.value, if rep.passed() { "PASS" } else { "FAIL" });
            }
            Err(e) => {
                all = false;
                println!("{} {} = {}: error: {e}", r.index, a.param, r.value);
            }
        }
    }
    println!("sweep -> {}", path.display());
    Ok(all)
}

const FORMULAS: &[&str] = &[
    "theta",
    "phi",
    "pair",
    "cos_alpha",
    "vg",
    "stationarity",
    "stationarity_printed",
    "beta",
    "rate",
    "lifetime",
    "tau",
    "omega_total",
    "basis",
];

fn cmd_check(a: CheckArgs) -> Result<bool, Error> {
    if !FORMULAS.contains(&a.formula.as_str()) {
        return Err(Error::Experiment(format!("unknown formula '{}'; available: {}", a.formula, FORMULAS.join(", "))));
    }
    if a.g.is_empty() {
        return Err(Error::Experiment("--g is required (one coupling per channel)".into()));
    }
    let ch = a.g.len();
    let sys = LevelSystem { m: ch + 2, g: a.g.clone(), gamma: a.gamma, gamma_ce: None, n_atoms: a.n, length: 1.0 };
    let omega = if a.omega.is_empty() { vec![1.0; ch] } else { a.omega.clone() };
    let d = if a.d.is_empty() { vec![1; ch] } else { a.d.clone() };
    let directions = d
        .iter()
        .map(|&s| Direction::try_from(s).map_err(Error::Experiment))
        .collect::<Result<Vec<_>, _>>()?;
    let geom = PropagationGeometry { directions, nu: None, c: a.c, pump_wavevectors: None };
    let j = a.j.checked_sub(1).ok_or_else(|| Error::Experiment("--j is one-based".into()))?;
    let value: Value = match a.formula.as_str() {
        "theta" => json!(polariton::mixing_theta(&sys, &omega)?),
        "phi" => json!(polariton::mixing_phi(&sys, &omega)?),
        "pair" => json!(polariton::pair_angle(j, &sys, &omega)?),
        "cos_alpha" => json!(polariton::cos_alpha(&sys, &geom, &omega, j)?),
        "vg" => serde_json::to_value(polariton::group_velocity(&sys, &geom, &omega)?)?,
        "stationarity" => json!(polariton::stationarity_pump(&sys, &omega[..ch - 1])?),
        "stationarity_printed" => json!(polariton::stationarity_pump_printed(&sys, &omega[..ch - 1])),
        "beta" => json!(polariton::beta_angle(j, &sys, &omega)?),
        "rate" => json!(polariton::g_decay_rate(j, &sys, &omega)?),
        "lifetime" => json!(1.0 / polariton::g_decay_rate(j, &sys, &omega)?),
        "tau" => json!(polariton::adiabatic_tau(&sys, a.t)),
        "omega_total" => json!(eitlab::model::omega_total(&omega)),
        "basis" => {
            let m = polariton::basis_matrix(&MixingAngles::compute(&sys, &geom, &omega)?);
            json!(m.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
        }
        _ => unreachable!(),
    };
    let out = json!({
        "formula": a.formula,
        "inputs": {"g": a.g, "omega": omega, "d": d, "n": a.n, "gamma": a.gamma, "c": a.c, "j": a.j, "t": a.t},
        "value": value,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn cmd_profile(a: ProfileArgs) -> Result<bool, Error> {
    let started = (now_unix(), Instant::now());
    let set = localization_profiles(&a.levels, a.carrier_k, a.spacing, a.half_width, a.points_per_period)?;
    let dir = output_dir(a.out.as_deref(), None, "profiles");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    let mut cols = vec!["z".to_string()];
    cols.extend(set.profiles.iter().map(|(m, _)| format!("intensity_m{m}")));
    let names: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("profiles", &names);
    for (i, z) in set.z.iter().enumerate() {
        let mut row = vec![*z];
        row.extend(set.profiles.iter().map(|(_, p)| p[i]));
        t.push(row);
    }
    let csv = dir.join("profiles.csv");
    std::fs::write(&csv, t.to_csv()).map_err(|e| Error::Io { path: csv.clone(), source: e })?;
    let summary = json!({
        "levels": a.levels,
        "carrier_k": a.carrier_k,
        "spacing": a.spacing,
        "widths": set.widths,
    });
    let js = dir.join("profiles.json");
    let text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&js, &text).map_err(|e| Error::Io { path: js.clone(), source: e })?;
    let timing = Timing { started_unix: started.0, wall_seconds: started.1.elapsed().as_secs_f64() };
    let mut manifest = RunManifest::new("profile", config_hash(&text)?, timing);
    manifest.add_files(&dir, &[csv, js])?;
    manifest.write(&dir)?;
    println!("{text}");
    Ok(true)
}
