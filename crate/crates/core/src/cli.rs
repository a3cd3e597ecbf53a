//! The `chronotax` command line.
//!
//! Every subcommand reads a parameter document assembled from an optional
//! JSON file (`--config path`) overlaid with the flags given on the command
//! line. Flags mirror the document keys (`--eps-a` sets `eps_a`), unknown keys
//! are rejected, and absent keys take their defaults.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration, 3 numerical failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::contraction::{
    contraction_map, full_eigs, radial_sym_eigs, ContractionClass, ContractionMap, Grid, LinearField, DEFAULT_BETA,
};
use crate::error::{Error, Result};
use crate::integrate::{ensemble_sde, integrate_det, integrate_sde, Frame, NoiseSpec, Trajectory, DEFAULT_DT};
use crate::io::{fmt_sig, read_block, BLOCK_FORMAT};
use crate::model::{
    CartesianState, DrivenPoincare, FrozenParams, ModelConfig, OscillatorParams, ProfileSpec, VectorField,
};
use crate::signal::{self, count_slips, count_slips_series, cwt, log_freqs, ridge, write_slips_json};
use crate::steady_state::{
    attractor_track, continuation_sweep, find_fixed_points, region_map, trace_gamma, ChronotaxicClass, FixedPoint,
};
use crate::verify::{verify_schedule, VerifyConfig};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Two numbers written `a,b` on the command line and `[a, b]` in JSON.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pair(pub [f64; 2]);

impl std::str::FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        Ok(Pair([parse(a)?, parse(b)?]))
    }
}

/// Declares a parameter document and the matching flag set. Each entry reads
/// `key: document type [flag type] = default`.
macro_rules! run_config {
    (
        $(#[$meta:meta])*
        $name:ident / $flags:ident {
            $( $(#[doc = $doc:literal])* $field:ident : $ty:ty [$fty:ty] = $default:expr ),* $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $( $(#[doc = $doc])* pub $field: $ty, )*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        #[derive(Args, Clone, Debug, Default, Serialize)]
        pub struct $flags {
            $(
                $(#[doc = $doc])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$fty>,
            )*
        }
    };
}

run_config! {
    /// `simulate`: one deterministic or stochastic run.
    SimulateConfig / SimulateFlags {
        /// Radial stiffness
        eps_gamma: f64 [f64] = 7.0,
        /// Natural frequency
        omega0: f64 [f64] = 1.0,
        /// Drive radius
        r_p: f64 [f64] = 1.0,
        /// Coupling strength (number, or a sampled profile in the config file)
        eps_a: ProfileSpec [ProfileSpec] = ProfileSpec::Scalar(1.2),
        /// Drive frequency; exclusive with delta_omega
        omega_p: Option<ProfileSpec> [ProfileSpec] = None,
        /// Frequency mismatch omega0 - omega_p (0.5 when neither is given)
        delta_omega: Option<ProfileSpec> [ProfileSpec] = None,
        /// Drive phase at t = 0
        alpha0: f64 [f64] = 0.0,
        /// Initial lab-frame state "x,y"
        x0: Pair [Pair] = Pair([1.0, 0.0]),
        /// Start time
        t0: f64 [f64] = 0.0,
        /// End time
        t1: f64 [f64] = 100.0,
        /// Integration step
        dt: f64 [f64] = DEFAULT_DT,
        /// Noise intensity sigma; switches to Euler-Maruyama
        noise: Option<f64> [f64] = None,
        /// Noise seed
        seed: u64 [u64] = 0,
        /// Output frame: lab or rotating
        frame: Frame [Frame] = Frame::Lab,
        /// Keep every n-th sample
        stride: usize [usize] = 1,
        /// Output CSV (stdout when absent)
        output: Option<PathBuf> [PathBuf] = None,
    }
}

run_config! {
    /// `portrait`: contraction map, fixed points and Γ at one instant.
    PortraitConfig / PortraitFlags {
        /// Radial stiffness
        eps_gamma: f64 [f64] = 7.0,
        /// Natural frequency
        omega0: f64 [f64] = 1.0,
        /// Drive radius
        r_p: f64 [f64] = 1.0,
        /// Coupling strength
        eps_a: ProfileSpec [ProfileSpec] = ProfileSpec::Scalar(1.2),
        /// Drive frequency; exclusive with delta_omega
        omega_p: Option<ProfileSpec> [ProfileSpec] = None,
        /// Frequency mismatch omega0 - omega_p (0.5 when neither is given)
        delta_omega: Option<ProfileSpec> [ProfileSpec] = None,
        /// Drive phase at t = 0
        alpha0: f64 [f64] = 0.0,
        /// Instant at which the parameters are frozen
        t: f64 [f64] = 0.0,
        /// Half-width of the square grid
        grid_half: f64 [f64] = 2.5,
        /// Nodes per grid side
        grid_n: usize [usize] = 201,
        /// Contraction margin
        beta: f64 [f64] = DEFAULT_BETA,
        /// Directory for the CSV and block outputs
        output_dir: PathBuf [PathBuf] = PathBuf::from("."),
    }
}

run_config! {
    /// `sweep`: saddle-node thresholds along ε_A.
    SweepConfig / SweepFlags {
        /// Radial stiffness
        eps_gamma: f64 [f64] = 7.0,
        /// Natural frequency
        omega0: f64 [f64] = 1.0,
        /// Drive radius
        r_p: f64 [f64] = 1.0,
        /// Frequency mismatch
        delta_omega: f64 [f64] = 0.5,
        /// First coupling strength
        eps_from: f64 [f64] = 0.0,
        /// Last coupling strength
        eps_to: f64 [f64] = 8.0,
        /// Coupling step
        step: f64 [f64] = 0.01,
        /// Output JSON (stdout when absent)
        output: Option<PathBuf> [PathBuf] = None,
    }
}

run_config! {
    /// `regionmap`: chronotaxic class over (Δω, ε_A).
    RegionMapConfig / RegionMapFlags {
        /// Radial stiffness
        eps_gamma: f64 [f64] = 7.0,
        /// Natural frequency
        omega0: f64 [f64] = 1.0,
        /// Drive radius
        r_p: f64 [f64] = 1.0,
        /// Frequency-mismatch axis "lo,hi"
        delta_omega_range: Pair [Pair] = Pair([0.0, 3.0]),
        /// Coupling axis "lo,hi"
        eps_a_range: Pair [Pair] = Pair([0.0, 8.0]),
        /// Nodes along the mismatch axis
        n_delta_omega: usize [usize] = 150,
        /// Nodes along the coupling axis
        n_eps_a: usize [usize] = 150,
        /// Contraction margin
        beta: f64 [f64] = DEFAULT_BETA,
        /// Output CSV
        output: PathBuf [PathBuf] = PathBuf::from("regionmap.csv"),
    }
}

run_config! {
    /// `verify`: chronotaxicity of a drive schedule.
    VerifyRunConfig / VerifyFlags {
        /// Radial stiffness
        eps_gamma: f64 [f64] = 7.0,
        /// Natural frequency
        omega0: f64 [f64] = 1.0,
        /// Drive radius
        r_p: f64 [f64] = 1.0,
        /// Coupling strength
        eps_a: ProfileSpec [ProfileSpec] = ProfileSpec::Scalar(1.7),
        /// Drive frequency; exclusive with delta_omega
        omega_p: Option<ProfileSpec> [ProfileSpec] = None,
        /// Frequency mismatch omega0 - omega_p (0.5 when neither is given)
        delta_omega: Option<ProfileSpec> [ProfileSpec] = None,
        /// Drive phase at t = 0
        alpha0: f64 [f64] = 0.0,
        /// Start of the checked window
        t0: f64 [f64] = 0.0,
        /// End of the checked window
        t1: f64 [f64] = 50.0,
        /// Integration step
        dt: f64 [f64] = DEFAULT_DT,
        /// Spacing of the checked times
        sample_dt: f64 [f64] = 0.1,
        /// Contraction margin
        beta: f64 [f64] = DEFAULT_BETA,
        /// Points on each trapping-disk boundary
        boundary_samples: usize [usize] = 720,
        /// Fixed trapping radius (searched when absent)
        radius: Option<f64> [f64] = None,
        /// Initial states in the attraction ensemble
        ensemble_size: usize [usize] = 8,
        /// Radius of the disk the ensemble is drawn from
        ensemble_radius: f64 [f64] = 2.0,
        /// Ensemble seed
        seed: u64 [u64] = 0,
        /// Largest accepted attraction defect
        defect_tol: f64 [f64] = 1e-6,
        /// Output JSON (stdout when absent)
        output: Option<PathBuf> [PathBuf] = None,
    }
}

run_config! {
    /// `cwt`: Morlet scalogram, ridge and phase slips of a trajectory CSV.
    CwtConfig / CwtFlags {
        /// Trajectory CSV with a `t` column
        input: Option<PathBuf> [PathBuf] = None,
        /// Column to transform
        column: String [String] = "x".to_string(),
        /// Keep every n-th sample before transforming
        stride: usize [usize] = 1,
        /// Lowest analysed frequency in Hz
        f_min: f64 [f64] = signal::DEFAULT_F_MIN,
        /// Highest analysed frequency in Hz
        f_max: f64 [f64] = signal::DEFAULT_F_MAX,
        /// Scales per octave
        voices: usize [usize] = signal::DEFAULT_VOICES,
        /// Morlet central frequency f0
        central_freq: f64 [f64] = signal::DEFAULT_CENTRAL_FREQ,
        /// Attractor phase; enables slip counting on the psi column
        attractor_psi: Option<f64> [f64] = None,
        /// Phase column used for slip counting
        psi_column: String [String] = "psi".to_string(),
        /// Also write the scalogram as CSV (the block is always written)
        scalogram_csv: bool [bool] = true,
        /// Directory for the outputs
        output_dir: PathBuf [PathBuf] = PathBuf::from("."),
    }
}

run_config! {
    /// `make-figures`: data behind every figure at desk scale.
    FiguresConfig / FiguresFlags {
        /// Root directory, one subdirectory per figure
        output_dir: PathBuf [PathBuf] = PathBuf::from("figures"),
        /// Comma-separated subset of 2,4,5,6,7
        figures: String [String] = "2,4,5,6,7".to_string(),
        /// Base noise seed
        seed: u64 [u64] = 1,
        /// Length of each noisy record
        noise_t1: f64 [f64] = 1000.0,
        /// Ensemble size for slip statistics
        slip_runs: usize [usize] = 20,
        /// Length of each slip-ensemble run
        slip_t1: f64 [f64] = 500.0,
        /// Nodes per side of the portrait grids
        grid_n: usize [usize] = 201,
        /// Nodes per axis of the region map
        region_resolution: usize [usize] = 150,
    }
}

#[derive(Parser, Debug)]
#[command(name = "chronotax", version, about = "Chronotaxic dynamics of the driven Poincaré oscillator")]
struct Cli {
    /// Worker threads for grid and ensemble commands
    #[arg(long, global = true, env = "CHRONOTAX_THREADS")]
    threads: Option<usize>,

    /// JSON parameter document; flags override its keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory to CSV
    Simulate(SimulateFlags),
    /// Contraction map, fixed points and Γ of frozen parameters
    Portrait(PortraitFlags),
    /// Fixed-point continuation along the coupling strength
    Sweep(SweepFlags),
    /// Chronotaxic class over the (delta_omega, eps_a) plane
    Regionmap(RegionMapFlags),
    /// Verify chronotaxicity of a drive schedule
    Verify(VerifyFlags),
    /// Wavelet scalogram and ridge of a trajectory CSV
    Cwt(CwtFlags),
    /// Regenerate the data behind every figure
    MakeFigures(FiguresFlags),
    /// Summarise a CSV or block file
    Inspect {
        /// CSV or block file
        path: PathBuf,
    },
}

/// Runs the command line with the process arguments and returns the exit code.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    let file = cli.config.as_deref();
    match cli.command {
        Command::Simulate(f) => cmd_simulate(&load(file, &f)?),
        Command::Portrait(f) => cmd_portrait(&load(file, &f)?),
        Command::Sweep(f) => cmd_sweep(&load(file, &f)?),
        Command::Regionmap(f) => cmd_regionmap(&load(file, &f)?),
        Command::Verify(f) => cmd_verify(&load(file, &f)?),
        Command::Cwt(f) => cmd_cwt(&load(file, &f)?),
        Command::MakeFigures(f) => cmd_make_figures(&load(file, &f)?),
        Command::Inspect { path } => cmd_inspect(&path),
    }
}

/// Overlays the flags that were given on the document in `file` and validates the result.
pub fn load<C, F>(file: Option<&Path>, flags: &F) -> Result<C>
where
    C: for<'de> Deserialize<'de>,
    F: Serialize,
{
    let mut doc = match file {
        None => Map::new(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(with_path(path))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Error::invalid(format!("{}: config must be a JSON object", path.display()))),
                Err(e) => return Err(Error::invalid(format!("{}: {e}", path.display()))),
            }
        }
    };
    if let Value::Object(overrides) = serde_json::to_value(flags)? {
        doc.extend(overrides);
    }
    serde_json::from_value(Value::Object(doc)).map_err(|e| Error::invalid(format!("config: {e}")))
}

fn omega_p_spec(omega0: f64, omega_p: &Option<ProfileSpec>, delta_omega: &Option<ProfileSpec>) -> Result<ProfileSpec> {
    let from_delta = |d: &ProfileSpec| match d {
        ProfileSpec::Scalar(v) => ProfileSpec::Scalar(omega0 - v),
        ProfileSpec::Samples(s) => {
            let mut s = s.clone();
            s.v.iter_mut().for_each(|v| *v = omega0 - *v);
            ProfileSpec::Samples(s)
        }
    };
    match (omega_p, delta_omega) {
        (Some(_), Some(_)) => Err(Error::invalid("give either omega_p or delta_omega, not both")),
        (Some(w), None) => Ok(w.clone()),
        (None, Some(d)) => Ok(from_delta(d)),
        (None, None) => Ok(from_delta(&ProfileSpec::Scalar(0.5))),
    }
}

macro_rules! system_of {
    ($c:expr) => {
        ModelConfig {
            eps_gamma: $c.eps_gamma,
            omega0: $c.omega0,
            r_p: $c.r_p,
            eps_a: $c.eps_a.clone(),
            omega_p: omega_p_spec($c.omega0, &$c.omega_p, &$c.delta_omega)?,
            alpha0: $c.alpha0,
        }
        .build()
    };
}

fn with_path(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(with_path(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(with_path(path))?))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn write_json_file(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_simulate(c: &SimulateConfig) -> Result<()> {
    let sys = system_of!(c)?;
    if c.stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let traj = simulate(&sys, c.x0, c.t0, c.t1, c.dt, c.noise, c.seed)?;
    let traj = match c.frame {
        Frame::Lab => traj,
        Frame::Rotating => traj.to_rotating(&sys.drive),
    };
    let mut w = sink(c.output.as_deref())?;
    traj.subsample(c.stride).write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn simulate(
    sys: &DrivenPoincare,
    x0: Pair,
    t0: f64,
    t1: f64,
    dt: f64,
    noise: Option<f64>,
    seed: u64,
) -> Result<Trajectory> {
    let x0 = CartesianState::new(x0.0[0], x0.0[1]);
    match noise {
        Some(sigma) => integrate_sde(sys, x0, t0, t1, dt, NoiseSpec::new(sigma, seed)?),
        None => integrate_det(sys, x0, t0, t1, dt),
    }
}

pub fn cmd_portrait(c: &PortraitConfig) -> Result<()> {
    let sys = system_of!(c)?;
    if !(c.grid_half > 0.0) || c.grid_n < 2 {
        return Err(Error::invalid("portrait grid needs grid_half > 0 and grid_n >= 2"));
    }
    let summary = portrait(&sys, c.t, Grid::square(c.grid_half, c.grid_n), c.beta, &c.output_dir)?;
    print_json(&summary)
}

fn portrait(sys: &DrivenPoincare, t: f64, grid: Grid, beta: f64, dir: &Path) -> Result<Value> {
    let frozen = sys.frozen_at(t);
    let map = contraction_map(sys, grid, t, beta)?;
    write_map(&map, dir, "contraction")?;

    let points = find_fixed_points(&frozen);
    let mut w = create(&dir.join("fixed_points.csv"))?;
    write_fixed_points(&mut w, sys, t, &points)?;
    w.flush()?;

    let gamma = trace_gamma(&frozen)?;
    let mut w = create(&dir.join("gamma.csv"))?;
    gamma.write_csv(&mut w)?;
    w.flush()?;

    let class = crate::steady_state::classify_with(&frozen, beta)?;
    Ok(json!({
        "eps_a": frozen.eps_a,
        "delta_omega": frozen.delta_omega,
        "t": t,
        "cells": grid.len(),
        "both_negative": map.count(ContractionClass::BothNegative),
        "one_negative": map.count(ContractionClass::OneNegative),
        "none_negative": map.count(ContractionClass::NoneNegative),
        "non_contraction_cells": grid.len() - map.count(ContractionClass::BothNegative),
        "fixed_points": points.iter().map(|p| p.kind.as_str()).collect::<Vec<_>>(),
        "gamma": gamma.exists,
        "class": class.as_str(),
    }))
}

fn write_map(map: &ContractionMap, dir: &Path, stem: &str) -> Result<()> {
    let mut w = create(&dir.join(format!("{stem}.csv")))?;
    map.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(format!("{stem}.block")))?;
    map.write_block(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_fixed_points<W: Write>(mut w: W, sys: &DrivenPoincare, t: f64, points: &[FixedPoint]) -> Result<()> {
    writeln!(w, "kind,r,psi,u,v,x,y,eig1_re,eig1_im,eig2_re,eig2_im,lambda_max_sym")?;
    for p in points {
        let uv = p.uv();
        let lab = sys.to_lab(t, p.location);
        let [e1, e2] = p.full_jacobian_eigs;
        let nums =
            [p.location.r, p.location.psi, uv.x, uv.y, lab.x, lab.y, e1.re, e1.im, e2.re, e2.im, p.lambda_max_sym];
        let cols: Vec<String> = nums.iter().map(|&x| fmt_sig(x)).collect();
        writeln!(w, "{},{}", p.kind, cols.join(","))?;
    }
    Ok(())
}

pub fn cmd_sweep(c: &SweepConfig) -> Result<()> {
    let p = OscillatorParams::new(c.eps_gamma, c.omega0, c.r_p)?;
    let res = continuation_sweep(c.delta_omega, c.eps_from, c.eps_to, c.step, &p)?;
    let mut w = sink(c.output.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &res)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_regionmap(c: &RegionMapConfig) -> Result<()> {
    let p = OscillatorParams::new(c.eps_gamma, c.omega0, c.r_p)?;
    let map = region_map(
        (c.delta_omega_range.0[0], c.delta_omega_range.0[1]),
        (c.eps_a_range.0[0], c.eps_a_range.0[1]),
        (c.n_delta_omega, c.n_eps_a),
        &p,
        c.beta,
    )?;
    let mut w = create(&c.output)?;
    map.write_csv(&mut w)?;
    w.flush()?;
    let counts: Map<String, Value> = ChronotaxicClass::ALL
        .iter()
        .map(|k| (k.as_str().to_string(), json!(map.class.iter().filter(|c| *c == k).count())))
        .collect();
    print_json(&json!({
        "cells": map.class.len(),
        "labels_present": map.labels_present().iter().map(|k| k.as_str()).collect::<Vec<_>>(),
        "counts": counts,
    }))
}

pub fn cmd_verify(c: &VerifyRunConfig) -> Result<()> {
    let sys = system_of!(c)?;
    let cfg = VerifyConfig {
        t0: c.t0,
        t1: c.t1,
        dt: c.dt,
        sample_dt: c.sample_dt,
        beta: c.beta,
        boundary_samples: c.boundary_samples,
        radius: c.radius,
        ensemble_size: c.ensemble_size,
        ensemble_radius: c.ensemble_radius,
        seed: c.seed,
        defect_tol: c.defect_tol,
    };
    let report = verify_schedule(&sys.drive, &sys.params, &cfg)?;
    let mut w = sink(c.output.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Columns of a numeric CSV with a header row.
struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(csv_error)?;
        let names: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            for (k, field) in rec.iter().enumerate() {
                let v = field.trim().parse::<f64>().map_err(|_| {
                    Error::invalid(format!("row {}: column {} is not numeric: {field:?}", line + 2, names[k]))
                })?;
                columns[k].push(v);
            }
        }
        Ok(Self { names, columns })
    }

    fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| Error::invalid(format!("no column {name:?}; have {}", self.names.join(","))))
    }
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        Error::invalid(format!("csv: {e}"))
    }
}

fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let dt = t[1] - t[0];
    let tol = 1e-6 * dt.abs().max(f64::MIN_POSITIVE);
    if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
        return Err(Error::invalid("time column must be uniformly spaced"));
    }
    Ok(dt)
}

pub fn cmd_cwt(c: &CwtConfig) -> Result<()> {
    let input = c.input.as_deref().ok_or_else(|| Error::invalid("cwt needs an input CSV"))?;
    if c.stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let table = Table::read(input)?;
    let t = table.column("t")?;
    let series = table.column(&c.column)?;
    let t_sub: Vec<f64> = t.iter().step_by(c.stride).copied().collect();
    let x_sub: Vec<f64> = series.iter().step_by(c.stride).copied().collect();
    let dt = uniform_step(&t_sub)?;
    let freqs = log_freqs(c.f_min, c.f_max, c.voices)?;
    let scalogram = cwt(&x_sub, t_sub[0], dt, &freqs, c.central_freq)?;
    let r = ridge(&scalogram);

    let dir = &c.output_dir;
    if c.scalogram_csv {
        let mut w = create(&dir.join("scalogram.csv"))?;
        scalogram.write_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = create(&dir.join("scalogram.block"))?;
    scalogram.write_block(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("ridge.csv"))?;
    r.write_csv(&mut w)?;
    w.flush()?;

    let mut summary = json!({
        "samples": x_sub.len(),
        "dt": dt,
        "frequencies": freqs.len(),
        "median_ridge_hz": r.median_frequency(),
    });
    if let Some(a) = c.attractor_psi {
        let psi = table.column(&c.psi_column)?;
        let events = count_slips_series(t, psi, a);
        let mut w = create(&dir.join("slips.json"))?;
        write_slips_json(&events, &mut w)?;
        writeln!(w)?;
        w.flush()?;
        summary["slips"] = json!(events.len());
    }
    print_json(&summary)
}

pub fn cmd_inspect(path: &Path) -> Result<()> {
    let mut r = BufReader::new(File::open(path).map_err(with_path(path))?);
    let is_block = {
        let buf = r.fill_buf()?;
        buf.starts_with(b"{") && buf.windows(BLOCK_FORMAT.len()).any(|w| w == BLOCK_FORMAT.as_bytes())
    };
    if is_block {
        let (header, data) = read_block(r)?;
        let per = header.len() / header.shape.first().copied().unwrap_or(1).max(1);
        let fields: Vec<Value> = header
            .fields
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let chunk = &data[k * per..((k + 1) * per).min(data.len())];
                json!({ "name": name, "min": min_of(chunk), "max": max_of(chunk) })
            })
            .collect();
        return print_json(&json!({
            "format": "block",
            "kind": header.kind,
            "shape": header.shape,
            "fields": fields,
            "meta": header.meta,
        }));
    }
    let mut rdr = csv::Reader::from_reader(r);
    let names: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut labels: Vec<std::collections::BTreeMap<String, usize>> = vec![Default::default(); names.len()];
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        rows += 1;
        for (k, field) in rec.iter().enumerate().take(names.len()) {
            match field.trim().parse::<f64>() {
                Ok(v) => numeric[k].push(v),
                Err(_) => *labels[k].entry(field.to_string()).or_default() += 1,
            }
        }
    }
    let columns: Vec<Value> = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            if labels[k].is_empty() {
                json!({ "name": name, "min": min_of(&numeric[k]), "max": max_of(&numeric[k]) })
            } else {
                json!({ "name": name, "labels": labels[k] })
            }
        })
        .collect();
    print_json(&json!({ "format": "csv", "rows": rows, "columns": columns }))
}

fn min_of(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::min)
}

fn max_of(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::max)
}

pub fn cmd_make_figures(c: &FiguresConfig) -> Result<()> {
    let wanted: Vec<&str> = c.figures.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if let Some(bad) = wanted.iter().find(|f| !["2", "4", "5", "6", "7"].contains(f)) {
        return Err(Error::invalid(format!("unknown figure {bad:?}; choose from 2,4,5,6,7")));
    }
    if c.grid_n < 2 || c.region_resolution < 2 {
        return Err(Error::invalid("grid_n and region_resolution must be at least 2"));
    }
    let mut summary = Map::new();
    for fig in wanted {
        let dir = c.output_dir.join(format!("fig{fig}"));
        fs::create_dir_all(&dir)?;
        let v = match fig {
            "2" => figure_linear(c, &dir)?,
            "4" => figure_uncoupled(c, &dir)?,
            "5" => figure_regions(c, &dir)?,
            "6" => figure_convergence(&dir)?,
            _ => figure_noise(c, &dir)?,
        };
        log::info!("figure {fig} written to {}", dir.display());
        summary.insert(format!("fig{fig}"), v);
    }
    print_json(&Value::Object(summary))
}

fn write_traj(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = create(path)?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

const LINEAR_ICS: [[f64; 2]; 6] = [[-0.9, 0.9], [0.0, 1.0], [0.9, 0.9], [-0.9, -0.9], [0.0, -1.0], [0.9, -0.9]];

fn figure_linear(c: &FiguresConfig, dir: &Path) -> Result<Value> {
    let mut out = Map::new();
    for (name, field) in
        [("transient_growth", LinearField::TRANSIENT_GROWTH), ("contracting", LinearField::CONTRACTING)]
    {
        let grid = Grid::square(1.0, c.grid_n);
        let map = contraction_map(&field, grid, 0.0, DEFAULT_BETA)?;
        write_map(&map, dir, &format!("{name}_contraction"))?;
        // d|x|/dt divided by |x|: positive where the distance to the attractor grows
        let mut w = create(&dir.join(format!("{name}_distance_rate.csv")))?;
        writeln!(w, "x,y,rate")?;
        let mut growing = 0usize;
        for k in 0..grid.len() {
            let s = grid.point(k);
            let v = field.velocity(0.0, s);
            let r2 = s.x * s.x + s.y * s.y;
            let rate = if r2 > 0.0 { (s.x * v[0] + s.y * v[1]) / r2 } else { 0.0 };
            growing += usize::from(rate > 0.0);
            writeln!(w, "{},{},{}", fmt_sig(s.x), fmt_sig(s.y), fmt_sig(rate))?;
        }
        w.flush()?;
        for (k, ic) in LINEAR_ICS.iter().enumerate() {
            let traj = integrate_det(&field, CartesianState::new(ic[0], ic[1]), 0.0, 10.0, 1e-3)?;
            write_traj(&dir.join(format!("{name}_traj{k}.csv")), &traj.subsample(10))?;
        }
        let eigs = full_eigs(field.0);
        out.insert(
            name.to_string(),
            json!({
                "eigenvalues": [eigs[0].re, eigs[1].re],
                "non_contraction_cells": map.grid.len() - map.count(ContractionClass::BothNegative),
                "distance_growth_cells": growing,
            }),
        );
    }
    Ok(Value::Object(out))
}

fn figure_uncoupled(c: &FiguresConfig, dir: &Path) -> Result<Value> {
    let osc = OscillatorParams::default();
    let mut w = create(&dir.join("radial.csv"))?;
    writeln!(w, "r,lambda1,lambda2,r_dot")?;
    let n = 501;
    for k in 0..n {
        let r = 2.5 * k as f64 / (n - 1) as f64;
        let (l1, l2) = radial_sym_eigs(&osc, 0.0, r);
        let r_dot = -osc.eps_gamma * (r - osc.r_p) * r;
        writeln!(w, "{},{},{},{}", fmt_sig(r), fmt_sig(l1), fmt_sig(l2), fmt_sig(r_dot))?;
    }
    w.flush()?;
    // a drive at the natural frequency with zero coupling: lab and co-rotating views of the free oscillator
    let free = FrozenParams::new(0.0, 0.0, osc)?.system();
    let lab = portrait(&free, 0.0, Grid::square(2.5, c.grid_n), DEFAULT_BETA, dir)?;
    for (k, ic) in [[0.05, 0.0], [2.0, 0.0], [0.0, -1.5]].iter().enumerate() {
        let traj = integrate_det(&free, CartesianState::new(ic[0], ic[1]), 0.0, 20.0, 1e-3)?.subsample(10);
        write_traj(&dir.join(format!("traj{k}_lab.csv")), &traj)?;
        write_traj(&dir.join(format!("traj{k}_rotating.csv")), &traj.to_rotating(&free.drive))?;
    }
    Ok(lab)
}

fn figure_regions(c: &FiguresConfig, dir: &Path) -> Result<Value> {
    let osc = OscillatorParams::default();
    let mut out = Map::new();
    for eps in [0.3, 0.5, 1.2, 1.7, 7.2] {
        let sys = FrozenParams::new(eps, 0.5, osc)?.system();
        let sub = dir.join(format!("eps_{eps}"));
        out.insert(format!("eps_{eps}"), portrait(&sys, 0.0, Grid::square(2.5, c.grid_n), DEFAULT_BETA, &sub)?);
    }
    let n = c.region_resolution;
    let map = region_map((0.0, 3.0), (0.0, 8.0), (n, n), &osc, DEFAULT_BETA)?;
    let mut w = create(&dir.join("regionmap.csv"))?;
    map.write_csv(&mut w)?;
    w.flush()?;
    out.insert("regionmap_labels".into(), json!(map.labels_present().iter().map(|k| k.as_str()).collect::<Vec<_>>()));
    let sweep = continuation_sweep(0.5, 0.0, 8.0, 0.01, &osc)?;
    write_json_file(&dir.join("sweep.json"), &sweep)?;
    out.insert("sweep".into(), json!({ "eps_c1": sweep.eps_c1, "eps_c2": sweep.eps_c2, "eps_c3": sweep.eps_c3 }));
    Ok(Value::Object(out))
}

const CONVERGENCE_ICS: [[f64; 2]; 5] = [[-1.5, 0.5], [0.3, -1.4], [1.6, 1.2], [-0.4, -0.2], [0.2, 1.8]];

fn figure_convergence(dir: &Path) -> Result<Value> {
    let frozen = FrozenParams::new(1.2, 0.5, OscillatorParams::default())?;
    let sys = frozen.system();
    let t1 = 30.0;
    let mut finals = Vec::new();
    for (k, ic) in CONVERGENCE_ICS.iter().enumerate() {
        let traj = integrate_det(&sys, CartesianState::new(ic[0], ic[1]), 0.0, t1, 1e-3)?.subsample(10);
        write_traj(&dir.join(format!("traj{k}_lab.csv")), &traj)?;
        let rot = traj.to_rotating(&sys.drive);
        write_traj(&dir.join(format!("traj{k}_rotating.csv")), &rot)?;
        let last = *rot.rotating().and_then(|v| v.last()).expect("non-empty run");
        finals.push(last);
    }
    let track = attractor_track(&sys.drive, &sys.params, 0.0, t1, 0.01, DEFAULT_BETA)?;
    let mut w = create(&dir.join("attractor.csv"))?;
    track.write_csv(&mut w)?;
    w.flush()?;
    let gamma = trace_gamma(&frozen)?;
    let mut w = create(&dir.join("gamma.csv"))?;
    gamma.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("fixed_points.csv"))?;
    write_fixed_points(&mut w, &sys, 0.0, &find_fixed_points(&frozen))?;
    w.flush()?;
    let att = sys.to_rotating(t1, *track.states.last().expect("non-empty track"));
    let spread = finals.iter().map(|s| s.to_cartesian().distance(att.to_cartesian())).fold(0.0, f64::max);
    Ok(json!({ "trajectories": CONVERGENCE_ICS.len(), "max_final_distance_to_attractor": spread }))
}

fn figure_noise(c: &FiguresConfig, dir: &Path) -> Result<Value> {
    let osc = OscillatorParams::default();
    let freqs = log_freqs(signal::DEFAULT_F_MIN, signal::DEFAULT_F_MAX, signal::DEFAULT_VOICES)?;
    let (dt, stride) = (1e-2, 10);
    let mut out = Map::new();
    for (eps, sigma) in [(0.3, 0.1), (0.47, 0.3), (0.47, 0.6)] {
        let name = format!("eps_{eps}_sigma_{sigma}");
        let frozen = FrozenParams::new(eps, 0.5, osc)?;
        let sys = frozen.system();
        let attractor = find_fixed_points(&frozen).into_iter().find(|p| p.kind.is_stable());
        let x0 = attractor.map_or(CartesianState::new(1.0, 0.0), |a| sys.to_lab(0.0, a.location));
        let traj = integrate_sde(&sys, x0, 0.0, c.noise_t1, dt, NoiseSpec::new(sigma, c.seed)?)?.subsample(stride);
        write_traj(&dir.join(format!("{name}_lab.csv")), &traj)?;
        write_traj(&dir.join(format!("{name}_rotating.csv")), &traj.to_rotating(&sys.drive))?;
        let s = cwt(&traj.first_component(), traj.t0, traj.dt, &freqs, signal::DEFAULT_CENTRAL_FREQ)?;
        let mut w = create(&dir.join(format!("{name}_scalogram.block")))?;
        s.write_block(&mut w)?;
        w.flush()?;
        let r = ridge(&s);
        let mut w = create(&dir.join(format!("{name}_ridge.csv")))?;
        r.write_csv(&mut w)?;
        w.flush()?;

        let mut entry = json!({
            "median_ridge_hz": r.median_frequency(),
            "drive_hz": signal::hz(frozen.omega_p()),
        });
        if let Some(a) = attractor {
            let runs = ensemble_sde(&sys, x0, 0.0, c.slip_t1, dt, NoiseSpec::new(sigma, c.seed)?, c.slip_runs)?;
            let counts = runs
                .iter()
                .map(|run| count_slips(&run.to_rotating(&sys.drive), a.location.psi).map(|e| e.len()))
                .collect::<Result<Vec<_>>>()?;
            write_json_file(
                &dir.join(format!("{name}_slips.json")),
                &json!({ "runs": c.slip_runs, "t1": c.slip_t1, "counts": counts }),
            )?;
            entry["runs_with_slips"] = json!(counts.iter().filter(|&&n| n > 0).count());
        }
        out.insert(name, entry);
    }
    Ok(Value::Object(out))
}
