//! The `susygate` command-line front end.
//!
//! Every subcommand reads JSON inputs, writes JSON/CSV (and sometimes SVG)
//! artifacts into `--out-dir`, and records a `<command>.manifest.json`
//! holding the resolved arguments, input hashes, seed and wall time.
//!
//! Exit status: 0 on success, 2 for invalid input, 3 for numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{choi_record, realized_channel, synthesize_channel, DescentOptions, JointSystem};
use crate::dyson::{dyson_gate, propagate_oracle, row_norm_defect, ControlPulse, OracleOptions};
use crate::error::{Error, ErrorKind, Result};
use crate::filter_fit::{
    filter_estimate, fit_parameters, frobenius_gap, lindblad_evolve, mixed_state, sme_simulate, uniform_times, FitOptions, FitResult,
    LindbladModel, Trajectory,
};
use crate::gate_synth::{pareto_rows, sweep, synthesize, EnergyConstraint, SynthesisProblem};
use crate::matrix::{basis_vector, ComplexMatrix, MatrixRecord, OperatorExt};
use crate::plot::{csv_table, line_plot, Series};
use crate::spectrum::{anharmonic_spectrum, perturbative_spectrum, Basis, Spectrum};
use crate::susy_toy::{effective_hamiltonian, parse_coefficients, susy_pair, vev_control, witten_index, GaugeCoefficients, Tensor, VevControl};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "susygate", version, about = "Gate, channel and filter-fit toolkit for a controlled anharmonic oscillator")]
#[command(args_override_self = true)]
pub struct Cli {
    /// key=value file of flags for the subcommand; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// RNG seed for stochastic commands.
    #[arg(long, global = true, env = "SUSYGATE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log at info level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diagonalize H0 and write the spectrum and an energy table.
    Spectrum(SpectrumArgs),
    /// First-order gate for a pulse, optionally compared with the exact propagator.
    Gate(GateArgs),
    /// Design a pulse whose gate approximates a target unitary.
    Synth(SynthArgs),
    /// Design a pulse whose system-ancilla channel approximates a target Choi matrix.
    Channel(ChannelArgs),
    /// Simulate a monitored trajectory and its measurement record.
    FilterSim(FilterSimArgs),
    /// Filter a record and fit model parameters to the estimate.
    FilterFit(FilterFitArgs),
    /// SUSY partner spectra and Witten index for a superpotential.
    Susy(SusyArgs),
    /// Control coefficients induced by gaugino expectation values.
    Vev(VevArgs),
    /// End-to-end simulate, filter, fit and compare run.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Exact,
    Pt,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c2: f64,
    /// Kept levels N+1.
    #[arg(long)]
    pub dim: usize,
    /// Diagonalization cutoff M (default max(4 (N+1), 32)).
    #[arg(long)]
    pub raw_dim: Option<usize>,
    #[arg(long, value_enum, default_value_t = BasisArg::Exact)]
    pub basis: BasisArg,
    #[arg(long, default_value = "spectrum.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GateArgs {
    #[arg(long)]
    pub spectrum: PathBuf,
    #[arg(long)]
    pub pulse: PathBuf,
    /// Also run the exact propagator, starting from this many steps.
    #[arg(long)]
    pub oracle: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub spectrum: PathBuf,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long = "K")]
    pub harmonics: usize,
    #[arg(long, conflicts_with = "budget")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub align_phase: bool,
    #[arg(long)]
    pub allow_nonunitary: bool,
    #[arg(long)]
    pub oracle: Option<usize>,
    /// Log-spaced multiplier grid for the Pareto table.
    #[arg(long, default_value_t = 1e-6)]
    pub sweep_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub sweep_max: f64,
    #[arg(long, default_value_t = 10)]
    pub sweep_points: usize,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Choi matrix JSON (matrix schema with d_in, d_out).
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub spectrum: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub anc_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub anc_freq: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub coupling: f64,
    /// Ancilla basis state the ancilla starts in.
    #[arg(long, default_value_t = 0)]
    pub anc_level: usize,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long = "K")]
    pub harmonics: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 400_000)]
    pub max_evals: usize,
}

#[derive(Debug, Args)]
pub struct FilterSimArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 5.0)]
    pub horizon: f64,
    /// Dissipator to monitor (default: the model's `measured`).
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long, default_value = "trajectory.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitTarget {
    /// Fit the filter's estimate (the record is all that is observed).
    Filter,
    /// Fit the true states stored in the trajectory file (diagnostic).
    Truth,
}

#[derive(Debug, Args)]
pub struct FilterFitArgs {
    /// Model family; parameters with a `range` are fitted.
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory JSON from `filter-sim`, or a `t,dY` CSV.
    #[arg(long)]
    pub record: PathBuf,
    /// Model used by the filter (default: the family at its nominal values).
    #[arg(long)]
    pub filter_model: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long, value_enum, default_value_t = FitTarget::Filter)]
    pub against: FitTarget,
    #[arg(long, default_value_t = 20)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value = "fit.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SusyArgs {
    /// Coefficients of W(q), ascending powers, e.g. "0,0,0.5".
    #[arg(long, allow_hyphen_values = true)]
    pub superpotential: String,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = crate::susy_toy::DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    /// Number of levels written to the spectra table.
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
}

#[derive(Debug, Args)]
pub struct VevArgs {
    /// JSON tensor `{shape: [r, s, k], data: [...]}`.
    #[arg(long)]
    pub d2: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub pvev: String,
    #[arg(long, allow_hyphen_values = true)]
    pub qvev: String,
    /// For a single mode, also diagonalize (P^2+Q^2)/2 + c1 Q^3 + c2 Q^4 + a Q at this cutoff.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c2: f64,
}

#[derive(Debug, Args, Clone)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 5.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 1.95)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 20)]
    pub grid_points: usize,
}

impl Default for DemoArgs {
    fn default() -> Self {
        DemoArgs { gamma: 0.7, omega: 1.0, eta: 0.1, dt: 1e-3, horizon: 5.0, gamma_min: 0.05, gamma_max: 1.95, grid_points: 20 }
    }
}

/// Parse a flat `key = value` file into flags. `#` starts a comment;
/// `true`/`false` toggle boolean flags.
pub fn config_flags(text: &str) -> Result<Vec<String>> {
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => {
                flags.push(format!("--{key}"));
                flags.push(value.to_string());
            }
        }
    }
    Ok(flags)
}

/// Splice flags from `--config FILE` right after the subcommand so explicit
/// flags, which come later, override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let flags = config_flags(&text)?;
    let names = ["spectrum", "gate", "synth", "channel", "filter-sim", "filter-fit", "susy", "vev", "demo"];
    let Some(pos) = args.iter().skip(1).position(|a| names.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(args);
    };
    let mut out: Vec<OsString> = args[..pos + 2].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend_from_slice(&args[pos + 2..]);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Effective argument vector after config expansion.
    pub args: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
}

/// Files written by a run, relative to the output directory.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub artifacts: Vec<PathBuf>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
}

struct Ctx<'a> {
    out_dir: &'a Path,
    output: RunOutput,
}

impl Ctx<'_> {
    fn path(&self, name: &Path) -> PathBuf {
        if name.is_absolute() {
            name.to_path_buf()
        } else {
            self.out_dir.join(name)
        }
    }

    fn write(&mut self, name: impl AsRef<Path>, contents: &str) -> Result<()> {
        let path = self.path(name.as_ref());
        fs::write(&path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        self.output.artifacts.push(name.as_ref().to_path_buf());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: impl AsRef<Path>, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        self.output.inputs.push(InputDigest { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) });
        String::from_utf8(bytes).map_err(|_| Error::invalid(format!("{} is not UTF-8", path.display())))
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&mut self, path: &Path) -> Result<T> {
        let text = self.read(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn read_matrix(&mut self, path: &Path) -> Result<(ComplexMatrix, MatrixRecord)> {
        let rec: MatrixRecord = self.read_json(path)?;
        Ok((rec.to_matrix()?, rec))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    parse_coefficients(s)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(vec![]);
    }
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::invalid("sweep range must satisfy 0 < min <= max"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

fn load_spectrum(ctx: &mut Ctx, path: &Path) -> Result<Spectrum> {
    let spec: Spectrum = ctx.read_json(path)?;
    spec.validate()?;
    Ok(spec)
}

fn run_spectrum(ctx: &mut Ctx, a: &SpectrumArgs) -> Result<()> {
    let spec = match a.basis {
        BasisArg::Exact => anharmonic_spectrum(a.c1, a.c2, a.dim, a.raw_dim)?,
        BasisArg::Pt => perturbative_spectrum(a.c1, a.c2, a.dim, a.raw_dim)?,
    };
    let basis = if a.basis == BasisArg::Exact { Basis::Exact } else { Basis::Pt };
    info!("spectrum: {} kept of {} ({basis:?} basis)", spec.kept(), spec.cutoff_raw);
    ctx.write_json(&a.out, &spec)?;
    let rows: Vec<Vec<f64>> = spec.energy_table().into_iter().map(|(n, e)| vec![n as f64, e]).collect();
    ctx.write("energies.csv", &csv_table(&["n", "energy"], &rows))
}

#[derive(Debug, Serialize)]
struct GateReport {
    row_norm_defect: f64,
    unitary_defect: f64,
    oracle_steps: Option<usize>,
    oracle_distance: Option<f64>,
}

fn run_gate(ctx: &mut Ctx, a: &GateArgs) -> Result<()> {
    let spec = load_spectrum(ctx, &a.spectrum)?;
    let pulse: ControlPulse = ctx.read_json(&a.pulse)?;
    pulse.validate()?;
    let gate = dyson_gate(&spec, &pulse)?;
    let mut report = GateReport { row_norm_defect: row_norm_defect(&gate), unitary_defect: gate.unitary_defect(), oracle_steps: None, oracle_distance: None };
    if let Some(steps) = a.oracle {
        let out = propagate_oracle(&spec, &pulse, steps.max(1), OracleOptions::default())?;
        report.oracle_steps = Some(out.steps);
        report.oracle_distance = Some((&out.gate - &gate).frobenius());
        ctx.write_json("oracle_gate.json", &MatrixRecord::from_matrix(&out.gate))?;
    }
    ctx.write_json("gate.json", &MatrixRecord::from_matrix(&gate))?;
    ctx.write_json("gate_report.json", &report)
}

fn run_synth(ctx: &mut Ctx, a: &SynthArgs) -> Result<()> {
    let spec = load_spectrum(ctx, &a.spectrum)?;
    let (target, _) = ctx.read_matrix(&a.target)?;
    let constraint = match (a.lambda, a.budget) {
        (_, Some(e)) => EnergyConstraint::Budget(e),
        (Some(l), None) => EnergyConstraint::Penalty(l),
        (None, None) => EnergyConstraint::Penalty(0.0),
    };
    let mut prob = SynthesisProblem::new(target, spec, a.horizon, a.harmonics, constraint);
    prob.align_phase = a.align_phase;
    prob.allow_nonunitary = a.allow_nonunitary;
    prob.oracle_steps = a.oracle;
    let report = synthesize(&prob)?;
    info!("synth: residual {:.3e}, fidelity {:.6}, energy {:.4e}", report.residual, report.fidelity, report.energy);
    ctx.write_json("synth_report.json", &report)?;
    ctx.write_json("pulse.json", &report.pulse)?;
    prob.oracle_steps = None;
    let grid = log_grid(a.sweep_min, a.sweep_max, a.sweep_points)?;
    let rows: Vec<Vec<f64>> = pareto_rows(&sweep(&prob, &grid)?).iter().map(|r| r.to_vec()).collect();
    ctx.write("pareto.csv", &csv_table(&["lambda", "energy", "residual", "fidelity"], &rows))
}

fn run_channel(ctx: &mut Ctx, a: &ChannelArgs) -> Result<()> {
    let spec = load_spectrum(ctx, &a.spectrum)?;
    let (target, rec) = ctx.read_matrix(&a.target)?;
    let d = spec.kept();
    if rec.d_in.is_some_and(|x| x != d) || rec.d_out.is_some_and(|x| x != d) {
        return Err(Error::DimensionMismatch { context: "target choi", expected: format!("d_in = d_out = {d}"), found: format!("{:?}/{:?}", rec.d_in, rec.d_out) });
    }
    if a.anc_level >= a.anc_dim {
        return Err(Error::invalid("anc-level must be below anc-dim"));
    }
    let joint = JointSystem::new(&spec, a.anc_dim, a.anc_freq, a.coupling)?;
    let anc = basis_vector(a.anc_dim, a.anc_level);
    let opts = DescentOptions { max_evals: a.max_evals, ..DescentOptions::default() };
    let report = synthesize_channel(&target, &joint, &anc, a.horizon, a.harmonics, a.lambda, opts)?;
    let realized = realized_channel(&joint, &report.pulse, &anc)?;
    ctx.write_json("channel_report.json", &report)?;
    ctx.write_json("pulse.json", &report.pulse)?;
    ctx.write_json("realized_choi.json", &choi_record(&realized.choi(), d, d))
}

fn load_model(ctx: &mut Ctx, path: &Path) -> Result<LindbladModel> {
    let model: LindbladModel = ctx.read_json(path)?;
    model.validate()?;
    Ok(model)
}

fn measured_name(model: &LindbladModel, flag: &Option<String>) -> Result<String> {
    flag.clone()
        .or_else(|| model.measured.clone())
        .ok_or_else(|| Error::invalid("no monitored dissipator: pass --measure or set `measured` in the model"))
}

fn population_rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| std::iter::once(t).chain((0..s.nrows()).map(|k| s[(k, k)].re)).collect())
        .collect()
}

fn population_header(d: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain((0..d).map(|k| format!("p{k}"))).collect()
}

fn run_filter_sim(ctx: &mut Ctx, a: &FilterSimArgs, seed: u64) -> Result<()> {
    let model = load_model(ctx, &a.model)?;
    let meas = measured_name(&model, &a.measure)?;
    let rho0 = model.rho0.clone().unwrap_or_else(|| mixed_state(model.dim()));
    let times = uniform_times(a.horizon, a.dt)?;
    let traj = sme_simulate(&model, &meas, a.eta, &rho0, &times, seed)?;
    if traj.clipped > 0.0 {
        warn!("positivity clipping removed total weight {:.3e}", traj.clipped);
    }
    ctx.write_json(&a.out, &traj)?;
    let rec: Vec<Vec<f64>> = traj.record_rows().into_iter().map(|(t, dy)| vec![t, dy]).collect();
    ctx.write("record.csv", &csv_table(&["t", "dY"], &rec))?;
    let header = population_header(model.dim());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.write("populations.csv", &csv_table(&header, &population_rows(&traj)))
}

fn read_record(ctx: &mut Ctx, path: &Path) -> Result<(Vec<f64>, Vec<f64>, Option<Trajectory>)> {
    let text = ctx.read(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        let mut times = vec![0.0];
        let mut record = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let mut cells = line.split(',').map(|c| c.trim().parse::<f64>());
            match (cells.next(), cells.next()) {
                (Some(Ok(t)), Some(Ok(dy))) => {
                    times.push(t);
                    record.push(dy);
                }
                _ => return Err(Error::invalid(format!("{}: bad row {}", path.display(), i + 1))),
            }
        }
        Ok((times, record, None))
    } else {
        let traj: Trajectory = serde_json::from_str(&text)?;
        let record = traj.record.clone().ok_or_else(|| Error::invalid("trajectory has no measurement record"))?;
        Ok((traj.times.clone(), record, Some(traj)))
    }
}

fn run_filter_fit(ctx: &mut Ctx, a: &FilterFitArgs) -> Result<()> {
    let family = load_model(ctx, &a.model)?;
    let filter_model = match &a.filter_model {
        Some(p) => load_model(ctx, p)?,
        None => family.clone(),
    };
    let meas = measured_name(&filter_model, &a.measure)?;
    let (times, record, truth) = read_record(ctx, &a.record)?;
    let rho0 = filter_model.rho0.clone().unwrap_or_else(|| mixed_state(filter_model.dim()));
    let est = match a.against {
        FitTarget::Filter => filter_estimate(&filter_model, &record, &meas, a.eta, &rho0, &times)?,
        FitTarget::Truth => truth.ok_or_else(|| Error::invalid("--against truth needs a trajectory JSON with states"))?,
    };
    let opts = FitOptions { grid_points: a.grid_points, tol: a.tol, ..FitOptions::default() };
    let fit = fit_parameters(&est, &family, opts)?;
    let fitted = lindblad_evolve(&fit.fitted_model(&family)?, &est.states[0], &est.times)?;
    write_fit_artifacts(ctx, &a.out, &fit, &est, &fitted)
}

fn write_fit_artifacts(ctx: &mut Ctx, out: &Path, fit: &FitResult, est: &Trajectory, fitted: &Trajectory) -> Result<()> {
    ctx.write_json(out, fit)?;
    let mut header: Vec<String> = fit.names.clone();
    header.push("cost".into());
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = fit.curve.iter().map(|p| p.theta.iter().copied().chain([p.cost]).collect()).collect();
    ctx.write("cost_curve.csv", &csv_table(&header_ref, &rows))?;
    let rows: Vec<Vec<f64>> = est
        .times
        .iter()
        .zip(est.states.iter().zip(&fitted.states))
        .map(|(&t, (e, f))| vec![t, e[(0, 0)].re, f[(0, 0)].re, frobenius_gap(e, f)])
        .collect();
    ctx.write("comparison.csv", &csv_table(&["t", "p0_estimate", "p0_fitted", "gap"], &rows))?;
    let svg = line_plot(
        "ground population",
        "t",
        "p0",
        &[
            Series::new("estimate", rows.iter().map(|r| (r[0], r[1])).collect()),
            Series::new("fitted model", rows.iter().map(|r| (r[0], r[2])).collect()),
        ],
    )?;
    ctx.write("comparison.svg", &svg)
}

#[derive(Debug, Serialize)]
struct SusyReport {
    w_coeffs: Vec<f64>,
    cutoff: usize,
    cutoff_drift: f64,
    index: crate::susy_toy::IndexReport,
    pairing_defect: f64,
}

fn run_susy(ctx: &mut Ctx, a: &SusyArgs) -> Result<()> {
    let w = parse_list(&a.superpotential)?;
    let pair = susy_pair(&w, a.dim)?;
    let index = witten_index(&pair, a.zero_tol)?;
    let report = SusyReport { w_coeffs: pair.w_coeffs.clone(), cutoff: pair.cutoff, cutoff_drift: pair.cutoff_drift, pairing_defect: pair.pairing_defect(a.zero_tol, 5), index };
    ctx.write_json("susy_report.json", &report)?;
    let (plus, minus) = pair.spectra();
    let rows: Vec<Vec<f64>> = (0..a.levels.min(plus.len())).map(|n| vec![n as f64, minus[n], plus[n]]).collect();
    ctx.write("susy_spectra.csv", &csv_table(&["n", "h_minus", "h_plus"], &rows))
}

#[derive(Debug, Serialize)]
struct VevReport {
    a: Vec<f64>,
    energies: Option<Vec<f64>>,
}

fn run_vev(ctx: &mut Ctx, a: &VevArgs) -> Result<()> {
    let d2: Tensor = ctx.read_json(&a.d2)?;
    let v = VevControl { d2, p_vev: parse_list(&a.pvev)?, q_vev: parse_list(&a.qvev)? };
    let coeffs = vev_control(&v)?;
    let energies = match (a.dim, coeffs.as_slice()) {
        (Some(m), [single]) => {
            let h = effective_hamiltonian(&GaugeCoefficients::single_mode(a.c1, a.c2, *single), m)?;
            Some(crate::matrix::eigvalsh(&h).into_iter().take(10).collect())
        }
        (Some(_), _) => {
            warn!("--dim ignored: effective spectrum is only reported for a single mode");
            None
        }
        (None, _) => None,
    };
    ctx.write_json("vev.json", &VevReport { a: coeffs, energies })
}

/// Everything the demo produces.
#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub truth: Trajectory,
    pub estimate: Trajectory,
    pub fit: FitResult,
    pub fitted: Trajectory,
    /// Final-state gap between the estimate and the fitted model.
    pub fitted_gap: f64,
    /// Same gap for the model at the two ends of the parameter range.
    pub extreme_gaps: [f64; 2],
}

/// Simulate a monitored driven, damped qubit, filter its record, fit the
/// decay rate to the filter estimate and evolve the fitted model.
///
/// The filter runs with the family at its nominal rate `args.gamma`.
pub fn demo_pipeline(args: &DemoArgs, seed: u64) -> Result<DemoOutcome> {
    let truth_model = LindbladModel::driven_damped_qubit(args.omega, args.gamma);
    let rho0 = truth_model.rho0.clone().unwrap();
    let times = uniform_times(args.horizon, args.dt)?;
    let truth = sme_simulate(&truth_model, "gamma", args.eta, &rho0, &times, seed)?;
    let estimate = filter_estimate(&truth_model, truth.record.as_ref().unwrap(), "gamma", args.eta, &rho0, &times)?;
    let mut family = truth_model.clone();
    family.dissipators[0].range = Some([args.gamma_min, args.gamma_max]);
    let fit = fit_parameters(&estimate, &family, FitOptions { grid_points: args.grid_points, tol: 1e-6, ..FitOptions::default() })?;
    let fitted = lindblad_evolve(&fit.fitted_model(&family)?, &rho0, &times)?;
    let last = |t: &Trajectory| t.final_state().cloned().unwrap();
    let fitted_gap = frobenius_gap(&last(&estimate), &last(&fitted));
    let extreme = |g: f64| -> Result<f64> {
        let m = family.with_parameter(1, g)?;
        Ok(frobenius_gap(&last(&estimate), &last(&lindblad_evolve(&m, &rho0, &times)?)))
    };
    let extreme_gaps = [extreme(args.gamma_min)?, extreme(args.gamma_max)?];
    Ok(DemoOutcome { truth, estimate, fit, fitted, fitted_gap, extreme_gaps })
}

#[derive(Debug, Serialize)]
struct DemoReport {
    gamma_true: f64,
    gamma_fit: f64,
    relative_error: f64,
    fit_cost: f64,
    fitted_gap: f64,
    extreme_gaps: [f64; 2],
}

fn run_demo(ctx: &mut Ctx, a: &DemoArgs, seed: u64) -> Result<()> {
    let out = demo_pipeline(a, seed)?;
    let gamma_fit = out.fit.theta[0];
    ctx.write_json(
        "demo_report.json",
        &DemoReport {
            gamma_true: a.gamma,
            gamma_fit,
            relative_error: (gamma_fit - a.gamma).abs() / a.gamma,
            fit_cost: out.fit.cost,
            fitted_gap: out.fitted_gap,
            extreme_gaps: out.extreme_gaps,
        },
    )?;
    let rows: Vec<Vec<f64>> = out
        .truth
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| vec![t, out.truth.states[k][(0, 0)].re, out.estimate.states[k][(0, 0)].re, out.fitted.states[k][(0, 0)].re])
        .collect();
    ctx.write("demo_comparison.csv", &csv_table(&["t", "p0_true", "p0_filter", "p0_fitted"], &rows))?;
    let svg = line_plot(
        "ground population: truth, filter, fitted model",
        "t",
        "p0",
        &[
            Series::new("truth", rows.iter().map(|r| (r[0], r[1])).collect()),
            Series::new("filter", rows.iter().map(|r| (r[0], r[2])).collect()),
            Series::new("fitted", rows.iter().map(|r| (r[0], r[3])).collect()),
        ],
    )?;
    ctx.write("demo.svg", &svg)?;
    ctx.write_json("demo_trajectory.json", &out.truth)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum(_) => "spectrum",
        Command::Gate(_) => "gate",
        Command::Synth(_) => "synth",
        Command::Channel(_) => "channel",
        Command::FilterSim(_) => "filter-sim",
        Command::FilterFit(_) => "filter-fit",
        Command::Susy(_) => "susy",
        Command::Vev(_) => "vev",
        Command::Demo(_) => "demo",
    }
}

/// Execute a parsed command and write its manifest.
pub fn run(cli: &Cli, argv: &[String]) -> Result<RunOutput> {
    let started = Instant::now();
    fs::create_dir_all(&cli.out_dir).map_err(|source| Error::Io { path: cli.out_dir.display().to_string(), source })?;
    let mut ctx = Ctx { out_dir: &cli.out_dir, output: RunOutput::default() };
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Spectrum(a) => run_spectrum(&mut ctx, a)?,
        Command::Gate(a) => run_gate(&mut ctx, a)?,
        Command::Synth(a) => run_synth(&mut ctx, a)?,
        Command::Channel(a) => run_channel(&mut ctx, a)?,
        Command::FilterSim(a) => {
            ctx.output.seed = Some(seed);
            run_filter_sim(&mut ctx, a, seed)?
        }
        Command::FilterFit(a) => run_filter_fit(&mut ctx, a)?,
        Command::Susy(a) => run_susy(&mut ctx, a)?,
        Command::Vev(a) => run_vev(&mut ctx, a)?,
        Command::Demo(a) => {
            ctx.output.seed = Some(seed);
            run_demo(&mut ctx, a, seed)?
        }
    }
    let name = command_name(&cli.command);
    let manifest = Manifest {
        tool: "susygate".into(),
        version: VERSION.into(),
        command: name.into(),
        args: argv.to_vec(),
        inputs: ctx.output.inputs.clone(),
        seed: ctx.output.seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        artifacts: ctx.output.artifacts.iter().map(|p| p.display().to_string()).collect(),
    };
    ctx.write_json(format!("{name}.manifest.json"), &manifest)?;
    Ok(ctx.output)
}

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
    }
}

/// Parse, run and report; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let expanded = match expand_config(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(&expanded) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let argv: Vec<String> = expanded.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.jobs {
        Some(0) => Err(Error::invalid("--jobs must be >= 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli, &argv)),
            Err(e) => Err(Error::invalid(format!("cannot start {n} workers: {e}"))),
        },
        None => run(&cli, &argv),
    };
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
