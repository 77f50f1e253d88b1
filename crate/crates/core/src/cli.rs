//! Command-line front end. Data goes to files; diagnostics to stderr.
//!
//! Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or
//! validation error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, ValidationIssue};
use crate::io::{
    format_value, parse_config_with, read_series, write_series, KernelSection, Overrides, RunConfig, SeriesTable,
};
use crate::kernels::{
    kelvin_creep, kelvin_relaxation, maxwell_creep, maxwell_relaxation, voigt_creep, voigt_relaxation, KelvinParams,
    MaxwellParams, VoigtParams,
};
use crate::network::simulate;
use crate::protocols::{
    fit_exponential_law, fit_relaxation_spectrum, hysteresis_sweep, run_protocol, ProtocolSpec, TestOutcome,
};

#[derive(Debug, Parser)]
#[command(name = "tissue-qlv", version, about = "Quasi-linear viscoelastic tissue models and virtual tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Constant-rate tensile test.
    Tensile(RunArgs),
    /// Creep under constant nominal stress.
    Creep(RunArgs),
    /// Stress relaxation after a stretch step.
    Relax(RunArgs),
    /// Sinusoidal test run to steady state.
    Cyclic(RunArgs),
    /// Steady-state hysteresis over log-spaced frequencies.
    Sweep(RunArgs),
    /// Time integration of a spring-mass network.
    Simulate(RunArgs),
    /// Fit a law or a relaxation spectrum to a CSV record.
    Fit(FitArgs),
    /// Tabulate a relaxation kernel on a log-spaced time grid.
    Kernels(KernelArgs),
    /// Check a configuration and print its effective form.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; defaults to `output.path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Seed for output noise.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitTarget {
    /// `(C/B)(e^{B(λ−1)} − 1)` from `stretch` and `stress` columns.
    Exponential,
    /// Prony series from a normalized relaxation column.
    Relaxation,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with a header; first column `time`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    law: FitTarget,
    /// Column holding the relaxation values (default: second column).
    #[arg(long)]
    column: Option<String>,
    /// Number of Prony terms.
    #[arg(long, default_value_t = 16)]
    terms: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 17)]
    precision: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Take the kernel from `model.kernel` of a run configuration.
    #[arg(long, conflicts_with = "kind")]
    config: Option<PathBuf>,
    /// elastic, maxwell, voigt, kelvin, prony or fung.
    #[arg(long, required_unless_present = "config")]
    kind: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    e_r: Option<f64>,
    #[arg(long)]
    tau_eps: Option<f64>,
    #[arg(long)]
    tau_sigma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    q1: Option<f64>,
    #[arg(long)]
    q2: Option<f64>,
    #[arg(long)]
    equilibrium: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    amplitudes: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    frequencies: Option<Vec<f64>>,
    /// First time of the grid (default 1e-3 × shortest kernel time).
    #[arg(long)]
    from: Option<f64>,
    /// Last time of the grid (default 1e3 × longest kernel time).
    #[arg(long)]
    to: Option<f64>,
    #[arg(long, default_value_t = 20)]
    points_per_decade: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 17)]
    precision: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// 2 for anything the user can fix in their input, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Parse { .. } | Error::InvalidParameter { .. } | Error::Configuration(_) => 2,
        _ => 1,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Tensile(a) => run_single(&a, "tensile"),
        Command::Creep(a) => run_single(&a, "creep"),
        Command::Relax(a) => run_single(&a, "relaxation"),
        Command::Cyclic(a) => run_single(&a, "cyclic"),
        Command::Sweep(a) => run_sweep(&a),
        Command::Simulate(a) => run_simulate(&a),
        Command::Fit(a) => run_fit(&a),
        Command::Kernels(a) => run_kernels(&a),
        Command::Validate(a) => {
            let cfg = load(&a.config, &Overrides { dt: a.dt, duration: a.duration, seed: a.seed })?;
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config_with(&text, &path.display().to_string(), overrides)
}

fn load_run(a: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let cfg = load(&a.config, &Overrides { dt: a.dt, duration: a.duration, seed: a.seed })?;
    let out = match (&a.out, &cfg.output.path) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Err(Error::Validation(vec![ValidationIssue {
                path: "output.path".into(),
                message: "no output file: pass --out or set output.path".into(),
            }]))
        }
    };
    Ok((cfg, out))
}

fn mismatch(expected: &str, found: &str) -> Error {
    Error::Validation(vec![ValidationIssue {
        path: "protocol.kind".into(),
        message: format!("this command runs `{expected}` protocols, the config has `{found}`"),
    }])
}

/// `dir/name.report.csv` next to `dir/name.csv`.
fn report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.report.csv"))
}

fn write_report(out: &Path, metrics: &[(&str, f64)], precision: usize) -> Result<()> {
    let mut text = String::from("metric,value\n");
    for (name, v) in metrics {
        text.push_str(&format!("{name},{}\n", format_value(*v, precision)?));
    }
    let path = report_path(out);
    fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

/// Multiplies every value by `1 + noise·u`, `u` uniform on `[−1, 1]`.
fn add_noise(values: &mut [f64], noise: f64, seed: u64) {
    if noise == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in values {
        *v *= 1.0 + noise * (2.0 * rng.random::<f64>() - 1.0);
    }
}

fn run_single(a: &RunArgs, command_kind: &str) -> Result<()> {
    let (cfg, out) = load_run(a)?;
    let kind = cfg.protocol_kind()?;
    if kind != command_kind {
        return Err(mismatch(command_kind, kind));
    }
    let model = cfg.qlv_model()?;
    let spec = cfg.protocol_spec()?;
    let TestOutcome { mut series, report } = run_protocol(&spec, &model)?;
    add_noise(&mut series.stress, cfg.output.noise, cfg.output.seed);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }

    let mut columns = vec![
        ("time".to_string(), series.time.clone()),
        ("stretch".to_string(), series.stretch.clone()),
        (series.measure.name().to_string(), series.strain.clone()),
        ("stress".to_string(), series.stress.clone()),
    ];
    match spec {
        ProtocolSpec::Creep(_) => {
            columns.push(("strain_rate".into(), report.creep_rate.iter().map(|r| r.1).collect()));
        }
        ProtocolSpec::Relaxation(_) => {
            columns.push(("stress_rate".into(), report.relaxation_rate.iter().map(|r| r.1).collect()));
            let g = series.time.iter().map(|&t| model.relaxation().value(t)).collect::<Result<Vec<_>>>()?;
            columns.push(("relaxation".into(), g));
        }
        _ => {}
    }
    let table = SeriesTable::from_columns(columns)?;
    write_series(&table, &out, cfg.output.precision)?;
    write_report(&out, &report.metrics(), cfg.output.precision)
}

fn run_sweep(a: &RunArgs) -> Result<()> {
    let (cfg, out) = load_run(a)?;
    let model = cfg.qlv_model()?;
    let (base, frequencies) = cfg.sweep()?;
    let points = hysteresis_sweep(&base, &model, &frequencies)?;
    let mut table = SeriesTable::new(["frequency", "hysteresis", "cycles", "steady_state"]);
    for p in &points {
        if !p.steady_state {
            eprintln!("warning: hysteresis did not settle at frequency {}", p.frequency);
        }
        table.push_row(vec![p.frequency, p.hysteresis, p.cycles as f64, if p.steady_state { 1.0 } else { 0.0 }])?;
    }
    write_series(&table, &out, cfg.output.precision)
}

fn run_simulate(a: &RunArgs) -> Result<()> {
    let (cfg, out) = load_run(a)?;
    let kind = cfg.protocol_kind()?;
    if kind != "simulate" {
        return Err(mismatch("simulate", kind));
    }
    let run = cfg.network_run()?;
    let sim = simulate(&run.system, &run.initial, run.duration, run.dt, cfg.output.stride)?;
    let n = run.system.dofs();
    let mut columns = vec!["time".to_string()];
    columns.extend((0..n).map(|i| format!("displacement_{i}")));
    columns.extend((0..n).map(|i| format!("velocity_{i}")));
    columns.extend(["kinetic", "elastic", "external_work", "dissipation"].map(String::from));
    let mut table = SeriesTable::new(columns);
    for s in &sim.samples {
        let mut row = vec![s.time];
        row.extend(s.q.iter());
        row.extend(s.v.iter());
        row.extend([s.energy.kinetic, s.energy.elastic, s.energy.external_work, s.energy.dissipation]);
        table.push_row(row)?;
    }
    write_series(&table, &out, cfg.output.precision)?;
    let e = &sim.final_energy;
    let metrics = [
        ("steps", sim.steps as f64),
        ("kinetic", e.kinetic),
        ("elastic", e.elastic),
        ("external_work", e.external_work),
        ("dissipation", e.dissipation),
        ("balance", e.balance()),
    ];
    write_report(&out, &metrics, cfg.output.precision)
}

fn check_precision(p: usize) -> Result<()> {
    if !(1..=17).contains(&p) {
        return Err(Error::invalid("precision", p as f64, "must be in 1..=17"));
    }
    Ok(())
}

fn run_fit(a: &FitArgs) -> Result<()> {
    check_precision(a.precision)?;
    let data = read_series(&a.input)?;
    let missing = |name: &str| Error::Domain(format!("{}: no `{name}` column", a.input.display()));
    match a.law {
        FitTarget::Exponential => {
            let stretch = match data.column("stretch") {
                Some(s) => s,
                None => data
                    .column("stretch_minus_one")
                    .map(|x| x.iter().map(|v| 1.0 + v).collect())
                    .ok_or_else(|| missing("stretch"))?,
            };
            let stress = data.column("stress").ok_or_else(|| missing("stress"))?;
            let fit = fit_exponential_law(&stretch, &stress)?;
            let metrics = [
                ("b", fit.law.b()),
                ("c", fit.law.c()),
                ("initial_b", fit.initial.0),
                ("initial_c", fit.initial.1),
                ("residual_norm", fit.residual_norm),
                ("iterations", fit.iterations as f64),
                ("converged", if fit.converged { 1.0 } else { 0.0 }),
            ];
            let mut text = String::from("metric,value\n");
            for (name, v) in metrics {
                text.push_str(&format!("{name},{}\n", format_value(v, a.precision)?));
            }
            fs::write(&a.out, text).map_err(|source| Error::Io { path: a.out.clone(), source })
        }
        FitTarget::Relaxation => {
            let name = match &a.column {
                Some(c) => c.clone(),
                None => data.columns().get(1).cloned().ok_or_else(|| missing("value"))?,
            };
            let values = data.column(&name).ok_or_else(|| missing(&name))?;
            let fit = fit_relaxation_spectrum(&data.time(), &values, a.terms)?;
            let mut table = SeriesTable::new(["frequency", "amplitude"]);
            table.push_row(vec![0.0, fit.spectrum.equilibrium()])?;
            for t in fit.spectrum.terms() {
                table.push_row(vec![t.frequency, t.amplitude])?;
            }
            write_series(&table, &a.out, a.precision)?;
            write_report(&a.out, &[("max_error", fit.max_error), ("terms", a.terms as f64)], a.precision)
        }
    }
}

fn run_kernels(a: &KernelArgs) -> Result<()> {
    check_precision(a.precision)?;
    let section = match &a.config {
        Some(path) => {
            let cfg = load(path, &Overrides::default())?;
            let model = cfg.model.ok_or_else(|| {
                Error::Validation(vec![ValidationIssue { path: "model".into(), message: "missing section".into() }])
            })?;
            model.kernel.unwrap_or_else(|| KernelSection { kind: "elastic".into(), ..Default::default() })
        }
        None => KernelSection {
            kind: a.kind.clone().unwrap_or_default(),
            mu: a.mu,
            eta: a.eta,
            e_r: a.e_r,
            tau_eps: a.tau_eps,
            tau_sigma: a.tau_sigma,
            c: a.c,
            q1: a.q1,
            q2: a.q2,
            equilibrium: a.equilibrium,
            amplitudes: a.amplitudes.clone(),
            frequencies: a.frequencies.clone(),
            method: None,
            method_terms: None,
        },
    };
    let g = section.relaxation()?;
    let (lo, hi) = match (a.from, a.to, g.time_range()) {
        (Some(f), Some(t), _) => (f, t),
        (f, t, Some((tmin, tmax))) => (f.unwrap_or(1e-3 * tmin), t.unwrap_or(1e3 * tmax)),
        _ => {
            return Err(Error::Validation(vec![ValidationIssue {
                path: "--from/--to".into(),
                message: "this kernel has no time scale; give both --from and --to".into(),
            }]))
        }
    };
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Validation(vec![ValidationIssue {
            path: "--from/--to".into(),
            message: format!("need 0 < from < to, got [{lo}, {hi}]"),
        }]));
    }
    if a.points_per_decade == 0 {
        return Err(Error::invalid("points_per_decade", 0.0, "must be >= 1"));
    }
    let decades = (hi / lo).log10();
    let count = ((decades * a.points_per_decade as f64).round() as usize).max(1) + 1;
    let times = crate::protocols::log_space(lo, hi, count.max(2))?;

    // absolute creep and relaxation for the classical elements
    type Pair = Box<dyn Fn(f64) -> (f64, f64)>;
    let classical: Option<Pair> = match section.kind.as_str() {
        "maxwell" => {
            let p = MaxwellParams::new(section.mu.unwrap_or(0.0), section.eta.unwrap_or(0.0))?;
            Some(Box::new(move |t| (maxwell_creep(&p, t), maxwell_relaxation(&p, t))))
        }
        "voigt" => {
            let p = VoigtParams::new(section.mu.unwrap_or(0.0), section.eta.unwrap_or(0.0))?;
            Some(Box::new(move |t| (voigt_creep(&p, t), voigt_relaxation(&p, t).regular)))
        }
        "kelvin" => {
            let p = KelvinParams::new(
                section.e_r.unwrap_or(0.0),
                section.tau_eps.unwrap_or(0.0),
                section.tau_sigma.unwrap_or(0.0),
            )?;
            Some(Box::new(move |t| (kelvin_creep(&p, t), kelvin_relaxation(&p, t))))
        }
        _ => None,
    };
    let mut columns = vec!["time", "reduced_relaxation"];
    if classical.is_some() {
        columns.extend(["creep_compliance", "relaxation_modulus"]);
    }
    let mut table = SeriesTable::new(columns);
    for &t in &times {
        let mut row = vec![t, g.value(t)?];
        if let Some(f) = &classical {
            let (j, m) = f(t);
            row.extend([j, m]);
        }
        table.push_row(row)?;
    }
    write_series(&table, &a.out, a.precision)?;
    let mut metrics = vec![("equilibrium", g.equilibrium())];
    if g.impulse() > 0.0 {
        metrics.push(("impulse", g.impulse()));
    }
    write_report(&a.out, &metrics, a.precision)
}
