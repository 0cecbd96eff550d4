//! `pce`: decompose, build, run and profile correlation-function experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pce_core::cartan::{optimize, CartanConfig};
use pce_core::circuit::{build_hadamard_test, build_time_evolution, Basis, Time};
use pce_core::exec::EdOracle;
use pce_core::experiment::{
    compile_pce, first_site_x, run_experiment, time_grid, ExperimentConfig, Mode, BASES,
};
use pce_core::model::{build_model, Couplings, ModelKind, ModelSpec};
use pce_core::report::{emit_report, format_table};
use pce_core::transpile::to_native;

#[derive(Parser)]
#[command(name = "pce", version, about = "Fixed-depth time evolution with parameterized circuit execution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose the model Hamiltonian and print the decomposition as JSON.
    Cartan {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the Hadamard-test circuit batch for a time sweep.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the native-gate form instead of the gate-level form.
        #[arg(long)]
        native: bool,
        /// Directory for circuits.txt plus one binary payload per basis.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline and write the correlation function.
    Correlate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Report directory (CSV to stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile both compile paths and print a table of speedups.
    Profile {
        #[arg(long, value_parser = parse_model, default_value = "tfxy")]
        model: ModelKind,
        /// Comma-separated site counts.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
        sites: Vec<usize>,
        /// Comma-separated batch sizes in time points.
        #[arg(long, value_delimiter = ',', default_value = "50,500")]
        time_points: Vec<usize>,
        #[arg(long, default_value_t = 5.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        /// Directory receiving one report subdirectory per run.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact-diagonalization reference correlation as CSV.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_parser = parse_model, default_value = "tfxy")]
    model: ModelKind,
    #[arg(long, default_value_t = 2)]
    sites: usize,
    /// Draw TFXY couplings at random from this seed.
    #[arg(long)]
    random_couplings: Option<u64>,
    /// Heisenberg exchange constant.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    j: f64,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        let mut spec = ModelSpec::new(self.model, self.sites);
        spec.j = self.j;
        if let Some(seed) = self.random_couplings {
            spec.couplings = Couplings::Random { seed };
        }
        spec
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 50)]
    time_points: usize,
    #[arg(long, default_value_t = 5.0)]
    t_max: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1000)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_mode, default_value = "both")]
    mode: Mode,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: pce_core::PceError| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: pce_core::PceError| e.to_string())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cartan_config(seed: u64) -> CartanConfig {
    CartanConfig { seed, ..CartanConfig::default() }
}

fn cmd_cartan(model: &ModelArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let h = build_model(&model.spec())?;
    let d = optimize(&h, &cartan_config(seed.unwrap_or(0)))?;
    write_or_print(out, &(d.to_json()? + "\n"))
}

fn cmd_evolve(model: &ModelArgs, grid: &GridArgs, seed: u64, native: bool, out: Option<&Path>) -> Result<()> {
    let spec = model.spec();
    let d = optimize(&build_model(&spec)?, &cartan_config(seed))?;
    let op = first_site_x(spec.sites)?;
    let times = time_grid(grid.time_points, grid.t_max);
    let mut text = String::new();
    let mut index = 0;
    for basis in BASES {
        for &t in &times {
            let evolution = build_time_evolution(&d, Time::At(t))?;
            let circuit = build_hadamard_test(&op, &op, &evolution, basis)?;
            let body = if native { to_native(&circuit)?.to_text() } else { circuit.to_text() };
            let label = match basis {
                Basis::Real => "real",
                Basis::Imag => "imag",
            };
            let _ = writeln!(text, "# circuit {index} basis {label} t {t}");
            text.push_str(&body);
            if !body.ends_with('\n') {
                text.push('\n');
            }
            index += 1;
        }
    }
    match out {
        None => print!("{text}"),
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join("circuits.txt"), &text)?;
            for (payload, name) in compile_pce(&d, &op, &times)?.iter().zip(["real.pce", "imag.pce"]) {
                fs::write(dir.join(name), &payload.bytes)?;
            }
        }
    }
    Ok(())
}

fn experiment_config(spec: ModelSpec, grid: &GridArgs, run: &RunArgs) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(spec);
    config.time_points = grid.time_points;
    config.t_max = grid.t_max;
    config.shots = run.shots;
    config.seed = run.seed;
    config.mode = run.mode;
    config.repetitions = run.repetitions;
    config
}

fn cmd_correlate(model: &ModelArgs, grid: &GridArgs, run: &RunArgs, out: Option<&Path>) -> Result<()> {
    let output = run_experiment(&experiment_config(model.spec(), grid, run))?;
    match out {
        None => print!("{}", output.series.to_csv()),
        Some(dir) => {
            for path in emit_report(&output.report, &output.series, dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_profile(
    model: ModelKind,
    sites: &[usize],
    time_points: &[usize],
    t_max: f64,
    shots: u64,
    seed: u64,
    repetitions: usize,
    out: Option<&Path>,
) -> Result<()> {
    if sites.is_empty() || time_points.is_empty() {
        bail!("at least one site count and one batch size are required");
    }
    let mut reports = Vec::new();
    for &points in time_points {
        for &n in sites {
            let grid = GridArgs { time_points: points, t_max };
            let run = RunArgs { shots, seed, mode: Mode::Both, repetitions };
            let output = run_experiment(&experiment_config(ModelSpec::new(model, n), &grid, &run))?;
            if let Some(dir) = out {
                emit_report(&output.report, &output.series, &dir.join(format!("{model}-{n}-{points}")))?;
            }
            reports.push(output.report);
        }
    }
    let table = format_table(&reports);
    print!("{table}");
    if let Some(dir) = out {
        fs::write(dir.join("table.txt"), &table)?;
    }
    Ok(())
}

fn cmd_oracle(model: &ModelArgs, grid: &GridArgs, out: Option<&Path>) -> Result<()> {
    let spec = model.spec();
    let h = build_model(&spec)?;
    let op = first_site_x(spec.sites)?;
    let oracle = EdOracle::new(&h, &op, &op)?;
    let mut csv = String::from("t,re,im\n");
    for t in time_grid(grid.time_points, grid.t_max) {
        let c = oracle.correlation(t);
        let _ = writeln!(csv, "{t},{},{}", c.re, c.im);
    }
    write_or_print(out, &csv)
}

fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var("PCE_WORKERS") {
        let n: usize = v.parse().with_context(|| format!("PCE_WORKERS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("PCE_WORKERS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_workers()?;
    match &cli.command {
        Command::Cartan { model, seed, out } => cmd_cartan(model, *seed, out.as_deref()),
        Command::Evolve { model, grid, seed, native, out } => cmd_evolve(model, grid, *seed, *native, out.as_deref()),
        Command::Correlate { model, grid, run, out } => cmd_correlate(model, grid, run, out.as_deref()),
        Command::Profile { model, sites, time_points, t_max, shots, seed, repetitions, out } => cmd_profile(
            *model,
            sites,
            time_points,
            *t_max,
            *shots,
            *seed,
            *repetitions,
            out.as_deref(),
        ),
        Command::Oracle { model, grid, out } => cmd_oracle(model, grid, out.as_deref()),
    }
}
