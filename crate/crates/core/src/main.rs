use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sei_core::analysis::{critical_scale, solve_endemic, threshold_scan, ThresholdScan};
use sei_core::output;
use sei_core::report::verify;
use sei_core::scenario::{Scenario, SweepSpec};
use sei_core::simulator::{SimOptions, Simulator};
use sei_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Range searched for the critical incidence scale when no sweep is given.
const CRITICAL_SEARCH: (f64, f64) = (1e-9, 1e9);

#[derive(Parser)]
#[command(name = "sei", version, about = "Infection-age SEI model: simulate, analyze, verify, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scenario and write the trajectory.
    Simulate(Common),
    /// R0, equilibria, and optionally a threshold sweep.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Sweep of the incidence coefficient, `k=lo:hi:n`.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Run the full verification battery.
    Verify(Common),
    /// Threshold sweep with one simulation per point.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sweep: Option<String>,
    },
}

#[derive(Debug)]
enum Failure {
    Model(Error),
    Io(PathBuf, io::Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T, Failure>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T, Failure> {
        self.map_err(|e| Failure::Io(path.to_path_buf(), e))
    }
}

fn init_logging() {
    let level = match std::env::var("SEI_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    if let Some(n) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    let mut sc = Scenario::from_path(&common.scenario)?;
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    fs::create_dir_all(&common.out).at(&common.out)?;
    Ok(sc)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(path.to_path_buf(), e.into()))?;
    text.push('\n');
    fs::write(path, text).at(path)
}

fn simulate(common: &Common) -> Result<(), Failure> {
    let sc = load(common)?;
    let params = sc.params()?;
    let grid = sc.grid()?;
    let sim = Simulator::new(params, grid);
    let opts = SimOptions {
        sample_every: sc.outputs.sample_every,
        snapshot_times: sc.outputs.snapshot_times.clone(),
    };
    let tr = sim.simulate(&sc.initial_data(&grid)?, &opts)?;
    let path = common.out.join("trajectory.csv");
    output::write_trajectory_csv(&path, &tr).at(&path)?;
    for (t, profile) in &tr.snapshots {
        let path = output::profile_path(&common.out, "trajectory", *t);
        output::write_profile_csv(&path, profile, &grid).at(&path)?;
    }
    if sc.outputs.chart {
        let path = common.out.join("trajectory.svg");
        let title = sc.name.as_deref().unwrap_or("trajectory");
        fs::write(&path, output::trajectory_chart(&tr, title)).at(&path)?;
    }
    if tr.clamp_events > 0 {
        log::warn!("{} negative undershoots were clamped to zero", tr.clamp_events);
    }
    log::info!("wrote {} samples to {}", tr.samples.len(), common.out.display());
    Ok(())
}

fn sweep_spec(sc: &Scenario, flag: Option<&str>) -> Result<Option<SweepSpec>, Failure> {
    match flag {
        Some(text) => Ok(Some(SweepSpec::parse(text)?)),
        None => Ok(sc.sweep.clone()),
    }
}

fn run_scan(sc: &Scenario, spec: &SweepSpec, out: &Path) -> Result<ThresholdScan, Failure> {
    let params = sc.params()?;
    let grid = sc.grid()?;
    let scan = threshold_scan(&params, &grid, &sc.sweep_scales(spec)?)?;
    let path = out.join("sweep.csv");
    output::write_sweep_csv(&path, &scan).at(&path)?;
    Ok(scan)
}

fn analyze(common: &Common, sweep: Option<&str>) -> Result<(), Failure> {
    let sc = load(common)?;
    let params = sc.params()?;
    let grid = sc.grid()?;
    let rep = solve_endemic(&params, &grid)?;
    let critical = match sweep_spec(&sc, sweep)? {
        Some(spec) => run_scan(&sc, &spec, &common.out)?.critical_scale,
        None => critical_scale(&params, &grid, CRITICAL_SEARCH.0, CRITICAL_SEARCH.1)?,
    };
    let doc = json!({
        "R0": rep.r0,
        "D_bar": rep.d_bar,
        "K": rep.kernel_moment,
        "endemic": rep.endemic,
        "reason": rep.reason,
        "sign_changes": rep.sign_changes,
        "solver_iterations": rep.solver_iterations,
        "critical_scale": critical,
        "critical_k": critical.map(|c| c * sc.incidence.k()),
    });
    write_json(&common.out.join("analysis.json"), &doc)
}

#[derive(Serialize)]
struct SweepRun {
    scale: f64,
    k: f64,
    #[serde(rename = "R0")]
    r0: f64,
    endemic: bool,
    #[serde(rename = "E_end")]
    e_end: f64,
    /// `E(t_end) ≤ 1e-6 N̄`.
    extinct: bool,
}

/// Relative level of `E(t_end)` below which a run counts as extinct.
const EXTINCTION_LEVEL: f64 = 1e-6;

fn sweep(common: &Common, flag: Option<&str>) -> Result<(), Failure> {
    let sc = load(common)?;
    let spec = sweep_spec(&sc, flag)?
        .ok_or_else(|| Error::Config("sweep needs a 'sweep' block in the scenario or --sweep k=lo:hi:n".into()))?;
    let scan = run_scan(&sc, &spec, &common.out)?;
    let params = sc.params()?;
    let grid = sc.grid()?;
    let init = sc.initial_data(&grid)?;
    let n_bar = params.n_bar();
    let k = sc.incidence.k();
    let runs = scan
        .points
        .par_iter()
        .map(|p| {
            let sim = Simulator::new(params.with_incidence_scale(p.scale), grid);
            let tr = sim.simulate(&init, &SimOptions::every(grid.n_steps.max(1)))?;
            let e_end = tr.last().e;
            Ok(SweepRun {
                scale: p.scale,
                k: p.scale * k,
                r0: p.r0,
                endemic: p.endemic.is_some(),
                e_end,
                extinct: e_end <= EXTINCTION_LEVEL * n_bar,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let doc = json!({
        "critical_scale": scan.critical_scale,
        "critical_k": scan.critical_scale.map(|c| c * k),
        "runs": runs,
    });
    write_json(&common.out.join("sweep.json"), &doc)
}

fn verify_cmd(common: &Common) -> Result<(), Failure> {
    let sc = load(common)?;
    let v = verify(&sc)?;
    let path = common.out.join("trajectory.csv");
    output::write_trajectory_csv(&path, &v.trajectory).at(&path)?;
    if let Some(d) = &v.report.descent {
        let path = common.out.join("descent.csv");
        output::write_descent_csv(&path, d).at(&path)?;
    }
    write_json(&common.out.join("verification.json"), &v.report)?;
    for verdict in &v.report.verdicts {
        log::info!("{}: {:?}", verdict.theorem, verdict.verdict);
    }
    if v.report.passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Analyze { common, sweep } => analyze(common, sweep.as_deref()),
        Command::Verify(c) => verify_cmd(c),
        Command::Sweep { common, sweep: s } => sweep(common, s.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { EXIT_NUMERIC } else { EXIT_CONFIG })
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed; see verification.json");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
