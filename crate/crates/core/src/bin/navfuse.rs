use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use navfuse::config::{load_config, RunConfig};
use navfuse::fusion::PipelineMode;
use navfuse::harness::{render_report, run_suite, SuiteConfig, SuiteResult};
use navfuse::sim::ScenarioId;
use navfuse::telemetry::{replay, write_telemetry};
use navfuse::{Error, Result};

const THREADS_ENV: &str = "NAVFUSE_THREADS";

#[derive(Parser)]
#[command(name = "navfuse", version, about = "Depth and lane-steering fusion for nano-UAV corridor flight")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one scenario with one pipeline mode.
    Run(RunArgs),
    /// Fly every scenario with every pipeline mode and print the success table.
    Suite(RunArgs),
    /// Re-verify a telemetry CSV against the pipeline invariants.
    Replay { file: PathBuf },
    /// Print the effective fusion table.
    Lut {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// S1, S2 or S3 (run only).
    #[arg(long)]
    scenario: Option<ScenarioId>,
    /// global, local or fused (run only).
    #[arg(long)]
    mode: Option<PipelineMode>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the report and per-trial telemetry.
    #[arg(long)]
    out: Option<PathBuf>,
    /// ToF noise standard deviation, mm.
    #[arg(long = "noise-sigma")]
    noise_sigma: Option<f64>,
    /// Target forward speed, m/s.
    #[arg(long = "vt")]
    v_t: Option<f64>,
    /// Maximum target yaw rate, deg/s.
    #[arg(long = "yawt")]
    yaw_t: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Trial timeout, s.
    #[arg(long = "tmax")]
    t_max: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        cfg.scenario = self.scenario.unwrap_or(cfg.scenario);
        cfg.mode = self.mode.unwrap_or(cfg.mode);
        cfg.trials = self.trials.unwrap_or(cfg.trials);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.noise_sigma = self.noise_sigma.unwrap_or(cfg.noise_sigma);
        cfg.v_t = self.v_t.unwrap_or(cfg.v_t);
        cfg.yaw_t = self.yaw_t.unwrap_or(cfg.yaw_t);
        cfg.eta = self.eta.unwrap_or(cfg.eta);
        cfg.t_max = self.t_max.unwrap_or(cfg.t_max);
        if self.out.is_some() {
            cfg.out.clone_from(&self.out);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config { field: THREADS_ENV.into(), reason: format!("expected a positive integer, got `{v}`") }),
        },
        Err(_) => Ok(None),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn write_outputs(dir: &Path, cfg: &RunConfig, suite: &SuiteConfig, result: &SuiteResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let report = render_report(&result.matrix);
    write_file(&dir.join("report.csv"), &report.csv)?;
    write_file(&dir.join("report.txt"), &report.text)?;
    // the output location is left out so reruns elsewhere compare equal
    let effective = RunConfig { out: None, ..cfg.clone() };
    write_file(&dir.join("config.toml"), &effective.to_toml_string())?;
    let per_cell = suite.trials as usize;
    for (i, rec) in result.records.iter().enumerate() {
        let name = format!("telemetry_{}_{}_{:02}.csv", rec.scenario, rec.mode, i % per_cell);
        write_file(&dir.join(name), &write_telemetry(rec, &suite.params))?;
    }
    Ok(())
}

fn simulate(args: &RunArgs, full_grid: bool) -> Result<()> {
    let cfg = args.resolve()?;
    let (scenarios, modes) = if full_grid {
        (ScenarioId::ALL.to_vec(), PipelineMode::ALL.to_vec())
    } else {
        (vec![cfg.scenario], vec![cfg.mode])
    };
    let mut suite = cfg.suite(scenarios, modes)?;
    suite.threads = threads_from_env()?;
    let result = run_suite(&suite)?;

    if full_grid {
        print!("{}", render_report(&result.matrix).text);
    } else {
        for (i, rec) in result.records.iter().enumerate() {
            let section = rec.failed_section.map_or("-", |s| s.as_str());
            println!(
                "{} {} trial {:02}: {} (failed section {section}) after {} ticks at ({:.2}, {:.2})",
                rec.scenario,
                rec.mode,
                i,
                rec.outcome.as_str(),
                rec.ticks,
                rec.final_pose.x,
                rec.final_pose.y
            );
        }
        let csv = render_report(&result.matrix).csv;
        let cell = format!("{},{},", cfg.scenario, cfg.mode);
        for line in csv.lines().filter(|l| l.starts_with("scenario,") || l.starts_with(&cell)) {
            println!("{line}");
        }
    }
    if let Some(dir) = &cfg.out {
        write_outputs(dir, &cfg, &suite, &result)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => simulate(&args, false),
        Command::Suite(args) => simulate(&args, true),
        Command::Replay { file } => {
            let text = fs::read_to_string(&file).map_err(|source| Error::Io { path: file.clone(), source })?;
            let summary = replay(&text)?;
            println!(
                "{}: ok ({} rows, {} kinematic checks)",
                file.display(),
                summary.rows,
                summary.kinematic_checks
            );
            Ok(())
        }
        Command::Lut { config } => {
            let cfg = match config {
                Some(path) => load_config(&path)?,
                None => RunConfig::default(),
            };
            println!("steering,zone,agree,yaw");
            print!("{}", cfg.fusion.table);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("navfuse: {e}");
            ExitCode::FAILURE
        }
    }
}
