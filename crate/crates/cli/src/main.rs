use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qst_core::adapt::write_landscape_csv;
use qst_core::naqst::{train, TrainConfig};
use qst_core::nn::{AdamHyper, HeadSpecs, ModelParameters};
use qst_core::PovmFamily;
use qst_harness::config::{Algorithm, RunConfig, ScheduleSpec};
use qst_harness::error::{HarnessError, Result};
use qst_harness::experiments::{experiment_accuracy, experiment_runtime, landscape, load_params, simulate, trial_source};
use qst_harness::protocol::serve;
use qst_harness::results::{write_csv, ResultRow, SummaryRow, TimingRow, RESULT_HEADER, SUMMARY_HEADER, TIMING_HEADER};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "qst", version, about = "Quantum state tomography estimators and experiments")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write zero in wall-time columns so repeated runs are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long = "algo")]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    family: Option<PovmFamily>,
    /// Total copies, split geometrically over `--steps`.
    #[arg(long)]
    copies: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    adaptive: bool,
    #[arg(long)]
    n_bank: Option<usize>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator on simulated states; one row per trial and step.
    Simulate(Overrides),
    /// Train the neural estimator and write a checkpoint.
    Train {
        #[command(flatten)]
        run: Overrides,
        #[arg(long, default_value_t = 2000)]
        episodes: usize,
        /// Hidden layer widths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "16")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 4)]
        probes: usize,
        #[arg(long, default_value_t = 0.15)]
        epsilon_init: f64,
        #[arg(long, default_value_t = 0.5)]
        epsilon_max: f64,
        /// Final learning rate as a fraction of `--lr` (linear decay).
        #[arg(long, default_value_t = 1.0)]
        final_lr_fraction: f64,
    },
    /// Compare a trained checkpoint with both baselines on the same states.
    Evaluate(Overrides),
    /// Median reconstruction time against total copies.
    BenchmarkRuntime {
        #[command(flatten)]
        run: Overrides,
        #[arg(long = "algos", value_delimiter = ',', default_value = "standard,abqt")]
        algorithms: Vec<Algorithm>,
        #[arg(long = "totals", value_delimiter = ',', default_value = "1000,10000,100000,1000000")]
        totals: Vec<u64>,
        /// Add the 10^7 point.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
    },
    /// Heuristic over the X-angles of the first two qubits.
    Landscape {
        #[arg(long)]
        family: Option<PovmFamily>,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        n_bank: Option<usize>,
    },
    /// Answer measurement requests on stdin/stdout from a hidden simulated state.
    ServeSource {
        /// Trial whose hidden state and sampling stream are served.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, o: &Overrides) -> Result<()> {
    if let Some(a) = o.algorithm {
        cfg.algorithm = a;
    }
    if let Some(f) = o.family {
        cfg.family = f;
    }
    match (o.copies, o.steps, &cfg.schedule) {
        (None, None, _) => {}
        (c, s, ScheduleSpec::Geometric { total, steps }) => {
            cfg.schedule = ScheduleSpec::Geometric {
                total: c.unwrap_or(*total),
                steps: s.unwrap_or(*steps),
            }
        }
        (c, s, ScheduleSpec::Explicit(v)) => {
            cfg.schedule = ScheduleSpec::Geometric {
                total: c.unwrap_or(v.iter().sum()),
                steps: s.unwrap_or(v.len()),
            }
        }
    }
    if let Some(t) = o.trials {
        cfg.trials = t;
    }
    if o.adaptive {
        cfg.adaptive = true;
    }
    if let Some(n) = o.n_bank {
        cfg.n_bank = n;
    }
    if let Some(c) = &o.checkpoint {
        cfg.checkpoint = Some(c.clone());
    }
    Ok(())
}

fn output(cli: &Cli, cfg: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match cli.out.as_ref().or(cfg.output.as_ref()) {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = base_config(cli)?;
    let timing = !cli.no_timing;
    match &cli.command {
        Command::Simulate(o) => {
            apply(&mut cfg, o)?;
            cfg.validate()?;
            let params = load_params(&cfg)?;
            let sim = simulate(&cfg, params.as_ref())?;
            let hash = cfg.hash();
            let rows = sim.rows(&hash, timing)?;
            let mut out = output(cli, &cfg)?;
            write_csv(&mut out, &cfg.canonical_json(), &hash, RESULT_HEADER, rows.iter().map(ResultRow::csv_line))?;
            out.flush()?;
        }
        Command::Train {
            run,
            episodes,
            hidden,
            lr,
            sigma,
            probes,
            epsilon_init,
            epsilon_max,
            final_lr_fraction,
        } => {
            apply(&mut cfg, run)?;
            cfg.algorithm = Algorithm::Naqst;
            let path = cli
                .out
                .clone()
                .or_else(|| cfg.checkpoint.clone())
                .ok_or_else(|| HarnessError::Config("train needs --out or a checkpoint path".into()))?;
            let tc = TrainConfig {
                episode: cfg.episode()?,
                episodes: *episodes,
                n_probes: *probes,
                sigma: *sigma,
                adam: AdamHyper {
                    learning_rate: *lr,
                    ..AdamHyper::default()
                },
                final_lr_fraction: *final_lr_fraction,
                checkpoint: Some(path.clone()),
                seed: cfg.seed,
                ..TrainConfig::default()
            };
            let p0 = ModelParameters::init(HeadSpecs::with_hidden(hidden.clone()), *epsilon_max, *epsilon_init, cfg.seed)?;
            let report = train(&tc, &p0)?;
            let mut params = report.params;
            let tc_json = serde_json::to_string(&tc).map_err(|e| HarnessError::Config(e.to_string()))?;
            params.training_config_hash = Some(hex::encode(Sha256::digest(tc_json.as_bytes())));
            params.save(&path)?;
            eprintln!(
                "trained {} episodes: validation loss {:.4} -> {:.4}, saved {}",
                report.episodes,
                report.initial_validation,
                report.best_validation,
                path.display()
            );
        }
        Command::Evaluate(o) => {
            apply(&mut cfg, o)?;
            let checkpoint = cfg.checkpoint.clone().ok_or_else(|| HarnessError::Config("evaluate needs --checkpoint".into()))?;
            let na = RunConfig {
                algorithm: Algorithm::Naqst,
                checkpoint: Some(checkpoint),
                ..cfg.clone()
            };
            na.validate()?;
            let params = load_params(&na)?;
            let grid = [
                na.clone(),
                RunConfig {
                    algorithm: Algorithm::Abqt,
                    ..na.clone()
                },
                RunConfig {
                    algorithm: Algorithm::Standard,
                    adaptive: false,
                    ..na.clone()
                },
            ];
            let (rows, validity) = experiment_accuracy(&grid, params.as_ref())?;
            if validity.violations > 0 {
                log::warn!("{} of {} estimates violated state invariants", validity.violations, validity.checked);
            }
            let mut out = output(cli, &cfg)?;
            write_csv(&mut out, &na.canonical_json(), &na.hash(), SUMMARY_HEADER, rows.iter().map(SummaryRow::csv_line))?;
            out.flush()?;
        }
        Command::BenchmarkRuntime {
            run,
            algorithms,
            totals,
            full,
            repetitions,
        } => {
            apply(&mut cfg, run)?;
            let steps = match &cfg.schedule {
                ScheduleSpec::Geometric { steps, .. } => *steps,
                ScheduleSpec::Explicit(v) => v.len(),
            };
            let mut totals = totals.clone();
            if *full && !totals.contains(&10_000_000) {
                totals.push(10_000_000);
            }
            let mut rows = Vec::new();
            for &a in algorithms {
                let c = RunConfig {
                    algorithm: a,
                    ..cfg.clone()
                };
                c.validate()?;
                let params = load_params(&c)?;
                rows.extend(experiment_runtime(&c, params.as_ref(), &totals, steps, *repetitions)?);
            }
            let mut out = output(cli, &cfg)?;
            write_csv(&mut out, &cfg.canonical_json(), &cfg.hash(), TIMING_HEADER, rows.iter().map(TimingRow::csv_line))?;
            out.flush()?;
        }
        Command::Landscape { family, grid, n_bank } => {
            if let Some(f) = family {
                cfg.family = *f;
            }
            if let Some(n) = n_bank {
                cfg.n_bank = *n;
            }
            cfg.validate()?;
            let points = landscape(&cfg, *grid)?;
            let mut out = output(cli, &cfg)?;
            write_landscape_csv(&points, &mut out)?;
            out.flush()?;
        }
        Command::ServeSource { trial } => {
            let mut source = trial_source(&cfg, *trial);
            let stdin = io::stdin().lock();
            let stdout = io::stdout().lock();
            serve(&mut source, stdin, stdout)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qst: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
