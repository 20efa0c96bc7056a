use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use locemp::bounds::{bound_table, write_bound_table_csv};
use locemp::experiments::{
    chaining_audit, rate_regression, run, write_rates_csv, write_regression_csv, write_runs_csv,
    write_summary_csv, ExperimentConfig, RunRecord, XTransform,
};
use locemp::local_process::sup_deviation_with;
use locemp::local_process::SupOptions;
use locemp::process_gen::{generate, Generator};

const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Parser, Debug)]
#[command(name = "locemp", version, about = "Local empirical processes under strong mixing")]
struct Cli {
    /// TOML experiment config. A built-in KDE study is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set process.m=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Without it, single-table commands print to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replications.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump one sample path as `i,x,z`.
    Simulate {
        /// Sample size. Defaults to `process.n`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Uniform sup-deviation of one path.
    Supdev {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Per-level infima of psi_l and the total right-hand side.
    Bound {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Closed-form rates over the sample-size grid.
    Rates,
    /// Full Monte Carlo study: writes runs.csv and summary.csv.
    Run,
    /// Pathwise chaining audit: writes audit.csv.
    Audit,
    /// Least-squares slope of a summary column against log n or log log n.
    Regress {
        /// A summary.csv written by `run`.
        #[arg(long)]
        summary: PathBuf,
        /// Column to regress.
        #[arg(long, default_value = "ratio")]
        y: String,
        #[arg(long, value_enum, default_value_t = XArg::LogN)]
        x: XArg,
        /// Take the log of the column first.
        #[arg(long)]
        log_y: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum XArg {
    LogN,
    LoglogN,
}

impl From<XArg> for XTransform {
    fn from(x: XArg) -> Self {
        match x {
            XArg::LogN => XTransform::LogN,
            XArg::LoglogN => XTransform::LogLogN,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut cfg = ExperimentConfig::from_toml_with_overrides(&text, &overrides)?;
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

/// Writes `name` under `--out` when given, else to stdout.
fn emit(cli: &Cli, name: &str, write: impl FnOnce(&mut dyn Write) -> locemp::Result<()>) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            let mut f = io::BufWriter::new(fs::File::create(&path)?);
            write(&mut f)?;
            f.flush()?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    if let Command::Regress { summary, y, x, log_y } = &cli.command {
        let r = rate_regression(summary, y, (*x).into(), *log_y)?;
        emit(cli, "regression.csv", |w| write_regression_csv(&r, w))?;
        return Ok(true);
    }

    let cfg = load_config(cli)?;
    let n_or = |n: &Option<usize>| n.unwrap_or(cfg.process.n);
    match &cli.command {
        Command::Simulate { n } => {
            let path = generate(&cfg.spec_at(n_or(n)))?;
            emit(cli, "path.csv", |w| path.write_csv(w))?;
        }
        Command::Supdev { n } => {
            let n = n_or(n);
            let spec = cfg.spec_at(n);
            let law = Generator::new(&spec)?.law().clone();
            let path = generate(&spec)?;
            let range = cfg.bandwidth.at(n)?;
            let family = cfg.family.build()?;
            let start = std::time::Instant::now();
            let res = sup_deviation_with(&path, &law, &range, &family, &SupOptions::new(cfg.resolution))?;
            let rec =
                RunRecord::from_result(n, 0, cfg.seed, &range, &family.name, &res, start.elapsed().as_secs_f64());
            emit(cli, "supdev.csv", |w| write_runs_csv(std::slice::from_ref(&rec), w))?;
        }
        Command::Bound { n } => {
            let (inputs, entropy) = cfg.bound_inputs(n_or(n))?;
            let table = bound_table(&inputs, &entropy)?;
            emit(cli, "bound.csv", |w| write_bound_table_csv(&table, w))?;
        }
        Command::Rates => {
            let rows = cfg.rate_rows()?;
            emit(cli, "rates.csv", |w| write_rates_csv(&rows, w))?;
        }
        Command::Run => {
            let out = run(&cfg)?;
            eprintln!("wrote runs.csv and summary.csv to {}", cfg.output.display());
            write_summary_csv(&out.summary, io::stdout().lock())?;
        }
        Command::Audit => {
            let out = chaining_audit(&cfg)?;
            eprintln!("wrote audit.csv to {}", cfg.output.display());
            println!("pass_rate,{}", out.pass_rate);
            return Ok(out.pass_rate == 1.0);
        }
        Command::Regress { .. } => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
