use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use cvqkd_core::scan::{
    preset_configs, run_preset_configs, run_scan, validate, validate_str, Diagnostics, LogBaseConfig,
    Preset, ScanConfig, ScanMode, SimulationConfig, Table,
};

/// Finite-key rates, parameter scans and protocol simulation for squeezed-state CV-QKD.
#[derive(Parser, Debug)]
#[command(name = "cvqkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for simulate mode (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Emit JSON instead of CSV.
    #[arg(long, global = true)]
    json: bool,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Logarithm base for the margin on the index distance.
    #[arg(long, global = true, value_enum)]
    log_base: Option<LogBaseArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Data behind one of the figure presets (fig2 .. fig6).
    Preset { name: String },
    /// Scan described by a JSON config file.
    Scan { config: PathBuf },
    /// Run the protocol simulator along the axis of a config file.
    Simulate { config: PathBuf },
    /// Check a config file and print diagnostics.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogBaseArg {
    #[value(name = "2")]
    Two,
    #[value(name = "e")]
    E,
}

impl From<LogBaseArg> for LogBaseConfig {
    fn from(v: LogBaseArg) -> Self {
        match v {
            LogBaseArg::Two => LogBaseConfig::Two,
            LogBaseArg::E => LogBaseConfig::E,
        }
    }
}

/// Bad input from the user, as opposed to a failure while running.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_IO)
            }
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(ConfigError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("setting up the worker pool")?;
    }
    match &cli.command {
        Command::Preset { name } => {
            let preset: Preset = name.parse().map_err(ConfigError)?;
            let mut configs = preset_configs(preset);
            for c in &mut configs {
                apply_overrides(cli, c);
            }
            let table = run_preset_configs(preset, &configs)?;
            emit(cli, &table)
        }
        Command::Scan { config } => {
            let mut c = load(config)?;
            apply_overrides(cli, &mut c);
            check(&c)?;
            emit(cli, &run_scan(&c)?)
        }
        Command::Simulate { config } => {
            let mut c = load(config)?;
            c.mode = ScanMode::Simulate;
            if c.simulation.is_none() {
                c.simulation = Some(SimulationConfig { rounds: c.n_tot, r: None, delta: None });
            }
            apply_overrides(cli, &mut c);
            check(&c)?;
            emit(cli, &run_scan(&c)?)
        }
        Command::Validate { config } => {
            let text = read(config)?;
            let (_, diag) = validate_str(&text);
            let out = if cli.json {
                serde_json::to_string_pretty(&diag)? + "\n"
            } else {
                diagnostics_text(&diag)
            };
            write_out(cli.out.as_deref(), &out)?;
            if diag.is_ok() {
                Ok(())
            } else {
                Err(ConfigError(format!("{} error(s) in {}", diag.errors.len(), config.display())).into())
            }
        }
    }
}

fn apply_overrides(cli: &Cli, c: &mut ScanConfig) {
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(b) = cli.log_base {
        c.log_base = Some(b.into());
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(path: &Path) -> anyhow::Result<ScanConfig> {
    let text = read(path)?;
    ScanConfig::from_json(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

fn check(c: &ScanConfig) -> anyhow::Result<()> {
    let d = validate(c);
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    if d.is_ok() {
        Ok(())
    } else {
        Err(ConfigError(d.errors.join("; ")).into())
    }
}

fn diagnostics_text(d: &Diagnostics) -> String {
    let mut s = String::new();
    for e in &d.errors {
        s += &format!("error: {e}\n");
    }
    for w in &d.warnings {
        s += &format!("warning: {w}\n");
    }
    if d.is_ok() {
        s += "ok\n";
    }
    s
}

fn emit(cli: &Cli, table: &Table) -> anyhow::Result<()> {
    let text = if cli.json { table.to_json() } else { table.to_csv() };
    write_out(cli.out.as_deref(), &text)
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing to stdout")?;
            out.flush().context("writing to stdout")
        }
    }
}
