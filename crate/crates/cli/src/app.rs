//! Argument handling and subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use graphgame::sim::{ConfigError, NetworkModel, SimConfig, SimError, load, preset, run_model};

use crate::oracle;
use crate::plot::emit_plot_script;
use crate::report::RunReport;
use crate::trace_io::write_trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GRAPHGAME_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "graphgame", version, about = "Learning formation control on a leader-follower network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation and write trace.csv, report.txt and plots.gp.
    Run(RunArgs),
    /// Check the configuration and topology without running.
    Validate(ConfigArgs),
    /// Run the built-in closed-form checks.
    Oracle,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Config file (dotted keys); may name a base scenario with `scenario = "..."`.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in scenario used as the base (example_1d, lqr_scalar).
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, value_name = "SECONDS", allow_negative_numbers = true)]
    pub t_final: Option<f64>,
    #[arg(long, value_name = "SECONDS", allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub decimate: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory; defaults to $GRAPHGAME_OUT_DIR, then `out`.
    #[arg(long, value_name = "PATH")]
    pub out_dir: Option<PathBuf>,
    /// Also write each agent's history stack as stack_<i>.csv.
    #[arg(long)]
    pub dump_stacks: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<SimConfig, ConfigError> {
        let text = match &self.config {
            Some(path) => Some(fs::read_to_string(path).map_err(|e| {
                ConfigError::Syntax(format!("cannot read config {}: {e}", path.display()))
            })?),
            None => None,
        };
        let mut config = match (&self.scenario, &text) {
            (Some(name), Some(text)) => {
                let mut c = preset(name)?;
                c.apply_text(text)?;
                c
            }
            (Some(name), None) => preset(name)?,
            (None, Some(text)) => load(text)?,
            (None, None) => preset("example_1d")?,
        };
        if let Some(v) = self.t_final {
            config.t_final = v;
        }
        if let Some(v) = self.dt {
            config.dt = v;
        }
        if let Some(v) = self.decimate {
            config.decimate = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        Ok(config)
    }
}

fn out_dir(arg: &Option<PathBuf>) -> PathBuf {
    arg.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(&args, out),
        Command::Validate(args) => validate(&args, out),
        Command::Oracle => run_oracles(out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: numerical abort: {msg}");
            EXIT_NUMERICAL
        }
    }
}

fn config_error(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

fn validate<W: Write>(args: &ConfigArgs, out: &mut W) -> Result<(), CliError> {
    let config = args.resolve().map_err(config_error)?;
    let built = config.build().map_err(config_error)?;
    let plant = &built.game.plant;
    let _ = writeln!(out, "config ok: {} agents, state dimension {}", plant.n_agents(), plant.state_dim());
    for i in 0..plant.n_agents() {
        let members: Vec<String> = plant.subgraph(i).ordering.iter().map(|k| (k + 1).to_string()).collect();
        let _ = writeln!(
            out,
            "agent {}: subgraph [{}], {} value basis terms",
            i + 1,
            members.join(", "),
            built.game.bases[i].len()
        );
    }
    Ok(())
}

fn run<W: Write>(args: &RunArgs, out: &mut W) -> Result<(), CliError> {
    let config = args.config.resolve().map_err(config_error)?;
    let start = Instant::now();
    let model = NetworkModel::new(&config).map_err(|e| match e {
        SimError::Config(e) => config_error(e),
        other => CliError::Numerical(other.to_string()),
    })?;
    let outcome = run_model(&model).map_err(config_error)?;
    let elapsed = start.elapsed();

    let dir = out_dir(&args.out_dir);
    fs::create_dir_all(&dir).map_err(|e| config_error(format!("cannot create {}: {e}", dir.display())))?;
    let io_err = |path: &Path, e: std::io::Error| config_error(format!("cannot write {}: {e}", path.display()));
    let trace_path = dir.join("trace.csv");
    write_trace(&outcome.log, &trace_path).map_err(|e| io_err(&trace_path, e))?;
    let plot_path = dir.join("plots.gp");
    emit_plot_script(&outcome.log, &plot_path, "trace.csv").map_err(|e| io_err(&plot_path, e))?;
    let report = RunReport::from_log(&outcome.log, elapsed, outcome.error.as_ref().map(|e| e.to_string()));
    let report_path = dir.join("report.txt");
    fs::write(&report_path, report.render()).map_err(|e| io_err(&report_path, e))?;
    if args.dump_stacks {
        for (i, stack) in outcome.final_state.discrete.stacks.iter().enumerate() {
            let path = dir.join(format!("stack_{}.csv", i + 1));
            let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            stack.write_csv(std::io::BufWriter::new(file)).map_err(|e| io_err(&path, e))?;
        }
    }
    let _ = writeln!(out, "wrote {} rows to {} in {:.2}s", outcome.log.len(), dir.display(), elapsed.as_secs_f64());
    match outcome.error {
        Some(e) => Err(CliError::Numerical(e.to_string())),
        None => Ok(()),
    }
}

fn run_oracles<W: Write>(out: &mut W) -> Result<(), CliError> {
    let checks = oracle::run_all();
    for c in &checks {
        let _ = writeln!(out, "{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 { Ok(()) } else { Err(CliError::Numerical(format!("{failed} oracle check(s) failed"))) }
}
