use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sfplus_core::baselines::{Schedule, ScheduleKind};
use sfplus_harness::commands::{self, FitRequest, FIT_WINDOW, PREDICT_WINDOW};
use sfplus_harness::config::{parse_table, resolve};
use sfplus_harness::runlog::LogTable;
use sfplus_harness::sweep::{self, SweepSpec};
use sfplus_harness::{presets, run_to_dir, HarnessError, Result, RunConfig, RunOptions};
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "sfplus", version, about = "ScheduleFree+ experiments on desk-scale problems")]
struct Cli {
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write `<name>.csv` and `<name>.summary.json`.
    Run(RunArgs),
    /// Execute a grid of runs and write a ranked table.
    Sweep(SweepArgs),
    /// Fit a/sqrt(t+b)+c to a log column.
    Fit(FitArgs),
    /// Fit an early window and extrapolate (fit with a horizon).
    Predict(FitArgs),
    /// Evaluate the convex anytime bound of a schedule.
    Bound(BoundArgs),
    /// Shipped configs.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Args)]
struct Common {
    /// Config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped preset to start from; keys of --config win.
    #[arg(long)]
    preset: Option<String>,
    /// Override a config key, e.g. `--set optimizer.lr=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Run seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SFPLUS_OUT_DIR", default_value = "runs")]
    out: PathBuf,
    /// Write 0 into the wallclock_ms column so logs compare byte-for-byte.
    #[arg(long)]
    normalize_wallclock: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Number of runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Args)]
struct FitArgs {
    /// Run log CSV.
    log: PathBuf,
    /// Column to fit.
    #[arg(long, default_value = "loss_at_x")]
    column: String,
    /// Fit window as fractions of the last logged step, `start,end`.
    #[arg(long, value_parser = parse_window)]
    window: Option<(f64, f64)>,
    /// Last step to predict (predict defaults to the last logged step).
    #[arg(long)]
    horizon: Option<f64>,
    /// Average non-overlapping blocks of this many rows before fitting.
    #[arg(long, default_value_t = 1)]
    smooth: usize,
    #[arg(long, env = "SFPLUS_OUT_DIR", default_value = "runs")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Constant,
    LinearDecay,
    Wsd,
    Cosine,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    schedule: ScheduleArg,
    /// Horizon T.
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    warmup: u64,
    /// Peak step size gamma.
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
    /// Initial distance to the solution D.
    #[arg(long)]
    distance: f64,
    /// Flat gradient norm G.
    #[arg(long)]
    grad_norm: f64,
    #[arg(long, default_value_t = 0.1)]
    anneal_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    min_ratio: f64,
    /// File stem of the CSV.
    #[arg(long, default_value = "bound")]
    name: String,
    #[arg(long, env = "SFPLUS_OUT_DIR", default_value = "runs")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum PresetAction {
    /// Names and one-line descriptions.
    List,
    /// Print a preset's TOML.
    Show { name: String },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `start,end`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command, cli.quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command, quiet: bool) -> Result<()> {
    let say = |msg: String| {
        if !quiet {
            println!("{msg}");
        }
    };
    match command {
        Command::Run(args) => {
            let table = load_table(&args.common)?;
            let cfg = RunConfig::from_table(resolve(table, &overrides(&args.common))?)?;
            let outcome = run_to_dir(&cfg, &args.common.out, &options(&args.common))?;
            let s = &outcome.summary;
            say(format!(
                "{}: {} steps, final loss at x {:.6e}{}",
                s.name,
                s.steps_completed,
                s.final_loss_x,
                if s.diverged { " (diverged)" } else { "" }
            ));
            match s.diverged_at {
                Some(step) => Err(HarnessError::Diverged {
                    name: s.name.clone(),
                    step,
                }),
                None => Ok(()),
            }
        }
        Command::Sweep(args) => {
            let text = match (&args.common.config, &args.common.preset) {
                (Some(path), _) => read(path)?,
                (None, Some(name)) => presets::get_sweep(name)
                    .ok_or_else(|| HarnessError::ConfigInvalid(format!("--preset: unknown sweep `{name}`")))?
                    .to_string(),
                (None, None) => return Err(HarnessError::ConfigInvalid("sweep needs --config or --preset".into())),
            };
            let spec = SweepSpec::from_toml_str(&text)?;
            let configs = spec.expand(&overrides(&args.common))?;
            let out = &args.common.out;
            let rows = sweep::run_sweep(&configs, args.parallelism, Some(out), &options(&args.common))?;
            std::fs::create_dir_all(out).map_err(HarnessError::io(out))?;
            let path = out.join(format!("{}.sweep.csv", spec.name));
            let file = std::fs::File::create(&path).map_err(HarnessError::io(&path))?;
            sweep::write_table(&rows, std::io::BufWriter::new(file)).map_err(HarnessError::io(&path))?;
            if !quiet {
                let mut stdout = std::io::stdout().lock();
                sweep::write_table(&rows, &mut stdout).map_err(HarnessError::io("<stdout>"))?;
                stdout.flush().map_err(HarnessError::io("<stdout>"))?;
            }
            Ok(())
        }
        Command::Fit(args) => fit(args, FIT_WINDOW, false, say),
        Command::Predict(args) => fit(args, PREDICT_WINDOW, true, say),
        Command::Bound(args) => {
            let kind = match args.schedule {
                ScheduleArg::Constant => ScheduleKind::Constant,
                ScheduleArg::LinearDecay => ScheduleKind::LinearDecay,
                ScheduleArg::Wsd => ScheduleKind::Wsd,
                ScheduleArg::Cosine => ScheduleKind::Cosine,
            };
            let schedule = Schedule {
                anneal_fraction: args.anneal_fraction,
                min_ratio: args.min_ratio,
                ..Schedule::new(kind, args.steps, args.warmup, args.peak)
            };
            let rows = commands::bound_curve(&schedule, args.distance, args.grad_norm)?;
            std::fs::create_dir_all(&args.out).map_err(HarnessError::io(&args.out))?;
            let path = args.out.join(format!("{}.csv", args.name));
            let file = std::fs::File::create(&path).map_err(HarnessError::io(&path))?;
            commands::write_bound(&rows, std::io::BufWriter::new(file)).map_err(HarnessError::io(&path))?;
            if let Some(last) = rows.last() {
                say(format!("{}: bound at step {} is {:.6e}", path.display(), last.step, last.bound));
            }
            Ok(())
        }
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    for p in presets::RUN_PRESETS {
                        println!("{:<24} {}", p.name, p.description());
                    }
                    for p in presets::SWEEP_PRESETS {
                        println!("{:<24} [sweep] {}", p.name, p.description());
                    }
                }
                PresetAction::Show { name } => {
                    let text = presets::get(&name)
                        .or_else(|| presets::get_sweep(&name))
                        .ok_or_else(|| HarnessError::ConfigInvalid(format!("unknown preset `{name}`")))?;
                    print!("{text}");
                }
            }
            Ok(())
        }
    }
}

fn fit(args: FitArgs, default_window: (f64, f64), predict: bool, say: impl Fn(String)) -> Result<()> {
    let horizon = match (args.horizon, predict) {
        (Some(h), _) => Some(h),
        (None, true) => {
            let steps = LogTable::read(&args.log)?.column("step")?;
            steps.last().copied()
        }
        (None, false) => None,
    };
    let req = FitRequest {
        column: args.column,
        window: args.window.unwrap_or(default_window),
        horizon,
        smooth: args.smooth,
    };
    let (out, written) = commands::fit_log(&args.log, &req, &args.out)?;
    let r = &out.report;
    say(format!(
        "a = {:.6e}, b = {:.6e}, c = {:.6e} (R^2 {:.6}); f* estimate {:.6e}",
        r.a, r.b, r.c, r.r_squared, r.f_star_estimate
    ));
    if let Some(e) = r.max_rel_error_second_half {
        say(format!("max relative error over the second half: {e:.4e}"));
    }
    for p in written {
        say(format!("wrote {}", p.display()));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(HarnessError::io(path))
}

fn load_table(common: &Common) -> Result<Table> {
    let mut table = match &common.config {
        Some(path) => parse_table(&read(path)?)?,
        None => Table::new(),
    };
    if let Some(name) = &common.preset {
        table.insert("preset".into(), Value::String(name.clone()));
    }
    if table.is_empty() {
        return Err(HarnessError::ConfigInvalid("run needs --config or --preset".into()));
    }
    Ok(table)
}

fn overrides(common: &Common) -> Vec<String> {
    let mut sets = common.sets.clone();
    if let Some(seed) = common.seed {
        sets.push(format!("run.seed={seed}"));
    }
    sets
}

fn options(common: &Common) -> RunOptions {
    RunOptions {
        normalize_wallclock: common.normalize_wallclock,
    }
}
