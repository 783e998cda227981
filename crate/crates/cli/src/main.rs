use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use fdrelay::experiment::{
    self, export, export_summary, relative_gain, run_detailed, run_report, run_sweep, verify_suite,
    worked_example, write_records, write_summary, ExperimentError, Format, SweepParam, SweepSpec,
    WORKED_EXAMPLE_NAMES,
};
use fdrelay::scheduler::ScheduleOptions;
use fdrelay::{load_config, Policy, ScenarioConfig};

#[derive(Parser)]
#[command(name = "fdrelay", version, about = "Relay-assisted mmWave association and scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one policy on one generated scenario.
    Run(RunArgs),
    /// Sweep a parameter over several seeds and policies.
    Sweep(SweepArgs),
    /// Check the heuristics against their brute-force oracles.
    Verify(VerifyArgs),
    /// Schedule the five-flow worked example with and without sorting.
    Fixture,
}

#[derive(Args)]
struct Common {
    /// Scenario config file (TOML). Defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Admit flows in index order instead of by slot demand.
    #[arg(long)]
    no_sort: bool,
    /// Give leftover slots to the first flow that did not fit.
    #[arg(long)]
    top_up: bool,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn scenario_config(&self) -> Result<ScenarioConfig, ExperimentError> {
        match &self.config {
            Some(path) => Ok(load_config(path)?),
            None => Ok(ScenarioConfig::default()),
        }
    }

    fn schedule_options(&self) -> ScheduleOptions {
        ScheduleOptions { sort: !self.no_sort, top_up: self.top_up }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Scenario seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "CG_FD", value_parser = parse_policy)]
    policy: Policy,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_param)]
    param: SweepParam,
    /// Comma list (`1,2,5`) or inclusive range `start:stop:step`.
    #[arg(long, value_parser = parse_values, allow_hyphen_values = true)]
    values: Option<Values>,
    /// Number of seeds per point.
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    /// First seed; runs use `seed..seed+seeds`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Policies to compare, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy, default_value = "CG_FD,CG_HD,FBSC,FMRC")]
    policy: Vec<Policy>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse()
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse()
}

#[derive(Debug, Clone)]
struct Values(Vec<f64>);

fn parse_values(s: &str) -> Result<Values, String> {
    value_list(s).map(Values)
}

fn value_list(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err("range must be start:stop:step".into());
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| start + step * k as f64).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

/// `out.csv` -> `out.summary.csv`
fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.summary.{}", ext.to_string_lossy()),
        None => format!("{stem}.summary"),
    };
    out.with_file_name(name)
}

fn cmd_run(args: RunArgs) -> Result<(), ExperimentError> {
    let mut cfg = args.common.scenario_config()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let opts = args.common.schedule_options();
    let (scenario, eval) = run_detailed(&cfg, args.policy, cfg.seed, opts)?;
    match args.common.format {
        Format::Json => {
            let text = format!("{:#}\n", run_report(&scenario, &eval));
            write_output(args.common.out.as_deref(), text.as_bytes())
        }
        Format::Csv => {
            let record = experiment::run_single(&cfg, args.policy, cfg.seed, opts)?;
            let mut buf = Vec::new();
            write_records(&[record], Format::Csv, &mut buf)?;
            write_output(args.common.out.as_deref(), &buf)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), ExperimentError> {
    let io_err = |p: &str, source| ExperimentError::Io { path: p.to_string(), source };
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io_err(&p.display().to_string(), e)),
        None => io::stdout().write_all(bytes).map_err(|e| io_err("<stdout>", e)),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), ExperimentError> {
    let base = args.common.scenario_config()?;
    let mut spec = SweepSpec::new(base, args.param, args.seeds);
    if let Some(values) = args.values {
        spec.values = values.0;
    }
    spec.seeds = (0..args.seeds as u64).map(|k| args.seed + k).collect();
    spec.policies = args.policy;
    spec.schedule = args.common.schedule_options();
    info!(
        "sweeping {} over {} values x {} seeds x {} policies",
        spec.parameter,
        spec.values.len(),
        spec.seeds.len(),
        spec.policies.len()
    );
    let result = run_sweep(&spec)?;
    let format = args.common.format;
    match &args.common.out {
        Some(out) => {
            export(&result.raw, format, out)?;
            let summary_out = summary_path(out);
            export_summary(&result.summary, format, &summary_out)?;
            eprintln!("wrote {} and {}", out.display(), summary_out.display());
        }
        None => {
            let mut stdout = io::stdout().lock();
            write_records(&result.raw, format, &mut stdout)?;
            let mut stderr = io::stderr().lock();
            write_summary(&result.summary, Format::Csv, &mut stderr)?;
        }
    }
    if spec.policies.contains(&Policy::CgFd) {
        for &other in spec.policies.iter().filter(|&&p| p != Policy::CgFd) {
            let gains = relative_gain(&result, Policy::CgFd, other);
            let line: Vec<String> = gains.iter().map(|(v, g)| format!("{v}: {:+.1}%", g * 100.0)).collect();
            eprintln!("CG_FD vs {other}: {}", line.join(", "));
        }
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool, ExperimentError> {
    let checks = verify_suite(args.instances, args.seed)?;
    for c in &checks {
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn cmd_fixture() -> Result<(), ExperimentError> {
    let report = worked_example()?;
    for (label, eval) in [("sorted", &report.sorted), ("unsorted", &report.unsorted)] {
        println!("{label}: {} of {} flows satisfied", eval.schedule.satisfied_count(), eval.demands.len());
        for p in &eval.schedule.pairings {
            let name = WORKED_EXAMPLE_NAMES[p.flow_id.0];
            println!("  {name}: slots {}..{}", p.start_slot, p.end_slot());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Fixture => cmd_fixture().map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
