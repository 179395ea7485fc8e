use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spreadlab_cli::execute::assertions;
use spreadlab_cli::output::{to_json, write_file};
use spreadlab_cli::sweep::{run_sweep, sweep_tables};
use spreadlab_cli::{parse_config, parse_sweep, run_command, AssertCheck, CliError, Command};

#[derive(Parser)]
#[command(name = "spreadlab", version, about = "Spreading experiments for a two-predator/one-prey system")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form and mutant invasion speeds plus the pulling check.
    Speeds(Common),
    /// Method-of-lines run with the configured observers.
    Simulate(Common),
    /// Run a list of configs concurrently; one result row per config.
    Sweep(Common),
    /// Dirichlet principal eigenvalues.
    Eigen(Common),
    /// Nonlocal-pulling inequality, subsolution rates and optional d1 scan.
    Pulling(Common),
    /// Lyapunov energy along a homogeneous trajectory.
    Lyapunov(Common),
    /// Validate the parameters only.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config (for `sweep`: a sweep file).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for `sweep`.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Assert that no random numbers are drawn. Always satisfied: every
    /// subcommand is deterministic.
    #[arg(long)]
    seedless: bool,
    /// Check the config's `expect` block; exit 4 on mismatch.
    #[arg(long)]
    assert: bool,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn out_dir(flag: &Option<PathBuf>, from_config: Option<&str>) -> PathBuf {
    flag.clone()
        .or_else(|| from_config.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn report_checks(dir: &Path, checks: &[AssertCheck]) -> Result<(), CliError> {
    write_file(dir, "assertions.json", &to_json(&checks)?)?;
    for c in checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(failed.join(", ")))
    }
}

fn single(cmd: Command, args: &Common) -> Result<(), CliError> {
    if args.seedless {
        eprintln!("seedless: no random number generator is used by this command");
    }
    let cfg = parse_config(&read(&args.config)?)?;
    if args.assert && cfg.expect.is_none() {
        return Err(CliError::Config("--assert needs an \"expect\" block".into()));
    }
    let dir = out_dir(&args.out, cfg.output.dir.as_deref());
    let outcome = run_command(&cfg, cmd)?;
    for f in &outcome.files {
        write_file(&dir, &f.name, &f.contents)?;
        println!("wrote {}", dir.join(&f.name).display());
    }
    if let Some(report) = &outcome.facts.validation {
        if !report.pass {
            let failed: Vec<_> = report.checks.iter().filter(|c| !c.holds).map(|c| c.detail.as_str()).collect();
            return Err(CliError::Config(format!("parameters invalid: {}", failed.join("; "))));
        }
    }
    if args.assert {
        report_checks(&dir, &assertions(&cfg, &outcome.facts))?;
    }
    Ok(())
}

fn sweep(args: &Common) -> Result<(), CliError> {
    if args.seedless {
        eprintln!("seedless: no random number generator is used by this command");
    }
    let cfgs = parse_sweep(&read(&args.config)?)?;
    if args.assert && cfgs.iter().all(|c| c.expect.is_none()) {
        return Err(CliError::Config("--assert needs at least one \"expect\" block".into()));
    }
    let dir = out_dir(&args.out, None);
    let rows = run_sweep(&cfgs, args.jobs);
    for f in sweep_tables(&rows) {
        write_file(&dir, &f.name, &f.contents)?;
        println!("wrote {}", dir.join(&f.name).display());
    }
    let errors: Vec<_> = rows
        .iter()
        .filter_map(|r| r.result.as_ref().err().map(|e| (r.index, e)))
        .collect();
    if let Some((i, e)) = errors.first() {
        let msg = format!("{} of {} configs failed; first: #{i}: {e}", errors.len(), rows.len());
        return Err(match e {
            CliError::Schema { .. } | CliError::Config(_) => CliError::Config(msg),
            _ => CliError::Numerical(msg),
        });
    }
    if args.assert {
        let checks: Vec<AssertCheck> = rows
            .iter()
            .flat_map(|r| {
                r.checks.iter().map(move |c| AssertCheck {
                    name: format!("#{} {}", r.index, c.name),
                    ..c.clone()
                })
            })
            .collect();
        report_checks(&dir, &checks)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Speeds(a) => single(Command::Speeds, a),
        Cmd::Simulate(a) => single(Command::Simulate, a),
        Cmd::Eigen(a) => single(Command::Eigen, a),
        Cmd::Pulling(a) => single(Command::Pulling, a),
        Cmd::Lyapunov(a) => single(Command::Lyapunov, a),
        Cmd::Check(a) => single(Command::Check, a),
        Cmd::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spreadlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
