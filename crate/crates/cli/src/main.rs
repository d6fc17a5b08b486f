use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use riesz_condenser::pipelines;
use riesz_condenser::records::RunOutput;
use riesz_condenser::scenario::{Resolution, Scenario};

/// Discrete Riesz and Green energy problems for condensers.
#[derive(Parser)]
#[command(name = "riesz-condenser", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Riesz or Green capacity of a plate.
    Capacity(RunArgs),
    /// Green equilibrium measure of a plate.
    Equilibrium(RunArgs),
    /// Sweeping of point masses onto the complement of a domain.
    Balayage(RunArgs),
    /// Condenser solution and condenser measure.
    Condenser(RunArgs),
    /// Constrained Gauss problem with an external field.
    Gauss(RunArgs),
    /// Wiener-type series for rotation bodies.
    Thinness(RunArgs),
    /// Construction of a closed set with infinite equilibrium energy.
    Example10(RunArgs),
    /// Energy identities for smooth densities.
    Identities(RunArgs),
    /// Fast subset of the acceptance checks.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "medium")]
    resolution: Resolution,
    /// Output directory; defaults to `results/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Capacity(_) => "capacity",
            Command::Equilibrium(_) => "equilibrium",
            Command::Balayage(_) => "balayage",
            Command::Condenser(_) => "condenser",
            Command::Gauss(_) => "gauss",
            Command::Thinness(_) => "thinness",
            Command::Example10(_) => "example10",
            Command::Identities(_) => "identities",
            Command::Selftest { .. } => "selftest",
        }
    }
}

fn cap_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("RC_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("RC_THREADS={v:?} is not a thread count"))?;
    if n == 0 {
        bail!("RC_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn report(out: &RunOutput) {
    for c in &out.checks {
        println!("{}", c.line());
    }
    let passed = out.checks.iter().filter(|c| c.passed).count();
    println!("{}: {passed}/{} checks passed", out.command, out.checks.len());
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    cap_threads()?;
    let name = cli.command.name();
    let (out, dir) = match cli.command {
        Command::Selftest { out } => (pipelines::selftest(None), out),
        Command::Capacity(a)
        | Command::Equilibrium(a)
        | Command::Balayage(a)
        | Command::Condenser(a)
        | Command::Gauss(a)
        | Command::Thinness(a)
        | Command::Example10(a)
        | Command::Identities(a) => {
            let text = std::fs::read_to_string(&a.scenario)
                .with_context(|| format!("reading {}", a.scenario.display()))?;
            let scenario = Scenario::parse(&text).with_context(|| format!("in {}", a.scenario.display()))?;
            if scenario.command() != name {
                bail!(
                    "{}: scenario is for `{}`, not `{name}`",
                    a.scenario.display(),
                    scenario.command()
                );
            }
            let out = pipelines::run(&scenario, a.resolution).with_context(|| format!("{name} pipeline"))?;
            (out, Some(a.out.unwrap_or_else(|| PathBuf::from("results").join(name))))
        }
    };
    report(&out);
    if let Some(dir) = dir {
        out.write_to(&dir).with_context(|| format!("writing {}", dir.display()))?;
    }
    Ok(out.all_passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
