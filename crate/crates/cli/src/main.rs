//! `drloop run <scenario.toml>`: runs the experiments of a scenario file and
//! writes CSVs. Exit codes: 0 success, 2 configuration error, 3 run failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drloop_core::error::Error;
use drloop_core::scenario::{run_experiment, write_outputs, Experiment, Scenario};

#[derive(Parser)]
#[command(
    name = "drloop",
    version,
    about = "Stacked HARQ / RLC / TCP loop simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiments of a scenario file.
    Run {
        scenario: PathBuf,
        /// Number of seeds per sweep point.
        #[arg(long)]
        seeds: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run only this experiment.
        #[arg(long)]
        experiment: Option<String>,
        /// Dotted `key=value` override, e.g. `tcp.network_delay_ms=20`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the fully resolved scenario and exit.
        #[arg(long)]
        dump_config: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn real_main(cli: Cli) -> Result<(), Error> {
    let Cmd::Run {
        scenario,
        seeds,
        out,
        experiment,
        mut overrides,
        dump_config,
    } = cli.cmd;
    let text = std::fs::read_to_string(&scenario)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", scenario.display())))?;
    if let Some(n) = seeds {
        overrides.push(format!("seeds={n}"));
    }
    let only = experiment
        .as_deref()
        .map(str::parse::<Experiment>)
        .transpose()?;
    let sc = Scenario::from_toml_str(&text, &overrides)?;
    if dump_config {
        print!("{}", sc.to_toml());
        return Ok(());
    }

    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("resolved_config.txt"), sc.to_toml())?;
    let exps = only.map_or_else(|| sc.experiments.clone(), |e| vec![e]);
    for exp in exps {
        eprintln!("{exp}: running");
        let res = run_experiment(&sc, exp)?;
        for s in &res.skipped {
            eprintln!("{exp}: skipped {s}");
        }
        for name in write_outputs(&sc, &res, &out)? {
            eprintln!("{exp}: wrote {}", out.join(name).display());
        }
    }
    Ok(())
}
