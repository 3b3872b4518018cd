use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use coin_core::agent::checkpoint;
use coin_core::harness::{run_experiment, run_sweep, SweepAxis};
use coin_core::report::{self, FINAL_WINDOW};
use coin_core::{verify, ExperimentResult, Policy, SimConfig};
use serde_json::json;

/// Task-splitting and offloading simulator for in-network computing.
#[derive(Debug, Parser)]
#[command(name = "coinsim", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; omitted keys keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; run i uses seed + i.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", env = "COINSIM_OUT", default_value = "results")]
    out: PathBuf,
    /// Override the number of training episodes.
    #[arg(long, global = true, value_name = "N")]
    episodes: Option<usize>,
    /// Override the number of slots per episode.
    #[arg(long, global = true, value_name = "N")]
    slots: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one policy.
    Simulate {
        /// proposed, opg_only, mec or random.
        #[arg(long, value_parser = parse_policy)]
        policy: Policy,
        /// Save the trained network (proposed policy only).
        #[arg(long, value_name = "PATH")]
        save_network: Option<PathBuf>,
    },
    /// Run all four policies on the same seeds.
    Compare,
    /// Repeat the comparison over one scenario parameter.
    Sweep {
        /// users, vmax, pmax or subtasks.
        #[arg(long, value_parser = parse_axis)]
        axis: SweepAxis,
        /// Comma-separated values, e.g. 20,25,30.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u32>,
    },
    /// Run the built-in property checks.
    Verify,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse().map_err(|e: coin_core::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: coin_core::Error| e.to_string())
}

fn resolve_config(common: &Common) -> Result<SimConfig> {
    let mut config = match &common.config {
        Some(path) => SimConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?,
        None => SimConfig::desk(),
    };
    if let Some(seed) = common.seed {
        config.experiment.master_seed = seed;
    }
    if let Some(e) = common.episodes {
        config.experiment.episodes = e;
    }
    if let Some(s) = common.slots {
        config.scenario.slots = s;
    }
    config.validate()?;
    Ok(config)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

struct Manifest {
    path: PathBuf,
    body: serde_json::Value,
}

impl Manifest {
    /// Written before any result file.
    fn start(dir: &Path, command: &str, config: &SimConfig, outputs: &[PathBuf]) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let body = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "master_seed": config.experiment.master_seed,
            "run_seeds": config.experiment.run_seeds(),
            "config": config,
            "started_at": now(),
            "finished_at": null,
            "outputs": outputs,
        });
        let m = Manifest {
            path: dir.join("manifest.json"),
            body,
        };
        m.write()?;
        Ok(m)
    }

    fn write(&self) -> Result<()> {
        fs::write(&self.path, serde_json::to_string_pretty(&self.body)? + "\n").with_context(|| format!("writing {}", self.path.display()))
    }

    fn finish(mut self) -> Result<()> {
        self.body["finished_at"] = json!(now());
        self.write()
    }
}

fn print_table(result: &ExperimentResult) {
    let window = FINAL_WINDOW.min(result.config.experiment.episodes);
    println!("{:<10} {:>22}", "policy", format!("median final-{window} cost"));
    for p in Policy::ALL {
        if let Some(m) = result.median_final_cost(p, FINAL_WINDOW) {
            println!("{:<10} {m:>22.3}", p.name());
        }
    }
}

fn experiment(common: &Common, config: &SimConfig, command: &str, policies: &[Policy]) -> Result<ExperimentResult> {
    let planned = report::planned_files(&common.out, policies, &config.experiment.run_seeds());
    let manifest = Manifest::start(&common.out, command, config, &planned)?;
    let result = run_experiment(config, policies)?;
    report::write_experiment(&common.out, &result)?;
    manifest.finish()?;
    Ok(result)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Verify => {
            let seed = cli.common.seed.unwrap_or(0);
            let checks = verify::run_all(seed)?;
            for c in &checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                bail!("{failed} check(s) failed");
            }
        }
        Command::Simulate { policy, save_network } => {
            let config = resolve_config(&cli.common)?;
            if save_network.is_some() && policy != Policy::Proposed {
                bail!("--save-network needs --policy proposed");
            }
            let result = experiment(&cli.common, &config, "simulate", &[policy])?;
            print_table(&result);
            if let Some(path) = save_network {
                let net = result.runs[0].network.as_ref().context("no trained network")?;
                checkpoint::save(net, &path).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Compare => {
            let config = resolve_config(&cli.common)?;
            let result = experiment(&cli.common, &config, "compare", &Policy::ALL)?;
            print_table(&result);
        }
        Command::Sweep { axis, values } => {
            let config = resolve_config(&cli.common)?;
            for &v in &values {
                axis.apply(&config, v).with_context(|| format!("{} = {v}", axis.name()))?;
            }
            let planned: Vec<PathBuf> = values
                .iter()
                .map(|v| cli.common.out.join(format!("{}_{v}", axis.name())))
                .chain([cli.common.out.join("sweep.csv")])
                .collect();
            let manifest = Manifest::start(&cli.common.out, "sweep", &config, &planned)?;
            let points = run_sweep(&config, axis, &values, &Policy::ALL)?;
            let mut table = String::from("axis,value,policy,median_final_cost\n");
            for point in &points {
                report::write_experiment(&cli.common.out.join(format!("{}_{}", axis.name(), point.value)), &point.result)?;
                for p in Policy::ALL {
                    if let Some(m) = point.result.median_final_cost(p, FINAL_WINDOW) {
                        table.push_str(&format!("{},{},{},{}\n", axis.name(), point.value, p, m));
                    }
                }
            }
            fs::write(cli.common.out.join("sweep.csv"), &table)?;
            print!("{table}");
            manifest.finish()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<coin_core::Error>(),
                    Some(coin_core::Error::InvalidConfig { .. } | coin_core::Error::UnknownKey { .. } | coin_core::Error::Parse(_))
                )
            });
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
