//! CSV and JSON result files.
//!
//! Per-slot CSV columns, in order: `episode, slot, policy, system_cost,
//! reward, n_local, n_fin, n_ein, game_iters, epsilon, deadline_violations`.
//! Floats use the shortest representation that reads back to the same value.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::Result;
use crate::harness::{median, ExperimentResult, Policy, RunResult, SlotRecord};

pub const SLOT_HEADER: [&str; 11] = [
    "episode",
    "slot",
    "policy",
    "system_cost",
    "reward",
    "n_local",
    "n_fin",
    "n_ein",
    "game_iters",
    "epsilon",
    "deadline_violations",
];

pub const EPISODE_HEADER: [&str; 15] = [
    "policy",
    "seed",
    "episode",
    "mean_cost",
    "median_cost",
    "mean_reward",
    "total_reward",
    "mean_local",
    "mean_fin",
    "mean_ein",
    "mean_game_iters",
    "epsilon",
    "deadline_violations",
    "cache_violations",
    "mean_loss",
];

/// Episodes averaged for the headline "final cost" figure.
pub const FINAL_WINDOW: usize = 50;

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

pub fn slot_file_name(policy: Policy, seed: u64) -> String {
    format!("slots_{policy}_seed{seed}.csv")
}

pub fn write_slot_csv(path: &Path, policy: Policy, records: &[SlotRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SLOT_HEADER)?;
    for r in records {
        w.write_record([
            r.episode.to_string(),
            r.slot.to_string(),
            policy.to_string(),
            r.system_cost.to_string(),
            r.reward.to_string(),
            r.n_local.to_string(),
            r.n_fin.to_string(),
            r.n_ein.to_string(),
            r.game_iters.to_string(),
            r.epsilon.to_string(),
            r.deadline_violations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_episode_csv(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EPISODE_HEADER)?;
    for run in runs {
        for e in &run.episodes {
            w.write_record([
                run.policy.to_string(),
                run.seed.to_string(),
                e.episode.to_string(),
                e.mean_cost.to_string(),
                e.median_cost.to_string(),
                e.mean_reward.to_string(),
                e.total_reward.to_string(),
                e.mean_local.to_string(),
                e.mean_fin.to_string(),
                e.mean_ein.to_string(),
                e.mean_game_iters.to_string(),
                e.epsilon.to_string(),
                e.deadline_violations.to_string(),
                e.cache_violations.to_string(),
                e.mean_loss.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-policy aggregates plus per-run sequences.
pub fn summary(result: &ExperimentResult) -> Value {
    let mut policies = serde_json::Map::new();
    let mut seen: Vec<Policy> = result.runs.iter().map(|r| r.policy).collect();
    seen.sort();
    seen.dedup();
    for p in seen {
        let finals: Vec<f64> = result.runs_of(p).map(|r| r.final_mean_cost(FINAL_WINDOW)).collect();
        let per_slot_reward: Vec<f64> = result
            .runs_of(p)
            .map(|r| r.records.iter().map(|x| x.reward).sum::<f64>() / r.records.len().max(1) as f64)
            .collect();
        policies.insert(
            p.to_string(),
            json!({
                "median_final_cost": median(finals.clone()),
                "final_costs": finals,
                "mean_reward_per_slot": per_slot_reward,
                "deadline_violations": result.runs_of(p).map(|r| r.records.iter().map(|x| x.deadline_violations).sum::<usize>()).sum::<usize>(),
                "cache_violations": result.runs_of(p).map(|r| r.records.iter().map(|x| x.cache_violations).sum::<usize>()).sum::<usize>(),
            }),
        );
    }
    let runs: Vec<Value> = result
        .runs
        .iter()
        .map(|r| {
            json!({
                "policy": r.policy,
                "seed": r.seed,
                "episode_mean_costs": r.mean_costs(),
                "episode_mean_rewards": r.mean_rewards(),
                "episode_total_rewards": r.episodes.iter().map(|e| e.total_reward).collect::<Vec<_>>(),
                "final_distribution": {
                    "local": r.final_distribution[0],
                    "fin": r.final_distribution[1],
                    "ein": r.final_distribution[2],
                },
                "wall_time_s": r.wall_time_s,
            })
        })
        .collect();
    json!({
        "final_window": FINAL_WINDOW,
        "config": result.config,
        "policies": policies,
        "runs": runs,
    })
}

/// Writes the per-slot CSVs, `episodes.csv` and `summary.json` into `dir`.
/// Returns the paths written.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for run in &result.runs {
        let path = dir.join(slot_file_name(run.policy, run.seed));
        write_slot_csv(&path, run.policy, &run.records)?;
        written.push(path);
    }
    let episodes = dir.join("episodes.csv");
    write_episode_csv(&episodes, &result.runs)?;
    written.push(episodes);
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary(result))? + "\n")?;
    written.push(path);
    Ok(written)
}

/// Planned output paths for an experiment, in the order they are written.
pub fn planned_files(dir: &Path, policies: &[Policy], seeds: &[u64]) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = seeds
        .iter()
        .flat_map(|&s| policies.iter().map(move |&p| dir.join(slot_file_name(p, s))))
        .collect();
    out.push(dir.join("episodes.csv"));
    out.push(dir.join("summary.json"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::harness::run_experiment;

    #[test]
    fn slot_csv_has_fixed_header_and_row_count() {
        let mut c = SimConfig::desk();
        c.scenario.users = 2;
        c.scenario.subtasks = 2;
        c.scenario.slots = 3;
        c.experiment.episodes = 2;
        c.experiment.seeds = 1;
        let result = run_experiment(&c, &[Policy::Mec, Policy::Random]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_experiment(dir.path(), &result).unwrap();
        assert_eq!(
            files,
            planned_files(dir.path(), &[Policy::Mec, Policy::Random], &c.experiment.run_seeds())
        );
        let text = fs::read_to_string(&files[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SLOT_HEADER.join(","));
        assert_eq!(lines.count(), 6);
        assert!(!text.contains('\r'));
        let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!(summary["policies"]["mec"]["median_final_cost"].is_number());
    }
}
