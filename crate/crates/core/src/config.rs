//! Run configuration.
//!
//! Configuration files are TOML with one table per subsystem (`[scenario]`,
//! `[game]`, `[agent]`, `[experiment]`) and an optional top-level `preset`
//! (`"desk"` or `"paper"`) that selects the base values before the tables
//! are applied. Every key is optional. Unknown keys are rejected with the
//! closest valid key as a hint.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale applied uniformly to input sizes, software volumes and caches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataUnit {
    Bit,
    Kilobit,
    Megabit,
    Gigabit,
    Megabyte,
    Gigabyte,
}

impl DataUnit {
    pub fn bits(self) -> f64 {
        match self {
            DataUnit::Bit => 1.0,
            DataUnit::Kilobit => 1e3,
            DataUnit::Megabit => 1e6,
            DataUnit::Gigabit => 1e9,
            DataUnit::Megabyte => 8e6,
            DataUnit::Gigabyte => 8e9,
        }
    }
}

/// How an empty node queue is charged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueModel {
    /// Empty queue charges the job's own service time (`Q = s`).
    PaperLiteral,
    /// Empty queue charges nothing; only work ahead of the job counts.
    WaitingOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Paper,
}

/// Linear exploration decay from `initial` to `final_value` over the first
/// `decay_fraction` of the episodes, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub decay_fraction: f64,
}

impl EpsilonSchedule {
    pub fn constant(value: f64) -> Self {
        EpsilonSchedule {
            initial: value,
            final_value: value,
            decay_fraction: 0.0,
        }
    }

    pub fn value(&self, episode: usize, episodes: usize) -> f64 {
        let horizon = self.decay_fraction * episodes as f64;
        if horizon <= 0.0 {
            return self.final_value;
        }
        let progress = episode as f64 / horizon;
        if progress >= 1.0 {
            return self.final_value;
        }
        self.initial + (self.final_value - self.initial) * progress
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub users: usize,
    pub channels: usize,
    pub subtasks: usize,
    pub slots: usize,
    pub bandwidth_hz: f64,
    pub noise_variance_w: f64,
    /// Chip energy coefficient, J·s²/cycle³.
    pub energy_coefficient: f64,
    pub deadline_s: f64,
    pub local_cpu_hz: f64,
    pub fin_cpu_hz: f64,
    pub ein_cpu_hz: f64,
    /// Cache sizes in `data_unit`.
    pub fin_cache: f64,
    pub ein_cache: f64,
    pub transmit_power_w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmit_power_fin_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmit_power_ein_w: Option<f64>,
    /// Delay weight for every user; the energy weight is `1 - delay_weight`.
    pub delay_weight: f64,
    /// Per-user delay weights, overriding `delay_weight` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_weights: Option<Vec<f64>>,
    /// Upper sampling bounds: input and volume in `data_unit`, load in gigacycles.
    pub input_max: u32,
    pub volume_max: u32,
    pub load_max: u32,
    pub data_unit: DataUnit,
    pub path_loss_exponent: f64,
    pub cell_side_m: f64,
    pub queue_model: QueueModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            users: 10,
            channels: 10,
            subtasks: 4,
            slots: 200,
            bandwidth_hz: 50e6,
            noise_variance_w: 2e-13,
            energy_coefficient: 5e-27,
            deadline_s: 1.0,
            local_cpu_hz: 1e9,
            fin_cpu_hz: 60e9,
            ein_cpu_hz: 100e9,
            fin_cache: 3.0,
            ein_cache: 5.0,
            transmit_power_w: 0.5,
            transmit_power_fin_w: None,
            transmit_power_ein_w: None,
            delay_weight: 0.5,
            delay_weights: None,
            input_max: 10,
            volume_max: 10,
            load_max: 10,
            data_unit: DataUnit::Megabit,
            path_loss_exponent: 4.0,
            cell_side_m: 200.0,
            queue_model: QueueModel::PaperLiteral,
        }
    }
}

impl ScenarioConfig {
    pub fn decision_units(&self) -> usize {
        self.users * self.subtasks
    }

    pub fn fin_cache_bits(&self) -> f64 {
        self.fin_cache * self.data_unit.bits()
    }

    pub fn ein_cache_bits(&self) -> f64 {
        self.ein_cache * self.data_unit.bits()
    }

    pub fn delay_weight_of(&self, user: usize) -> f64 {
        self.delay_weights
            .as_ref()
            .and_then(|w| w.get(user).copied())
            .unwrap_or(self.delay_weight)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("scenario.users", self.users),
            ("scenario.channels", self.channels),
            ("scenario.subtasks", self.subtasks),
            ("scenario.slots", self.slots),
        ];
        for (field, value) in counts {
            if value == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        let positive = [
            ("scenario.bandwidth_hz", self.bandwidth_hz),
            ("scenario.noise_variance_w", self.noise_variance_w),
            ("scenario.energy_coefficient", self.energy_coefficient),
            ("scenario.deadline_s", self.deadline_s),
            ("scenario.local_cpu_hz", self.local_cpu_hz),
            ("scenario.fin_cpu_hz", self.fin_cpu_hz),
            ("scenario.ein_cpu_hz", self.ein_cpu_hz),
            ("scenario.transmit_power_w", self.transmit_power_w),
            ("scenario.path_loss_exponent", self.path_loss_exponent),
            ("scenario.cell_side_m", self.cell_side_m),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(field, format!("must be finite and > 0, got {value}")));
            }
        }
        for (field, value) in [
            ("scenario.transmit_power_fin_w", self.transmit_power_fin_w),
            ("scenario.transmit_power_ein_w", self.transmit_power_ein_w),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::config(field, format!("must be finite and > 0, got {v}")));
                }
            }
        }
        for (field, value) in [("scenario.fin_cache", self.fin_cache), ("scenario.ein_cache", self.ein_cache)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::config(field, format!("must be finite and >= 0, got {value}")));
            }
        }
        for (field, value) in [
            ("scenario.input_max", self.input_max),
            ("scenario.volume_max", self.volume_max),
            ("scenario.load_max", self.load_max),
        ] {
            if value < 1 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        let weight_ok = |w: f64| (0.0..=1.0).contains(&w);
        if !weight_ok(self.delay_weight) {
            return Err(Error::config("scenario.delay_weight", "must lie in [0, 1]"));
        }
        if let Some(weights) = &self.delay_weights {
            if weights.len() != self.users {
                return Err(Error::config(
                    "scenario.delay_weights",
                    format!("has {} entries for {} users", weights.len(), self.users),
                ));
            }
            if let Some(w) = weights.iter().find(|w| !weight_ok(**w)) {
                return Err(Error::config("scenario.delay_weights", format!("entry {w} outside [0, 1]")));
            }
        }
        if self.channels > u16::MAX as usize {
            return Err(Error::config("scenario.channels", "exceeds 65535"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub max_iterations: usize,
    /// Granularity constant of the convergence bound; calibrated from the
    /// observed potential decreases when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub granularity: Option<f64>,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            max_iterations: 10_000,
            granularity: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub discount: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync_period: usize,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    pub epsilon_decay_fraction: f64,
    pub hidden_sizes: Vec<usize>,
    pub input_dropout: f64,
    pub huber_delta: f64,
    /// Factor applied to rewards before they enter the replay memory, so that
    /// typical residuals fall inside the Huber quadratic zone. Logged rewards
    /// are never scaled.
    pub reward_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            discount: 0.9,
            learning_rate: 0.0008,
            batch_size: 32,
            replay_capacity: 10_000,
            target_sync_period: 100,
            epsilon_initial: 1.0,
            epsilon_final: 0.05,
            epsilon_decay_fraction: 0.6,
            hidden_sizes: vec![128, 128],
            input_dropout: 0.1,
            huber_delta: 1.0,
            reward_scale: 1e-5,
        }
    }
}

impl AgentConfig {
    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            initial: self.epsilon_initial,
            final_value: self.epsilon_final,
            decay_fraction: self.epsilon_decay_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::config("agent.discount", "must lie strictly between 0 and 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("agent.learning_rate", "must be finite and > 0"));
        }
        for (field, value) in [
            ("agent.batch_size", self.batch_size),
            ("agent.replay_capacity", self.replay_capacity),
            ("agent.target_sync_period", self.target_sync_period),
        ] {
            if value == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::config("agent.batch_size", "exceeds agent.replay_capacity"));
        }
        for (field, value) in [
            ("agent.epsilon_initial", self.epsilon_initial),
            ("agent.epsilon_final", self.epsilon_final),
            ("agent.epsilon_decay_fraction", self.epsilon_decay_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::config(field, "must lie in [0, 1]"));
            }
        }
        if self.epsilon_final > self.epsilon_initial {
            return Err(Error::config(
                "agent.epsilon_final",
                "exceeds agent.epsilon_initial; the schedule must be non-increasing",
            ));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::config("agent.hidden_sizes", "layer widths must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.input_dropout) {
            return Err(Error::config("agent.input_dropout", "must lie in [0, 1)"));
        }
        if !(self.huber_delta.is_finite() && self.huber_delta > 0.0) {
            return Err(Error::config("agent.huber_delta", "must be finite and > 0"));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return Err(Error::config("agent.reward_scale", "must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub episodes: usize,
    /// Number of independent runs; run `i` uses seed `master_seed + i`.
    pub seeds: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            episodes: 300,
            seeds: 5,
            master_seed: 7,
        }
    }
}

impl ExperimentConfig {
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.master_seed.wrapping_add(i)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub game: GameConfig,
    pub agent: AgentConfig,
    pub experiment: ExperimentConfig,
}

const TOP_KEYS: &[&str] = &["preset", "scenario", "game", "agent", "experiment"];
const SCENARIO_KEYS: &[&str] = &[
    "users",
    "channels",
    "subtasks",
    "slots",
    "bandwidth_hz",
    "noise_variance_w",
    "energy_coefficient",
    "deadline_s",
    "local_cpu_hz",
    "fin_cpu_hz",
    "ein_cpu_hz",
    "fin_cache",
    "ein_cache",
    "transmit_power_w",
    "transmit_power_fin_w",
    "transmit_power_ein_w",
    "delay_weight",
    "delay_weights",
    "input_max",
    "volume_max",
    "load_max",
    "data_unit",
    "path_loss_exponent",
    "cell_side_m",
    "queue_model",
];
const GAME_KEYS: &[&str] = &["max_iterations", "granularity"];
const AGENT_KEYS: &[&str] = &[
    "discount",
    "learning_rate",
    "batch_size",
    "replay_capacity",
    "target_sync_period",
    "epsilon_initial",
    "epsilon_final",
    "epsilon_decay_fraction",
    "hidden_sizes",
    "input_dropout",
    "huber_delta",
    "reward_scale",
];
const EXPERIMENT_KEYS: &[&str] = &["episodes", "seeds", "master_seed"];

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "scenario" => Some(SCENARIO_KEYS),
        "game" => Some(GAME_KEYS),
        "agent" => Some(AGENT_KEYS),
        "experiment" => Some(EXPERIMENT_KEYS),
        _ => None,
    }
}

fn nearest(key: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(key, c), *c))
        .min()
        .map(|(_, c)| c.to_string())
}

fn unknown(qualified: String, bare: &str, candidates: &[&str], prefix: &str) -> Error {
    Error::UnknownKey {
        key: qualified,
        suggestion: nearest(bare, candidates).map(|s| format!("{prefix}{s}")),
    }
}

fn check_keys(table: &toml::Table) -> Result<()> {
    for (key, value) in table {
        if !TOP_KEYS.contains(&key.as_str()) {
            // A bare key might belong inside a section.
            let all: Vec<String> = ["scenario", "game", "agent", "experiment"]
                .iter()
                .flat_map(|s| section_keys(s).unwrap().iter().map(move |k| format!("{s}.{k}")))
                .chain(std::iter::once("preset".to_string()))
                .collect();
            let refs: Vec<&str> = all.iter().map(String::as_str).collect();
            let suggestion = refs
                .iter()
                .map(|c| {
                    let tail = c.rsplit('.').next().unwrap_or(c);
                    (strsim::levenshtein(key, tail), *c)
                })
                .min()
                .map(|(_, c)| c.to_string());
            return Err(Error::UnknownKey {
                key: key.clone(),
                suggestion,
            });
        }
        if let Some(keys) = section_keys(key) {
            let Some(inner) = value.as_table() else {
                return Err(Error::Parse(format!("`{key}` must be a table")));
            };
            for inner_key in inner.keys() {
                if !keys.contains(&inner_key.as_str()) {
                    return Err(unknown(format!("{key}.{inner_key}"), inner_key, keys, &format!("{key}.")));
                }
            }
        }
    }
    Ok(())
}

impl SimConfig {
    pub fn desk() -> Self {
        SimConfig::default()
    }

    /// Full-scale run lengths and population; physical constants are shared
    /// with the desk preset.
    pub fn paper() -> Self {
        let mut config = SimConfig::default();
        config.scenario.users = 30;
        config.scenario.subtasks = 10;
        config.scenario.slots = 1000;
        config.experiment.episodes = 2000;
        config
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => SimConfig::desk(),
            Preset::Paper => SimConfig::paper(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        check_keys(&table)?;
        let preset = match table.remove("preset") {
            None => Preset::Desk,
            Some(v) => v.try_into::<Preset>().map_err(|e| Error::config("preset", e.to_string()))?,
        };
        let base = toml::Table::try_from(SimConfig::preset(preset)).map_err(|e| Error::Parse(e.to_string()))?;
        let merged = merge(base, table);
        let config: SimConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        SimConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.agent.validate()?;
        if self.game.max_iterations == 0 {
            return Err(Error::config("game.max_iterations", "must be at least 1"));
        }
        if let Some(g) = self.game.granularity {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::config("game.granularity", "must be finite and > 0"));
            }
        }
        if self.experiment.episodes == 0 {
            return Err(Error::config("experiment.episodes", "must be at least 1"));
        }
        if self.experiment.seeds == 0 {
            return Err(Error::config("experiment.seeds", "must be at least 1"));
        }
        Ok(())
    }
}

fn merge(mut base: toml::Table, overlay: toml::Table) -> toml::Table {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                let merged = merge(std::mem::take(b), o);
                *b = merged;
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
    base
}
