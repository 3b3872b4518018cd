//! Slot and episode orchestration for the four policies.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{self, ActionContext, Agent, Mlp, Transition};
use crate::config::{EpsilonSchedule, SimConfig};
use crate::cost::{self, SlotCosts};
use crate::error::{Error, Result};
use crate::game::{self, GameContext};
use crate::radio::{self, Placement, StrategyProfile};
use crate::scenario::{self, Destination, NodeState, Scenario, TaskSet};
use crate::seeding::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Proposed,
    OpgOnly,
    Mec,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Proposed, Policy::OpgOnly, Policy::Mec, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::OpgOnly => "opg_only",
            Policy::Mec => "mec",
            Policy::Random => "random",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown policy `{s}` (expected proposed, opg_only, mec or random)")))
    }
}

/// Observables of one slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub episode: usize,
    pub slot: usize,
    pub system_cost: f64,
    /// Previous slot's cost minus this slot's; 0 in the first slot.
    pub reward: f64,
    pub n_local: usize,
    pub n_fin: usize,
    pub n_ein: usize,
    pub game_iters: usize,
    pub epsilon: f64,
    pub deadline_violations: usize,
    /// Units forced back to local because the equilibrium overflowed a cache.
    pub cache_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub mean_cost: f64,
    pub median_cost: f64,
    pub mean_reward: f64,
    pub total_reward: f64,
    pub mean_local: f64,
    pub mean_fin: f64,
    pub mean_ein: f64,
    pub mean_game_iters: f64,
    pub epsilon: f64,
    pub deadline_violations: usize,
    pub cache_violations: usize,
    /// Mean training loss over the episode (proposed policy once training).
    pub mean_loss: Option<f64>,
}

/// One (policy, seed) run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: Policy,
    pub seed: u64,
    pub records: Vec<SlotRecord>,
    pub episodes: Vec<EpisodeSummary>,
    /// Share of units per placement over the final episode, `[local, FIN, EIN]`.
    pub final_distribution: [f64; 3],
    pub wall_time_s: f64,
    #[serde(skip)]
    pub network: Option<Mlp>,
}

impl RunResult {
    pub fn mean_costs(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.mean_cost).collect()
    }

    pub fn mean_rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.mean_reward).collect()
    }

    /// Mean of the per-episode mean costs over the last `n` episodes.
    pub fn final_mean_cost(&self, n: usize) -> f64 {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        tail.iter().map(|e| e.mean_cost).sum::<f64>() / tail.len().max(1) as f64
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: SimConfig,
    pub runs: Vec<RunResult>,
}

impl ExperimentResult {
    pub fn runs_of(&self, policy: Policy) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.policy == policy)
    }

    /// Median over seeds of the final-`n`-episode mean cost.
    pub fn median_final_cost(&self, policy: Policy, n: usize) -> Option<f64> {
        median(self.runs_of(policy).map(|r| r.final_mean_cost(n)).collect())
    }
}

pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// First-come-first-served cache admission in unit order: offloaded units
/// that no longer fit their destination's cache run locally instead.
/// Returns the repaired profile and the number of units pulled back.
pub fn repair_caches(tasks: &TaskSet, profile: &StrategyProfile, fin_cache: f64, ein_cache: f64) -> (StrategyProfile, usize) {
    let mut repaired = profile.clone();
    let mut left = [fin_cache, ein_cache];
    let mut pulled = 0;
    for unit in 0..profile.len() {
        if let Some(d) = profile.destination(unit) {
            let v = tasks.unit(unit).volume_bits;
            if v <= left[d.index()] {
                left[d.index()] -= v;
            } else {
                repaired.set_local(unit);
                pulled += 1;
            }
        }
    }
    (repaired, pulled)
}

/// Greedy edge-only baseline: in unit order, a unit goes to the EIN on its
/// least-interfered channel (lowest index on ties) when its software fits the
/// remaining EIN cache and that is cheaper than running locally.
pub fn mec_policy(scenario: &Scenario, tasks: &TaskSet) -> Result<StrategyProfile> {
    let cfg = &scenario.config;
    let mut profile = StrategyProfile::all_local(tasks.len(), cfg.channels);
    let mut left = scenario.ein.cache_bits;
    for unit in 0..tasks.len() {
        let subtask = tasks.unit(unit);
        if subtask.volume_bits > left {
            continue;
        }
        let owner = tasks.user_of(unit);
        let user = scenario.user(owner);
        let (channel, sum) = (1..=cfg.channels as u16)
            .map(|m| (m, radio::co_channel_sum(scenario, tasks, &profile, owner, m, Destination::Ein)))
            .fold((0u16, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        let rate = radio::shannon_rate(
            cfg.bandwidth_hz,
            cfg.channels,
            user.link_weight(Destination::Ein),
            sum,
            cfg.noise_variance_w,
        );
        let remote = cost::offload_cost(user, subtask, &scenario.ein, rate, None)?.weighted_cost;
        if remote < cost::local_cost(user, subtask, cfg).weighted_cost {
            profile.set_offload(unit, channel, Destination::Ein)?;
            left -= subtask.volume_bits;
        }
    }
    Ok(profile)
}

/// Uniformly random placement over the options that still fit, with a
/// uniformly random channel for offloaded units.
pub fn random_policy<R: Rng + ?Sized>(scenario: &Scenario, tasks: &TaskSet, rng: &mut R) -> Result<StrategyProfile> {
    let channels = scenario.config.channels;
    let mut profile = StrategyProfile::all_local(tasks.len(), channels);
    let mut left = [scenario.fin.cache_bits, scenario.ein.cache_bits];
    for unit in 0..tasks.len() {
        let v = tasks.unit(unit).volume_bits;
        let mut options = vec![None];
        options.extend(Destination::ALL.into_iter().filter(|d| v <= left[d.index()]).map(Some));
        if let Some(d) = options[rng.gen_range(0..options.len())] {
            profile.set_offload(unit, rng.gen_range(1..=channels as u16), d)?;
            left[d.index()] -= v;
        }
    }
    Ok(profile)
}

/// Placement codes of a profile: 0 local, 1 FIN, 2 EIN.
pub fn action_codes(profile: &StrategyProfile) -> Vec<u8> {
    (0..profile.len()).map(|u| profile.placement(u).code()).collect()
}

/// Applies an agent action to the equilibrium: units keep their game
/// channel, the action chooses where they run (or pulls them back local).
pub fn apply_action(game_profile: &StrategyProfile, action: &[u8]) -> Result<StrategyProfile> {
    let mut profile = game_profile.clone();
    for (unit, &b) in action.iter().enumerate() {
        let placement = Placement::from_code(b).ok_or_else(|| Error::Contract(format!("action code {b}")))?;
        match placement.destination() {
            None => profile.set_local(unit),
            Some(d) => {
                if !game_profile.is_offloaded(unit) {
                    return Err(Error::Contract(format!("unit {unit} was not offloaded by the game")));
                }
                profile.set_offload(unit, game_profile.decision(unit), d)?;
            }
        }
    }
    Ok(profile)
}

/// Outcome of one slot before it is logged.
pub struct SlotOutcome {
    pub profile: StrategyProfile,
    pub costs: SlotCosts,
    pub game_iters: usize,
    pub epsilon: f64,
    pub cache_violations: usize,
}

/// Mutable state of one (policy, seed) simulation.
pub struct Simulation {
    pub config: SimConfig,
    pub policy: Policy,
    pub seed: u64,
    pub scenario: Scenario,
    pub fin: NodeState,
    pub ein: NodeState,
    pub agent: Option<Agent>,
    epsilon: EpsilonSchedule,
    task_rng: ChaCha8Rng,
    game_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    previous_cost: Option<f64>,
    pending: Option<(Vec<f64>, Vec<u8>, f64)>,
    losses: Vec<f64>,
}

/// Placement, game iterations, ε, cache repairs and the agent's `(state, action)`.
type Decision = (StrategyProfile, usize, f64, usize, Option<(Vec<f64>, Vec<u8>)>);

impl Simulation {
    pub fn new(config: &SimConfig, policy: Policy, seed: u64) -> Result<Self> {
        Self::with_epsilon(config, policy, seed, config.agent.epsilon_schedule())
    }

    /// Same as [`Simulation::new`] with an explicit exploration schedule for
    /// the proposed policy.
    pub fn with_epsilon(config: &SimConfig, policy: Policy, seed: u64, epsilon: EpsilonSchedule) -> Result<Self> {
        config.validate()?;
        let scenario = scenario::generate_scenario(&config.scenario, seed)?;
        let agent = match policy {
            Policy::Proposed => Some(Agent::new(
                &config.agent,
                config.scenario.decision_units(),
                stream_rng(seed, Stream::Agent),
            )?),
            _ => None,
        };
        Ok(Simulation {
            config: config.clone(),
            policy,
            seed,
            fin: scenario.fin.clone(),
            ein: scenario.ein.clone(),
            scenario,
            agent,
            epsilon,
            task_rng: stream_rng(seed, Stream::Tasks),
            game_rng: stream_rng(seed, Stream::Game),
            policy_rng: stream_rng(seed, Stream::Policy),
            previous_cost: None,
            pending: None,
            losses: Vec::new(),
        })
    }

    /// Clears queues and the per-episode reward chain.
    pub fn begin_episode(&mut self) {
        self.fin.reset();
        self.ein.reset();
        self.previous_cost = None;
        self.pending = None;
        self.losses.clear();
    }

    fn decide(&mut self, tasks: &TaskSet, episode: usize) -> Result<Decision> {
        let cfg = &self.config;
        match self.policy {
            Policy::Mec => Ok((mec_policy(&self.scenario, tasks)?, 0, 0.0, 0, None)),
            Policy::Random => Ok((random_policy(&self.scenario, tasks, &mut self.policy_rng)?, 0, 0.0, 0, None)),
            Policy::OpgOnly | Policy::Proposed => {
                let ctx = GameContext::new(&self.scenario, tasks);
                let outcome = game::run_splitting_game(&ctx, cfg.game.max_iterations, &mut self.game_rng);
                let (repaired, pulled) = repair_caches(tasks, &outcome.profile, self.fin.cache_bits, self.ein.cache_bits);
                if self.policy == Policy::OpgOnly {
                    return Ok((repaired, outcome.iterations, 1.0, pulled, None));
                }
                let epsilon = self.epsilon.value(episode, cfg.experiment.episodes);
                let state = agent::encode_state(&ctx, &self.fin, &self.ein, &outcome.profile)?;
                let actx = ActionContext {
                    volumes: tasks.units.iter().map(|u| u.volume_bits).collect(),
                    eligible: (0..tasks.len()).map(|u| outcome.profile.is_offloaded(u)).collect(),
                    fin_cache: self.fin.cache_bits,
                    ein_cache: self.ein.cache_bits,
                };
                let ne_action = action_codes(&repaired);
                let agent = self.agent.as_mut().expect("proposed policy owns an agent");
                let action = agent.act(&state, epsilon, &ne_action, &actx)?;
                let followed_ne = action == ne_action;
                let profile = apply_action(&outcome.profile, &action)?;
                if let Some((prev_state, prev_action, prev_reward)) = self.pending.take() {
                    agent.remember(Transition {
                        state: prev_state,
                        action: prev_action,
                        reward: prev_reward,
                        next_state: state.clone(),
                        next_context: actx,
                    })?;
                }
                let pulled = if followed_ne { pulled } else { 0 };
                Ok((profile, outcome.iterations, epsilon, pulled, Some((state, action))))
            }
        }
    }

    /// Runs one slot: tasks, decisions, queue-inclusive cost, reward and,
    /// for the proposed policy, replay and training.
    pub fn run_slot(&mut self, episode: usize, slot: usize) -> Result<SlotRecord> {
        let tasks = scenario::generate_tasks(&self.config.scenario, &mut self.task_rng);
        let (profile, game_iters, epsilon, cache_violations, acted) = self.decide(&tasks, episode)?;
        cost::check_caches(&tasks, &profile, &self.fin, &self.ein)
            .unwrap_or_else(|e| panic!("{} policy produced an infeasible placement: {e}", self.policy));
        let costs = cost::system_cost(&self.scenario, &tasks, &profile, &self.fin, &self.ein)?;
        let reward = match self.previous_cost {
            Some(prev) => agent::reward(prev, costs.total),
            None => 0.0,
        };
        if let Some(agent) = self.agent.as_mut() {
            // The first slot of an episode has no reward for its action.
            self.pending = match (acted, self.previous_cost) {
                (Some((state, action)), Some(_)) => Some((state, action, reward)),
                _ => None,
            };
            if let Some(loss) = agent.learn()? {
                self.losses.push(loss);
            }
            agent.end_slot()?;
        }
        self.previous_cost = Some(costs.total);

        let tau = self.config.scenario.deadline_s;
        self.fin = costs.fin_after.clone();
        self.ein = costs.ein_after.clone();
        self.fin.drain(tau);
        self.ein.drain(tau);

        let mut counts = [0usize; 3];
        for unit in 0..profile.len() {
            counts[profile.placement(unit).code() as usize] += 1;
        }
        Ok(SlotRecord {
            episode,
            slot,
            system_cost: costs.total,
            reward,
            n_local: counts[0],
            n_fin: counts[1],
            n_ein: counts[2],
            game_iters,
            epsilon,
            deadline_violations: costs.deadline_violations,
            cache_violations,
        })
    }

    pub fn run_episode(&mut self, episode: usize) -> Result<(Vec<SlotRecord>, EpisodeSummary)> {
        self.begin_episode();
        let records = (0..self.config.scenario.slots)
            .map(|slot| self.run_slot(episode, slot))
            .collect::<Result<Vec<_>>>()?;
        let summary = summarize_episode(episode, &records, &self.losses);
        Ok((records, summary))
    }
}

fn summarize_episode(episode: usize, records: &[SlotRecord], losses: &[f64]) -> EpisodeSummary {
    let n = records.len().max(1) as f64;
    let mean = |f: &dyn Fn(&SlotRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    let total_reward = records.iter().map(|r| r.reward).sum::<f64>();
    EpisodeSummary {
        episode,
        mean_cost: mean(&|r| r.system_cost),
        median_cost: median(records.iter().map(|r| r.system_cost).collect()).unwrap_or(0.0),
        mean_reward: total_reward / n,
        total_reward,
        mean_local: mean(&|r| r.n_local as f64),
        mean_fin: mean(&|r| r.n_fin as f64),
        mean_ein: mean(&|r| r.n_ein as f64),
        mean_game_iters: mean(&|r| r.game_iters as f64),
        epsilon: records.first().map_or(0.0, |r| r.epsilon),
        deadline_violations: records.iter().map(|r| r.deadline_violations).sum(),
        cache_violations: records.iter().map(|r| r.cache_violations).sum(),
        mean_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
    }
}

/// Runs every episode of one (policy, seed) pair.
pub fn run_policy(config: &SimConfig, policy: Policy, seed: u64) -> Result<RunResult> {
    run_policy_with_epsilon(config, policy, seed, config.agent.epsilon_schedule())
}

pub fn run_policy_with_epsilon(config: &SimConfig, policy: Policy, seed: u64, epsilon: EpsilonSchedule) -> Result<RunResult> {
    let start = Instant::now();
    let mut sim = Simulation::with_epsilon(config, policy, seed, epsilon)?;
    let mut records = Vec::with_capacity(config.experiment.episodes * config.scenario.slots);
    let mut episodes = Vec::with_capacity(config.experiment.episodes);
    for episode in 0..config.experiment.episodes {
        let (r, s) = sim.run_episode(episode)?;
        records.extend(r);
        episodes.push(s);
    }
    let final_distribution = episodes
        .last()
        .map(|e| {
            let n = config.scenario.decision_units() as f64;
            [e.mean_local / n, e.mean_fin / n, e.mean_ein / n]
        })
        .unwrap_or([0.0; 3]);
    Ok(RunResult {
        policy,
        seed,
        records,
        episodes,
        final_distribution,
        wall_time_s: start.elapsed().as_secs_f64(),
        network: sim.agent.map(|a| a.main),
    })
}

/// Runs every (seed, policy) pair in parallel. Results are ordered by seed,
/// then by the order of `policies`.
pub fn run_experiment(config: &SimConfig, policies: &[Policy]) -> Result<ExperimentResult> {
    config.validate()?;
    if config.experiment.episodes == 0 {
        return Err(Error::config("experiment.episodes", "must be at least 1"));
    }
    let jobs: Vec<(u64, Policy)> = config
        .experiment
        .run_seeds()
        .into_iter()
        .flat_map(|s| policies.iter().map(move |&p| (s, p)))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(seed, policy)| run_policy(config, policy, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: config.clone(),
        runs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Users,
    Vmax,
    Pmax,
    Subtasks,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Users => "users",
            SweepAxis::Vmax => "vmax",
            SweepAxis::Pmax => "pmax",
            SweepAxis::Subtasks => "subtasks",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &SimConfig, value: u32) -> Result<SimConfig> {
        let mut c = base.clone();
        match self {
            SweepAxis::Users => c.scenario.users = value as usize,
            SweepAxis::Vmax => c.scenario.volume_max = value,
            SweepAxis::Pmax => c.scenario.load_max = value,
            SweepAxis::Subtasks => c.scenario.subtasks = value as usize,
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "users" | "k" => Ok(SweepAxis::Users),
            "vmax" => Ok(SweepAxis::Vmax),
            "pmax" => Ok(SweepAxis::Pmax),
            "subtasks" => Ok(SweepAxis::Subtasks),
            _ => Err(Error::Parse(format!(
                "unknown sweep axis `{s}` (expected users, vmax, pmax or subtasks)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: u32,
    pub result: ExperimentResult,
}

pub fn run_sweep(base: &SimConfig, axis: SweepAxis, values: &[u32], policies: &[Policy]) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            Ok(SweepPoint {
                value,
                result: run_experiment(&axis.apply(base, value)?, policies)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn small() -> SimConfig {
        let mut c = SimConfig::desk();
        c.scenario = ScenarioConfig {
            users: 3,
            subtasks: 2,
            channels: 2,
            slots: 5,
            ..ScenarioConfig::default()
        };
        c.experiment.episodes = 2;
        c.experiment.seeds = 1;
        c.agent.hidden_sizes = vec![8];
        c.agent.batch_size = 2;
        c
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("greedy".parse::<Policy>().is_err());
    }

    #[test]
    fn counts_cover_every_unit_and_first_reward_is_zero() {
        for p in Policy::ALL {
            let run = run_policy(&small(), p, 3).unwrap();
            assert_eq!(run.records.len(), 10);
            for r in &run.records {
                assert_eq!(r.n_local + r.n_fin + r.n_ein, 6);
                assert!(r.system_cost >= 0.0);
                if r.slot == 0 {
                    assert_eq!(r.reward, 0.0);
                }
            }
            assert_eq!(run.episodes.len(), 2);
        }
    }

    #[test]
    fn single_slot_experiment() {
        let mut c = small();
        c.experiment.episodes = 1;
        c.scenario.slots = 1;
        let out = run_experiment(&c, &[Policy::Random]).unwrap();
        assert_eq!(out.runs.len(), 1);
        assert_eq!(out.runs[0].records.len(), 1);
    }

    #[test]
    fn repair_is_first_come_first_served() {
        let config = ScenarioConfig {
            users: 1,
            subtasks: 3,
            ..ScenarioConfig::default()
        };
        let mut tasks = scenario::generate_tasks(&config, &mut stream_rng(0, Stream::Tasks));
        for (u, v) in tasks.units.iter_mut().zip([2.0, 2.0, 1.0]) {
            u.volume_bits = v;
        }
        let mut p = StrategyProfile::all_local(3, 2);
        for u in 0..3 {
            p.set_offload(u, 1, Destination::Fin).unwrap();
        }
        let (r, pulled) = repair_caches(&tasks, &p, 3.0, 0.0);
        assert_eq!(pulled, 1);
        assert_eq!(action_codes(&r), vec![1, 0, 1]);
    }

    #[test]
    fn mec_never_uses_fin_and_respects_cache() {
        let c = small();
        let s = scenario::generate_scenario(&c.scenario, 1).unwrap();
        let mut rng = stream_rng(1, Stream::Tasks);
        for _ in 0..50 {
            let t = scenario::generate_tasks(&c.scenario, &mut rng);
            let p = mec_policy(&s, &t).unwrap();
            assert!((0..p.len()).all(|u| p.destination(u) != Some(Destination::Fin)));
            assert!(cost::check_caches(&t, &p, &s.fin, &s.ein).is_ok());
        }
        let mut s0 = s.clone();
        s0.ein.cache_bits = 0.0;
        let t = scenario::generate_tasks(&c.scenario, &mut rng);
        assert_eq!(mec_policy(&s0, &t).unwrap(), StrategyProfile::all_local(6, 2));
    }

    #[test]
    fn random_with_no_cache_is_all_local() {
        let c = small();
        let mut s = scenario::generate_scenario(&c.scenario, 1).unwrap();
        s.fin.cache_bits = 0.0;
        s.ein.cache_bits = 0.0;
        let t = scenario::generate_tasks(&c.scenario, &mut stream_rng(1, Stream::Tasks));
        let p = random_policy(&s, &t, &mut stream_rng(1, Stream::Policy)).unwrap();
        assert_eq!(p, StrategyProfile::all_local(6, 2));
    }

    #[test]
    fn apply_action_keeps_game_channels() {
        let mut g = StrategyProfile::all_local(3, 3);
        g.set_offload(0, 2, Destination::Fin).unwrap();
        g.set_offload(2, 3, Destination::Fin).unwrap();
        let p = apply_action(&g, &[2, 0, 0]).unwrap();
        assert_eq!(p.destination(0), Some(Destination::Ein));
        assert_eq!(p.decision(0), 2);
        assert!(!p.is_offloaded(2));
        assert!(apply_action(&g, &[0, 1, 0]).is_err());
    }

    #[test]
    fn sweep_axis_sets_field() {
        let c = SweepAxis::Pmax.apply(&small(), 14).unwrap();
        assert_eq!(c.scenario.load_max, 14);
        assert!(SweepAxis::Users.apply(&small(), 0).is_err());
        assert_eq!("vmax".parse::<SweepAxis>().unwrap(), SweepAxis::Vmax);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}
