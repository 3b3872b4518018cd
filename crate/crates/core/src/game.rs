//! User-side task-splitting game.
//!
//! Players act per decision unit (one subtask of one user). Each unit offloads
//! towards a fixed preferred destination, the one with the cheaper
//! interference-free offload cost, and chooses between local execution and one
//! of the `M` channels. With the destination fixed, moving between channels
//! or between local and offloading changes the unit's cost in the same
//! direction as the potential, which is what makes the dynamics terminate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost;
use crate::error::{Error, Result};
use crate::radio::{self, OffloadThreshold, StrategyProfile};
use crate::scenario::{Destination, Scenario, SubtaskSpec, TaskSet, UserSpec};

/// Fallback granularity when a run shows no potential decrease at all.
pub const DEFAULT_GRANULARITY: f64 = 1e-9;
/// Largest per-user strategy space `is_nash` will enumerate.
pub const NASH_ENUMERATION_LIMIT: u128 = 1 << 20;

/// Destination with the lower offload cost at zero interference; FIN on ties.
pub fn preferred_destination(scenario: &Scenario, user: &UserSpec, subtask: &SubtaskSpec) -> Destination {
    let cfg = &scenario.config;
    let cost_at = |d: Destination| {
        let rate = radio::shannon_rate(cfg.bandwidth_hz, cfg.channels, user.link_weight(d), 0.0, cfg.noise_variance_w);
        cost::offload_cost(user, subtask, scenario.node(d), rate, None)
            .map(|c| c.weighted_cost)
            .unwrap_or(f64::INFINITY)
    };
    if cost_at(Destination::Ein) < cost_at(Destination::Fin) {
        Destination::Ein
    } else {
        Destination::Fin
    }
}

/// Per-slot game data: preferred destinations, link weights, thresholds and
/// local costs of every decision unit.
#[derive(Clone, Debug)]
pub struct GameContext<'a> {
    pub scenario: &'a Scenario,
    pub tasks: &'a TaskSet,
    pub destinations: Vec<Destination>,
    pub weights: Vec<f64>,
    pub thresholds: Vec<OffloadThreshold>,
    pub local_costs: Vec<f64>,
}

impl<'a> GameContext<'a> {
    pub fn new(scenario: &'a Scenario, tasks: &'a TaskSet) -> Self {
        let n = tasks.len();
        let mut destinations = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut thresholds = Vec::with_capacity(n);
        let mut local_costs = Vec::with_capacity(n);
        for (unit, subtask) in tasks.units.iter().enumerate() {
            let user = scenario.user(tasks.user_of(unit));
            let d = preferred_destination(scenario, user, subtask);
            destinations.push(d);
            weights.push(user.link_weight(d));
            thresholds.push(radio::offload_threshold(scenario, user, subtask, d));
            local_costs.push(cost::local_cost(user, subtask, &scenario.config).weighted_cost);
        }
        GameContext {
            scenario,
            tasks,
            destinations,
            weights,
            thresholds,
            local_costs,
        }
    }

    pub fn units(&self) -> usize {
        self.tasks.len()
    }

    pub fn channels(&self) -> usize {
        self.scenario.config.channels
    }

    /// Queue-free cost of `unit` when offloading with co-channel sum `sum`.
    fn offload_cost_at(&self, unit: usize, destination: Destination, sum: f64) -> f64 {
        let cfg = &self.scenario.config;
        let user = self.scenario.user(self.tasks.user_of(unit));
        let rate = radio::shannon_rate(
            cfg.bandwidth_hz,
            cfg.channels,
            user.link_weight(destination),
            sum,
            cfg.noise_variance_w,
        );
        cost::offload_cost(user, self.tasks.unit(unit), self.scenario.node(destination), rate, None)
            .map(|c| c.weighted_cost)
            .unwrap_or(f64::INFINITY)
    }
}

/// Offloading units grouped by `(destination, channel)`, in unit order.
struct ChannelLoads {
    channels: usize,
    members: Vec<Vec<(usize, f64)>>,
}

impl ChannelLoads {
    fn build(ctx: &GameContext<'_>, profile: &StrategyProfile) -> Self {
        let channels = ctx.channels();
        let mut members = vec![Vec::new(); 2 * channels];
        for unit in 0..profile.len() {
            if let Some(d) = profile.destination(unit) {
                let owner = ctx.tasks.user_of(unit);
                let m = profile.decision(unit) as usize;
                members[d.index() * channels + m - 1].push((owner, ctx.scenario.user(owner).link_weight(d)));
            }
        }
        ChannelLoads { channels, members }
    }

    /// Same summation order as [`radio::co_channel_sum`].
    fn sum_excluding(&self, destination: Destination, channel: u16, user: usize) -> f64 {
        let mut sum = 0.0;
        for &(owner, w) in &self.members[destination.index() * self.channels + channel as usize - 1] {
            if owner != user {
                sum += w;
            }
        }
        sum
    }
}

fn unit_cost(ctx: &GameContext<'_>, loads: &ChannelLoads, profile: &StrategyProfile, unit: usize) -> f64 {
    match profile.destination(unit) {
        None => ctx.local_costs[unit],
        Some(d) => {
            let user = ctx.tasks.user_of(unit);
            ctx.offload_cost_at(unit, d, loads.sum_excluding(d, profile.decision(unit), user))
        }
    }
}

/// Cheapest choice for one unit: `(decision, cost)`, local first, then the
/// lowest channel among equal costs.
fn unit_best_response(ctx: &GameContext<'_>, loads: &ChannelLoads, unit: usize) -> (u16, f64) {
    let user = ctx.tasks.user_of(unit);
    let d = ctx.destinations[unit];
    let mut best = (0u16, ctx.local_costs[unit]);
    for m in 1..=ctx.channels() as u16 {
        let c = ctx.offload_cost_at(unit, d, loads.sum_excluding(d, m, user));
        if c < best.1 {
            best = (m, c);
        }
    }
    best
}

/// Best-response decision vector of `user` against the frozen profile.
pub fn best_response(ctx: &GameContext<'_>, profile: &StrategyProfile, user: usize) -> Vec<u16> {
    let loads = ChannelLoads::build(ctx, profile);
    ctx.tasks
        .units_of(user)
        .map(|unit| unit_best_response(ctx, &loads, unit).0)
        .collect()
}

/// Units of `user` whose best response strictly lowers their cost.
fn improving_moves(ctx: &GameContext<'_>, loads: &ChannelLoads, profile: &StrategyProfile, user: usize) -> Vec<(usize, u16)> {
    ctx.tasks
        .units_of(user)
        .filter_map(|unit| {
            let current = unit_cost(ctx, loads, profile, unit);
            let (decision, best) = unit_best_response(ctx, loads, unit);
            (best < current).then_some((unit, decision))
        })
        .collect()
}

fn apply_decision(ctx: &GameContext<'_>, profile: &mut StrategyProfile, unit: usize, decision: u16) {
    if decision == 0 {
        profile.set_local(unit);
    } else {
        profile
            .set_offload(unit, decision, ctx.destinations[unit])
            .expect("best response stays within the channel range");
    }
}

/// Potential of a profile:
/// `½ ΣΣ_{i,j of different users} w_i w_j 1(same channel, same destination)
///  + Σ_i w_i Λ_i 1(local)`, with `Λ` the co-channel-sum threshold.
pub fn potential(ctx: &GameContext<'_>, profile: &StrategyProfile) -> f64 {
    let mut congestion = 0.0;
    let mut idle = 0.0;
    for i in 0..profile.len() {
        match profile.destination(i) {
            None => idle += ctx.weights[i] * ctx.thresholds[i].sum_scale,
            Some(d) => {
                let wi = ctx.scenario.user(ctx.tasks.user_of(i)).link_weight(d);
                for j in 0..profile.len() {
                    if j != i
                        && ctx.tasks.user_of(j) != ctx.tasks.user_of(i)
                        && profile.decision(j) == profile.decision(i)
                        && profile.destination(j) == Some(d)
                    {
                        congestion += wi * ctx.scenario.user(ctx.tasks.user_of(j)).link_weight(d);
                    }
                }
            }
        }
    }
    0.5 * congestion + idle
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub profile: StrategyProfile,
    /// Granted updates.
    pub iterations: usize,
    /// Potential before the first and after every granted update.
    pub potential_trace: Vec<f64>,
    pub converged: bool,
}

/// Decentralised best-response dynamics from the all-local profile. Each
/// round every user computes its best response; among users with a strictly
/// improving update one is granted uniformly at random and applies all of its
/// improving unit moves. The run ends when no user requests an update.
pub fn run_splitting_game<R: Rng + ?Sized>(ctx: &GameContext<'_>, max_iterations: usize, rng: &mut R) -> GameOutcome {
    let mut profile = StrategyProfile::all_local(ctx.units(), ctx.channels());
    let mut trace = vec![potential(ctx, &profile)];
    let mut iterations = 0;
    let users = ctx.tasks.user_count();
    loop {
        let loads = ChannelLoads::build(ctx, &profile);
        let mut requests: Vec<Vec<(usize, u16)>> = (0..users)
            .map(|k| improving_moves(ctx, &loads, &profile, k))
            .filter(|moves| !moves.is_empty())
            .collect();
        if requests.is_empty() {
            return GameOutcome {
                profile,
                iterations,
                potential_trace: trace,
                converged: true,
            };
        }
        if iterations >= max_iterations {
            return GameOutcome {
                profile,
                iterations,
                potential_trace: trace,
                converged: false,
            };
        }
        let granted = requests.swap_remove(rng.gen_range(0..requests.len()));
        for (unit, decision) in granted {
            apply_decision(ctx, &mut profile, unit, decision);
        }
        iterations += 1;
        trace.push(potential(ctx, &profile));
    }
}

/// True iff no user can strictly lower its own cost by changing any subset of
/// its units' decisions, checked by enumerating every decision vector of
/// every user against the otherwise frozen profile.
pub fn is_nash(ctx: &GameContext<'_>, profile: &StrategyProfile) -> Result<bool> {
    let options = ctx.channels() as u128 + 1;
    let per_user = options.checked_pow(ctx.tasks.subtasks_per_user as u32).unwrap_or(u128::MAX);
    if per_user > NASH_ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "per-user strategy space".into(),
            size: per_user,
            limit: NASH_ENUMERATION_LIMIT,
        });
    }
    for user in 0..ctx.tasks.user_count() {
        let current = cost::user_slot_cost(ctx.scenario, ctx.tasks, profile, user)?;
        let units: Vec<usize> = ctx.tasks.units_of(user).collect();
        let mut trial = profile.clone();
        for code in 0..per_user {
            let mut rest = code;
            for &unit in &units {
                let decision = (rest % options) as u16;
                rest /= options;
                apply_decision(ctx, &mut trial, unit, decision);
            }
            if cost::user_slot_cost(ctx.scenario, ctx.tasks, &trial, user)? < current {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Bound {
    pub omega_max: f64,
    pub omega_min: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub granularity: f64,
    /// Number of players (decision units).
    pub players: usize,
    pub bound: u64,
}

/// Finite-improvement bound
/// `⌈(½N²Ω²_max + N(Ω_max λ_max − Ω_min λ_min)) / π⌉` over the `N` decision
/// units, with `Ω = ρη` and `λ` the co-channel-sum thresholds.
pub fn lemma2_bound(ctx: &GameContext<'_>, granularity: f64) -> Result<Lemma2Bound> {
    if !(granularity > 0.0) {
        return Err(Error::Domain(format!("granularity must be positive, got {granularity}")));
    }
    let fold =
        |values: &mut dyn Iterator<Item = f64>| values.fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), v| (hi.max(v), lo.min(v)));
    let (omega_max, omega_min) = fold(&mut ctx.weights.iter().copied());
    let (lambda_max, lambda_min) = fold(&mut ctx.thresholds.iter().map(|t| t.sum_scale));
    let n = ctx.units() as f64;
    let range = 0.5 * n * n * omega_max * omega_max + n * (omega_max * lambda_max - omega_min * lambda_min);
    let bound = (range / granularity).ceil().max(1.0) as u64;
    Ok(Lemma2Bound {
        omega_max,
        omega_min,
        lambda_max,
        lambda_min,
        granularity,
        players: ctx.units(),
        bound,
    })
}

/// Smallest strict decrease between consecutive potentials, or
/// [`DEFAULT_GRANULARITY`] when the trace never decreases.
pub fn calibrate_granularity(potential_trace: &[f64]) -> f64 {
    potential_trace
        .windows(2)
        .map(|w| w[0] - w[1])
        .filter(|d| *d > 0.0)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
        .unwrap_or(DEFAULT_GRANULARITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scenario::generate_scenario;
    use crate::seeding::{stream_rng, Stream};

    fn instance(users: usize, channels: usize, subtasks: usize, seed: u64) -> (Scenario, TaskSet) {
        let config = ScenarioConfig {
            users,
            channels,
            subtasks,
            ..ScenarioConfig::default()
        };
        let scenario = generate_scenario(&config, seed).unwrap();
        let tasks = crate::scenario::generate_tasks(&config, &mut stream_rng(seed, Stream::Tasks));
        (scenario, tasks)
    }

    #[test]
    fn all_local_potential_is_idle_term() {
        let (s, t) = instance(3, 2, 2, 4);
        let ctx = GameContext::new(&s, &t);
        let p = StrategyProfile::all_local(t.len(), 2);
        let expected: f64 = (0..t.len()).map(|u| ctx.weights[u] * ctx.thresholds[u].sum_scale).sum();
        assert_eq!(potential(&ctx, &p), expected);
    }

    #[test]
    fn two_colliding_unit_weights_give_unit_potential() {
        let (mut s, t) = instance(2, 1, 1, 4);
        for u in &mut s.users {
            u.transmit_power_fin_w = 1.0;
            u.channel_gain_fin = 1.0;
        }
        let ctx = GameContext::new(&s, &t);
        let mut p = StrategyProfile::all_local(2, 1);
        p.set_offload(0, 1, Destination::Fin).unwrap();
        p.set_offload(1, 1, Destination::Fin).unwrap();
        assert_eq!(potential(&ctx, &p), 1.0);
    }

    #[test]
    fn single_user_converges_in_one_update() {
        let (s, t) = instance(1, 3, 4, 8);
        let ctx = GameContext::new(&s, &t);
        let out = run_splitting_game(&ctx, 100, &mut stream_rng(1, Stream::Game));
        assert!(out.converged);
        assert!(out.iterations <= 1);
        assert!(is_nash(&ctx, &out.profile).unwrap());
    }

    #[test]
    fn never_offload_units_stay_local() {
        let (mut s, t) = instance(2, 2, 1, 3);
        // Remote nodes as slow as the device and a pure delay objective.
        s.fin.cpu_hz = 1e9;
        s.ein.cpu_hz = 1e9;
        for u in &mut s.users {
            u.delay_weight = 1.0;
            u.energy_weight = 0.0;
        }
        let ctx = GameContext::new(&s, &t);
        assert!(ctx.thresholds.iter().all(|th| th.never_offload()));
        for k in 0..2 {
            assert!(best_response(&ctx, &StrategyProfile::all_local(2, 2), k).iter().all(|&d| d == 0));
        }
        assert!(is_nash(&ctx, &StrategyProfile::all_local(2, 2)).unwrap());
    }

    #[test]
    fn pending_request_is_not_nash() {
        let (s, t) = instance(3, 2, 1, 5);
        let ctx = GameContext::new(&s, &t);
        let p = StrategyProfile::all_local(t.len(), 2);
        let loads = ChannelLoads::build(&ctx, &p);
        assert!((0..3).any(|k| !improving_moves(&ctx, &loads, &p, k).is_empty()));
        assert!(!is_nash(&ctx, &p).unwrap());
    }

    #[test]
    fn potential_strictly_decreases_along_dynamics() {
        for seed in 0..20 {
            let (s, t) = instance(5, 2, 2, seed);
            let ctx = GameContext::new(&s, &t);
            let out = run_splitting_game(&ctx, 10_000, &mut stream_rng(seed, Stream::Game));
            assert!(out.converged);
            assert_eq!(out.potential_trace.len(), out.iterations + 1);
            for w in out.potential_trace.windows(2) {
                assert!(w[1] < w[0], "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let (s, t) = instance(4, 2, 2, 2);
        let ctx = GameContext::new(&s, &t);
        let out = run_splitting_game(&ctx, 0, &mut stream_rng(0, Stream::Game));
        assert!(!out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn oversized_enumeration_is_refused() {
        let (s, t) = instance(1, 40, 8, 2);
        let ctx = GameContext::new(&s, &t);
        let p = StrategyProfile::all_local(t.len(), 40);
        assert!(matches!(is_nash(&ctx, &p), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn bound_at_single_player() {
        let (s, t) = instance(1, 2, 1, 6);
        let ctx = GameContext::new(&s, &t);
        let b = lemma2_bound(&ctx, 1e-20).unwrap();
        let (o, l) = (ctx.weights[0], ctx.thresholds[0].sum_scale);
        let expected = ((0.5 * o * o + o * l - o * l) / 1e-20).ceil().max(1.0) as u64;
        assert_eq!(b.bound, expected);
        assert!(lemma2_bound(&ctx, 0.0).is_err());
        assert!(lemma2_bound(&ctx, -1.0).is_err());
    }

    #[test]
    fn calibration_picks_smallest_decrease() {
        assert_eq!(calibrate_granularity(&[5.0, 3.0, 2.5, 2.0]), 0.5);
        assert_eq!(calibrate_granularity(&[1.0]), DEFAULT_GRANULARITY);
    }
}
