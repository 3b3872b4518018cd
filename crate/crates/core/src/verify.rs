//! Self-checks run by `coinsim verify`: each compares a fast code path with
//! a slower reference on random instances.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{self, checkpoint, ActionContext, Mlp, Transition};
use crate::config::{QueueModel, ScenarioConfig};
use crate::cost;
use crate::error::Result;
use crate::game::{self, GameContext};
use crate::radio::{self, StrategyProfile};
use crate::scenario::{generate_scenario, generate_tasks, NodeState, Scenario, TaskSet};
use crate::seeding::{stream_rng, Stream};
use crate::solver::{self, KnapsackInstance};

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn report(name: &'static str, failures: usize, detail: String) -> CheckReport {
    CheckReport {
        name,
        passed: failures == 0,
        detail,
    }
}

fn small_instance(rng: &mut ChaCha8Rng, max_users: usize, max_channels: usize, max_subtasks: usize) -> Result<(Scenario, TaskSet)> {
    let config = ScenarioConfig {
        users: rng.gen_range(1..=max_users),
        channels: rng.gen_range(1..=max_channels),
        subtasks: rng.gen_range(1..=max_subtasks),
        ..ScenarioConfig::default()
    };
    let scenario = generate_scenario(&config, rng.gen())?;
    let tasks = generate_tasks(&config, rng);
    Ok((scenario, tasks))
}

/// Queue-free cost of one unit under a profile.
fn unit_cost(scenario: &Scenario, tasks: &TaskSet, profile: &StrategyProfile, unit: usize) -> Result<f64> {
    let user = scenario.user(tasks.user_of(unit));
    let subtask = tasks.unit(unit);
    Ok(match profile.destination(unit) {
        None => cost::local_cost(user, subtask, &scenario.config).weighted_cost,
        Some(d) => {
            let rate = radio::uplink_rate(scenario, tasks, profile, unit)?;
            cost::offload_cost(user, subtask, scenario.node(d), rate, None)?.weighted_cost
        }
    })
}

/// Every strictly improving single-unit move lowers the potential.
pub fn check_potential(rng: &mut ChaCha8Rng, moves: usize) -> Result<CheckReport> {
    let (mut accepted, mut violations) = (0, 0);
    while accepted < moves {
        let (s, t) = small_instance(rng, 6, 3, 3)?;
        let ctx = GameContext::new(&s, &t);
        let m = s.config.channels as u16;
        let mut profile = StrategyProfile::all_local(t.len(), s.config.channels);
        for u in 0..t.len() {
            let d = rng.gen_range(0..=m);
            if d > 0 {
                profile.set_offload(u, d, ctx.destinations[u])?;
            }
        }
        for _ in 0..50 {
            let u = rng.gen_range(0..t.len());
            let d = rng.gen_range(0..=m);
            let mut next = profile.clone();
            if d == 0 {
                next.set_local(u);
            } else {
                next.set_offload(u, d, ctx.destinations[u])?;
            }
            if unit_cost(&s, &t, &next, u)? < unit_cost(&s, &t, &profile, u)? {
                accepted += 1;
                if !(game::potential(&ctx, &next) < game::potential(&ctx, &profile)) {
                    violations += 1;
                }
                profile = next;
            }
        }
    }
    Ok(report(
        "potential decreases on improving moves",
        violations,
        format!("{accepted} moves, {violations} violations"),
    ))
}

/// Game outcomes are equilibria and respect the iteration bound.
pub fn check_equilibria(rng: &mut ChaCha8Rng, instances: usize) -> Result<CheckReport> {
    let mut failures = 0;
    for _ in 0..instances {
        let (s, t) = small_instance(rng, 4, 2, 2)?;
        let ctx = GameContext::new(&s, &t);
        let out = game::run_splitting_game(&ctx, 10_000, rng);
        let bound = game::lemma2_bound(&ctx, game::calibrate_granularity(&out.potential_trace))?;
        if !out.converged || !game::is_nash(&ctx, &out.profile)? || out.iterations as u64 > bound.bound {
            failures += 1;
        }
    }
    Ok(report(
        "game reaches a certified equilibrium",
        failures,
        format!("{instances} instances, {failures} failures"),
    ))
}

/// The threshold test agrees with a direct cost comparison.
pub fn check_threshold(rng: &mut ChaCha8Rng, trials: usize) -> Result<CheckReport> {
    let mut failures = 0;
    let (s, t) = small_instance(rng, 6, 4, 4)?;
    for _ in 0..trials {
        let unit = rng.gen_range(0..t.len());
        let user = s.user(t.user_of(unit));
        let subtask = t.unit(unit);
        let d = *crate::scenario::Destination::ALL.choose(rng).expect("two destinations");
        let th = radio::offload_threshold(&s, user, subtask, d);
        let rate = 10f64.powf(rng.gen_range(5.0..9.0));
        let local = cost::local_cost(user, subtask, &s.config).weighted_cost;
        let remote = cost::offload_cost(user, subtask, s.node(d), rate, None)?.weighted_cost;
        if th.admits_rate(rate) != (local >= remote) {
            failures += 1;
        }
    }
    Ok(report(
        "threshold matches cost comparison",
        failures,
        format!("{trials} trials, {failures} disagreements"),
    ))
}

/// DP knapsack matches exhaustive search.
pub fn check_knapsack(rng: &mut ChaCha8Rng, instances: usize) -> Result<CheckReport> {
    let mut failures = 0;
    for _ in 0..instances {
        let f = rng.gen_range(1..=8);
        let inst = KnapsackInstance::new(
            (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            (0..f).map(|_| f64::from(rng.gen_range(1u32..=10))).collect(),
            f64::from(rng.gen_range(0u32..=20)),
            f64::from(rng.gen_range(0u32..=20)),
        );
        let dp = solver::solve_optimal_action(&inst)?;
        let bf = solver::brute_force_action(&inst)?;
        if !inst.feasible(&dp) || solver::objective(&inst.values, &dp) != solver::objective(&inst.values, &bf) {
            failures += 1;
        }
    }
    Ok(report(
        "knapsack DP matches enumeration",
        failures,
        format!("{instances} instances, {failures} mismatches"),
    ))
}

/// Backpropagated gradients match central differences.
pub fn check_gradients(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    let mut net = Mlp::new(&[6, 8, 6, 3], 0.0, rng)?;
    let batch: Vec<Transition> = (0..4)
        .map(|_| Transition {
            state: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action: (0..3).map(|_| rng.gen_range(0..=2)).collect(),
            reward: 0.0,
            next_state: vec![0.0; 6],
            next_context: ActionContext {
                volumes: vec![1.0; 3],
                eligible: vec![true; 3],
                fin_cache: 1.0,
                ein_cache: 1.0,
            },
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let targets: Vec<f64> = (0..refs.len()).map(|i| if i % 2 == 0 { 0.3 } else { 4.0 }).collect();
    let masks = vec![None; refs.len()];
    let (_, grads) = agent::loss_and_gradients(&net, &refs, &targets, &masks, 1.0)?;
    let analytic = grads.flatten();
    let base = net.parameters();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        net.set_parameters(&p)?;
        let up = agent::batch_loss(&net, &refs, &targets, &masks, 1.0)?;
        p[i] = base[i] - h;
        net.set_parameters(&p)?;
        let down = agent::batch_loss(&net, &refs, &targets, &masks, 1.0)?;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs());
        if scale > 1e-9 {
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
    }
    let failures = usize::from(worst >= 1e-4);
    Ok(report(
        "gradients match finite differences",
        failures,
        format!("{} parameters, worst relative error {worst:.2e}", base.len()),
    ))
}

/// Queue delay on hand-evaluated cases.
pub fn check_queue() -> CheckReport {
    let node = |q: &[f64]| {
        let mut n = NodeState::new(crate::scenario::Destination::Fin, 1e9, 0.0);
        q.iter().for_each(|&s| n.enqueue(s));
        n
    };
    let mut failures = 0;
    failures += usize::from(cost::queue_delay(&node(&[]), 0.7, QueueModel::PaperLiteral).queue_delay != 0.7);
    failures += usize::from(cost::queue_delay(&node(&[2.0]), 1.0, QueueModel::PaperLiteral).queue_delay != 3.0);
    failures += usize::from(cost::queue_delay(&node(&[]), 0.7, QueueModel::WaitingOnly).queue_delay != 0.0);
    let u = 0.25 / 0.5;
    let q = cost::QueueSnapshot::from_rates(2.0, 0.25, 0.5, 0.0, QueueModel::PaperLiteral).queue_delay;
    failures += usize::from(((q - u * u / (1.0 - u) * 2.0) / q).abs() > 1e-12);
    report("queue delay cases", failures, format!("4 cases, {failures} wrong"))
}

pub fn check_checkpoint(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    let net = Mlp::new(&[10, 16, 5], 0.1, rng)?;
    let back = checkpoint::decode(&checkpoint::encode(&net))?;
    let same = back
        .parameters()
        .iter()
        .zip(net.parameters())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && back == net;
    Ok(report(
        "checkpoint round trip",
        usize::from(!same),
        format!("{} parameters", net.parameter_count()),
    ))
}

pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = stream_rng(seed, Stream::Policy);
    Ok(vec![
        check_potential(&mut rng, 1000)?,
        check_equilibria(&mut rng, 100)?,
        check_threshold(&mut rng, 10_000)?,
        check_knapsack(&mut rng, 500)?,
        check_gradients(&mut rng)?,
        check_queue(),
        check_checkpoint(&mut rng)?,
    ])
}
