//! Network-side double-DQN agent.
//!
//! The network maps a per-unit state coding to one value `Θ_v` per decision
//! unit; the Q-value of an action is `Σ code(b_v)·Θ_v` with codes 0 (local),
//! 1 (FIN) and 2 (EIN), so the cache-feasible greedy action is a knapsack
//! problem solved exactly by [`crate::solver`].

pub mod checkpoint;
pub mod mlp;
pub mod replay;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

pub use mlp::{Activation, ForwardTrace, Gradients, Layer, Mlp, Mode};
pub use replay::{ActionContext, ReplayMemory, Transition};

use crate::config::AgentConfig;
use crate::error::{Error, Result};
use crate::game::GameContext;
use crate::radio::StrategyProfile;
use crate::scenario::{Destination, NodeState};
use crate::solver::{self, KnapsackInstance};

/// Number of per-unit quantities averaged into the state scalar.
fn min_max(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
}

/// State coding: one scalar per unit followed by one activity indicator per
/// unit (1 when the game offloaded it, so the agent may place it).
///
/// The scalar sums seven features in `[0, 1]`: input size, software volume
/// and load (min-max scaled over the slot), device and destination CPU (relative to the fastest
/// processor), destination cache (relative to the larger cache) and the
/// destination backlog `q / (q + τ)`.
pub fn encode_state(ctx: &GameContext<'_>, fin: &NodeState, ein: &NodeState, profile: &StrategyProfile) -> Result<Vec<f64>> {
    let n = ctx.units();
    if profile.len() != n || ctx.destinations.len() != n {
        return Err(Error::Contract(format!("profile covers {} units, slot has {n}", profile.len())));
    }
    let units = &ctx.tasks.units;
    let input = min_max(units.iter().map(|u| u.input_bits));
    let volume = min_max(units.iter().map(|u| u.volume_bits));
    let load = min_max(units.iter().map(|u| u.load_cycles));
    let users = &ctx.scenario.users;
    let cpu_max = users
        .iter()
        .map(|u| u.local_cpu_hz)
        .chain([fin.cpu_hz, ein.cpu_hz])
        .fold(0.0, f64::max);
    let cache_max = fin.cache_bits.max(ein.cache_bits);
    let tau = ctx.scenario.config.deadline_s;

    let mut state = Vec::with_capacity(2 * n);
    for (unit, s) in units.iter().enumerate() {
        let node = match ctx.destinations[unit] {
            Destination::Fin => fin,
            Destination::Ein => ein,
        };
        let user = ctx.scenario.user(s.user);
        let backlog = node.queued_work();
        let cache = if cache_max > 0.0 { node.cache_bits / cache_max } else { 0.0 };
        let sum = input(s.input_bits)
            + volume(s.volume_bits)
            + load(s.load_cycles)
            + user.local_cpu_hz / cpu_max
            + node.cpu_hz / cpu_max
            + cache
            + backlog / (backlog + tau);
        state.push(sum);
    }
    state.extend((0..n).map(|u| if profile.is_offloaded(u) { 1.0 } else { 0.0 }));
    Ok(state)
}

/// `Q = Σ code(b_v)·Θ_v`.
pub fn q_value(theta: &[f64], action: &[u8]) -> Result<f64> {
    if theta.len() != action.len() {
        return Err(Error::Contract(format!(
            "{} values for an action of {} units",
            theta.len(),
            action.len()
        )));
    }
    let mut q = 0.0;
    for (t, &b) in theta.iter().zip(action) {
        if b > 2 {
            return Err(Error::Contract(format!("action code {b} outside {{0, 1, 2}}")));
        }
        q += f64::from(b) * t;
    }
    Ok(q)
}

/// Cache-feasible argmax of Q; ineligible units stay local.
pub fn solver_action(theta: &[f64], ctx: &ActionContext) -> Result<Vec<u8>> {
    let n = ctx.eligible.len();
    if theta.len() != n || ctx.volumes.len() != n {
        return Err(Error::Contract("action context does not match the value vector".into()));
    }
    let picked: Vec<usize> = (0..n).filter(|&u| ctx.eligible[u]).collect();
    let instance = KnapsackInstance::new(
        picked.iter().map(|&u| theta[u]).collect(),
        picked.iter().map(|&u| ctx.volumes[u]).collect(),
        ctx.fin_cache,
        ctx.ein_cache,
    );
    let chosen = solver::solve_optimal_action(&instance)?;
    let mut action = vec![0u8; n];
    for (&u, b) in picked.iter().zip(chosen) {
        action[u] = b;
    }
    Ok(action)
}

/// With probability `epsilon` follow the equilibrium action, otherwise the
/// solver's greedy action.
pub fn select_action<R: Rng + ?Sized>(theta: &[f64], epsilon: f64, ne_action: &[u8], ctx: &ActionContext, rng: &mut R) -> Result<Vec<u8>> {
    if rng.gen::<f64>() < epsilon {
        Ok(ne_action.to_vec())
    } else {
        solver_action(theta, ctx)
    }
}

/// Double-DQN target: the main network picks the next action, the target
/// network values it.
pub fn compute_target(transition: &Transition, main: &Mlp, target: &Mlp, gamma: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Ok(transition.reward);
    }
    let theta_main = main.forward(&transition.next_state, Mode::Inference)?;
    let best = solver_action(&theta_main, &transition.next_context)?;
    let theta_target = target.forward(&transition.next_state, Mode::Inference)?;
    Ok(transition.reward + gamma * q_value(&theta_target, &best)?)
}

pub fn huber(x: f64, delta: f64) -> f64 {
    if x.abs() <= delta {
        0.5 * x * x
    } else {
        delta * (x.abs() - 0.5 * delta)
    }
}

fn huber_slope(x: f64, delta: f64) -> f64 {
    x.clamp(-delta, delta)
}

/// Mean Huber loss of `main` against fixed targets, with its gradient.
pub fn loss_and_gradients(
    main: &Mlp,
    batch: &[&Transition],
    targets: &[f64],
    masks: &[Option<Vec<f64>>],
    delta: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() || batch.len() != targets.len() || batch.len() != masks.len() {
        return Err(Error::Contract("batch, targets and masks must be non-empty and aligned".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = Gradients::zeros_like(main);
    let mut out_grad = vec![0.0; main.output_width()];
    for ((t, &y), mask) in batch.iter().zip(targets).zip(masks) {
        let trace = main.forward_trace(&t.state, mask.as_deref())?;
        let err = q_value(trace.output(), &t.action)? - y;
        loss += scale * huber(err, delta);
        let slope = scale * huber_slope(err, delta);
        for (g, &b) in out_grad.iter_mut().zip(&t.action) {
            *g = slope * f64::from(b);
        }
        main.backward(&trace, &out_grad, &mut grads);
    }
    Ok((loss, grads))
}

/// Mean Huber loss only.
pub fn batch_loss(main: &Mlp, batch: &[&Transition], targets: &[f64], masks: &[Option<Vec<f64>>], delta: f64) -> Result<f64> {
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for ((t, &y), mask) in batch.iter().zip(targets).zip(masks) {
        let trace = main.forward_trace(&t.state, mask.as_deref())?;
        loss += scale * huber(q_value(trace.output(), &t.action)? - y, delta);
    }
    Ok(loss)
}

/// One gradient-descent step on the mean Huber loss; returns the loss
/// before the update. `dropout` draws input-dropout masks when given.
pub fn train_step(
    main: &mut Mlp,
    target: &Mlp,
    batch: &[&Transition],
    learning_rate: f64,
    gamma: f64,
    huber_delta: f64,
    dropout: Option<&mut dyn RngCore>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    let targets = batch
        .iter()
        .map(|t| compute_target(t, main, target, gamma))
        .collect::<Result<Vec<_>>>()?;
    let masks: Vec<Option<Vec<f64>>> = match dropout {
        Some(rng) if main.input_dropout > 0.0 => batch.iter().map(|_| Some(main.dropout_mask(rng))).collect(),
        _ => vec![None; batch.len()],
    };
    let (loss, grads) = loss_and_gradients(main, batch, &targets, &masks, huber_delta)?;
    if !loss.is_finite() || !grads.all_finite() {
        return Err(Error::NumericFault {
            layer: main.layers.len(),
            what: format!("non-finite loss or gradient (loss {loss})"),
        });
    }
    main.apply_gradients(&grads, learning_rate);
    Ok(loss)
}

/// Copies the main weights into the target network when `slot` is a
/// multiple of `period`. Returns whether a copy happened.
pub fn sync_target(main: &Mlp, target: &mut Mlp, slot: u64, period: usize) -> Result<bool> {
    if period == 0 {
        return Err(Error::Contract("target sync period must be at least 1".into()));
    }
    if slot % period as u64 == 0 {
        target.clone_from(main);
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Cost drop between consecutive slots.
pub fn reward(cost_t: f64, cost_t_plus_1: f64) -> f64 {
    cost_t - cost_t_plus_1
}

/// Main/target networks, replay memory and the agent's random stream.
#[derive(Clone, Debug)]
pub struct Agent {
    pub main: Mlp,
    pub target: Mlp,
    pub memory: ReplayMemory,
    pub config: AgentConfig,
    rng: ChaCha8Rng,
    slots: u64,
}

impl Agent {
    pub fn new(config: &AgentConfig, units: usize, mut rng: ChaCha8Rng) -> Result<Self> {
        let mut sizes = vec![2 * units];
        sizes.extend(&config.hidden_sizes);
        sizes.push(units);
        let main = Mlp::new(&sizes, config.input_dropout, &mut rng)?;
        Ok(Agent {
            target: main.clone(),
            main,
            memory: ReplayMemory::new(config.replay_capacity),
            config: config.clone(),
            rng,
            slots: 0,
        })
    }

    pub fn theta(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.main.forward(state, Mode::Inference)
    }

    pub fn act(&mut self, state: &[f64], epsilon: f64, ne_action: &[u8], ctx: &ActionContext) -> Result<Vec<u8>> {
        let theta = self.theta(state)?;
        select_action(&theta, epsilon, ne_action, ctx, &mut self.rng)
    }

    /// Stores a transition, scaling its reward by `reward_scale`.
    pub fn remember(&mut self, mut transition: Transition) -> Result<()> {
        transition.reward *= self.config.reward_scale;
        self.memory.push(transition)
    }

    /// One training step once the memory holds a full batch.
    pub fn learn(&mut self) -> Result<Option<f64>> {
        let Some(batch) = self.memory.sample(self.config.batch_size, &mut self.rng) else {
            return Ok(None);
        };
        let loss = train_step(
            &mut self.main,
            &self.target,
            &batch,
            self.config.learning_rate,
            self.config.discount,
            self.config.huber_delta,
            Some(&mut self.rng),
        )?;
        Ok(Some(loss))
    }

    /// Advances the slot counter and syncs the target network on schedule.
    pub fn end_slot(&mut self) -> Result<bool> {
        self.slots += 1;
        sync_target(&self.main, &mut self.target, self.slots, self.config.target_sync_period)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scenario::{generate_scenario, generate_tasks, TaskSet};
    use crate::seeding::{stream_rng, Stream};
    use rand::SeedableRng;

    fn ctx_all(n: usize, cache: f64) -> ActionContext {
        ActionContext {
            volumes: vec![1.0; n],
            eligible: vec![true; n],
            fin_cache: cache,
            ein_cache: cache,
        }
    }

    fn transition(state: Vec<f64>, action: Vec<u8>, reward: f64) -> Transition {
        let n = action.len();
        Transition {
            next_state: state.clone(),
            state,
            action,
            reward,
            next_context: ctx_all(n, n as f64),
        }
    }

    #[test]
    fn q_value_is_coded_dot_product() {
        assert_eq!(q_value(&[1.0, 2.0, 3.0], &[1, 1, 1]).unwrap(), 6.0);
        assert_eq!(q_value(&[1.0, 2.0, 3.0], &[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(q_value(&[1.0, 2.0, 3.0], &[2, 0, 1]).unwrap(), 5.0);
        assert!(q_value(&[1.0], &[1, 1]).is_err());
        assert!(q_value(&[1.0], &[3]).is_err());
    }

    #[test]
    fn epsilon_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ctx = ctx_all(3, 3.0);
        let theta = [1.0, -1.0, 2.0];
        let ne = [1, 1, 0];
        for _ in 0..100 {
            assert_eq!(select_action(&theta, 1.0, &ne, &ctx, &mut rng).unwrap(), ne);
            assert_eq!(select_action(&theta, 0.0, &ne, &ctx, &mut rng).unwrap(), vec![2, 0, 2]);
        }
    }

    #[test]
    fn ineligible_units_stay_local() {
        let mut ctx = ctx_all(3, 3.0);
        ctx.eligible[0] = false;
        assert_eq!(solver_action(&[5.0, 5.0, 5.0], &ctx).unwrap(), vec![0, 2, 2]);
    }

    #[test]
    fn zero_discount_target_is_reward() {
        let net = Mlp::new(&[4, 3, 2], 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let t = transition(vec![0.1, 0.2, 1.0, 0.0], vec![1, 0], 2.5);
        assert_eq!(compute_target(&t, &net, &net, 0.0).unwrap(), 2.5);
    }

    #[test]
    fn target_on_fixture_nets() {
        // Output-only nets with fixed biases: Θ_main = (1, -1), Θ_target = (3, 4).
        let mut main = Mlp::zeros(&[2, 2], 0.0).unwrap();
        main.layers[0].biases = vec![1.0, -1.0];
        let mut target = main.clone();
        target.layers[0].biases = vec![3.0, 4.0];
        let t = transition(vec![0.0, 0.0], vec![1, 1], 1.0);
        // main picks (2, 0); target values it at 2*3 = 6.
        assert_eq!(compute_target(&t, &main, &target, 0.5).unwrap(), 1.0 + 0.5 * 6.0);
    }

    #[test]
    fn single_transition_loss_by_hand() {
        let mut main = Mlp::zeros(&[2, 2], 0.0).unwrap();
        main.layers[0].biases = vec![0.5, 0.25];
        let t = transition(vec![0.0, 0.0], vec![1, 2], 0.0);
        // q = 0.5 + 0.5 = 1, target 0 -> huber(1) = 0.5; target 3 -> huber(-2) = 1.5
        let b = [&t];
        assert_eq!(batch_loss(&main, &b, &[0.0], &[None], 1.0).unwrap(), 0.5);
        assert_eq!(batch_loss(&main, &b, &[3.0], &[None], 1.0).unwrap(), 1.5);
        let frozen = main.clone();
        let loss = train_step(&mut main, &frozen, &b, 0.1, 0.0, 1.0, None).unwrap();
        assert_eq!(loss, 0.5);
        // dL/dq = 1, so biases move by -0.1 * code
        assert!((main.layers[0].biases[0] - 0.4).abs() < 1e-15);
        assert!((main.layers[0].biases[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_leaves_weights_unchanged() {
        let mut main = Mlp::new(&[3, 4, 2], 0.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let state = vec![0.3, 0.6, 1.0];
        let theta = main.forward(&state, Mode::Inference).unwrap();
        let action = vec![1u8, 2];
        let reward = q_value(&theta, &action).unwrap();
        let t = transition(state, action, reward);
        let before = main.clone();
        let loss = train_step(&mut main, &before, &[&t], 0.5, 0.0, 1.0, None).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(main, before);
    }

    #[test]
    fn non_finite_loss_aborts_update() {
        let mut main = Mlp::zeros(&[2, 2], 0.0).unwrap();
        let t = transition(vec![0.0, 0.0], vec![1, 0], f64::INFINITY);
        let before = main.clone();
        let err = train_step(&mut main, &before, &[&t], 0.1, 0.0, 1.0, None).unwrap_err();
        assert!(matches!(err, Error::NumericFault { .. }));
        assert_eq!(main, before);
    }

    #[test]
    fn sync_schedule() {
        let main = Mlp::new(&[2, 2], 0.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut target = Mlp::zeros(&[2, 2], 0.0).unwrap();
        assert!(!sync_target(&main, &mut target, 7, 10).unwrap());
        assert_ne!(target, main);
        assert!(sync_target(&main, &mut target, 20, 10).unwrap());
        assert_eq!(target, main);
        assert!(sync_target(&main, &mut target, 3, 0).is_err());
    }

    #[test]
    fn reward_is_cost_drop() {
        assert_eq!(reward(10.0, 4.0), 6.0);
        assert_eq!(reward(3.0, 3.0), 0.0);
    }

    fn slot(config: &ScenarioConfig, seed: u64) -> (crate::scenario::Scenario, TaskSet) {
        let s = generate_scenario(config, seed).unwrap();
        let t = generate_tasks(config, &mut stream_rng(seed, Stream::Tasks));
        (s, t)
    }

    #[test]
    fn state_layout_and_indicators() {
        let config = ScenarioConfig {
            users: 3,
            subtasks: 2,
            ..ScenarioConfig::default()
        };
        let (s, t) = slot(&config, 1);
        let ctx = GameContext::new(&s, &t);
        let mut p = StrategyProfile::all_local(6, config.channels);
        p.set_offload(4, 1, ctx.destinations[4]).unwrap();
        let x = encode_state(&ctx, &s.fin, &s.ein, &p).unwrap();
        assert_eq!(x.len(), 12);
        assert_eq!(&x[6..], &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(x[..6].iter().all(|v| (0.0..=7.0).contains(v)));
        assert!(encode_state(&ctx, &s.fin, &s.ein, &StrategyProfile::all_local(5, 2)).is_err());
    }

    #[test]
    fn identical_subtasks_encode_identically() {
        let config = ScenarioConfig {
            users: 1,
            subtasks: 4,
            input_max: 1,
            volume_max: 1,
            load_max: 1,
            ..ScenarioConfig::default()
        };
        let (s, t) = slot(&config, 2);
        let ctx = GameContext::new(&s, &t);
        let x = encode_state(&ctx, &s.fin, &s.ein, &StrategyProfile::all_local(4, config.channels)).unwrap();
        assert!(x[..4].iter().all(|v| *v == x[0]));
    }

    #[test]
    fn doubling_payload_keeps_encoding() {
        let config = ScenarioConfig {
            users: 4,
            subtasks: 3,
            ..ScenarioConfig::default()
        };
        let (s, t) = slot(&config, 3);
        let mut doubled = t.clone();
        for u in &mut doubled.units {
            u.input_bits *= 2.0;
            u.volume_bits *= 2.0;
            u.load_cycles *= 2.0;
        }
        let p = StrategyProfile::all_local(t.len(), config.channels);
        let a = encode_state(&GameContext::new(&s, &t), &s.fin, &s.ein, &p).unwrap();
        let b = {
            let mut ctx = GameContext::new(&s, &doubled);
            // Keep the destinations of the original slot so only the payload changes.
            ctx.destinations = GameContext::new(&s, &t).destinations;
            encode_state(&ctx, &s.fin, &s.ein, &p).unwrap()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn agent_network_shape() {
        let cfg = AgentConfig {
            hidden_sizes: vec![8],
            ..AgentConfig::default()
        };
        let agent = Agent::new(&cfg, 5, stream_rng(0, Stream::Agent)).unwrap();
        assert_eq!(agent.main.sizes(), vec![10, 8, 5]);
        assert_eq!(agent.main, agent.target);
    }
}
