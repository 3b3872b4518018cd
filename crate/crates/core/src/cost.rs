//! Delay, energy and weighted cost of local, FIN and EIN execution.

use serde::{Deserialize, Serialize};

use crate::config::{QueueModel, ScenarioConfig};
use crate::error::{Error, Result};
use crate::radio::{self, Placement, StrategyProfile};
use crate::scenario::{Destination, NodeState, Scenario, SubtaskSpec, TaskSet, UserSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub delay: f64,
    pub energy: f64,
    pub weighted_cost: f64,
    /// Included in `delay`; zero for local execution.
    pub queue_delay: f64,
    pub placement: Placement,
}

fn weighted(user: &UserSpec, delay: f64, energy: f64) -> f64 {
    user.delay_weight * delay + user.energy_weight * energy
}

/// Local execution: `T = P/F_L`, `E = λ·P³/τ²`.
pub fn local_cost(user: &UserSpec, subtask: &SubtaskSpec, config: &ScenarioConfig) -> CostBreakdown {
    let delay = subtask.load_cycles / user.local_cpu_hz;
    let energy = config.energy_coefficient * subtask.load_cycles.powi(3) / (config.deadline_s * config.deadline_s);
    CostBreakdown {
        delay,
        energy,
        weighted_cost: weighted(user, delay, energy),
        queue_delay: 0.0,
        placement: Placement::Local,
    }
}

/// Execution plus transmission delay: `P/F + (I+V)/ω`.
pub fn offload_delay_no_queue(subtask: &SubtaskSpec, cpu_hz: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Domain(format!("uplink rate must be positive, got {rate}")));
    }
    Ok(subtask.load_cycles / cpu_hz + subtask.payload_bits() / rate)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueSnapshot {
    pub service_time: f64,
    pub arrival_rate: f64,
    /// `f64::INFINITY` for an empty queue.
    pub service_rate: f64,
    pub utilization: f64,
    pub queue_delay: f64,
}

impl QueueSnapshot {
    /// Apply the delay branch rule to explicit rates. A utilization of at
    /// least one takes the saturated branch (`Σq + s`), anything lower the
    /// `u²/(1-u)·s` branch.
    pub fn from_rates(service_time: f64, arrival_rate: f64, service_rate: f64, queued_work: f64, model: QueueModel) -> Self {
        let utilization = if service_rate.is_finite() {
            arrival_rate / service_rate
        } else {
            1.0
        };
        let queue_delay = if utilization >= 1.0 {
            match model {
                QueueModel::PaperLiteral => queued_work + service_time,
                QueueModel::WaitingOnly => queued_work,
            }
        } else {
            utilization * utilization / (1.0 - utilization) * service_time
        };
        QueueSnapshot {
            service_time,
            arrival_rate,
            service_rate,
            utilization,
            queue_delay,
        }
    }
}

/// Queue delay seen by a job of `service_time` seconds joining `node`.
pub fn queue_delay(node: &NodeState, service_time: f64, model: QueueModel) -> QueueSnapshot {
    debug_assert!(service_time > 0.0);
    let arrival_rate = 1.0 / service_time;
    let queued = node.queued_work();
    let service_rate = if node.queue.is_empty() {
        f64::INFINITY
    } else {
        1.0 / (queued + service_time)
    };
    QueueSnapshot::from_rates(service_time, arrival_rate, service_rate, queued, model)
}

/// Offloading cost at a given uplink rate. With `queue = None` the delay is
/// execution plus transmission only (the user-side view); with a queue model
/// the node's current queue is charged as well.
pub fn offload_cost(
    user: &UserSpec,
    subtask: &SubtaskSpec,
    node: &NodeState,
    rate: f64,
    queue: Option<QueueModel>,
) -> Result<CostBreakdown> {
    let base = offload_delay_no_queue(subtask, node.cpu_hz, rate)?;
    let transmit = subtask.payload_bits() / rate;
    let queue_delay = match queue {
        Some(model) => self::queue_delay(node, base, model).queue_delay,
        None => 0.0,
    };
    let delay = base + queue_delay;
    let energy = user.transmit_power(node.kind) * transmit;
    Ok(CostBreakdown {
        delay,
        energy,
        weighted_cost: weighted(user, delay, energy),
        queue_delay,
        placement: Placement::offloaded(node.kind),
    })
}

/// Queue-free cost of one user's subtasks under the profile.
pub fn user_slot_cost(scenario: &Scenario, tasks: &TaskSet, profile: &StrategyProfile, user: usize) -> Result<f64> {
    profile.validate(tasks.len())?;
    let spec = scenario.user(user);
    let mut total = 0.0;
    for unit in tasks.units_of(user) {
        let subtask = tasks.unit(unit);
        total += match profile.destination(unit) {
            None => local_cost(spec, subtask, &scenario.config).weighted_cost,
            Some(d) => {
                let rate = radio::uplink_rate(scenario, tasks, profile, unit)?;
                offload_cost(spec, subtask, scenario.node(d), rate, None)?.weighted_cost
            }
        };
    }
    Ok(total)
}

/// Total software volume offloaded to each destination, `[FIN, EIN]`.
pub fn cache_usage(tasks: &TaskSet, profile: &StrategyProfile) -> [f64; 2] {
    let mut used = [0.0; 2];
    for unit in 0..profile.len() {
        if let Some(d) = profile.destination(unit) {
            used[d.index()] += tasks.unit(unit).volume_bits;
        }
    }
    used
}

pub fn check_caches(tasks: &TaskSet, profile: &StrategyProfile, fin: &NodeState, ein: &NodeState) -> Result<()> {
    let used = cache_usage(tasks, profile);
    for node in [fin, ein] {
        let u = used[node.kind.index()];
        if u > node.cache_bits {
            return Err(Error::CacheOverflow {
                destination: node.kind,
                used: u,
                capacity: node.cache_bits,
            });
        }
    }
    Ok(())
}

/// Queue-inclusive evaluation of one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotCosts {
    pub units: Vec<CostBreakdown>,
    pub per_user: Vec<f64>,
    pub total: f64,
    /// Offloaded units whose delay exceeds the deadline.
    pub deadline_violations: usize,
    /// Node states after enqueueing this slot's offloaded jobs.
    pub fin_after: NodeState,
    pub ein_after: NodeState,
}

/// Evaluate every unit in index order. Offloaded jobs join their node's
/// queue in that order, so later units in the same slot see earlier ones.
pub fn evaluate_profile(
    scenario: &Scenario,
    tasks: &TaskSet,
    profile: &StrategyProfile,
    fin: &NodeState,
    ein: &NodeState,
    queue_model: Option<QueueModel>,
) -> Result<SlotCosts> {
    profile.validate(tasks.len())?;
    let mut nodes = [fin.clone(), ein.clone()];
    let mut units = Vec::with_capacity(tasks.len());
    let mut per_user = vec![0.0; tasks.user_count()];
    let mut deadline_violations = 0;
    for unit in 0..tasks.len() {
        let user_id = tasks.user_of(unit);
        let user = scenario.user(user_id);
        let subtask = tasks.unit(unit);
        let breakdown = match profile.destination(unit) {
            None => local_cost(user, subtask, &scenario.config),
            Some(d) => {
                let rate = radio::uplink_rate(scenario, tasks, profile, unit)?;
                let node = &mut nodes[d.index()];
                let b = offload_cost(user, subtask, node, rate, queue_model)?;
                if queue_model.is_some() {
                    node.enqueue(b.delay - b.queue_delay);
                }
                if b.delay > scenario.config.deadline_s {
                    deadline_violations += 1;
                }
                b
            }
        };
        per_user[user_id] += breakdown.weighted_cost;
        units.push(breakdown);
    }
    let total = per_user.iter().sum();
    let [fin_after, ein_after] = nodes;
    Ok(SlotCosts {
        units,
        per_user,
        total,
        deadline_violations,
        fin_after,
        ein_after,
    })
}

/// Queue-inclusive system cost of a cache-feasible profile.
pub fn system_cost(scenario: &Scenario, tasks: &TaskSet, profile: &StrategyProfile, fin: &NodeState, ein: &NodeState) -> Result<SlotCosts> {
    profile.validate(tasks.len())?;
    check_caches(tasks, profile, fin, ein)?;
    evaluate_profile(scenario, tasks, profile, fin, ein, Some(scenario.config.queue_model))
}

/// Destination-indexed helper for callers that hold both nodes.
pub fn node_of<'a>(fin: &'a NodeState, ein: &'a NodeState, d: Destination) -> &'a NodeState {
    match d {
        Destination::Fin => fin,
        Destination::Ein => ein,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_scenario;

    fn user(delay_weight: f64) -> UserSpec {
        UserSpec {
            id: 0,
            transmit_power_fin_w: 0.5,
            transmit_power_ein_w: 0.5,
            channel_gain_fin: 1e-8,
            channel_gain_ein: 1e-9,
            local_cpu_hz: 1e9,
            delay_weight,
            energy_weight: 1.0 - delay_weight,
            position: (0.0, 0.0),
        }
    }

    fn subtask(i: f64, v: f64, p: f64) -> SubtaskSpec {
        SubtaskSpec {
            user: 0,
            index: 0,
            input_bits: i,
            volume_bits: v,
            load_cycles: p,
        }
    }

    #[test]
    fn local_delay_and_energy() {
        let cfg = ScenarioConfig::default();
        let c = local_cost(&user(0.5), &subtask(1.0, 1.0, 1e9), &cfg);
        assert_eq!(c.delay, 1.0);
        assert!((c.energy - 5.0).abs() < 1e-12);
        let c = local_cost(&user(1.0), &subtask(1.0, 1.0, 3e9), &cfg);
        assert_eq!(c.weighted_cost, c.delay);
    }

    #[test]
    fn offload_delay_parts() {
        let s = subtask(4e5, 6e5, 1e9);
        assert!((offload_delay_no_queue(&s, 1e10, 1e6).unwrap() - 1.1).abs() < 1e-12);
        assert_eq!(offload_delay_no_queue(&subtask(0.0, 0.0, 1e9), 1e10, 1e6).unwrap(), 0.1);
        assert_eq!(offload_delay_no_queue(&s, f64::INFINITY, 1e6).unwrap(), 1.0);
        assert!(matches!(offload_delay_no_queue(&s, 1e10, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn queue_branches() {
        let mut node = NodeState::new(Destination::Fin, 1.0, 0.0);
        let q = queue_delay(&node, 1.0, QueueModel::PaperLiteral);
        assert_eq!((q.service_rate, q.utilization, q.queue_delay), (f64::INFINITY, 1.0, 1.0));
        assert_eq!(queue_delay(&node, 1.0, QueueModel::WaitingOnly).queue_delay, 0.0);

        node.enqueue(2.0);
        let q = queue_delay(&node, 1.0, QueueModel::PaperLiteral);
        assert_eq!(q.arrival_rate, 1.0);
        assert!((q.service_rate - 1.0 / 3.0).abs() < 1e-15);
        assert!((q.utilization - 3.0).abs() < 1e-12);
        assert_eq!(q.queue_delay, 3.0);

        let q = QueueSnapshot::from_rates(2.0, 0.25, 0.5, 0.0, QueueModel::PaperLiteral);
        assert_eq!(q.utilization, 0.5);
        assert_eq!(q.queue_delay, 0.25 / 0.5 * 2.0);
    }

    #[test]
    fn transmission_energy() {
        let node = NodeState::new(Destination::Ein, 1e11, 0.0);
        let c = offload_cost(&user(0.5), &subtask(1e6, 1e6, 1e9), &node, 1e6, None).unwrap();
        assert!((c.energy - 1.0).abs() < 1e-12);
        let c = offload_cost(&user(1.0), &subtask(1e6, 1e6, 1e9), &node, 1e6, None).unwrap();
        assert_eq!(c.weighted_cost, offload_delay_no_queue(&subtask(1e6, 1e6, 1e9), 1e11, 1e6).unwrap());
    }

    #[test]
    fn queue_delay_grows_with_queued_work() {
        let mut node = NodeState::new(Destination::Fin, 1.0, 0.0);
        let mut last = queue_delay(&node, 0.5, QueueModel::PaperLiteral).queue_delay;
        for w in [0.1, 0.7, 2.0, 0.3] {
            node.enqueue(w);
            let q = queue_delay(&node, 0.5, QueueModel::PaperLiteral).queue_delay;
            assert!(q >= last);
            last = q;
        }
    }

    #[test]
    fn zero_ein_cache_rejects_ein_offload() {
        let config = ScenarioConfig {
            users: 1,
            subtasks: 1,
            ein_cache: 0.0,
            ..ScenarioConfig::default()
        };
        let s = generate_scenario(&config, 1).unwrap();
        let tasks = TaskSet::from_units(1, vec![subtask(1e6, 1e6, 1e9)]);
        let mut p = StrategyProfile::all_local(1, config.channels);
        p.set_offload(0, 1, Destination::Ein).unwrap();
        match system_cost(&s, &tasks, &p, &s.fin, &s.ein) {
            Err(Error::CacheOverflow { destination, .. }) => assert_eq!(destination, Destination::Ein),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn all_local_system_cost_is_sum_of_local_costs() {
        let config = ScenarioConfig {
            users: 1,
            subtasks: 3,
            ..ScenarioConfig::default()
        };
        let s = generate_scenario(&config, 1).unwrap();
        let tasks = TaskSet::from_units(3, (1..4).map(|k| subtask(1e6, 1e6, k as f64 * 1e9)).collect());
        let p = StrategyProfile::all_local(3, config.channels);
        let expected: f64 = tasks.units.iter().map(|t| local_cost(&s.users[0], t, &config).weighted_cost).sum();
        let got = system_cost(&s, &tasks, &p, &s.fin, &s.ein).unwrap();
        assert_eq!(got.total, expected);
        assert_eq!(user_slot_cost(&s, &tasks, &p, 0).unwrap(), expected);
        assert_eq!(got.fin_after, s.fin);
    }
}
