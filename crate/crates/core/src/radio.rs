//! Uplink rates, received interference and the offloading threshold.
//!
//! Interference is scoped by `(channel, destination)`: the FIN and EIN bands
//! do not interfere, and a user's own subtasks never interfere with each
//! other. Sums run over decision units in index order so every caller that
//! sums the same set gets bit-identical values.

use serde::{Deserialize, Serialize};

use crate::cost;
use crate::error::{Error, Result};
use crate::scenario::{Destination, Scenario, SubtaskSpec, TaskSet, UserSpec};

/// Execution placement of one decision unit, coded `0 = local`,
/// `1 = FIN`, `2 = EIN`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placement {
    Local,
    Fin,
    Ein,
}

impl Placement {
    pub const ALL: [Placement; 3] = [Placement::Local, Placement::Fin, Placement::Ein];

    pub fn code(self) -> u8 {
        match self {
            Placement::Local => 0,
            Placement::Fin => 1,
            Placement::Ein => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Placement> {
        match code {
            0 => Some(Placement::Local),
            1 => Some(Placement::Fin),
            2 => Some(Placement::Ein),
            _ => None,
        }
    }

    pub fn destination(self) -> Option<Destination> {
        match self {
            Placement::Local => None,
            Placement::Fin => Some(Destination::Fin),
            Placement::Ein => Some(Destination::Ein),
        }
    }

    pub fn offloaded(destination: Destination) -> Placement {
        match destination {
            Destination::Fin => Placement::Fin,
            Destination::Ein => Placement::Ein,
        }
    }
}

/// Splitting decision per decision unit: `0` runs locally, `m ≥ 1` offloads
/// on channel `m`. Offloaded units carry a destination; local units never do.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategyProfile {
    channels: usize,
    decisions: Vec<u16>,
    destinations: Vec<Option<Destination>>,
}

impl StrategyProfile {
    pub fn all_local(units: usize, channels: usize) -> Self {
        StrategyProfile {
            channels,
            decisions: vec![0; units],
            destinations: vec![None; units],
        }
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn decision(&self, unit: usize) -> u16 {
        self.decisions[unit]
    }

    pub fn destination(&self, unit: usize) -> Option<Destination> {
        self.destinations[unit]
    }

    pub fn placement(&self, unit: usize) -> Placement {
        self.destinations[unit].map_or(Placement::Local, Placement::offloaded)
    }

    pub fn is_offloaded(&self, unit: usize) -> bool {
        self.decisions[unit] > 0
    }

    pub fn set_local(&mut self, unit: usize) {
        self.decisions[unit] = 0;
        self.destinations[unit] = None;
    }

    pub fn set_offload(&mut self, unit: usize, channel: u16, destination: Destination) -> Result<()> {
        if channel == 0 || channel as usize > self.channels {
            return Err(Error::Contract(format!("channel {channel} outside 1..={}", self.channels)));
        }
        self.decisions[unit] = channel;
        self.destinations[unit] = Some(destination);
        Ok(())
    }

    /// Move an offloaded unit to another destination, keeping its channel.
    pub fn retarget(&mut self, unit: usize, placement: Placement) -> Result<()> {
        match placement.destination() {
            None => self.set_local(unit),
            Some(d) => {
                if !self.is_offloaded(unit) {
                    return Err(Error::Contract(format!("unit {unit} has no channel to retarget")));
                }
                self.destinations[unit] = Some(d);
            }
        }
        Ok(())
    }

    pub fn placements(&self) -> Vec<Placement> {
        (0..self.len()).map(|u| self.placement(u)).collect()
    }

    pub fn validate(&self, units: usize) -> Result<()> {
        if self.len() != units {
            return Err(Error::Contract(format!("profile covers {} units, expected {units}", self.len())));
        }
        for (u, (&d, dest)) in self.decisions.iter().zip(&self.destinations).enumerate() {
            if d as usize > self.channels {
                return Err(Error::Contract(format!("unit {u}: decision {d} > {}", self.channels)));
            }
            if (d > 0) != dest.is_some() {
                return Err(Error::Contract(format!(
                    "unit {u}: destination must be present iff the unit is offloaded"
                )));
            }
        }
        Ok(())
    }
}

/// `(B/M)·log2(1 + w / (S + σ²))`.
pub fn shannon_rate(bandwidth_hz: f64, channels: usize, link_weight: f64, interference_sum: f64, noise: f64) -> f64 {
    bandwidth_hz / channels as f64 * (link_weight / (interference_sum + noise)).ln_1p() / std::f64::consts::LN_2
}

/// Received power on `(channel, destination)` from every offloading unit that
/// belongs to a user other than `user`.
pub fn co_channel_sum(
    scenario: &Scenario,
    tasks: &TaskSet,
    profile: &StrategyProfile,
    user: usize,
    channel: u16,
    destination: Destination,
) -> f64 {
    let mut sum = 0.0;
    for j in 0..profile.len() {
        if profile.decision(j) == channel && profile.destination(j) == Some(destination) {
            let owner = tasks.user_of(j);
            if owner != user {
                sum += scenario.user(owner).link_weight(destination);
            }
        }
    }
    sum
}

fn offload_slot(profile: &StrategyProfile, unit: usize) -> Result<(u16, Destination)> {
    match (profile.decision(unit), profile.destination(unit)) {
        (m, Some(d)) if m > 0 => Ok((m, d)),
        _ => Err(Error::Contract(format!("unit {unit} is not offloaded"))),
    }
}

/// Uplink rate of an offloaded unit under the profile.
pub fn uplink_rate(scenario: &Scenario, tasks: &TaskSet, profile: &StrategyProfile, unit: usize) -> Result<f64> {
    let (channel, destination) = offload_slot(profile, unit)?;
    let user = tasks.user_of(unit);
    let sum = co_channel_sum(scenario, tasks, profile, user, channel, destination);
    let cfg = &scenario.config;
    Ok(shannon_rate(
        cfg.bandwidth_hz,
        cfg.channels,
        scenario.user(user).link_weight(destination),
        sum,
        cfg.noise_variance_w,
    ))
}

/// Interference ratio `S / (ρ_k η_k) - σ²` for an offloaded unit.
pub fn interference(scenario: &Scenario, tasks: &TaskSet, profile: &StrategyProfile, unit: usize) -> Result<f64> {
    let (channel, destination) = offload_slot(profile, unit)?;
    let user = tasks.user_of(unit);
    let sum = co_channel_sum(scenario, tasks, profile, user, channel, destination);
    Ok(interference_ratio(scenario, scenario.user(user), destination, sum))
}

pub fn interference_ratio(scenario: &Scenario, user: &UserSpec, destination: Destination, co_channel_sum: f64) -> f64 {
    co_channel_sum / user.link_weight(destination) - scenario.config.noise_variance_w
}

/// Offloading threshold of one subtask towards one destination.
///
/// Obtained by inverting `C^L ≥ C^offload` (queue-free offload cost) for the
/// interference. Offloading is no more expensive than local execution iff
/// the unit's interference ratio is `≤ ratio`, equivalently iff its raw
/// co-channel sum is `≤ sum_scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffloadThreshold {
    /// Threshold on the interference ratio; `-∞` when offloading never pays.
    pub ratio: f64,
    /// Threshold on the co-channel received-power sum. Never-offload units
    /// get the finite limit `-σ²`, which no non-negative sum can meet.
    pub sum_scale: f64,
    /// Minimum uplink rate at which offloading breaks even; `+∞` when
    /// offloading never pays.
    pub required_rate: f64,
}

impl OffloadThreshold {
    pub fn never_offload(&self) -> bool {
        self.ratio == f64::NEG_INFINITY
    }

    pub fn admits(&self, interference_ratio: f64) -> bool {
        interference_ratio <= self.ratio
    }

    /// Same test expressed on the uplink rate.
    pub fn admits_rate(&self, rate: f64) -> bool {
        rate >= self.required_rate
    }
}

pub fn offload_threshold(scenario: &Scenario, user: &UserSpec, subtask: &SubtaskSpec, destination: Destination) -> OffloadThreshold {
    let cfg = &scenario.config;
    let noise = cfg.noise_variance_w;
    let weight = user.link_weight(destination);
    let local = cost::local_cost(user, subtask, cfg).weighted_cost;
    let execution = user.delay_weight * subtask.load_cycles / scenario.node(destination).cpu_hz;
    // Budget left for the transmission term once remote execution is paid.
    let budget = local - execution;
    if budget <= 0.0 {
        return OffloadThreshold {
            ratio: f64::NEG_INFINITY,
            sum_scale: -noise,
            required_rate: f64::INFINITY,
        };
    }
    let per_rate = subtask.payload_bits() * (user.delay_weight + user.energy_weight * user.transmit_power(destination));
    if per_rate == 0.0 {
        return OffloadThreshold {
            ratio: f64::INFINITY,
            sum_scale: f64::INFINITY,
            required_rate: 0.0,
        };
    }
    let required_rate = per_rate / budget;
    // Required SINR: 2^(M·ω*/B) - 1.
    let sinr = (std::f64::consts::LN_2 * cfg.channels as f64 * required_rate / cfg.bandwidth_hz).exp_m1();
    OffloadThreshold {
        ratio: 1.0 / sinr - noise / weight - noise,
        sum_scale: weight / sinr - noise,
        required_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scenario::{generate_scenario, NodeState};

    fn bare_scenario(users: usize, channels: usize) -> Scenario {
        let config = ScenarioConfig {
            users,
            channels,
            subtasks: 1,
            bandwidth_hz: 1e6,
            noise_variance_w: 1.0,
            ..ScenarioConfig::default()
        };
        let mut s = generate_scenario(&config, 1).unwrap();
        for u in &mut s.users {
            u.transmit_power_fin_w = 1.0;
            u.transmit_power_ein_w = 1.0;
            u.channel_gain_fin = 1.0;
            u.channel_gain_ein = 1.0;
        }
        s
    }

    fn unit_tasks(users: usize) -> TaskSet {
        TaskSet::from_units(
            1,
            (0..users)
                .map(|user| SubtaskSpec {
                    user,
                    index: 0,
                    input_bits: 1e6,
                    volume_bits: 1e6,
                    load_cycles: 1e9,
                })
                .collect(),
        )
    }

    #[test]
    fn unit_snr_gives_one_bit_per_symbol() {
        let s = bare_scenario(1, 1);
        let tasks = unit_tasks(1);
        let mut p = StrategyProfile::all_local(1, 1);
        p.set_offload(0, 1, Destination::Fin).unwrap();
        assert_eq!(uplink_rate(&s, &tasks, &p, 0).unwrap(), 1e6);
    }

    #[test]
    fn co_channel_co_destination_users_interfere() {
        let s = bare_scenario(2, 1);
        let tasks = unit_tasks(2);
        let mut p = StrategyProfile::all_local(2, 1);
        p.set_offload(0, 1, Destination::Fin).unwrap();
        p.set_offload(1, 1, Destination::Fin).unwrap();
        let expected = 1e6 * (1.0f64 + 1.0 / (1.0 + 1.0)).log2();
        assert!((uplink_rate(&s, &tasks, &p, 0).unwrap() - expected).abs() < 1e-6);

        p.set_offload(1, 1, Destination::Ein).unwrap();
        assert_eq!(uplink_rate(&s, &tasks, &p, 0).unwrap(), 1e6);
        assert_eq!(uplink_rate(&s, &tasks, &p, 1).unwrap(), 1e6);
    }

    #[test]
    fn local_unit_has_no_rate() {
        let s = bare_scenario(1, 1);
        let p = StrategyProfile::all_local(1, 1);
        assert!(matches!(uplink_rate(&s, &unit_tasks(1), &p, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn interference_ratio_edge_values() {
        let mut s = bare_scenario(2, 2);
        s.config.noise_variance_w = 0.25;
        let tasks = unit_tasks(2);
        let mut p = StrategyProfile::all_local(2, 2);
        p.set_offload(0, 1, Destination::Fin).unwrap();
        p.set_offload(1, 2, Destination::Fin).unwrap();
        assert_eq!(interference(&s, &tasks, &p, 0).unwrap(), -0.25);
        p.set_offload(1, 1, Destination::Fin).unwrap();
        assert_eq!(interference(&s, &tasks, &p, 0).unwrap(), 1.0 - 0.25);
    }

    #[test]
    fn own_subtasks_do_not_interfere() {
        let s = bare_scenario(1, 1);
        let tasks = TaskSet::from_units(
            2,
            (0..2)
                .map(|index| SubtaskSpec {
                    user: 0,
                    index,
                    input_bits: 1.0,
                    volume_bits: 1.0,
                    load_cycles: 1.0,
                })
                .collect(),
        );
        let mut p = StrategyProfile::all_local(2, 1);
        p.set_offload(0, 1, Destination::Fin).unwrap();
        p.set_offload(1, 1, Destination::Fin).unwrap();
        assert_eq!(interference(&s, &tasks, &p, 0).unwrap(), -1.0);
    }

    #[test]
    fn equal_execution_speed_never_offloads() {
        let mut s = bare_scenario(1, 1);
        s.users[0].delay_weight = 1.0;
        s.users[0].energy_weight = 0.0;
        s.fin = NodeState::new(Destination::Fin, s.users[0].local_cpu_hz, 0.0);
        let tasks = unit_tasks(1);
        let t = offload_threshold(&s, &s.users[0], tasks.unit(0), Destination::Fin);
        assert!(t.never_offload());
        assert_eq!(t.sum_scale, -s.config.noise_variance_w);
        assert!(!t.admits(-s.config.noise_variance_w));
    }

    #[test]
    fn profile_validation_catches_dangling_destination() {
        let mut p = StrategyProfile::all_local(2, 3);
        assert!(p.set_offload(0, 4, Destination::Fin).is_err());
        p.set_offload(0, 3, Destination::Ein).unwrap();
        p.validate(2).unwrap();
        assert!(p.validate(3).is_err());
        p.decisions[1] = 2;
        assert!(p.validate(2).is_err());
    }
}
