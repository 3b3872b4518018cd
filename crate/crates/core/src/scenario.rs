//! Domain types and seeded scenario/task generation.
//!
//! Internally every quantity is in SI base units: bits, cycles, Hz, W, s.
//! The configured [`DataUnit`](crate::config::DataUnit) only scales sampling.

use std::collections::VecDeque;
use std::fmt;
use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::seeding::{stream_rng, Stream};

/// Offloading destination. FIN is coded as bit 0, EIN as bit 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Destination {
    Fin,
    Ein,
}

impl Destination {
    pub const ALL: [Destination; 2] = [Destination::Fin, Destination::Ein];

    pub fn index(self) -> usize {
        match self {
            Destination::Fin => 0,
            Destination::Ein => 1,
        }
    }
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Destination::Fin => "FIN",
            Destination::Ein => "EIN",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub id: usize,
    pub transmit_power_fin_w: f64,
    pub transmit_power_ein_w: f64,
    pub channel_gain_fin: f64,
    pub channel_gain_ein: f64,
    pub local_cpu_hz: f64,
    pub delay_weight: f64,
    pub energy_weight: f64,
    pub position: (f64, f64),
}

impl UserSpec {
    pub fn transmit_power(&self, destination: Destination) -> f64 {
        match destination {
            Destination::Fin => self.transmit_power_fin_w,
            Destination::Ein => self.transmit_power_ein_w,
        }
    }

    pub fn channel_gain(&self, destination: Destination) -> f64 {
        match destination {
            Destination::Fin => self.channel_gain_fin,
            Destination::Ein => self.channel_gain_ein,
        }
    }

    /// Received power product `ρ·η` towards `destination`.
    pub fn link_weight(&self, destination: Destination) -> f64 {
        self.transmit_power(destination) * self.channel_gain(destination)
    }
}

/// One subtask `⟨I, V, P⟩` of a user's task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtaskSpec {
    pub user: usize,
    pub index: usize,
    pub input_bits: f64,
    pub volume_bits: f64,
    pub load_cycles: f64,
}

impl SubtaskSpec {
    /// Bits sent on the uplink: input plus software.
    pub fn payload_bits(&self) -> f64 {
        self.input_bits + self.volume_bits
    }
}

/// Runtime state of a computing node. The queue holds remaining service
/// times in FIFO order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub kind: Destination,
    pub cpu_hz: f64,
    pub cache_bits: f64,
    pub queue: VecDeque<f64>,
}

impl NodeState {
    pub fn new(kind: Destination, cpu_hz: f64, cache_bits: f64) -> Self {
        NodeState {
            kind,
            cpu_hz,
            cache_bits,
            queue: VecDeque::new(),
        }
    }

    pub fn queued_work(&self) -> f64 {
        self.queue.iter().sum()
    }

    pub fn enqueue(&mut self, service_time: f64) {
        debug_assert!(service_time >= 0.0);
        self.queue.push_back(service_time);
    }

    /// Serve `duration` seconds of work in FIFO order.
    pub fn drain(&mut self, duration: f64) {
        let mut budget = duration;
        while budget > 0.0 {
            let Some(front) = self.queue.front_mut() else {
                break;
            };
            if *front <= budget {
                budget -= *front;
                self.queue.pop_front();
            } else {
                *front -= budget;
                budget = 0.0;
            }
        }
    }

    pub fn reset(&mut self) {
        self.queue.clear();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub users: Vec<UserSpec>,
    pub fin: NodeState,
    pub ein: NodeState,
    pub fin_position: (f64, f64),
    pub ein_position: (f64, f64),
}

impl Scenario {
    pub fn node(&self, destination: Destination) -> &NodeState {
        match destination {
            Destination::Fin => &self.fin,
            Destination::Ein => &self.ein,
        }
    }

    pub fn user(&self, id: usize) -> &UserSpec {
        &self.users[id]
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Path-loss gain `d^-α`, with the distance floored at one metre.
pub fn path_gain(distance_m: f64, exponent: f64) -> f64 {
    distance_m.max(1.0).powf(-exponent)
}

/// Place users uniformly in the square cell, the FIN at its centre and the
/// EIN at the midpoint of its right edge.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = stream_rng(seed, Stream::Scenario);
    let side = config.cell_side_m;
    let fin_position = (side / 2.0, side / 2.0);
    let ein_position = (side, side / 2.0);
    let users = (0..config.users)
        .map(|id| {
            let position = (rng.gen_range(0.0..=side), rng.gen_range(0.0..=side));
            let delay_weight = config.delay_weight_of(id);
            UserSpec {
                id,
                transmit_power_fin_w: config.transmit_power_fin_w.unwrap_or(config.transmit_power_w),
                transmit_power_ein_w: config.transmit_power_ein_w.unwrap_or(config.transmit_power_w),
                channel_gain_fin: path_gain(distance(position, fin_position), config.path_loss_exponent),
                channel_gain_ein: path_gain(distance(position, ein_position), config.path_loss_exponent),
                local_cpu_hz: config.local_cpu_hz,
                delay_weight,
                energy_weight: 1.0 - delay_weight,
                position,
            }
        })
        .collect();
    Ok(Scenario {
        config: config.clone(),
        users,
        fin: NodeState::new(Destination::Fin, config.fin_cpu_hz, config.fin_cache_bits()),
        ein: NodeState::new(Destination::Ein, config.ein_cpu_hz, config.ein_cache_bits()),
        fin_position,
        ein_position,
    })
}

/// All subtasks generated in one slot, flattened by decision unit
/// `user * subtasks_per_user + index`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub subtasks_per_user: usize,
    pub units: Vec<SubtaskSpec>,
}

impl TaskSet {
    pub fn from_units(subtasks_per_user: usize, units: Vec<SubtaskSpec>) -> Self {
        assert!(subtasks_per_user > 0 && units.len() % subtasks_per_user == 0);
        TaskSet { subtasks_per_user, units }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn user_count(&self) -> usize {
        self.units.len() / self.subtasks_per_user
    }

    pub fn user_of(&self, unit: usize) -> usize {
        unit / self.subtasks_per_user
    }

    pub fn units_of(&self, user: usize) -> Range<usize> {
        user * self.subtasks_per_user..(user + 1) * self.subtasks_per_user
    }

    pub fn unit(&self, unit: usize) -> &SubtaskSpec {
        &self.units[unit]
    }
}

/// Draw one task per user, each split into `config.subtasks` subtasks with
/// integer-valued `I ~ U{1..I_max}`, `V ~ U{1..V_max}` (data units) and
/// `P ~ U{1..P_max}` gigacycles.
pub fn generate_tasks(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> TaskSet {
    let unit = config.data_unit.bits();
    let mut units = Vec::with_capacity(config.decision_units());
    for user in 0..config.users {
        for index in 0..config.subtasks {
            let input = rng.gen_range(1..=config.input_max) as f64;
            let volume = rng.gen_range(1..=config.volume_max) as f64;
            let load = rng.gen_range(1..=config.load_max) as f64;
            units.push(SubtaskSpec {
                user,
                index,
                input_bits: input * unit,
                volume_bits: volume * unit,
                load_cycles: load * 1e9,
            });
        }
    }
    TaskSet::from_units(config.subtasks, units)
}
