//! Task splitting and offloading for in-network computing.
//!
//! Users split their tasks into subtasks and play a channel-selection game;
//! a double-DQN agent on the network side then places the offloaded
//! subtasks on the fog (FIN) or edge (EIN) node under cache limits.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod config;
pub mod cost;
pub mod error;
pub mod game;
pub mod harness;
pub mod radio;
pub mod report;
pub mod scenario;
pub mod seeding;
pub mod solver;
pub mod verify;

pub use config::{AgentConfig, DataUnit, EpsilonSchedule, ExperimentConfig, GameConfig, Preset, QueueModel, ScenarioConfig, SimConfig};
pub use error::{Error, Result};
pub use harness::{run_experiment, run_policy, ExperimentResult, Policy, RunResult, SlotRecord, SweepAxis};
pub use radio::{Placement, StrategyProfile};
pub use scenario::{Destination, NodeState, Scenario, SubtaskSpec, TaskSet, UserSpec};
