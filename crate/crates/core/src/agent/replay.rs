use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the solver needs to pick an action in a given state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionContext {
    /// Software volumes (bits), one per decision unit.
    pub volumes: Vec<f64>,
    /// Units the agent may place remotely this slot.
    pub eligible: Vec<bool>,
    pub fin_cache: f64,
    pub ein_cache: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Placement codes: 0 local, 1 FIN, 2 EIN.
    pub action: Vec<u8>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_context: ActionContext,
}

impl Transition {
    pub fn validate(&self) -> Result<()> {
        if self.state.len() != self.next_state.len() {
            return Err(Error::Contract(format!(
                "state widths differ: {} vs {}",
                self.state.len(),
                self.next_state.len()
            )));
        }
        if let Some(b) = self.action.iter().find(|b| **b > 2) {
            return Err(Error::Contract(format!("action code {b} outside {{0, 1, 2}}")));
        }
        Ok(())
    }
}

/// Fixed-capacity ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    items: Vec<Transition>,
    inserted: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            inserted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total insertions since construction.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, transition: Transition) -> Result<()> {
        transition.validate()?;
        if let Some(first) = self.items.first() {
            if first.state.len() != transition.state.len() {
                return Err(Error::Contract("transition width changed".into()));
            }
        }
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.items[slot] = transition;
        }
        self.inserted += 1;
        Ok(())
    }

    /// `size` distinct transitions drawn uniformly; `None` if too few stored.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if size == 0 || size > self.items.len() {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), size)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        Transition {
            state: vec![r],
            action: vec![1],
            reward: r,
            next_state: vec![r],
            next_context: ActionContext {
                volumes: vec![1.0],
                eligible: vec![true],
                fin_cache: 1.0,
                ein_cache: 1.0,
            },
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut m = ReplayMemory::new(3);
        for i in 0..5 {
            m.push(t(i as f64)).unwrap();
            assert!(m.len() <= 3);
        }
        assert_eq!(m.inserted(), 5);
        let mut rewards: Vec<f64> = m.items.iter().map(|x| x.reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_is_without_replacement_and_seeded() {
        let mut m = ReplayMemory::new(100);
        for i in 0..50 {
            m.push(t(i as f64)).unwrap();
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            m.sample(32, &mut rng).unwrap().iter().map(|x| x.reward).collect::<Vec<_>>()
        };
        let a = draw(1);
        assert_eq!(a, draw(1));
        let mut sorted = a.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(sorted.len(), 32);
        assert!(m.sample(51, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    }

    #[test]
    fn malformed_transitions_are_rejected() {
        let mut m = ReplayMemory::new(4);
        let mut bad = t(0.0);
        bad.action = vec![3];
        assert!(m.push(bad).is_err());
        let mut bad = t(0.0);
        bad.next_state = vec![0.0, 1.0];
        assert!(m.push(bad).is_err());
    }
}
