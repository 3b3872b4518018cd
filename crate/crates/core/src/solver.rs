//! Cache-constrained action selection.
//!
//! Maximises `Σ code(b_v)·Θ_v` over `b ∈ {0, 1, 2}^F` subject to the FIN
//! and EIN cache budgets, with a two-dimensional capacity DP. Volumes are
//! discretised on a common step (gcd of the rounded volumes by default), so
//! integer-bit volumes are handled exactly.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest DP table (cells) the solver will allocate.
pub const DP_CELL_LIMIT: u128 = 50_000_000;
/// Largest instance the exhaustive oracle will enumerate.
pub const BRUTE_FORCE_MAX_UNITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    pub values: Vec<f64>,
    /// Software volumes in bits, one per unit.
    pub volumes: Vec<f64>,
    pub fin_cache: f64,
    pub ein_cache: f64,
    /// Discretisation step in bits; `None` picks the gcd of the volumes.
    pub step: Option<f64>,
}

impl KnapsackInstance {
    pub fn new(values: Vec<f64>, volumes: Vec<f64>, fin_cache: f64, ein_cache: f64) -> Self {
        KnapsackInstance {
            values,
            volumes,
            fin_cache,
            ein_cache,
            step: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.volumes.len() {
            return Err(Error::Contract(format!(
                "{} values for {} volumes",
                self.values.len(),
                self.volumes.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value {v}")));
        }
        if let Some(v) = self.volumes.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("volume must be positive, got {v}")));
        }
        for (name, c) in [("fin_cache", self.fin_cache), ("ein_cache", self.ein_cache)] {
            if !(c >= 0.0) {
                return Err(Error::Domain(format!("{name} must be non-negative, got {c}")));
            }
        }
        Ok(())
    }

    /// Discretisation step actually used.
    pub fn resolved_step(&self) -> Result<f64> {
        match self.step {
            Some(step) if step > 0.0 && step.is_finite() => Ok(step),
            Some(step) => Err(Error::Domain(format!("step must be positive, got {step}"))),
            None => {
                let g = self
                    .volumes
                    .iter()
                    .map(|v| v.round().max(1.0) as u64)
                    .fold(0u64, |acc, v| acc.gcd(&v));
                Ok(g.max(1) as f64)
            }
        }
    }

    /// True when the action respects both cache budgets.
    pub fn feasible(&self, action: &[u8]) -> bool {
        let mut used = [0.0f64; 2];
        for (&b, &v) in action.iter().zip(&self.volumes) {
            match b {
                0 => {}
                1 => used[0] += v,
                2 => used[1] += v,
                _ => return false,
            }
        }
        used[0] <= self.fin_cache && used[1] <= self.ein_cache
    }
}

/// `Σ code(b_v)·Θ_v`, accumulated from the last unit to the first.
pub fn objective(values: &[f64], action: &[u8]) -> f64 {
    values
        .iter()
        .zip(action)
        .rev()
        .fold(0.0, |acc, (&theta, &b)| f64::from(b) * theta + acc)
}

/// Exact optimum; ties go to the lexicographically smallest action.
pub fn solve_optimal_action(instance: &KnapsackInstance) -> Result<Vec<u8>> {
    instance.validate()?;
    let step = instance.resolved_step()?;
    let f = instance.len();
    let cells = |cache: f64| (cache / step).floor().min(u32::MAX as f64) as usize;
    let (cf, ce) = (cells(instance.fin_cache), cells(instance.ein_cache));
    let size = (f as u128 + 1) * (cf as u128 + 1) * (ce as u128 + 1);
    if size > DP_CELL_LIMIT {
        return Err(Error::TooLarge {
            what: "knapsack table".into(),
            size,
            limit: DP_CELL_LIMIT,
        });
    }
    let weight: Vec<usize> = instance
        .volumes
        .iter()
        .map(|v| (v / step).ceil().min(u32::MAX as f64) as usize)
        .collect();

    // best[i] holds, for every remaining (fin, ein) capacity, the optimum over
    // units i.. .
    let plane = (cf + 1) * (ce + 1);
    let idx = |a: usize, b: usize| a * (ce + 1) + b;
    let mut best = vec![0.0f64; (f + 1) * plane];
    for i in (0..f).rev() {
        let (head, tail) = best.split_at_mut((i + 1) * plane);
        let here = &mut head[i * plane..];
        let next = &tail[..plane];
        let (theta, w) = (instance.values[i], weight[i]);
        for a in 0..=cf {
            for b in 0..=ce {
                let mut v = 0.0 * theta + next[idx(a, b)];
                if w <= a {
                    v = v.max(theta + next[idx(a - w, b)]);
                }
                if w <= b {
                    v = v.max(2.0 * theta + next[idx(a, b - w)]);
                }
                here[idx(a, b)] = v;
            }
        }
    }

    let mut action = Vec::with_capacity(f);
    let (mut a, mut b) = (cf, ce);
    for i in 0..f {
        let target = best[i * plane + idx(a, b)];
        let next = &best[(i + 1) * plane..(i + 2) * plane];
        let (theta, w) = (instance.values[i], weight[i]);
        let code = if 0.0 * theta + next[idx(a, b)] == target {
            0
        } else if w <= a && theta + next[idx(a - w, b)] == target {
            a -= w;
            1
        } else {
            debug_assert!(w <= b && 2.0 * theta + next[idx(a, b - w)] == target);
            b -= w;
            2
        };
        action.push(code);
    }
    Ok(action)
}

/// Exhaustive optimum over all `3^F` actions, same tie rule as the DP.
pub fn brute_force_action(instance: &KnapsackInstance) -> Result<Vec<u8>> {
    instance.validate()?;
    let f = instance.len();
    if f > BRUTE_FORCE_MAX_UNITS {
        return Err(Error::TooLarge {
            what: "exhaustive action enumeration (units)".into(),
            size: f as u128,
            limit: BRUTE_FORCE_MAX_UNITS as u128,
        });
    }
    let mut action = vec![0u8; f];
    let mut best: Option<(f64, Vec<u8>)> = None;
    loop {
        if instance.feasible(&action) {
            let value = objective(&instance.values, &action);
            if best.as_ref().map_or(true, |(v, _)| value > *v) {
                best = Some((value, action.clone()));
            }
        }
        // Lexicographic successor, first unit most significant.
        let mut pos = f;
        loop {
            if pos == 0 {
                return Ok(best.map(|(_, a)| a).unwrap_or_else(|| vec![0; f]));
            }
            pos -= 1;
            if action[pos] < 2 {
                action[pos] += 1;
                break;
            }
            action[pos] = 0;
        }
    }
}
