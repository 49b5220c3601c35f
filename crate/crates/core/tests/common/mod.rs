//! Random plants and oracles written independently of the library's own
//! evaluators: plain simulation, truncated discounted sums, and enumeration.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rta_core::plant::{Plant, RewardStructure, StationaryPolicy, UnsafeSet};

pub const GAMMA: f64 = 0.9;

pub struct RandomPlant {
    pub n: usize,
    /// `delta[q] = (next under S, next under U)`.
    pub delta: Vec<(usize, usize)>,
    pub unsafe_states: Vec<bool>,
    /// `reward[q] = (r(q, S), r(q, U))`, each 0 or 1.
    pub reward: Vec<(f64, f64)>,
}

impl RandomPlant {
    pub fn generate(seed: u64, max_states: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=max_states);
        let delta = (0..n).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        let unsafe_states = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let reward = (0..n)
            .map(|_| (rng.gen_range(0..2) as f64, rng.gen_range(0..2) as f64))
            .collect();
        Self { n, delta, unsafe_states, reward }
    }

    pub fn plant(&self) -> Plant {
        Plant::switching(&self.delta).unwrap()
    }

    pub fn unsafe_set(&self) -> UnsafeSet {
        UnsafeSet::from_states(self.n, (0..self.n).filter(|&q| self.unsafe_states[q])).unwrap()
    }

    pub fn rewards(&self) -> RewardStructure<f64> {
        RewardStructure::from_fn(self.n, 2, GAMMA, |q, a| if a == 0 { self.reward[q].0 } else { self.reward[q].1 })
            .unwrap()
    }

    pub fn next(&self, q: usize, a: usize) -> usize {
        if a == 0 {
            self.delta[q].0
        } else {
            self.delta[q].1
        }
    }

    fn r(&self, q: usize, a: usize) -> f64 {
        if a == 0 {
            self.reward[q].0
        } else {
            self.reward[q].1
        }
    }

    /// Visits the first `n + 1` states; a deterministic run repeats after that.
    pub fn oracle_safe(&self, actions: &[usize]) -> bool {
        let mut q = 0;
        for _ in 0..=self.n {
            if self.unsafe_states[q] {
                return false;
            }
            q = self.next(q, actions[q]);
        }
        true
    }

    /// Discounted sum truncated where `gamma^t` falls below 1e-18.
    pub fn oracle_value(&self, actions: &[usize]) -> f64 {
        let mut q = 0;
        let mut total = 0.0;
        let mut w = 1.0;
        while w > 1e-18 {
            total += w * self.r(q, actions[q]);
            w *= GAMMA;
            q = self.next(q, actions[q]);
        }
        total
    }

    pub fn all_policies(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..1usize << self.n).map(move |bits| (0..self.n).map(|q| (bits >> q) & 1).collect())
    }

    /// Best safe stationary value by enumeration, if any policy is safe.
    pub fn oracle_best_safe(&self) -> Option<f64> {
        self.all_policies()
            .filter(|p| self.oracle_safe(p))
            .map(|p| self.oracle_value(&p))
            .fold(None, |best: Option<f64>, v| Some(best.map_or(v, |b| b.max(v))))
    }

    /// Largest set of safe states from which `S` never leaves the set,
    /// by repeated deletion.
    pub fn oracle_recoverable(&self) -> Vec<bool> {
        let mut inside: Vec<bool> = self.unsafe_states.iter().map(|u| !u).collect();
        loop {
            let drop: Vec<usize> = (0..self.n).filter(|&q| inside[q] && !inside[self.delta[q].0]).collect();
            if drop.is_empty() {
                return inside;
            }
            for q in drop {
                inside[q] = false;
            }
        }
    }
}

pub fn policy_actions(p: &StationaryPolicy) -> Vec<usize> {
    p.actions().to_vec()
}
