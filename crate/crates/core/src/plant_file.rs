//! JSON plant description files.
//!
//! ```json
//! {
//!   "states": ["q0", "q1", "qB"],
//!   "initial": "q0",
//!   "actions": ["S", "U"],
//!   "transitions": [["q0", "S", "q0"], ["q0", "U", {"q1": 0.5, "qB": 0.5}]],
//!   "unsafe": ["qB"],
//!   "reward": [["q0", "U", 1.0]],
//!   "gamma": 0.9
//! }
//! ```
//!
//! Every `(state, action)` pair needs exactly one transition entry. Reward
//! entries that are not listed default to 0. A file with any distribution
//! target loads as an MDP.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{Mdp, Plant, Reward, RewardStructure, UnsafeSet};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    State(String),
    Distribution(BTreeMap<String, f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantDescription {
    pub states: Vec<String>,
    pub initial: String,
    pub actions: Vec<String>,
    pub transitions: Vec<(String, String, Target)>,
    pub unsafe_states: Vec<String>,
    pub reward: Vec<(String, String, f64)>,
    pub gamma: f64,
}

/// A deterministic plant with its unsafe set and reward structure.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantSpec<S> {
    pub plant: Plant,
    pub unsafe_set: UnsafeSet,
    pub reward: RewardStructure<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpSpec<S> {
    pub mdp: Mdp<S>,
    pub unsafe_set: UnsafeSet,
    pub reward: RewardStructure<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoadedModel<S> {
    Deterministic(PlantSpec<S>),
    Probabilistic(MdpSpec<S>),
}

// `unsafe` is a keyword, so the field is renamed on the wire.
mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Raw {
        pub states: Vec<String>,
        pub initial: String,
        pub actions: Vec<String>,
        pub transitions: Vec<(String, String, Target)>,
        #[serde(default, rename = "unsafe")]
        pub unsafe_states: Vec<String>,
        #[serde(default)]
        pub reward: Vec<(String, String, f64)>,
        pub gamma: f64,
    }
}

impl PlantDescription {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: wire::Raw = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "plant description".into(),
            source,
        })?;
        Ok(Self {
            states: raw.states,
            initial: raw.initial,
            actions: raw.actions,
            transitions: raw.transitions,
            unsafe_states: raw.unsafe_states,
            reward: raw.reward,
            gamma: raw.gamma,
        })
    }

    pub fn to_json(&self) -> String {
        let raw = wire::Raw {
            states: self.states.clone(),
            initial: self.initial.clone(),
            actions: self.actions.clone(),
            transitions: self.transitions.clone(),
            unsafe_states: self.unsafe_states.clone(),
            reward: self.reward.clone(),
            gamma: self.gamma,
        };
        serde_json::to_string_pretty(&raw).expect("plant description serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn state(&self, name: &str, field: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::config(field, format!("unknown state `{name}`")))
    }

    fn action(&self, name: &str, field: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::config(field, format!("unknown action `{name}`")))
    }

    pub fn is_probabilistic(&self) -> bool {
        self.transitions
            .iter()
            .any(|(_, _, t)| matches!(t, Target::Distribution(_)))
    }

    pub fn build<S: Scalar>(&self) -> Result<LoadedModel<S>> {
        let n = self.states.len();
        let m = self.actions.len();
        if n == 0 {
            return Err(Error::config("states", "empty"));
        }
        if m == 0 {
            return Err(Error::config("actions", "empty"));
        }
        let initial = self.state(&self.initial, "initial")?;

        let mut rows: Vec<Option<Vec<(usize, S)>>> = vec![None; n * m];
        for (q, a, target) in &self.transitions {
            let qi = self.state(q, "transitions")?;
            let ai = self.action(a, "transitions")?;
            let dist = match target {
                Target::State(next) => vec![(self.state(next, "transitions")?, S::one())],
                Target::Distribution(map) => map
                    .iter()
                    .map(|(next, &p)| Ok((self.state(next, "transitions")?, S::lit(p))))
                    .collect::<Result<Vec<_>>>()?,
            };
            let slot = &mut rows[qi * m + ai];
            if slot.is_some() {
                return Err(Error::config("transitions", format!("duplicate entry for ({q}, {a})")));
            }
            *slot = Some(dist);
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| {
                    Error::config(
                        "transitions",
                        format!("missing entry for ({}, {})", self.states[i / m], self.actions[i % m]),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let unsafe_set = UnsafeSet::from_states(
            n,
            self.unsafe_states
                .iter()
                .map(|s| self.state(s, "unsafe"))
                .collect::<Result<Vec<_>>>()?,
        )?;

        let mut table = vec![S::zero(); n * m];
        for (q, a, v) in &self.reward {
            table[self.state(q, "reward")? * m + self.action(a, "reward")?] = S::lit(*v);
        }
        let reward = RewardStructure::new(n, m, table, S::lit(self.gamma))
            .map_err(|e| Error::config("gamma", e.to_string()))?;

        if self.is_probabilistic() {
            let mdp = Mdp::new(self.states.clone(), self.actions.clone(), initial, rows)
                .map_err(|e| Error::config("transitions", e.to_string()))?;
            Ok(LoadedModel::Probabilistic(MdpSpec {
                mdp,
                unsafe_set,
                reward,
            }))
        } else {
            let delta = rows.iter().map(|r| r[0].0).collect();
            let plant = Plant::new(self.states.clone(), self.actions.clone(), initial, delta)?;
            Ok(LoadedModel::Deterministic(PlantSpec {
                plant,
                unsafe_set,
                reward,
            }))
        }
    }
}

impl<S: Scalar> PlantSpec<S> {
    pub fn describe(&self) -> PlantDescription {
        let p = &self.plant;
        let names = p.state_names();
        let acts = p.action_names();
        let mut transitions = Vec::new();
        let mut reward = Vec::new();
        for q in 0..p.num_states() {
            for a in 0..p.num_actions() {
                transitions.push((
                    names[q].clone(),
                    acts[a].clone(),
                    Target::State(names[p.next(q, a)].clone()),
                ));
                let v = self.reward.reward(q, a);
                if v != S::zero() {
                    reward.push((names[q].clone(), acts[a].clone(), v.as_f64()));
                }
            }
        }
        PlantDescription {
            states: names.to_vec(),
            initial: names[p.initial()].clone(),
            actions: acts.to_vec(),
            transitions,
            unsafe_states: self.unsafe_set.iter().map(|q| names[q].clone()).collect(),
            reward,
            gamma: self.reward.gamma().as_f64(),
        }
    }
}
