//! Built-in example plants.
//!
//! * `fig2-left`: the safe-set lookahead takes `U` at `q0` and is doomed one step later.
//! * `fig2-right`: the only recoverable set is `{q0}`, yet always-`U` is safe.
//! * `sec6-goal`: a goal-reachability constraint with no optimal policy.
//!
//! All three use `gamma = 0.9`. The first two reward every use of `U`; the
//! goal plant rewards being in `qr`.

use crate::error::{Error, Result};
use crate::plant::{FiniteRun, Plant, RewardStructure, UnsafeSet};
use crate::plant_file::PlantSpec;

pub const NAMES: [&str; 3] = ["fig2-left", "fig2-right", "sec6-goal"];

pub const GAMMA: f64 = 0.9;

fn plant(states: [&str; 3], table: [(usize, usize); 3]) -> Plant {
    Plant::new(
        states.iter().map(|s| s.to_string()).collect(),
        vec!["S".into(), "U".into()],
        0,
        table.iter().flat_map(|&(s, u)| [s, u]).collect(),
    )
    .expect("fixture tables are total")
}

pub fn fig2_left() -> PlantSpec<f64> {
    let plant = plant(["q0", "q1", "qB"], [(0, 1), (2, 2), (2, 2)]);
    PlantSpec {
        unsafe_set: UnsafeSet::from_states(3, [2]).unwrap(),
        reward: RewardStructure::untrusted_use(&plant, GAMMA).unwrap(),
        plant,
    }
}

pub fn fig2_right() -> PlantSpec<f64> {
    let plant = plant(["q0", "q1", "qB"], [(0, 1), (2, 0), (2, 2)]);
    PlantSpec {
        unsafe_set: UnsafeSet::from_states(3, [2]).unwrap(),
        reward: RewardStructure::untrusted_use(&plant, GAMMA).unwrap(),
        plant,
    }
}

/// State indices of the goal plant.
pub mod goal {
    pub const Q0: usize = 0;
    pub const QG: usize = 1;
    pub const QR: usize = 2;
}

/// `S` takes `q0` to the goal `qg`, `U` takes it to the reward state `qr`;
/// both actions return to `q0` from `qg` and `qr`. No unsafe states.
pub fn sec6_goal() -> PlantSpec<f64> {
    let plant = plant(["q0", "qg", "qr"], [(goal::QG, goal::QR), (0, 0), (0, 0)]);
    PlantSpec {
        unsafe_set: UnsafeSet::empty(3),
        reward: RewardStructure::from_fn(3, 2, GAMMA, |q, _| if q == goal::QR { 1.0 } else { 0.0 })
            .unwrap(),
        plant,
    }
}

/// The goal plant with the untrusted-use reward (1 per `U`) in place of the `qr` reward.
pub fn sec6_goal_untrusted_use() -> PlantSpec<f64> {
    let mut fx = sec6_goal();
    fx.reward = RewardStructure::untrusted_use(&fx.plant, GAMMA).unwrap();
    fx
}

/// Run of the history-dependent policy on the goal plant that plays `U` for
/// `2k` steps, `S` once (reaching `qg`), then `U` forever; cut after `horizon` steps.
pub fn goal_detour_run(plant: &Plant, k: usize, horizon: usize) -> FiniteRun {
    let (s, u) = (plant.safe_action().unwrap_or(0), plant.untrusted_action().unwrap_or(1));
    let mut run = FiniteRun::new(plant.initial());
    for t in 0..horizon {
        let a = if t == 2 * k { s } else { u };
        run.push(a, plant.next(run.last_state(), a));
    }
    run
}

pub fn by_name(name: &str) -> Result<PlantSpec<f64>> {
    match name {
        "fig2-left" => Ok(fig2_left()),
        "fig2-right" => Ok(fig2_right()),
        "sec6-goal" => Ok(sec6_goal()),
        other => Err(Error::config(
            "fixture",
            format!("unknown fixture `{other}` (expected one of {})", NAMES.join(", ")),
        )),
    }
}
