//! Tabular Q-learning of switching policies over quantized observations.
//!
//! Training uses the shaped reward: a violation ends the episode with the
//! penalty for `n = T_max`, and episodes cut off at `T_max` bootstrap from the
//! last state. Action index 0 is `S` and 1 is `U`; ties go to `U`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Model, Quantizer};
use crate::error::{Error, Result};
use crate::plant::{Plant, Reward, RewardStructure, StationaryPolicy, UnsafeSet};
use crate::scenario::{Env, Mode, ScenarioState};
use crate::shaping::shape;

pub const S_INDEX: usize = 0;
pub const U_INDEX: usize = 1;
pub const FORMAT: &str = "rta-qtable/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub alpha0: f64,
    /// Learning rate for a pair visited `k` times is `alpha0 / (1 + k / alpha_decay)`.
    pub alpha_decay: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episodes over which epsilon decays linearly.
    pub epsilon_fraction: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            alpha0: 0.2,
            alpha_decay: 1000.0,
            epsilon_start: 0.3,
            epsilon_end: 0.02,
            epsilon_fraction: 0.8,
        }
    }
}

impl Hyper {
    pub fn epsilon(&self, episode: usize, episodes: usize) -> f64 {
        let span = (self.epsilon_fraction * episodes as f64).max(1.0);
        let frac = (episode as f64 / span).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn alpha(&self, visits: u32) -> f64 {
        self.alpha0 / (1.0 + visits as f64 / self.alpha_decay)
    }

    fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::config("rl.alpha0", "must be in (0, 1]"));
        }
        if !(self.alpha_decay > 0.0) {
            return Err(Error::config("rl.alpha_decay", "must be positive"));
        }
        if !(unit(self.epsilon_start) && unit(self.epsilon_end) && unit(self.epsilon_fraction)) {
            return Err(Error::config("rl.epsilon", "schedule values must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// `rl` block of a scenario config. Empty grid fields take per-model defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlConfig {
    pub cells: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(flatten)]
    pub hyper: Hyper,
    /// Number of evenly spaced checkpoints considered for the returned table.
    pub checkpoints: usize,
    /// Greedy evaluation episodes per checkpoint.
    pub checkpoint_episodes: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            cells: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            hyper: Hyper::default(),
            checkpoints: 10,
            checkpoint_episodes: 50,
        }
    }
}

impl RlConfig {
    pub fn quantizer(&self, model: Model) -> Result<Quantizer<f64>> {
        let (cells, lower, upper): (Vec<usize>, Vec<f64>, Vec<f64>) = match model {
            Model::Acc => (vec![40, 40], vec![-15.0, -10.0], vec![15.0, 10.0]),
            Model::Dubins => (
                vec![12, 10, 8, 6, 8],
                vec![-20.0, -10.0, -1.0, -5.0, -5.0],
                vec![20.0, 10.0, 1.0, 5.0, 35.0],
            ),
            Model::Air => (
                vec![8, 8, 6, 6, 4, 4, 6],
                vec![-40.0, -20.0, -20.0, -1.0, -0.5, -10.0, -10.0],
                vec![40.0, 20.0, 20.0, 1.0, 0.5, 10.0, 70.0],
            ),
        };
        let pick = |given: &Vec<f64>, default: Vec<f64>| if given.is_empty() { default } else { given.clone() };
        let cells = if self.cells.is_empty() { cells } else { self.cells.clone() };
        Quantizer::new(pick(&self.lower, lower), pick(&self.upper, upper), cells)
            .map_err(|e| Error::config("rl", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub format: String,
    /// Scenario tag, or `plant` for discrete plants.
    pub scenario: String,
    pub quantizer: Quantizer<f64>,
    pub gamma: f64,
    pub seed: u64,
    pub episodes: usize,
    pub hyper: Hyper,
    /// Row-major `[cell][action]`.
    pub q: Vec<f64>,
    pub visits: Vec<u32>,
}

impl QTable {
    pub fn new(scenario: &str, quantizer: Quantizer<f64>, gamma: f64, seed: u64, hyper: Hyper) -> Self {
        let n = quantizer.num_cells() * 2;
        Self {
            format: FORMAT.into(),
            scenario: scenario.into(),
            quantizer,
            gamma,
            seed,
            episodes: 0,
            hyper,
            q: vec![0.0; n],
            visits: vec![0; n],
        }
    }

    pub fn cell(&self, obs: &[f64]) -> usize {
        self.quantizer.quantize(obs)
    }

    pub fn value(&self, cell: usize, action: usize) -> f64 {
        self.q[cell * 2 + action]
    }

    pub fn best_action(&self, cell: usize) -> usize {
        if self.q[cell * 2 + U_INDEX] >= self.q[cell * 2 + S_INDEX] {
            U_INDEX
        } else {
            S_INDEX
        }
    }

    pub fn max_value(&self, cell: usize) -> f64 {
        self.q[cell * 2].max(self.q[cell * 2 + 1])
    }

    /// Greedy action for an observation; ties (including unvisited cells) pick `U`.
    pub fn decide(&self, obs: &[f64]) -> Mode {
        mode_of(self.best_action(self.cell(obs)))
    }

    fn update(&mut self, cell: usize, action: usize, target: f64) {
        let i = cell * 2 + action;
        let alpha = self.hyper.alpha(self.visits[i]);
        self.q[i] += alpha * (target - self.q[i]);
        self.visits[i] = self.visits[i].saturating_add(1);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "Q-table".into(),
            source,
        })?;
        if t.format != FORMAT {
            return Err(Error::config("format", format!("unsupported table format `{}`", t.format)));
        }
        if t.q.len() != t.quantizer.num_cells() * 2 || t.visits.len() != t.q.len() {
            return Err(Error::config("q", "table size does not match the quantizer"));
        }
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn mode_of(action: usize) -> Mode {
    if action == U_INDEX {
        Mode::U
    } else {
        Mode::S
    }
}

fn epsilon_greedy(table: &QTable, cell: usize, eps: f64, rng: &mut ChaCha8Rng) -> usize {
    if rng.gen::<f64>() < eps {
        rng.gen_range(0..2)
    } else {
        table.best_action(cell)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode_return: f64,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub episode: usize,
    pub mean_return: f64,
    pub violations: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The selected table: best mean return among checkpoints without violations.
    pub table: QTable,
    pub final_table: QTable,
    pub curve: Vec<EpisodeLog>,
    pub checkpoints: Vec<Checkpoint>,
    pub selected: Option<usize>,
}

/// Greedy rollouts of `table` from randomized starts: (mean return, violating episodes).
pub fn greedy_rollouts(env: &Env, table: &QTable, episodes: usize, seed: u64) -> Result<(f64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut violations = 0;
    for _ in 0..episodes {
        let mut s = env.reset_random(&mut rng)?;
        let mut ret = 0.0;
        let mut discount = 1.0;
        loop {
            let modes = greedy_modes(env, table, &s);
            let r = env.step(&mut s, &modes)?;
            ret += discount * r.reward;
            discount *= env.config().gamma;
            if r.done {
                violations += r.violation as usize;
                break;
            }
        }
        total += ret;
    }
    Ok((total / episodes.max(1) as f64, violations))
}

/// Per-follower greedy decisions from the shared table.
pub fn greedy_modes(env: &Env, table: &QTable, s: &ScenarioState) -> Vec<Mode> {
    (0..env.agents()).map(|i| table.decide(&env.observation(s, i))).collect()
}

/// Trains on a scenario for `episodes` episodes.
pub fn train(env: &Env, episodes: usize, seed: u64) -> Result<TrainOutcome> {
    if episodes == 0 {
        return Err(Error::Precondition("training needs at least one episode".into()));
    }
    let rl = &env.config().rl;
    rl.hyper.validate()?;
    let quantizer = rl.quantizer(env.model())?;
    if quantizer.dims() != env.observation_dim() {
        return Err(Error::config(
            "rl.cells",
            format!("observation has {} components, grid {}", env.observation_dim(), quantizer.dims()),
        ));
    }
    let gamma = env.config().gamma;
    let mut table = QTable::new(env.kind().name(), quantizer, gamma, seed, rl.hyper.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval_seed = crate::eval::splitmix64(seed ^ 0x5eed_c0de);
    let every = (episodes / rl.checkpoints.max(1)).max(1);
    let agents = env.agents();

    let mut curve = Vec::with_capacity(episodes);
    let mut checkpoints = Vec::new();
    let mut best: Option<(f64, QTable, usize)> = None;
    let mut cells = vec![0usize; agents];
    let mut actions = vec![0usize; agents];
    let mut modes = vec![Mode::S; agents];

    for ep in 0..episodes {
        let eps = rl.hyper.epsilon(ep, episodes);
        let mut s = env.reset_random(&mut rng)?;
        let mut ret = 0.0;
        let mut discount = 1.0;
        for i in 0..agents {
            cells[i] = table.cell(&env.observation(&s, i));
        }
        loop {
            for i in 0..agents {
                actions[i] = epsilon_greedy(&table, cells[i], eps, &mut rng);
                modes[i] = mode_of(actions[i]);
            }
            let r = env.step(&mut s, &modes)?;
            ret += discount * r.reward;
            discount *= gamma;
            let mut targets = [(0usize, 0.0f64); 4];
            for i in 0..agents {
                targets[i] = if r.violation {
                    (cells[i], r.reward)
                } else {
                    let next = table.cell(&env.observation(&s, i));
                    (next, r.reward + gamma * table.max_value(next))
                };
            }
            for i in 0..agents {
                table.update(cells[i], actions[i], targets[i].1);
                cells[i] = targets[i].0;
            }
            if r.done {
                curve.push(EpisodeLog {
                    episode_return: ret,
                    violation: r.violation,
                });
                break;
            }
        }
        table.episodes = ep + 1;
        if (ep + 1) % every == 0 || ep + 1 == episodes {
            let (mean_return, violations) =
                greedy_rollouts(env, &table, rl.checkpoint_episodes, eval_seed)?;
            log::debug!("checkpoint {}: mean return {mean_return:.3}, violations {violations}", ep + 1);
            checkpoints.push(Checkpoint {
                episode: ep + 1,
                mean_return,
                violations,
            });
            if violations == 0 && best.as_ref().map_or(true, |(b, _, _)| mean_return > *b) {
                best = Some((mean_return, table.clone(), checkpoints.len() - 1));
            }
        }
    }
    let (selected, chosen) = match best {
        Some((_, t, i)) => (Some(i), t),
        None => {
            log::warn!("no checkpoint was violation-free; returning the final table");
            (None, table.clone())
        }
    };
    Ok(TrainOutcome {
        table: chosen,
        final_table: table,
        curve,
        checkpoints,
        selected,
    })
}

/// Trains on a discrete plant with the shaped reward for `n = |Q|`.
///
/// Each episode starts from a uniformly drawn state (exploring starts) and runs
/// `horizon` steps; the plant has no terminal states, so every update bootstraps.
pub fn train_plant(
    plant: &Plant,
    rs: &RewardStructure<f64>,
    unsafe_set: &UnsafeSet,
    episodes: usize,
    horizon: usize,
    seed: u64,
    hyper: Hyper,
) -> Result<QTable> {
    hyper.validate()?;
    let (Some(s_act), Some(u_act), 2) = (plant.safe_action(), plant.untrusted_action(), plant.num_actions())
    else {
        return Err(Error::Precondition("plant training needs exactly the actions `S` and `U`".into()));
    };
    let n = plant.num_states();
    let shaped = shape(rs, unsafe_set, n)?;
    let gamma = shaped.gamma();
    let quantizer = Quantizer::new(vec![0.0], vec![n as f64], vec![n])?;
    let mut table = QTable::new("plant", quantizer, gamma, seed, hyper);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant_action = |a: usize| if a == U_INDEX { u_act } else { s_act };
    for ep in 0..episodes {
        let eps = table.hyper.epsilon(ep, episodes);
        let mut q = rng.gen_range(0..n);
        for _ in 0..horizon {
            let a = epsilon_greedy(&table, q, eps, &mut rng);
            let pa = plant_action(a);
            let next = plant.next(q, pa);
            let target = shaped.reward(q, pa) + gamma * table.max_value(next);
            table.update(q, a, target);
            q = next;
        }
        table.episodes = ep + 1;
    }
    Ok(table)
}

/// Greedy plant policy of a plant-mode table, in the plant's action indices.
pub fn plant_policy(table: &QTable, plant: &Plant) -> Result<StationaryPolicy> {
    let (Some(s_act), Some(u_act)) = (plant.safe_action(), plant.untrusted_action()) else {
        return Err(Error::Precondition("plant needs the actions `S` and `U`".into()));
    };
    Ok(StationaryPolicy::new(
        (0..plant.num_states())
            .map(|q| if table.best_action(q) == U_INDEX { u_act } else { s_act })
            .collect(),
    ))
}
