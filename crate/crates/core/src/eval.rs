//! Episode evaluation of switching deciders and trajectory export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{reach_rta_decide, sim_rta_decide, CheckSet, LookaheadConfig};
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::qlearning::{greedy_modes, QTable};
use crate::scenario::{Env, Mode, ScenarioConfig, ScenarioKind, ScenarioState};

/// Stand-in for an infinite time to collision in reports.
pub const TTC_SENTINEL: f64 = 1e9;
/// Closing speeds below this (m/s) are floored before dividing.
pub const MIN_CLOSING_SPEED: f64 = 1e-6;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of episode `index` under master seed `seed`.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RtaTag {
    Sim,
    Reach,
    Qtable,
    AlwaysS,
    AlwaysU,
}

impl RtaTag {
    pub const ALL: [RtaTag; 5] = [RtaTag::Sim, RtaTag::Reach, RtaTag::Qtable, RtaTag::AlwaysS, RtaTag::AlwaysU];

    pub fn name(self) -> &'static str {
        match self {
            RtaTag::Sim => "sim",
            RtaTag::Reach => "reach",
            RtaTag::Qtable => "qtable",
            RtaTag::AlwaysS => "always_s",
            RtaTag::AlwaysU => "always_u",
        }
    }
}

impl FromStr for RtaTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown rta `{s}` (sim, reach, qtable, always_s, always_u)")))
    }
}

/// A switching decision rule over scenario states.
#[derive(Clone, Debug)]
pub enum Decider<'a> {
    Sim(LookaheadConfig),
    Reach(LookaheadConfig),
    Table(&'a QTable),
    Constant(Mode),
}

impl<'a> Decider<'a> {
    /// Builds the decider for `tag`. `check_set` overrides the config's lookahead check set.
    pub fn new(env: &Env, tag: RtaTag, check_set: Option<CheckSet>, table: Option<&'a QTable>) -> Result<Self> {
        let mut lk = env.config().lookahead.clone();
        if let Some(c) = check_set {
            lk.check_set = c;
        }
        if lk.check_set == CheckSet::Recoverable && env.kind() != ScenarioKind::Acc {
            return Err(Error::config("lookahead.check_set", "the recoverable check set is defined for acc only"));
        }
        Ok(match tag {
            RtaTag::Sim => Decider::Sim(lk),
            RtaTag::Reach => Decider::Reach(lk),
            RtaTag::AlwaysS => Decider::Constant(Mode::S),
            RtaTag::AlwaysU => Decider::Constant(Mode::U),
            RtaTag::Qtable => {
                let t = table.ok_or_else(|| Error::Precondition("rta `qtable` needs a table file".into()))?;
                if t.scenario != env.kind().name() {
                    return Err(Error::Precondition(format!(
                        "table was trained on `{}`, not `{}`",
                        t.scenario,
                        env.kind().name()
                    )));
                }
                if t.quantizer.dims() != env.observation_dim() {
                    return Err(Error::Precondition(format!(
                        "table quantizes {} observation components, the scenario has {}",
                        t.quantizer.dims(),
                        env.observation_dim()
                    )));
                }
                Decider::Table(t)
            }
        })
    }

    /// Modes for every follower at `s`; `seed` feeds the sampled lookahead.
    pub fn decide(&self, env: &Env, s: &ScenarioState, seed: u64) -> Vec<Mode> {
        match self {
            Decider::Sim(lk) => sim_rta_decide(env, s, lk, seed),
            Decider::Reach(lk) => reach_rta_decide(env, s, lk),
            Decider::Table(t) => greedy_modes(env, t, s),
            Decider::Constant(m) => vec![*m; env.agents()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    /// Mean decider wall time per decision (ms).
    pub rt_ms: f64,
    /// Minimum time to collision (s); negative on violation, [`TTC_SENTINEL`] if never closing.
    pub ttc_s: f64,
    /// Percent of follower decisions choosing `U`.
    pub u_pct: f64,
    /// Mean distance to the leader or nearest other follower (m).
    pub mean_dist: f64,
    pub violated: bool,
    pub steps: usize,
    pub discounted_return: f64,
}

/// State of the episode at one decision boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub time: f64,
    pub followers: Vec<Vec<f64>>,
    /// Per-follower signed distance to the unsafe set.
    pub agent_dist: Vec<f64>,
    /// Modes chosen at this state; `None` at the final record.
    pub actions: Option<Vec<Mode>>,
    /// Reward received on entering this state; 0 at the start.
    pub reward: f64,
}

impl Record {
    pub fn min_dist(&self) -> f64 {
        self.agent_dist.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub model: Model,
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn time_to_collision(&self) -> f64 {
        let times: Vec<f64> = self.records.iter().map(|r| r.time).collect();
        let dists: Vec<f64> = self.records.iter().map(Record::min_dist).collect();
        time_to_collision(&times, &dists)
    }

    /// CSV with one row per follower per record and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,agent_id,x,y,z,psi,gamma,v,action,reward,min_unsafe_dist\n");
        for r in &self.records {
            for (i, x) in r.followers.iter().enumerate() {
                let cols = match self.model {
                    Model::Acc => [x[0], 0.0, 0.0, 0.0, 0.0, x[1]],
                    Model::Dubins => [x[0], x[1], 0.0, x[2], 0.0, x[3]],
                    Model::Air => [x[0], x[1], x[2], x[3], x[4], x[5]],
                };
                let _ = write!(out, "{},{i}", num(r.time));
                for c in cols {
                    let _ = write!(out, ",{}", num(c));
                }
                let action = r.actions.as_ref().map_or("", |a| a[i].as_str());
                let _ = writeln!(out, ",{action},{},{}", num(r.reward), num(r.agent_dist[i]));
            }
        }
        out
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Time to collision at one step: distance over closing speed, `+inf` when not closing.
pub fn ttc_step(signed_distance: f64, closing_speed: f64) -> f64 {
    if closing_speed > 0.0 {
        signed_distance / closing_speed.max(MIN_CLOSING_SPEED)
    } else {
        f64::INFINITY
    }
}

/// Minimum per-step TTC of a sampled distance trace, capped at [`TTC_SENTINEL`].
///
/// Closing speeds are finite differences between consecutive samples. If the
/// trace enters the unsafe set, the result is minus the estimate made from the
/// last safe sample over the violating interval, kept strictly negative.
pub fn time_to_collision(times: &[f64], dists: &[f64]) -> f64 {
    assert_eq!(times.len(), dists.len());
    let mut best = f64::INFINITY;
    for k in 1..dists.len() {
        let dt = times[k] - times[k - 1];
        let closing = if dt > 0.0 { (dists[k - 1] - dists[k]) / dt } else { 0.0 };
        if dists[k] < 0.0 {
            let est = dists[k - 1].max(0.0) / closing.max(MIN_CLOSING_SPEED);
            return -est.max(1e-12);
        }
        best = best.min(ttc_step(dists[k], closing));
    }
    if dists.first().is_some_and(|d| *d < 0.0) {
        return -1e-12;
    }
    best.min(TTC_SENTINEL)
}

/// Runs one episode from the randomized start drawn with `seed`.
pub fn run_episode(env: &Env, decider: &Decider, seed: u64, record: bool) -> Result<(EpisodeMetrics, Option<Trajectory>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = env.reset_random(&mut rng)?;
    let agents = env.agents();
    let agent_dist = |s: &ScenarioState| -> Vec<f64> {
        (0..agents)
            .map(|i| env.agent_unsafe_distance(&s.followers, i, &s.leader))
            .collect()
    };
    let mut records = vec![Record {
        time: s.time,
        followers: s.followers.clone(),
        agent_dist: agent_dist(&s),
        actions: None,
        reward: 0.0,
    }];
    let mut decide_s = 0.0;
    let mut u_count = 0usize;
    let mut dist_sum = env.separation(&s);
    let mut ret = 0.0;
    let mut discount = 1.0;
    let gamma = env.config().gamma;
    loop {
        let t0 = Instant::now();
        let modes = decider.decide(env, &s, splitmix64(seed ^ (s.step as u64 + 1)));
        decide_s += t0.elapsed().as_secs_f64();
        u_count += modes.iter().filter(|m| **m == Mode::U).count();
        let r = env.step(&mut s, &modes)?;
        ret += discount * r.reward;
        discount *= gamma;
        dist_sum += env.separation(&s);
        records.last_mut().expect("start record").actions = Some(modes);
        records.push(Record {
            time: s.time,
            followers: s.followers.clone(),
            agent_dist: agent_dist(&s),
            actions: None,
            reward: r.reward,
        });
        if r.done {
            break;
        }
    }
    let steps = s.step;
    let traj = Trajectory {
        model: env.model(),
        records,
    };
    let metrics = EpisodeMetrics {
        seed,
        rt_ms: 1e3 * decide_s / steps as f64,
        ttc_s: traj.time_to_collision(),
        u_pct: 100.0 * u_count as f64 / (steps * agents) as f64,
        mean_dist: dist_sum / (steps + 1) as f64,
        violated: s.violation,
        steps,
        discounted_return: ret,
    };
    Ok((metrics, record.then_some(traj)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub rt_ms: f64,
    /// Mean over episodes of the per-episode minimum TTC.
    pub ttc_s: f64,
    pub min_ttc_s: f64,
    pub u_pct: f64,
    pub mean_dist: f64,
    pub fail_pct: f64,
}

impl Aggregates {
    pub fn from_episodes(eps: &[EpisodeMetrics]) -> Self {
        let n = eps.len().max(1) as f64;
        let mean = |f: fn(&EpisodeMetrics) -> f64| eps.iter().map(f).sum::<f64>() / n;
        Self {
            rt_ms: mean(|e| e.rt_ms),
            ttc_s: mean(|e| e.ttc_s),
            min_ttc_s: eps.iter().map(|e| e.ttc_s).fold(f64::INFINITY, f64::min),
            u_pct: mean(|e| e.u_pct),
            mean_dist: mean(|e| e.mean_dist),
            fail_pct: 100.0 * eps.iter().filter(|e| e.violated).count() as f64 / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rta: RtaTag,
    pub check_set: CheckSet,
    pub seed: u64,
    pub aggregates: Aggregates,
    pub episodes: Vec<EpisodeMetrics>,
    pub config: ScenarioConfig,
}

impl Report {
    /// Whether the stored aggregates equal a recomputation from the episodes.
    pub fn is_consistent(&self) -> bool {
        Aggregates::from_episodes(&self.episodes) == self.aggregates
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "report".into(),
            source,
        })
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub rta: RtaTag,
    pub episodes: usize,
    pub seed: u64,
    pub check_set: Option<CheckSet>,
    /// Writes `episode_NNN.csv` per episode when set.
    pub export_dir: Option<PathBuf>,
    /// Worker threads; 0 picks the available parallelism.
    pub threads: usize,
}

impl EvalOptions {
    pub fn new(rta: RtaTag, episodes: usize, seed: u64) -> Self {
        Self {
            rta,
            episodes,
            seed,
            check_set: None,
            export_dir: None,
            threads: 0,
        }
    }
}

/// Runs `opts.episodes` randomized episodes; deterministic in `opts.seed` apart from timings.
pub fn evaluate(env: &Env, opts: &EvalOptions, table: Option<&QTable>) -> Result<Report> {
    if opts.episodes == 0 {
        return Err(Error::Precondition("evaluation needs at least one episode".into()));
    }
    let decider = Decider::new(env, opts.rta, opts.check_set, table)?;
    if let Some(dir) = &opts.export_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let threads = match opts.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(opts.episodes);
    let run = |i: usize| -> Result<EpisodeMetrics> {
        let seed = episode_seed(opts.seed, i);
        let (m, traj) = run_episode(env, &decider, seed, opts.export_dir.is_some())?;
        if let (Some(dir), Some(t)) = (&opts.export_dir, traj) {
            t.export(dir.join(format!("episode_{i:03}.csv")))?;
        }
        Ok(m)
    };
    let mut results: Vec<Option<Result<EpisodeMetrics>>> = (0..opts.episodes).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let run = &run;
                scope.spawn(move || {
                    (w..opts.episodes)
                        .step_by(threads)
                        .map(|i| (i, run(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("evaluation worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let episodes = results
        .into_iter()
        .map(|r| r.expect("every episode ran"))
        .collect::<Result<Vec<_>>>()?;
    let check_set = match &decider {
        Decider::Sim(lk) | Decider::Reach(lk) => lk.check_set,
        _ => opts.check_set.unwrap_or(env.config().lookahead.check_set),
    };
    Ok(Report {
        rta: opts.rta,
        check_set,
        seed: opts.seed,
        aggregates: Aggregates::from_episodes(&episodes),
        episodes,
        config: env.config().clone(),
    })
}
