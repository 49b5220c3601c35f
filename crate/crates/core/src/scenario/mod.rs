//! Episodic leader-follower environments.
//!
//! Each decision step holds the chosen mode (`S` or `U`, per follower) for
//! `control_period` integrator steps. Controllers are re-evaluated at every
//! integrator step and the unsafe set is checked after each one.

mod config;
pub mod geometry;
pub mod leader;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use config::{FleetConfig, InitialConfig, RewardConfig, RewardKind, ScenarioConfig, ScenarioKind};
use geometry::distance;
pub use leader::{LeaderConfig, LeaderState};

use crate::controllers::{
    acc_safety, acc_untrusted, air_tracking, dubins_tracking, TrackingReference,
};
use crate::dynamics::{step_in_place, AccState, AirState, DubinsState, Model};
use crate::error::{Error, Result};
use crate::scalar::wrap_angle;
use crate::shaping::penalty_value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    S,
    U,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::S => "S",
            Mode::U => "U",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioState {
    pub step: usize,
    pub time: f64,
    pub leader: LeaderState,
    pub followers: Vec<Vec<f64>>,
    pub done: bool,
    pub violation: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    pub violation: bool,
    /// Signed distance to the unsafe set at the end of the step.
    pub min_unsafe_distance: f64,
}

#[derive(Clone, Debug)]
pub struct Env {
    cfg: ScenarioConfig,
    model: Model,
    penalty: f64,
}

/// Resample limit for randomized starts that land in the unsafe set.
const MAX_RESETS: usize = 1000;

impl Env {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.lookahead.check_set == crate::baseline::CheckSet::Recoverable && cfg.scenario != ScenarioKind::Acc {
            return Err(Error::config("lookahead.check_set", "the recoverable check set is defined for acc only"));
        }
        let (penalty, _) = penalty_value(1.0, cfg.gamma, cfg.episode_len(), 1.0);
        let env = Self {
            model: cfg.scenario.model(),
            cfg,
            penalty,
        };
        env.check_obstacles_clear_of_leader()?;
        let start = env.reset();
        let d = env.min_unsafe_distance(&start);
        if d < 0.0 {
            return Err(Error::config(
                "initial.offset",
                format!("follower starts inside the unsafe set (signed distance {d:.3})"),
            ));
        }
        Ok(env)
    }

    fn check_obstacles_clear_of_leader(&self) -> Result<()> {
        let dims = self.cfg.scenario.position_dims();
        for k in 0..=self.cfg.episode_len() {
            let p = self.leader_at(k as f64 * self.cfg.control_dt()).position(dims);
            for (i, ob) in self.cfg.obstacles.iter().enumerate() {
                if ob.signed_distance(&p[..dims]) <= 0.0 {
                    return Err(Error::config(
                        "obstacles",
                        format!("obstacle {i} intersects the leader path at step {k}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn kind(&self) -> ScenarioKind {
        self.cfg.scenario
    }

    pub fn agents(&self) -> usize {
        self.cfg.scenario.agents()
    }

    /// Shaped violation penalty with `n = T_max`.
    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn leader_at(&self, t: f64) -> LeaderState {
        if self.cfg.scenario == ScenarioKind::Acc || self.cfg.leader.straight {
            self.cfg.leader.line_at(t)
        } else {
            self.cfg.leader.orbit_at(t)
        }
    }

    /// Point the given mode tracks for follower `agent`.
    /// Tracking point of `agent` in `mode`, carried rigidly with the leader's
    /// heading frame. Its heading and speed are those of the point's own motion,
    /// which on a turn differ from the leader's.
    pub fn reference_point(&self, l: &LeaderState, mode: Mode, agent: usize) -> TrackingReference<f64> {
        let g = &self.cfg.gains;
        if self.cfg.scenario == ScenarioKind::Acc {
            return TrackingReference { x: l.x - g.d, y: 0.0, z: 0.0, psi: 0.0, v: l.v, omega: 0.0 };
        }
        // offset in the leader frame: forward, left
        let (bx, by) = match (self.cfg.scenario, mode) {
            (ScenarioKind::DubinsO, Mode::S) => (-g.d, self.cfg.avoid_offset),
            (ScenarioKind::Fleet, _) => {
                let f = &self.cfg.fleet;
                let side = if agent % 2 == 0 { 1.0 } else { -1.0 };
                let mut dist = g.d * if agent < 2 { 2.0 } else { 4.0 };
                if mode == Mode::S {
                    dist *= f.safety_scale;
                }
                let angle = side * f.v_angle_deg.to_radians();
                (-dist * angle.cos(), -dist * angle.sin())
            }
            _ => (-g.d, 0.0),
        };
        let (s, c) = l.psi.sin_cos();
        let horizontal = l.v * l.gamma_p.cos();
        let vx = horizontal * c - l.omega * (s * bx + c * by);
        let vy = horizontal * s + l.omega * (c * bx - s * by);
        let vz = l.v * l.gamma_p.sin();
        let z = if self.cfg.scenario == ScenarioKind::Air && mode == Mode::U {
            l.z - g.delta_z
        } else {
            l.z
        };
        TrackingReference {
            x: l.x + c * bx - s * by,
            y: l.y + s * bx + c * by,
            z,
            psi: vy.atan2(vx),
            v: vx.hypot(vy).hypot(vz),
            omega: l.omega,
        }
    }

    /// Full reference state in the follower's state layout.
    pub fn reference_state(&self, l: &LeaderState, mode: Mode, agent: usize) -> Vec<f64> {
        let r = self.reference_point(l, mode, agent);
        match self.model {
            Model::Acc => vec![r.x, r.v],
            Model::Dubins => vec![r.x, r.y, r.psi, r.v],
            Model::Air => vec![r.x, r.y, r.z, r.psi, l.gamma_p, r.v],
        }
    }

    /// Follower state at `offset` from the untrusted reference of `leader`.
    pub fn follower_from_offset(&self, l: &LeaderState, offset: &[f64], agent: usize) -> Vec<f64> {
        let mut x = self.reference_state(l, Mode::U, agent);
        match self.model {
            Model::Acc => {
                x[0] += offset[0];
                x[1] += offset[1];
            }
            _ => {
                let (s, c) = x[self.psi_index()].sin_cos();
                x[0] += offset[0] * c - offset[1] * s;
                x[1] += offset[0] * s + offset[1] * c;
                for i in 2..x.len() {
                    x[i] += offset[i];
                }
                for &i in self.model.angle_indices() {
                    x[i] = wrap_angle(x[i]);
                }
            }
        }
        let [lo, hi] = self.cfg.speed_bounds;
        let vi = self.model.speed_index();
        x[vi] = x[vi].clamp(lo, hi);
        x
    }

    fn psi_index(&self) -> usize {
        match self.model {
            Model::Air => 3,
            _ => 2,
        }
    }

    fn state_at_offsets(&self, offsets: &[Vec<f64>]) -> ScenarioState {
        let leader = self.leader_at(0.0);
        ScenarioState {
            step: 0,
            time: 0.0,
            followers: (0..self.agents())
                .map(|i| self.follower_from_offset(&leader, &offsets[i], i))
                .collect(),
            leader,
            done: false,
            violation: false,
        }
    }

    /// Nominal start: every follower at the configured offset.
    pub fn reset(&self) -> ScenarioState {
        let offsets = vec![self.cfg.initial.offset.clone(); self.agents()];
        self.state_at_offsets(&offsets)
    }

    /// Start with offsets drawn uniformly from the configured range, resampling
    /// draws that begin inside the unsafe set.
    pub fn reset_random(&self, rng: &mut impl Rng) -> Result<ScenarioState> {
        let Some([lo, hi]) = &self.cfg.initial.offset_range else {
            return Ok(self.reset());
        };
        for _ in 0..MAX_RESETS {
            let offsets: Vec<Vec<f64>> = (0..self.agents())
                .map(|_| {
                    lo.iter()
                        .zip(hi)
                        .map(|(&a, &b)| if a < b { rng.gen_range(a..=b) } else { a })
                        .collect()
                })
                .collect();
            let s = self.state_at_offsets(&offsets);
            if self.min_unsafe_distance(&s) >= 0.0 {
                return Ok(s);
            }
        }
        Err(Error::config(
            "initial.offset_range",
            "no safe start found; the range lies inside the unsafe set",
        ))
    }

    /// Control input of `mode` for follower state `x`.
    pub fn control(&self, mode: Mode, x: &[f64], l: &LeaderState, agent: usize) -> [f64; 3] {
        let g = &self.cfg.gains;
        let u = match self.model {
            Model::Acc => {
                let q = AccState::from_slice(x);
                let lead = AccState { x: l.x, v: l.v };
                match mode {
                    Mode::U => acc_untrusted(&q, &lead, g),
                    Mode::S => acc_safety(&q, &lead, g),
                }
            }
            Model::Dubins => {
                let r = self.reference_point(l, mode, agent);
                dubins_tracking(&DubinsState::from_slice(x), &r, g, mode == Mode::U)
            }
            Model::Air => {
                let r = self.reference_point(l, mode, agent);
                air_tracking(&AirState::from_slice(x), &r, g, mode == Mode::S)
            }
        };
        let v = u.to_vec();
        let mut out = [0.0; 3];
        out[..v.len()].copy_from_slice(&v);
        out
    }

    /// One integrator step of every follower from time `t`; angles wrapped when `wrap`.
    pub fn integrate_step(
        &self,
        followers: &mut [Vec<f64>],
        t: f64,
        modes: &[Mode],
        wrap: bool,
    ) -> Result<()> {
        let l = self.leader_at(t);
        let [lo, hi] = self.cfg.speed_bounds;
        let vi = self.model.speed_index();
        let m = self.model.input_dim();
        for (i, x) in followers.iter_mut().enumerate() {
            let u = self.control(modes[i], x, &l, i);
            if !step_in_place(self.model, x, &u[..m], self.cfg.dt(), wrap) {
                return Err(Error::NonFinite { step: (t / self.cfg.dt()).round() as usize });
            }
            x[vi] = x[vi].clamp(lo, hi);
        }
        Ok(())
    }

    /// Time of integrator step `k` of decision step `step`.
    pub fn time_of(&self, step: usize, k: usize) -> f64 {
        (step * self.cfg.control_period + k) as f64 * self.cfg.dt()
    }

    pub fn step(&self, s: &mut ScenarioState, modes: &[Mode]) -> Result<StepResult> {
        if s.done {
            return Err(Error::Usage("episode already finished; call reset".into()));
        }
        if modes.len() != self.agents() {
            return Err(Error::InvalidInput(format!(
                "expected {} actions, got {}",
                self.agents(),
                modes.len()
            )));
        }
        let mut violation = false;
        let mut dist = f64::INFINITY;
        for k in 0..self.cfg.control_period {
            self.integrate_step(&mut s.followers, self.time_of(s.step, k), modes, true)?;
            s.time = self.time_of(s.step, k + 1);
            s.leader = self.leader_at(s.time);
            dist = self.unsafe_distance(&s.followers, &s.leader);
            if dist < 0.0 {
                violation = true;
                break;
            }
        }
        s.step += 1;
        let reward = if violation {
            self.penalty
        } else {
            self.reward(s, modes)
        };
        s.violation = violation;
        s.done = violation || s.step >= self.cfg.episode_len();
        Ok(StepResult {
            reward,
            done: s.done,
            violation,
            min_unsafe_distance: dist,
        })
    }

    fn reward(&self, s: &ScenarioState, modes: &[Mode]) -> f64 {
        let n = self.agents() as f64;
        match self.cfg.reward.kind {
            RewardKind::UntrustedUse => modes.iter().filter(|&&m| m == Mode::U).count() as f64 / n,
            RewardKind::Zone => {
                let dims = self.cfg.scenario.position_dims();
                let hits = s
                    .followers
                    .iter()
                    .enumerate()
                    .filter(|(i, x)| {
                        let r = self.reference_state(&s.leader, Mode::U, *i);
                        distance(&self.position(x)[..dims], &self.position(&r)[..dims])
                            <= self.cfg.zone_radius()
                    })
                    .count();
                hits as f64 / n
            }
        }
    }

    /// Position part of a follower state, padded to three coordinates.
    pub fn position(&self, x: &[f64]) -> [f64; 3] {
        match self.model {
            Model::Acc => [x[0], 0.0, 0.0],
            Model::Dubins => [x[0], x[1], 0.0],
            Model::Air => [x[0], x[1], x[2]],
        }
    }

    /// Signed distance of follower `i` to its nearest unsafe component.
    pub fn agent_unsafe_distance(&self, followers: &[Vec<f64>], i: usize, l: &LeaderState) -> f64 {
        let dims = self.cfg.scenario.position_dims();
        let p = self.position(&followers[i]);
        let lp = l.position(dims);
        let mut d = distance(&p[..dims], &lp[..dims]) - self.cfg.gains.c;
        for ob in &self.cfg.obstacles {
            d = d.min(ob.signed_distance(&p[..dims]));
        }
        if self.model == Model::Air {
            d = d.min(p[2]);
        }
        for (j, other) in followers.iter().enumerate() {
            if j != i {
                let q = self.position(other);
                d = d.min(distance(&p[..dims], &q[..dims]) - self.cfg.agent_radius());
            }
        }
        d
    }

    pub fn unsafe_distance(&self, followers: &[Vec<f64>], l: &LeaderState) -> f64 {
        (0..followers.len())
            .map(|i| self.agent_unsafe_distance(followers, i, l))
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimum signed distance to the unsafe set; negative iff in violation.
    pub fn min_unsafe_distance(&self, s: &ScenarioState) -> f64 {
        self.unsafe_distance(&s.followers, &s.leader)
    }

    /// Mean over followers of the distance to the nearest of the leader and other followers.
    pub fn separation(&self, s: &ScenarioState) -> f64 {
        let dims = self.cfg.scenario.position_dims();
        let lp = s.leader.position(dims);
        let n = s.followers.len();
        let total: f64 = (0..n)
            .map(|i| {
                let p = self.position(&s.followers[i]);
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| distance(&p[..dims], &self.position(&s.followers[j])[..dims]))
                    .fold(distance(&p[..dims], &lp[..dims]), f64::min)
            })
            .sum();
        total / n as f64
    }

    /// Scenario-relative features of follower `agent`: offset from the
    /// untrusted reference (reference frame), heading/pitch/speed differences,
    /// and the signed unsafe distance. Acc uses `[x - x_ref, v - v_l]`.
    pub fn observation(&self, s: &ScenarioState, agent: usize) -> Vec<f64> {
        let x = &s.followers[agent];
        let r = self.reference_state(&s.leader, Mode::U, agent);
        match self.model {
            Model::Acc => vec![x[0] - r[0], x[1] - r[1]],
            _ => {
                let pi = self.psi_index();
                let (sn, cs) = r[pi].sin_cos();
                let dx = x[0] - r[0];
                let dy = x[1] - r[1];
                let mut obs = vec![dx * cs + dy * sn, -dx * sn + dy * cs];
                if self.model == Model::Air {
                    obs.push(x[2] - r[2]);
                }
                obs.push(wrap_angle(x[pi] - r[pi]));
                if self.model == Model::Air {
                    obs.push(x[4] - r[4]);
                }
                let vi = self.model.speed_index();
                obs.push(x[vi] - r[vi]);
                obs.push(self.agent_unsafe_distance(&s.followers, agent, &s.leader));
                obs
            }
        }
    }

    pub fn observation_dim(&self) -> usize {
        match self.model {
            Model::Acc => 2,
            Model::Dubins => 5,
            Model::Air => 7,
        }
    }
}
