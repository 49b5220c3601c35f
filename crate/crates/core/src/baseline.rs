//! Lookahead switching baselines for the continuous scenarios.
//!
//! Both deciders allow `U` only if every follower, run under `U` for the
//! lookahead horizon, stays inside the check set. `SimRTA` tests sampled
//! trajectories from the estimate box; `ReachRTA` tests interval
//! over-approximations of all of them. Fleet decisions are joint: all `U` or all `S`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::interval::{flow_step, Interval};
use crate::lookahead::acc_recoverable;
use crate::scenario::geometry::box_gap;
use crate::scenario::{Env, LeaderState, Mode, ScenarioKind, ScenarioState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckSet {
    /// The complement of the unsafe set.
    #[default]
    Safe,
    /// Acc only: the braking-distance recoverable set.
    Recoverable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookaheadConfig {
    /// Decision steps to look ahead.
    pub horizon: usize,
    /// Sampled trajectories for `SimRTA`.
    pub samples: usize,
    /// Estimate box half-widths per state component; empty means exact state.
    pub half_widths: Vec<f64>,
    pub check_set: CheckSet,
    /// Enclosure sub-steps per integrator step.
    pub substeps: usize,
    /// A reach box wider than this in any component counts as unknown.
    pub max_width: f64,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            samples: 10,
            half_widths: Vec::new(),
            check_set: CheckSet::Safe,
            substeps: 4,
            max_width: 1e4,
        }
    }
}

impl LookaheadConfig {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("lookahead.horizon", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(Error::config("lookahead.samples", "must be at least 1"));
        }
        if self.substeps == 0 {
            return Err(Error::config("lookahead.substeps", "must be at least 1"));
        }
        if !self.half_widths.is_empty()
            && (self.half_widths.len() != state_dim || self.half_widths.iter().any(|w| !(*w >= 0.0)))
        {
            return Err(Error::config(
                "lookahead.half_widths",
                format!("needs {state_dim} non-negative components"),
            ));
        }
        if !(self.max_width > 0.0) {
            return Err(Error::config("lookahead.max_width", "must be positive"));
        }
        Ok(())
    }

    pub fn half_width(&self, i: usize) -> f64 {
        self.half_widths.get(i).copied().unwrap_or(0.0)
    }
}

/// Axis-aligned box over one follower's state at integrator step `time_index`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub time_index: usize,
}

impl ReachBox {
    pub fn around(x: &[f64], lk: &LookaheadConfig, time_index: usize) -> Self {
        Self {
            lo: x.iter().enumerate().map(|(i, v)| v - lk.half_width(i)).collect(),
            hi: x.iter().enumerate().map(|(i, v)| v + lk.half_width(i)).collect(),
            time_index,
        }
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| Interval::new(l, h)).collect()
    }

    fn from_intervals(x: &[Interval], time_index: usize) -> Self {
        Self {
            lo: x.iter().map(|i| i.lo).collect(),
            hi: x.iter().map(|i| i.hi).collect(),
            time_index,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
            time_index: self.time_index.max(other.time_index),
        }
    }
}

/// Boxes at the end of every integrator step, `boxes[k][agent]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachTrace {
    pub boxes: Vec<Vec<ReachBox>>,
    pub control_period: usize,
}

impl ReachTrace {
    /// Per decision step, the hull of each follower's boxes over that step.
    pub fn control_step_boxes(&self) -> Vec<Vec<ReachBox>> {
        self.boxes
            .chunks(self.control_period)
            .map(|chunk| {
                (0..chunk[0].len())
                    .map(|a| chunk[1..].iter().fold(chunk[0][a].clone(), |h, b| h.hull(&b[a])))
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reach {
    Bounded(ReachTrace),
    /// Width blow-up or failed enclosure at this integrator step.
    Unknown { at: usize },
}

fn steer_iv(env: &Env, x: Interval, y: Interval, psi: Interval, l: &LeaderState, mode: Mode, agent: usize) -> Interval {
    let g = &env.config().gains;
    let r = env.reference_point(l, mode, agent);
    let e_y = -psi.sin() * (-x + r.x) + psi.cos() * (-y + r.y);
    let turn = (-psi + r.psi).sin();
    let omega = (e_y * g.k1 + turn * g.k2) * r.v + r.omega;
    omega.clamp(-g.omega_max, g.omega_max)
}

fn catch_up_iv(env: &Env, x: &[Interval], psi: Interval, v: Interval, l: &LeaderState, mode: Mode, agent: usize) -> Interval {
    let g = &env.config().gains;
    let r = env.reference_point(l, mode, agent);
    let e_x = psi.cos() * (-x[0] + r.x) + psi.sin() * (-x[1] + r.y);
    ((e_x * g.kx + r.v - v) * g.k3).clamp(-g.a_max, g.a_max)
}

/// Interval extension of the scenario controllers.
pub fn control_interval(env: &Env, mode: Mode, x: &[Interval], l: &LeaderState, agent: usize) -> Vec<Interval> {
    let g = &env.config().gains;
    match env.model() {
        Model::Acc => {
            let target = l.x - g.d;
            let a = match mode {
                Mode::U if x[0].lo > target => Interval::point(-g.a_max),
                Mode::U if x[0].hi <= target => Interval::point(g.a_max),
                Mode::U => Interval::new(-g.a_max, g.a_max),
                Mode::S => ((-x[0] + target) * g.k1 + (-x[1] + l.v) * g.k2).clamp(-g.a_max, g.a_max),
            };
            vec![a]
        }
        Model::Dubins => {
            let omega = steer_iv(env, x[0], x[1], x[2], l, mode, agent);
            let a = match mode {
                Mode::U => catch_up_iv(env, x, x[2], x[3], l, mode, agent),
                Mode::S => catch_up_iv(env, x, x[2], x[3], l, mode, agent).clamp(-g.a_max, 0.0),
            };
            vec![omega, a]
        }
        Model::Air => {
            let r = env.reference_point(l, mode, agent);
            let omega = steer_iv(env, x[0], x[1], x[3], l, mode, agent);
            let horizontal = (-x[0] + r.x).hypot(-x[1] + r.y);
            let dz = -x[2] + r.z;
            let pitch = if horizontal.lo > 0.0 {
                dz.atan2(horizontal)
            } else {
                Interval::new(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)
            };
            let gamma_rate = ((pitch - x[4]) * g.k4).clamp(-g.gamma_max, g.gamma_max);
            let a = match mode {
                Mode::U => catch_up_iv(env, x, x[3], x[5], l, mode, agent),
                Mode::S => Interval::point(0.0),
            };
            vec![omega, gamma_rate, a]
        }
    }
}

/// Propagates follower boxes for `steps` decision steps from decision step
/// `start_step`, each follower under its mode in `modes`. Headings are not
/// wrapped inside boxes.
pub fn interval_reach(
    env: &Env,
    boxes: &[ReachBox],
    start_step: usize,
    modes: &[Mode],
    steps: usize,
    lk: &LookaheadConfig,
) -> Reach {
    let cfg = env.config();
    let model = env.model();
    let h = cfg.dt() / lk.substeps as f64;
    let vi = model.speed_index();
    let [v_min, v_max] = cfg.speed_bounds;
    let mut x: Vec<Vec<Interval>> = boxes.iter().map(ReachBox::intervals).collect();
    let mut out = Vec::with_capacity(steps * cfg.control_period);
    for step in 0..steps {
        for k in 0..cfg.control_period {
            let time_index = (start_step + step) * cfg.control_period + k;
            let l = env.leader_at(env.time_of(start_step + step, k));
            for (agent, xa) in x.iter_mut().enumerate() {
                let u = control_interval(env, modes[agent], xa, &l, agent);
                for _ in 0..lk.substeps {
                    match flow_step(model, xa, &u, h) {
                        Some((_, end)) => *xa = end,
                        None => return Reach::Unknown { at: time_index },
                    }
                }
                xa[vi] = xa[vi].clamp(v_min, v_max);
                if xa.iter().any(|iv| !(iv.width() <= lk.max_width)) {
                    return Reach::Unknown { at: time_index };
                }
            }
            out.push(
                x.iter()
                    .map(|xa| ReachBox::from_intervals(xa, time_index + 1))
                    .collect(),
            );
        }
    }
    Reach::Bounded(ReachTrace {
        boxes: out,
        control_period: cfg.control_period,
    })
}

fn position_box(env: &Env, b: &ReachBox) -> (Vec<f64>, Vec<f64>) {
    let dims = env.kind().position_dims();
    (b.lo[..dims].to_vec(), b.hi[..dims].to_vec())
}

/// Conservative test: false if any point of the boxes might be unsafe or,
/// for the recoverable check, outside the recoverable set.
pub fn boxes_in_check_set(env: &Env, boxes: &[ReachBox], l: &LeaderState, check: CheckSet) -> bool {
    let cfg = env.config();
    let g = &cfg.gains;
    let dims = env.kind().position_dims();
    let lp = l.position(dims);
    for (i, b) in boxes.iter().enumerate() {
        let (lo, hi) = position_box(env, b);
        if box_gap(&lo, &hi, &lp[..dims], &lp[..dims]) < g.c {
            return false;
        }
        if cfg.obstacles.iter().any(|ob| !(ob.box_distance(&lo, &hi) > 0.0)) {
            return false;
        }
        if env.model() == Model::Air && b.lo[2] < 0.0 {
            return false;
        }
        for other in &boxes[i + 1..] {
            let (olo, ohi) = position_box(env, other);
            if box_gap(&lo, &hi, &olo, &ohi) < cfg.agent_radius() {
                return false;
            }
        }
        if check == CheckSet::Recoverable && env.kind() == ScenarioKind::Acc {
            let gap = l.x - b.hi[0];
            let v = b.hi[1];
            if !acc_recoverable(gap, v, l.v, g.c, g.a_max) {
                return false;
            }
        }
    }
    true
}

fn point_in_check_set(env: &Env, followers: &[Vec<f64>], l: &LeaderState, check: CheckSet) -> bool {
    if env.unsafe_distance(followers, l) < 0.0 {
        return false;
    }
    if check == CheckSet::Recoverable && env.kind() == ScenarioKind::Acc {
        let g = &env.config().gains;
        let x = &followers[0];
        return acc_recoverable(l.x - x[0], x[1], l.v, g.c, g.a_max);
    }
    true
}

fn joint(env: &Env, mode: Mode) -> Vec<Mode> {
    vec![mode; env.agents()]
}

/// Sampled lookahead: `U` iff every sampled `U` rollout stays in the check set.
pub fn sim_rta_decide(env: &Env, s: &ScenarioState, lk: &LookaheadConfig, seed: u64) -> Vec<Mode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all_u = joint(env, Mode::U);
    let period = env.config().control_period;
    for _ in 0..lk.samples {
        let mut followers: Vec<Vec<f64>> = s
            .followers
            .iter()
            .map(|x| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let w = lk.half_width(i);
                        if w > 0.0 {
                            v + rng.gen_range(-w..=w)
                        } else {
                            *v
                        }
                    })
                    .collect()
            })
            .collect();
        for step in s.step..s.step + lk.horizon {
            for k in 0..period {
                if env.integrate_step(&mut followers, env.time_of(step, k), &all_u, true).is_err() {
                    return joint(env, Mode::S);
                }
                let l = env.leader_at(env.time_of(step, k + 1));
                if !point_in_check_set(env, &followers, &l, lk.check_set) {
                    return joint(env, Mode::S);
                }
            }
        }
    }
    all_u
}

/// Interval lookahead: `U` iff every reach box under `U` lies in the check set.
pub fn reach_rta_decide(env: &Env, s: &ScenarioState, lk: &LookaheadConfig) -> Vec<Mode> {
    let period = env.config().control_period;
    let boxes: Vec<ReachBox> = s
        .followers
        .iter()
        .map(|x| ReachBox::around(x, lk, s.step * period))
        .collect();
    let all_u = joint(env, Mode::U);
    match interval_reach(env, &boxes, s.step, &all_u, lk.horizon, lk) {
        Reach::Unknown { .. } => joint(env, Mode::S),
        Reach::Bounded(trace) => {
            let safe = trace.boxes.iter().all(|bs| {
                let l = env.leader_at(bs[0].time_index as f64 * env.config().dt());
                boxes_in_check_set(env, bs, &l, lk.check_set)
            });
            if safe {
                all_u
            } else {
                joint(env, Mode::S)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn acc_env(offset: [f64; 2]) -> Env {
        let mut cfg = ScenarioConfig::builtin("acc-var1").unwrap();
        cfg.initial.offset = offset.to_vec();
        Env::new(cfg).unwrap()
    }

    #[test]
    fn far_follower_gets_u() {
        let env = acc_env([-4.0, 0.0]);
        let s = env.reset();
        let lk = LookaheadConfig { horizon: 1, ..LookaheadConfig::default() };
        assert_eq!(sim_rta_decide(&env, &s, &lk, 0), vec![Mode::U]);
        assert_eq!(reach_rta_decide(&env, &s, &lk), vec![Mode::U]);
    }

    #[test]
    fn imminent_collision_gets_s() {
        // 1.5 m outside the ball and closing at 8 m/s: half a second under U ends inside it.
        let d = ScenarioConfig::builtin("acc-var1").unwrap().gains.d;
        let c = ScenarioConfig::builtin("acc-var1").unwrap().gains.c;
        let env = acc_env([d - c - 1.5, 8.0]);
        let s = env.reset();
        let lk = LookaheadConfig { horizon: 1, ..LookaheadConfig::default() };
        assert_eq!(sim_rta_decide(&env, &s, &lk, 0), vec![Mode::S]);
        assert_eq!(reach_rta_decide(&env, &s, &lk), vec![Mode::S]);
    }

    #[test]
    fn single_exact_sample_is_the_nominal_rollout() {
        let env = acc_env([-6.0, 0.0]);
        let s = env.reset();
        let lk = LookaheadConfig { samples: 1, ..LookaheadConfig::default() };
        let mut nominal = s.clone();
        let mut safe = true;
        for _ in 0..lk.horizon {
            if env.step(&mut nominal, &[Mode::U]).unwrap().violation {
                safe = false;
                break;
            }
        }
        let expected = if safe { Mode::U } else { Mode::S };
        assert_eq!(sim_rta_decide(&env, &s, &lk, 9), vec![expected]);
    }

    #[test]
    fn point_box_tracks_closed_form() {
        // Well behind the reference, U is a constant `+a_max` over the whole box.
        let env = acc_env([-4.0, 0.0]);
        let s = env.reset();
        let lk = LookaheadConfig::default();
        let b = ReachBox::around(&s.followers[0], &lk, 0);
        let Reach::Bounded(trace) = interval_reach(&env, &[b], 0, &[Mode::U], 2, &lk) else {
            panic!("reach blew up");
        };
        let (x0, v0) = (s.followers[0][0], s.followers[0][1]);
        let a = env.config().gains.a_max;
        let h = env.config().dt() / lk.substeps as f64;
        for (k, bs) in trace.boxes.iter().enumerate() {
            let t = (k + 1) as f64 * env.config().dt();
            let bx = &bs[0];
            assert!(bx.contains(&[x0 + v0 * t + 0.5 * a * t * t, v0 + a * t]), "step {k}: {bx:?}");
            // each Euler sub-step widens position by at most h^2 a_max; speed only by rounding
            let subs = ((k + 1) * lk.substeps) as f64;
            assert!(bx.hi[0] - bx.lo[0] <= subs * h * h * a * 1.01 + 1e-9);
            assert!(bx.hi[1] - bx.lo[1] < 1e-8);
        }
        assert_eq!(trace.control_step_boxes().len(), 2);
    }

    #[test]
    fn straight_dubins_heading_box_stays_degenerate() {
        let env = Env::new(ScenarioConfig::builtin("dubins-var1").unwrap()).unwrap();
        let x = [
            Interval::point(0.0),
            Interval::point(0.0),
            Interval::point(0.3),
            Interval::point(5.0),
        ];
        let u = [Interval::point(0.0), Interval::point(0.0)];
        let (_, end) = flow_step(env.model(), &x, &u, env.config().dt()).unwrap();
        assert!(end[2].width() < 1e-11);
    }

    #[test]
    fn box_over_obstacle_is_rejected() {
        let env = Env::new(ScenarioConfig::builtin("dubins_o-var1").unwrap()).unwrap();
        let ob = &env.config().obstacles[0];
        let b = ReachBox {
            lo: vec![ob.min()[0], ob.min()[1], 0.0, 1.0],
            hi: vec![ob.min()[0] + 0.5, ob.min()[1] + 0.5, 0.0, 1.0],
            time_index: 0,
        };
        let far = LeaderState { x: -1e4, ..LeaderState::default() };
        assert!(!boxes_in_check_set(&env, &[b], &far, CheckSet::Safe));
    }

    #[test]
    fn enlarging_the_box_never_shrinks_reach() {
        let env = Env::new(ScenarioConfig::builtin("dubins-var1").unwrap()).unwrap();
        let s = env.reset();
        let small = LookaheadConfig { half_widths: vec![0.1, 0.1, 0.01, 0.1], ..LookaheadConfig::default() };
        let large = LookaheadConfig { half_widths: vec![0.5, 0.5, 0.05, 0.3], ..LookaheadConfig::default() };
        let run = |lk: &LookaheadConfig| {
            let b = ReachBox::around(&s.followers[0], lk, 0);
            match interval_reach(&env, &[b], 0, &[Mode::U], 3, lk) {
                Reach::Bounded(t) => t,
                Reach::Unknown { .. } => panic!("blew up"),
            }
        };
        let (a, b) = (run(&small), run(&large));
        for (sa, sb) in a.boxes.iter().zip(&b.boxes) {
            for i in 0..4 {
                assert!(sb[0].lo[i] <= sa[0].lo[i] && sa[0].hi[i] <= sb[0].hi[i]);
            }
        }
    }
}
