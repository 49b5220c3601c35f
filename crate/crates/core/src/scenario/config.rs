//! Scenario configuration files and the shipped presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::Obstacle;
use super::leader::LeaderConfig;
use crate::baseline::LookaheadConfig;
use crate::controllers::Gains;
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::qlearning::RlConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Acc,
    Dubins,
    DubinsO,
    Air,
    Fleet,
}

impl ScenarioKind {
    pub fn model(self) -> Model {
        match self {
            ScenarioKind::Acc => Model::Acc,
            ScenarioKind::Dubins | ScenarioKind::DubinsO | ScenarioKind::Fleet => Model::Dubins,
            ScenarioKind::Air => Model::Air,
        }
    }

    pub fn agents(self) -> usize {
        if self == ScenarioKind::Fleet {
            4
        } else {
            1
        }
    }

    /// Number of position coordinates.
    pub fn position_dims(self) -> usize {
        match self {
            ScenarioKind::Acc => 1,
            ScenarioKind::Air => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Acc => "acc",
            ScenarioKind::Dubins => "dubins",
            ScenarioKind::DubinsO => "dubins_o",
            ScenarioKind::Air => "air",
            ScenarioKind::Fleet => "fleet",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardKind {
    /// 1 for every step the untrusted controller is used.
    #[default]
    #[serde(rename = "r_u")]
    UntrustedUse,
    /// 1 for every step spent near the untrusted controller's reference.
    #[serde(rename = "r_zone")]
    Zone,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub kind: RewardKind,
    /// Defaults to `d / 2`.
    pub zone_radius: Option<f64>,
}

/// Follower start relative to the untrusted reference state at `t = 0`.
///
/// Components follow the model state, with the position part expressed in the
/// reference frame: `[dx, dv]` for acc, `[along, lateral, dpsi, dv]` for the
/// ground models, `[along, lateral, dz, dpsi, dgamma, dv]` for air.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub offset: Vec<f64>,
    /// `[lower, upper]` for randomized episodes; the nominal offset is used when absent.
    pub offset_range: Option<[Vec<f64>; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetConfig {
    /// Minimum separation between followers; defaults to `c`.
    pub agent_radius: Option<f64>,
    /// Half-angle of the V, degrees.
    pub v_angle_deg: f64,
    /// Safety-mode reference distance as a multiple of the untrusted one.
    pub safety_scale: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            agent_radius: None,
            v_angle_deg: 30.0,
            safety_scale: 1.5,
        }
    }
}

fn one() -> u32 {
    1
}

fn ten() -> usize {
    10
}

fn default_gamma() -> f64 {
    0.995
}

fn default_speed_bounds() -> [f64; 2] {
    [0.0, 100.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "one")]
    pub variation: u32,
    #[serde(default)]
    pub gains: Gains<f64>,
    #[serde(default)]
    pub leader: LeaderConfig,
    /// Decision steps per episode; 150 for acc and 400 otherwise when absent.
    #[serde(default)]
    pub episode_len: Option<usize>,
    /// Integrator step (s); 0.05 for acc and 0.02 otherwise when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Integrator steps per decision.
    #[serde(default = "ten")]
    pub control_period: usize,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default = "default_speed_bounds")]
    pub speed_bounds: [f64; 2],
    /// Dubins+O: lateral shift (m, positive to the leader's left) of the safety reference.
    #[serde(default)]
    pub avoid_offset: f64,
    #[serde(default)]
    pub fleet: FleetConfig,
    #[serde(default)]
    pub lookahead: LookaheadConfig,
    #[serde(default)]
    pub rl: RlConfig,
}

const BUILTIN: &[(&str, &str)] = &[
    ("acc-var1", include_str!("../../fixtures/acc-var1.json")),
    ("acc-var2", include_str!("../../fixtures/acc-var2.json")),
    ("acc-var3", include_str!("../../fixtures/acc-var3.json")),
    ("dubins-var1", include_str!("../../fixtures/dubins-var1.json")),
    ("dubins-var2", include_str!("../../fixtures/dubins-var2.json")),
    ("dubins-var3", include_str!("../../fixtures/dubins-var3.json")),
    ("dubins_o-var1", include_str!("../../fixtures/dubins_o-var1.json")),
    ("dubins_o-var2", include_str!("../../fixtures/dubins_o-var2.json")),
    ("dubins_o-var3", include_str!("../../fixtures/dubins_o-var3.json")),
    ("air-var1", include_str!("../../fixtures/air-var1.json")),
    ("air-var2", include_str!("../../fixtures/air-var2.json")),
    ("air-var3", include_str!("../../fixtures/air-var3.json")),
    ("fleet-var1", include_str!("../../fixtures/fleet-var1.json")),
];

impl ScenarioConfig {
    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::config("config", format!("no built-in scenario `{name}`")))?;
        Self::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "scenario config".into(),
            source,
        })?;
        Ok(cfg)
    }

    /// Reads a config file, or a built-in preset when `path` names one.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            if let Some(name) = path.to_str().filter(|n| BUILTIN.iter().any(|(b, _)| b == n)) {
                return Self::builtin(name);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn episode_len(&self) -> usize {
        self.episode_len
            .unwrap_or(if self.scenario == ScenarioKind::Acc { 150 } else { 400 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
            .unwrap_or(if self.scenario == ScenarioKind::Acc { 0.05 } else { 0.02 })
    }

    /// Seconds per decision step.
    pub fn control_dt(&self) -> f64 {
        self.dt() * self.control_period as f64
    }

    pub fn zone_radius(&self) -> f64 {
        self.reward.zone_radius.unwrap_or(self.gains.d / 2.0)
    }

    pub fn agent_radius(&self) -> f64 {
        self.fleet.agent_radius.unwrap_or(self.gains.c)
    }

    /// Static checks; the environment adds checks that need the dynamics.
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        let kind = self.scenario;
        self.leader.validate(kind != ScenarioKind::Acc)?;
        if self.episode_len() == 0 {
            return Err(Error::config("episode_len", "must be at least 1"));
        }
        if !(self.dt() > 0.0 && self.dt().is_finite()) {
            return Err(Error::config("dt", "must be positive"));
        }
        if self.control_period == 0 {
            return Err(Error::config("control_period", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", format!("{} not in (0, 1)", self.gamma)));
        }
        let [v_min, v_max] = self.speed_bounds;
        if !(v_min <= v_max && v_min.is_finite() && v_max.is_finite()) {
            return Err(Error::config("speed_bounds", "must be finite and ordered"));
        }
        if !(self.zone_radius() > 0.0) {
            return Err(Error::config("reward.zone_radius", "must be positive"));
        }
        if !(self.agent_radius() > 0.0) {
            return Err(Error::config("fleet.agent_radius", "must be positive"));
        }
        let dims = kind.position_dims();
        for (i, ob) in self.obstacles.iter().enumerate() {
            if kind == ScenarioKind::Acc {
                return Err(Error::config("obstacles", "acc has no obstacles"));
            }
            if ob.min().len() != dims || ob.max().len() != dims {
                return Err(Error::config(
                    "obstacles",
                    format!("obstacle {i} needs {dims} coordinates per corner"),
                ));
            }
            if ob.min().iter().zip(ob.max()).any(|(lo, hi)| !(lo < hi)) {
                return Err(Error::config("obstacles", format!("obstacle {i} has empty extent")));
            }
        }
        let n = kind.model().state_dim();
        if self.initial.offset.len() != n {
            return Err(Error::config(
                "initial.offset",
                format!("needs {n} components, got {}", self.initial.offset.len()),
            ));
        }
        if let Some([lo, hi]) = &self.initial.offset_range {
            if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                return Err(Error::config(
                    "initial.offset_range",
                    format!("needs ordered bounds with {n} components"),
                ));
            }
        }
        self.lookahead.validate(n)?;
        Ok(())
    }
}
