//! Closed-form leader paths, so the leader state at any time is exact.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeaderConfig {
    pub speed: f64,
    /// Orbit radius along x (and y unless `radius_y` is set). Ignored by `acc`.
    pub radius: f64,
    pub radius_y: Option<f64>,
    /// Fly the straight line of `line_at` instead of the orbit.
    pub straight: bool,
    pub center: [f64; 2],
    /// Starting orbit angle (rad).
    pub phase: f64,
    /// Acc only: starting position.
    pub start: f64,
    pub altitude: f64,
    pub altitude_amp: f64,
    pub altitude_period: f64,
}

impl Default for LeaderConfig {
    fn default() -> Self {
        Self {
            speed: 10.0,
            radius: 100.0,
            radius_y: None,
            straight: false,
            center: [0.0, 0.0],
            phase: 0.0,
            start: 0.0,
            altitude: 100.0,
            altitude_amp: 0.0,
            altitude_period: 60.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LeaderState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
    pub gamma_p: f64,
    pub v: f64,
    /// Heading rate.
    pub omega: f64,
}

impl LeaderState {
    pub fn position(&self, dims: usize) -> [f64; 3] {
        match dims {
            1 => [self.x, 0.0, 0.0],
            2 => [self.x, self.y, 0.0],
            _ => [self.x, self.y, self.z],
        }
    }
}

impl LeaderConfig {
    pub fn validate(&self, orbit: bool) -> Result<()> {
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::config("leader.speed", "must be positive"));
        }
        if orbit && !self.straight {
            if !(self.radius > 0.0) || self.radius_y.is_some_and(|r| !(r > 0.0)) {
                return Err(Error::config("leader.radius", "must be positive"));
            }
            if self.altitude_amp != 0.0 && !(self.altitude_period > 0.0) {
                return Err(Error::config("leader.altitude_period", "must be positive"));
            }
        }
        Ok(())
    }

    /// Constant-speed straight line along x at the configured altitude.
    pub fn line_at(&self, t: f64) -> LeaderState {
        LeaderState {
            x: self.start + self.speed * t,
            z: self.altitude,
            v: self.speed,
            ..LeaderState::default()
        }
    }

    /// Counter-clockwise ellipse with semi-axes `(radius, radius_y)`, swept at
    /// the angular rate that gives `speed` on a circle of the mean radius, plus
    /// an optional sinusoidal altitude profile.
    pub fn orbit_at(&self, t: f64) -> LeaderState {
        let a = self.radius;
        let b = self.radius_y.unwrap_or(a);
        let rate = self.speed / (0.5 * (a + b));
        let theta = self.phase + rate * t;
        let (s, c) = theta.sin_cos();
        let vx = -a * rate * s;
        let vy = b * rate * c;
        let horizontal = vx.hypot(vy);
        let (z, vz) = if self.altitude_amp != 0.0 {
            let w = TAU / self.altitude_period;
            (
                self.altitude + self.altitude_amp * (w * t).sin(),
                self.altitude_amp * w * (w * t).cos(),
            )
        } else {
            (self.altitude, 0.0)
        };
        LeaderState {
            x: self.center[0] + a * c,
            y: self.center[1] + b * s,
            z,
            psi: vy.atan2(vx),
            gamma_p: vz.atan2(horizontal),
            v: horizontal.hypot(vz),
            omega: rate * a * b / (a * a * s * s + b * b * c * c),
        }
    }
}
