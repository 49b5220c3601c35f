//! Untrusted and safety control laws for the car-following, ground-vehicle,
//! and aircraft scenarios.
//!
//! The ground and air trackers share one steering law,
//! `omega = omega_ref + v_ref (k1 e_y + k2 sin(psi_ref - psi))`, where `e_y` is
//! the reference point's lateral offset in the follower's body frame.

use serde::{Deserialize, Serialize};

use crate::dynamics::{AccState, AirState, ControlInput, DubinsState};
use crate::error::{Error, Result};
use crate::scalar::{clamp, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains<S> {
    pub k1: S,
    pub k2: S,
    pub k3: S,
    pub k4: S,
    /// Along-track catch-up gain of the untrusted trackers; 0 gives a pure speed match.
    pub kx: S,
    pub a_max: S,
    pub omega_max: S,
    pub gamma_max: S,
    /// Tracking distance behind the leader.
    pub d: S,
    /// Air only: how far below the leader the untrusted reference sits.
    pub delta_z: S,
    /// Collision radius.
    pub c: S,
}

impl<S: Scalar> Default for Gains<S> {
    fn default() -> Self {
        Self {
            k1: S::lit(0.05),
            k2: S::lit(1.0),
            k3: S::lit(0.5),
            k4: S::lit(1.0),
            kx: S::lit(0.2),
            a_max: S::lit(3.0),
            omega_max: S::lit(0.5),
            gamma_max: S::lit(0.3),
            d: S::lit(10.0),
            delta_z: S::lit(10.0),
            c: S::lit(4.0),
        }
    }
}

impl<S: Scalar> Gains<S> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("a_max", self.a_max),
            ("omega_max", self.omega_max),
            ("gamma_max", self.gamma_max),
            ("d", self.d),
            ("delta_z", self.delta_z),
            ("c", self.c),
        ];
        for (name, v) in fields {
            if !(v > S::zero() && v.is_finite()) {
                return Err(Error::config(format!("gains.{name}"), format!("{v} must be positive")));
            }
        }
        if !(self.kx >= S::zero() && self.kx.is_finite()) {
            return Err(Error::config("gains.kx", format!("{} must be non-negative", self.kx)));
        }
        if self.c >= self.d {
            return Err(Error::config("gains.c", format!("c = {} must be below d = {}", self.c, self.d)));
        }
        Ok(())
    }
}

/// Bang-bang: full acceleration while at or behind `x_l - d`, full braking ahead of it.
pub fn acc_untrusted<S: Scalar>(q: &AccState<S>, leader: &AccState<S>, g: &Gains<S>) -> ControlInput<S> {
    let a = if q.x > leader.x - g.d { -g.a_max } else { g.a_max };
    ControlInput::Acc { a }
}

/// PD on position and velocity error, saturated at `a_max`.
pub fn acc_safety<S: Scalar>(q: &AccState<S>, leader: &AccState<S>, g: &Gains<S>) -> ControlInput<S> {
    let raw = g.k1 * ((leader.x - g.d) - q.x) + g.k2 * (leader.v - q.v);
    ControlInput::Acc {
        a: clamp(raw, -g.a_max, g.a_max),
    }
}

/// Point and heading to track, with the feedforward heading rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingReference<S> {
    pub x: S,
    pub y: S,
    pub z: S,
    pub psi: S,
    pub v: S,
    pub omega: S,
}

/// Lateral offset of `(rx, ry)` in the body frame of a vehicle at `(x, y)` heading `psi`.
#[inline]
pub fn lateral_error<S: Scalar>(x: S, y: S, psi: S, rx: S, ry: S) -> S {
    let (s, c) = psi.sin_cos();
    -s * (rx - x) + c * (ry - y)
}

/// Offset of `(rx, ry)` along the heading of a vehicle at `(x, y)`.
#[inline]
pub fn along_error<S: Scalar>(x: S, y: S, psi: S, rx: S, ry: S) -> S {
    let (s, c) = psi.sin_cos();
    c * (rx - x) + s * (ry - y)
}

/// Untrusted speed loop: match the reference speed and close the along-track gap.
fn catch_up<S: Scalar>(x: S, y: S, psi: S, v: S, r: &TrackingReference<S>, g: &Gains<S>) -> S {
    let v_cmd = r.v + g.kx * along_error(x, y, psi, r.x, r.y);
    clamp(g.k3 * (v_cmd - v), -g.a_max, g.a_max)
}

fn steer<S: Scalar>(x: S, y: S, psi: S, r: &TrackingReference<S>, g: &Gains<S>) -> S {
    let e_y = lateral_error(x, y, psi, r.x, r.y);
    let omega = r.omega + r.v * (g.k1 * e_y + g.k2 * (r.psi - psi).sin());
    clamp(omega, -g.omega_max, g.omega_max)
}

/// Ground tracker; `allow_accel = false` is the safety variant, which never accelerates.
pub fn dubins_tracking<S: Scalar>(
    q: &DubinsState<S>,
    r: &TrackingReference<S>,
    g: &Gains<S>,
    allow_accel: bool,
) -> ControlInput<S> {
    let a = catch_up(q.x, q.y, q.psi, q.v, r, g);
    // the safety variant keeps only the braking half
    let a = if allow_accel { a } else { a.min(S::zero()) };
    ControlInput::Dubins {
        omega: steer(q.x, q.y, q.psi, r, g),
        a,
    }
}

/// Flight-path angle from the follower to the reference point.
pub fn pitch_to<S: Scalar>(q: &AirState<S>, r: &TrackingReference<S>) -> S {
    let horizontal = (r.x - q.x).hypot(r.y - q.y);
    (r.z - q.z).atan2(horizontal)
}

/// Air tracker; in safety mode the acceleration is zero. The caller picks the
/// reference (below the leader for `U`, at its altitude for `S`).
pub fn air_tracking<S: Scalar>(
    q: &AirState<S>,
    r: &TrackingReference<S>,
    g: &Gains<S>,
    safety_mode: bool,
) -> ControlInput<S> {
    let gamma_rate = clamp(g.k4 * (pitch_to(q, r) - q.gamma_p), -g.gamma_max, g.gamma_max);
    let a = if safety_mode {
        S::zero()
    } else {
        catch_up(q.x, q.y, q.psi, q.v, r, g)
    };
    ControlInput::Air {
        omega: steer(q.x, q.y, q.psi, r, g),
        gamma_rate,
        a,
    }
}
