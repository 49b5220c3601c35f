//! Closed intervals and a sound one-step flow enclosure for the agent models.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::dynamics::Model;

/// Outward slack on libm sin/cos results, which are not correctly rounded.
const TRIG_ULP: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "[{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(self, other: Self) -> Self {
        Self::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn is_finite(self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Widen by `abs + rel * |bound|` on each side.
    pub fn pad(self, rel: f64, abs: f64) -> Self {
        Self::new(
            self.lo - abs - rel * self.lo.abs(),
            self.hi + abs + rel * self.hi.abs(),
        )
    }

    pub fn scale(self, k: f64) -> Self {
        if k >= 0.0 {
            Self::new(self.lo * k, self.hi * k)
        } else {
            Self::new(self.hi * k, self.lo * k)
        }
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Self {
        Self::new(self.lo.clamp(lo, hi), self.hi.clamp(lo, hi))
    }

    pub fn sqr(self) -> Self {
        let (a, b) = (self.lo * self.lo, self.hi * self.hi);
        if self.contains(0.0) {
            Self::new(0.0, a.max(b))
        } else {
            Self::new(a.min(b), a.max(b))
        }
    }

    pub fn sqrt(self) -> Self {
        Self::new(self.lo.max(0.0).sqrt(), self.hi.max(0.0).sqrt())
    }

    pub fn hypot(self, other: Self) -> Self {
        (self.sqr() + other.sqr()).sqrt()
    }

    pub fn sin(self) -> Self {
        if self.width() >= TAU || !self.is_finite() {
            return Self::new(-1.0, 1.0);
        }
        let (a, b) = (self.lo.sin(), self.hi.sin());
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        if self.contains_phase(FRAC_PI_2) {
            hi = 1.0;
        }
        if self.contains_phase(-FRAC_PI_2) {
            lo = -1.0;
        }
        Self::new(lo, hi).pad(0.0, TRIG_ULP).clamp(-1.0, 1.0)
    }

    pub fn cos(self) -> Self {
        if self.width() >= TAU || !self.is_finite() {
            return Self::new(-1.0, 1.0);
        }
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        if self.contains_phase(0.0) {
            hi = 1.0;
        }
        if self.contains_phase(PI) {
            lo = -1.0;
        }
        Self::new(lo, hi).pad(0.0, TRIG_ULP).clamp(-1.0, 1.0)
    }

    /// Whether some `phase + 2 k pi` lies in the interval.
    fn contains_phase(self, phase: f64) -> bool {
        let k = ((self.lo - phase) / TAU).ceil();
        phase + k * TAU <= self.hi
    }

    pub fn atan(self) -> Self {
        Self::new(self.lo.atan(), self.hi.atan())
    }

    /// `atan2(self, x)` for `x > 0`; the full half-plane range otherwise.
    pub fn atan2(self, x: Self) -> Self {
        if x.lo <= 0.0 {
            return Self::new(-PI, PI);
        }
        let q = [self.lo / x.lo, self.lo / x.hi, self.hi / x.lo, self.hi / x.hi];
        let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(lo, hi).atan()
    }
}

impl Add for Interval {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }
}

impl Sub for Interval {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.lo - o.hi, self.hi - o.lo)
    }
}

impl Neg for Interval {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(lo, hi)
    }
}

impl Add<f64> for Interval {
    type Output = Self;
    fn add(self, k: f64) -> Self {
        Self::new(self.lo + k, self.hi + k)
    }
}

impl Mul<f64> for Interval {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.scale(k)
    }
}

/// Interval extension of the model right-hand side.
pub fn rhs(model: Model, x: &[Interval], u: &[Interval]) -> Vec<Interval> {
    match model {
        Model::Acc => vec![x[1], u[0]],
        Model::Dubins => {
            let (s, c) = (x[2].sin(), x[2].cos());
            vec![x[3] * c, x[3] * s, u[0], u[1]]
        }
        Model::Air => {
            let (sp, cp) = (x[3].sin(), x[3].cos());
            let (sg, cg) = (x[4].sin(), x[4].cos());
            vec![x[5] * cp * cg, x[5] * sp * cg, x[5] * sg, u[0], u[1], u[2]]
        }
    }
}

/// Outward padding applied after every enclosure step to absorb rounding.
const PAD_REL: f64 = 1e-12;
const PAD_ABS: f64 = 1e-12;

fn subset(a: &[Interval], b: &[Interval]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.is_subset_of(*y))
}

/// Flow of the box `x` over `[0, h]` under any constant input in `u`.
///
/// Finds `B` with `x + [0, h] F(B) ⊆ B`, which keeps every trajectory in `B`
/// for the whole step, and returns `(B, x + h F(B))`. `None` if no such `B`
/// is found after repeated inflation.
pub fn flow_step(
    model: Model,
    x: &[Interval],
    u: &[Interval],
    h: f64,
) -> Option<(Vec<Interval>, Vec<Interval>)> {
    let sweep = Interval::new(0.0, h);
    let f0 = rhs(model, x, u);
    let mut b: Vec<Interval> = x
        .iter()
        .zip(&f0)
        .map(|(xi, fi)| {
            let r = *xi + sweep * *fi;
            r.pad(0.0, 0.1 * r.width() + 1e-9)
        })
        .collect();
    for _ in 0..30 {
        let fb = rhs(model, &b, u);
        let cand: Vec<Interval> = x.iter().zip(&fb).map(|(xi, fi)| *xi + sweep * *fi).collect();
        if cand.iter().any(|c| !c.is_finite()) {
            return None;
        }
        if subset(&cand, &b) {
            // `cand` is itself an enclosure of the flow over [0, h].
            let fc = rhs(model, &cand, u);
            let end = x
                .iter()
                .zip(&fc)
                .map(|(xi, fi)| (*xi + *fi * Interval::point(h)).pad(PAD_REL, PAD_ABS))
                .collect();
            return Some((cand, end));
        }
        b = b
            .iter()
            .zip(&cand)
            .map(|(bi, ci)| {
                let r = bi.hull(*ci);
                r.pad(0.0, 0.5 * r.width() + 1e-9)
            })
            .collect();
    }
    None
}
